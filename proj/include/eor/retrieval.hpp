#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>

#include "eor/domain.hpp"
#include "eor/dsl.hpp"
#include "eor/reader.hpp"
#include "eor/scorer.hpp"
#include "eor/transport.hpp"

namespace eor {

inline constexpr std::size_t kWebChunkTokens = 100;
inline constexpr std::size_t kTopPageTokens = 1000;
inline constexpr std::size_t kPerPageTokens = 250;
inline constexpr int kHybridWikiDepth = 20;

/// Supplies ranked chunks for a query. Search adapters return one chunk per
/// fetched page, in the engine's native ranking; the engine applies the
/// word budgets.
class SourceAdapter {
public:
    virtual ~SourceAdapter() = default;
    virtual SourceTag tag() const = 0;
    virtual ChunkList fetch(const Query& query) = 0;
};

/// Reads JSON Lines records {query_id, chunks: [{text, score?}]}.
class FixtureSourceAdapter : public SourceAdapter {
public:
    FixtureSourceAdapter(SourceTag tag, const std::filesystem::path& path);

    SourceTag tag() const override { return tag_; }
    ChunkList fetch(const Query& query) override;

private:
    SourceTag tag_;
    std::string path_;
    std::unordered_map<std::string, ChunkList> by_query_;
};

/// POST {query_text} and expect {chunks: [{text, score?}]}.
class HttpSourceAdapter : public SourceAdapter {
public:
    HttpSourceAdapter(SourceTag tag, std::shared_ptr<Transport> transport, Endpoint endpoint)
        : tag_(tag), transport_(std::move(transport)), endpoint_(std::move(endpoint)) {}

    SourceTag tag() const override { return tag_; }
    ChunkList fetch(const Query& query) override;

private:
    SourceTag tag_;
    std::shared_ptr<Transport> transport_;
    Endpoint endpoint_;
};

class RerankScorer {
public:
    virtual ~RerankScorer() = default;
    virtual double score(const std::string& query_text, const std::string& chunk_text) = 0;
};

/// Relevance scores from the scoring service under metric id "rerank".
class ServiceRerankScorer : public RerankScorer {
public:
    explicit ServiceRerankScorer(std::shared_ptr<ScorerClient> client) : client_(std::move(client)) {}

    double score(const std::string& query_text, const std::string& chunk_text) override;

private:
    std::shared_ptr<ScorerClient> client_;
};

inline constexpr const char* kRerankMetricId = "rerank";

/// Whitespace tokens of raw text (no normalization).
std::vector<std::string> raw_tokens(std::string_view text);

/// First `budget` raw tokens joined by single spaces.
std::string truncate_words(std::string_view text, std::size_t budget);

/// Non-overlapping windows of exactly `window` raw tokens (the last one may
/// be shorter).
std::vector<std::string> window_tokens(std::string_view text, std::size_t window);

ChunkList truncate(const ChunkList& chunks, int k);
ChunkList concat(std::span<const ChunkList> lists);

/// Stable sort by score descending; fills rank_score.
ChunkList rerank(const Query& query, const ChunkList& chunks, RerankScorer& scorer);

/// Query-focused summary of the document, as a single parametric chunk.
/// An empty document short-circuits without calling the reader.
Document compress(const Query& query, const Document& document, TextGenerator& reader,
                  TemplateFamily family);

/// Generated background document; empty output yields an empty list.
/// Output longer than one web chunk is windowed like web text.
ChunkList parametric_knowledge(const Query& query, TextGenerator& reader, TemplateFamily family);

struct RetrievalBackends {
    SourceAdapter* search = nullptr;
    SourceAdapter* wiki = nullptr;
    RerankScorer* reranker = nullptr;
    TextGenerator* reader = nullptr;
    TemplateFamily family = TemplateFamily::ChatInstruct15Words;
};

class PlanExecutionError : public Error {
public:
    PlanExecutionError(const std::string& path, const std::string& message)
        : Error(path + ": " + message), path_(path) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Bottom-up evaluation of a plan for one query.
Document execute_plan(const RetrievalPlan& plan, const Query& query, const RetrievalBackends& backends);

}  // namespace eor
