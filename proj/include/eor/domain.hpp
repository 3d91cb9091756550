#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Query {
    std::string id;
    std::string text;

    Query(std::string id_, std::string text_);
};

/// Alias list standing in for the set of correct answers. Aliases are
/// deduplicated by normalized form; the first spelling wins.
class GoldAnswerSet {
public:
    explicit GoldAnswerSet(std::vector<std::string> aliases);

    const std::vector<std::string>& aliases() const { return aliases_; }

private:
    std::vector<std::string> aliases_;
};

enum class SourceTag { Search, Wiki, Parametric };

std::string_view to_string(SourceTag tag);
SourceTag source_tag_from_string(std::string_view name);

struct Chunk {
    std::string text;
    SourceTag source = SourceTag::Search;
    std::optional<double> rank_score;

    bool operator==(const Chunk&) const = default;
};

using ChunkList = std::vector<Chunk>;

inline constexpr std::string_view kChunkSeparator = "\n";

/// A retrieved document. The rendered text is always the chunk texts joined
/// by a single newline.
class Document {
public:
    Document() = default;
    explicit Document(ChunkList chunks) : chunks_(std::move(chunks)) {}

    const ChunkList& chunks() const { return chunks_; }
    std::string text() const;
    bool empty() const { return chunks_.empty(); }

    bool operator==(const Document&) const = default;

private:
    ChunkList chunks_;
};

struct CandidateAnswer {
    int retriever_index = 0;
    std::string text;
    std::size_t token_count = 0;

    CandidateAnswer(int index, std::string answer);
};

/// N x M binary matrix: rows are samples, columns retrievers.
class IndicatorMatrix {
public:
    IndicatorMatrix(std::vector<std::string> row_ids, std::vector<std::string> column_ids,
                    std::vector<std::uint8_t> values);

    std::size_t rows() const { return row_ids_.size(); }
    std::size_t cols() const { return column_ids_.size(); }
    std::uint8_t at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    std::vector<std::uint8_t> column(std::size_t col) const;

    const std::vector<std::string>& row_ids() const { return row_ids_; }
    const std::vector<std::string>& column_ids() const { return column_ids_; }
    const std::vector<std::uint8_t>& values() const { return values_; }

    bool operator==(const IndicatorMatrix&) const = default;

private:
    std::vector<std::string> row_ids_;
    std::vector<std::string> column_ids_;
    std::vector<std::uint8_t> values_;
};

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse
/// whitespace. Bytes outside ASCII pass through unchanged.
std::string normalize_answer(std::string_view text);

/// Whitespace tokens of the normalized text.
std::vector<std::string> normalized_tokens(std::string_view text);

std::size_t token_count(std::string_view text);

/// True iff some alias, normalized, occurs as a contiguous run of
/// normalized tokens of the text. An alias that normalizes to nothing never
/// matches.
bool contains_answer(std::string_view document_text, std::span<const std::string> aliases);
bool contains_answer(const Document& document, const GoldAnswerSet& answers);

/// Exact match of normalized forms against any alias.
bool exact_match_any(std::string_view answer, std::span<const std::string> aliases);

}  // namespace eor
