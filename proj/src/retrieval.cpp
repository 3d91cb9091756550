#include "eor/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

namespace eor {

namespace {

ChunkList chunks_from_json(const json& arr, SourceTag tag) {
    ChunkList out;
    for (const auto& c : arr) {
        Chunk chunk;
        chunk.text = c.at("text").get<std::string>();
        chunk.source = tag;
        if (c.contains("score") && !c["score"].is_null()) chunk.rank_score = c["score"].get<double>();
        out.push_back(std::move(chunk));
    }
    return out;
}

}  // namespace

FixtureSourceAdapter::FixtureSourceAdapter(SourceTag tag, const std::filesystem::path& path)
    : tag_(tag), path_(path.string()) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open source fixture " + path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto record = json::parse(line);
            by_query_[record.at("query_id").get<std::string>()] =
                chunks_from_json(record.at("chunks"), tag_);
        } catch (const json::exception& e) {
            throw Error(path_ + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

ChunkList FixtureSourceAdapter::fetch(const Query& query) {
    auto it = by_query_.find(query.id);
    if (it == by_query_.end()) {
        throw Error("source fixture " + path_ + " has no entry for query " + query.id);
    }
    return it->second;
}

ChunkList HttpSourceAdapter::fetch(const Query& query) {
    if (!transport_ || endpoint_.empty()) {
        throw TransportError(std::string(to_string(tag_)) + " source endpoint not configured");
    }
    const json reply =
        transport_->post_json(endpoint_.url, json{{"query_text", query.text}}, endpoint_.headers());
    if (!reply.contains("chunks") || !reply["chunks"].is_array()) {
        throw TransportError("source service reply lacks a 'chunks' array");
    }
    return chunks_from_json(reply["chunks"], tag_);
}

double ServiceRerankScorer::score(const std::string& query_text, const std::string& chunk_text) {
    return client_->score(kRerankMetricId, query_text, chunk_text);
}

std::vector<std::string> raw_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t first, std::size_t last) {
    std::string out;
    for (std::size_t i = first; i < last; ++i) {
        if (i > first) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace

std::string truncate_words(std::string_view text, std::size_t budget) {
    const auto tokens = raw_tokens(text);
    return join_tokens(tokens, 0, std::min(budget, tokens.size()));
}

std::vector<std::string> window_tokens(std::string_view text, std::size_t window) {
    if (window == 0) throw Error("window size must be positive");
    const auto tokens = raw_tokens(text);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tokens.size(); i += window) {
        out.push_back(join_tokens(tokens, i, std::min(i + window, tokens.size())));
    }
    return out;
}

ChunkList truncate(const ChunkList& chunks, int k) {
    if (k < 1) throw Error("truncation k must be >= 1");
    const auto n = std::min(chunks.size(), static_cast<std::size_t>(k));
    return ChunkList(chunks.begin(), chunks.begin() + static_cast<std::ptrdiff_t>(n));
}

ChunkList concat(std::span<const ChunkList> lists) {
    ChunkList out;
    for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
    return out;
}

ChunkList rerank(const Query& query, const ChunkList& chunks, RerankScorer& scorer) {
    ChunkList out = chunks;
    for (auto& c : out) {
        const double s = scorer.score(query.text, c.text);
        if (!std::isfinite(s)) throw Error("reranker returned a non-finite score");
        c.rank_score = s;
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Chunk& a, const Chunk& b) { return *a.rank_score > *b.rank_score; });
    return out;
}

Document compress(const Query& query, const Document& document, TextGenerator& reader,
                  TemplateFamily family) {
    if (document.empty()) return Document{};
    const auto summary = reader.complete(render_prompt(PromptKind::Compress, family, query, document));
    if (summary.empty()) return Document{};
    return Document(ChunkList{Chunk{summary, SourceTag::Parametric, std::nullopt}});
}

ChunkList parametric_knowledge(const Query& query, TextGenerator& reader, TemplateFamily family) {
    const auto text = reader.complete(render_prompt(PromptKind::Parametric, family, query));
    ChunkList out;
    if (raw_tokens(text).empty()) return out;
    if (raw_tokens(text).size() <= kWebChunkTokens) {
        out.push_back(Chunk{text, SourceTag::Parametric, std::nullopt});
        return out;
    }
    for (auto& w : window_tokens(text, kWebChunkTokens)) {
        out.push_back(Chunk{std::move(w), SourceTag::Parametric, std::nullopt});
    }
    return out;
}

namespace {

// How fetched search pages are cut into chunks. Reranked pipelines work on
// fixed windows; a top-1 truncation keeps one long page; otherwise each
// page contributes one budgeted chunk.
enum class SearchLayout { Windows, TopPage, Pages };

class Evaluator {
public:
    Evaluator(const Query& query, const RetrievalBackends& backends)
        : query_(query), backends_(backends) {}

    ChunkList eval(const RetrievalPlan& node, SearchLayout layout, const std::string& parent_path) {
        const std::string path =
            parent_path.empty() ? format_plan(node) : parent_path + " > " + format_plan(node);
        try {
            return eval_node(node, layout, path);
        } catch (const PlanExecutionError&) {
            throw;
        } catch (const std::exception& e) {
            throw PlanExecutionError(path, e.what());
        }
    }

private:
    ChunkList eval_node(const RetrievalPlan& node, SearchLayout layout, const std::string& path) {
        using Op = RetrievalPlan::Op;
        switch (node.op) {
            case Op::Source:
                return source(node.source, layout);
            case Op::Rerank: {
                auto chunks = eval(node.child(), SearchLayout::Windows, path);
                if (!backends_.reranker) throw Error("no rerank scorer configured");
                return rerank(query_, chunks, *backends_.reranker);
            }
            case Op::Truncate: {
                SearchLayout child_layout = layout;
                if (node.child().op == Op::Source && node.child().source == SourceKind::SE) {
                    child_layout = node.k == 1 ? SearchLayout::TopPage : SearchLayout::Pages;
                }
                return truncate(eval(node.child(), child_layout, path), node.k);
            }
            case Op::Concat: {
                std::vector<ChunkList> parts;
                for (const auto& c : node.children) parts.push_back(eval(c, layout, path));
                return concat(parts);
            }
            case Op::Compress: {
                Document inner(eval(node.child(), layout, path));
                if (!backends_.reader) throw Error("no reader configured for compression");
                return compress(query_, inner, *backends_.reader, backends_.family).chunks();
            }
        }
        throw Error("unknown plan node");
    }

    ChunkList source(SourceKind kind, SearchLayout layout) {
        switch (kind) {
            case SourceKind::ReFree:
                return {};
            case SourceKind::SE:
                return search(layout);
            case SourceKind::Wiki:
                if (!backends_.wiki) throw Error("no wiki source configured");
                return backends_.wiki->fetch(query_);
            case SourceKind::PK:
                if (!backends_.reader) throw Error("no reader configured for parametric knowledge");
                return parametric_knowledge(query_, *backends_.reader, backends_.family);
            case SourceKind::HB: {
                std::vector<ChunkList> parts;
                parts.push_back(search(SearchLayout::Windows));
                parts.push_back(truncate(source(SourceKind::Wiki, layout), kHybridWikiDepth));
                parts.push_back(source(SourceKind::PK, layout));
                return concat(parts);
            }
        }
        throw Error("unknown source kind");
    }

    ChunkList search(SearchLayout layout) {
        if (!backends_.search) throw Error("no search source configured");
        const auto pages = backends_.search->fetch(query_);
        ChunkList out;
        switch (layout) {
            case SearchLayout::Windows:
                for (const auto& page : pages) {
                    for (auto& w : window_tokens(page.text, kWebChunkTokens)) {
                        out.push_back(Chunk{std::move(w), SourceTag::Search, std::nullopt});
                    }
                }
                break;
            case SearchLayout::TopPage:
                if (!pages.empty()) {
                    out.push_back(Chunk{truncate_words(pages.front().text, kTopPageTokens),
                                        SourceTag::Search, pages.front().rank_score});
                }
                break;
            case SearchLayout::Pages:
                for (const auto& page : pages) {
                    out.push_back(Chunk{truncate_words(page.text, kPerPageTokens), SourceTag::Search,
                                        page.rank_score});
                }
                break;
        }
        return out;
    }

    const Query& query_;
    const RetrievalBackends& backends_;
};

}  // namespace

Document execute_plan(const RetrievalPlan& plan, const Query& query, const RetrievalBackends& backends) {
    validate_plan(plan);
    Evaluator evaluator(query, backends);
    return Document(evaluator.eval(plan, SearchLayout::Pages, ""));
}

}  // namespace eor
