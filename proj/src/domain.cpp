#include "eor/domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace eor {

Query::Query(std::string id_, std::string text_) : id(std::move(id_)), text(std::move(text_)) {
    if (text.empty()) {
        throw Error("query '" + id + "' has empty text");
    }
}

GoldAnswerSet::GoldAnswerSet(std::vector<std::string> aliases) {
    std::set<std::string> seen;
    for (auto& alias : aliases) {
        if (seen.insert(normalize_answer(alias)).second) {
            aliases_.push_back(std::move(alias));
        }
    }
    if (aliases_.empty()) {
        throw Error("gold answer set needs at least one alias");
    }
}

std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::Search: return "search";
        case SourceTag::Wiki: return "wiki";
        case SourceTag::Parametric: return "parametric";
    }
    return "search";
}

SourceTag source_tag_from_string(std::string_view name) {
    if (name == "search") return SourceTag::Search;
    if (name == "wiki") return SourceTag::Wiki;
    if (name == "parametric") return SourceTag::Parametric;
    throw Error("unknown source tag '" + std::string(name) + "'");
}

std::string Document::text() const {
    std::string out;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        if (i > 0) out += kChunkSeparator;
        out += chunks_[i].text;
    }
    return out;
}

CandidateAnswer::CandidateAnswer(int index, std::string answer)
    : retriever_index(index), text(std::move(answer)), token_count(eor::token_count(text)) {}

IndicatorMatrix::IndicatorMatrix(std::vector<std::string> row_ids,
                                 std::vector<std::string> column_ids,
                                 std::vector<std::uint8_t> values)
    : row_ids_(std::move(row_ids)), column_ids_(std::move(column_ids)), values_(std::move(values)) {
    if (values_.size() != row_ids_.size() * column_ids_.size()) {
        throw Error("indicator matrix size does not match its id lists");
    }
    for (auto v : values_) {
        if (v > 1) throw Error("indicator matrix entries must be 0 or 1");
    }
}

std::vector<std::uint8_t> IndicatorMatrix::column(std::size_t col) const {
    std::vector<std::uint8_t> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
    return out;
}

namespace {

bool is_article(std::string_view token) {
    return token == "a" || token == "an" || token == "the";
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::vector<std::string> normalized_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !is_article(current)) tokens.push_back(current);
        current.clear();
    };
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (is_space(c)) {
            flush();
        } else if (uc < 0x80 && std::ispunct(uc)) {
            continue;
        } else {
            current.push_back(uc < 0x80 ? static_cast<char>(std::tolower(uc)) : c);
        }
    }
    flush();
    return tokens;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    for (const auto& token : normalized_tokens(text)) {
        if (!out.empty()) out.push_back(' ');
        out += token;
    }
    return out;
}

std::size_t token_count(std::string_view text) {
    return normalized_tokens(text).size();
}

bool contains_answer(std::string_view document_text, std::span<const std::string> aliases) {
    const auto doc = normalized_tokens(document_text);
    for (const auto& alias : aliases) {
        const auto needle = normalized_tokens(alias);
        if (needle.empty() || needle.size() > doc.size()) continue;
        if (std::search(doc.begin(), doc.end(), needle.begin(), needle.end()) != doc.end()) {
            return true;
        }
    }
    return false;
}

bool contains_answer(const Document& document, const GoldAnswerSet& answers) {
    return contains_answer(document.text(), answers.aliases());
}

bool exact_match_any(std::string_view answer, std::span<const std::string> aliases) {
    const auto norm = normalize_answer(answer);
    return std::any_of(aliases.begin(), aliases.end(),
                       [&](const std::string& a) { return normalize_answer(a) == norm; });
}

}  // namespace eor
