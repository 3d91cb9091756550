#include "eor/dsl.hpp"

#include <cctype>
#include <charconv>
#include <limits>

namespace eor {

std::string_view to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::SE: return "SE";
        case SourceKind::Wiki: return "Wiki";
        case SourceKind::PK: return "PK";
        case SourceKind::HB: return "HB";
        case SourceKind::ReFree: return "ReFree";
    }
    return "ReFree";
}

RetrievalPlan RetrievalPlan::make_source(SourceKind kind) {
    RetrievalPlan p;
    p.op = Op::Source;
    p.source = kind;
    return p;
}

RetrievalPlan RetrievalPlan::make_rerank(RetrievalPlan child) {
    RetrievalPlan p;
    p.op = Op::Rerank;
    p.children.push_back(std::move(child));
    return p;
}

RetrievalPlan RetrievalPlan::make_truncate(RetrievalPlan child, int k) {
    RetrievalPlan p;
    p.op = Op::Truncate;
    p.k = k;
    p.children.push_back(std::move(child));
    return p;
}

RetrievalPlan RetrievalPlan::make_concat(std::vector<RetrievalPlan> children) {
    RetrievalPlan p;
    p.op = Op::Concat;
    p.children = std::move(children);
    return p;
}

RetrievalPlan RetrievalPlan::make_compress(RetrievalPlan child) {
    RetrievalPlan p;
    p.op = Op::Compress;
    p.children.push_back(std::move(child));
    return p;
}

bool RetrievalPlan::operator==(const RetrievalPlan& other) const {
    if (op != other.op) return false;
    if (op == Op::Source && source != other.source) return false;
    if (op == Op::Truncate && k != other.k) return false;
    return children == other.children;
}

ParseError::ParseError(const std::string& message, std::size_t offset)
    : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

namespace {

enum class TokenKind { Ident, Int, At, Amp, End };

struct Token {
    TokenKind kind;
    std::string_view text;
    std::size_t offset;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        if (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            throw ParseError("unexpected whitespace", pos_);
        }
        if (pos_ >= src_.size()) return {TokenKind::End, {}, pos_};
        const std::size_t start = pos_;
        const char c = src_[pos_];
        if (c == '@') {
            ++pos_;
            return {TokenKind::At, src_.substr(start, 1), start};
        }
        if (c == '&') {
            ++pos_;
            return {TokenKind::Amp, src_.substr(start, 1), start};
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            return {TokenKind::Int, src_.substr(start, pos_ - start), start};
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            return {TokenKind::Ident, src_.substr(start, pos_ - start), start};
        }
        throw ParseError("unexpected character '" + std::string(1, c) + "'", start);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

bool is_operation_name(std::string_view name) {
    return name == "RR" || name == "CP";
}

bool lookup_source(std::string_view name, SourceKind& out) {
    for (auto kind : {SourceKind::SE, SourceKind::Wiki, SourceKind::PK, SourceKind::HB,
                      SourceKind::ReFree}) {
        if (name == to_string(kind)) {
            out = kind;
            return true;
        }
    }
    return false;
}

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { advance(); }

    RetrievalPlan parse() {
        if (cur_.kind == TokenKind::End) throw ParseError("empty expression", cur_.offset);

        std::vector<RetrievalPlan> terms;
        bool compress = false;
        std::size_t compress_offset = 0;
        std::size_t refree_offset = 0;
        bool saw_refree = false;
        for (;;) {
            const std::size_t term_offset = cur_.offset;
            terms.push_back(parse_term(compress, compress_offset));
            if (terms.back().op == RetrievalPlan::Op::Source &&
                terms.back().source == SourceKind::ReFree) {
                saw_refree = true;
                refree_offset = term_offset;
            }
            if (compress) break;
            if (cur_.kind == TokenKind::Amp) {
                const auto amp = cur_;
                advance();
                if (cur_.kind == TokenKind::End) throw ParseError("trailing operator '&'", amp.offset);
                continue;
            }
            break;
        }
        if (cur_.kind != TokenKind::End) {
            if (compress) {
                throw ParseError("'@CP' must apply to the whole expression", compress_offset);
            }
            throw ParseError("unexpected token '" + std::string(cur_.text) + "'", cur_.offset);
        }
        if (saw_refree && (terms.size() > 1 || compress)) {
            throw ParseError("ReFree cannot be combined with other operations", refree_offset);
        }

        RetrievalPlan plan = terms.size() == 1 ? std::move(terms.front())
                                               : RetrievalPlan::make_concat(std::move(terms));
        if (compress) plan = RetrievalPlan::make_compress(std::move(plan));
        return plan;
    }

private:
    void advance() { cur_ = lexer_.next(); }

    RetrievalPlan parse_term(bool& compress, std::size_t& compress_offset) {
        if (cur_.kind != TokenKind::Ident) {
            if (cur_.kind == TokenKind::End) throw ParseError("expected a source", cur_.offset);
            throw ParseError("operation with no source", cur_.offset);
        }
        SourceKind kind{};
        if (is_operation_name(cur_.text)) throw ParseError("operation with no source", cur_.offset);
        if (!lookup_source(cur_.text, kind)) {
            throw ParseError("unknown source '" + std::string(cur_.text) + "'", cur_.offset);
        }
        const std::size_t source_offset = cur_.offset;
        advance();

        RetrievalPlan plan = RetrievalPlan::make_source(kind);
        bool reranked = false;
        bool truncated = false;
        while (cur_.kind == TokenKind::At) {
            const auto at = cur_;
            advance();
            if (cur_.kind == TokenKind::End) throw ParseError("trailing operator '@'", at.offset);
            if (cur_.kind == TokenKind::Ident && cur_.text == "CP") {
                compress = true;
                compress_offset = at.offset;
                advance();
                break;
            }
            if (kind == SourceKind::ReFree) {
                throw ParseError("ReFree cannot be combined with other operations", source_offset);
            }
            if (cur_.kind == TokenKind::Ident && cur_.text == "RR") {
                if (reranked || truncated) {
                    throw ParseError("'@RR' must directly follow the source", at.offset);
                }
                reranked = true;
                plan = RetrievalPlan::make_rerank(std::move(plan));
                advance();
                continue;
            }
            if (cur_.kind == TokenKind::Int) {
                if (truncated) throw ParseError("duplicate truncation", at.offset);
                const int k = parse_k(cur_);
                truncated = true;
                plan = RetrievalPlan::make_truncate(std::move(plan), k);
                advance();
                continue;
            }
            throw ParseError("unknown operation '" + std::string(cur_.text) + "'", cur_.offset);
        }
        return plan;
    }

    static int parse_k(const Token& tok) {
        long long value = 0;
        const auto* first = tok.text.data();
        const auto* last = tok.text.data() + tok.text.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last) {
            if (ec == std::errc::result_out_of_range) throw ParseError("k out of range", tok.offset);
            throw ParseError("malformed integer '" + std::string(tok.text) + "'", tok.offset);
        }
        if (value <= 0) throw ParseError("k must be positive", tok.offset);
        if (value > std::numeric_limits<int>::max()) throw ParseError("k out of range", tok.offset);
        return static_cast<int>(value);
    }

    Lexer lexer_;
    Token cur_{TokenKind::End, {}, 0};
};

void format_into(const RetrievalPlan& plan, std::string& out) {
    using Op = RetrievalPlan::Op;
    switch (plan.op) {
        case Op::Source:
            out += to_string(plan.source);
            return;
        case Op::Rerank:
            format_into(plan.child(), out);
            out += "@RR";
            return;
        case Op::Truncate:
            format_into(plan.child(), out);
            out += "@" + std::to_string(plan.k);
            return;
        case Op::Concat:
            for (std::size_t i = 0; i < plan.children.size(); ++i) {
                if (i > 0) out += "&";
                format_into(plan.children[i], out);
            }
            return;
        case Op::Compress:
            format_into(plan.child(), out);
            out += "@CP";
            return;
    }
}

void validate_node(const RetrievalPlan& plan, bool is_root) {
    using Op = RetrievalPlan::Op;
    switch (plan.op) {
        case Op::Source:
            if (plan.source == SourceKind::ReFree && !is_root) {
                throw Error("ReFree may only appear as a whole plan");
            }
            if (!plan.children.empty()) throw Error("source node has children");
            return;
        case Op::Rerank:
        case Op::Truncate:
        case Op::Compress:
            if (plan.children.size() != 1) throw Error("unary operation needs exactly one child");
            if (plan.op == Op::Truncate && plan.k < 1) throw Error("truncation k must be >= 1");
            if (plan.op == Op::Compress && !is_root) throw Error("compression only allowed at the root");
            validate_node(plan.child(), false);
            return;
        case Op::Concat:
            if (plan.children.size() < 2) throw Error("concatenation needs at least two children");
            for (const auto& c : plan.children) validate_node(c, false);
            return;
    }
}

}  // namespace

RetrievalPlan parse_plan(std::string_view expr) {
    return Parser(expr).parse();
}

std::string format_plan(const RetrievalPlan& plan) {
    std::string out;
    format_into(plan, out);
    return out;
}

void validate_plan(const RetrievalPlan& plan) {
    validate_node(plan, true);
}

std::string describe_plan(const RetrievalPlan& plan) {
    using Op = RetrievalPlan::Op;
    switch (plan.op) {
        case Op::Source: return "Source(" + std::string(to_string(plan.source)) + ")";
        case Op::Rerank: return "Rerank(" + describe_plan(plan.child()) + ")";
        case Op::Truncate:
            return "Truncate(" + describe_plan(plan.child()) + "," + std::to_string(plan.k) + ")";
        case Op::Compress: return "Compress(" + describe_plan(plan.child()) + ")";
        case Op::Concat: {
            std::string out = "Concat(";
            for (std::size_t i = 0; i < plan.children.size(); ++i) {
                if (i > 0) out += ",";
                out += describe_plan(plan.children[i]);
            }
            return out + ")";
        }
    }
    return {};
}

const std::vector<std::string>& reference_retriever_pool() {
    static const std::vector<std::string> pool = {
        "Wiki@10",         "SE@1",           "SE@4",
        "PK",              "SE@RR@10",       "SE@2&Wiki@5",
        "SE@RR@5&Wiki@5",  "HB@RR@10",       "Wiki@10@CP",
        "SE@1@CP",         "SE@4@CP",        "SE@RR@10@CP",
        "SE@2&Wiki@5@CP",  "SE@RR@5&Wiki@5@CP", "HB@RR@10@CP",
        "ReFree",
    };
    return pool;
}

}  // namespace eor
