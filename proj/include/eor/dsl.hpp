#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "eor/domain.hpp"

namespace eor {

enum class SourceKind { SE, Wiki, PK, HB, ReFree };

std::string_view to_string(SourceKind kind);

/// Parsed retriever pipeline. Leaves are sources; inner nodes are the four
/// document operations.
///
/// Grammar (precedence @RR > @k > & > @CP):
///   expr := term ("&" term)* ("@CP")?
///   term := SOURCE ("@RR")? ("@" INT)?
struct RetrievalPlan {
    enum class Op { Source, Rerank, Truncate, Concat, Compress };

    Op op = Op::Source;
    SourceKind source = SourceKind::ReFree;
    int k = 0;
    std::vector<RetrievalPlan> children;

    static RetrievalPlan make_source(SourceKind kind);
    static RetrievalPlan make_rerank(RetrievalPlan child);
    static RetrievalPlan make_truncate(RetrievalPlan child, int k);
    static RetrievalPlan make_concat(std::vector<RetrievalPlan> children);
    static RetrievalPlan make_compress(RetrievalPlan child);

    const RetrievalPlan& child() const { return children.front(); }

    bool operator==(const RetrievalPlan& other) const;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset);

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

RetrievalPlan parse_plan(std::string_view expr);

/// Canonical expression string; parse_plan(format_plan(p)) == p.
std::string format_plan(const RetrievalPlan& plan);

/// Throws Error if the plan violates the structural rules (ReFree only as a
/// whole plan, k >= 1, concat arity >= 2, compress only at the root).
void validate_plan(const RetrievalPlan& plan);

/// Debug rendering of the tree, e.g. "Compress(Truncate(Source(SE),1))".
std::string describe_plan(const RetrievalPlan& plan);

/// The fifteen pipelines of the reference retriever pool, followed by ReFree.
const std::vector<std::string>& reference_retriever_pool();

}  // namespace eor
