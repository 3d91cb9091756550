#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "eor/domain.hpp"
#include "eor/records.hpp"

namespace eor {

inline constexpr std::size_t kMaxAnswerTokens = 5;
inline constexpr std::size_t kMaxExhaustivePool = 16;

/// Per (sample, retriever) indicators, row-major over samples.
class ErrorIndicators {
public:
    ErrorIndicators(std::vector<std::string> sample_ids, std::vector<std::string> retrievers,
                    std::vector<Indicators> cells);

    std::size_t samples() const { return sample_ids_.size(); }
    std::size_t retrievers() const { return retrievers_.size(); }
    const Indicators& at(std::size_t sample, std::size_t retriever) const {
        return cells_[sample * retrievers_.size() + retriever];
    }
    const std::vector<std::string>& sample_ids() const { return sample_ids_; }
    const std::vector<std::string>& retriever_names() const { return retrievers_; }

    IndicatorMatrix correctness() const;

private:
    std::vector<std::string> sample_ids_;
    std::vector<std::string> retrievers_;
    std::vector<Indicators> cells_;
};

ErrorIndicators compute_indicators(const RunTable& table, Grader& grader);

/// Indicators as persisted in the records, without regrading.
ErrorIndicators stored_indicators(const RunTable& table);

/// Drops every sample where any retriever's answer exceeds `max_tokens`
/// normalized tokens.
RunTable length_filter(const RunTable& table, std::size_t max_tokens = kMaxAnswerTokens);

/// A ratio with an explicit undefined state (zero denominator).
struct RatioCell {
    std::optional<double> value;

    bool defined() const { return value.has_value(); }
    /// The value, or -1 when undefined.
    double or_sentinel() const { return value.value_or(-1.0); }

    bool operator==(const RatioCell&) const = default;
};

/// Share of j's failures that i answers correctly.
RatioCell rwr(std::span<const std::uint8_t> correct_i, std::span<const std::uint8_t> correct_j);

/// M x M matrix of rwr(i, j), row-major.
std::vector<RatioCell> rwr_matrix(const IndicatorMatrix& correctness);

/// Mean of the defined rwr(i, j), j != i.
std::vector<RatioCell> mrwr(const IndicatorMatrix& correctness);
/// Mean of the defined rwr(j, i), j != i.
std::vector<RatioCell> mrlr(const IndicatorMatrix& correctness);

enum class ErrorKind { Retriever, Hallucination, Extraction, LuckyGuess };

std::string_view to_string(ErrorKind kind);
ErrorKind error_kind_from_string(std::string_view name);

/// Share of j's occurrences of the error that i avoids, restricted to the
/// samples where the kind's mask holds: both documents correct for
/// extraction errors, both retrievers wrong-doc and ungrounded for lucky
/// guesses, every sample otherwise.
RatioCell error_rwr(ErrorKind kind, const ErrorIndicators& indicators, std::size_t i, std::size_t j);
std::vector<RatioCell> error_rwr_matrix(ErrorKind kind, const ErrorIndicators& indicators);

/// Accuracy of a perfect selector over `subset`.
double ensemble_upper_bound(const IndicatorMatrix& correctness, std::span<const std::size_t> subset);

struct UpperBoundDistribution {
    std::size_t subset_size = 0;
    std::vector<double> values;
    bool sampled = false;
};

/// Upper bound for every subset size. Pools up to kMaxExhaustivePool are
/// enumerated exhaustively; larger pools sample `samples_per_size` subsets
/// per size uniformly.
std::vector<UpperBoundDistribution> upper_bound_by_size(const IndicatorMatrix& correctness,
                                                        std::size_t samples_per_size = 200,
                                                        std::uint64_t seed = 0);

/// CSV with a header row of retriever names; undefined cells print as -1.
void write_heatmap_csv(std::ostream& out, const std::vector<std::string>& names,
                       const std::vector<RatioCell>& cells);

/// Fixed six-decimal rendering used by every CSV/JSON export.
std::string format_ratio(double value);

}  // namespace eor
