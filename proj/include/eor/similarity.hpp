#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eor/domain.hpp"
#include "eor/scorer.hpp"

namespace eor {

inline constexpr double kWeightUpperBound = 0.6;
inline constexpr double kDefaultRetrieverThreshold = 0.1;
inline constexpr double kDefaultEquivalenceThreshold = 0.8;

double em_similarity(std::string_view a, std::string_view b);

/// Harmonic mean of precision and recall over normalized token multisets.
double token_f1(std::string_view a, std::string_view b);

using WarningSink = std::function<void(const std::string&)>;

/// Service score clamped into [0, 1]; out-of-range values are reported to
/// `warn` before clamping.
double external_similarity(const std::string& a, const std::string& b, const std::string& metric_id,
                           ScorerClient& scorer, const WarningSink& warn = {});

class SimilarityMetric {
public:
    virtual ~SimilarityMetric() = default;
    virtual std::string id() const = 0;
    virtual bool symmetric() const = 0;
    virtual double score(const std::string& a, const std::string& b) = 0;
};

class EmMetric : public SimilarityMetric {
public:
    std::string id() const override { return "em"; }
    bool symmetric() const override { return true; }
    double score(const std::string& a, const std::string& b) override { return em_similarity(a, b); }
};

class TokenF1Metric : public SimilarityMetric {
public:
    std::string id() const override { return "token_f1"; }
    bool symmetric() const override { return true; }
    double score(const std::string& a, const std::string& b) override { return token_f1(a, b); }
};

/// Model-backed metric (BERTScore, NLI entailment, ...) served externally.
class ExternalMetric : public SimilarityMetric {
public:
    ExternalMetric(std::string metric_id, std::shared_ptr<ScorerClient> client, bool symmetric,
                   WarningSink warn = {})
        : id_(std::move(metric_id)), client_(std::move(client)), symmetric_(symmetric),
          warn_(std::move(warn)) {}

    std::string id() const override { return id_; }
    bool symmetric() const override { return symmetric_; }
    double score(const std::string& a, const std::string& b) override {
        return external_similarity(a, b, id_, *client_, warn_);
    }

private:
    std::string id_;
    std::shared_ptr<ScorerClient> client_;
    bool symmetric_;
    WarningSink warn_;
};

/// "em" and "token_f1" are built in; any other id becomes an ExternalMetric
/// (null client is an error for those).
std::unique_ptr<SimilarityMetric> make_metric(const std::string& id,
                                              std::shared_ptr<ScorerClient> client = {},
                                              WarningSink warn = {});

/// K base-metric scores for every ordered pair (m, n), m != n, of one
/// sample's M answers. Flat layout: index ((m * M) + n) * K + k.
class PairwiseSimilarityTensor {
public:
    PairwiseSimilarityTensor(std::size_t retrievers, std::size_t metrics);
    PairwiseSimilarityTensor(std::size_t retrievers, std::size_t metrics, std::vector<double> scores);

    std::size_t retrievers() const { return m_; }
    std::size_t metrics() const { return k_; }

    double at(std::size_t m, std::size_t n, std::size_t k) const;
    void set(std::size_t m, std::size_t n, std::size_t k, double value);

    const std::vector<double>& raw() const { return scores_; }

private:
    std::size_t m_;
    std::size_t k_;
    std::vector<double> scores_;
};

PairwiseSimilarityTensor build_similarity_tensor(std::span<const std::string> answers,
                                                 std::span<SimilarityMetric* const> metrics);

struct SimWeights {
    std::vector<double> values;
};

struct RetrieverWeights {
    std::vector<double> values;
    double threshold = kDefaultRetrieverThreshold;

    /// values[m] when above the threshold, else 0.
    double effective(std::size_t m) const { return values[m] > threshold ? values[m] : 0.0; }
    bool active(std::size_t m) const { return values[m] > threshold; }
};

/// Sum over metrics of weight times score for the ordered pair (m, n).
double weighted_similarity(std::size_t m, std::size_t n, const PairwiseSimilarityTensor& tensor,
                           const SimWeights& weights);

struct Pooling {
    enum class Kind { Mean, Max, Majority, Plurality };

    Kind kind = Kind::Mean;
    double threshold = kDefaultEquivalenceThreshold;

    static Pooling mean() { return {Kind::Mean, kDefaultEquivalenceThreshold}; }
    static Pooling max() { return {Kind::Max, kDefaultEquivalenceThreshold}; }
    static Pooling majority(double s = kDefaultEquivalenceThreshold);
    static Pooling plurality(double s = kDefaultEquivalenceThreshold);
};

std::string to_string(const Pooling& pooling);
Pooling pooling_from_string(const std::string& text);

/// Number of peer scores strictly above the equivalence threshold.
std::size_t equivalent_count(std::span<const double> scores, double threshold);

/// Mean, Max or Majority reduction of a non-empty score list. Plurality
/// compares counts across answers and is only available via voter_scores.
double pool(std::span<const double> scores, const Pooling& pooling);

struct VoteResult {
    std::vector<double> scores;
    std::vector<bool> excluded;
    std::size_t winner = 0;
};

class NoActiveRetriever : public Error {
public:
    NoActiveRetriever() : Error("every retriever is filtered out by the weight threshold") {}
};

/// Voter score for every retriever: effective retriever weight times the
/// pooled weighted similarity to the other active answers. A lone active
/// retriever pools to 1. Ties go to the lowest index.
VoteResult voter_scores(std::span<const CandidateAnswer> answers, const PairwiseSimilarityTensor& tensor,
                        const SimWeights& sim_weights, const RetrieverWeights& retriever_weights,
                        const Pooling& pooling);

/// Allocation-free core shared with training. `sims` is a flat M*M*K
/// tensor; returns the winner or -1 when nothing is active. `scratch` must
/// hold at least 2*M doubles.
int vote_winner(std::span<const double> sims, std::size_t retrievers, std::size_t metrics,
                std::span<const double> effective_weights, std::span<const double> sim_weights,
                const Pooling& pooling, std::span<double> scratch);

}  // namespace eor
