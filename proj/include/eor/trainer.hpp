#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eor/records.hpp"
#include "eor/similarity.hpp"

namespace eor {

/// Everything the objective needs, so evaluating a parameter vector never
/// calls a model: grader scores g (N x M) and per-sample similarity
/// tensors (N x M x M x K, flat).
struct TrainingTensor {
    std::size_t samples = 0;
    std::size_t retrievers = 0;
    std::size_t metrics = 0;
    std::vector<double> g;
    std::vector<double> sims;
    std::vector<std::string> metric_ids;
    std::vector<std::string> retriever_names;

    double grade(std::size_t n, std::size_t m) const { return g[n * retrievers + m]; }
    std::span<const double> sample_sims(std::size_t n) const {
        const std::size_t stride = retrievers * retrievers * metrics;
        return std::span<const double>(sims).subspan(n * stride, stride);
    }

    /// Throws when sizes are inconsistent or entries are non-finite or out
    /// of [0, 1].
    void validate() const;
};

TrainingTensor precompute(const RunTable& table, Grader& grader,
                          std::span<SimilarityMetric* const> metrics);

/// Same, from raw answer strings (rows = samples) and a g matrix.
TrainingTensor precompute(const std::vector<std::vector<std::string>>& answers,
                          const std::vector<std::vector<double>>& g,
                          std::span<SimilarityMetric* const> metrics);

/// Parameter layout: [omega_s (K) | omega_r (M)].
std::vector<double> clip_parameters(std::span<const double> theta, double lower = 0.0,
                                    double upper = kWeightUpperBound);

/// Mean grader score of the voter-selected answers under clip(theta).
/// Samples where every retriever is filtered contribute 0.
double objective(std::span<const double> theta, const TrainingTensor& tensor,
                 double threshold = kDefaultRetrieverThreshold, const Pooling& pooling = Pooling::mean());

/// Per-sample winners under clip(theta); -1 where nothing is active.
std::vector<int> select_winners(std::span<const double> theta, const TrainingTensor& tensor,
                                double threshold = kDefaultRetrieverThreshold,
                                const Pooling& pooling = Pooling::mean());

struct SearchConfig {
    int max_iterations = 2000;
    double f_tolerance = 1e-6;
    double x_tolerance = 1e-6;
    int restarts = 5;
    std::uint64_t seed = 0;
    double threshold = kDefaultRetrieverThreshold;
    /// Initial simplex edge. Large enough that from the uniform start each
    /// retriever weight is probed below the threshold.
    double initial_step = 0.25;
    double lower = 0.0;
    double upper = kWeightUpperBound;

    void validate() const;
};

struct TracePoint {
    int restart = 0;
    int iteration = 0;
    double best = 0.0;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int best_restart = 0;
    int iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    std::vector<TracePoint> trace;
};

class NonFiniteObjective : public Error {
public:
    NonFiniteObjective(const std::string& message, std::vector<double> theta)
        : Error(message), theta_(std::move(theta)) {}

    const std::vector<double>& theta() const { return theta_; }

private:
    std::vector<double> theta_;
};

using Objective = std::function<double(std::span<const double>)>;

/// Maximizes f over the box [lower, upper]^d by minimizing -f with the
/// simplex method (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
/// Every vertex is clipped into the box. Restart 0 starts from x0; the
/// others from seeded uniform points. Returns the best restart.
NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0, const SearchConfig& config);

/// Start points used by nelder_mead: x0 then restarts-1 seeded uniform draws.
std::vector<std::vector<double>> restart_points(std::span<const double> x0, const SearchConfig& config);

struct TrainedWeights {
    std::vector<std::string> metric_ids;
    SimWeights omega_s;
    std::vector<std::string> retriever_names;
    RetrieverWeights omega_r;
    double objective = 0.0;
    Pooling pooling = Pooling::mean();
};

struct TrainReport {
    TrainedWeights weights;
    double initial_objective = 0.0;
    std::vector<std::size_t> active;
    int restarts = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<TracePoint> trace;
};

/// Uniform 0.3 start plus seeded restarts; never returns weights scoring
/// below the uniform start.
TrainReport train(const TrainingTensor& tensor, const SearchConfig& config,
                  const Pooling& pooling = Pooling::mean());

json to_json(const TrainedWeights& weights);
TrainedWeights trained_weights_from_json(const json& j);
void save_weights(const std::filesystem::path& path, const TrainedWeights& weights);
TrainedWeights load_weights(const std::filesystem::path& path);

}  // namespace eor
