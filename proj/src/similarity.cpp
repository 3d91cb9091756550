#include "eor/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace eor {

double em_similarity(std::string_view a, std::string_view b) {
    return normalize_answer(a) == normalize_answer(b) ? 1.0 : 0.0;
}

double token_f1(std::string_view a, std::string_view b) {
    const auto ta = normalized_tokens(a);
    const auto tb = normalized_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : ta) ++counts[t];
    std::size_t common = 0;
    for (const auto& t : tb) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(tb.size());
    const double recall = static_cast<double>(common) / static_cast<double>(ta.size());
    return 2.0 * precision * recall / (precision + recall);
}

double external_similarity(const std::string& a, const std::string& b, const std::string& metric_id,
                           ScorerClient& scorer, const WarningSink& warn) {
    const double raw = scorer.score(metric_id, a, b);
    if (raw < 0.0 || raw > 1.0) {
        if (warn) {
            std::ostringstream msg;
            msg << "metric " << metric_id << " returned out-of-range score " << raw << "; clamped";
            warn(msg.str());
        }
        return std::clamp(raw, 0.0, 1.0);
    }
    if (a == b && raw < 0.99 && warn) {
        std::ostringstream msg;
        msg << "metric " << metric_id << " self-similarity " << raw << " is below 0.99";
        warn(msg.str());
    }
    return raw;
}

std::unique_ptr<SimilarityMetric> make_metric(const std::string& id, std::shared_ptr<ScorerClient> client,
                                              WarningSink warn) {
    if (id == "em") return std::make_unique<EmMetric>();
    if (id == "token_f1") return std::make_unique<TokenF1Metric>();
    if (!client) throw Error("metric '" + id + "' needs a scorer service or fixture");
    // NLI entailment is directional; everything else is treated as symmetric.
    const bool symmetric = id.find("nli") == std::string::npos;
    return std::make_unique<ExternalMetric>(id, std::move(client), symmetric, std::move(warn));
}

PairwiseSimilarityTensor::PairwiseSimilarityTensor(std::size_t retrievers, std::size_t metrics)
    : m_(retrievers), k_(metrics), scores_(retrievers * retrievers * metrics, 0.0) {}

PairwiseSimilarityTensor::PairwiseSimilarityTensor(std::size_t retrievers, std::size_t metrics,
                                                   std::vector<double> scores)
    : m_(retrievers), k_(metrics), scores_(std::move(scores)) {
    if (scores_.size() != m_ * m_ * k_) throw Error("similarity tensor has the wrong size");
    for (std::size_t m = 0; m < m_; ++m) {
        for (std::size_t n = 0; n < m_; ++n) {
            if (m == n) continue;
            for (std::size_t k = 0; k < k_; ++k) {
                const double v = scores_[(m * m_ + n) * k_ + k];
                if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                    throw Error("similarity scores must be finite and within [0, 1]");
                }
            }
        }
    }
}

double PairwiseSimilarityTensor::at(std::size_t m, std::size_t n, std::size_t k) const {
    if (m >= m_ || n >= m_ || k >= k_ || m == n) {
        throw Error("similarity tensor has no entry (" + std::to_string(m) + ", " + std::to_string(n) +
                    ", " + std::to_string(k) + ")");
    }
    return scores_[(m * m_ + n) * k_ + k];
}

void PairwiseSimilarityTensor::set(std::size_t m, std::size_t n, std::size_t k, double value) {
    if (m >= m_ || n >= m_ || k >= k_ || m == n) throw Error("similarity tensor index out of range");
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
        throw Error("similarity scores must be finite and within [0, 1]");
    }
    scores_[(m * m_ + n) * k_ + k] = value;
}

PairwiseSimilarityTensor build_similarity_tensor(std::span<const std::string> answers,
                                                 std::span<SimilarityMetric* const> metrics) {
    const std::size_t m_count = answers.size();
    PairwiseSimilarityTensor tensor(m_count, metrics.size());
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        auto& metric = *metrics[k];
        for (std::size_t m = 0; m < m_count; ++m) {
            for (std::size_t n = 0; n < m_count; ++n) {
                if (m == n) continue;
                if (metric.symmetric() && n < m) {
                    tensor.set(m, n, k, tensor.at(n, m, k));
                    continue;
                }
                tensor.set(m, n, k, metric.score(answers[m], answers[n]));
            }
        }
    }
    return tensor;
}

double weighted_similarity(std::size_t m, std::size_t n, const PairwiseSimilarityTensor& tensor,
                           const SimWeights& weights) {
    if (weights.values.size() != tensor.metrics()) {
        throw Error("similarity weight count does not match the metric count");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < tensor.metrics(); ++k) total += weights.values[k] * tensor.at(m, n, k);
    return total;
}

Pooling Pooling::majority(double s) {
    if (!(s > 0.0 && s < 1.0)) throw Error("majority threshold must lie in (0, 1)");
    return {Kind::Majority, s};
}

Pooling Pooling::plurality(double s) {
    if (!(s > 0.0 && s < 1.0)) throw Error("plurality threshold must lie in (0, 1)");
    return {Kind::Plurality, s};
}

std::string to_string(const Pooling& pooling) {
    std::ostringstream out;
    switch (pooling.kind) {
        case Pooling::Kind::Mean: return "mean";
        case Pooling::Kind::Max: return "max";
        case Pooling::Kind::Majority: out << "majority:" << pooling.threshold; break;
        case Pooling::Kind::Plurality: out << "plurality:" << pooling.threshold; break;
    }
    return out.str();
}

Pooling pooling_from_string(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    const double s = colon == std::string::npos ? kDefaultEquivalenceThreshold : std::stod(text.substr(colon + 1));
    if (name == "mean") return Pooling::mean();
    if (name == "max") return Pooling::max();
    if (name == "majority") return Pooling::majority(s);
    if (name == "plurality") return Pooling::plurality(s);
    throw Error("unknown pooling '" + text + "'");
}

std::size_t equivalent_count(std::span<const double> scores, double threshold) {
    return static_cast<std::size_t>(
        std::count_if(scores.begin(), scores.end(), [&](double v) { return v > threshold; }));
}

double pool(std::span<const double> scores, const Pooling& pooling) {
    if (scores.empty()) throw Error("pooling needs at least one score");
    switch (pooling.kind) {
        case Pooling::Kind::Mean: {
            double total = 0.0;
            for (double v : scores) total += v;
            return total / static_cast<double>(scores.size());
        }
        case Pooling::Kind::Max:
            return *std::max_element(scores.begin(), scores.end());
        case Pooling::Kind::Majority: {
            const auto c = equivalent_count(scores, pooling.threshold);
            return 2 * c >= scores.size() ? 1.0 : 0.0;
        }
        case Pooling::Kind::Plurality:
            throw Error("plurality pooling compares answers; use voter_scores");
    }
    return 0.0;
}

namespace {

// Writes per-retriever scores into out_scores (0 for inactive) and returns
// the winner, or -1 when no retriever is active.
int score_all(std::span<const double> sims, std::size_t m_count, std::size_t k_count,
              std::span<const double> eff, std::span<const double> ws, const Pooling& pooling,
              std::span<double> out_scores, std::span<double> counts) {
    const bool plurality = pooling.kind == Pooling::Kind::Plurality;
    auto pair_sim = [&](std::size_t m, std::size_t n) {
        const double* base = sims.data() + (m * m_count + n) * k_count;
        double total = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) total += ws[k] * base[k];
        return total;
    };

    double best_count = -1.0;
    for (std::size_t m = 0; m < m_count; ++m) {
        out_scores[m] = 0.0;
        if (eff[m] <= 0.0) continue;
        std::size_t peers = 0;
        double acc = 0.0;
        double mx = -std::numeric_limits<double>::infinity();
        std::size_t above = 0;
        for (std::size_t n = 0; n < m_count; ++n) {
            if (n == m || eff[n] <= 0.0) continue;
            const double s = pair_sim(m, n);
            ++peers;
            acc += s;
            mx = std::max(mx, s);
            if (s > pooling.threshold) ++above;
        }
        double pooled = 1.0;
        if (peers > 0) {
            switch (pooling.kind) {
                case Pooling::Kind::Mean: pooled = acc / static_cast<double>(peers); break;
                case Pooling::Kind::Max: pooled = mx; break;
                case Pooling::Kind::Majority: pooled = 2 * above >= peers ? 1.0 : 0.0; break;
                case Pooling::Kind::Plurality: pooled = 1.0; break;
            }
        }
        if (plurality) {
            counts[m] = static_cast<double>(above);
            best_count = std::max(best_count, counts[m]);
        }
        out_scores[m] = eff[m] * pooled;
    }
    if (plurality) {
        for (std::size_t m = 0; m < m_count; ++m) {
            if (eff[m] > 0.0 && counts[m] != best_count) out_scores[m] = 0.0;
        }
    }

    int winner = -1;
    for (std::size_t m = 0; m < m_count; ++m) {
        if (eff[m] <= 0.0) continue;
        if (winner < 0 || out_scores[m] > out_scores[static_cast<std::size_t>(winner)]) {
            winner = static_cast<int>(m);
        }
    }
    return winner;
}

}  // namespace

int vote_winner(std::span<const double> sims, std::size_t retrievers, std::size_t metrics,
                std::span<const double> effective_weights, std::span<const double> sim_weights,
                const Pooling& pooling, std::span<double> scratch) {
    return score_all(sims, retrievers, metrics, effective_weights, sim_weights, pooling,
                     scratch.subspan(0, retrievers), scratch.subspan(retrievers, retrievers));
}

VoteResult voter_scores(std::span<const CandidateAnswer> answers, const PairwiseSimilarityTensor& tensor,
                        const SimWeights& sim_weights, const RetrieverWeights& retriever_weights,
                        const Pooling& pooling) {
    const std::size_t m_count = tensor.retrievers();
    if (answers.size() != m_count) throw Error("answer count does not match the similarity tensor");
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (answers[i].retriever_index != static_cast<int>(i)) {
            throw Error("answers must be ordered by retriever index");
        }
    }
    if (retriever_weights.values.size() != m_count) {
        throw Error("retriever weight count does not match the answer count");
    }
    if (sim_weights.values.size() != tensor.metrics()) {
        throw Error("similarity weight count does not match the metric count");
    }

    std::vector<double> eff(m_count);
    for (std::size_t m = 0; m < m_count; ++m) eff[m] = retriever_weights.effective(m);

    VoteResult result;
    result.scores.assign(m_count, 0.0);
    result.excluded.assign(m_count, false);
    for (std::size_t m = 0; m < m_count; ++m) result.excluded[m] = !retriever_weights.active(m);

    std::vector<double> counts(m_count, 0.0);
    const int winner = score_all(tensor.raw(), m_count, tensor.metrics(), eff, sim_weights.values,
                                 pooling, result.scores, counts);
    if (winner < 0) throw NoActiveRetriever();
    result.winner = static_cast<std::size_t>(winner);
    return result;
}

}  // namespace eor
