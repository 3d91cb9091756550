#include "eor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

namespace eor {

void TrainingTensor::validate() const {
    if (samples == 0) throw Error("training tensor has no samples");
    if (retrievers == 0) throw Error("training tensor has no retrievers");
    if (g.size() != samples * retrievers) throw Error("grader matrix has the wrong size");
    if (sims.size() != samples * retrievers * retrievers * metrics) {
        throw Error("similarity tensor has the wrong size");
    }
    if (metric_ids.size() != metrics) throw Error("metric id count does not match the tensor");
    if (retriever_names.size() != retrievers) throw Error("retriever name count does not match the tensor");
    for (double v : g) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error("grader scores must lie in [0, 1]");
    }
    for (double v : sims) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error("similarity scores must lie in [0, 1]");
    }
}

namespace {

std::vector<std::string> metric_names(std::span<SimilarityMetric* const> metrics) {
    std::vector<std::string> out;
    for (auto* m : metrics) out.push_back(m->id());
    return out;
}

void append_sims(TrainingTensor& t, std::span<const std::string> answers,
                 std::span<SimilarityMetric* const> metrics) {
    // Self-pairs stay zero; the voter never reads them.
    const auto tensor = build_similarity_tensor(answers, metrics);
    t.sims.insert(t.sims.end(), tensor.raw().begin(), tensor.raw().end());
}

}  // namespace

TrainingTensor precompute(const RunTable& table, Grader& grader, std::span<SimilarityMetric* const> metrics) {
    TrainingTensor t;
    t.samples = table.samples();
    t.retrievers = table.retrievers();
    t.metrics = metrics.size();
    t.metric_ids = metric_names(metrics);
    t.retriever_names = table.retriever_names();
    if (t.samples == 0) throw Error("cannot train on an empty dataset");
    for (std::size_t n = 0; n < t.samples; ++n) {
        std::vector<std::string> answers;
        for (std::size_t m = 0; m < t.retrievers; ++m) {
            const auto& r = table.at(n, m);
            answers.push_back(r.answer);
            t.g.push_back(grader.correct(r.answer, table.gold(n)) ? 1.0 : 0.0);
        }
        append_sims(t, answers, metrics);
    }
    t.validate();
    return t;
}

TrainingTensor precompute(const std::vector<std::vector<std::string>>& answers,
                          const std::vector<std::vector<double>>& g,
                          std::span<SimilarityMetric* const> metrics) {
    if (answers.empty()) throw Error("cannot train on an empty dataset");
    if (answers.size() != g.size()) throw Error("answer and grader row counts differ");
    TrainingTensor t;
    t.samples = answers.size();
    t.retrievers = answers.front().size();
    t.metrics = metrics.size();
    t.metric_ids = metric_names(metrics);
    for (std::size_t m = 0; m < t.retrievers; ++m) t.retriever_names.push_back("r" + std::to_string(m));
    for (std::size_t n = 0; n < t.samples; ++n) {
        if (answers[n].size() != t.retrievers || g[n].size() != t.retrievers) {
            throw Error("missing record for sample " + std::to_string(n));
        }
        t.g.insert(t.g.end(), g[n].begin(), g[n].end());
        append_sims(t, answers[n], metrics);
    }
    t.validate();
    return t;
}

std::vector<double> clip_parameters(std::span<const double> theta, double lower, double upper) {
    std::vector<double> out(theta.begin(), theta.end());
    for (auto& v : out) v = std::clamp(v, lower, upper);
    return out;
}

std::vector<int> select_winners(std::span<const double> theta, const TrainingTensor& tensor,
                                double threshold, const Pooling& pooling) {
    const std::size_t k_count = tensor.metrics;
    const std::size_t m_count = tensor.retrievers;
    if (theta.size() != k_count + m_count) {
        throw Error("parameter vector length " + std::to_string(theta.size()) + " != K + M = " +
                    std::to_string(k_count + m_count));
    }
    const auto clipped = clip_parameters(theta);
    const std::span<const double> ws(clipped.data(), k_count);
    std::vector<double> eff(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        const double w = clipped[k_count + m];
        eff[m] = w > threshold ? w : 0.0;
    }
    std::vector<double> scratch(2 * m_count);
    std::vector<int> winners(tensor.samples);
    for (std::size_t n = 0; n < tensor.samples; ++n) {
        winners[n] = vote_winner(tensor.sample_sims(n), m_count, k_count, eff, ws, pooling, scratch);
    }
    return winners;
}

double objective(std::span<const double> theta, const TrainingTensor& tensor, double threshold,
                 const Pooling& pooling) {
    const auto winners = select_winners(theta, tensor, threshold, pooling);
    double total = 0.0;
    for (std::size_t n = 0; n < winners.size(); ++n) {
        if (winners[n] >= 0) total += tensor.grade(n, static_cast<std::size_t>(winners[n]));
    }
    return total / static_cast<double>(tensor.samples);
}

void SearchConfig::validate() const {
    if (max_iterations < 1) throw Error("max_iterations must be >= 1");
    if (!(f_tolerance > 0.0) || !(x_tolerance > 0.0)) throw Error("tolerances must be positive");
    if (restarts < 1) throw Error("restarts must be >= 1");
    if (!(upper > lower)) throw Error("search box is empty");
    if (!(initial_step > 0.0)) throw Error("initial_step must be positive");
    if (threshold < 0.0) throw Error("threshold must be non-negative");
}

namespace {

// Top 53 bits of a 64-bit draw as a double in [0, 1).
double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct RestartOutcome {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    std::vector<TracePoint> trace;
};

class Simplex {
public:
    Simplex(const Objective& f, const SearchConfig& config, int restart)
        : f_(f), config_(config), restart_(restart) {}

    RestartOutcome run(std::span<const double> start) {
        const std::size_t d = start.size();
        std::vector<std::vector<double>> x(d + 1, clip(start));
        for (std::size_t j = 0; j < d; ++j) {
            auto& v = x[j + 1];
            const double down = v[j] - config_.initial_step;
            v[j] = down >= config_.lower ? down : std::min(v[j] + config_.initial_step, config_.upper);
        }
        std::vector<double> h(d + 1);
        for (std::size_t j = 0; j <= d; ++j) h[j] = eval(x[j]);

        RestartOutcome out;
        std::vector<std::size_t> order(d + 1);
        int iter = 0;
        for (; iter < config_.max_iterations; ++iter) {
            // Stable sort keeps ties in vertex order, so runs are reproducible.
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return h[a] < h[b]; });
            reorder(x, h, order);
            out.trace.push_back(TracePoint{restart_, iter, -h[0]});

            if (converged(x, h)) {
                out.converged = true;
                break;
            }

            std::vector<double> c(d, 0.0);
            for (std::size_t j = 0; j < d; ++j) {
                for (std::size_t i = 0; i < d; ++i) c[i] += x[j][i];
            }
            for (auto& v : c) v /= static_cast<double>(d);

            const auto xr = affine(c, x[d], -kAlpha);
            const double hr = eval(xr);
            if (hr < h[0]) {
                const auto xe = affine(c, x[d], -kAlpha * kGamma);
                const double he = eval(xe);
                if (he < hr) {
                    x[d] = xe;
                    h[d] = he;
                } else {
                    x[d] = xr;
                    h[d] = hr;
                }
            } else if (hr < h[d - 1]) {
                x[d] = xr;
                h[d] = hr;
            } else {
                const bool outside = hr < h[d];
                const auto xc = outside ? affine(c, x[d], -kAlpha * kRho) : affine(c, x[d], kRho);
                const double hc = eval(xc);
                if (hc < (outside ? hr : h[d])) {
                    x[d] = xc;
                    h[d] = hc;
                } else {
                    for (std::size_t j = 1; j <= d; ++j) {
                        for (std::size_t i = 0; i < d; ++i) x[j][i] = x[0][i] + kSigma * (x[j][i] - x[0][i]);
                        x[j] = clip(x[j]);
                        h[j] = eval(x[j]);
                    }
                }
            }
        }
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return h[a] < h[b]; });
        reorder(x, h, order);
        out.x = x[0];
        out.value = -h[0];
        out.iterations = iter;
        out.evaluations = evaluations_;
        return out;
    }

private:
    static constexpr double kAlpha = 1.0;
    static constexpr double kGamma = 2.0;
    static constexpr double kRho = 0.5;
    static constexpr double kSigma = 0.5;

    std::vector<double> clip(std::span<const double> v) const {
        return clip_parameters(v, config_.lower, config_.upper);
    }

    // c + t * (p - c), clipped into the box.
    std::vector<double> affine(const std::vector<double>& c, const std::vector<double>& p, double t) const {
        std::vector<double> out(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] + t * (p[i] - c[i]);
        return clip(out);
    }

    double eval(const std::vector<double>& v) {
        ++evaluations_;
        const double value = f_(v);
        if (!std::isfinite(value)) {
            std::ostringstream msg;
            msg << "objective returned " << value << " at theta = [";
            for (std::size_t i = 0; i < v.size(); ++i) msg << (i ? ", " : "") << v[i];
            msg << "]";
            throw NonFiniteObjective(msg.str(), v);
        }
        return -value;
    }

    bool converged(const std::vector<std::vector<double>>& x, const std::vector<double>& h) const {
        double fspread = 0.0;
        double xspread = 0.0;
        for (std::size_t j = 1; j < x.size(); ++j) {
            fspread = std::max(fspread, std::abs(h[j] - h[0]));
            for (std::size_t i = 0; i < x[j].size(); ++i) {
                xspread = std::max(xspread, std::abs(x[j][i] - x[0][i]));
            }
        }
        return fspread <= config_.f_tolerance && xspread <= config_.x_tolerance;
    }

    static void reorder(std::vector<std::vector<double>>& x, std::vector<double>& h,
                        const std::vector<std::size_t>& order) {
        std::vector<std::vector<double>> x2;
        std::vector<double> h2;
        for (auto idx : order) {
            x2.push_back(std::move(x[idx]));
            h2.push_back(h[idx]);
        }
        x = std::move(x2);
        h = std::move(h2);
    }

    const Objective& f_;
    const SearchConfig& config_;
    int restart_;
    std::size_t evaluations_ = 0;
};

}  // namespace

std::vector<std::vector<double>> restart_points(std::span<const double> x0, const SearchConfig& config) {
    std::vector<std::vector<double>> points;
    points.emplace_back(x0.begin(), x0.end());
    std::mt19937_64 rng(config.seed);
    for (int r = 1; r < config.restarts; ++r) {
        std::vector<double> p(x0.size());
        for (auto& v : p) v = config.lower + (config.upper - config.lower) * unit_draw(rng);
        points.push_back(std::move(p));
    }
    return points;
}

NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0, const SearchConfig& config) {
    config.validate();
    if (x0.empty()) throw Error("nelder_mead needs at least one parameter");
    const auto starts = restart_points(x0, config);

    std::vector<std::future<RestartOutcome>> futures;
    for (int r = 0; r < config.restarts; ++r) {
        futures.push_back(std::async(std::launch::async, [&, r] {
            Simplex simplex(f, config, r);
            return simplex.run(starts[static_cast<std::size_t>(r)]);
        }));
    }
    std::vector<RestartOutcome> outcomes;
    for (auto& fut : futures) outcomes.push_back(fut.get());

    NelderMeadResult result;
    std::size_t best = 0;
    for (std::size_t r = 1; r < outcomes.size(); ++r) {
        if (outcomes[r].value > outcomes[best].value) best = r;
    }
    result.x = outcomes[best].x;
    result.value = outcomes[best].value;
    result.best_restart = static_cast<int>(best);
    result.converged = outcomes[best].converged;
    for (const auto& o : outcomes) {
        result.iterations += o.iterations;
        result.evaluations += o.evaluations;
        result.trace.insert(result.trace.end(), o.trace.begin(), o.trace.end());
    }
    return result;
}

TrainReport train(const TrainingTensor& tensor, const SearchConfig& config, const Pooling& pooling) {
    tensor.validate();
    const std::size_t dims = tensor.metrics + tensor.retrievers;
    const std::vector<double> uniform(dims, 0.3);
    const Objective f = [&](std::span<const double> theta) {
        return objective(theta, tensor, config.threshold, pooling);
    };

    TrainReport report;
    report.initial_objective = f(uniform);
    auto nm = nelder_mead(f, uniform, config);

    std::vector<double> theta = nm.x;
    double value = nm.value;
    if (value < report.initial_objective) {
        theta = uniform;
        value = report.initial_objective;
    }

    auto& w = report.weights;
    w.metric_ids = tensor.metric_ids;
    w.retriever_names = tensor.retriever_names;
    w.omega_s.values.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(tensor.metrics));
    w.omega_r.values.assign(theta.begin() + static_cast<std::ptrdiff_t>(tensor.metrics), theta.end());
    w.omega_r.threshold = config.threshold;
    w.objective = value;
    w.pooling = pooling;
    for (std::size_t m = 0; m < tensor.retrievers; ++m) {
        if (w.omega_r.active(m)) report.active.push_back(m);
    }
    report.restarts = config.restarts;
    report.iterations = nm.iterations;
    report.converged = nm.converged;
    report.trace = std::move(nm.trace);
    return report;
}

json to_json(const TrainedWeights& w) {
    return json{
        {"metric_ids", w.metric_ids},
        {"omega_s", w.omega_s.values},
        {"retriever_names", w.retriever_names},
        {"omega_r", w.omega_r.values},
        {"threshold", w.omega_r.threshold},
        {"objective", w.objective},
        {"pooling", to_string(w.pooling)},
    };
}

TrainedWeights trained_weights_from_json(const json& j) {
    TrainedWeights w;
    w.metric_ids = j.at("metric_ids").get<std::vector<std::string>>();
    w.omega_s.values = j.at("omega_s").get<std::vector<double>>();
    w.retriever_names = j.at("retriever_names").get<std::vector<std::string>>();
    w.omega_r.values = j.at("omega_r").get<std::vector<double>>();
    w.omega_r.threshold = j.at("threshold").get<double>();
    w.objective = j.value("objective", 0.0);
    w.pooling = pooling_from_string(j.value("pooling", std::string("mean")));
    if (w.metric_ids.size() != w.omega_s.values.size()) throw Error("weights: omega_s length mismatch");
    if (w.retriever_names.size() != w.omega_r.values.size()) throw Error("weights: omega_r length mismatch");
    return w;
}

void save_weights(const std::filesystem::path& path, const TrainedWeights& weights) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << to_json(weights).dump(2) << '\n';
}

TrainedWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open weights file " + path.string());
    try {
        return trained_weights_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace eor
