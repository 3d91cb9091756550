// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "eor/app.hpp"
#include "eor/consistency.hpp"
#include "eor/dsl.hpp"
#include "eor/reader.hpp"
#include "eor/similarity.hpp"
#include "eor/simulator.hpp"
#include "eor/trainer.hpp"
#include "support.hpp"

using namespace eor;

namespace {

// Tolerances and budgets.
constexpr double kSigmas = 3.0;
constexpr std::uint64_t kDecompositionTrials = 100000;
constexpr std::size_t kDecompositionSets = 20;
constexpr std::size_t kDecompositionMinPass = 19;
constexpr double kDecompositionSeconds = 30.0;
constexpr double kDerivedPoint = 0.62;
constexpr double kClosedFormEps = 1e-12;
constexpr int kVoterFixtures = 1000;
constexpr double kOptimumTolerance = 1e-6;
constexpr double kOptimizerSeconds = 1.0;
constexpr std::size_t kWorldSamples = 2000;
constexpr double kReplaySeconds = 60.0;

struct Result {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------- 1

Result decomposition() {
    const auto start = Clock::now();
    const auto sets = random_parameter_sets(kDecompositionSets, derive_seed(1, "acceptance"));
    std::size_t passed = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto r = verify_decomposition(sets[i], kDecompositionTrials, derive_seed(1, "set:" + std::to_string(i)));
        const double sigma = std::sqrt(r.failure.expected * (1 - r.failure.expected) / kDecompositionTrials);
        const bool ok = sigma > 0 ? std::abs(r.failure.empirical - r.failure.expected) <= kSigmas * sigma
                                  : r.failure.empirical == r.failure.expected;
        passed += ok ? 1 : 0;
    }
    const double elapsed = seconds_since(start);

    const WorldParameters point{0.5, 0.2, 0.1, 0.2, 0.3};
    const double analytic = analytic_failure(point);
    const auto r = verify_decomposition(point, kDecompositionTrials, 2024);
    const double sigma = std::sqrt(kDerivedPoint * (1 - kDerivedPoint) / kDecompositionTrials);
    const bool point_ok = std::abs(analytic - kDerivedPoint) < kClosedFormEps &&
                          std::abs(r.failure.empirical - kDerivedPoint) <= kSigmas * sigma;

    return {passed >= kDecompositionMinPass && elapsed < kDecompositionSeconds && point_ok,
            std::to_string(passed) + "/" + std::to_string(sets.size()) + " sets within 3 sigma in " + num(elapsed, 2) +
                "s; derived point analytic " + num(analytic, 6) + ", empirical " + num(r.failure.empirical, 5)};
}

// ---------------------------------------------------------------- 2

// Independent answer normalization: lowercase, drop punctuation, drop
// articles, split on whitespace.
std::vector<std::string> oracle_tokens(const std::string& s) {
    std::string cleaned;
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream in(cleaned);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) {
        if (t != "a" && t != "an" && t != "the") out.push_back(t);
    }
    return out;
}

double oracle_em(const std::string& a, const std::string& b) { return oracle_tokens(a) == oracle_tokens(b) ? 1 : 0; }

double oracle_f1(const std::string& a, const std::string& b) {
    auto ta = oracle_tokens(a);
    auto tb = oracle_tokens(b);
    if (ta.empty() && tb.empty()) return 1;
    if (ta.empty() || tb.empty()) return 0;
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    std::vector<std::string> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
    if (common.empty()) return 0;
    const double p = static_cast<double>(common.size()) / tb.size();
    const double r = static_cast<double>(common.size()) / ta.size();
    return 2 * p * r / (p + r);
}

int oracle_winner(const std::vector<std::string>& ys, const std::vector<double>& ws, const std::vector<double>& wr,
                  double t, const Pooling& pooling) {
    const std::size_t m_count = ys.size();
    auto sim = [&](std::size_t m, std::size_t n) {
        const double s[2] = {oracle_em(ys[m], ys[n]), oracle_f1(ys[m], ys[n])};
        double total = 0;
        for (std::size_t k = 0; k < ws.size(); ++k) total += ws[k] * s[k];
        return total;
    };
    std::vector<double> score(m_count, 0.0);
    std::vector<std::size_t> count(m_count, 0);
    std::vector<bool> active(m_count);
    for (std::size_t m = 0; m < m_count; ++m) active[m] = wr[m] > t;
    for (std::size_t m = 0; m < m_count; ++m) {
        if (!active[m]) continue;
        std::vector<double> peers;
        for (std::size_t n = 0; n < m_count; ++n) {
            if (n != m && active[n]) peers.push_back(sim(m, n));
        }
        for (double v : peers) count[m] += v > pooling.threshold ? 1 : 0;
        double pooled = 1.0;
        if (!peers.empty()) {
            switch (pooling.kind) {
                case Pooling::Kind::Mean: {
                    double s = 0;
                    for (double v : peers) s += v;
                    pooled = s / static_cast<double>(peers.size());
                    break;
                }
                case Pooling::Kind::Max: pooled = *std::max_element(peers.begin(), peers.end()); break;
                case Pooling::Kind::Majority: pooled = 2 * count[m] >= peers.size() ? 1 : 0; break;
                case Pooling::Kind::Plurality: pooled = 1; break;
            }
        }
        score[m] = wr[m] * pooled;
    }
    if (pooling.kind == Pooling::Kind::Plurality) {
        std::size_t best = 0;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (active[m]) best = std::max(best, count[m]);
        }
        for (std::size_t m = 0; m < m_count; ++m) {
            if (active[m] && count[m] != best) score[m] = 0;
        }
    }
    int winner = -1;
    for (std::size_t m = 0; m < m_count; ++m) {
        if (active[m] && (winner < 0 || score[m] > score[static_cast<std::size_t>(winner)])) winner = static_cast<int>(m);
    }
    return winner;
}

Result voter_oracle() {
    const std::vector<std::string> vocab{"Paris", "paris.", "The Paris", "Rome", "new york", "New York City",
                                         "york", "a b c", "b c d", "", "London bridge", "bridge"};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> w(0.0, 0.6);
    const std::vector<Pooling> poolings{Pooling::mean(), Pooling::max(), Pooling::majority(0.5),
                                        Pooling::plurality(0.5)};
    EmMetric em;
    TokenF1Metric f1;
    int agree = 0;
    for (int trial = 0; trial < kVoterFixtures; ++trial) {
        const std::size_t m_count = 1 + rng() % 4;
        const std::size_t k_count = 1 + rng() % 2;
        std::vector<std::string> ys(m_count);
        std::vector<double> wr(m_count), ws(k_count);
        for (auto& y : ys) y = vocab[rng() % vocab.size()];
        for (auto& v : wr) v = w(rng);
        for (auto& v : ws) v = w(rng);
        const auto& pooling = poolings[rng() % poolings.size()];

        std::vector<SimilarityMetric*> metrics{&em, &f1};
        metrics.resize(k_count);
        const auto tensor = build_similarity_tensor(ys, metrics);
        std::vector<CandidateAnswer> answers;
        for (std::size_t i = 0; i < m_count; ++i) answers.emplace_back(static_cast<int>(i), ys[i]);
        int got = -1;
        try {
            got = static_cast<int>(
                voter_scores(answers, tensor, SimWeights{ws}, RetrieverWeights{wr, kDefaultRetrieverThreshold}, pooling)
                    .winner);
        } catch (const NoActiveRetriever&) {
            got = -1;
        }
        agree += got == oracle_winner(ys, ws, wr, kDefaultRetrieverThreshold, pooling) ? 1 : 0;
    }
    return {agree == kVoterFixtures, std::to_string(agree) + "/" + std::to_string(kVoterFixtures) + " winners agree"};
}

// ---------------------------------------------------------------- 3

Indicators from_base(int a, int er, int eh) {
    return Indicators{a, er, eh, (1 - er) * (1 - eh) * (1 - a), er * eh * a};
}

ErrorIndicators fixture_grid(const std::vector<std::vector<std::string>>& rows) {
    const std::map<std::string, Indicators> kinds{{"C", from_base(1, 0, 0)}, {"Hc", from_base(0, 0, 1)},
                                                  {"X", from_base(0, 0, 0)}, {"L", from_base(1, 1, 1)},
                                                  {"G", from_base(0, 1, 0)}, {"H", from_base(0, 1, 1)}};
    std::vector<std::string> ids, names;
    std::vector<Indicators> cells;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        ids.push_back("s" + std::to_string(n));
        for (const auto& k : rows[n]) cells.push_back(kinds.at(k));
    }
    for (std::size_t m = 0; m < rows.front().size(); ++m) names.push_back("r" + std::to_string(m));
    return ErrorIndicators(ids, names, cells);
}

bool same_cells(const std::vector<RatioCell>& got, const std::vector<double>& expected) {
    if (got.size() != expected.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].or_sentinel() != expected[i]) return false;
    }
    return true;
}

// Direct enumeration of the masked ratio from the indicator definitions.
double enumerate_error_rwr(ErrorKind kind, const ErrorIndicators& g, std::size_t i, std::size_t j) {
    auto occurs = [&](const Indicators& x) {
        switch (kind) {
            case ErrorKind::Retriever: return x.retriever_error;
            case ErrorKind::Hallucination: return x.hallucination_error;
            case ErrorKind::Extraction: return x.extraction_error;
            case ErrorKind::LuckyGuess: return x.lucky_guess;
        }
        return 0;
    };
    int num = 0, den = 0;
    for (std::size_t n = 0; n < g.samples(); ++n) {
        const auto& a = g.at(n, i);
        const auto& b = g.at(n, j);
        int w = 1;
        if (kind == ErrorKind::Extraction) w = (1 - a.retriever_error) * (1 - b.retriever_error);
        if (kind == ErrorKind::LuckyGuess) {
            w = a.retriever_error * a.hallucination_error * b.retriever_error * b.hallucination_error;
        }
        num += (1 - occurs(a)) * occurs(b) * w;
        den += occurs(b) * w;
    }
    return den == 0 ? -1.0 : static_cast<double>(num) / den;
}

Result metric_fixtures() {
    int failures = 0;
    int checks = 0;
    auto expect = [&](bool ok) {
        ++checks;
        failures += ok ? 0 : 1;
    };

    // Fixture A: eight samples covering every realizable outcome.
    const auto a = fixture_grid({{"C", "C", "X"}, {"C", "G", "C"}, {"L", "H", "G"}, {"X", "X", "C"},
                                 {"G", "C", "H"}, {"Hc", "C", "C"}, {"C", "L", "H"}, {"H", "H", "L"}});
    const auto ca = a.correctness();
    expect(same_cells(rwr_matrix(ca), {0, 0.5, 0.75, 0.5, 0, 0.75, 0.75, 0.75, 0}));
    expect(same_cells(mrwr(ca), {0.625, 0.625, 0.75}));
    expect(same_cells(mrlr(ca), {0.625, 0.625, 0.75}));
    expect(same_cells(error_rwr_matrix(ErrorKind::Retriever, a), {0, 0.5, 0.25, 1.0 / 3, 0, 0.25, 0, 0.25, 0}));
    expect(same_cells(error_rwr_matrix(ErrorKind::Hallucination, a),
                      {0, 1.0 / 3, 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3, 1.0 / 3, 0}));
    expect(same_cells(error_rwr_matrix(ErrorKind::Extraction, a), {0, 0, 1, 0, 0, 1, 1, 1, 0}));
    expect(same_cells(error_rwr_matrix(ErrorKind::LuckyGuess, a), {0, -1, 1, 1, 0, 1, -1, 1, 0}));

    // Fixture B: retriever 0 never fails, so every rwr(., 0) is undefined.
    const auto b = fixture_grid({{"C", "C", "G"}, {"C", "G", "H"}, {"C", "C", "C"}, {"C", "X", "L"}});
    const auto cb = b.correctness();
    expect(same_cells(rwr_matrix(cb), {-1, 1, 1, -1, 0, 0.5, -1, 0.5, 0}));
    expect(same_cells(mrwr(cb), {1, 0.5, 0.5}));
    expect(same_cells(mrlr(cb), {-1, 0.75, 0.75}));

    for (const auto* g : {&a, &b}) {
        for (auto kind : {ErrorKind::Retriever, ErrorKind::Hallucination, ErrorKind::Extraction, ErrorKind::LuckyGuess}) {
            const auto cells = error_rwr_matrix(kind, *g);
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 3; ++j) {
                    expect(cells[i * 3 + j].or_sentinel() == enumerate_error_rwr(kind, *g, i, j));
                }
            }
        }
    }
    return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " exact matches"};
}

// ---------------------------------------------------------------- 4

Result indicator_identity() {
    auto identity = [](const Indicators& i) {
        return i.answer_correct ==
               (1 - i.retriever_error) * (1 - i.hallucination_error) * (1 - i.extraction_error) + i.lucky_guess;
    };
    // Every record over a small universe of documents and answers.
    ExactMatchGrader grader;
    const GoldAnswerSet gold({"gold answer"});
    const std::vector<std::string> docs{"", "filler text", "the gold answer is here", "distractor here",
                                        "gold answer and distractor"};
    const std::vector<std::string> answers{"gold answer", "The Gold Answer.", "distractor", "other", ""};
    std::set<std::tuple<int, int, int>> realized;
    std::size_t records = 0;
    bool ok = true;
    for (const auto& d : docs) {
        for (const auto& y : answers) {
            const auto i = compute_record_indicators(d, y, gold, grader);
            realized.insert({i.answer_correct, i.retriever_error, i.hallucination_error});
            ok = ok && identity(i);
            ++records;
        }
    }
    // The two combinations a correct answer cannot take: grounded in a
    // wrong document, or ungrounded in a correct one.
    const std::set<std::tuple<int, int, int>> infeasible{{1, 0, 1}, {1, 1, 0}};
    std::size_t feasible = 0;
    for (int a = 0; a <= 1; ++a) {
        for (int er = 0; er <= 1; ++er) {
            for (int eh = 0; eh <= 1; ++eh) {
                if (infeasible.count({a, er, eh})) {
                    ok = ok && !realized.count({a, er, eh});
                    continue;
                }
                ++feasible;
                ok = ok && realized.count({a, er, eh}) && identity(from_base(a, er, eh));
            }
        }
    }

    WorldSpec spec;
    spec.retrievers = {{0.4, 0.2, 0.2, 0.5, 0.5}, {0.1, 0.3, 0.1, 0.9, 0.2}, {0.7, 0.0, 0.0, 1.0, 0.5},
                       {0.5, 0.5, 0.5, 0.5, 0.5}};
    spec.distractor_sharing = 0.2;
    const auto world = generate_world(kWorldSamples, spec, 99);
    std::size_t world_ok = 0;
    for (const auto& r : world.records) world_ok += identity(r.indicators) ? 1 : 0;
    ok = ok && world_ok == world.records.size();
    return {ok, std::to_string(feasible) + " feasible combinations realized and consistent (" + std::to_string(records) +
                    " enumerated records, 2 infeasible never produced); " + std::to_string(world_ok) + "/" +
                    std::to_string(world.records.size()) + " generated records"};
}

// ---------------------------------------------------------------- 5

Result optimizer() {
    SearchConfig c;
    c.restarts = 1;
    c.f_tolerance = 1e-14;
    c.x_tolerance = 1e-8;
    const std::vector<double> x0{0.0, 0.6, 0.1, 0.45};
    const auto start = Clock::now();
    const auto r = nelder_mead(
        [](std::span<const double> x) {
            double s = 0;
            for (double v : x) s -= (v - 0.3) * (v - 0.3);
            return s;
        },
        x0, c);
    const double elapsed = seconds_since(start);
    double err = 0;
    for (double v : r.x) err = std::max(err, std::abs(v - 0.3));

    std::vector<std::vector<std::string>> answers;
    std::vector<std::vector<double>> g;
    for (int i = 0; i < 50; ++i) {
        answers.push_back({"wrong answer " + std::to_string(i), "right " + std::to_string(i)});
        g.push_back({0.0, 1.0});
    }
    EmMetric em;
    TokenF1Metric f1;
    std::vector<SimilarityMetric*> metrics{&em, &f1};
    const auto tensor = precompute(answers, g, metrics);
    const auto report = train(tensor, SearchConfig{});
    std::vector<double> theta = report.weights.omega_s.values;
    theta.insert(theta.end(), report.weights.omega_r.values.begin(), report.weights.omega_r.values.end());
    std::size_t hits = 0;
    for (int w : select_winners(theta, tensor)) hits += w == 1 ? 1 : 0;
    const double acc = static_cast<double>(hits) / answers.size();
    return {err <= kOptimumTolerance && elapsed < kOptimizerSeconds && acc == 1.0,
            "max |x - 0.3| = " + std::to_string(err) + " in " + num(elapsed, 3) + "s; 2-retriever selection accuracy " +
                num(acc, 3)};
}

// ---------------------------------------------------------------- 6

struct WorldTensor {
    TrainingTensor tensor;
    IndicatorMatrix correctness;
};

WorldTensor world_tensor(std::uint64_t seed) {
    WorldSpec spec;
    spec.retrievers.assign(5, WorldParameters{0.3, 0.0, 0.0, 0.0, 0.0});
    const auto w = generate_world(kWorldSamples, spec, seed);
    const RunTable table(w.dataset, w.retrievers, w.records);
    ExactMatchGrader grader;
    EmMetric em;
    TokenF1Metric f1;
    std::vector<SimilarityMetric*> metrics{&em, &f1};
    return {precompute(table, grader, metrics), stored_indicators(table).correctness()};
}

Result ensemble_benefit() {
    const auto train_world = world_tensor(derive_seed(6, "train"));
    const auto eval_world = world_tensor(derive_seed(6, "eval"));
    SearchConfig c;
    c.seed = derive_seed(6, "search");
    const auto report = train(train_world.tensor, c);
    std::vector<double> theta = report.weights.omega_s.values;
    theta.insert(theta.end(), report.weights.omega_r.values.begin(), report.weights.omega_r.values.end());
    const auto winners = select_winners(theta, eval_world.tensor);

    const auto& cm = eval_world.correctness;
    const std::size_t n = cm.rows();
    const std::size_t m_count = cm.cols();
    std::vector<std::uint8_t> values;
    double eor_hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < m_count; ++m) values.push_back(cm.at(i, m));
        const std::uint8_t ok = winners[i] >= 0 ? cm.at(i, static_cast<std::size_t>(winners[i])) : 0;
        values.push_back(ok);
        eor_hits += ok;
    }
    auto names = cm.column_ids();
    names.push_back("EoR");
    const IndicatorMatrix augmented(cm.row_ids(), names, values);

    std::size_t best = 0;
    double best_acc = -1;
    for (std::size_t m = 0; m < m_count; ++m) {
        double hits = 0;
        for (auto v : cm.column(m)) hits += v;
        if (hits / n > best_acc) {
            best_acc = hits / n;
            best = m;
        }
    }
    const double eor_acc = eor_hits / n;
    const auto lose = mrlr(augmented);
    const double eor_mrlr = lose[m_count].or_sentinel();
    const double best_mrlr = lose[best].or_sentinel();
    return {eor_acc > best_acc && lose[m_count].defined() && lose[best].defined() && eor_mrlr < best_mrlr,
            "EoR accuracy " + num(eor_acc) + " vs best single " + num(best_acc) + "; MRLR " + num(eor_mrlr) + " vs " +
                num(best_mrlr)};
}

// ---------------------------------------------------------------- 7

Result upper_bound() {
    std::mt19937 rng(31);
    const std::size_t n = 60, m_count = 5;
    std::vector<std::string> ids, names;
    std::vector<std::uint8_t> values;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
    for (std::size_t m = 0; m < m_count; ++m) names.push_back("r" + std::to_string(m));
    for (std::size_t i = 0; i < n * m_count; ++i) values.push_back(rng() % 10 < 6 ? 1 : 0);
    const IndicatorMatrix c(ids, names, values);

    bool ok = true;
    std::size_t pairs = 0;
    auto subset = [&](std::uint32_t bits) {
        std::vector<std::size_t> s;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (bits & (1u << m)) s.push_back(m);
        }
        return s;
    };
    for (std::uint32_t s = 1; s < 32; ++s) {
        for (std::uint32_t t = 1; t < 32; ++t) {
            if ((s & t) != s) continue;
            ++pairs;
            ok = ok && ensemble_upper_bound(c, subset(s)) <= ensemble_upper_bound(c, subset(t));
        }
    }
    for (std::size_t m = 0; m < m_count; ++m) {
        double hits = 0;
        for (auto v : c.column(m)) hits += v;
        const std::vector<std::size_t> single{m};
        ok = ok && ensemble_upper_bound(c, single) == hits / n;
    }
    return {ok, std::to_string(pairs) + " inclusion pairs over 31 subsets; singletons equal accuracies"};
}

// ---------------------------------------------------------------- 8

Result parser() {
    const std::vector<std::pair<std::string, std::string>> shapes = {
        {"Wiki@10", "Truncate(Source(Wiki),10)"},
        {"SE@1", "Truncate(Source(SE),1)"},
        {"SE@4", "Truncate(Source(SE),4)"},
        {"PK", "Source(PK)"},
        {"SE@RR@10", "Truncate(Rerank(Source(SE)),10)"},
        {"SE@2&Wiki@5", "Concat(Truncate(Source(SE),2),Truncate(Source(Wiki),5))"},
        {"SE@RR@5&Wiki@5", "Concat(Truncate(Rerank(Source(SE)),5),Truncate(Source(Wiki),5))"},
        {"HB@RR@10", "Truncate(Rerank(Source(HB)),10)"},
        {"Wiki@10@CP", "Compress(Truncate(Source(Wiki),10))"},
        {"SE@1@CP", "Compress(Truncate(Source(SE),1))"},
        {"SE@4@CP", "Compress(Truncate(Source(SE),4))"},
        {"SE@RR@10@CP", "Compress(Truncate(Rerank(Source(SE)),10))"},
        {"SE@2&Wiki@5@CP", "Compress(Concat(Truncate(Source(SE),2),Truncate(Source(Wiki),5)))"},
        {"SE@RR@5&Wiki@5@CP", "Compress(Concat(Truncate(Rerank(Source(SE)),5),Truncate(Source(Wiki),5)))"},
        {"HB@RR@10@CP", "Compress(Truncate(Rerank(Source(HB)),10))"},
        {"ReFree", "Source(ReFree)"},
    };
    std::size_t ok = 0;
    for (const auto& [name, shape] : shapes) {
        try {
            const auto plan = parse_plan(name);
            ok += describe_plan(plan) == shape && format_plan(plan) == name && parse_plan(format_plan(plan)) == plan;
        } catch (const Error&) {
        }
    }
    const std::vector<std::pair<std::string, std::string>> precedence = {
        {"HB@RR@3&PK@2@CP", "Compress(Concat(Truncate(Rerank(Source(HB)),3),Truncate(Source(PK),2)))"},
        {"Wiki@RR&SE@7", "Concat(Rerank(Source(Wiki)),Truncate(Source(SE),7))"},
        {"PK&Wiki@RR@1&SE", "Concat(Source(PK),Truncate(Rerank(Source(Wiki)),1),Source(SE))"},
        {"SE@RR@CP", "Compress(Rerank(Source(SE)))"},
        {"Wiki@3@CP", "Compress(Truncate(Source(Wiki),3))"},
    };
    std::size_t prec_ok = 0;
    for (const auto& [expr, shape] : precedence) {
        try {
            prec_ok += describe_plan(parse_plan(expr)) == shape;
        } catch (const Error&) {
        }
    }
    const bool pool_ok = reference_retriever_pool().size() == shapes.size() &&
                         std::equal(shapes.begin(), shapes.end(), reference_retriever_pool().begin(),
                                    [](const auto& s, const auto& name) { return s.first == name; });
    return {ok == shapes.size() && prec_ok == precedence.size() && pool_ok,
            std::to_string(ok) + "/" + std::to_string(shapes.size()) + " names, " + std::to_string(prec_ok) + "/" +
                std::to_string(precedence.size()) + " precedence strings"};
}

// ---------------------------------------------------------------- 9

std::map<std::string, std::string> tree(const test::fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : test::fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[test::fs::relative(e.path(), root).string()] = test::slurp(e.path());
    }
    return out;
}

Result replay() {
    const test::fs::path demo = EOR_DEMO_DIR;
    std::vector<std::map<std::string, std::string>> artifacts;
    std::size_t calls = 0;
    double slowest = 0;
    for (int run = 0; run < 2; ++run) {
        auto m = RunManifest::load(demo / "manifest.json");
        m.mode = Mode::Replay;
        m.output_dir = test::scratch_dir("acceptance_replay");
        const auto start = Clock::now();
        AppContext ctx;
        run_pipeline(m, ctx);
        train_step(m, ctx);
        ensemble_step(m, ctx);
        analyze_step(m, ctx);
        report_step(m, ctx);
        slowest = std::max(slowest, seconds_since(start));
        calls += ctx.network_calls;
        artifacts.push_back(tree(m.output_dir));
        test::fs::remove_all(m.output_dir);
    }
    const auto records = artifacts[0].count("records.jsonl") ? artifacts[0]["records.jsonl"] : "";
    const auto lines = static_cast<std::size_t>(std::count(records.begin(), records.end(), '\n'));
    const bool ok = artifacts[0] == artifacts[1] && calls == 0 && slowest < kReplaySeconds && lines == 400 &&
                    artifacts[0].count("report.md");
    return {ok, std::to_string(artifacts[0].size()) + " artifacts identical: " +
                    (artifacts[0] == artifacts[1] ? "yes" : "no") + "; " + std::to_string(lines) + " records; " +
                    std::to_string(calls) + " network calls; slowest run " + num(slowest, 2) + "s"};
}

// ---------------------------------------------------------------- 10

Result prompts() {
    const test::fs::path golden = EOR_GOLDEN_DIR;
    const Query q("q", "Who wrote Hamlet?");
    const Document d({Chunk{"Hamlet is a tragedy written by William Shakespeare.", SourceTag::Search, {}},
                      Chunk{"It was first performed around 1600.", SourceTag::Wiki, {}}});
    std::size_t ok = 0, total = 0;
    for (const auto& [family, suffix] : {std::pair{TemplateFamily::ChatInstruct15Words, "15"},
                                         std::pair{TemplateFamily::ChatInstructFewWords, "few"}}) {
        for (const auto& [kind, name] : {std::pair{PromptKind::ReFree, "refree"}, std::pair{PromptKind::Rag, "rag"},
                                         std::pair{PromptKind::Parametric, "parametric"},
                                         std::pair{PromptKind::Compress, "compress"}}) {
            ++total;
            const auto path = golden / (std::string(name) + "_" + suffix + ".txt");
            if (!test::fs::exists(path)) continue;
            ok += render_prompt(kind, family, q, d) == test::slurp(path);
        }
    }
    return {ok == total && total == 8, std::to_string(ok) + "/" + std::to_string(total) + " templates byte-identical"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
        {"decomposition identity", decomposition},
        {"voter oracle equivalence", voter_oracle},
        {"metric correctness", metric_fixtures},
        {"indicator identity", indicator_identity},
        {"optimizer", optimizer},
        {"ensemble benefit", ensemble_benefit},
        {"upper-bound monotonicity", upper_bound},
        {"parser conformance", parser},
        {"replay determinism", replay},
        {"prompt fidelity", prompts},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        failed += r.pass ? 0 : 1;
        std::cout << (r.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << r.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
