#include "eor/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace eor {

namespace {

void check_probability(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(std::string(name) + " must lie in [0, 1]");
    }
}

constexpr std::uint64_t kBlockTrials = 65536;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void tally(SimOutcome& out, Outcome o) {
    switch (o) {
        case Outcome::Correct: ++out.correct; break;
        case Outcome::HallucinationCorrectDoc: ++out.hallucination_wrong; break;
        case Outcome::Extraction: ++out.extraction_wrong; break;
        case Outcome::LuckyCorrect: ++out.lucky_correct; break;
        case Outcome::GroundedWrongDoc: ++out.grounded_wrong_doc; break;
        case Outcome::HallucinationWrongDoc:
            ++out.hallucination_wrong;
            ++out.hallucination_wrong_doc;
            break;
    }
}

SimOutcome run_block(const WorldParameters& p, std::uint64_t trials, std::uint64_t seed, std::uint64_t block) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(block + 1)));
    SimOutcome out;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const double a = unit(rng);
        const double b = unit(rng);
        const double c = unit(rng);
        tally(out, draw_outcome(p, a, b, c));
    }
    out.n_trials = trials;
    return out;
}

void merge(SimOutcome& into, const SimOutcome& part) {
    into.n_trials += part.n_trials;
    into.correct += part.correct;
    into.hallucination_wrong += part.hallucination_wrong;
    into.extraction_wrong += part.extraction_wrong;
    into.lucky_correct += part.lucky_correct;
    into.grounded_wrong_doc += part.grounded_wrong_doc;
    into.hallucination_wrong_doc += part.hallucination_wrong_doc;
}

}  // namespace

void WorldParameters::validate() const {
    check_probability(eps_r, "eps_r");
    check_probability(eps_h_correct, "eps_h_correct");
    check_probability(eps_e, "eps_e");
    check_probability(eps_h_wrong, "eps_h_wrong");
    check_probability(eps_luck, "eps_luck");
    if (eps_h_correct + eps_e > 1.0 + 1e-12) throw Error("eps_h_correct + eps_e must not exceed 1");
}

json to_json(const WorldParameters& p) {
    return json{{"eps_r", p.eps_r},
                {"eps_h_correct", p.eps_h_correct},
                {"eps_e", p.eps_e},
                {"eps_h_wrong", p.eps_h_wrong},
                {"eps_luck", p.eps_luck}};
}

WorldParameters world_parameters_from_json(const json& j) {
    WorldParameters p;
    p.eps_r = j.value("eps_r", 0.0);
    p.eps_h_correct = j.value("eps_h_correct", 0.0);
    p.eps_e = j.value("eps_e", 0.0);
    p.eps_h_wrong = j.value("eps_h_wrong", 0.0);
    p.eps_luck = j.value("eps_luck", 0.0);
    p.validate();
    return p;
}

double analytic_failure(const WorldParameters& p) {
    p.validate();
    return (1.0 - p.eps_r) * (p.eps_h_correct + p.eps_e) + p.eps_r * (1.0 - p.eps_luck * p.eps_h_wrong);
}

bool is_correct(Outcome o) {
    return o == Outcome::Correct || o == Outcome::LuckyCorrect;
}

Outcome draw_outcome(const WorldParameters& p, double u_doc, double u_answer, double u_luck) {
    if (u_doc < p.eps_r) {
        if (u_answer < p.eps_h_wrong) {
            return u_luck < p.eps_luck ? Outcome::LuckyCorrect : Outcome::HallucinationWrongDoc;
        }
        return Outcome::GroundedWrongDoc;
    }
    if (u_answer < p.eps_h_correct) return Outcome::HallucinationCorrectDoc;
    if (u_answer < p.eps_h_correct + p.eps_e) return Outcome::Extraction;
    return Outcome::Correct;
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Correct: return "correct";
        case Outcome::HallucinationCorrectDoc: return "hallucination_correct_doc";
        case Outcome::Extraction: return "extraction_wrong";
        case Outcome::LuckyCorrect: return "lucky_correct";
        case Outcome::GroundedWrongDoc: return "grounded_wrong_doc";
        case Outcome::HallucinationWrongDoc: return "hallucination_wrong_doc";
    }
    return "correct";
}

json to_json(const SimOutcome& o) {
    return json{{"n_trials", o.n_trials},
                {"failure_count", o.failure_count},
                {"seed", o.seed},
                {"category_counts",
                 {{"correct", o.correct},
                  {"hallucination_wrong", o.hallucination_wrong},
                  {"extraction_wrong", o.extraction_wrong},
                  {"lucky_correct", o.lucky_correct},
                  {"grounded_wrong_doc", o.grounded_wrong_doc}}},
                {"hallucination_wrong_doc", o.hallucination_wrong_doc}};
}

SimOutcome simulate(const WorldParameters& params, std::uint64_t n_trials, std::uint64_t seed, unsigned threads) {
    params.validate();
    if (n_trials < 1) throw Error("simulate needs at least one trial");
    const std::uint64_t blocks = (n_trials + kBlockTrials - 1) / kBlockTrials;
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, blocks));

    std::vector<SimOutcome> parts(blocks);
    auto work = [&](unsigned worker) {
        for (std::uint64_t b = worker; b < blocks; b += threads) {
            const std::uint64_t trials = std::min(kBlockTrials, n_trials - b * kBlockTrials);
            parts[b] = run_block(params, trials, seed, b);
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }

    SimOutcome out;
    for (const auto& p : parts) merge(out, p);
    out.failure_count = out.n_trials - out.correct - out.lucky_correct;
    out.seed = seed;
    return out;
}

RateCheck check_rate(std::string name, std::uint64_t hits, std::uint64_t n, double expected) {
    RateCheck c;
    c.name = std::move(name);
    c.empirical = static_cast<double>(hits) / static_cast<double>(n);
    c.expected = expected;
    c.standard_error = std::sqrt(std::max(0.0, expected * (1.0 - expected)) / static_cast<double>(n));
    const double diff = std::abs(c.empirical - c.expected);
    // Round-off in the closed form can leave sigma at ~1e-9 when the rate is
    // exactly 0 or 1; treat that as the exact case.
    c.pass = c.standard_error < 1e-12 ? diff < 1e-12 : diff <= 3.0 * c.standard_error + 1e-12;
    return c;
}

bool DecompositionReport::all_categories_pass() const {
    return std::all_of(categories.begin(), categories.end(), [](const RateCheck& c) { return c.pass; });
}

DecompositionReport verify_decomposition(const WorldParameters& p, std::uint64_t n_trials, std::uint64_t seed) {
    DecompositionReport r;
    r.params = p;
    r.outcome = simulate(p, n_trials, seed);
    const auto& o = r.outcome;
    r.failure = check_rate("failure", o.failure_count, o.n_trials, analytic_failure(p));
    const double ok_doc = 1.0 - p.eps_r;
    r.categories.push_back(check_rate("correct", o.correct, o.n_trials,
                                      ok_doc * (1.0 - p.eps_h_correct - p.eps_e)));
    r.categories.push_back(check_rate("hallucination_correct_doc", o.hallucination_wrong - o.hallucination_wrong_doc,
                                      o.n_trials, ok_doc * p.eps_h_correct));
    r.categories.push_back(check_rate("extraction_wrong", o.extraction_wrong, o.n_trials, ok_doc * p.eps_e));
    r.categories.push_back(check_rate("lucky_correct", o.lucky_correct, o.n_trials,
                                      p.eps_r * p.eps_h_wrong * p.eps_luck));
    r.categories.push_back(check_rate("grounded_wrong_doc", o.grounded_wrong_doc, o.n_trials,
                                      p.eps_r * (1.0 - p.eps_h_wrong)));
    r.categories.push_back(check_rate("hallucination_wrong_doc", o.hallucination_wrong_doc, o.n_trials,
                                      p.eps_r * p.eps_h_wrong * (1.0 - p.eps_luck)));
    return r;
}

namespace {

json to_json(const RateCheck& c) {
    return json{{"name", c.name},
                {"empirical", c.empirical},
                {"expected", c.expected},
                {"standard_error", c.standard_error},
                {"pass", c.pass}};
}

}  // namespace

json to_json(const DecompositionReport& r) {
    json cats = json::array();
    for (const auto& c : r.categories) cats.push_back(to_json(c));
    return json{{"params", to_json(r.params)},
                {"outcome", to_json(r.outcome)},
                {"failure", to_json(r.failure)},
                {"categories", cats},
                {"pass", r.pass()}};
}

void WorldSpec::validate() const {
    if (retrievers.empty()) throw Error("world spec needs at least one retriever");
    for (const auto& p : retrievers) p.validate();
    if (!names.empty() && names.size() != retrievers.size()) {
        throw Error("world spec names must match the retriever count");
    }
    check_probability(distractor_sharing, "distractor_sharing");
}

json to_json(const WorldSpec& spec) {
    json rs = json::array();
    for (const auto& p : spec.retrievers) rs.push_back(to_json(p));
    json j{{"retrievers", rs}, {"distractor_sharing", spec.distractor_sharing}};
    if (!spec.names.empty()) j["names"] = spec.names;
    return j;
}

WorldSpec world_spec_from_json(const json& j) {
    WorldSpec spec;
    if (j.contains("retrievers")) {
        for (const auto& p : j.at("retrievers")) spec.retrievers.push_back(world_parameters_from_json(p));
    } else {
        // Shorthand: {"count": M, "params": {...}}
        const auto p = world_parameters_from_json(j.at("params"));
        spec.retrievers.assign(j.at("count").get<std::size_t>(), p);
    }
    if (j.contains("names")) spec.names = j["names"].get<std::vector<std::string>>();
    spec.distractor_sharing = j.value("distractor_sharing", 0.0);
    spec.validate();
    return spec;
}

GeneratedWorld generate_world(std::size_t samples, const WorldSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (samples < 1) throw Error("generate_world needs at least one sample");
    const std::size_t m_count = spec.retrievers.size();

    GeneratedWorld world;
    world.retrievers = spec.names;
    if (world.retrievers.empty()) {
        for (std::size_t m = 0; m < m_count; ++m) world.retrievers.push_back("r" + std::to_string(m));
    }
    world.dataset.name = "synthetic";

    std::mt19937_64 rng(seed);
    ExactMatchGrader grader;
    for (std::size_t n = 0; n < samples; ++n) {
        const std::string id = default_sample_id(n);
        const std::string gold = "gold" + std::to_string(n);
        const std::string shared = "wrong" + std::to_string(n) + "xs";
        world.dataset.samples.push_back(
            Sample{Query(id, "synthetic question " + std::to_string(n)), GoldAnswerSet({gold})});
        const auto& gold_set = world.dataset.samples.back().gold;

        for (std::size_t m = 0; m < m_count; ++m) {
            const double a = unit(rng);
            const double b = unit(rng);
            const double c = unit(rng);
            const double s = unit(rng);
            const Outcome o = draw_outcome(spec.retrievers[m], a, b, c);
            const std::string distractor =
                s < spec.distractor_sharing ? shared : "wrong" + std::to_string(n) + "x" + std::to_string(m);
            const std::string filler = "passage " + std::to_string(m) + " about sample " + std::to_string(n);

            RunRecord r;
            r.sample_id = id;
            r.retriever = world.retrievers[m];
            switch (o) {
                case Outcome::Correct:
                    r.document_text = filler + " mentions " + gold;
                    r.answer = gold;
                    break;
                case Outcome::HallucinationCorrectDoc:
                    r.document_text = filler + " mentions " + gold;
                    r.answer = distractor;
                    break;
                case Outcome::Extraction:
                    r.document_text = filler + " mentions " + gold + " and " + distractor;
                    r.answer = distractor;
                    break;
                case Outcome::LuckyCorrect:
                    r.document_text = filler;
                    r.answer = gold;
                    break;
                case Outcome::GroundedWrongDoc:
                    r.document_text = filler + " mentions " + distractor;
                    r.answer = distractor;
                    break;
                case Outcome::HallucinationWrongDoc:
                    r.document_text = filler;
                    r.answer = distractor;
                    break;
            }
            r.indicators = compute_record_indicators(r.document_text, r.answer, gold_set, grader);
            world.records.push_back(std::move(r));
            world.outcomes.push_back(o);
        }
    }
    return world;
}

}  // namespace eor
