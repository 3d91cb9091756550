#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eor/records.hpp"
#include "eor/transport.hpp"

namespace eor {

struct WorldParameters {
    double eps_r = 0.0;
    double eps_h_correct = 0.0;
    double eps_e = 0.0;
    double eps_h_wrong = 0.0;
    double eps_luck = 0.0;

    void validate() const;
    bool operator==(const WorldParameters&) const = default;
};

json to_json(const WorldParameters& p);
WorldParameters world_parameters_from_json(const json& j);

/// Closed-form failure probability.
double analytic_failure(const WorldParameters& p);

enum class Outcome { Correct, HallucinationCorrectDoc, Extraction, LuckyCorrect, GroundedWrongDoc,
                     HallucinationWrongDoc };

bool is_correct(Outcome o);

/// Maps three uniforms in [0, 1) to one outcome.
Outcome draw_outcome(const WorldParameters& p, double u_doc, double u_answer, double u_luck);

struct SimOutcome {
    std::uint64_t n_trials = 0;
    std::uint64_t failure_count = 0;
    std::uint64_t correct = 0;
    /// Hallucinations that end wrong, on either document kind.
    std::uint64_t hallucination_wrong = 0;
    std::uint64_t extraction_wrong = 0;
    std::uint64_t lucky_correct = 0;
    std::uint64_t grounded_wrong_doc = 0;
    /// Part of hallucination_wrong that happened on a wrong document.
    std::uint64_t hallucination_wrong_doc = 0;
    std::uint64_t seed = 0;

    bool operator==(const SimOutcome&) const = default;
};

json to_json(const SimOutcome& o);

/// Trials run in fixed blocks with one seeded substream per block, so the
/// result depends on (params, n_trials, seed) only, never on thread count.
SimOutcome simulate(const WorldParameters& params, std::uint64_t n_trials, std::uint64_t seed,
                    unsigned threads = 0);

struct RateCheck {
    std::string name;
    double empirical = 0.0;
    double expected = 0.0;
    double standard_error = 0.0;
    bool pass = false;
};

struct DecompositionReport {
    WorldParameters params;
    SimOutcome outcome;
    RateCheck failure;
    std::vector<RateCheck> categories;

    bool pass() const { return failure.pass; }
    bool all_categories_pass() const;
};

json to_json(const DecompositionReport& r);

/// Passing means |empirical - expected| <= 3 binomial sigma; a zero sigma
/// demands exact equality.
RateCheck check_rate(std::string name, std::uint64_t hits, std::uint64_t n, double expected);

DecompositionReport verify_decomposition(const WorldParameters& params, std::uint64_t n_trials,
                                         std::uint64_t seed);

struct WorldSpec {
    std::vector<WorldParameters> retrievers;
    std::vector<std::string> names;  // optional; defaults to r0, r1, ...
    /// Probability that a wrong answer is the sample's shared distractor
    /// instead of a retriever-private one.
    double distractor_sharing = 0.0;

    void validate() const;
};

json to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const json& j);

struct GeneratedWorld {
    Dataset dataset;
    std::vector<std::string> retrievers;
    std::vector<RunRecord> records;
    /// Sampled outcome per record, same order as records.
    std::vector<Outcome> outcomes;
};

/// Synthetic run: gold answers "gold<n>", wrong answers drawn from distinct
/// distractors, and documents built so the stored indicators reproduce the
/// sampled outcome.
GeneratedWorld generate_world(std::size_t samples, const WorldSpec& spec, std::uint64_t seed);

std::string_view to_string(Outcome o);

}  // namespace eor
