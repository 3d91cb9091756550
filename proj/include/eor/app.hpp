#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eor/reader.hpp"
#include "eor/records.hpp"
#include "eor/simulator.hpp"
#include "eor/trainer.hpp"

namespace eor {

/// Everything that identifies a run. Relative paths resolve against the
/// manifest's directory.
struct RunManifest {
    std::filesystem::path base_dir;
    std::filesystem::path dataset;
    std::vector<std::string> retrievers;
    ReaderConfig reader;
    Mode mode = Mode::Replay;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    unsigned workers = 4;

    // Sources: a fixture path wins over an endpoint from the environment.
    std::filesystem::path search_fixture;
    std::filesystem::path wiki_fixture;
    std::filesystem::path reader_cache;
    std::filesystem::path scorer_cache;

    std::string grader = "em";                      // "em" or a scorer metric id such as "bem"
    double grader_threshold = 0.8;
    std::vector<std::string> metrics{"em", "token_f1"};
    Pooling pooling = Pooling::mean();
    SearchConfig training;
    std::size_t max_answer_tokens = 5;              // analysis length filter; 0 disables

    static RunManifest load(const std::filesystem::path& path);
    static RunManifest from_json(const json& j, const std::filesystem::path& base_dir);
    json to_json() const;

    /// SHA-256 over the fields that determine outputs (not mode, workers or
    /// locations).
    std::string hash() const;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
    std::filesystem::path out(const std::string& name) const;

    /// Throws on duplicate canonical retriever names or invalid expressions.
    void validate() const;
};

/// Independent sub-seed for a named stage.
std::uint64_t derive_seed(std::uint64_t root, const std::string& label);

/// Shared across pipeline steps: transport injection and call accounting.
struct AppContext {
    /// Used for every outbound request; defaults depend on mode (offline in
    /// replay, HTTP otherwise).
    std::shared_ptr<Transport> transport;
    std::function<void(const std::string&)> log;
    std::atomic<std::size_t> network_calls{0};
};

struct DatasetSummary {
    std::string name;
    std::size_t count = 0;
    double mean_aliases = 0.0;
    double mean_question_tokens = 0.0;
};

json to_json(const DatasetSummary& s);
DatasetSummary ingest(const std::filesystem::path& path);

struct PairFailure {
    std::string sample_id;
    std::string retriever;
    std::string error;
};

struct RunSummary {
    std::size_t pairs = 0;
    std::size_t completed = 0;
    std::size_t skipped = 0;
    std::vector<PairFailure> failures;
    std::size_t network_calls = 0;
};

json to_json(const RunSummary& s);

/// Executes every missing (sample, retriever) pair into records.jsonl.
RunSummary run_pipeline(const RunManifest& manifest, AppContext& ctx);

/// Fits the voter weights on the persisted records; writes weights.json
/// and train_trace.csv.
TrainReport train_step(const RunManifest& manifest, AppContext& ctx);

struct EnsembleSummary {
    std::size_t samples = 0;
    double accuracy = 0.0;
    std::vector<double> retriever_accuracy;
    std::string best_single;
    double best_single_accuracy = 0.0;
    std::size_t no_active = 0;
};

json to_json(const EnsembleSummary& s);

/// Applies weights.json to every sample; writes ensemble.jsonl and
/// ensemble_summary.json.
EnsembleSummary ensemble_step(const RunManifest& manifest, AppContext& ctx);

/// Consistency analysis from the persisted records alone. Writes
/// analysis/*.csv, analysis/summary.json and upper_bound.json.
json analyze_step(const RunManifest& manifest, AppContext& ctx);

/// Markdown summary of whatever artifacts exist; analysis is required.
std::filesystem::path report_step(const RunManifest& manifest, AppContext& ctx);

struct SimulateOptions {
    std::vector<WorldParameters> parameter_sets;  // empty: draw `random_sets`
    std::size_t random_sets = 20;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
};

/// Verification reports for each parameter set; writes
/// simulate/report.json.
std::vector<DecompositionReport> simulate_step(const SimulateOptions& options);

/// Seeded parameter sets satisfying the world invariants.
std::vector<WorldParameters> random_parameter_sets(std::size_t count, std::uint64_t seed);

/// Writes dataset.jsonl and records.jsonl for a generated world.
void write_world(const GeneratedWorld& world, const std::filesystem::path& dir);

}  // namespace eor
