#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "eor/app.hpp"
#include "eor/dsl.hpp"

namespace {

struct ManifestFlags {
    std::string config;
    std::optional<std::string> mode;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--mode", mode, "live, record or replay");
        cmd->add_option("--workers", workers, "Worker threads for run");
        cmd->add_option("--seed", seed, "Root seed");
        cmd->add_option("--out", out, "Output directory (relative to the working directory)");
    }

    eor::RunManifest load() const {
        auto m = eor::RunManifest::load(config);
        if (mode) m.mode = eor::mode_from_string(*mode);
        if (workers) m.workers = *workers;
        if (seed) m.seed = *seed;
        if (out) m.output_dir = std::filesystem::absolute(*out);
        m.validate();
        return m;
    }
};

void print(const eor::json& j) {
    std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble-of-retrievers toolkit"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    auto* ingest = app.add_subcommand("ingest", "Validate a dataset file and print its summary");
    std::string dataset_path;
    ingest->add_option("path", dataset_path, "Dataset JSON Lines")->required();

    ManifestFlags run_flags, train_flags, ensemble_flags, analyze_flags, report_flags;
    auto* run = app.add_subcommand("run", "Execute every (sample, retriever) pair");
    run_flags.attach(run);
    auto* train = app.add_subcommand("train", "Fit voter weights on the run records");
    train_flags.attach(train);
    auto* ensemble = app.add_subcommand("ensemble", "Select answers with the trained voter");
    ensemble_flags.attach(ensemble);
    auto* analyze = app.add_subcommand("analyze", "Consistency analysis of the run records");
    analyze_flags.attach(analyze);
    auto* report = app.add_subcommand("report", "Write a markdown summary of the run artifacts");
    report_flags.attach(report);

    auto* simulate = app.add_subcommand("simulate", "Verify the error decomposition or generate a synthetic world");
    std::string sim_config;
    eor::SimulateOptions sim;
    std::string world_spec;
    std::size_t world_samples = 2000;
    std::string sim_out = "out";
    simulate->add_option("--config", sim_config, "JSON {trials, seed, parameter_sets}")->check(CLI::ExistingFile);
    simulate->add_option("--trials", sim.trials, "Trials per parameter set");
    simulate->add_option("--sets", sim.random_sets, "Random parameter sets when none are given");
    simulate->add_option("--seed", sim.seed, "Root seed");
    simulate->add_option("--out", sim_out, "Output directory");
    simulate->add_option("--world", world_spec, "World spec JSON; writes dataset.jsonl and records.jsonl instead")
        ->check(CLI::ExistingFile);
    simulate->add_option("--samples", world_samples, "Samples for --world");

    auto* parse = app.add_subcommand("parse", "Parse retriever expressions and print their plans");
    std::vector<std::string> exprs;
    parse->add_option("expr", exprs, "Retriever expressions")->required();

    CLI11_PARSE(app, argc, argv);

    eor::AppContext ctx;
    if (verbose) ctx.log = [](const std::string& msg) { std::cerr << msg << '\n'; };

    try {
        if (*ingest) {
            print(eor::to_json(eor::ingest(dataset_path)));
        } else if (*run) {
            const auto summary = eor::run_pipeline(run_flags.load(), ctx);
            print(eor::to_json(summary));
        } else if (*train) {
            const auto r = eor::train_step(train_flags.load(), ctx);
            print(eor::to_json(r.weights));
        } else if (*ensemble) {
            print(eor::to_json(eor::ensemble_step(ensemble_flags.load(), ctx)));
        } else if (*analyze) {
            print(eor::analyze_step(analyze_flags.load(), ctx));
        } else if (*report) {
            std::cout << eor::report_step(report_flags.load(), ctx).string() << '\n';
        } else if (*simulate) {
            sim.output_dir = sim_out;
            if (!world_spec.empty()) {
                std::ifstream in(world_spec);
                const auto spec = eor::world_spec_from_json(eor::json::parse(in));
                const auto world = eor::generate_world(world_samples, spec, sim.seed);
                eor::write_world(world, sim_out);
                std::cout << "wrote " << world.records.size() << " records to " << sim_out << '\n';
                return EXIT_SUCCESS;
            }
            if (!sim_config.empty()) {
                std::ifstream in(sim_config);
                const auto j = eor::json::parse(in);
                sim.trials = j.value("trials", sim.trials);
                sim.seed = j.value("seed", sim.seed);
                if (j.contains("parameter_sets")) {
                    for (const auto& p : j["parameter_sets"]) {
                        sim.parameter_sets.push_back(eor::world_parameters_from_json(p));
                    }
                }
            }
            const auto reports = eor::simulate_step(sim);
            std::size_t passed = 0;
            for (const auto& r : reports) passed += r.pass() ? 1 : 0;
            std::cout << passed << "/" << reports.size() << " parameter sets within 3 sigma\n";
        } else if (*parse) {
            for (const auto& e : exprs) {
                const auto plan = eor::parse_plan(e);
                std::cout << eor::format_plan(plan) << '\t' << eor::describe_plan(plan) << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
