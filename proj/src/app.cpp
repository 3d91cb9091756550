#include "eor/app.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "eor/consistency.hpp"
#include "eor/dsl.hpp"
#include "eor/hashing.hpp"
#include "eor/retrieval.hpp"

namespace eor {

namespace fs = std::filesystem;

namespace {

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require(const fs::path& path, const std::string& hint) {
    if (!fs::exists(path)) {
        throw Error("missing prerequisite artifact " + path.string() + " (" + hint + ")");
    }
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> canonical_names(const std::vector<std::string>& exprs) {
    std::vector<std::string> out;
    for (const auto& e : exprs) out.push_back(format_plan(parse_plan(e)));
    return out;
}

void log(AppContext& ctx, const std::string& message) {
    if (ctx.log) ctx.log(message);
}

// Backends for one pipeline step.
struct Services {
    std::shared_ptr<CountingTransport> transport;
    std::shared_ptr<ReplayCache> reader_cache;
    std::shared_ptr<ReaderGateway> reader;
    std::shared_ptr<ScoreStore> scores;
    std::shared_ptr<ScorerClient> scorer;
    std::unique_ptr<SourceAdapter> search;
    std::unique_ptr<SourceAdapter> wiki;
    std::unique_ptr<RerankScorer> reranker;

    Services(const RunManifest& m, AppContext& ctx) {
        std::shared_ptr<Transport> inner = ctx.transport;
        if (!inner) {
            if (m.mode == Mode::Replay) {
                inner = std::make_shared<OfflineTransport>();
            } else {
                inner = std::make_shared<HttpTransport>();
            }
        }
        transport = std::make_shared<CountingTransport>(inner);
        reader_cache = std::make_shared<ReplayCache>(m.reader_cache.empty() ? fs::path{} : m.resolve(m.reader_cache));
        reader = std::make_shared<ReaderGateway>(m.reader, m.mode, reader_cache, transport,
                                                 Endpoint::from_env("EOR_READER"));
        scores = std::make_shared<ScoreStore>(m.scorer_cache.empty() ? fs::path{} : m.resolve(m.scorer_cache));
        scorer = std::make_shared<ScorerClient>(m.mode, scores, transport, Endpoint::from_env("EOR_SCORER"));
        search = make_source(m, SourceTag::Search, m.search_fixture, "EOR_SEARCH");
        wiki = make_source(m, SourceTag::Wiki, m.wiki_fixture, "EOR_WIKI");
        reranker = std::make_unique<ServiceRerankScorer>(scorer);
    }

    std::unique_ptr<SourceAdapter> make_source(const RunManifest& m, SourceTag tag, const fs::path& fixture,
                                               const std::string& env) {
        if (!fixture.empty()) return std::make_unique<FixtureSourceAdapter>(tag, m.resolve(fixture));
        auto endpoint = Endpoint::from_env(env);
        if (endpoint.empty()) return nullptr;
        return std::make_unique<HttpSourceAdapter>(tag, transport, std::move(endpoint));
    }

    std::unique_ptr<Grader> grader(const RunManifest& m) const {
        if (m.grader == "em") return std::make_unique<ExactMatchGrader>();
        return std::make_unique<SemanticGrader>(scorer, m.grader, m.grader_threshold);
    }

    RetrievalBackends backends(const RunManifest& m) const {
        return RetrievalBackends{search.get(), wiki.get(), reranker.get(), reader.get(), m.reader.family};
    }

    std::size_t calls() const { return transport->calls(); }
};

std::vector<std::unique_ptr<SimilarityMetric>> build_metrics(const RunManifest& m, const Services& s) {
    std::vector<std::unique_ptr<SimilarityMetric>> out;
    for (const auto& id : m.metrics) out.push_back(make_metric(id, s.scorer));
    return out;
}

std::vector<SimilarityMetric*> raw(const std::vector<std::unique_ptr<SimilarityMetric>>& metrics) {
    std::vector<SimilarityMetric*> out;
    for (const auto& p : metrics) out.push_back(p.get());
    return out;
}

RunTable load_table(const RunManifest& m) {
    const auto records_path = m.out("records.jsonl");
    require(records_path, "run `run` first");
    return RunTable(load_dataset(m.resolve(m.dataset)), canonical_names(m.retrievers), load_run_records(records_path));
}

RunRecord process_pair(const Sample& sample, const RetrievalPlan& plan, const std::string& name,
                       Services& services, Grader& grader, const RunManifest& m) {
    RunRecord r;
    r.sample_id = sample.query.id;
    r.retriever = name;
    try {
        const auto family = m.reader.family;
        std::string prompt;
        if (plan.op == RetrievalPlan::Op::Source && plan.source == SourceKind::ReFree) {
            prompt = render_prompt(PromptKind::ReFree, family, sample.query);
        } else {
            const Document doc = execute_plan(plan, sample.query, services.backends(m));
            if (doc.empty()) {
                r.empty_document = true;
                prompt = render_prompt(PromptKind::ReFree, family, sample.query);
            } else {
                r.document_text = doc.text();
                prompt = render_prompt(PromptKind::Rag, family, sample.query, doc);
            }
        }
        r.answer = trim(services.reader->complete(prompt));
        r.indicators = compute_record_indicators(r.document_text, r.answer, sample.gold, grader);
    } catch (const std::exception& e) {
        r.document_text.clear();
        r.answer.clear();
        r.indicators = {};
        r.error = e.what();
    }
    return r;
}

std::string csv_of(const std::vector<std::string>& names, const std::vector<RatioCell>& cells) {
    std::ostringstream ss;
    write_heatmap_csv(ss, names, cells);
    return ss.str();
}

json cells_json(const std::vector<RatioCell>& cells) {
    json a = json::array();
    for (const auto& c : cells) a.push_back(c.or_sentinel());
    return a;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, const std::string& label) {
    const auto hex = sha256_hex(std::to_string(root) + ":" + label);
    return std::stoull(hex.substr(0, 16), nullptr, 16);
}

// ---------------------------------------------------------------- manifest

RunManifest RunManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

RunManifest RunManifest::from_json(const json& j, const fs::path& base_dir) {
    RunManifest m;
    m.base_dir = base_dir;
    try {
        m.dataset = j.at("dataset").get<std::string>();
        m.retrievers = j.at("retrievers").get<std::vector<std::string>>();
        if (j.contains("reader")) {
            const auto& r = j["reader"];
            m.reader.model_id = r.value("model_id", m.reader.model_id);
            if (r.contains("family")) m.reader.family = template_family_from_string(r["family"].get<std::string>());
            m.reader.max_tokens = r.value("max_tokens", m.reader.max_tokens);
        }
        if (j.contains("mode")) m.mode = mode_from_string(j["mode"].get<std::string>());
        m.seed = j.value("seed", std::uint64_t{0});
        m.output_dir = j.value("output_dir", std::string("out"));
        m.workers = j.value("workers", 4u);
        if (j.contains("sources")) {
            m.search_fixture = j["sources"].value("search", std::string());
            m.wiki_fixture = j["sources"].value("wiki", std::string());
        }
        if (j.contains("caches")) {
            m.reader_cache = j["caches"].value("reader", std::string());
            m.scorer_cache = j["caches"].value("scorer", std::string());
        }
        if (j.contains("grader")) {
            m.grader = j["grader"].value("metric", m.grader);
            m.grader_threshold = j["grader"].value("threshold", m.grader_threshold);
        }
        if (j.contains("voter")) {
            m.metrics = j["voter"].value("metrics", m.metrics);
            if (j["voter"].contains("pooling")) m.pooling = pooling_from_string(j["voter"]["pooling"].get<std::string>());
        }
        if (j.contains("training")) {
            const auto& t = j["training"];
            m.training.max_iterations = t.value("max_iterations", m.training.max_iterations);
            m.training.f_tolerance = t.value("f_tolerance", m.training.f_tolerance);
            m.training.x_tolerance = t.value("x_tolerance", m.training.x_tolerance);
            m.training.restarts = t.value("restarts", m.training.restarts);
            m.training.threshold = t.value("threshold", m.training.threshold);
        }
        if (j.contains("analysis")) {
            m.max_answer_tokens = j["analysis"].value("max_answer_tokens", m.max_answer_tokens);
        }
    } catch (const json::exception& e) {
        throw Error(std::string("invalid manifest: ") + e.what());
    }
    m.validate();
    return m;
}

json RunManifest::to_json() const {
    return json{
        {"dataset", dataset.string()},
        {"retrievers", retrievers},
        {"reader",
         {{"model_id", reader.model_id},
          {"family", std::string(eor::to_string(reader.family))},
          {"max_tokens", reader.max_tokens}}},
        {"mode", std::string(eor::to_string(mode))},
        {"seed", seed},
        {"output_dir", output_dir.string()},
        {"workers", workers},
        {"sources", {{"search", search_fixture.string()}, {"wiki", wiki_fixture.string()}}},
        {"caches", {{"reader", reader_cache.string()}, {"scorer", scorer_cache.string()}}},
        {"grader", {{"metric", grader}, {"threshold", grader_threshold}}},
        {"voter", {{"metrics", metrics}, {"pooling", eor::to_string(pooling)}}},
        {"training",
         {{"max_iterations", training.max_iterations},
          {"f_tolerance", training.f_tolerance},
          {"x_tolerance", training.x_tolerance},
          {"restarts", training.restarts},
          {"threshold", training.threshold}}},
        {"analysis", {{"max_answer_tokens", max_answer_tokens}}},
    };
}

std::string RunManifest::hash() const {
    json identity = to_json();
    identity.erase("mode");
    identity.erase("workers");
    identity.erase("output_dir");
    identity.erase("sources");
    identity.erase("caches");
    identity["dataset"] = sha256_hex(read_text(resolve(dataset)));
    identity["retrievers"] = canonical_names(retrievers);
    return sha256_hex(identity.dump());
}

fs::path RunManifest::resolve(const fs::path& p) const {
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

fs::path RunManifest::out(const std::string& name) const {
    return resolve(output_dir) / name;
}

void RunManifest::validate() const {
    if (retrievers.empty()) throw Error("manifest lists no retrievers");
    std::set<std::string> seen;
    for (const auto& r : retrievers) {
        const auto name = format_plan(parse_plan(r));
        if (!seen.insert(name).second) throw Error("duplicate retriever in manifest: " + name);
    }
    if (workers < 1) throw Error("workers must be >= 1");
    if (metrics.empty()) throw Error("manifest lists no similarity metrics");
    training.validate();
}

// ------------------------------------------------------------------ ingest

json to_json(const DatasetSummary& s) {
    return json{{"name", s.name},
                {"count", s.count},
                {"mean_aliases", s.mean_aliases},
                {"mean_question_tokens", s.mean_question_tokens}};
}

DatasetSummary ingest(const fs::path& path) {
    const auto ds = load_dataset(path);
    DatasetSummary s;
    s.name = ds.name;
    s.count = ds.size();
    if (s.count == 0) return s;
    double aliases = 0.0;
    double tokens = 0.0;
    for (const auto& sample : ds.samples) {
        aliases += static_cast<double>(sample.gold.aliases().size());
        tokens += static_cast<double>(raw_tokens(sample.query.text).size());
    }
    s.mean_aliases = aliases / static_cast<double>(s.count);
    s.mean_question_tokens = tokens / static_cast<double>(s.count);
    return s;
}

// --------------------------------------------------------------------- run

json to_json(const RunSummary& s) {
    json failures = json::array();
    for (const auto& f : s.failures) {
        failures.push_back({{"sample_id", f.sample_id}, {"retriever", f.retriever}, {"error", f.error}});
    }
    return json{{"pairs", s.pairs},
                {"completed", s.completed},
                {"skipped", s.skipped},
                {"failures", failures},
                {"network_calls", s.network_calls}};
}

RunSummary run_pipeline(const RunManifest& m, AppContext& ctx) {
    m.validate();
    const auto dataset = load_dataset(m.resolve(m.dataset));
    const auto names = canonical_names(m.retrievers);
    std::vector<RetrievalPlan> plans;
    for (const auto& n : names) plans.push_back(parse_plan(n));

    const auto records_path = m.out("records.jsonl");
    std::map<std::pair<std::string, std::string>, RunRecord> done;
    if (fs::exists(records_path)) {
        for (auto& r : load_run_records(records_path)) {
            if (!r.error) done[{r.sample_id, r.retriever}] = std::move(r);
        }
    }

    struct Item {
        std::size_t sample;
        std::size_t retriever;
    };
    std::vector<Item> todo;
    RunSummary summary;
    for (std::size_t n = 0; n < dataset.size(); ++n) {
        for (std::size_t r = 0; r < names.size(); ++r) {
            ++summary.pairs;
            if (done.count({dataset.samples[n].query.id, names[r]})) {
                ++summary.skipped;
            } else {
                todo.push_back({n, r});
            }
        }
    }
    log(ctx, "run: " + std::to_string(todo.size()) + " pairs to execute, " + std::to_string(summary.skipped) +
                 " already persisted");

    Services services(m, ctx);
    auto grader = services.grader(m);
    std::mutex grader_mutex;

    // Results land in slots; the contiguous finished prefix is appended in
    // item order so the file never depends on scheduling.
    std::vector<std::optional<RunRecord>> slots(todo.size());
    std::size_t next_write = 0;
    std::mutex write_mutex;
    if (records_path.has_parent_path()) fs::create_directories(records_path.parent_path());
    std::ofstream journal(records_path, std::ios::app);
    if (!journal) throw Error("cannot write " + records_path.string());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            const auto& item = todo[i];
            // Graders may be model-backed and are not assumed thread-safe.
            struct LockedGrader : Grader {
                Grader& inner;
                std::mutex& mu;
                LockedGrader(Grader& g, std::mutex& m_) : inner(g), mu(m_) {}
                bool correct(const std::string& a, const GoldAnswerSet& g) override {
                    std::lock_guard lock(mu);
                    return inner.correct(a, g);
                }
            } locked(*grader, grader_mutex);
            auto record = process_pair(dataset.samples[item.sample], plans[item.retriever], names[item.retriever],
                                       services, locked, m);
            std::lock_guard lock(write_mutex);
            slots[i] = std::move(record);
            while (next_write < slots.size() && slots[next_write]) {
                const std::string line = eor::to_json(*slots[next_write]).dump() + "\n";
                journal.write(line.data(), static_cast<std::streamsize>(line.size()));
                journal.flush();
                ++next_write;
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(m.workers, static_cast<unsigned>(std::max<std::size_t>(1, todo.size()))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    journal.close();

    for (auto& slot : slots) {
        auto& r = *slot;
        if (r.error) {
            summary.failures.push_back({r.sample_id, r.retriever, *r.error});
        } else {
            ++summary.completed;
        }
        done[{r.sample_id, r.retriever}] = std::move(r);
    }

    // Canonical rewrite: sample order, then manifest retriever order.
    std::ostringstream canonical;
    for (const auto& s : dataset.samples) {
        for (const auto& n : names) {
            auto it = done.find({s.query.id, n});
            if (it != done.end()) canonical << eor::to_json(it->second).dump() << '\n';
        }
    }
    write_text_atomic(records_path, canonical.str());

    summary.network_calls = services.calls();
    ctx.network_calls += summary.network_calls;
    json js = to_json(summary);
    js.erase("network_calls");
    js["manifest_hash"] = m.hash();
    write_text_atomic(m.out("run_summary.json"), js.dump(2) + "\n");
    log(ctx, "run: " + std::to_string(summary.completed) + " completed, " +
                 std::to_string(summary.failures.size()) + " failed");
    return summary;
}

// ------------------------------------------------------------------- train

TrainReport train_step(const RunManifest& m, AppContext& ctx) {
    const auto table = load_table(m);
    Services services(m, ctx);
    auto grader = services.grader(m);
    auto metrics = build_metrics(m, services);
    const auto ptrs = raw(metrics);
    const auto tensor = precompute(table, *grader, ptrs);

    SearchConfig config = m.training;
    config.seed = derive_seed(m.seed, "train");
    auto report = train(tensor, config, m.pooling);
    save_weights(m.out("weights.json"), report.weights);

    std::ostringstream trace;
    trace << "restart,iteration,best\n";
    for (const auto& p : report.trace) trace << p.restart << ',' << p.iteration << ',' << format_ratio(p.best) << '\n';
    write_text_atomic(m.out("train_trace.csv"), trace.str());

    json active = json::array();
    for (auto a : report.active) active.push_back(table.retriever_names()[a]);
    const json summary{{"initial_objective", report.initial_objective},
                       {"objective", report.weights.objective},
                       {"iterations", report.iterations},
                       {"restarts", report.restarts},
                       {"converged", report.converged},
                       {"active", active}};
    write_text_atomic(m.out("train_report.json"), summary.dump(2) + "\n");
    ctx.network_calls += services.calls();
    log(ctx, "train: objective " + fixed(report.initial_objective) + " -> " + fixed(report.weights.objective));
    return report;
}

// ---------------------------------------------------------------- ensemble

json to_json(const EnsembleSummary& s) {
    return json{{"samples", s.samples},
                {"accuracy", s.accuracy},
                {"retriever_accuracy", s.retriever_accuracy},
                {"best_single", s.best_single},
                {"best_single_accuracy", s.best_single_accuracy},
                {"no_active", s.no_active}};
}

EnsembleSummary ensemble_step(const RunManifest& m, AppContext& ctx) {
    const auto table = load_table(m);
    const auto weights_path = m.out("weights.json");
    require(weights_path, "run `train` first");
    const auto w = load_weights(weights_path);
    if (w.retriever_names != table.retriever_names()) {
        throw Error("weights.json retrievers do not match the manifest pool");
    }
    Services services(m, ctx);
    auto grader = services.grader(m);
    std::vector<std::unique_ptr<SimilarityMetric>> metrics;
    for (const auto& id : w.metric_ids) metrics.push_back(make_metric(id, services.scorer));
    const auto ptrs = raw(metrics);

    EnsembleSummary s;
    s.samples = table.samples();
    s.retriever_accuracy.assign(table.retrievers(), 0.0);
    std::ostringstream lines;
    std::size_t hits = 0;
    for (std::size_t n = 0; n < table.samples(); ++n) {
        std::vector<std::string> answers;
        std::vector<CandidateAnswer> candidates;
        for (std::size_t r = 0; r < table.retrievers(); ++r) {
            answers.push_back(table.at(n, r).answer);
            candidates.emplace_back(static_cast<int>(r), table.at(n, r).answer);
            s.retriever_accuracy[r] += table.at(n, r).indicators.answer_correct;
        }
        const auto tensor = build_similarity_tensor(answers, ptrs);
        json line{{"sample_id", table.sample_ids()[n]}};
        try {
            const auto vote = voter_scores(candidates, tensor, w.omega_s, w.omega_r, w.pooling);
            const bool ok = grader->correct(answers[vote.winner], table.gold(n));
            hits += ok ? 1 : 0;
            line["retriever"] = table.retriever_names()[vote.winner];
            line["answer"] = answers[vote.winner];
            line["correct"] = ok;
            line["scores"] = vote.scores;
        } catch (const NoActiveRetriever&) {
            ++s.no_active;
            line["retriever"] = nullptr;
            line["answer"] = nullptr;
            line["correct"] = false;
        }
        lines << line.dump() << '\n';
    }
    s.accuracy = static_cast<double>(hits) / static_cast<double>(s.samples);
    for (std::size_t r = 0; r < table.retrievers(); ++r) {
        s.retriever_accuracy[r] /= static_cast<double>(s.samples);
        if (r == 0 || s.retriever_accuracy[r] > s.best_single_accuracy) {
            s.best_single_accuracy = s.retriever_accuracy[r];
            s.best_single = table.retriever_names()[r];
        }
    }
    write_text_atomic(m.out("ensemble.jsonl"), lines.str());
    write_text_atomic(m.out("ensemble_summary.json"), to_json(s).dump(2) + "\n");
    ctx.network_calls += services.calls();
    log(ctx, "ensemble: accuracy " + fixed(s.accuracy) + " (best single " + s.best_single + " " +
                 fixed(s.best_single_accuracy) + ")");
    return s;
}

// ----------------------------------------------------------------- analyze

json analyze_step(const RunManifest& m, AppContext& ctx) {
    const auto full = load_table(m);
    const auto table = m.max_answer_tokens > 0 ? length_filter(full, m.max_answer_tokens) : full;
    const auto& names = full.retriever_names();
    const std::size_t m_count = names.size();

    json summary;
    summary["manifest_hash"] = m.hash();
    summary["samples"] = full.samples();
    summary["samples_after_length_filter"] = table.samples();
    summary["retrievers"] = names;

    const auto full_ind = stored_indicators(full);
    const auto full_corr = full_ind.correctness();
    std::vector<double> acc(m_count, 0.0);
    for (std::size_t n = 0; n < full_corr.rows(); ++n) {
        for (std::size_t r = 0; r < m_count; ++r) acc[r] += full_corr.at(n, r);
    }
    for (auto& a : acc) a /= static_cast<double>(full_corr.rows());
    summary["accuracy"] = acc;

    const auto dir = m.out("analysis");
    if (table.samples() > 0) {
        const auto ind = stored_indicators(table);
        const auto corr = ind.correctness();
        write_text_atomic(dir / "rwr.csv", csv_of(names, rwr_matrix(corr)));
        if (m_count >= 2) {
            summary["mrwr"] = cells_json(mrwr(corr));
            summary["mrlr"] = cells_json(mrlr(corr));
        }
        for (auto kind : {ErrorKind::Retriever, ErrorKind::Hallucination, ErrorKind::Extraction,
                          ErrorKind::LuckyGuess}) {
            write_text_atomic(dir / ("error_rwr_" + std::string(to_string(kind)) + ".csv"),
                              csv_of(names, error_rwr_matrix(kind, ind)));
        }

        const auto ensemble_path = m.out("ensemble.jsonl");
        if (fs::exists(ensemble_path)) {
            std::map<std::string, int> eor_correct;
            std::ifstream in(ensemble_path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = json::parse(line);
                eor_correct[j.at("sample_id").get<std::string>()] = j.at("correct").get<bool>() ? 1 : 0;
            }
            std::vector<std::uint8_t> values;
            for (std::size_t n = 0; n < corr.rows(); ++n) {
                for (std::size_t r = 0; r < m_count; ++r) values.push_back(corr.at(n, r));
                auto it = eor_correct.find(corr.row_ids()[n]);
                if (it == eor_correct.end()) throw Error("ensemble.jsonl lacks sample " + corr.row_ids()[n]);
                values.push_back(static_cast<std::uint8_t>(it->second));
            }
            auto cols = names;
            cols.push_back("EoR");
            const IndicatorMatrix augmented(corr.row_ids(), cols, std::move(values));
            write_text_atomic(dir / "rwr_with_eor.csv", csv_of(cols, rwr_matrix(augmented)));
            const auto lr = mrlr(augmented);
            summary["eor"] = {{"mrlr", lr.back().or_sentinel()}, {"mrlr_with_eor", cells_json(lr)}};
        }
    }

    const auto ub = upper_bound_by_size(full_corr, 200, derive_seed(m.seed, "upper_bound"));
    json ub_json = json::array();
    for (const auto& d : ub) {
        const auto [lo, hi] = std::minmax_element(d.values.begin(), d.values.end());
        ub_json.push_back({{"size", d.subset_size},
                           {"sampled", d.sampled},
                           {"min", *lo},
                           {"mean", mean_of(d.values)},
                           {"max", *hi},
                           {"values", d.values}});
    }
    write_text_atomic(m.out("upper_bound.json"), json{{"retrievers", names}, {"by_size", ub_json}}.dump(2) + "\n");
    write_text_atomic(dir / "summary.json", summary.dump(2) + "\n");
    log(ctx, "analyze: wrote " + dir.string());
    return summary;
}

// ------------------------------------------------------------------ report

fs::path report_step(const RunManifest& m, AppContext& ctx) {
    const auto summary_path = m.out("analysis") / "summary.json";
    require(summary_path, "run `analyze` first");
    const auto summary = json::parse(read_text(summary_path));
    const auto names = summary.at("retrievers").get<std::vector<std::string>>();

    std::ostringstream md;
    md << "# Run report\n\n";
    md << "- Manifest hash: `" << summary.at("manifest_hash").get<std::string>() << "`\n";
    md << "- Samples: " << summary.at("samples").get<std::size_t>() << " ("
       << summary.at("samples_after_length_filter").get<std::size_t>() << " after the answer-length filter)\n";
    md << "- Retrievers: " << names.size() << "\n\n";

    md << "## Retrievers\n\n| Retriever | Accuracy | MRWR | MRLR |\n|---|---|---|---|\n";
    const auto acc = summary.at("accuracy").get<std::vector<double>>();
    for (std::size_t r = 0; r < names.size(); ++r) {
        md << "| " << names[r] << " | " << fixed(acc[r]);
        for (const char* key : {"mrwr", "mrlr"}) {
            if (summary.contains(key)) {
                const double v = summary[key][r].get<double>();
                md << " | " << (v < 0 ? std::string("n/a") : fixed(v));
            } else {
                md << " | n/a";
            }
        }
        md << " |\n";
    }
    md << '\n';

    const auto weights_path = m.out("weights.json");
    if (fs::exists(weights_path)) {
        const auto w = load_weights(weights_path);
        md << "## Retriever weights\n\nThreshold " << fixed(w.omega_r.threshold) << ", pooling `"
           << to_string(w.pooling) << "`, training objective " << fixed(w.objective) << ".\n\n";
        md << "| Retriever | Weight | Active |\n|---|---|---|\n";
        for (std::size_t r = 0; r < w.retriever_names.size(); ++r) {
            md << "| " << w.retriever_names[r] << " | " << fixed(w.omega_r.values[r]) << " | "
               << (w.omega_r.active(r) ? "yes" : "no") << " |\n";
        }
        md << "\n| Metric | Weight |\n|---|---|\n";
        for (std::size_t k = 0; k < w.metric_ids.size(); ++k) {
            md << "| " << w.metric_ids[k] << " | " << fixed(w.omega_s.values[k]) << " |\n";
        }
        md << '\n';
    }

    const auto ens_path = m.out("ensemble_summary.json");
    if (fs::exists(ens_path)) {
        const auto e = json::parse(read_text(ens_path));
        md << "## Ensemble\n\n- Accuracy: " << fixed(e.at("accuracy").get<double>()) << "\n";
        md << "- Best single retriever: " << e.at("best_single").get<std::string>() << " ("
           << fixed(e.at("best_single_accuracy").get<double>()) << ")\n";
        md << "- Samples with no active retriever: " << e.at("no_active").get<std::size_t>() << "\n";
        if (summary.contains("eor")) md << "- Ensemble MRLR: " << fixed(summary["eor"]["mrlr"].get<double>()) << "\n";
        md << '\n';
    }

    const auto ub_path = m.out("upper_bound.json");
    if (fs::exists(ub_path)) {
        const auto ub = json::parse(read_text(ub_path));
        md << "## Ensemble upper bound by pool size\n\n| Size | Min | Mean | Max |\n|---|---|---|---|\n";
        for (const auto& d : ub.at("by_size")) {
            md << "| " << d.at("size").get<std::size_t>() << " | " << fixed(d.at("min").get<double>()) << " | "
               << fixed(d.at("mean").get<double>()) << " | " << fixed(d.at("max").get<double>()) << " |\n";
        }
        md << '\n';
    }

    const auto path = m.out("report.md");
    write_text_atomic(path, md.str());
    log(ctx, "report: wrote " + path.string());
    return path;
}

// ---------------------------------------------------------------- simulate

std::vector<WorldParameters> random_parameter_sets(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<WorldParameters> out;
    for (std::size_t i = 0; i < count; ++i) {
        WorldParameters p;
        p.eps_r = u();
        p.eps_h_correct = u();
        p.eps_e = u() * (1.0 - p.eps_h_correct);
        p.eps_h_wrong = u();
        p.eps_luck = u();
        out.push_back(p);
    }
    return out;
}

std::vector<DecompositionReport> simulate_step(const SimulateOptions& options) {
    auto sets = options.parameter_sets;
    if (sets.empty()) sets = random_parameter_sets(options.random_sets, derive_seed(options.seed, "parameters"));
    std::vector<DecompositionReport> reports;
    json arr = json::array();
    std::size_t passed = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        reports.push_back(verify_decomposition(sets[i], options.trials, derive_seed(options.seed, "trials:" + std::to_string(i))));
        passed += reports.back().pass() ? 1 : 0;
        arr.push_back(to_json(reports.back()));
    }
    const json doc{{"trials", options.trials},
                   {"seed", options.seed},
                   {"passed", passed},
                   {"total", sets.size()},
                   {"reports", arr}};
    write_text_atomic(options.output_dir / "simulate" / "report.json", doc.dump(2) + "\n");
    return reports;
}

void write_world(const GeneratedWorld& world, const fs::path& dir) {
    write_dataset(dir / "dataset.jsonl", world.dataset);
    write_run_records(dir / "records.jsonl", world.records);
}

}  // namespace eor
