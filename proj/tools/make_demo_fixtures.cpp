// Builds the shipped replay fixtures: a small synthetic dataset, search and
// wiki source fixtures, and reader/scorer caches recorded against a
// deterministic stand-in for the model services.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include <CLI11.hpp>

#include "eor/app.hpp"
#include "eor/hashing.hpp"

namespace fs = std::filesystem;
using eor::json;

namespace {

const std::vector<std::string> kSyllables = {"ka", "ve", "lor", "min", "ta", "rus", "del", "an", "mo",
                                             "sif", "qua", "ren", "bo", "lix", "tor", "ema", "gal", "nu"};
const std::vector<std::string> kFiller = {
    "the",     "region",  "was",      "known",    "for",     "its",       "river",    "trade",
    "in",      "early",   "records",  "a",        "council", "met",       "each",     "season",
    "local",   "stone",   "market",   "roads",    "north",   "harbor",    "built",    "after",
    "long",    "dispute", "between",  "families", "while",   "travelers", "described", "wide",
    "valleys", "and",     "old",      "mills",    "archive", "notes",     "mention",  "several",
    "names",   "later",   "scholars", "disagree", "on",      "dates",     "of",       "events"};
const std::vector<std::string> kQuestionForms = {
    "who founded the town of {}", "who designed the great bridge of {}", "who first mapped the coast of {}",
    "who wrote the charter of {}", "who led the first council of {}"};

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)); }
    std::string word(const std::vector<std::string>& v) { return v[pick(v.size())]; }
};

std::string make_name(Rng& rng, int syllables) {
    std::string s;
    for (int i = 0; i < syllables; ++i) s += rng.word(kSyllables);
    return capitalize(s);
}

std::string filler(Rng& rng, std::size_t words) {
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) out += ' ';
        out += rng.word(kFiller);
    }
    return out;
}

struct Item {
    std::string id;
    std::string question;
    std::string place;
    std::string gold;
    std::vector<std::string> distractors;
};

// Deterministic uniform in [0, 1) keyed by text.
double hashed_unit(const std::string& text) {
    const auto hex = eor::sha256_hex(text);
    return static_cast<double>(std::stoull(hex.substr(0, 13), nullptr, 16)) / static_cast<double>(1ULL << 52);
}

std::string between(const std::string& s, const std::string& open, const std::string& close) {
    const auto b = s.find(open);
    if (b == std::string::npos) return {};
    const auto start = b + open.size();
    const auto e = close.empty() ? std::string::npos : s.find(close, start);
    return s.substr(start, e == std::string::npos ? std::string::npos : e - start);
}

bool mentions(const std::string& doc, const std::string& name) {
    const std::vector<std::string> a{name};
    return eor::contains_answer(doc, a);
}

class SyntheticServices : public eor::Transport {
public:
    explicit SyntheticServices(const std::vector<Item>& items) {
        for (const auto& it : items) by_question_[it.question] = &it;
    }

    json post_json(const std::string& url, const json& body, const std::map<std::string, std::string>&) override {
        if (url.find("reader") != std::string::npos) return {{"text", read(body.at("prompt").get<std::string>())}};
        if (url.find("scorer") != std::string::npos) {
            return {{"score", score(body.at("text_a").get<std::string>(), body.at("text_b").get<std::string>())}};
        }
        throw eor::TransportError("no synthetic service at " + url);
    }

private:
    const Item& item(const std::string& question) const {
        auto it = by_question_.find(question);
        if (it == by_question_.end()) throw eor::Error("unknown synthetic question: " + question);
        return *it->second;
    }

    static std::string grounded_distractor(const Item& it, const std::string& doc, double u) {
        std::vector<std::string> present;
        for (const auto& d : it.distractors) {
            if (mentions(doc, d)) present.push_back(d);
        }
        if (present.empty()) return it.distractors[static_cast<std::size_t>(u * it.distractors.size())];
        return present[static_cast<std::size_t>(u * present.size())];
    }

    std::string answer(const Item& it, const std::string& doc, const std::string& prompt) const {
        const double u = hashed_unit(prompt + "#a");
        const double v = hashed_unit(prompt + "#b");
        if (doc.empty()) return u < 0.4 ? it.gold : it.distractors[static_cast<std::size_t>(v * it.distractors.size())];
        if (mentions(doc, it.gold)) {
            return u < 0.85 ? it.gold : grounded_distractor(it, doc, v);
        }
        return u < 0.15 ? it.gold : grounded_distractor(it, doc, v);
    }

    std::string read(const std::string& prompt) const {
        if (prompt.rfind("Please truthfully summarize", 0) == 0) {
            const auto& it = item(between(prompt, "query: ", "\n\ndocument: "));
            const auto doc = between(prompt, "\n\ndocument: ", "\n\nsummary:");
            const double u = hashed_unit(prompt + "#c");
            const std::string who = mentions(doc, it.gold) && u < 0.9 ? it.gold : grounded_distractor(it, doc, u);
            return "The document states that " + who + " is credited in the history of " + it.place + ".";
        }
        if (prompt.rfind("Assuming the following paragraphs are true:", 0) == 0) {
            const auto doc = between(prompt, "are true:\n\n", "\n\nPlease directly answer");
            const auto q = prompt.substr(prompt.rfind('\n') + 1);
            return answer(item(q), doc, prompt);
        }
        if (prompt.rfind("Generate a background document", 0) == 0) {
            auto q = prompt.substr(prompt.find('\n') + 1);
            if (!q.empty() && q.back() == '.') q.pop_back();
            const auto& it = item(q);
            const double u = hashed_unit(prompt + "#p");
            return "Accounts of " + it.place + " often credit " + (u < 0.5 ? it.gold : it.distractors[0]) + ".";
        }
        const auto q = prompt.substr(prompt.find('\n') + 1);
        return answer(item(q), "", prompt);
    }

    // Query-term overlap plus a bonus for passages holding a gold alias, so
    // reranking helps without being perfect.
    double score(const std::string& query, const std::string& chunk) const {
        const auto qt = eor::normalized_tokens(query);
        const auto ct = eor::normalized_tokens(chunk);
        std::size_t overlap = 0;
        for (const auto& t : qt) {
            if (std::find(ct.begin(), ct.end(), t) != ct.end()) ++overlap;
        }
        double s = qt.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(qt.size());
        auto it = by_question_.find(query);
        if (it != by_question_.end() && mentions(chunk, it->second->gold)) s += 0.4;
        return s + 0.2 * hashed_unit(query + "|" + chunk);
    }

    std::map<std::string, const Item*> by_question_;
};

std::string page(Rng& rng, const Item& it, std::size_t words, double p_gold, double p_distractor) {
    std::string text = filler(rng, words / 3) + " " + it.place + " " + filler(rng, words / 3);
    if (rng.unit() < p_gold) text += " " + it.gold + " founded much of " + it.place;
    if (rng.unit() < p_distractor) text += " " + rng.word(it.distractors) + " is also named in accounts";
    return text + " " + filler(rng, words - 2 * (words / 3));
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the demo replay fixtures"};
    std::string out_dir = "fixtures/demo";
    std::size_t samples = 100;
    std::uint64_t seed = 7;
    app.add_option("--out", out_dir, "Fixture directory");
    app.add_option("--samples", samples, "Dataset size");
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path dir = out_dir;
        fs::create_directories(dir);
        Rng rng(seed);

        std::vector<Item> items;
        for (std::size_t n = 0; n < samples; ++n) {
            Item it;
            it.id = eor::default_sample_id(n);
            it.place = make_name(rng, 3);
            std::string form = kQuestionForms[n % kQuestionForms.size()];
            it.question = form.replace(form.find("{}"), 2, it.place + " " + std::to_string(n));
            it.gold = make_name(rng, 2) + " " + make_name(rng, 2);
            for (int d = 0; d < 4; ++d) it.distractors.push_back(make_name(rng, 2) + " " + make_name(rng, 3));
            items.push_back(std::move(it));
        }

        std::vector<json> dataset, search, wiki;
        for (const auto& it : items) {
            const auto surname = it.gold.substr(it.gold.find(' ') + 1);
            dataset.push_back({{"id", it.id}, {"question", it.question}, {"answers", {it.gold, surname}}});
            json pages = json::array();
            for (int p = 0; p < 5; ++p) {
                pages.push_back({{"text", page(rng, it, 220, p == 0 ? 0.55 : 0.3, 0.6)}});
            }
            search.push_back({{"query_id", it.id}, {"chunks", pages}});
            json passages = json::array();
            for (int p = 0; p < 10; ++p) {
                passages.push_back({{"text", page(rng, it, 60, 0.12, 0.3)}, {"score", 1.0 - 0.05 * p}});
            }
            wiki.push_back({{"query_id", it.id}, {"chunks", passages}});
        }
        write_jsonl(dir / "dataset.jsonl", dataset);
        write_jsonl(dir / "search.jsonl", search);
        write_jsonl(dir / "wiki.jsonl", wiki);
        fs::remove(dir / "reader_cache.jsonl");
        fs::remove(dir / "scorer_cache.jsonl");

        const json manifest = {
            {"dataset", "dataset.jsonl"},
            {"retrievers", {"ReFree", "Wiki@10", "SE@RR@5&Wiki@5", "SE@1@CP"}},
            {"reader", {{"model_id", "synthetic-reader"}, {"family", "chat-instruct-15-words"}, {"max_tokens", 64}}},
            {"mode", "replay"},
            {"seed", 2024},
            {"output_dir", "out"},
            {"workers", 4},
            {"sources", {{"search", "search.jsonl"}, {"wiki", "wiki.jsonl"}}},
            {"caches", {{"reader", "reader_cache.jsonl"}, {"scorer", "scorer_cache.jsonl"}}},
            {"grader", {{"metric", "em"}, {"threshold", 0.8}}},
            {"voter", {{"metrics", {"em", "token_f1"}}, {"pooling", "mean"}}},
            {"training", {{"max_iterations", 2000}, {"restarts", 5}, {"threshold", 0.1}}},
            {"analysis", {{"max_answer_tokens", 5}}},
        };
        {
            std::ofstream out(dir / "manifest.json", std::ios::trunc);
            out << manifest.dump(2) << '\n';
        }

        setenv("EOR_READER_URL", "synthetic://reader", 1);
        setenv("EOR_SCORER_URL", "synthetic://scorer", 1);
        auto m = eor::RunManifest::load(dir / "manifest.json");
        m.mode = eor::Mode::Record;
        m.workers = 1;
        const fs::path scratch = fs::temp_directory_path() / "eor_demo_record";
        fs::remove_all(scratch);
        m.output_dir = scratch;

        eor::AppContext ctx;
        ctx.transport = std::make_shared<SyntheticServices>(items);
        const auto summary = eor::run_pipeline(m, ctx);
        if (!summary.failures.empty()) {
            std::cerr << "record run had " << summary.failures.size() << " failures, first: "
                      << summary.failures.front().error << '\n';
            return EXIT_FAILURE;
        }
        const auto ens = [&] {
            eor::train_step(m, ctx);
            return eor::ensemble_step(m, ctx);
        }();
        std::cout << "recorded " << summary.completed << " pairs with " << summary.network_calls
                  << " service calls; ensemble accuracy " << ens.accuracy << " vs best single "
                  << ens.best_single << " " << ens.best_single_accuracy << '\n';
        fs::remove_all(scratch);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
