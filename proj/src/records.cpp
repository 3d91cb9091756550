#include "eor/records.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace eor {

std::string default_sample_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "q%06zu", index);
    return buf;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path.string());
    Dataset ds;
    ds.name = path.stem().string();
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(where + "invalid JSON: " + e.what());
        }
        if (!record.is_object()) throw Error(where + "record must be a JSON object");
        if (!record.contains("question") || !record["question"].is_string() ||
            record["question"].get<std::string>().empty()) {
            throw Error(where + "missing non-empty string field 'question'");
        }
        if (!record.contains("answers") || !record["answers"].is_array() || record["answers"].empty()) {
            throw Error(where + "missing non-empty array field 'answers'");
        }
        std::vector<std::string> aliases;
        for (const auto& a : record["answers"]) {
            if (!a.is_string()) throw Error(where + "answers must be strings");
            aliases.push_back(a.get<std::string>());
        }
        std::string id = default_sample_id(index);
        if (record.contains("id")) {
            if (!record["id"].is_string()) throw Error(where + "'id' must be a string");
            id = record["id"].get<std::string>();
        }
        if (!ids.insert(id).second) throw Error(where + "duplicate sample id '" + id + "'");
        ds.samples.push_back(Sample{Query(id, record["question"].get<std::string>()),
                                    GoldAnswerSet(std::move(aliases))});
        ++index;
    }
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& s : dataset.samples) {
        out << json{{"id", s.query.id}, {"question", s.query.text}, {"answers", s.gold.aliases()}}.dump()
            << '\n';
    }
}

json to_json(const RunRecord& r) {
    json j = {
        {"sample_id", r.sample_id},
        {"retriever", r.retriever},
        {"document_text", r.document_text},
        {"answer", r.answer},
        {"indicators",
         {{"answer_correct", r.indicators.answer_correct},
          {"retriever_error", r.indicators.retriever_error},
          {"hallucination_error", r.indicators.hallucination_error},
          {"extraction_error", r.indicators.extraction_error},
          {"lucky_guess", r.indicators.lucky_guess}}},
    };
    if (r.empty_document) j["empty_document"] = true;
    if (r.error) j["error"] = *r.error;
    return j;
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.retriever = j.at("retriever").get<std::string>();
    r.document_text = j.value("document_text", "");
    r.answer = j.value("answer", "");
    if (j.contains("indicators")) {
        const auto& ind = j["indicators"];
        r.indicators.answer_correct = ind.value("answer_correct", 0);
        r.indicators.retriever_error = ind.value("retriever_error", 0);
        r.indicators.hallucination_error = ind.value("hallucination_error", 0);
        r.indicators.extraction_error = ind.value("extraction_error", 0);
        r.indicators.lucky_guess = ind.value("lucky_guess", 0);
    }
    r.empty_document = j.value("empty_document", false);
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    return r;
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open run records " + path.string());
    std::vector<RunRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(run_record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

namespace {

void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records,
                   std::ios::openmode mode) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& r : records) {
        // One write per record so each line lands whole.
        const std::string line = to_json(r).dump() + "\n";
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
    }
    out.flush();
}

}  // namespace

void write_run_records(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    write_records(path, records, std::ios::trunc);
}

void append_run_records(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    write_records(path, records, std::ios::app);
}

bool SemanticGrader::correct(const std::string& answer, const GoldAnswerSet& gold) {
    double best = 0.0;
    for (const auto& alias : gold.aliases()) {
        best = std::max(best, client_->score(metric_id_, answer, alias));
    }
    return best >= threshold_;
}

Indicators compute_record_indicators(const std::string& document_text, const std::string& answer,
                                     const GoldAnswerSet& gold, Grader& grader) {
    Indicators ind;
    ind.answer_correct = grader.correct(answer, gold) ? 1 : 0;
    ind.retriever_error = contains_answer(document_text, gold.aliases()) ? 0 : 1;
    const std::vector<std::string> own{answer};
    ind.hallucination_error = contains_answer(document_text, own) ? 0 : 1;
    ind.extraction_error =
        (1 - ind.retriever_error) * (1 - ind.hallucination_error) * (1 - ind.answer_correct);
    ind.lucky_guess = ind.retriever_error * ind.hallucination_error * ind.answer_correct;
    return ind;
}

RunTable::RunTable(const Dataset& dataset, std::vector<std::string> retrievers,
                   const std::vector<RunRecord>& records)
    : retrievers_(std::move(retrievers)) {
    if (dataset.samples.empty()) throw Error("run table needs at least one sample");
    if (retrievers_.empty()) throw Error("run table needs at least one retriever");
    std::map<std::pair<std::string, std::string>, const RunRecord*> index;
    for (const auto& r : records) index[{r.sample_id, r.retriever}] = &r;

    for (const auto& s : dataset.samples) {
        sample_ids_.push_back(s.query.id);
        gold_.push_back(s.gold);
        for (const auto& name : retrievers_) {
            auto it = index.find({s.query.id, name});
            if (it == index.end()) {
                throw Error("missing run record for sample " + s.query.id + ", retriever " + name);
            }
            if (it->second->error) {
                throw Error("run record for sample " + s.query.id + ", retriever " + name +
                            " failed: " + *it->second->error);
            }
            cells_.push_back(*it->second);
        }
    }
}

RunTable RunTable::select_samples(const std::vector<std::size_t>& rows) const {
    RunTable out;
    out.retrievers_ = retrievers_;
    for (auto row : rows) {
        out.sample_ids_.push_back(sample_ids_.at(row));
        out.gold_.push_back(gold_.at(row));
        for (std::size_t m = 0; m < retrievers_.size(); ++m) out.cells_.push_back(at(row, m));
    }
    return out;
}

std::vector<std::string> retrievers_in_records(const std::vector<RunRecord>& records) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (seen.insert(r.retriever).second) out.push_back(r.retriever);
    }
    return out;
}

}  // namespace eor
