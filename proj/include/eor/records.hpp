#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eor/domain.hpp"
#include "eor/scorer.hpp"
#include "eor/transport.hpp"

namespace eor {

struct Sample {
    Query query;
    GoldAnswerSet gold;
};

struct Dataset {
    std::string name;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
};

/// Sample id used when a dataset line carries no "id": zero-based line
/// index, zero-padded to six digits and prefixed with 'q'.
std::string default_sample_id(std::size_t index);

/// Reads JSON Lines {question, answers[, id]}; malformed lines raise an
/// Error naming the line number.
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

struct Indicators {
    int answer_correct = 0;
    int retriever_error = 0;
    int hallucination_error = 0;
    int extraction_error = 0;
    int lucky_guess = 0;

    bool operator==(const Indicators&) const = default;
};

struct RunRecord {
    std::string sample_id;
    std::string retriever;
    std::string document_text;
    std::string answer;
    Indicators indicators;
    bool empty_document = false;
    std::optional<std::string> error;

    bool operator==(const RunRecord&) const = default;
};

json to_json(const RunRecord& record);
RunRecord run_record_from_json(const json& j);

std::vector<RunRecord> load_run_records(const std::filesystem::path& path);
void write_run_records(const std::filesystem::path& path, const std::vector<RunRecord>& records);
void append_run_records(const std::filesystem::path& path, const std::vector<RunRecord>& records);

/// Decides answer correctness against the gold aliases.
class Grader {
public:
    virtual ~Grader() = default;
    virtual bool correct(const std::string& answer, const GoldAnswerSet& gold) = 0;
};

class ExactMatchGrader : public Grader {
public:
    bool correct(const std::string& answer, const GoldAnswerSet& gold) override {
        return exact_match_any(answer, gold.aliases());
    }
};

/// External semantic grader (e.g. BEM): correct when the best alias score
/// reaches the threshold.
class SemanticGrader : public Grader {
public:
    SemanticGrader(std::shared_ptr<ScorerClient> client, std::string metric_id = "bem",
                   double threshold = 0.8)
        : client_(std::move(client)), metric_id_(std::move(metric_id)), threshold_(threshold) {}

    bool correct(const std::string& answer, const GoldAnswerSet& gold) override;

private:
    std::shared_ptr<ScorerClient> client_;
    std::string metric_id_;
    double threshold_;
};

/// Indicators of one (document, answer) pair: correctness from the grader,
/// retriever error when the document lacks every gold alias, hallucination
/// when the document lacks the answer, and the two product indicators.
Indicators compute_record_indicators(const std::string& document_text, const std::string& answer,
                                     const GoldAnswerSet& gold, Grader& grader);

/// Dense samples x retrievers view of a run.
class RunTable {
public:
    /// Every (sample, retriever) pair must have exactly one record without
    /// an error.
    RunTable(const Dataset& dataset, std::vector<std::string> retrievers,
             const std::vector<RunRecord>& records);

    std::size_t samples() const { return sample_ids_.size(); }
    std::size_t retrievers() const { return retrievers_.size(); }

    const RunRecord& at(std::size_t sample, std::size_t retriever) const {
        return cells_[sample * retrievers_.size() + retriever];
    }
    const GoldAnswerSet& gold(std::size_t sample) const { return gold_[sample]; }
    const std::vector<std::string>& sample_ids() const { return sample_ids_; }
    const std::vector<std::string>& retriever_names() const { return retrievers_; }

    /// Keeps only the listed samples, preserving order.
    RunTable select_samples(const std::vector<std::size_t>& rows) const;

private:
    RunTable() = default;

    std::vector<std::string> sample_ids_;
    std::vector<std::string> retrievers_;
    std::vector<GoldAnswerSet> gold_;
    std::vector<RunRecord> cells_;
};

/// Retriever names in first-appearance order.
std::vector<std::string> retrievers_in_records(const std::vector<RunRecord>& records);

}  // namespace eor
