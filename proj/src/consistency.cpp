#include "eor/consistency.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

namespace eor {

ErrorIndicators::ErrorIndicators(std::vector<std::string> sample_ids, std::vector<std::string> retrievers,
                                 std::vector<Indicators> cells)
    : sample_ids_(std::move(sample_ids)), retrievers_(std::move(retrievers)), cells_(std::move(cells)) {
    if (cells_.size() != sample_ids_.size() * retrievers_.size()) {
        throw Error("indicator grid size does not match its id lists");
    }
}

IndicatorMatrix ErrorIndicators::correctness() const {
    std::vector<std::uint8_t> values;
    values.reserve(cells_.size());
    for (const auto& c : cells_) values.push_back(static_cast<std::uint8_t>(c.answer_correct));
    return IndicatorMatrix(sample_ids_, retrievers_, std::move(values));
}

ErrorIndicators compute_indicators(const RunTable& table, Grader& grader) {
    std::vector<Indicators> cells;
    cells.reserve(table.samples() * table.retrievers());
    for (std::size_t n = 0; n < table.samples(); ++n) {
        for (std::size_t m = 0; m < table.retrievers(); ++m) {
            const auto& r = table.at(n, m);
            cells.push_back(compute_record_indicators(r.document_text, r.answer, table.gold(n), grader));
        }
    }
    return ErrorIndicators(table.sample_ids(), table.retriever_names(), std::move(cells));
}

ErrorIndicators stored_indicators(const RunTable& table) {
    std::vector<Indicators> cells;
    for (std::size_t n = 0; n < table.samples(); ++n) {
        for (std::size_t m = 0; m < table.retrievers(); ++m) cells.push_back(table.at(n, m).indicators);
    }
    return ErrorIndicators(table.sample_ids(), table.retriever_names(), std::move(cells));
}

RunTable length_filter(const RunTable& table, std::size_t max_tokens) {
    std::vector<std::size_t> keep;
    for (std::size_t n = 0; n < table.samples(); ++n) {
        bool ok = true;
        for (std::size_t m = 0; m < table.retrievers() && ok; ++m) {
            ok = token_count(table.at(n, m).answer) <= max_tokens;
        }
        if (ok) keep.push_back(n);
    }
    return table.select_samples(keep);
}

RatioCell rwr(std::span<const std::uint8_t> correct_i, std::span<const std::uint8_t> correct_j) {
    if (correct_i.size() != correct_j.size()) throw Error("rwr needs equal-length indicator vectors");
    long long num = 0;
    long long den = 0;
    for (std::size_t n = 0; n < correct_i.size(); ++n) {
        const int fail_j = 1 - correct_j[n];
        num += correct_i[n] * fail_j;
        den += fail_j;
    }
    if (den == 0) return {};
    return {static_cast<double>(num) / static_cast<double>(den)};
}

std::vector<RatioCell> rwr_matrix(const IndicatorMatrix& correctness) {
    const std::size_t m_count = correctness.cols();
    std::vector<std::vector<std::uint8_t>> cols;
    for (std::size_t m = 0; m < m_count; ++m) cols.push_back(correctness.column(m));
    std::vector<RatioCell> out(m_count * m_count);
    for (std::size_t i = 0; i < m_count; ++i) {
        for (std::size_t j = 0; j < m_count; ++j) out[i * m_count + j] = rwr(cols[i], cols[j]);
    }
    return out;
}

namespace {

RatioCell mean_defined(const std::vector<RatioCell>& cells) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& c : cells) {
        if (c.defined()) {
            total += *c.value;
            ++count;
        }
    }
    if (count == 0) return {};
    return {total / static_cast<double>(count)};
}

std::vector<RatioCell> row_or_column_means(const IndicatorMatrix& correctness, bool rows) {
    const std::size_t m_count = correctness.cols();
    if (m_count < 2) throw Error("MRWR/MRLR need at least two retrievers");
    const auto matrix = rwr_matrix(correctness);
    std::vector<RatioCell> out;
    for (std::size_t i = 0; i < m_count; ++i) {
        std::vector<RatioCell> cells;
        for (std::size_t j = 0; j < m_count; ++j) {
            if (j == i) continue;
            cells.push_back(rows ? matrix[i * m_count + j] : matrix[j * m_count + i]);
        }
        out.push_back(mean_defined(cells));
    }
    return out;
}

}  // namespace

std::vector<RatioCell> mrwr(const IndicatorMatrix& correctness) {
    return row_or_column_means(correctness, true);
}

std::vector<RatioCell> mrlr(const IndicatorMatrix& correctness) {
    return row_or_column_means(correctness, false);
}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Retriever: return "retriever_error";
        case ErrorKind::Hallucination: return "hallucination_error";
        case ErrorKind::Extraction: return "extraction_error";
        case ErrorKind::LuckyGuess: return "lucky_guess";
    }
    return "retriever_error";
}

ErrorKind error_kind_from_string(std::string_view name) {
    for (auto k : {ErrorKind::Retriever, ErrorKind::Hallucination, ErrorKind::Extraction,
                   ErrorKind::LuckyGuess}) {
        if (name == to_string(k)) return k;
    }
    throw Error("unknown error kind '" + std::string(name) + "'");
}

namespace {

int occurs(ErrorKind kind, const Indicators& ind) {
    switch (kind) {
        case ErrorKind::Retriever: return ind.retriever_error;
        case ErrorKind::Hallucination: return ind.hallucination_error;
        case ErrorKind::Extraction: return ind.extraction_error;
        case ErrorKind::LuckyGuess: return ind.lucky_guess;
    }
    return 0;
}

int mask(ErrorKind kind, const Indicators& a, const Indicators& b) {
    switch (kind) {
        case ErrorKind::Retriever:
        case ErrorKind::Hallucination:
            return 1;
        case ErrorKind::Extraction:
            return (1 - a.retriever_error) * (1 - b.retriever_error);
        case ErrorKind::LuckyGuess:
            return a.retriever_error * a.hallucination_error * b.retriever_error * b.hallucination_error;
    }
    return 0;
}

}  // namespace

RatioCell error_rwr(ErrorKind kind, const ErrorIndicators& indicators, std::size_t i, std::size_t j) {
    if (i >= indicators.retrievers() || j >= indicators.retrievers()) {
        throw Error("error_rwr retriever index out of range");
    }
    long long num = 0;
    long long den = 0;
    for (std::size_t n = 0; n < indicators.samples(); ++n) {
        const auto& a = indicators.at(n, i);
        const auto& b = indicators.at(n, j);
        const int w = mask(kind, a, b);
        const int ej = occurs(kind, b);
        num += (1 - occurs(kind, a)) * ej * w;
        den += ej * w;
    }
    if (den == 0) return {};
    return {static_cast<double>(num) / static_cast<double>(den)};
}

std::vector<RatioCell> error_rwr_matrix(ErrorKind kind, const ErrorIndicators& indicators) {
    const std::size_t m_count = indicators.retrievers();
    std::vector<RatioCell> out(m_count * m_count);
    for (std::size_t i = 0; i < m_count; ++i) {
        for (std::size_t j = 0; j < m_count; ++j) out[i * m_count + j] = error_rwr(kind, indicators, i, j);
    }
    return out;
}

double ensemble_upper_bound(const IndicatorMatrix& correctness, std::span<const std::size_t> subset) {
    if (subset.empty()) throw Error("upper bound needs a non-empty retriever subset");
    if (correctness.rows() == 0) throw Error("upper bound needs at least one sample");
    for (auto m : subset) {
        if (m >= correctness.cols()) throw Error("upper bound subset index out of range");
    }
    std::size_t hits = 0;
    for (std::size_t n = 0; n < correctness.rows(); ++n) {
        for (auto m : subset) {
            if (correctness.at(n, m)) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(correctness.rows());
}

std::vector<UpperBoundDistribution> upper_bound_by_size(const IndicatorMatrix& correctness,
                                                        std::size_t samples_per_size, std::uint64_t seed) {
    const std::size_t m_count = correctness.cols();
    std::vector<UpperBoundDistribution> out(m_count);
    for (std::size_t s = 0; s < m_count; ++s) out[s].subset_size = s + 1;

    if (m_count <= kMaxExhaustivePool) {
        for (std::uint32_t bits = 1; bits < (1u << m_count); ++bits) {
            std::vector<std::size_t> subset;
            for (std::size_t m = 0; m < m_count; ++m) {
                if (bits & (1u << m)) subset.push_back(m);
            }
            out[subset.size() - 1].values.push_back(ensemble_upper_bound(correctness, subset));
        }
        return out;
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(m_count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t s = 1; s <= m_count; ++s) {
        out[s - 1].sampled = true;
        for (std::size_t t = 0; t < samples_per_size; ++t) {
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s));
            std::sort(subset.begin(), subset.end());
            out[s - 1].values.push_back(ensemble_upper_bound(correctness, subset));
        }
    }
    return out;
}

std::string format_ratio(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

void write_heatmap_csv(std::ostream& out, const std::vector<std::string>& names,
                       const std::vector<RatioCell>& cells) {
    const std::size_t m_count = names.size();
    if (cells.size() != m_count * m_count) throw Error("heatmap cell count does not match the names");
    out << "retriever";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < m_count; ++i) {
        out << names[i];
        for (std::size_t j = 0; j < m_count; ++j) {
            const auto& c = cells[i * m_count + j];
            out << ',' << (c.defined() ? format_ratio(*c.value) : std::string("-1"));
        }
        out << '\n';
    }
}

}  // namespace eor
