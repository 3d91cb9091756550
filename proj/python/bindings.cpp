#include <optional>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eor/consistency.hpp"
#include "eor/dsl.hpp"
#include "eor/reader.hpp"
#include "eor/simulator.hpp"
#include "eor/similarity.hpp"
#include "eor/trainer.hpp"

namespace py = pybind11;
using namespace eor;

namespace {

py::object to_py(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict plan_dict(const RetrievalPlan& p) {
    static const char* ops[] = {"source", "rerank", "truncate", "concat", "compress"};
    py::dict d;
    d["op"] = ops[static_cast<int>(p.op)];
    if (p.op == RetrievalPlan::Op::Source) d["source"] = std::string(to_string(p.source));
    if (p.op == RetrievalPlan::Op::Truncate) d["k"] = p.k;
    py::list children;
    for (const auto& c : p.children) children.append(plan_dict(c));
    d["children"] = children;
    return d;
}

PromptKind prompt_kind(const std::string& name) {
    if (name == "refree") return PromptKind::ReFree;
    if (name == "rag") return PromptKind::Rag;
    if (name == "parametric") return PromptKind::Parametric;
    if (name == "compress") return PromptKind::Compress;
    throw Error("unknown prompt kind '" + name + "' (refree, rag, parametric, compress)");
}

IndicatorMatrix matrix(const std::vector<std::vector<int>>& rows) {
    if (rows.empty()) throw Error("indicator matrix needs at least one row");
    const std::size_t cols = rows.front().size();
    std::vector<std::string> row_ids, col_ids;
    std::vector<std::uint8_t> values;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        if (rows[n].size() != cols) throw Error("ragged indicator matrix");
        row_ids.push_back(std::to_string(n));
        for (int v : rows[n]) {
            if (v != 0 && v != 1) throw Error("indicators must be 0 or 1");
            values.push_back(static_cast<std::uint8_t>(v));
        }
    }
    for (std::size_t m = 0; m < cols; ++m) col_ids.push_back(std::to_string(m));
    return IndicatorMatrix(row_ids, col_ids, values);
}

std::vector<std::optional<double>> cells(const std::vector<RatioCell>& v) {
    std::vector<std::optional<double>> out;
    for (const auto& c : v) out.push_back(c.value);
    return out;
}

std::vector<std::vector<std::optional<double>>> square(const std::vector<RatioCell>& v, std::size_t m) {
    std::vector<std::vector<std::optional<double>>> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[i].push_back(v[i * m + j].value);
    }
    return out;
}

ErrorIndicators indicators_from(const std::vector<std::vector<py::dict>>& rows) {
    std::vector<std::string> ids, names;
    std::vector<Indicators> cs;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        ids.push_back(std::to_string(n));
        for (const auto& d : rows[n]) {
            Indicators ind;
            ind.answer_correct = d.contains("answer_correct") ? d["answer_correct"].cast<int>() : 0;
            ind.retriever_error = d.contains("retriever_error") ? d["retriever_error"].cast<int>() : 0;
            ind.hallucination_error = d.contains("hallucination_error") ? d["hallucination_error"].cast<int>() : 0;
            ind.extraction_error = d.contains("extraction_error") ? d["extraction_error"].cast<int>() : 0;
            ind.lucky_guess = d.contains("lucky_guess") ? d["lucky_guess"].cast<int>() : 0;
            cs.push_back(ind);
        }
    }
    const std::size_t m = rows.empty() ? 0 : rows.front().size();
    for (std::size_t i = 0; i < m; ++i) names.push_back(std::to_string(i));
    return ErrorIndicators(ids, names, cs);
}

std::vector<std::unique_ptr<SimilarityMetric>> builtin_metrics(const std::vector<std::string>& ids) {
    std::vector<std::unique_ptr<SimilarityMetric>> out;
    for (const auto& id : ids) {
        if (id != "em" && id != "token_f1") throw Error("only the built-in metrics em and token_f1 are exposed");
        out.push_back(make_metric(id));
    }
    return out;
}

SearchConfig search_config(int max_iterations, double f_tol, double x_tol, int restarts, std::uint64_t seed,
                           double threshold, double lower, double upper) {
    SearchConfig c;
    c.max_iterations = max_iterations;
    c.f_tolerance = f_tol;
    c.x_tolerance = x_tol;
    c.restarts = restarts;
    c.seed = seed;
    c.threshold = threshold;
    c.lower = lower;
    c.upper = upper;
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "eor C++ core";

    static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ParseError& e) {
            py::object err = parse_error;
            PyErr_SetObject(err.ptr(), py::make_tuple(e.what(), e.offset()).ptr());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); });
    m.def("contains_answer", [](const std::string& text, const std::vector<std::string>& aliases) {
        return contains_answer(text, aliases);
    });
    m.def("em_similarity", [](const std::string& a, const std::string& b) { return em_similarity(a, b); });
    m.def("token_f1", [](const std::string& a, const std::string& b) { return token_f1(a, b); });

    m.def("parse_plan", [](const std::string& e) { return plan_dict(parse_plan(e)); });
    m.def("format_plan", [](const std::string& e) { return format_plan(parse_plan(e)); },
          "Canonical form of an expression");
    m.def("describe_plan", [](const std::string& e) { return describe_plan(parse_plan(e)); });
    m.def("reference_retriever_pool", [] { return reference_retriever_pool(); });

    m.def(
        "render_prompt",
        [](const std::string& kind, const std::string& family, const std::string& query, const std::string& doc) {
            return render_prompt(prompt_kind(kind), template_family_from_string(family), query, doc);
        },
        py::arg("kind"), py::arg("family"), py::arg("query"), py::arg("document") = "");

    m.def(
        "vote",
        [](const std::vector<std::string>& answers, const std::vector<double>& sim_weights,
           const std::vector<double>& retriever_weights, const std::vector<std::string>& metrics, double threshold,
           const std::string& pooling) {
            auto ms = builtin_metrics(metrics);
            std::vector<SimilarityMetric*> ptrs;
            for (auto& p : ms) ptrs.push_back(p.get());
            if (sim_weights.size() != ptrs.size()) throw Error("one similarity weight per metric");
            if (retriever_weights.size() != answers.size()) throw Error("one retriever weight per answer");
            std::vector<CandidateAnswer> cands;
            for (std::size_t i = 0; i < answers.size(); ++i) cands.emplace_back(static_cast<int>(i), answers[i]);
            const auto tensor = build_similarity_tensor(answers, ptrs);
            const auto r = voter_scores(cands, tensor, SimWeights{sim_weights},
                                        RetrieverWeights{retriever_weights, threshold}, pooling_from_string(pooling));
            py::dict d;
            d["winner"] = r.winner;
            d["scores"] = r.scores;
            d["excluded"] = r.excluded;
            return d;
        },
        py::arg("answers"), py::arg("sim_weights"), py::arg("retriever_weights"),
        py::arg("metrics") = std::vector<std::string>{"em", "token_f1"}, py::arg("threshold") = kDefaultRetrieverThreshold,
        py::arg("pooling") = "mean");

    m.def("rwr", [](const std::vector<std::uint8_t>& ci, const std::vector<std::uint8_t>& cj) {
        return rwr(ci, cj).value;
    });
    m.def("rwr_matrix", [](const std::vector<std::vector<int>>& rows) {
        const auto mat = matrix(rows);
        return square(rwr_matrix(mat), mat.cols());
    });
    m.def("mrwr", [](const std::vector<std::vector<int>>& rows) { return cells(mrwr(matrix(rows))); });
    m.def("mrlr", [](const std::vector<std::vector<int>>& rows) { return cells(mrlr(matrix(rows))); });
    m.def("error_rwr_matrix", [](const std::string& kind, const std::vector<std::vector<py::dict>>& rows) {
        const auto ind = indicators_from(rows);
        return square(error_rwr_matrix(error_kind_from_string(kind), ind), ind.retrievers());
    });
    m.def("ensemble_upper_bound", [](const std::vector<std::vector<int>>& rows, const std::vector<std::size_t>& subset) {
        return ensemble_upper_bound(matrix(rows), subset);
    });

    m.def("analytic_failure", [](const py::dict& params) {
        return analytic_failure(world_parameters_from_json(from_py(params)));
    });
    m.def(
        "simulate",
        [](const py::dict& params, std::uint64_t n, std::uint64_t seed) {
            const auto p = world_parameters_from_json(from_py(params));
            SimOutcome o;
            {
                py::gil_scoped_release release;
                o = simulate(p, n, seed);
            }
            return to_py(to_json(o));
        },
        py::arg("params"), py::arg("n_trials"), py::arg("seed") = 0);
    m.def(
        "verify_decomposition",
        [](const py::dict& params, std::uint64_t n, std::uint64_t seed) {
            const auto p = world_parameters_from_json(from_py(params));
            return to_py(to_json(verify_decomposition(p, n, seed)));
        },
        py::arg("params"), py::arg("n_trials"), py::arg("seed") = 0);
    m.def(
        "generate_world",
        [](const py::dict& spec, std::size_t samples, std::uint64_t seed) {
            const auto w = generate_world(samples, world_spec_from_json(from_py(spec)), seed);
            json records = json::array();
            for (const auto& r : w.records) records.push_back(to_json(r));
            json dataset = json::array();
            for (const auto& s : w.dataset.samples) {
                dataset.push_back({{"id", s.query.id}, {"question", s.query.text}, {"answers", s.gold.aliases()}});
            }
            return to_py(json{{"retrievers", w.retrievers}, {"dataset", dataset}, {"records", records}});
        },
        py::arg("spec"), py::arg("samples"), py::arg("seed") = 0);

    m.def(
        "nelder_mead",
        [](const std::function<double(std::vector<double>)>& f, const std::vector<double>& x0, int max_iterations,
           double f_tol, double x_tol, int restarts, std::uint64_t seed, double lower, double upper) {
            const auto config = search_config(max_iterations, f_tol, x_tol, restarts, seed, kDefaultRetrieverThreshold,
                                              lower, upper);
            const Objective obj = [&f](std::span<const double> x) {
                py::gil_scoped_acquire gil;
                return f(std::vector<double>(x.begin(), x.end()));
            };
            NelderMeadResult r;
            {
                py::gil_scoped_release release;
                r = nelder_mead(obj, x0, config);
            }
            py::dict d;
            d["x"] = r.x;
            d["value"] = r.value;
            d["iterations"] = r.iterations;
            d["evaluations"] = r.evaluations;
            d["converged"] = r.converged;
            d["best_restart"] = r.best_restart;
            return d;
        },
        py::arg("f"), py::arg("x0"), py::arg("max_iterations") = 2000, py::arg("f_tolerance") = 1e-6,
        py::arg("x_tolerance") = 1e-6, py::arg("restarts") = 1, py::arg("seed") = 0, py::arg("lower") = 0.0,
        py::arg("upper") = kWeightUpperBound);

    m.def(
        "train",
        [](const std::vector<std::vector<std::string>>& answers, const std::vector<std::vector<double>>& g,
           const std::vector<std::string>& metrics, int restarts, std::uint64_t seed, double threshold,
           const std::string& pooling) {
            auto ms = builtin_metrics(metrics);
            std::vector<SimilarityMetric*> ptrs;
            for (auto& p : ms) ptrs.push_back(p.get());
            const auto tensor = precompute(answers, g, ptrs);
            const auto config = search_config(2000, 1e-6, 1e-6, restarts, seed, threshold, 0.0, kWeightUpperBound);
            TrainReport r;
            {
                py::gil_scoped_release release;
                r = train(tensor, config, pooling_from_string(pooling));
            }
            auto d = to_py(to_json(r.weights));
            d["initial_objective"] = r.initial_objective;
            d["active"] = r.active;
            return d;
        },
        py::arg("answers"), py::arg("g"), py::arg("metrics") = std::vector<std::string>{"em", "token_f1"},
        py::arg("restarts") = 5, py::arg("seed") = 0, py::arg("threshold") = kDefaultRetrieverThreshold,
        py::arg("pooling") = "mean");
}
