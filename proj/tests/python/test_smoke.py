import math

import pytest

import eor


def test_parse_plan_shape():
    plan = eor.parse_plan("SE@RR@5&Wiki@5@CP")
    assert plan["op"] == "compress"
    concat = plan["children"][0]
    assert concat["op"] == "concat"
    assert concat["children"][0]["k"] == 5
    assert eor.describe_plan("Wiki@10") == "Truncate(Source(Wiki),10)"
    assert eor.format_plan("SE@RR@5&Wiki@5@CP") == "SE@RR@5&Wiki@5@CP"
    assert len(eor.reference_retriever_pool()) == 16


def test_parse_error_offset():
    with pytest.raises(eor.ParseError) as info:
        eor.parse_plan("SE@0")
    assert info.value.args[1] == 3


def test_answer_helpers():
    assert eor.normalize_answer("The  Paris!") == "paris"
    assert eor.em_similarity("Paris.", "paris") == 1.0
    assert eor.token_f1("x x y", "x") == pytest.approx(0.5)
    assert eor.contains_answer("It is in Paris, France", ["paris"])


def test_render_prompt():
    text = eor.render_prompt("refree", "chat-instruct-15-words", "Who wrote Hamlet?")
    assert "Who wrote Hamlet?" in text
    rag = eor.render_prompt("rag", "chat-instruct-few-words", "Who wrote Hamlet?", "Shakespeare wrote it.")
    assert "Shakespeare wrote it." in rag


def test_vote():
    r = eor.vote(["A", "A", "B"], [1.0, 0.0], [0.3, 0.3, 0.3])
    assert r["winner"] == 0
    assert r["scores"][2] < r["scores"][0]
    with pytest.raises(ValueError):
        eor.vote(["A"], [1.0, 0.0], [0.05])


def test_consistency():
    assert eor.rwr([1, 0, 1, 0], [0, 1, 1, 0]) == pytest.approx(0.5)
    assert eor.rwr([1, 1], [1, 1]) is None
    rows = [[1, 0, 1], [0, 1, 1], [1, 1, 1], [0, 0, 1]]
    assert eor.mrwr(rows)[0] == pytest.approx(0.5)
    assert eor.ensemble_upper_bound(rows, [0, 1]) == pytest.approx(0.75)


def test_simulator():
    params = {"eps_r": 0.5, "eps_h_correct": 0.2, "eps_e": 0.1, "eps_h_wrong": 0.2, "eps_luck": 0.3}
    assert eor.analytic_failure(params) == pytest.approx(0.62)
    a = eor.simulate(params, 100000, 2024)
    b = eor.simulate(params, 100000, 2024)
    assert a == b
    rate = a["failure_count"] / a["n_trials"]
    assert abs(rate - 0.62) <= 3 * math.sqrt(0.62 * 0.38 / 100000)


def test_nelder_mead():
    r = eor.nelder_mead(lambda x: -sum((v - 0.3) ** 2 for v in x), [0.0, 0.5], f_tolerance=1e-14,
                        x_tolerance=1e-8)
    assert all(abs(v - 0.3) < 1e-6 for v in r["x"])


def test_generate_world_and_train():
    spec = {"count": 3, "params": {"eps_r": 0.3}}
    world = eor.generate_world(spec, 200, 7)
    assert world == eor.generate_world(spec, 200, 7)
    assert len(world["records"]) == 600
    m = len(world["retrievers"])
    answers = [[world["records"][n * m + i]["answer"] for i in range(m)] for n in range(200)]
    g = [[float(world["records"][n * m + i]["indicators"]["answer_correct"]) for i in range(m)] for n in range(200)]
    report = eor.train(answers, g, restarts=2, seed=3)
    assert report["objective"] >= report["initial_objective"]
    assert len(report["omega_r"]) == m
