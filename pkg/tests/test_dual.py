import json
import math

import numpy as np
import pytest

from aoibuf.aoi import enumerate_states
from aoibuf.dual import (
    DualConfig, DualEvaluator, dual_ascent, dual_function, golden_section_lambda,
    lambda_upper_bound, make_sensor_problem,
)
from aoibuf.source import build_error_table, reference_model


@pytest.fixture(scope="module")
def pair_b1():
    m = reference_model(0.6)
    sp = make_sensor_problem(m, 1, 40)
    return [sp, sp]


@pytest.fixture(scope="module")
def hetero_b2():
    states = enumerate_states(2, 25)
    m = reference_model(1.0)
    errs = build_error_table(m, states)
    return [
        make_sensor_problem(m, 2, success_prob=p, states=states, errs=errs)
        for p in (0.5, 0.7, 0.9)
    ]


def test_budget_covers_single_sensor():
    sp = make_sensor_problem(reference_model(0.8), 2, 30)
    val, g = dual_function(0.0, [sp], 1, 0.95)
    assert g <= 0
    rep = dual_ascent([sp], 1, 0.95)
    assert rep.lambda_star == 0.0
    assert rep.stop_reason == "zero_multiplier"
    assert rep.final_usage <= rep.budget


def test_useless_channel():
    m = reference_model(0.8)
    sp = make_sensor_problem(m, 1, 20, success_prob=0.0)
    rep = dual_ascent([sp, sp, sp], 1, 0.9)
    assert rep.lambda_star == 0.0
    for q in rep.q_tables:
        np.testing.assert_allclose(q.gains, 0.0, atol=1e-12)


def test_prohibitive_price(hetero_b2):
    lam = lambda_upper_bound(hetero_b2, 0.9) * 1.01
    _, g = dual_function(lam, hetero_b2, 1, 0.9)
    assert g == pytest.approx(-1 / (1 - 0.9))


def test_subgradient_is_nonincreasing(hetero_b2):
    ev = DualEvaluator(hetero_b2, 1, 0.9)
    gs = [ev(lam)[1] for lam in np.linspace(0, 4, 25)]
    assert all(b <= a + 1e-8 for a, b in zip(gs, gs[1:]))


def test_dual_is_concave(hetero_b2):
    ev = DualEvaluator(hetero_b2, 2, 0.9)
    grid = np.linspace(0, 3, 20)
    q = np.array([ev(x)[0] for x in grid])
    mids = np.array([ev(0.5 * (a + b))[0] for a, b in zip(grid, grid[2:])])
    assert np.all(mids >= 0.5 * (q[:-2] + q[2:]) - 1e-7)


def test_subgradient_is_a_supergradient(hetero_b2):
    ev = DualEvaluator(hetero_b2, 1, 0.9)
    grid = np.linspace(0, 3, 9)
    vals = {x: ev(x) for x in grid}
    for x, (qx, gx) in vals.items():
        for y, (qy, _) in vals.items():
            assert qy <= qx + gx * (y - x) + 1e-6


def test_ascent_matches_golden_section(hetero_b2):
    rep = dual_ascent(hetero_b2, 1, 0.9, DualConfig(max_iter=400))
    ref = golden_section_lambda(hetero_b2, 1, 0.9)
    assert rep.lambda_star > 0
    assert abs(rep.lambda_star - ref) <= 1e-3
    assert all(lam >= 0 for _, lam, _ in rep.iterates)


def test_lambda_star_is_a_dual_maximizer(pair_b1):
    rep = dual_ascent(pair_b1, 1, 0.95)
    ev = DualEvaluator(pair_b1, 1, 0.95)
    if rep.lambda_star > 0:
        # complementary slackness in subdifferential form: the subgradient
        # changes sign across lambda*
        eps = 1e-3
        assert ev(rep.lambda_star - eps)[1] >= -1e-9
        assert ev(rep.lambda_star + eps)[1] <= 1e-9
    else:
        assert ev(0.0)[1] <= 0


def test_termination_contract(pair_b1):
    cfg = DualConfig(max_iter=7)
    rep = dual_ascent(pair_b1, 1, 0.95, cfg)
    k, lam, g = rep.iterates[-1]
    tol = cfg.tolerance(1, 0.95)
    if rep.stop_reason == "residual":
        assert abs(g) <= tol and rep.lambda_star == lam
    elif rep.stop_reason == "zero_multiplier":
        assert lam == 0 and g <= 0
    else:
        assert k == 7
        ev = DualEvaluator(pair_b1, 1, 0.95)
        assert ev(rep.lambda_star)[0] == pytest.approx(max(ev(x)[0] for _, x, _ in rep.iterates))


def test_residual_stop():
    # a large tolerance makes the very first iterate acceptable
    sp = make_sensor_problem(reference_model(0.8), 1, 20)
    rep = dual_ascent([sp, sp, sp], 1, 0.9, DualConfig(residual_tol=1e6))
    assert rep.stop_reason == "residual" and len(rep.iterates) == 1


def test_q_tables_solved_at_lambda_star(pair_b1):
    rep = dual_ascent(pair_b1, 1, 0.95, DualConfig(max_iter=20))
    assert all(q.consistent_with.lam == rep.lambda_star for q in rep.q_tables)


def test_report_json(tmp_path, pair_b1):
    rep = dual_ascent(pair_b1, 1, 0.95, DualConfig(max_iter=5))
    path = tmp_path / "r.json"
    rep.write(path)
    data = json.loads(path.read_text())
    assert {"lambda_star", "budget", "final_usage", "iterates"} <= set(data)
    assert data["budget"] == pytest.approx(20.0)
    assert all(len(row) == 3 for row in data["iterates"])
    assert data["iterates"][0][0] == 1


def test_config_validation():
    with pytest.raises(ValueError):
        DualConfig(beta=0)
    with pytest.raises(ValueError):
        DualConfig(max_iter=0)
    assert DualConfig().tolerance(2, 0.99) == pytest.approx(0.2)


def test_non_finite_subgradient_aborts(pair_b1):
    class Broken(DualEvaluator):
        def __call__(self, lam):
            return math.nan, math.nan

    with pytest.raises(FloatingPointError, match="iterates"):
        dual_ascent(pair_b1, 1, 0.95, evaluator=Broken(pair_b1, 1, 0.95))
