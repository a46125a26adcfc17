import numpy as np
import pytest

from aoibuf.aoi import enumerate_states, is_valid
from aoibuf.dual import dual_ascent, make_sensor_problem
from aoibuf.scheduling import (
    ConfigurationError, PolicyKind, SimConfig, evaluate_policy_suite, mgf_select,
    simulate, write_results_csv,
)
from aoibuf.source import ArSourceModel, build_error_table, reference_model
from oracles import brute_force_selection


class TestMgfSelect:
    def test_examples(self):
        assert mgf_select([0.5, -0.2], 1).scheduled == {0}
        assert mgf_select([-0.1, -0.2], 2).scheduled == frozenset()
        assert mgf_select([0.5, 0.7, 0.7], 2, head_ages=[3, 2, 9]).scheduled == {2, 1}

    def test_index_tiebreak(self):
        assert mgf_select([1.0, 1.0, 1.0], 2, head_ages=[4, 4, 4]).scheduled == {0, 1}

    def test_zero_gain_is_eligible(self):
        assert mgf_select([0.0, -1.0], 1).scheduled == {0}

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            mgf_select([float("nan")], 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_exhaustive_search(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(100):
            N = int(rng.integers(1, 13))
            M = int(rng.integers(1, N + 1))
            gains = rng.normal(size=N)
            val, best = brute_force_selection(gains, M)
            got = mgf_select(gains, M).scheduled
            assert got == best
            assert sum(gains[n] for n in got) == pytest.approx(val)

    def test_integer_gains_with_ties(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            N = int(rng.integers(1, 10))
            M = int(rng.integers(1, N + 1))
            gains = rng.integers(-3, 4, size=N).astype(float)
            val, _ = brute_force_selection(gains, M)
            got = mgf_select(gains, M).scheduled
            assert len(got) <= M and all(gains[n] >= 0 for n in got)
            assert sum(gains[n] for n in got) == val


def _sim(models, policy, **kw):
    cfg = SimConfig(models, **kw)
    return cfg, simulate(cfg, policy)


def test_always_scheduled_perfect_channel():
    m = reference_model(1.0)
    cfg, res = _sim([m], PolicyKind.MAX_AGE_FIRST, b=2, horizon=500, replications=2, delta_max=20)
    err = build_error_table(m, enumerate_states(2, 20))[(1, 2)]
    assert res.avg_error == pytest.approx(err, abs=1e-12)
    assert res.sched_rates[0] == 1.0


def test_never_transmit_saturates():
    m = reference_model(0.5)
    D = 8
    cfg, res = _sim([m, m], PolicyKind.NEVER, b=2, horizon=300, replications=1, delta_max=D, warmup=D)
    err = build_error_table(m, enumerate_states(2, D))[(D, D)]
    assert res.avg_error == pytest.approx(err, abs=1e-12)
    assert res.max_scheduled == 0


def test_round_robin_alternates():
    m = ArSourceModel(1, (0.5,), 1.0, 1.0)
    cfg, res = _sim([m, m], PolicyKind.ROUND_ROBIN, b=1, horizon=1001, replications=1, delta_max=10, warmup=1)
    assert res.avg_error == pytest.approx((1.0 + 1.25) / 2, abs=1e-12)
    np.testing.assert_allclose(res.sched_rates, 0.5)


def test_visited_states_are_valid():
    m = reference_model(0.4)
    cfg, res = _sim([m, m, m], PolicyKind.RANDOM_M, M=2, b=3, horizon=3000, replications=2, delta_max=15)
    states = enumerate_states(3, 15)
    for n in range(3):
        for sid in np.flatnonzero(res.visits[n]):
            assert is_valid(states.states[sid], 15)
    assert res.max_scheduled <= 2
    assert res.sched_rates.sum() <= 2 + 1e-12


def test_reproducible_and_seed_sensitive():
    m = reference_model(0.6)
    a = _sim([m, m], PolicyKind.RANDOM_M, horizon=2000, replications=3, seed=5)[1]
    b = _sim([m, m], PolicyKind.RANDOM_M, horizon=2000, replications=3, seed=5)[1]
    c = _sim([m, m], PolicyKind.RANDOM_M, horizon=2000, replications=3, seed=6)[1]
    np.testing.assert_array_equal(a.per_replication, b.per_replication)
    assert a.discounted_error == b.discounted_error
    assert not np.array_equal(a.per_replication, c.per_replication)


def test_common_random_numbers():
    # with M >= N every scheduling policy transmits every sensor each slot, so
    # identical channel streams must give identical trajectories
    m = reference_model(0.5)
    cfg = SimConfig([m, m], M=2, b=2, horizon=3000, replications=2, seed=4, delta_max=30)
    res = evaluate_policy_suite(cfg, [PolicyKind.MAX_AGE_FIRST, PolicyKind.ROUND_ROBIN, PolicyKind.RANDOM_M])
    for r in res[1:]:
        np.testing.assert_array_equal(r.per_replication, res[0].per_replication)


def test_random_beats_never():
    m = reference_model(0.7)
    cfg = SimConfig([m, m], b=1, horizon=5000, replications=3, seed=1)
    never, rand = evaluate_policy_suite(cfg, [PolicyKind.NEVER, PolicyKind.RANDOM_M])
    assert rand.avg_error <= never.avg_error


def test_mgf_not_worse_than_max_age():
    m = reference_model(0.8)
    sp = make_sensor_problem(m, 1)
    rep = dual_ascent([sp, sp], 1, 0.99)
    cfg = SimConfig([m, m], b=1, horizon=20000, replications=5, seed=2)
    mgf, maf = evaluate_policy_suite(cfg, [PolicyKind.MGF, PolicyKind.MAX_AGE_FIRST], rep.lambda_star, rep.q_tables)
    assert mgf.avg_error <= maf.avg_error + 2 * np.hypot(mgf.stderr, maf.stderr)


def test_mgf_requires_q_tables():
    m = reference_model(0.8)
    with pytest.raises(ConfigurationError):
        simulate(SimConfig([m]), PolicyKind.MGF)


def test_mgf_rejects_mismatched_multiplier():
    m = reference_model(0.8)
    sp = make_sensor_problem(m, 1)
    rep = dual_ascent([sp, sp], 1, 0.99, )
    with pytest.raises(ConfigurationError, match="lambda"):
        simulate(SimConfig([m, m], b=1, horizon=100), PolicyKind.MGF, rep.lambda_star + 1.0, rep.q_tables)


@pytest.mark.parametrize(
    "kw", [dict(M=0), dict(horizon=0), dict(replications=0), dict(gamma=1.0), dict(horizon=10, warmup=10)]
)
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SimConfig([reference_model()], **kw)


def test_policy_names():
    assert PolicyKind.parse("MGF") is PolicyKind.MGF
    with pytest.raises(ValueError, match="valid names"):
        PolicyKind.parse("edf")


def test_result_csv(tmp_path):
    m = reference_model(0.6)
    res = _sim([m, m], PolicyKind.ROUND_ROBIN, horizon=200, replications=2)[1]
    path = tmp_path / "r.csv"
    write_results_csv(path, [res])
    header, row = path.read_text().splitlines()
    assert header == "policy,p,buffer,avg_error,stderr,discounted_error,sched_rate_sensor_1,sched_rate_sensor_2"
    assert row.startswith("rr,0.6,1,")
