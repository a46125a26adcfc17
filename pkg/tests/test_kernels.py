"""The numpy fallback and the compiled kernels must agree."""

import numpy as np
import pytest

from aoibuf import _kernels as K
from aoibuf.aoi import enumerate_states
from aoibuf.source import build_error_table, reference_model

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def space():
    S = enumerate_states(2, 25)
    return S, build_error_table(reference_model(), S).values


@pytest.mark.parametrize("lam,gamma,p", [(0.0, 0.9, 0.6), (0.4, 0.99, 0.8), (2.0, 0.5, 1.0)])
def test_value_iteration_parity(space, lam, gamma, p):
    S, err = space
    args = (err, S.on_success, S.on_failure, p, lam, gamma, np.zeros(len(S)), 1e-11, 10**6)
    v1, a1, b1, n1, r1 = K.value_iteration_np(*args)
    v2, a2, b2, n2, r2 = K.value_iteration_nb(*args)
    assert n1 == n2
    np.testing.assert_allclose(v1, v2, rtol=0, atol=1e-12)
    np.testing.assert_allclose(a1 - b1, a2 - b2, atol=1e-12)
    np.testing.assert_allclose(r1, r2, atol=1e-12)


def test_policy_evaluation_parity(space):
    S, err = space
    rng = np.random.default_rng(0)
    action = (rng.random(len(S)) < 0.4).astype(np.uint8)
    args = (err, action, S.on_success, S.on_failure, 0.7, 0.95, np.zeros(len(S)), 1e-12, 10**6)
    u1, n1 = K.policy_evaluation_np(*args)
    u2, n2 = K.policy_evaluation_nb(*args)
    np.testing.assert_allclose(u1, u2, atol=1e-11)


@pytest.mark.parametrize("policy", [K.MGF, K.MAX_AGE, K.ROUND_ROBIN, K.RANDOM_M, K.NEVER])
def test_simulation_parity(space, policy):
    S, err = space
    N, R, T = 4, 3, 700
    rng = np.random.default_rng(policy)
    err_tab = np.stack([err] * N)
    # coarse gains so that ties (and the tie-break rules) actually occur
    gain_tab = np.round(rng.normal(size=(N, len(S))), 1)
    p = np.array([0.3, 0.5, 0.7, 0.9])
    uniforms = rng.random((R, T, N))
    keys = rng.random((R, T, N))
    outs = []
    for fn in (K.simulate_chunk_np, K.simulate_chunk_nb):
        bufs = dict(
            state=np.full((R, N), S.initial, dtype=np.int64), acc_err=np.zeros(R), acc_disc=np.zeros(R),
            sched=np.zeros((R, N), np.int64), visits=np.zeros((N, len(S)), np.int64), mx=np.zeros(1, np.int64),
        )
        fn(policy, 2, 0, T, 20, 0.97, err_tab, gain_tab, S.on_success, S.on_failure, S.head_age, p,
           uniforms, keys, bufs["state"], bufs["acc_err"], bufs["acc_disc"], bufs["sched"], bufs["visits"], bufs["mx"])
        outs.append(bufs)
    a, b = outs
    np.testing.assert_array_equal(a["state"], b["state"])
    np.testing.assert_array_equal(a["sched"], b["sched"])
    np.testing.assert_array_equal(a["visits"], b["visits"])
    np.testing.assert_allclose(a["acc_err"], b["acc_err"], rtol=1e-12)
    np.testing.assert_allclose(a["acc_disc"], b["acc_disc"], rtol=1e-12)
    assert a["mx"][0] == b["mx"][0] <= 2
