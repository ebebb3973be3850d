import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from svsmooth.counterexample import (CounterexampleConfig, build_shift_example11,
                                     build_shift_thm13,
                                     counterexample_tail_experiment,
                                     counterexample_tail_sweep,
                                     direct_quadratic_form, event_E_frequency,
                                     exact_event_probability, hs_tail_bound,
                                     hs_tail_norm, neumann_quadratic_form,
                                     pick_gate_constant, predicted_floor,
                                     reduction_witness_check, split_blocks)
from svsmooth.ensembles import EnsembleSpec, ScalarDistribution, sample_matrix
from svsmooth.errors import BudgetExceededError, DivergenceError


def test_shift_builders():
    d = build_shift_thm13(4, 9.0).data
    np.testing.assert_array_equal(d, [9.0, 9.0, 9.0, 0.0])
    d = build_shift_example11(5, 3, 2.0).data
    np.testing.assert_array_equal(d, [2.0, 2.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        build_shift_example11(5, 0, 2.0)
    with pytest.raises(ValueError):
        build_shift_thm13(1, 2.0)


def test_split_blocks_reassembles(rng):
    M = rng.standard_normal((6, 6))
    R, u, w, r = split_blocks(M)
    back = np.zeros_like(M)
    back[:-1, :-1] = R
    back[:-1, -1] = u
    back[-1, :-1] = w
    back[-1, -1] = r
    np.testing.assert_array_equal(back, M)
    with pytest.raises(ValueError):
        split_blocks(np.ones((1, 1)))


def test_quadratic_form_two_routes_agree(rng):
    # the dense solve and the truncated geometric series are independent
    # algorithms; on gated inputs they must agree to working precision
    L = 20.0
    for _ in range(25):
        m = int(rng.integers(2, 9))
        R = rng.standard_normal((m, m))
        R *= 0.4 * L / np.linalg.norm(R, 2)
        u = rng.standard_normal(m)
        w = rng.standard_normal(m)
        d = direct_quadratic_form(R, L, u, w)
        nm = neumann_quadratic_form(R, L, u, w, 200)
        scale = max(abs(d), np.linalg.norm(u) * np.linalg.norm(w) / L)
        assert abs(d - nm) <= 1e-13 * scale
        # third route: explicit inverse
        inv = float(w @ np.linalg.inv(L * np.eye(m) - R) @ u)
        assert abs(d - inv) <= 1e-12 * scale


def test_neumann_truncation_error_is_geometric(rng):
    L = 10.0
    R = rng.standard_normal((5, 5))
    R *= 0.5 * L / np.linalg.norm(R, 2)
    u, w = rng.standard_normal(5), rng.standard_normal(5)
    d = direct_quadratic_form(R, L, u, w)
    errs = [abs(neumann_quadratic_form(R, L, u, w, k) - d) for k in (1, 4, 16)]
    assert errs[0] > errs[1] > errs[2]
    tail = (np.linalg.norm(u) * np.linalg.norm(w)
            * 0.5**16 / (L - 0.5 * L))
    assert errs[2] <= tail


def test_neumann_divergence_guard(rng):
    R = np.eye(3) * 5.0
    with pytest.raises(DivergenceError):
        neumann_quadratic_form(R, 4.0, np.ones(3), np.ones(3), 10)
    with pytest.raises(DivergenceError):
        hs_tail_norm(R, 4.0, 2)
    with pytest.raises(ValueError):
        neumann_quadratic_form(R, 50.0, np.ones(3), np.ones(3), 0)


def test_direct_form_singular_matrix_raises():
    R = np.eye(2)
    with pytest.raises(np.linalg.LinAlgError):
        direct_quadratic_form(R, 1.0, np.ones(2), np.ones(2))


def test_reduction_witness_on_random_lazy_samples():
    n, L = 8, 20.0
    spec = EnsembleSpec(n, ScalarDistribution.lazy_rademacher(), 77)
    for t in range(50):
        wit = reduction_witness_check(sample_matrix(spec, t), L)
        assert wit.certified
        assert wit.s_min <= wit.bound + 1e-8
        assert wit.top_residual <= 1e-10 * L
        assert wit.bound == pytest.approx(abs(wit.quad + wit.r_nn))


def test_hs_tail_bound_dominates_norm(rng):
    K, n, L, t = 1.5, 10, 2 * 1.5 * math.sqrt(10), 3
    for _ in range(20):
        R = rng.standard_normal((n - 1, n - 1))
        nrm = np.linalg.norm(R, 2)
        if nrm > K * math.sqrt(n):  # enforce the gate the bound assumes
            R *= 0.9 * K * math.sqrt(n) / nrm
        assert hs_tail_norm(R, L, t) <= hs_tail_bound(K, n, L, t)


def test_predicted_floor_hand_values():
    assert predicted_floor(1, 3.0, 2.0, 100) == pytest.approx(1.0 / 8.0)
    # t=2: (4C)^-2 * K^0 * log(4)^-1 * n^-1/2
    expect = (1.0 / 16.0) / math.log(4.0) / math.sqrt(50.0)
    assert predicted_floor(2, 2.5, 1.0, 50) == pytest.approx(expect)
    with pytest.raises(ValueError):
        predicted_floor(0, 1.0, 1.0, 10)


def _brute_force_event_probability(n, t):
    # enumerate every (R, u, w) over {-1,0,1} with lazy weights 2^(#zeros)
    m = n - 1
    vec_space = list(itertools.product((-1, 0, 1), repeat=m))
    total = 0
    for entries in itertools.product((-1, 0, 1), repeat=m * m):
        R = np.array(entries).reshape(m, m)
        wR = 2 ** sum(1 for e in entries if e == 0)
        for u in vec_space:
            ua = np.array(u)
            wu = 2 ** u.count(0)
            for w in vec_space:
                wa = np.array(w)
                ww = 2 ** w.count(0)
                y = ua
                ok = True
                for _ in range(t - 1):
                    if int(wa @ y) != 0:
                        ok = False
                        break
                    y = R @ y
                if ok:
                    total += wR * wu * ww
    return Fraction(total, 4 ** (m * m + 2 * m))


def test_exact_event_probability_known_values():
    assert exact_event_probability(3, 1) == Fraction(1)
    assert exact_event_probability(3, 2) == Fraction(38, 64)
    assert exact_event_probability(5, 2) == Fraction(1734, 4096)


def test_exact_event_probability_matches_brute_force():
    # independent full enumeration at the smallest nontrivial sizes
    assert exact_event_probability(3, 2) == _brute_force_event_probability(3, 2)
    assert exact_event_probability(3, 3) == _brute_force_event_probability(3, 3)


def test_exact_event_probability_budget():
    with pytest.raises(BudgetExceededError):
        exact_event_probability(8, 3, budget=1e6)
    with pytest.raises(ValueError):
        exact_event_probability(1, 2)


def test_event_frequency_covers_exact_value():
    n, t = 3, 2
    spec = EnsembleSpec(n, ScalarDistribution.lazy_rademacher(), 450)
    freq = event_E_frequency(spec, t, 4000, K_gate=2.0, equality_only=True)
    exact = float(exact_event_probability(n, t))
    assert freq.ci_low <= exact <= freq.ci_high


def test_event_frequency_full_event_is_subset_of_equality():
    spec = EnsembleSpec(12, ScalarDistribution.lazy_rademacher(), 99)
    eq = event_E_frequency(spec, 2, 2000, K_gate=1.6, equality_only=True)
    full = event_E_frequency(spec, 2, 2000, K_gate=1.6, equality_only=False)
    # same substreams, so the gated event can only lose successes
    assert full.successes <= eq.successes


def test_event_frequency_rejects_continuous_law():
    spec = EnsembleSpec(5, ScalarDistribution.gaussian(), 1)
    with pytest.raises(ValueError):
        event_E_frequency(spec, 2, 100, K_gate=1.5)


def test_pick_gate_constant_band():
    spec = EnsembleSpec(16, ScalarDistribution.lazy_rademacher(), 4001)
    K = pick_gate_constant(spec, trials=500)
    # lazy sign law has variance 1/2, so |R|/sqrt(n) ~ 2*sqrt(1/2) ~ 1.41
    assert 1.2 < K < 1.8
    assert pick_gate_constant(spec, trials=500) == K  # deterministic


def test_config_validation():
    with pytest.raises(ValueError, match="2\\*K\\*sqrt"):
        CounterexampleConfig(n=16, t=1, L=1.0, K=2.0, C=1.0, trials=10, seed=0)
    with pytest.raises(ValueError):
        CounterexampleConfig(n=1, t=1, L=10.0, K=1.0, C=1.0, trials=10, seed=0)
    with pytest.raises(ValueError):
        CounterexampleConfig(n=4, t=0, L=10.0, K=1.0, C=1.0, trials=10, seed=0)


def test_tail_sweep_shares_samples_and_is_monotone():
    cfg = CounterexampleConfig(n=8, t=1, L=12.0, K=2.0, C=1.0, trials=800,
                               seed=5)
    outs = counterexample_tail_sweep(cfg, [0.5, 1.0, 2.0])
    succ = [o.frequency.successes for o in outs]
    assert succ == sorted(succ)  # shared samples: exact monotonicity in C
    single = counterexample_tail_experiment(cfg)
    assert single.frequency.successes == outs[1].frequency.successes
    assert single.threshold == outs[1].threshold
    with pytest.raises(ValueError):
        counterexample_tail_sweep(cfg, [])
    with pytest.raises(ValueError):
        counterexample_tail_sweep(cfg, [-1.0])


def test_tail_experiment_t1_clears_floor():
    # t=1: threshold C*K*sqrt(n)/L = C/2 at L = 2K sqrt(n); floor 1/(4C)
    cfg = CounterexampleConfig(n=16, t=1, L=2 * 1.5 * 4.0, K=1.5, C=2.0,
                               trials=3000, seed=9)
    out = counterexample_tail_experiment(cfg)
    assert out.clears_floor
    assert out.floor == pytest.approx(1.0 / 8.0)
    assert not out.truncated
