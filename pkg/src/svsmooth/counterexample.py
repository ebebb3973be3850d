"""Shifted sparse-noise ensembles whose smallest singular value decays
polynomially, and the block reduction that explains why.

The shift is A = diag(L, ..., L, 0) and the noise R has lazy sign entries
(0 w.p. 1/2, +-1 w.p. 1/4 each).  Writing the noise in blocks

    R_n = [[R, u], [w^T, r_nn]],       R of size (n-1) x (n-1),

the vector v = ((L I - R)^{-1} u, 1) zeroes out the top block of
(A - R_n) v exactly, leaving

    s_min(A - R_n) <= |w^T (L I - R)^{-1} u + r_nn|.

The quadratic form expands into the geometric series
sum_i w^T R^i u / L^{i+1}; its leading terms vanish exactly with
probability bounded below by a power of n, which is what the experiments
here measure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from svsmooth.ensembles import EnsembleSpec, ScalarDistribution, ShiftMatrix, sample_matrix
from svsmooth.errors import BudgetExceededError, DivergenceError
from svsmooth.spectra import operator_norm, smallest_singular_value
from svsmooth.tail_lab import Frequency, _harvest_blocks, opnorm_quantile, smallest_sv_samples

__all__ = [
    "CounterexampleConfig",
    "ReductionWitness",
    "CounterexampleOutcome",
    "build_shift_thm13",
    "build_shift_example11",
    "split_blocks",
    "direct_quadratic_form",
    "neumann_quadratic_form",
    "reduction_witness_check",
    "hs_tail_norm",
    "hs_tail_bound",
    "event_E_frequency",
    "exact_event_probability",
    "predicted_floor",
    "pick_gate_constant",
    "counterexample_tail_experiment",
    "counterexample_tail_sweep",
]


@dataclass(frozen=True)
class CounterexampleConfig:
    """Experiment parameters; requires L >= 2*K*sqrt(n)."""

    n: int
    t: int
    L: float
    K: float
    C: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if not (self.K > 0.0 and self.C > 0.0):
            raise ValueError("K and C must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        floor_L = 2.0 * self.K * math.sqrt(self.n)
        if self.L < floor_L * (1.0 - 1e-12):
            raise ValueError(
                f"L must be >= 2*K*sqrt(n) = {floor_L!r}, got {self.L!r}")


def build_shift_thm13(n: int, L: float) -> ShiftMatrix:
    """diag(L, ..., L, 0)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    d = np.full(n, float(L))
    d[-1] = 0.0
    return ShiftMatrix.from_diagonal(d)


def build_shift_example11(n: int, k: int, L: float) -> ShiftMatrix:
    """diag(L, ..., L, 0, ..., 0) with k trailing zeros."""
    if not (1 <= k <= n):
        raise ValueError(f"k must be in [1, n], got {k}")
    d = np.full(n, float(L))
    d[n - k:] = 0.0
    return ShiftMatrix.from_diagonal(d)


def split_blocks(R_n: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """(top-left minor, last column head u, last row head w, corner r_nn)."""
    R_n = np.asarray(R_n, dtype=np.float64)
    if R_n.ndim != 2 or R_n.shape[0] != R_n.shape[1] or R_n.shape[0] < 2:
        raise ValueError("need a square matrix of size >= 2")
    return (R_n[:-1, :-1].copy(), R_n[:-1, -1].copy(), R_n[-1, :-1].copy(),
            float(R_n[-1, -1]))


def direct_quadratic_form(R: np.ndarray, L: float, u: np.ndarray,
                          w: np.ndarray) -> float:
    """w^T (L I - R)^{-1} u by a dense solve.

    Raises numpy.linalg.LinAlgError when L I - R is exactly singular.
    """
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[0]
    x = np.linalg.solve(L * np.eye(n) - R, np.asarray(u, dtype=np.float64))
    return float(np.asarray(w, dtype=np.float64) @ x)


def neumann_quadratic_form(R: np.ndarray, L: float, u: np.ndarray,
                           w: np.ndarray, terms: int) -> float:
    """Partial sum sum_{i<terms} w^T R^i u / L^{i+1}.

    Valid only inside the convergence region |R| < L; the dropped tail is
    bounded by |w||u| * (|R|/L)^terms / (L - |R|).
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    R = np.asarray(R, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if operator_norm(R) >= L:
        raise DivergenceError(f"|R| >= L = {L!r}; geometric series diverges")
    y = u / L
    total = float(w @ y)
    for _ in range(terms - 1):
        y = (R @ y) / L
        total += float(w @ y)
    return total


@dataclass(frozen=True)
class ReductionWitness:
    """Outcome of checking the block-reduction certificate on one matrix."""

    s_min: float
    bound: float
    quad: float
    r_nn: float
    top_residual: float
    certified: bool


def reduction_witness_check(R_n: np.ndarray, L: float,
                            tol: float = 1e-8) -> ReductionWitness:
    """Verify s_min(A - R_n) <= |w^T (L I - R)^{-1} u + r_nn| on a sample,
    where A = diag(L, ..., L, 0).

    top_residual is the norm of the first n-1 coordinates of (A - R_n) v at
    the witness v; it is zero up to solver roundoff by construction.
    """
    R_n = np.asarray(R_n, dtype=np.float64)
    n = R_n.shape[0]
    R, u, w, r_nn = split_blocks(R_n)
    A = build_shift_thm13(n, L).to_dense()
    x = np.linalg.solve(L * np.eye(n - 1) - R, u)
    quad = float(w @ x)
    bound = abs(quad + r_nn)
    v = np.concatenate([x, [1.0]])
    resid = (A - R_n) @ v
    s_min = smallest_singular_value(A - R_n)
    return ReductionWitness(
        s_min=s_min, bound=bound, quad=quad, r_nn=r_nn,
        top_residual=float(np.linalg.norm(resid[:-1])),
        certified=s_min <= bound + tol)


def hs_tail_norm(R: np.ndarray, L: float, t: int) -> float:
    """Hilbert-Schmidt norm of sum_{i >= t-1} (R/L)^i."""
    if t < 1:
        raise ValueError("t must be >= 1")
    R = np.asarray(R, dtype=np.float64)
    if operator_norm(R) >= L:
        raise DivergenceError(f"|R| >= L = {L!r}; geometric series diverges")
    M = R / L
    n = M.shape[0]
    S = np.linalg.matrix_power(M, t - 1) @ np.linalg.inv(np.eye(n) - M)
    return float(np.linalg.norm(S, "fro"))


def hs_tail_bound(K: float, n: int, L: float, t: int) -> float:
    """2 K^{t-1} n^{t/2} / L^{t-1}; dominates hs_tail_norm whenever
    |R| <= K sqrt(n) and L >= 2 K sqrt(n)."""
    return 2.0 * K ** (t - 1) * n ** (t / 2.0) / L ** (t - 1)


def predicted_floor(t: int, K: float, C: float, n: int) -> float:
    """(4C)^{-t} K^{-(t-1)(t-2)/2} (log 2t)^{1-t} n^{-t(t-1)/4}."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return ((4.0 * C) ** (-t)
            * K ** (-(t - 1) * (t - 2) / 2.0)
            * math.log(2.0 * t) ** (1 - t)
            * n ** (-t * (t - 1) / 4.0))


# ---------------------------------------------------------------------------
# the vanishing-moments event

def _int_block_split(mat: np.ndarray):
    M = np.rint(mat).astype(np.int64)
    if np.abs(M - mat).max() > 0.0:
        raise ValueError("event probabilities need an integer-valued law")
    return M[:-1, :-1], M[:-1, -1], M[-1, :-1]


def _event_block(payload, start: int, stop: int) -> np.ndarray:
    spec, t, K_gate, C, L, equality_only = payload
    n = spec.n
    # entries are in {-1,0,1}; |w^T R^i u| <= (n-1)^{i+1} caps the magnitudes
    exact_dtype = np.int64 if (n - 1) ** max(1, t - 1) < 2**62 else object
    thr = C * K_gate**t * n ** (t / 2.0) / L ** (t - 1)
    out = np.zeros((stop - start, 1))
    for row, trial in enumerate(range(start, stop)):
        sample = sample_matrix(spec, trial)
        R, u, w = _int_block_split(sample)
        if exact_dtype is object:
            R = R.astype(object)
            u = u.astype(object)
            w = w.astype(object)
        ok = True
        y = u
        for _ in range(t - 1):
            if (w @ y) != 0:
                ok = False
                break
            y = R @ y
        if not ok:
            continue
        if equality_only:
            out[row, 0] = 1.0
            continue
        Rf = R.astype(np.float64)
        if operator_norm(Rf) > K_gate * math.sqrt(n):
            continue
        M = Rf / L
        z = np.linalg.solve(np.eye(n - 1) - M, u.astype(np.float64))
        for _ in range(t - 1):
            z = M @ z
        if abs(float(w.astype(np.float64) @ z)) <= thr:
            out[row, 0] = 1.0
    return out


def event_E_frequency(ensemble: EnsembleSpec, t: int, trials: int,
                      K_gate: float, C: float = 2.0,
                      L: Optional[float] = None, equality_only: bool = False,
                      confidence: float = 0.99, workers: int = 1,
                      deadline: Optional[float] = None) -> Frequency:
    """Frequency of the event that makes the reduction bound small:

        w^T R^i u = 0 exactly for i = 0..t-2          (equality part)
        |R| <= K_gate sqrt(n)                          (gate)
        |w^T sum_{i>=t-1} (R/L)^i u| <= C K_gate^t n^{t/2} / L^{t-1}

    Blocks come from one n x n sample per trial.  equality_only keeps just
    the first part, which is the dominant factor and, unlike the gated
    event, is nested across t on common samples.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if not ensemble.distribution.is_integer_valued:
        raise ValueError("event frequencies need an integer-valued law")
    if not (K_gate > 0.0):
        raise ValueError("K_gate must be positive")
    if L is None:
        L = 2.0 * K_gate * math.sqrt(ensemble.n)
    payload = (ensemble, t, K_gate, C, L, equality_only)
    flags, _ = _harvest_blocks(_event_block, payload, trials, workers,
                               deadline, 256)
    done = flags.shape[0]
    return Frequency.from_counts(int(flags[:, 0].sum()), done, confidence)


def _signed_weight_vectors(m: int):
    """All vectors in {-1,0,1}^m with their lazy-law weights 2^(#zeros)."""
    vecs = np.array(list(itertools.product((-1, 0, 1), repeat=m)), dtype=np.int64)
    weights = np.array([2 ** int(np.count_nonzero(v == 0)) for v in vecs],
                       dtype=np.int64)
    return vecs, weights


def exact_event_probability(n: int, t: int, budget: float = 1e9) -> Fraction:
    """P[w^T R^i u = 0 for all i = 0..t-2] under the lazy sign law, exactly.

    t = 2 needs no enumeration: the products w_j u_j are iid on {-1,0,1}
    with weights (1,6,1)/8, so the probability is the central coefficient
    of ((x + 6 + x^{-1})/8)^(n-1).  t >= 3 enumerates all of R, u, w, which
    costs 3^((n-1)^2 + 2(n-1)) evaluations and is refused above `budget`.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if t < 1:
        raise ValueError("t must be >= 1")
    m = n - 1
    if t == 1:
        return Fraction(1)
    if t == 2:
        coeffs = [1]
        for _ in range(m):
            new = [0] * (len(coeffs) + 2)
            for i, c in enumerate(coeffs):
                new[i] += c
                new[i + 1] += 6 * c
                new[i + 2] += c
            coeffs = new
        return Fraction(coeffs[m], 8**m)
    cost = 3.0 ** (m * m + 2 * m)
    if cost > budget:
        raise BudgetExceededError(
            f"exhaustive event check needs ~{cost:.3g} evaluations (> {budget:.3g})")
    vecs, weights = _signed_weight_vectors(m)
    total = 0
    for entries in itertools.product((-1, 0, 1), repeat=m * m):
        R = np.array(entries, dtype=np.int64).reshape(m, m)
        r_weight = 2 ** int(np.count_nonzero(R == 0))
        mask = np.ones((len(vecs), len(vecs)), dtype=bool)
        power = np.eye(m, dtype=np.int64)
        for _ in range(t - 1):
            prod = vecs @ power @ vecs.T  # [a, b] = w_a^T R^i u_b
            mask &= prod == 0
            power = power @ R
        pair_mass = int(weights @ mask.astype(np.int64) @ weights)
        total += r_weight * pair_mass
    return Fraction(total, 4 ** (m * m + 2 * m))


def pick_gate_constant(ensemble: EnsembleSpec, trials: int = 2000,
                       workers: int = 1) -> float:
    """Empirical high quantile of |R|/sqrt(n): q = 1 - 2^{-n}, capped at
    1 - 1e-4 so the estimate stays inside the sample range."""
    q = min(1.0 - 2.0 ** (-ensemble.n), 1.0 - 1e-4)
    return opnorm_quantile(ensemble, trials, q, workers=workers)


@dataclass(frozen=True)
class CounterexampleOutcome:
    threshold: float
    frequency: Frequency
    floor: float
    clears_floor: bool
    truncated: bool


def counterexample_tail_experiment(config: CounterexampleConfig,
                                   confidence: float = 0.99, workers: int = 1,
                                   deadline: Optional[float] = None
                                   ) -> CounterexampleOutcome:
    """Estimate P[s_min(A + R_n) <= C (K sqrt(n) / L)^t] for the lazy-sign
    ensemble (symmetric, so A + R_n matches the A - R_n reduction in law)
    and compare with the predicted floor (4C)^{-t} K^{...} n^{...}."""
    return counterexample_tail_sweep(config, [config.C], confidence, workers,
                                     deadline)[0]


def counterexample_tail_sweep(config: CounterexampleConfig, C_values,
                              confidence: float = 0.99, workers: int = 1,
                              deadline: Optional[float] = None
                              ) -> Tuple[CounterexampleOutcome, ...]:
    """One outcome per C, all thresholds applied to a single shared set of
    per-trial smallest singular values (so outcomes are monotone in C)."""
    if not C_values:
        raise ValueError("need at least one C")
    if any(c <= 0.0 for c in C_values):
        raise ValueError("C values must be positive")
    ensemble = EnsembleSpec(config.n, ScalarDistribution.lazy_rademacher(),
                            config.seed)
    shift = build_shift_thm13(config.n, config.L)
    vals, truncated = smallest_sv_samples(shift, ensemble, config.trials,
                                          workers, deadline)
    out = []
    base = (config.K * math.sqrt(config.n) / config.L) ** config.t
    for c in C_values:
        threshold = float(c) * base
        freq = Frequency.from_counts(int(np.count_nonzero(vals <= threshold)),
                                     vals.size, confidence)
        floor = predicted_floor(config.t, config.K, float(c), config.n)
        out.append(CounterexampleOutcome(threshold, freq, floor,
                                         freq.ci_low >= floor, truncated))
    return tuple(out)
