"""Monte Carlo estimation of smallest-singular-value tail probabilities.

All estimators draw trial t from its own substream (see ensembles), so a
given (ensemble, trials) pair produces the same per-trial statistics no
matter how the trial range is blocked or how many workers consume it.
Aggregation is order-independent counting over the completed trial prefix.

A sweep over thresholds reuses one set of per-trial smallest singular
values for every epsilon (common random numbers), so estimated curves are
exactly monotone in epsilon.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import beta

from svsmooth.arithmetic import (CompressibilityParams, LCDParams, LCDResult,
                                 lcd, levy_concentration_empirical)
from svsmooth.ensembles import EnsembleSpec, ShiftMatrix, sample_matrix, sample_vector
from svsmooth.spectra import bottom_singular_projection

__all__ = [
    "Frequency",
    "TailRow",
    "TailCurve",
    "PowerLawFit",
    "NoFittableRowsError",
    "DistanceCheckResult",
    "AnticoncentrationResult",
    "clopper_pearson",
    "smallest_sv_samples",
    "estimate_tail_probability",
    "sweep_tail_curve",
    "fit_power_law",
    "opnorm_quantile",
    "image_norm_samples",
    "single_vector_image_experiment",
    "invertibility_distance_check",
    "anticoncentration_vs_lcd",
]

_BLOCK = 256


def clopper_pearson(successes: int, trials: int, confidence: float = 0.99
                    ) -> Tuple[float, float]:
    """Exact (conservative) binomial confidence interval."""
    if not (0 < confidence < 1):
        raise ValueError("confidence must be in (0,1)")
    if trials < 1 or not (0 <= successes <= trials):
        raise ValueError(f"bad counts {successes}/{trials}")
    a = (1.0 - confidence) / 2.0
    lo = 0.0 if successes == 0 else float(beta.ppf(a, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(beta.ppf(1.0 - a, successes + 1,
                                                        trials - successes))
    return lo, hi


@dataclass(frozen=True)
class Frequency:
    """An empirical frequency with its exact binomial interval."""

    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    confidence: float

    def __post_init__(self):
        if not (0 <= self.successes <= self.trials):
            raise ValueError("successes out of range")
        if not (0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0):
            raise ValueError("interval does not bracket the point estimate")

    @classmethod
    def from_counts(cls, successes: int, trials: int, confidence: float = 0.99
                    ) -> "Frequency":
        lo, hi = clopper_pearson(successes, trials, confidence)
        return cls(successes, trials, successes / trials, lo, hi, confidence)


@dataclass(frozen=True)
class TailRow:
    epsilon: float
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if self.epsilon < 0.0 or not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite and nonnegative")
        if not (0 <= self.successes <= self.trials):
            raise ValueError("successes out of range")
        if not (0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0):
            raise ValueError("interval does not bracket the point estimate")


@dataclass(frozen=True)
class TailCurve:
    rows: Tuple[TailRow, ...]
    meta: dict

    def __post_init__(self):
        eps = [r.epsilon for r in self.rows]
        if any(b < a for a, b in zip(eps, eps[1:])):
            raise ValueError("rows must be sorted by epsilon")


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    epsilon_range: Tuple[float, float]


class NoFittableRowsError(ValueError):
    """Fewer than two sweep rows carry enough successes to regress on."""


# ---------------------------------------------------------------------------
# blocked trial execution

def _harvest_blocks(fn, payload, trials: int, workers: int,
                    deadline: Optional[float], block: int
                    ) -> Tuple[np.ndarray, bool]:
    """Run fn(payload, start, stop) over [0, trials) in blocks; return the
    stacked per-trial rows for a contiguous prefix plus a truncation flag.

    Results are keyed by block start, so worker scheduling cannot reorder
    trials.  A deadline only ever shortens the prefix (never reorders it),
    and at least the first block always completes.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    starts = list(range(0, trials, block))
    if workers <= 1 or len(starts) == 1:
        parts = []
        for a in starts:
            if deadline is not None and parts and time.monotonic() > deadline:
                return np.concatenate(parts), True
            parts.append(np.asarray(fn(payload, a, min(a + block, trials))))
        return np.concatenate(parts), False

    done = {}
    expired = False
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, payload, a, min(a + block, trials)): a
                   for a in starts}
        pending = set(futures)
        while pending:
            finished, pending = wait(pending, timeout=0.25,
                                     return_when=FIRST_COMPLETED)
            for f in finished:
                done[futures[f]] = np.asarray(f.result())
            if deadline is not None and pending and time.monotonic() > deadline:
                for f in pending:
                    f.cancel()
                expired = True
                break
    parts = []
    truncated = expired
    for a in starts:
        if a not in done:
            truncated = True
            break
        parts.append(done[a])
    if not parts:  # budget expired before block 0 came back; run it inline
        parts = [np.asarray(fn(payload, 0, min(block, trials)))]
    return np.concatenate(parts), truncated


def _extreme_sv_block(payload, start: int, stop: int) -> np.ndarray:
    shift_dense, spec, want_largest = payload
    n = spec.n
    mats = np.empty((stop - start, n, n))
    for i, t in enumerate(range(start, stop)):
        mats[i] = sample_matrix(spec, t)
    if shift_dense is not None:
        mats += shift_dense
    s = np.linalg.svd(mats, compute_uv=False)
    out = s[:, 0] if want_largest else s[:, -1]
    return out.reshape(-1, 1)


def smallest_sv_samples(shift: ShiftMatrix, ensemble: EnsembleSpec, trials: int,
                        workers: int = 1, deadline: Optional[float] = None
                        ) -> Tuple[np.ndarray, bool]:
    """Per-trial smallest singular values of shift + M_t, trial-indexed.

    Returns (values, truncated); values covers trials 0..len-1 even when a
    deadline cut the run short.
    """
    if shift.n != ensemble.n:
        raise ValueError(
            f"dimension mismatch: shift is {shift.n}, ensemble is {ensemble.n}")
    vals, truncated = _harvest_blocks(
        _extreme_sv_block, (shift.to_dense(), ensemble, False), trials,
        workers, deadline, _BLOCK)
    return vals[:, 0], truncated


def estimate_tail_probability(shift: ShiftMatrix, ensemble: EnsembleSpec,
                              epsilon: float, trials: int,
                              confidence: float = 0.99, workers: int = 1
                              ) -> TailRow:
    """P[s_min(shift + M) <= epsilon] with a Clopper-Pearson interval."""
    if epsilon < 0.0 or not math.isfinite(epsilon):
        raise ValueError("epsilon must be finite and nonnegative")
    vals, _ = smallest_sv_samples(shift, ensemble, trials, workers)
    successes = int(np.count_nonzero(vals <= epsilon))
    lo, hi = clopper_pearson(successes, trials, confidence)
    return TailRow(epsilon, trials, successes, successes / trials, lo, hi)


def sweep_tail_curve(shift: ShiftMatrix, ensemble: EnsembleSpec,
                     epsilons: Sequence[float], trials: int,
                     confidence: float = 0.99, workers: int = 1,
                     deadline: Optional[float] = None) -> TailCurve:
    """Tail estimates at each epsilon from one shared set of trials."""
    eps = sorted(float(e) for e in epsilons)
    if not eps:
        raise ValueError("need at least one epsilon")
    if eps[0] < 0.0 or not all(math.isfinite(e) for e in eps):
        raise ValueError("epsilons must be finite and nonnegative")
    vals, truncated = smallest_sv_samples(shift, ensemble, trials, workers,
                                          deadline)
    done = vals.size
    rows = []
    for e in eps:
        k = int(np.count_nonzero(vals <= e))
        lo, hi = clopper_pearson(k, done, confidence)
        rows.append(TailRow(e, done, k, k / done, lo, hi))
    meta = {
        "n": ensemble.n,
        "distribution": ensemble.distribution.describe(),
        "shift": shift.describe(),
        "master_seed": ensemble.master_seed,
        "confidence": confidence,
        "trials_requested": trials,
        "trials_completed": done,
        "truncated": truncated,
    }
    return TailCurve(tuple(rows), meta)


def fit_power_law(curve: TailCurve, min_successes: int = 10) -> PowerLawFit:
    """Least-squares line through (log eps, log p_hat) over usable rows.

    Rows with epsilon = 0 or successes < min_successes carry no log-scale
    information and are dropped; fewer than two usable rows is an error.
    """
    pts = [(r.epsilon, r.p_hat) for r in curve.rows
           if r.epsilon > 0.0 and r.successes >= min_successes]
    if len(pts) < 2:
        raise NoFittableRowsError(
            f"{len(pts)} usable rows (need >= 2 with successes >= {min_successes})")
    x = np.log([e for e, _ in pts])
    y = np.log([p for _, p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    used = [e for e, _ in pts]
    return PowerLawFit(float(slope), float(intercept), r2,
                       (min(used), max(used)))


def opnorm_quantile(ensemble: EnsembleSpec, trials: int, q: float,
                    workers: int = 1, deadline: Optional[float] = None) -> float:
    """Empirical q-quantile of |M| / sqrt(n) over fresh matrices."""
    if not (0.0 < q < 1.0):
        raise ValueError("q must be in (0,1)")
    vals, _ = _harvest_blocks(_extreme_sv_block, (None, ensemble, True),
                              trials, workers, deadline, _BLOCK)
    return float(np.quantile(vals[:, 0], q)) / math.sqrt(ensemble.n)


# ---------------------------------------------------------------------------
# projected image of a fixed vector

def _image_norm_block(payload, start: int, stop: int) -> np.ndarray:
    B, spec, v, basis = payload
    out = np.empty((stop - start, 1))
    for i, t in enumerate(range(start, stop)):
        noise_minor = sample_matrix(spec, t)[:-1, :]
        out[i, 0] = np.linalg.norm(basis.T @ ((B + noise_minor) @ v))
    return out


def image_norm_samples(B_shift, ensemble: EnsembleSpec, v, m: int, trials: int,
                       workers: int = 1) -> np.ndarray:
    """|P (B + N_t) v| per trial, P the bottom-m left singular projection of
    B and N_t the noise matrix of trial t with its last row dropped."""
    B = np.asarray(B_shift, dtype=np.float64)
    n = ensemble.n
    if B.shape != (n - 1, n):
        raise ValueError(f"B must be (n-1) x n = {(n - 1, n)}, got {B.shape}")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError("v must have length n")
    proj = bottom_singular_projection(B, m)
    # orthonormal basis recovered from the projector: |P x| = |Q^T x|
    eigvals, eigvecs = np.linalg.eigh(proj.matrix)
    basis = eigvecs[:, eigvals > 0.5]
    vals, _ = _harvest_blocks(_image_norm_block, (B, ensemble, v, basis),
                              trials, workers, None, _BLOCK)
    return vals[:, 0]


def single_vector_image_experiment(B_shift, ensemble: EnsembleSpec, v, m: int,
                                   c: float, trials: int,
                                   confidence: float = 0.99,
                                   workers: int = 1) -> Frequency:
    """Frequency of |P (B + N) v| <= c * sqrt(n)."""
    if c < 0.0:
        raise ValueError("c must be nonnegative")
    norms = image_norm_samples(B_shift, ensemble, v, m, trials, workers)
    thr = c * math.sqrt(ensemble.n)
    return Frequency.from_counts(int(np.count_nonzero(norms <= thr)), trials,
                                 confidence)


# ---------------------------------------------------------------------------
# distance-to-column-span comparison

def _sparsity_distances_rows(X: np.ndarray, delta: float) -> np.ndarray:
    n = X.shape[1]
    k = int(math.floor(delta * n))
    mags = np.sort(np.abs(X), axis=1)
    if k == 0:
        return np.linalg.norm(mags, axis=1)
    return np.linalg.norm(mags[:, : n - k], axis=1)


def _distance_check_block(payload, start: int, stop: int) -> np.ndarray:
    A, spec, delta, rho, epsilon = payload
    n = spec.n
    blk = stop - start
    W = np.empty((blk, n, n))
    for i, t in enumerate(range(start, stop)):
        W[i] = sample_matrix(spec, t)
    W += A
    _, s, Vt = np.linalg.svd(W)
    sn = s[:, -1]
    vmin = Vt[:, -1, :]
    incompressible = _sparsity_distances_rows(vmin, delta) > rho
    lhs = (sn <= epsilon * rho / math.sqrt(n)) & incompressible

    out = np.zeros((blk, 1 + n))
    out[:, 0] = lhs
    for k in range(n):
        cols = np.delete(W, k, axis=2)
        U, sc, _ = np.linalg.svd(cols, full_matrices=True)
        rank_deficient = sc[:, -1] <= 1e-12 * np.maximum(1.0, sc[:, 0])
        normal = U[:, :, -1]
        dist = np.abs(np.einsum("ij,ij->i", normal, W[:, :, k]))
        dist[rank_deficient] = 0.0
        out[:, 1 + k] = dist <= epsilon
    return out


@dataclass(frozen=True)
class DistanceCheckResult:
    """Both sides of the union-bound reduction from the smallest singular
    value to single column-to-span distances, estimated on shared trials."""

    lhs: Frequency
    rhs: float
    rhs_ci_high: float
    column_p_hats: Tuple[float, ...]
    epsilon: float
    lhs_threshold: float
    holds: bool


def invertibility_distance_check(ensemble: EnsembleSpec, shift: ShiftMatrix,
                                 params: CompressibilityParams, epsilon: float,
                                 trials: int, confidence: float = 0.99,
                                 workers: int = 1) -> DistanceCheckResult:
    """Compare P[s_min <= eps*rho/sqrt(n), minimizer incompressible] with
    (1/(delta n)) * sum_k P[dist(col_k, span of the rest) <= eps].

    holds is the one-sided consistency verdict: the lhs interval's low end
    does not exceed the rhs interval's high end.
    """
    if shift.n != ensemble.n:
        raise ValueError("dimension mismatch between shift and ensemble")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    n = ensemble.n
    payload = (shift.to_dense(), ensemble, params.delta, params.rho, epsilon)
    flags, _ = _harvest_blocks(_distance_check_block, payload, trials,
                               workers, None, _BLOCK)
    done = flags.shape[0]
    lhs = Frequency.from_counts(int(flags[:, 0].sum()), done, confidence)
    col_counts = flags[:, 1:].sum(axis=0).astype(int)
    col_p = tuple(c / done for c in col_counts)
    col_hi = [clopper_pearson(int(c), done, confidence)[1] for c in col_counts]
    scale = 1.0 / (params.delta * n)
    rhs = scale * float(sum(col_p))
    rhs_hi = scale * float(sum(col_hi))
    return DistanceCheckResult(
        lhs=lhs, rhs=rhs, rhs_ci_high=rhs_hi, column_p_hats=col_p,
        epsilon=epsilon, lhs_threshold=epsilon * params.rho / math.sqrt(n),
        holds=lhs.ci_low <= rhs_hi)


# ---------------------------------------------------------------------------
# anticoncentration of <v, xi> against the LCD of v

@dataclass(frozen=True)
class AnticoncentrationResult:
    levy_hat: float
    trials: int
    lcd_result: LCDResult


def anticoncentration_vs_lcd(v, ensemble: EnsembleSpec, epsilon: float,
                             trials: int, lcd_params: LCDParams
                             ) -> AnticoncentrationResult:
    """Empirical Levy concentration of <v, xi> at radius epsilon, paired
    with the LCD of v; structured v (small LCD) should concentrate more."""
    v = np.asarray(v, dtype=np.float64)
    res = lcd(v, lcd_params)
    samples = np.empty(trials)
    for t in range(trials):
        xi = sample_vector(ensemble, v.size, t)
        samples[t] = float(v @ xi)
    return AnticoncentrationResult(levy_concentration_empirical(samples, epsilon),
                                   trials, res)
