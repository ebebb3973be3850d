"""Arithmetic structure of unit vectors: distance to sparse vectors,
compressible/incompressible classification, least common denominators,
Levy concentration, and LCD level-set membership.

The LCD of a unit vector v at tolerance (gamma, alpha) is

    inf { theta > 0 : dist(theta * v, Z^N) < min(gamma * |theta * v|, alpha) }.

The scan below certifies an upper bound exactly (it returns a theta that
satisfies the defining inequality) and a lower bound up to grid resolution:
theta -> dist(theta v, Z^N) is 1-Lipschitz for unit v, so a satisfying
interval of length > 2 * grid_step cannot fall between grid points.
Satisfying intervals shorter than the grid step can be missed, which only
ever reports a larger value; treat 'found' results as certificates and
lower bounds as heuristic at grid scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from svsmooth.ensembles import ScalarDistribution

__all__ = [
    "CompressibilityParams",
    "VectorClass",
    "LCDParams",
    "LCDResult",
    "sparsity_distance",
    "classify_vector",
    "lcd",
    "levy_concentration_exact",
    "levy_concentration_empirical",
    "level_set_membership",
    "restricted_level_set_membership",
]

_UNIT_ATOL = 1e-10

DEFAULT_GRID_STEP = 1e-3
DEFAULT_REFINE_TOL = 1e-9


@dataclass(frozen=True)
class CompressibilityParams:
    """Sparsity fraction delta and distance threshold rho, both in (0, 1)."""

    delta: float
    rho: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0,1), got {self.delta!r}")
        if not (0.0 < self.rho < 1.0):
            raise ValueError(f"rho must be in (0,1), got {self.rho!r}")


class VectorClass(enum.Enum):
    COMPRESSIBLE = "compressible"
    INCOMPRESSIBLE = "incompressible"


def _unit_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a nonempty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    nrm = float(np.linalg.norm(x))
    if abs(nrm - 1.0) > _UNIT_ATOL:
        raise ValueError(f"expected a unit vector, |x| = {nrm!r}")
    return x


def sparsity_distance(x, delta: float) -> float:
    """Euclidean distance from unit x to the nearest floor(delta*N)-sparse
    vector: the norm of x off its floor(delta*N) largest-magnitude coords."""
    x = _unit_vector(x)
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0,1), got {delta!r}")
    k = int(math.floor(delta * x.size))
    if k == 0:
        return float(np.linalg.norm(x))
    mags = np.sort(np.abs(x))
    return float(np.linalg.norm(mags[: x.size - k]))


def classify_vector(x, params: CompressibilityParams) -> VectorClass:
    """Compressible iff sparsity_distance(x, delta) <= rho (tie compressible)."""
    d = sparsity_distance(x, params.delta)
    return VectorClass.COMPRESSIBLE if d <= params.rho else VectorClass.INCOMPRESSIBLE


@dataclass(frozen=True)
class LCDParams:
    """Tolerances and scan controls for the least common denominator.

    alpha: absolute cap on the lattice distance that still counts as a hit.
    gamma: proportional cap, in (0, 1).
    theta_max: scan ceiling; status 'exceeds_ceiling' past it.
    grid_step: scan resolution, must be < 1/2 so the 1-Lipschitz distance
        cannot hide a satisfying interval wider than two grid cells.
    refine_tol: bisection width at which the hit is reported.
    """

    alpha: float
    gamma: float
    theta_max: float
    grid_step: float = DEFAULT_GRID_STEP
    refine_tol: float = DEFAULT_REFINE_TOL

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise ValueError("alpha must be positive")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must be in (0,1), got {self.gamma!r}")
        if not (self.theta_max > 0.0):
            raise ValueError("theta_max must be positive")
        if not (0.0 < self.grid_step < 0.5):
            raise ValueError(f"grid_step must be in (0, 1/2), got {self.grid_step!r}")
        if not (0.0 < self.refine_tol <= self.grid_step):
            raise ValueError("refine_tol must be in (0, grid_step]")

    @classmethod
    def for_dimension(cls, N: int, alpha: float, gamma: float) -> "LCDParams":
        """Default ceiling 8*sqrt(N), the scale past which generic vectors
        stop being interesting denominators."""
        return cls(alpha=alpha, gamma=gamma, theta_max=8.0 * math.sqrt(N))


@dataclass(frozen=True)
class LCDResult:
    """status 'found' (value/witness meaningful) or 'exceeds_ceiling'."""

    status: str
    value: float
    witness_theta: float
    witness_dist: float

    def __post_init__(self):
        if self.status not in ("found", "exceeds_ceiling"):
            raise ValueError(f"bad status {self.status!r}")

    @property
    def found(self) -> bool:
        return self.status == "found"


def _lattice_distance(theta: float, v: np.ndarray) -> float:
    x = theta * v
    return float(np.linalg.norm(x - np.rint(x)))


def _satisfies(theta: float, v: np.ndarray, norm_v: float, p: LCDParams) -> bool:
    return _lattice_distance(theta, v) < min(p.gamma * theta * norm_v, p.alpha)


def lcd(v, params: LCDParams) -> LCDResult:
    """Least common denominator of a unit vector by grid scan + bisection.

    Scans theta = grid_step, 2*grid_step, ... up to theta_max; on the first
    grid hit, bisects between the last miss and the hit down to refine_tol.
    The returned value satisfies the defining inequality (witness fields
    carry theta and the achieved lattice distance); no grid theta below it
    does.
    """
    v = _unit_vector(v)
    norm_v = float(np.linalg.norm(v))
    steps = int(math.floor(params.theta_max / params.grid_step))
    if steps < 1:
        return LCDResult("exceeds_ceiling", math.nan, math.nan, math.nan)

    chunk = max(1, int(400_000 // max(1, v.size)))
    hit_index = -1
    for start in range(1, steps + 1, chunk):
        idx = np.arange(start, min(start + chunk, steps + 1))
        thetas = idx * params.grid_step
        X = thetas[:, None] * v[None, :]
        d = np.linalg.norm(X - np.rint(X), axis=1)
        cap = np.minimum(params.gamma * thetas * norm_v, params.alpha)
        hits = np.nonzero(d < cap)[0]
        if hits.size:
            hit_index = int(idx[hits[0]])
            break
    if hit_index < 0:
        return LCDResult("exceeds_ceiling", math.nan, math.nan, math.nan)

    lo = (hit_index - 1) * params.grid_step  # known miss (or theta=0)
    hi = hit_index * params.grid_step
    while hi - lo > params.refine_tol:
        mid = 0.5 * (lo + hi)
        if _satisfies(mid, v, norm_v, params):
            hi = mid
        else:
            lo = mid
    return LCDResult("found", hi, hi, _lattice_distance(hi, v))


AtomsLike = Union[ScalarDistribution, Sequence[Tuple[float, float]]]


def _as_atoms(dist: AtomsLike) -> Tuple[Tuple[float, float], ...]:
    if isinstance(dist, ScalarDistribution):
        atoms = dist.atom_list
        if atoms is None:
            raise ValueError(f"{dist.kind} has no atom list")
        return atoms
    atoms = tuple((float(v), float(p)) for v, p in dist)
    if not atoms:
        raise ValueError("empty atom list")
    probs = np.array([p for _, p in atoms])
    if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError("atom probabilities must be nonnegative and sum to 1")
    return atoms


def levy_concentration_exact(dist: AtomsLike, r: float) -> float:
    """sup_y P[|X - y| <= r] for an atomic law, exactly.

    The supremum is attained by a closed window [a, a + 2r] whose left edge
    sits on an atom, so scanning atom-anchored windows is exhaustive.
    """
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    atoms = sorted(_as_atoms(dist))
    values = np.array([v for v, _ in atoms])
    prefix = np.concatenate([[0.0], np.cumsum([p for _, p in atoms])])
    best = 0.0
    for i, v in enumerate(values):
        j = int(np.searchsorted(values, v + 2.0 * r, side="right"))
        best = max(best, float(prefix[j] - prefix[i]))
    return min(best, 1.0)


def levy_concentration_empirical(samples, r: float) -> float:
    """Largest fraction of samples inside any closed window of width 2r.

    Computes max_i #{j : s_(i) <= s_(j) <= s_(i) + 2r} / n on the sorted
    sample, which equals the empirical sup exactly (same anchored-window
    argument as the atomic case).
    """
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    s = np.sort(np.asarray(samples, dtype=np.float64))
    if s.size == 0:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(s)):
        raise ValueError("samples must be finite")
    hi = np.searchsorted(s, s + 2.0 * r, side="right")
    counts = hi - np.arange(s.size)
    return float(counts.max()) / float(s.size)


def _membership_params(n: int, D: float, mu: float, gamma: float,
                       lcd_params: Optional[LCDParams]) -> LCDParams:
    base = lcd_params if lcd_params is not None else LCDParams.for_dimension(
        n, alpha=mu * math.sqrt(n), gamma=gamma)
    # the scan has to reach past 2D to decide membership at the right edge
    ceiling = max(base.theta_max, 2.0 * D + 4.0 * base.grid_step)
    return replace(base, alpha=mu * math.sqrt(n), gamma=gamma, theta_max=ceiling)


def level_set_membership(x, D: float, mu: float, gamma: float,
                         lcd_params: Optional[LCDParams] = None) -> bool:
    """Is D <= LCD_{mu*sqrt(n), gamma}(x) <= 2D?  Both boundaries inclusive."""
    if not (D > 0.0):
        raise ValueError(f"D must be positive, got {D!r}")
    x = _unit_vector(x)
    params = _membership_params(x.size, D, mu, gamma, lcd_params)
    res = lcd(x, params)
    if not res.found:
        return False
    return D <= res.value <= 2.0 * D


def restricted_level_set_membership(x, B, D: float, Kprime: float, mu: float,
                                    gamma: float,
                                    lcd_params: Optional[LCDParams] = None) -> bool:
    """Level-set membership plus the image cap |B x| <= 2 * Kprime * sqrt(n)."""
    x = _unit_vector(x)
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[1] != x.size:
        raise ValueError("B must be a matrix with len(x) columns")
    if not (Kprime > 0.0):
        raise ValueError("Kprime must be positive")
    if float(np.linalg.norm(B @ x)) > 2.0 * Kprime * math.sqrt(x.size):
        return False
    return level_set_membership(x, D, mu, gamma, lcd_params)
