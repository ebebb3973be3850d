"""Lattice point counting, ellipsoid covers by aligned boxes, the quadratic
sublevel-set sandwich, and integer-direction nets for LCD level sets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from svsmooth.arithmetic import LCDParams, level_set_membership
from svsmooth.errors import BudgetExceededError

__all__ = [
    "Parallelepiped",
    "Ellipsoid",
    "SandwichReport",
    "NetResult",
    "count_lattice_points",
    "cover_ellipsoid",
    "cover_audit",
    "sandwich_check",
    "lattice_direction_net",
    "build_sd_net",
    "net_size_bound",
]

_ORTHO_ATOL = 1e-10


def _check_frame(center, axes, lengths, what: str):
    center = np.asarray(center, dtype=np.float64)
    axes = np.asarray(axes, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.float64)
    n = center.size
    if axes.shape != (n, n):
        raise ValueError(f"{what}: axes must be {n} x {n}")
    if lengths.shape != (n,) or np.any(lengths <= 0.0):
        raise ValueError(f"{what}: need {n} positive lengths")
    if not (np.all(np.isfinite(center)) and np.all(np.isfinite(axes))
            and np.all(np.isfinite(lengths))):
        raise ValueError(f"{what}: non-finite data")
    if np.abs(axes.T @ axes - np.eye(n)).max() > _ORTHO_ATOL:
        raise ValueError(f"{what}: axis columns must be orthonormal")
    return center, axes, lengths


@dataclass(frozen=True, eq=False)
class Parallelepiped:
    """Closed box: center + axes @ t with |t_i| <= widths_i / 2; axes columns
    orthonormal."""

    center: np.ndarray
    axes: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        c, a, w = _check_frame(self.center, self.axes, self.widths, "box")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "axes", a)
        object.__setattr__(self, "widths", w)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def circumradius(self) -> float:
        return 0.5 * float(np.linalg.norm(self.widths))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        y = (pts - self.center) @ self.axes
        inside = np.all(np.abs(y) <= self.widths / 2.0, axis=1)
        return inside if np.asarray(points).ndim > 1 else bool(inside[0])


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Closed ellipsoid: sum_i (<x - center, axes_i> / semiaxes_i)^2 <= 1."""

    center: np.ndarray
    axes: np.ndarray
    semiaxes: np.ndarray

    def __post_init__(self):
        c, a, s = _check_frame(self.center, self.axes, self.semiaxes, "ellipsoid")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "axes", a)
        object.__setattr__(self, "semiaxes", s)

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        y = (pts - self.center) @ self.axes / self.semiaxes
        inside = np.sum(y * y, axis=1) <= 1.0
        return inside if np.asarray(points).ndim > 1 else bool(inside[0])


def _mixed_radix_chunks(lo: np.ndarray, hi: np.ndarray,
                        chunk: int = 1_000_000) -> Iterator[np.ndarray]:
    """Integer grid [lo, hi] in contiguous chunks of rows, leading coordinate
    slowest (so the scan is partitionable by leading coordinate)."""
    sizes = (hi - lo + 1).astype(np.int64)
    total = int(np.prod(sizes))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        coords = np.empty((idx.size, sizes.size), dtype=np.int64)
        rem = idx
        for j in range(sizes.size - 1, -1, -1):
            coords[:, j] = lo[j] + rem % sizes[j]
            rem = rem // sizes[j]
        yield coords


def count_lattice_points(box: Parallelepiped, budget: int = 100_000_000) -> int:
    """Exact |Z^n  intersect  box| by scanning the integer bounding grid.

    Feasibility guards: dimension <= 8 and circumradius <= 1e3; the bounding
    grid must hold at most `budget` candidates.
    """
    n = box.dim
    if n > 8:
        raise ValueError(f"dimension {n} > 8; exhaustive count refused")
    if box.circumradius > 1e3:
        raise ValueError("circumradius > 1e3; exhaustive count refused")
    ext = 0.5 * np.abs(box.axes) @ box.widths
    lo = np.ceil(box.center - ext).astype(np.int64)
    hi = np.floor(box.center + ext).astype(np.int64)
    if np.any(hi < lo):
        return 0
    total = int(np.prod((hi - lo + 1).astype(np.float64)))
    if total > budget:
        raise BudgetExceededError(
            f"bounding grid holds {total} candidates (> {budget})")
    count = 0
    for coords in _mixed_radix_chunks(lo, hi):
        count += int(np.count_nonzero(box.contains(coords.astype(np.float64))))
    return count


def cover_ellipsoid(e: Ellipsoid, max_boxes: int = 1_000_000
                    ) -> List[Parallelepiped]:
    """Cover the ellipsoid with ceil(2 sqrt(n))^n aligned boxes of widths
    semiaxes_i / sqrt(n).

    The per-axis grid of m = ceil(2 sqrt(n)) cells of width l_i / sqrt(n)
    spans [-m l_i / (2 sqrt(n)), +m l_i / (2 sqrt(n))] which contains
    [-l_i, l_i] exactly because m >= 2 sqrt(n).  Box count grows like m^n;
    dimensions above 12 are refused outright and `max_boxes` guards the rest.
    """
    n = e.dim
    if n > 12:
        raise ValueError(f"dimension {n} > 12; box count explodes")
    m = math.ceil(2.0 * math.sqrt(n))
    if float(m) ** n > max_boxes:
        raise BudgetExceededError(f"cover needs {m}^{n} boxes (> {max_boxes})")
    widths = e.semiaxes / math.sqrt(n)
    offsets_1d = [(np.arange(m) + 0.5 - m / 2.0) * widths[i] for i in range(n)]
    boxes = []
    for combo in itertools.product(*offsets_1d):
        off = np.array(combo)
        boxes.append(Parallelepiped(e.center + e.axes @ off, e.axes, widths))
    return boxes


def _ellipsoid_points(e: Ellipsoid, count: int, rng: np.random.Generator
                      ) -> np.ndarray:
    n = e.dim
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.random(count) ** (1.0 / n)
    ball = g * radii[:, None]
    return e.center + (ball * e.semiaxes) @ e.axes.T


def cover_audit(e: Ellipsoid, boxes: List[Parallelepiped], samples: int,
                seed: int = 0) -> int:
    """Number of uniformly sampled ellipsoid points not contained in the box
    that the grid structure assigns them (0 for a correct cover).

    Boxes are addressed by their grid cell, which is located in O(1); each
    hit is then verified against that Parallelepiped's own membership test.
    """
    n = e.dim
    m = math.ceil(2.0 * math.sqrt(n))
    if len(boxes) != m**n:
        raise ValueError("box list does not look like cover_ellipsoid output")
    widths = e.semiaxes / math.sqrt(n)
    rng = np.random.default_rng(seed)
    pts = _ellipsoid_points(e, samples, rng)
    y = (pts - e.center) @ e.axes
    cell = np.clip(np.floor(y / widths + m / 2.0).astype(np.int64), 0, m - 1)
    flat = np.ravel_multi_index(cell.T, (m,) * n)
    misses = 0
    for i in range(samples):
        if not boxes[int(flat[i])].contains(pts[i][None, :])[0]:
            misses += 1
    return misses


@dataclass(frozen=True, eq=False)
class SandwichReport:
    ok: bool
    counterexample: Optional[np.ndarray]
    samples: int

    def __bool__(self) -> bool:
        return self.ok


def sandwich_check(J, samples: int = 100_000, seed: int = 0) -> SandwichReport:
    """Sampled containment S_2 subset S_1 subset sqrt(2) S_2 for
    S_1 = {|x| <= 1, |Jx| <= 1} and S_2 = {|x|^2 + |Jx|^2 <= 1},
    over uniform points of the unit ball."""
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2:
        raise ValueError("J must be a matrix")
    n = J.shape[1]
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    X = g * (rng.random(samples) ** (1.0 / n))[:, None]
    r2 = np.sum(X * X, axis=1)
    j2 = np.sum((X @ J.T) ** 2, axis=1)
    in_s2 = r2 + j2 <= 1.0
    in_s1 = (r2 <= 1.0) & (j2 <= 1.0)
    bad = (in_s2 & ~in_s1) | (in_s1 & (r2 + j2 > 2.0))
    idx = np.nonzero(bad)[0]
    if idx.size:
        return SandwichReport(False, X[idx[0]].copy(), samples)
    return SandwichReport(True, None, samples)


# ---------------------------------------------------------------------------
# integer-direction nets for LCD level sets

def _integer_points_in_ball(n: int, radius: float, point_budget: int
                            ) -> np.ndarray:
    lim = int(math.floor(radius))
    cube = float(2 * lim + 1) ** n
    if cube > point_budget:
        raise BudgetExceededError(
            f"enumeration cube holds {cube:.3g} points (> {point_budget})")
    lo = np.full(n, -lim, dtype=np.int64)
    hi = np.full(n, lim, dtype=np.int64)
    keep = []
    r2 = radius * radius
    for coords in _mixed_radix_chunks(lo, hi):
        nrm2 = np.sum(coords * coords, axis=1)
        keep.append(coords[(nrm2 <= r2) & (nrm2 > 0)])
    return np.concatenate(keep)


def lattice_direction_net(n: int, D: float, annulus: bool = False,
                          point_budget: int = 20_000_000) -> np.ndarray:
    """Unit directions p / |p| of nonzero integer points with |p| <= 3D
    (annulus=True drops |p| <= 3D/2), one row per distinct direction.

    Directions are deduplicated through the primitive representative
    p / gcd(p) and returned in its lexicographic order, so the annulus and
    full-ball variants are directly comparable as arrays.
    """
    pts = _integer_points_in_ball(n, 3.0 * D, point_budget)
    if annulus:
        nrm2 = np.sum(pts * pts, axis=1).astype(np.float64)
        pts = pts[4.0 * nrm2 > 9.0 * D * D]
    primitives = set()
    for p in pts:
        g = math.gcd(*(int(abs(c)) for c in p))
        primitives.add(tuple(int(c) // g for c in p))
    ordered = np.array(sorted(primitives), dtype=np.float64)
    return ordered / np.linalg.norm(ordered, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class NetResult:
    net: np.ndarray
    gap_bound: float
    audit_members: int
    audit_max_gap: float


def build_sd_net(n: int, D: float, mu: float, gamma: float,
                 sample_budget: int = 10_000,
                 lcd_params: Optional[LCDParams] = None, seed: int = 0,
                 point_budget: int = 20_000_000) -> NetResult:
    """Net of lattice directions for the level set D <= LCD <= 2D, audited.

    The audit samples integer points with |p| in [D, 2D] (plus small random
    perturbations of their directions), keeps those that pass the level-set
    membership test at (mu, gamma), and records the largest distance from a
    kept member to the net.  That distance should stay below
    2 mu sqrt(n) / D.
    """
    if n > 5 or D > 12.0:
        raise ValueError("enumeration is feasible only for n <= 5 and D <= 12")
    if not (D > 0.0 and mu > 0.0 and 0.0 < gamma < 1.0):
        raise ValueError("need D > 0, mu > 0, gamma in (0,1)")
    net = lattice_direction_net(n, D, annulus=False, point_budget=point_budget)
    rng = np.random.default_rng(seed)
    perturb_scale = 0.3 * min(gamma, mu * math.sqrt(n) / (2.0 * D))
    members = 0
    max_gap = 0.0
    for _ in range(sample_budget):
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        p = np.rint(rng.uniform(D, 2.0 * D) * direction)
        if not p.any():
            continue
        v = p / np.linalg.norm(p)
        if rng.random() < 0.5:
            v = v + perturb_scale * rng.random() * rng.standard_normal(n)
            v /= np.linalg.norm(v)
        if not level_set_membership(v, D, mu, gamma, lcd_params):
            continue
        members += 1
        gap = math.sqrt(max(0.0, 2.0 - 2.0 * float(np.max(net @ v))))
        max_gap = max(max_gap, gap)
    return NetResult(net=net, gap_bound=2.0 * mu * math.sqrt(n) / D,
                     audit_members=members,
                     audit_max_gap=max_gap if members else math.nan)


def net_size_bound(n: int, D: float, mu: float, eta: float,
                   C_lemma: float) -> float:
    """mu^{-(1 - eta/2) n} * D^2 * (C_lemma * D / sqrt(n))^n, computed in
    log space; overflow reports inf."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (D > 0.0 and mu > 0.0 and C_lemma > 0.0):
        raise ValueError("D, mu, C_lemma must be positive")
    log_val = (-(1.0 - eta / 2.0) * n * math.log(mu)
               + 2.0 * math.log(D)
               + n * (math.log(C_lemma * D) - 0.5 * math.log(n)))
    try:
        return math.exp(log_val)
    except OverflowError:
        return math.inf
