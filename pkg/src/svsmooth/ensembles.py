"""Seeded sampling of scalar laws, random matrices, and random vectors.

Substreams are counter-based: a 128-bit Philox key is derived once from the
master seed (SHA-256), and trial t owns the counter range
[t * 2**128, (t+1) * 2**128).  A trial's draws therefore never depend on
execution order, threading, or how trials are split across workers.

Gaussian variates use the inverse CDF applied to centered 53-bit uniforms,
u = (k + 1/2) * 2**-53, so one build produces bit-identical streams run to
run.  Bit equality across platforms is promised only for the discrete kinds;
the continuous kinds depend on the platform's libm through scipy.
"""

from __future__ import annotations

import ast
import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

__all__ = [
    "ScalarDistribution",
    "EnsembleSpec",
    "ShiftMatrix",
    "derive_substream",
    "substream_generator",
    "trial_generator",
    "sample_matrix",
    "sample_vector",
    "parse_distribution",
]

_MASK64 = (1 << 64) - 1
_PROB_ATOL = 1e-12
_MEAN_ATOL = 1e-12
_VAR_RTOL = 1e-9

_BUILTIN_VARIANCE = {
    "gaussian": 1.0,
    "rademacher": 1.0,
    "lazy_rademacher": 0.5,
    "uniform_pm": 1.0,
}

_BUILTIN_ATOMS = {
    "rademacher": ((-1.0, 0.5), (1.0, 0.5)),
    "lazy_rademacher": ((-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)),
}


@dataclass(frozen=True)
class ScalarDistribution:
    """A mean-zero scalar law with its variance declared up front.

    kind is one of 'gaussian', 'rademacher', 'lazy_rademacher' (0 w.p. 1/2,
    +-1 w.p. 1/4 each), 'uniform_pm' (uniform on [-sqrt(3), sqrt(3)], unit
    variance), or 'discrete' with an explicit atom list.  Atom probabilities
    must sum to 1 and the mean must vanish; both are checked at construction
    so an invalid law cannot be sampled from.
    """

    kind: str
    variance: float
    atoms: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.kind in _BUILTIN_VARIANCE:
            if self.atoms is not None:
                raise ValueError(f"{self.kind} takes no atom list")
            expected = _BUILTIN_VARIANCE[self.kind]
            if abs(self.variance - expected) > _VAR_RTOL:
                raise ValueError(
                    f"{self.kind} has variance {expected}, got {self.variance}"
                )
            return
        if self.kind != "discrete":
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not self.atoms:
            raise ValueError("discrete law needs a nonempty atom list")
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        probs = np.array([p for _, p in atoms])
        values = np.array([v for v, _ in atoms])
        if np.any(probs < 0.0):
            raise ValueError("negative atom probability")
        if abs(probs.sum() - 1.0) > _PROB_ATOL:
            raise ValueError(
                f"invalid distribution: probabilities sum to {probs.sum()!r}, not 1"
            )
        if len(set(values.tolist())) != len(values):
            raise ValueError("duplicate atom values")
        mean = float(probs @ values)
        if abs(mean) > _MEAN_ATOL:
            raise ValueError(f"atom list has mean {mean!r}, must be 0")
        var = float(probs @ values**2)
        if abs(var - self.variance) > _VAR_RTOL * max(1.0, var):
            raise ValueError(
                f"declared variance {self.variance!r} != atom variance {var!r}"
            )

    @classmethod
    def gaussian(cls) -> "ScalarDistribution":
        return cls("gaussian", 1.0)

    @classmethod
    def rademacher(cls) -> "ScalarDistribution":
        return cls("rademacher", 1.0)

    @classmethod
    def lazy_rademacher(cls) -> "ScalarDistribution":
        return cls("lazy_rademacher", 0.5)

    @classmethod
    def uniform_pm(cls) -> "ScalarDistribution":
        return cls("uniform_pm", 1.0)

    @classmethod
    def discrete(cls, atoms: Sequence[Tuple[float, float]]) -> "ScalarDistribution":
        atoms = tuple((float(v), float(p)) for v, p in atoms)
        var = sum(p * v * v for v, p in atoms)
        return cls("discrete", var, atoms)

    @property
    def atom_list(self) -> Optional[Tuple[Tuple[float, float], ...]]:
        """Atoms of the law, or None for the continuous kinds."""
        if self.kind == "discrete":
            return self.atoms
        return _BUILTIN_ATOMS.get(self.kind)

    @property
    def is_discrete(self) -> bool:
        return self.atom_list is not None

    @property
    def is_integer_valued(self) -> bool:
        atoms = self.atom_list
        if atoms is None:
            return False
        return all(float(v).is_integer() for v, _ in atoms)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` iid variates as float64, consuming the stream in order."""
        if self.kind == "gaussian":
            k = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
            u = (k + 0.5) * 2.0**-53
            return ndtri(u)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        if self.kind == "lazy_rademacher":
            k = rng.integers(0, 4, size=size)
            return (k == 2).astype(np.float64) - (k == 3)
        if self.kind == "uniform_pm":
            return math.sqrt(3.0) * (2.0 * rng.random(size) - 1.0)
        values = np.array([v for v, _ in self.atoms])
        cum = np.cumsum([p for _, p in self.atoms])
        idx = np.searchsorted(cum, rng.random(size), side="right")
        return values[np.minimum(idx, len(values) - 1)]

    def describe(self) -> str:
        """Canonical config-syntax name; parse_distribution round-trips it."""
        if self.kind != "discrete":
            return self.kind
        body = ",".join(f"({v!r},{p!r})" for v, p in self.atoms)
        return f"discrete:[{body}]"


def parse_distribution(text: str) -> ScalarDistribution:
    """Parse config syntax: gaussian | rademacher | lazy_rademacher |
    uniform_pm | discrete:[(v,p),...]."""
    text = text.strip()
    if text in _BUILTIN_VARIANCE:
        return ScalarDistribution(text, _BUILTIN_VARIANCE[text])
    if text.startswith("discrete:"):
        try:
            raw = ast.literal_eval(text[len("discrete:"):])
            atoms = [(float(v), float(p)) for v, p in raw]
        except (ValueError, SyntaxError, TypeError) as exc:
            raise ValueError(f"cannot parse atom list in {text!r}") from exc
        return ScalarDistribution.discrete(atoms)
    raise ValueError(f"unknown distribution {text!r}")


@dataclass(frozen=True)
class EnsembleSpec:
    """Square random-matrix ensemble: dimension, entry law, master seed."""

    n: int
    distribution: ScalarDistribution
    master_seed: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.master_seed, int):
            raise ValueError("master_seed must be an integer")


class ShiftMatrix:
    """Deterministic shift added to the random matrix.

    Stored either as a diagonal (the common case here) or as a dense array.
    """

    def __init__(self, kind: str, data: np.ndarray):
        if kind not in ("diagonal", "dense"):
            raise ValueError(f"unknown shift kind {kind!r}")
        data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise ValueError("shift has non-finite entries")
        if kind == "diagonal":
            if data.ndim != 1 or data.size < 1:
                raise ValueError("diagonal shift needs a 1-D value array")
            n = data.shape[0]
        else:
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ValueError("dense shift must be square")
            n = data.shape[0]
        self.kind = kind
        self.data = data
        self.n = n

    @classmethod
    def from_diagonal(cls, values) -> "ShiftMatrix":
        return cls("diagonal", np.asarray(values, dtype=np.float64))

    @classmethod
    def from_dense(cls, matrix) -> "ShiftMatrix":
        return cls("dense", np.asarray(matrix, dtype=np.float64))

    @classmethod
    def zero(cls, n: int) -> "ShiftMatrix":
        return cls("diagonal", np.zeros(n))

    def to_dense(self) -> np.ndarray:
        if self.kind == "diagonal":
            return np.diag(self.data)
        return self.data.copy()

    def describe(self) -> dict:
        if self.kind == "diagonal":
            return {"kind": "diagonal", "n": self.n, "values": self.data.tolist()}
        digest = hashlib.sha256(np.ascontiguousarray(self.data).tobytes()).hexdigest()
        return {"kind": "dense", "n": self.n, "sha256": digest}

    def __repr__(self):
        return f"ShiftMatrix(kind={self.kind!r}, n={self.n})"


def _master_key(master_seed: int) -> int:
    digest = hashlib.sha256(struct.pack("<Q", master_seed & _MASK64)).digest()
    return int.from_bytes(digest[:16], "little")


def derive_substream(master_seed: int, trial_index: int) -> int:
    """Stream seed for one trial: (128-bit key) << 64 | trial_index.

    Pure function of its arguments, injective in trial_index for any fixed
    master seed (the trial index is carried verbatim in the low 64 bits).
    """
    if not isinstance(trial_index, int) or trial_index < 0:
        raise ValueError(f"trial_index must be a nonnegative integer, got {trial_index!r}")
    if trial_index > _MASK64:
        raise ValueError("trial_index does not fit in 64 bits")
    return (_master_key(master_seed) << 64) | trial_index


def substream_generator(stream_seed: int) -> np.random.Generator:
    """Philox generator positioned at the counter block owned by this stream."""
    key = stream_seed >> 64
    trial = stream_seed & _MASK64
    return np.random.Generator(np.random.Philox(key=key, counter=trial << 128))


def trial_generator(spec: EnsembleSpec, trial_index: int) -> np.random.Generator:
    return substream_generator(derive_substream(spec.master_seed, trial_index))


def sample_matrix(spec: EnsembleSpec, trial_index: int) -> np.ndarray:
    """n x n matrix for one trial, entries filled row-major from the stream."""
    rng = trial_generator(spec, trial_index)
    flat = spec.distribution.sample(rng, spec.n * spec.n)
    return flat.reshape(spec.n, spec.n)


def sample_vector(spec: EnsembleSpec, length: int, trial_index: int) -> np.ndarray:
    """First `length` variates of the trial's stream (one row's worth when
    length == n; shares the stream with sample_matrix at the same index)."""
    if length < 1:
        raise ValueError("length must be positive")
    rng = trial_generator(spec, trial_index)
    return spec.distribution.sample(rng, length)
