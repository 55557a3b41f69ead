"""Gaussian planted-matching model: instances, permutations, cost matrices, errors.

Randomness comes from numpy's PCG64 bit generator seeded through a
``SeedSequence``; Gaussian draws use numpy's ziggurat sampler.  An instance is
fully determined by ``(n, d, sigma2, seed, random_planted)`` and is
bit-identical across runs on one platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "PermutationMap",
    "Instance",
    "CostMatrices",
    "ErrorReport",
    "derive_seed",
    "generate_instance",
    "cost_matrices",
    "aligned_inner_products",
    "error_report",
    "instance_to_json",
    "instance_from_json",
    "save_instance",
    "load_instance",
    "dump_matrices",
]

_SEED_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from a master seed and integer keys.

    The derivation depends only on its arguments, so trials can be generated
    in any order or in parallel and still reproduce the same streams.
    """
    ss = np.random.SeedSequence(int(master_seed) & _SEED_MASK, spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


class PermutationMap:
    """A bijection of ``{0, ..., n-1}`` stored as its image array."""

    __slots__ = ("_image",)

    def __init__(self, image):
        arr = np.asarray(image, dtype=np.int64).copy()
        if arr.ndim != 1:
            raise ValueError("permutation image must be one-dimensional")
        n = arr.size
        if n and (arr.min() < 0 or arr.max() >= n or np.bincount(arr, minlength=n).max() != 1):
            raise ValueError("image is not a bijection on {0..n-1}")
        arr.setflags(write=False)
        self._image = arr

    @classmethod
    def identity(cls, n: int) -> PermutationMap:
        return cls(np.arange(n))

    @property
    def image(self) -> np.ndarray:
        return self._image

    @property
    def n(self) -> int:
        return int(self._image.size)

    def __len__(self) -> int:
        return self.n

    def __call__(self, i):
        return self._image[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PermutationMap):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self._image, other._image))

    def __hash__(self) -> int:
        return hash(self._image.tobytes())

    def __repr__(self) -> str:
        return f"PermutationMap({self._image.tolist()})"

    def compose(self, other: PermutationMap) -> PermutationMap:
        """Return ``self ∘ other``, i.e. ``i -> self(other(i))``."""
        if self.n != other.n:
            raise ValueError("permutations act on different sets")
        return PermutationMap(self._image[other._image])

    def then(self, other: PermutationMap) -> PermutationMap:
        """Return ``other ∘ self``: apply ``self`` first, then ``other``."""
        return other.compose(self)

    def inverse(self) -> PermutationMap:
        inv = np.empty_like(self._image)
        inv[self._image] = np.arange(self.n)
        return PermutationMap(inv)

    def fixed_points(self) -> int:
        return int(np.count_nonzero(self._image == np.arange(self.n)))

    def cycles(self, include_fixed: bool = True) -> list[tuple[int, ...]]:
        """Cycle decomposition; each cycle starts at its smallest element."""
        seen = np.zeros(self.n, dtype=bool)
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i)
                i = int(self._image[i])
            if include_fixed or len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def to_list(self) -> list[int]:
        return self._image.tolist()


@dataclass(frozen=True, eq=False)
class Instance:
    """One draw of the planted model.

    ``points_y`` is stored in observed order: ``points_y[planted(i)]`` is the
    perturbed copy of ``points_x[i]`` and ``noise[i]`` is the perturbation.
    """

    n: int
    d: int
    sigma2: float
    seed: int
    points_x: np.ndarray
    points_y: np.ndarray
    planted: PermutationMap
    noise: np.ndarray = field(repr=False)
    random_planted: bool = True

    def __post_init__(self):
        for arr in (self.points_x, self.points_y, self.noise):
            arr.setflags(write=False)

    def params(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "sigma2": self.sigma2,
            "seed": self.seed,
            "random_planted": self.random_planted,
        }


@dataclass(frozen=True)
class CostMatrices:
    w0: np.ndarray  # squared distances ||x_i - y_j||^2
    w: np.ndarray  # inner products <x_i, y_j>


@dataclass(frozen=True)
class ErrorReport:
    error_count: int
    poly_rate: float
    error_indices: frozenset


def _check_params(n, d, sigma2):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if not math.isfinite(sigma2) or sigma2 < 0:
        raise ValueError(f"sigma2 must be a finite non-negative number, got {sigma2!r}")


def generate_instance(n: int, d: int, sigma2: float, seed: int, random_planted: bool = True) -> Instance:
    """Draw x_i ~ N(0, I_d), z_i ~ N(0, sigma2 I_d) and y_{pi*(i)} = x_i + z_i.

    The points and the noise come from one child stream of ``seed`` and the
    hidden permutation from another, so switching ``random_planted`` off
    leaves the geometry untouched.
    """
    _check_params(n, d, sigma2)
    n, d, sigma2 = int(n), int(d), float(sigma2)
    seed = int(seed) & _SEED_MASK
    geom_ss, perm_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.Generator(np.random.PCG64(geom_ss))
    x = rng.standard_normal((n, d))
    z = math.sqrt(sigma2) * rng.standard_normal((n, d))
    if random_planted:
        image = np.random.Generator(np.random.PCG64(perm_ss)).permutation(n)
    else:
        image = np.arange(n)
    y = np.empty_like(x)
    y[image] = x + z
    return Instance(n, d, sigma2, seed, x, y, PermutationMap(image), z, bool(random_planted))


def cost_matrices(inst: Instance) -> CostMatrices:
    x, y = inst.points_x, inst.points_y
    return CostMatrices(w0=cdist(x, y, "sqeuclidean"), w=x @ y.T)


def aligned_inner_products(inst: Instance) -> np.ndarray:
    """Inner products with columns reordered so that the planted matching is the identity.

    Entry ``(i, j)`` is ``<x_i, x_j + z_j>``; augmenting-cycle statistics are
    stated in this frame.
    """
    x = inst.points_x
    return x @ (x + inst.noise).T


def error_report(estimate: PermutationMap, truth: PermutationMap, n: int | None = None) -> ErrorReport:
    if estimate.n != truth.n or (n is not None and estimate.n != n):
        raise ValueError("estimate and truth must be permutations of the same size")
    n = truth.n
    wrong = np.flatnonzero(estimate.image != truth.image)
    count = int(wrong.size)
    rate = math.log(max(1, count)) / math.log(n) if n > 1 else 0.0
    return ErrorReport(count, rate, frozenset(int(i) for i in wrong))


def instance_to_json(inst: Instance) -> str:
    return json.dumps({"kind": "instance", "version": 1, **inst.params()}, sort_keys=True)


def instance_from_json(text: str) -> Instance:
    data = json.loads(text)
    if data.get("kind") != "instance":
        raise ValueError("not an instance document")
    return generate_instance(
        data["n"], data["d"], data["sigma2"], data["seed"], data.get("random_planted", True)
    )


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(instance_to_json(inst) + "\n")


def load_instance(path) -> Instance:
    return instance_from_json(Path(path).read_text())


def dump_matrices(inst: Instance, path) -> None:
    """Write points, planted image and both cost matrices to an ``.npz`` file."""
    cm = cost_matrices(inst)
    np.savez(
        path,
        points_x=inst.points_x,
        points_y=inst.points_y,
        planted=inst.planted.image,
        w0=cm.w0,
        w=cm.w,
    )
