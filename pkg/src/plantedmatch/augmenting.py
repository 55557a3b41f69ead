"""Augmenting cycles, the graph of augmenting 2-cycles, and its edge probability.

All statistics are in the aligned frame where the planted matching is the
identity: ``w[i, j] = <x_i, x_j + z_j>`` (see ``model.aligned_inner_products``).
A directed cycle ``(i_1, ..., i_t)`` is augmenting when
``sum_k w[i_k, i_{k+1}] >= sum_k w[i_k, i_k]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from .blossom import edmonds_matching, greedy_matching
from .lap import mle
from .model import Instance, PermutationMap, aligned_inner_products, error_report
from .theory import S

__all__ = [
    "CycleWitness",
    "AugGraph",
    "MatchingResult",
    "LowerBoundReport",
    "EdgeProbabilityEstimate",
    "is_augmenting",
    "enumerate_augmenting_cycles",
    "build_aug_graph",
    "max_matching",
    "lower_bound_errors",
    "error_cycles",
    "estimate_edge_probability",
    "subgraph_bound",
    "path_cycle_frequency",
    "edge_correlation",
    "EXACT_MATCHING_MAX_V",
]

EXACT_MATCHING_MAX_V = 200
ENUM_MAX_N = 12
_CHUNK = 200_000


@dataclass(frozen=True)
class CycleWitness:
    vertices: tuple
    margin: float

    @property
    def augmenting(self) -> bool:
        return self.margin >= 0

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class AugGraph:
    n: int
    edges: frozenset  # of (i, j) with i < j

    @property
    def density(self) -> float:
        pairs = self.n * (self.n - 1) // 2
        return len(self.edges) / pairs if pairs else 0.0

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class MatchingResult:
    size: int
    edges: tuple
    mode: str


@dataclass(frozen=True)
class LowerBoundReport:
    M: int
    matching: MatchingResult
    error_count: int
    holds: bool


@dataclass(frozen=True)
class EdgeProbabilityEstimate:
    p: float
    phat: float
    stderr: float  # of p
    phat_stderr: float
    method: str
    trials: int


def is_augmenting(w, cycle) -> CycleWitness:
    w = np.asarray(w)
    verts = tuple(int(v) for v in cycle)
    if len(verts) < 2:
        raise ValueError("a cycle needs at least two vertices")
    if len(set(verts)) != len(verts):
        raise ValueError(f"cycle has repeated vertices: {verts}")
    idx = np.array(verts)
    margin = float(w[idx, np.roll(idx, -1)].sum() - w[idx, idx].sum())
    return CycleWitness(verts, margin)


def enumerate_augmenting_cycles(w, t_max: int | None = None, limit: int | None = None) -> list[CycleWitness]:
    """All augmenting directed cycles of length 2..t_max, each listed once.

    A cycle is written starting at its smallest vertex; both orientations of
    a cycle of length >= 3 are distinct directed cycles and both are tested.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    t_max = n if t_max is None else min(int(t_max), n)
    if n > ENUM_MAX_N and t_max > 3:
        raise ValueError(f"exhaustive enumeration needs n <= {ENUM_MAX_N} or t_max <= 3")
    diag = np.diag(w)
    out: list[CycleWitness] = []
    for t in range(2, t_max + 1):
        tails = np.array(list(itertools.permutations(range(t - 1))), dtype=np.int64).reshape(-1, t - 1)
        for combo in itertools.combinations(range(n), t):
            c = np.array(combo)
            cyc = np.empty((tails.shape[0], t), dtype=np.int64)
            cyc[:, 0] = c[0]
            cyc[:, 1:] = c[1:][tails]
            margin = w[cyc, np.roll(cyc, -1, axis=1)].sum(axis=1) - diag[c].sum()
            for k in np.flatnonzero(margin >= 0):
                out.append(CycleWitness(tuple(int(v) for v in cyc[k]), float(margin[k])))
                if limit is not None and len(out) >= limit:
                    return out
    return out


def build_aug_graph(w) -> AugGraph:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("w must be square")
    diag = np.diag(w)
    gain = w + w.T - diag[:, None] - diag[None, :]
    i, j = np.nonzero(np.triu(gain >= 0, k=1))
    return AugGraph(w.shape[0], frozenset(zip(i.tolist(), j.tolist())))


def max_matching(g: AugGraph, mode: str = "exact") -> MatchingResult:
    if mode == "exact":
        if g.n > EXACT_MATCHING_MAX_V:
            raise ValueError(f"exact matching limited to {EXACT_MATCHING_MAX_V} vertices, got {g.n}")
        edges = edmonds_matching(g.n, g.edge_list())
    elif mode == "greedy":
        edges = greedy_matching(g.n, g.edge_list())
    else:
        raise ValueError(f"mode must be 'exact' or 'greedy', got {mode!r}")
    return MatchingResult(len(edges), tuple(edges), mode)


def error_cycles(estimate: PermutationMap, truth: PermutationMap) -> list[tuple[int, ...]]:
    """Non-trivial cycles of truth^{-1} o estimate, in the aligned frame.

    The union of their vertices is exactly the error set of ``estimate``.
    """
    return truth.inverse().compose(estimate).cycles(include_fixed=False)


def lower_bound_errors(inst: Instance, mode: str | None = None) -> LowerBoundReport:
    """M = largest matching in the augmenting-2-cycle graph, checked against |E| of the MLE."""
    if mode is None:
        mode = "exact" if inst.n <= EXACT_MATCHING_MAX_V else "greedy"
    w = aligned_inner_products(inst)
    match = max_matching(build_aug_graph(w), mode)
    errors = error_report(mle(inst).permutation, inst.planted).error_count
    return LowerBoundReport(match.size, match, errors, errors >= match.size)


# Edge probability p = P[{i, j} in G^aug]


def _stats(values, scale):
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return mean * scale, se * scale


def estimate_edge_probability(
    d: int, sigma2: float, trials: int, seed: int, method: str = "scalar"
) -> EdgeProbabilityEstimate:
    """Monte Carlo estimate of the edge probability p and of p / exp(-(d/2) S(sigma2, 2)).

    Methods:

    ``plain``
        indicator of g >= sqrt(u) with g ~ N(0, sigma2), u ~ chi2(d).
    ``scalar``
        the same representation with g integrated out and u drawn from the
        chi2 law tilted by exp(-u / (2 sigma2)), i.e. Gamma(d/2, 2 / (1 + 1/sigma2)).
        The estimator of p-hat is then the mean of 0.5 erfcx(sqrt(u / (2 sigma2))).
    ``two_point``
        simulate x_1, x_2, z_1, z_2 and test W_12 + W_21 >= W_11 + W_22.
        x_2 - x_1 is drawn from N(0, 2k I), k = sigma2 / (1 + sigma2), and
        z_1 - z_2 is shifted by x_2 - x_1; the likelihood ratio is applied as
        a weight.  Midpoints and z_1 + z_2 keep their true laws.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    log_base = -0.5 * d * S(sigma2, 2)
    base = math.exp(log_base)
    vals = []
    remaining = int(trials)
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        if method == "plain":
            g = math.sqrt(sigma2) * rng.standard_normal(b)
            u = rng.chisquare(d, b)
            vals.append((g >= np.sqrt(u)).astype(float))
        elif method == "scalar":
            u = rng.gamma(d / 2.0, 2.0 / (1.0 + 1.0 / sigma2), b)
            vals.append(0.5 * erfcx(np.sqrt(u / (2.0 * sigma2))))
        elif method == "two_point":
            vals.append(_two_point_weights(rng, d, sigma2, b, log_base))
        else:
            raise ValueError(f"unknown method {method!r}")
    v = np.concatenate(vals)
    if method == "plain":
        p, se = _stats(v, 1.0)
        return EdgeProbabilityEstimate(p, p / base, se, se / base, method, int(trials))
    phat, phat_se = _stats(v, 1.0)
    return EdgeProbabilityEstimate(phat * base, phat, phat_se * base, phat_se, method, int(trials))


def _two_point_weights(rng, d, sigma2, b, log_base):
    """Weighted indicators, already divided by exp(-(d/2) S(sigma2, 2))."""
    k = sigma2 / (1.0 + sigma2)
    mid = math.sqrt(0.5) * rng.standard_normal((b, d))
    delta = math.sqrt(2.0 * k) * rng.standard_normal((b, d))
    zsum = math.sqrt(2.0 * sigma2) * rng.standard_normal((b, d))
    zdiff = math.sqrt(2.0 * sigma2) * rng.standard_normal((b, d)) + delta
    x1, x2 = mid - delta / 2, mid + delta / 2
    z1, z2 = (zsum + zdiff) / 2, (zsum - zdiff) / 2
    y1, y2 = x1 + z1, x2 + z2

    def dot(a, c):
        return np.einsum("ij,ij->i", a, c)

    aug = dot(x1, y2) + dot(x2, y1) >= dot(x1, y1) + dot(x2, y2)
    dd = dot(delta, delta)
    log_w_x = 0.5 * d * math.log(k) + dd * (1.0 / k - 1.0) / 4.0
    log_w_z = (dd - 2.0 * dot(zdiff, delta)) / (4.0 * sigma2)
    return np.where(aug, np.exp(log_w_x + log_w_z - log_base), 0.0)


# Subgraph probabilities


def subgraph_bound(edges, n_vertices: int, d: int, sigma2: float, D=None) -> float:
    """det(I + 2 A - sigma2 A^2)^{-d/2} with A = Delta^T D Delta, for a diagonal D >= 0.

    ``D`` holds one weight per edge; the default 1/(2 sigma2) gives
    exp(-(d/2) S(sigma2, t)) for paths and cycles on t vertices.  Returns inf
    when the Gaussian moment generating function diverges.
    """
    edges = list(edges)
    inc = np.zeros((len(edges), n_vertices))
    for r, (i, j) in enumerate(edges):
        inc[r, i], inc[r, j] = 1.0, -1.0
    dvec = np.full(len(edges), 1.0 / (2.0 * sigma2)) if D is None else np.asarray(D, dtype=float).ravel()
    if dvec.shape != (len(edges),) or np.any(dvec < 0):
        raise ValueError("D must be a non-negative vector with one entry per edge")
    lam = np.linalg.eigvalsh(inc.T @ (dvec[:, None] * inc))
    terms = 1.0 + 2.0 * lam - sigma2 * lam**2
    if np.any(terms <= 0):
        return math.inf
    return math.exp(-0.5 * d * np.log(terms).sum())


def _batch_aug_edges(rng, b, t, d, sigma2, pairs):
    x = rng.standard_normal((b, t, d))
    y = x + math.sqrt(sigma2) * rng.standard_normal((b, t, d))
    w = np.einsum("bid,bjd->bij", x, y)
    diag = np.einsum("bii->bi", w)
    return np.stack([w[:, i, j] + w[:, j, i] >= diag[:, i] + diag[:, j] for i, j in pairs], axis=1)


def path_cycle_frequency(t: int, d: int, sigma2: float, trials: int, seed: int, graph: str = "path"):
    """Empirical P[G subset of G^aug] for G the path or cycle on t fixed vertices.

    Returns (frequency, stderr, bound) with bound = exp(-(d/2) S(sigma2, t)).
    """
    if graph == "path":
        pairs = [(i, i + 1) for i in range(t - 1)]
    elif graph == "cycle" and t >= 3:
        pairs = [(i, (i + 1) % t) for i in range(t)]
    else:
        raise ValueError("graph must be 'path' (t >= 2) or 'cycle' (t >= 3)")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    hits = 0
    remaining = int(trials)
    while remaining > 0:
        b = min(_CHUNK // max(1, t * d), remaining)
        remaining -= b
        hits += int(_batch_aug_edges(rng, b, t, d, sigma2, pairs).all(axis=1).sum())
    freq = hits / trials
    se = math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
    return freq, se, math.exp(-0.5 * d * S(sigma2, t))


def edge_correlation(d: int, sigma2: float, trials: int, seed: int) -> dict:
    """Joint frequency of two augmenting pairs sharing a vertex against the product of marginals."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    both = e1 = e2 = 0
    remaining = int(trials)
    while remaining > 0:
        b = min(_CHUNK // max(1, 3 * d), remaining)
        remaining -= b
        hit = _batch_aug_edges(rng, b, 3, d, sigma2, [(0, 1), (1, 2)])
        e1 += int(hit[:, 0].sum())
        e2 += int(hit[:, 1].sum())
        both += int(hit.all(axis=1).sum())
    p1, p2, pj = e1 / trials, e2 / trials, both / trials
    return {
        "d": d,
        "sigma2": sigma2,
        "trials": int(trials),
        "p_edge": 0.5 * (p1 + p2),
        "p_joint": pj,
        "p_product": p1 * p2,
        "ratio": pj / (p1 * p2) if p1 * p2 > 0 else math.nan,
    }
