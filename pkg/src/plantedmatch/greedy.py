"""Improper greedy estimators: each x_i picks its nearest y (or the y of largest
inner product) independently, so a y may be picked twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import Instance, cost_matrices

__all__ = [
    "GreedyReport",
    "greedy_distance",
    "greedy_inner_product",
    "f_ratio_cdf",
    "regularized_beta",
    "on_convex_hull",
    "predicted_thresholds",
]


@dataclass(frozen=True)
class GreedyReport:
    variant: str
    error_set: frozenset
    error_count: int
    pair_count: int | None = None  # |E~dist|, distance variant only
    predicted_pair_prob: float | None = None


def greedy_distance(inst: Instance) -> GreedyReport:
    w0 = cost_matrices(inst).w0
    n = inst.n
    truth = inst.planted.image
    pick = np.argmin(w0, axis=1)  # first index on ties
    wrong = np.flatnonzero(pick != truth)
    own = w0[np.arange(n), truth]
    pairs = int(np.count_nonzero(own[:, None] > w0))
    pred = f_ratio_cdf(inst.d, inst.sigma2 / (2.0 + inst.sigma2)) if inst.sigma2 > 0 else 0.0
    return GreedyReport("distance", frozenset(wrong.tolist()), int(wrong.size), pairs, pred)


def greedy_inner_product(inst: Instance) -> GreedyReport:
    w = cost_matrices(inst).w
    pick = np.argmax(w, axis=1)
    wrong = np.flatnonzero(pick != inst.planted.image)
    return GreedyReport("inner_product", frozenset(wrong.tolist()), int(wrong.size))


def _betacf(a, b, x, max_iter=10_000, eps=1e-16):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    dd = 1.0 - qab * x / qap
    dd = 1.0 / (dd if abs(dd) > tiny else tiny)
    h = dd
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        dd = 1.0 + aa * dd
        dd = 1.0 / (dd if abs(dd) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= dd * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        dd = 1.0 + aa * dd
        dd = 1.0 / (dd if abs(dd) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_ratio_cdf(d: int, x: float) -> float:
    """P[A / B < x] for independent A, B ~ chi2(d): I_{x/(1+x)}(d/2, d/2)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if math.isinf(x):
        return 1.0
    return regularized_beta(x / (1.0 + x), d / 2.0, d / 2.0)


def on_convex_hull(points, k: int) -> bool:
    """True when points[k] is not a convex combination of the other points."""
    pts = np.asarray(points, dtype=float)
    others = np.delete(pts, k, axis=0)
    m = others.shape[0]
    if m == 0:
        return True
    a_eq = np.vstack([others.T, np.ones((1, m))])
    b_eq = np.append(pts[k], 1.0)
    res = linprog(np.zeros(m), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 2  # infeasible


def predicted_thresholds(n: int, d: int) -> dict:
    """High-dimensional greedy predictions, as multiples of d / log n (annotations only)."""
    base = d / math.log(n)
    return {"quarter": 0.25 * base, "half": 0.5 * base, "eighth": 0.125 * base}
