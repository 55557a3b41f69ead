"""Closed-form quantities for the Gaussian planted matching problem.

Notation: ``sigma2`` is the noise variance and ``y = 1/sigma2``.  The
periodic function ``f(sigma2, x) = log(1 + sin^2(pi x)/sigma2)`` has integral
``I(sigma2)`` over [0, 1] and Riemann sums ``S(sigma2, t)`` over the nodes
``j/t``, ``j = 1..t-1``.  ``S(sigma2, t)`` is also the log-determinant
``sum_k log(1 + lambda_k/(4 sigma2))`` over the Laplacian spectrum of the
t-cycle, which is how it enters augmenting-cycle probabilities.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "f",
    "I_closed",
    "S",
    "lucas",
    "log_lucas",
    "S_via_lucas",
    "Thresholds",
    "thresholds",
    "cycle_mass_exponent",
    "eta",
    "entropy_H",
    "RateInputs",
    "F_value",
    "sup_F",
    "second_moment_rates",
    "PhatBounds",
    "phat_bounds",
    "TheoryProfile",
    "theory_profile",
    "path_laplacian",
    "cycle_laplacian",
    "path_eigenvalues",
    "cycle_eigenvalues",
    "exp_S_exact",
    "check_S_lower_exact",
    "check_S_upper_exact",
    "check_riemann_convexity_exact",
    "K_RATE",
]

K_RATE = 50.0
PHAT_LOWER_CONST = 1e-3


def _check_sigma2(sigma2):
    s = np.asarray(sigma2, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2!r}")
    return s


def f(sigma2, x):
    """log(1 + sin^2(pi x) / sigma2), vectorized over both arguments."""
    s = _check_sigma2(sigma2)
    out = np.log1p(np.sin(np.pi * np.asarray(x, dtype=float)) ** 2 / s)
    return float(out) if np.ndim(out) == 0 else out


def I_closed(sigma2):
    """Integral of f over one period: 2 log((1 + sqrt(1 + 1/sigma2)) / 2)."""
    s = _check_sigma2(sigma2)
    y = 1.0 / s
    # (1 + sqrt(1+y))/2 = 1 + y / (2 (sqrt(1+y) + 1)); avoids cancellation for small y
    out = 2.0 * np.log1p(y / (2.0 * np.sqrt(1.0 + y) + 2.0))
    return float(out) if np.ndim(out) == 0 else out


def S(sigma2: float, t: int) -> float:
    """Riemann sum of f at the nodes j/t for j = 1..t-1."""
    if int(t) != t or t < 2:
        raise ValueError(f"t must be an integer >= 2, got {t!r}")
    s = float(_check_sigma2(sigma2))
    j = np.arange(1, int(t))
    terms = np.log1p(np.sin(np.pi * j / t) ** 2 / s)
    return float(math.fsum(terms))


def lucas(k: int, x: float, method: str = "auto") -> float:
    """Lucas polynomial L_k(x): L_0 = 2, L_1 = x, L_k = x L_{k-1} + L_{k-2}.

    ``method`` is "recursion", "binet" or "auto" (recursion up to k = 60).
    """
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a non-negative integer, got {k!r}")
    k = int(k)
    if method == "auto":
        method = "recursion" if k <= 60 else "binet"
    if method == "recursion":
        prev, cur = 2.0, float(x)
        if k == 0:
            return prev
        for _ in range(k - 1):
            prev, cur = cur, x * cur + prev
        return cur
    if method == "binet":
        root = math.sqrt(x * x + 4.0)
        alpha, beta = (x + root) / 2.0, (x - root) / 2.0
        return alpha**k + beta**k
    raise ValueError(f"unknown method {method!r}")


def log_lucas(k: int, x: float) -> float:
    """log L_k(x) for x > 0, safe for large k (Binet form in log space)."""
    if x <= 0:
        raise ValueError("log_lucas needs x > 0")
    if k == 0:
        return math.log(2.0)
    a = math.asinh(x / 2.0)  # alpha = e^a, beta = -e^{-a}
    # alpha^k + beta^k = e^{ka} (1 + (-1)^k e^{-2ka})
    return k * a + math.log1p((-1) ** k * math.exp(-2.0 * k * a))


def S_via_lucas(sigma2: float, t: int) -> float:
    """S(sigma2, t) from exp S = (4 sigma2)^{-t} (L_{2t}(2 sigma) - 2), valid for t >= 3.

    With A = asinh(sigma) the Binet form gives L_{2t}(2 sigma) - 2 =
    e^{2tA} (1 - e^{-2tA})^2, and 2A - log(4 sigma2) = I(sigma2).
    """
    if int(t) != t or t < 3:
        raise ValueError(f"the Lucas form of S needs t >= 3, got {t!r}")
    s = float(_check_sigma2(sigma2))
    a = math.asinh(math.sqrt(s))
    return t * float(I_closed(s)) + 2.0 * math.log(-math.expm1(-2.0 * t * a))


@dataclass(frozen=True)
class Thresholds:
    perfect: float
    strong_conjectured: float
    greedy_third: float


def thresholds(n: int, d: int) -> Thresholds:
    """Noise levels 1/(n^{4/d}-1), 1/((2n^{1/d}-1)^2-1) and 1/(n^{2/d}-1)."""
    if n < 2 or d < 1:
        raise ValueError("thresholds need n >= 2 and d >= 1")
    ln = math.log(n)
    u = math.expm1(ln / d)  # n^{1/d} - 1
    return Thresholds(
        perfect=1.0 / math.expm1(4.0 * ln / d),
        strong_conjectured=1.0 / (4.0 * u * (1.0 + u)),
        greedy_third=1.0 / math.expm1(2.0 * ln / d),
    )


def cycle_mass_exponent(n: int, d: int, sigma2: float, t: int) -> float:
    """c(t) = t - d S(sigma2, t) / (2 log n)."""
    if n < 2:
        raise ValueError("cycle_mass_exponent needs n >= 2")
    return t - d * S(sigma2, t) / (2.0 * math.log(n))


def eta(sigma2: float) -> tuple[float, float, float]:
    """(eta_1, eta_2, eta_3) from their closed forms in y = 1/sigma2."""
    s = float(_check_sigma2(sigma2))
    y = 1.0 / s
    root = math.sqrt(1.0 + y)
    eta1 = 0.5 * (math.log1p(y) - math.log1p(y / 2.0))
    eta2 = math.log1p(y) - math.log1p(0.75 * y)
    # 2 root / (1 + root) = 1 + (root - 1)/(root + 1) = 1 + y / (root + 1)^2
    eta3 = math.log1p(y / (root + 1.0) ** 2)
    return eta1, eta2, eta3


def entropy_H(*args: float) -> float:
    """-sum x_i log x_i - (1 - sum x_i) log(1 - sum x_i), with 0 log 0 = 0."""
    xs = np.asarray(args, dtype=float).ravel()
    if np.any(xs < 0):
        raise ValueError("entropy arguments must be non-negative")
    total = float(xs.sum())
    if total > 1.0 + 1e-12:
        raise ValueError(f"entropy arguments sum to {total} > 1")
    rest = max(0.0, 1.0 - total)
    vals = np.append(xs, rest)
    vals = vals[vals > 0]
    return float(-(vals * np.log(vals)).sum())


@dataclass(frozen=True)
class RateInputs:
    abar: float = 0.0
    bbar: float = 0.0
    cbar: float = 0.0
    jbar: float = 0.0
    kbar: float = 0.0
    lbar: float = 0.0

    def __post_init__(self):
        v = self.as_array()
        if np.any(v < 0):
            raise ValueError("rate inputs must be non-negative")
        if _constraint(v) > 1.0 + 1e-12:
            raise ValueError("rate inputs violate 2a + b + 2c + j + k + l <= 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.abar, self.bbar, self.cbar, self.jbar, self.kbar, self.lbar])


_CONSTRAINT_W = np.array([2.0, 1.0, 2.0, 1.0, 1.0, 1.0])


def _constraint(v):
    return np.asarray(v) @ _CONSTRAINT_W


def _rate_coeffs(r1: float, r2: float, form: str) -> np.ndarray:
    """Linear coefficients of (a, b, c, j, k, l) in F."""
    if form == "statement":
        return np.full(6, max(r1, r2))
    if form == "proof":
        return np.array([r2, r2, r2, r1, r2, max(r2, 0.5 * (r1 + r2))])
    raise ValueError(f"form must be 'statement' or 'proof', got {form!r}")


def _F_batch(v: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """F on rows v = (a, b, c, j, k, l); H has the arguments (a, a, b, c, c, j, k, l)."""
    v = np.atleast_2d(v)
    rest = np.clip(1.0 - v @ _CONSTRAINT_W, 0.0, None)

    def xlogx(z):
        return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)

    h = -(xlogx(v) @ _CONSTRAINT_W) - xlogx(rest)
    return 7.0 * h + v @ coeffs


def F_value(x: RateInputs, r1: float, r2: float, form: str = "statement") -> float:
    return float(_F_batch(x.as_array(), _rate_coeffs(r1, r2, form))[0])


def _simplex_grid(steps: int) -> np.ndarray:
    """Integer points of {2a + b + 2c + j + k + l <= steps}, scaled by 1/steps."""
    pts = []
    for a in range(steps // 2 + 1):
        for c in range((steps - 2 * a) // 2 + 1):
            left = steps - 2 * a - 2 * c
            for b, j, k in itertools.product(range(left + 1), repeat=3):
                rem = left - b - j - k
                if rem < 0:
                    continue
                for l in range(rem + 1):
                    pts.append((a, b, c, j, k, l))
    return np.array(pts, dtype=float) / steps


_GRID_CACHE: dict[int, np.ndarray] = {}


def sup_F(r1: float, r2: float, form: str = "statement", steps: int = 20, rounds: int = 3):
    """Supremum of F over the constraint set, and a maximizer as RateInputs.

    A lattice with ``steps`` points per axis is scanned first; the best
    ``rounds`` lattice points then seed a quasi-Newton search in an
    unconstrained parametrization of the interior of the set.
    """
    coeffs = _rate_coeffs(r1, r2, form)
    if steps not in _GRID_CACHE:
        _GRID_CACHE[steps] = _simplex_grid(steps)
    grid = _GRID_CACHE[steps]
    vals = _F_batch(grid, coeffs)
    best_val = float(vals.max())
    best_pt = grid[int(vals.argmax())]

    def unpack(theta):
        e = np.exp(np.clip(theta, -700, 50))
        return e / (1.0 + e @ _CONSTRAINT_W)

    def neg(theta):
        return -float(_F_batch(unpack(theta), coeffs)[0])

    for idx in np.argsort(vals)[::-1][:rounds]:
        start = np.clip(grid[idx], 1e-6, None)
        slack = max(1.0 - _constraint(start), 1e-6)
        res = minimize(neg, np.log(start / slack), method="BFGS")
        if -res.fun > best_val:
            best_val, best_pt = -float(res.fun), unpack(res.x)
    return best_val, RateInputs(*np.clip(best_pt, 0.0, None).tolist())


def second_moment_rates(n: int, d: int, sigma2: float, r: int, m: float, p: float, form: str = "statement"):
    """(R_1, R_2, sup F) with K = 50 and n' = floor(n / r)."""
    if not p > 0 or p > 1:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")
    if r < 1 or m <= 0:
        raise ValueError("r must be >= 1 and m > 0")
    nprime = n // r
    if nprime < 1:
        raise ValueError("n // r must be positive")
    r1 = K_RATE + math.log(nprime**2 / (p * n**2 * m))
    log_plus = max(0.0, math.log(d / (1.0 + sigma2)))
    r2 = K_RATE + d * (S(sigma2, 2) - float(I_closed(sigma2))) + 4.0 * log_plus - 2.0 * math.log(r)
    return r1, r2, sup_F(r1, r2, form)[0]


@dataclass(frozen=True)
class PhatBounds:
    lower: float
    upper: float
    guaranteed: bool  # False outside sigma2 <= d/40


def phat_bounds(d: int, sigma2: float) -> PhatBounds:
    if d < 1:
        raise ValueError("d must be >= 1")
    _check_sigma2(sigma2)
    lower = PHAT_LOWER_CONST * math.sqrt((1.0 + sigma2) / d)
    return PhatBounds(lower, 1.0, sigma2 <= d / 40.0)


@dataclass(frozen=True)
class TheoryProfile:
    n: int
    d: int
    sigma2: float
    I: float
    S_table: dict = field(default_factory=dict)
    thresholds: Thresholds | None = None
    c_curve: dict = field(default_factory=dict)
    eta: tuple = ()
    phat_bounds: PhatBounds | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["S_table"] = {str(k): v for k, v in self.S_table.items()}
        out["c_curve"] = {str(k): v for k, v in self.c_curve.items()}
        out["eta"] = list(self.eta)
        return out


def theory_profile(n: int, d: int, sigma2: float, t_max: int = 20, t_min: int = 2) -> TheoryProfile:
    ts = range(max(2, t_min), t_max + 1)
    s_table = {t: S(sigma2, t) for t in ts}
    ln = math.log(n)
    return TheoryProfile(
        n=n,
        d=d,
        sigma2=sigma2,
        I=float(I_closed(sigma2)),
        S_table=s_table,
        thresholds=thresholds(n, d),
        c_curve={t: t - d * v / (2.0 * ln) for t, v in s_table.items()},
        eta=eta(sigma2),
        phat_bounds=phat_bounds(d, sigma2),
    )


# Laplacians of the path and cycle graphs


def path_laplacian(t: int) -> np.ndarray:
    lap = np.zeros((t, t))
    for i in range(t - 1):
        lap[i, i] += 1
        lap[i + 1, i + 1] += 1
        lap[i, i + 1] -= 1
        lap[i + 1, i] -= 1
    return lap


def cycle_laplacian(t: int) -> np.ndarray:
    """Laplacian of C_t; C_2 is the doubled edge, so its spectrum is {0, 4}."""
    lap = np.zeros((t, t))
    for i in range(t):
        k = (i + 1) % t
        lap[i, i] += 1
        lap[k, k] += 1
        lap[i, k] -= 1
        lap[k, i] -= 1
    return lap


def path_eigenvalues(t: int) -> np.ndarray:
    return 2.0 * (1.0 - np.cos(np.pi * np.arange(t) / t))


def cycle_eigenvalues(t: int) -> np.ndarray:
    return 4.0 * np.sin(np.pi * np.arange(t) / t) ** 2


# Exact rational checks of the Riemann-sum inequalities.
#
# For rational s = sigma2, exp S(s, t) = det(4s I + L_{C_t}) / (4s)^t is
# rational, and exp I(s) = ((1 + sqrt(r))/2)^2 with r = 1 + 1/s.  Comparisons
# against powers of exp I are done in Q(sqrt r) by sign analysis and squaring,
# so the strict inequalities are decided without rounding.


def exp_S_exact(s, t: int) -> Fraction:
    """exp S(s, t) for rational s, by exact elimination on the cyclic tridiagonal matrix."""
    s = Fraction(s)
    if s <= 0 or t < 3:
        raise ValueError("exp_S_exact needs s > 0 and t >= 3")
    a = 4 * s + 2
    # pivot row i after elimination: diagonal dg, column i+1 entry u, column t-1 entry r
    dg, u, r = a, Fraction(-1), Fraction(-1)
    # last row: entry in the current pivot column, and its diagonal entry
    low, corner = Fraction(-1), a
    det = Fraction(1)
    for i in range(t - 2):
        nxt_is_last_pivot = i + 1 == t - 2
        m = low / dg
        corner -= m * r
        low = (-1 if nxt_is_last_pivot else 0) - m * u
        mu = -1 / dg
        det *= dg
        dg = a - mu * u
        # the -1 right of row t-2's diagonal sits in column t-1
        r = (-1 if nxt_is_last_pivot else 0) - mu * r
        u = Fraction(0) if nxt_is_last_pivot else Fraction(-1)
    corner -= low / dg * r
    det *= dg * corner
    return det / (4 * s) ** t


def _pow_quadratic(p, q, r, k):
    """(p + q sqrt r)^k as (P, Q) with P + Q sqrt r."""
    rp, rq = Fraction(1), Fraction(0)
    bp, bq = Fraction(p), Fraction(q)
    while k:
        if k & 1:
            rp, rq = rp * bp + rq * bq * r, rp * bq + rq * bp
        bp, bq = bp * bp + bq * bq * r, 2 * bp * bq
        k >>= 1
    return rp, rq


def _gt_sqrt(x, q, r) -> bool:
    """x > q sqrt(r) for rationals x, q >= 0, r > 0."""
    if x <= 0:
        return False
    return x * x > q * q * r


def _lt_sqrt(x, q, r) -> bool:
    """x < q sqrt(r) for rationals x, q > 0, r > 0."""
    if x < 0:
        return True
    return x * x < q * q * r


def _exp_S_table(s, t_max):
    """exp S(s, t) for t = 2..t_max.

    The cyclic tridiagonal determinant equals tr(T^t) - 2 with transfer
    matrix T = [[a, -1], [1, 0]], a = 4s + 2, and tr(T^t) = V_t obeys
    V_t = a V_{t-1} - V_{t-2}, V_0 = 2, V_1 = a.
    """
    s = Fraction(s)
    a = 4 * s + 2
    out = {2: 1 + 1 / s}
    v_prev, v = Fraction(2), a
    scale = 4 * s
    for t in range(2, t_max + 1):
        v_prev, v = v, a * v - v_prev
        if t >= 3:
            out[t] = (v - 2) / scale**t
    return out


def check_S_lower_exact(s, t_max: int = 200, table=None) -> bool:
    """S(s,t) - S(s,t-1) strictly decreasing in t and strictly above I(s), for t = 3..t_max."""
    s = Fraction(s)
    r = 1 + 1 / s
    e = table or _exp_S_table(s, t_max)
    ok = True
    for t in range(3, t_max + 1):
        q = e[t] / e[t - 1]
        # q > ((1 + sqrt r)/2)^2  <=>  4q - 1 - r > 2 sqrt r
        ok &= _gt_sqrt(4 * q - 1 - r, Fraction(2), r)
        if t + 1 <= t_max:
            ok &= e[t + 1] * e[t - 1] < e[t] * e[t]
    return bool(ok)


def check_S_upper_exact(s, t_max: int = 200, table=None) -> bool:
    """S(s, t) < t I(s) for t = 2..t_max."""
    s = Fraction(s)
    r = 1 + 1 / s
    e = table or _exp_S_table(s, t_max)
    ok = True
    for t in range(2, t_max + 1):
        p, q = _pow_quadratic(1, 1, r, 2 * t)
        ok &= _lt_sqrt(e[t] * 4**t - p, q, r)
    return bool(ok)


def check_riemann_convexity_exact(s, t0s=(2, 3, 4), t_max: int = 200, table=None) -> bool:
    """S(s, t) > S(s, t0) + (t - t0) I(s) for t0 < t <= t_max."""
    s = Fraction(s)
    r = 1 + 1 / s
    e = table or _exp_S_table(s, t_max)
    ok = True
    for t0 in t0s:
        for t in range(t0 + 1, t_max + 1):
            p, q = _pow_quadratic(1, 1, r, 2 * (t - t0))
            ok &= _gt_sqrt(e[t] / e[t0] * 4 ** (t - t0) - p, q, r)
    return bool(ok)
