"""Small exact combinatorics: matchings of cycles, Laplacian coefficients, and the
number of cycles in the union of two edge-disjoint perfect matchings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .theory import cycle_laplacian

__all__ = [
    "MatchingTable",
    "CycleCountDistribution",
    "matchings_on_cycle",
    "matchings_on_cycle_brute",
    "matching_polynomial",
    "forest_counts_via_spectrum",
    "charpoly_exact",
    "principal_minor_sums",
    "cycle_count_distribution",
    "mgf_recurrence",
    "mgf_by_counting",
    "disjoint_matching_count",
    "cycle_mgf_bound_check",
    "double_factorial",
    "EXHAUSTIVE_MAX_ELL",
]

EXHAUSTIVE_MAX_ELL = 12
PHI = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class MatchingTable:
    t: int
    counts: tuple  # counts[k] = matchings with k edges on C_t

    def __getitem__(self, k):
        return self.counts[k] if 0 <= k < len(self.counts) else 0


def matchings_on_cycle(t: int) -> MatchingTable:
    """M_{t,k} from M_{t,k} = M_{t-1,k} + M_{t-2,k-1}, starting at C_3 and C_4."""
    if t < 3:
        raise ValueError(f"cycle needs t >= 3, got {t}")
    tables = {3: [1, 3], 4: [1, 4, 2]}
    for s in range(5, t + 1):
        a, b = tables[s - 1], tables[s - 2]
        size = s // 2 + 1
        tables[s] = [
            (a[k] if k < len(a) else 0) + (b[k - 1] if 0 <= k - 1 < len(b) else 0) for k in range(size)
        ]
    return MatchingTable(t, tuple(tables[t]))


def matchings_on_cycle_brute(t: int) -> MatchingTable:
    """Same counts by testing every edge subset of C_t."""
    edges = [(i, (i + 1) % t) for i in range(t)]
    counts = [0] * (t // 2 + 1)
    for mask in range(1 << t):
        chosen = [edges[i] for i in range(t) if mask >> i & 1]
        verts = [v for e in chosen for v in e]
        if len(verts) == len(set(verts)):
            counts[len(chosen)] += 1
    return MatchingTable(t, tuple(counts))


def matching_polynomial(table: MatchingTable, x: float) -> float:
    """sum_k M_{t,k} x^{t-2k}."""
    return float(sum(c * x ** (table.t - 2 * k) for k, c in enumerate(table.counts)))


def charpoly_exact(mat) -> list[int]:
    """Coefficients c_0..c_n of det(x I - A) = sum c_k x^{n-k}, exactly (Faddeev-LeVerrier)."""
    a = [[Fraction(int(v)) for v in row] for row in np.asarray(mat)]
    n = len(a)
    coeffs = [Fraction(1)]
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I ; c_k = -tr(A M_k) / k
        prod = [[sum(a[i][l] * m[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            prod[i][i] += coeffs[-1]
        m = prod
        am_trace = sum(sum(a[i][l] * m[l][i] for l in range(n)) for i in range(n))
        coeffs.append(-am_trace / k)
    if any(c.denominator != 1 for c in coeffs):  # pragma: no cover - integer input
        raise ArithmeticError("characteristic polynomial of an integer matrix must be integral")
    return [int(c) for c in coeffs]


def _det_fraction(rows) -> Fraction:
    a = [list(map(Fraction, r)) for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for j in range(c, n):
                    a[r][j] -= f * a[c][j]
    return det


def principal_minor_sums(mat) -> list[int]:
    """E_k = sum of all k x k principal minors, by direct enumeration of index sets."""
    a = np.asarray(mat).astype(int)
    n = a.shape[0]
    out = [1]
    for k in range(1, n + 1):
        total = Fraction(0)
        for idx in itertools.combinations(range(n), k):
            total += _det_fraction(a[np.ix_(idx, idx)].tolist())
        out.append(int(total))
    return out


def forest_counts_via_spectrum(t: int, exact: bool = False) -> dict:
    """E_k(lambda_1..lambda_t) for the Laplacian spectrum of C_t, k = 0..t.

    The float path expands prod (x + lambda_j) from the numerical eigenvalues
    and rounds, refusing if any coefficient is more than 1e-6 from an integer.
    The exact path reads the coefficients off the integer characteristic
    polynomial.
    """
    if not 3 <= t <= 16:
        raise ValueError(f"t must lie in 3..16, got {t}")
    lap = cycle_laplacian(t)
    if exact:
        c = charpoly_exact(lap)
        return {k: abs(c[k]) if k < t else c[k] * (-1) ** k for k in range(t + 1)}
    lam = np.linalg.eigvalsh(lap)
    poly = np.poly(-lam)  # prod (x + lambda), coefficient k is E_k
    rounded = np.rint(poly)
    if np.max(np.abs(poly - rounded)) >= 1e-6 * max(1.0, np.abs(poly).max()):
        raise ArithmeticError("spectral expansion is not close to integral")
    return {k: int(rounded[k]) for k in range(t + 1)}


# Union of two edge-disjoint perfect matchings


@dataclass(frozen=True)
class CycleCountDistribution:
    ell: int
    pmf: dict  # number of cycles -> probability
    source: str
    trials: int = 0
    exact: dict | None = None  # Fractions, exhaustive mode only

    def mgf(self, a) -> float:
        if self.exact is not None:
            return sum(p * Fraction(a) ** x for x, p in self.exact.items())
        return sum(p * a**x for x, p in self.pmf.items())


def _perfect_matchings(vertices):
    if not vertices:
        yield []
        return
    v, rest = vertices[0], vertices[1:]
    for i, u in enumerate(rest):
        for m in _perfect_matchings(rest[:i] + rest[i + 1 :]):
            yield [(v, u)] + m


def _count_cycles(ell, partner2):
    # Q1 pairs 2i with 2i+1
    seen = [False] * ell
    cycles = 0
    for s in range(ell):
        if seen[s]:
            continue
        cycles += 1
        v = s
        while not seen[v]:
            seen[v] = True
            w = v ^ 1
            seen[w] = True
            v = partner2[w]
    return cycles


def cycle_count_distribution(ell: int, mode: str = "exhaustive", trials: int = 100_000, seed: int = 0):
    """Law of the number of cycles of Q1 u Q2, Q1 = {(0,1), (2,3), ...}, Q2 uniform and disjoint from Q1.

    Sampled mode draws uniform perfect matchings (a random permutation read in
    consecutive pairs) and rejects those sharing an edge with Q1; the
    acceptance rate tends to exp(-1/2).
    """
    if ell % 2 or ell < 4:
        raise ValueError(f"ell must be even and >= 4, got {ell}")
    if mode == "exhaustive":
        if ell > EXHAUSTIVE_MAX_ELL:
            raise ValueError(f"exhaustive mode limited to ell <= {EXHAUSTIVE_MAX_ELL}")
        counts: dict[int, int] = {}
        total = 0
        for m in _perfect_matchings(list(range(ell))):
            if any(u == v ^ 1 for v, u in m):
                continue
            partner = [0] * ell
            for v, u in m:
                partner[v], partner[u] = u, v
            x = _count_cycles(ell, partner)
            counts[x] = counts.get(x, 0) + 1
            total += 1
        exact = {x: Fraction(c, total) for x, c in sorted(counts.items())}
        return CycleCountDistribution(ell, {x: float(p) for x, p in exact.items()}, "exhaustive", total, exact)
    if mode != "sampled":
        raise ValueError(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    counts = {}
    accepted = 0
    while accepted < trials:
        batch = max(1000, 2 * (trials - accepted))
        perms = rng.permuted(np.tile(np.arange(ell), (batch, 1)), axis=1)
        a, b = perms[:, 0::2], perms[:, 1::2]
        ok = ~np.any((a ^ 1) == b, axis=1)
        for row in perms[ok][: trials - accepted]:
            partner = np.empty(ell, dtype=np.int64)
            partner[row[0::2]] = row[1::2]
            partner[row[1::2]] = row[0::2]
            x = _count_cycles(ell, partner.tolist())
            counts[x] = counts.get(x, 0) + 1
            accepted += 1
    pmf = {x: c / trials for x, c in sorted(counts.items())}
    return CycleCountDistribution(ell, pmf, "sampled", int(trials))


def mgf_recurrence(ell: int, a):
    """m_ell = a/(ell-3) m_{ell-4} + (1 - 1/(ell-3)) m_{ell-2}, m_0 = 1, m_2 = 0.

    Exact (Fraction) when ``a`` is an int or Fraction.
    """
    if ell % 2 or ell < 0:
        raise ValueError("ell must be a non-negative even integer")
    exact = isinstance(a, (int, Fraction))
    one = Fraction(1) if exact else 1.0
    m = {0: one, 2: 0 * one}
    for l in range(4, ell + 1, 2):
        m[l] = a * one / (l - 3) * m[l - 4] + (1 - one / (l - 3)) * m[l - 2]
    return m[ell]


def disjoint_matching_count(ell: int) -> int:
    """Perfect matchings of K_ell avoiding a fixed perfect matching: a_h = 2(h-1)(a_{h-1} + a_{h-2}), h = ell/2."""
    if ell % 2 or ell < 0:
        raise ValueError("ell must be a non-negative even integer")
    a = [1, 0]
    for h in range(2, ell // 2 + 1):
        a.append(2 * (h - 1) * (a[h - 1] + a[h - 2]))
    return a[ell // 2]


def mgf_by_counting(ell: int, a):
    """E a^{X_ell} from the weighted count A_h = 2(h-1)(a A_{h-2} + A_{h-1}), A_0 = 1, A_1 = 0.

    Vertex 1's partner j under Q2 has 2(h-1) choices; the cycle through 1
    closes after four vertices exactly when the Q2 partner of 1's Q1
    neighbour is j's Q1 neighbour, leaving h-2 free pairs, and otherwise
    contracts to h-1 pairs.  Dividing by the unweighted count gives the MGF.
    Exact when ``a`` is an int or Fraction.
    """
    if ell % 2 or ell < 4:
        raise ValueError("ell must be even and >= 4")
    exact = isinstance(a, (int, Fraction))
    one = Fraction(1) if exact else 1.0
    weighted = [one, 0 * one]
    for h in range(2, ell // 2 + 1):
        weighted.append(2 * (h - 1) * (a * weighted[h - 2] + weighted[h - 1]))
    return weighted[ell // 2] / disjoint_matching_count(ell)


def double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def cycle_mgf_bound_check(ell: int, a: float, source: str = "recurrence"):
    """(lhs, (phi^2 a)^{ell/4} / (ell/2)!!, ok, in_hypothesis) with in_hypothesis = (a >= ell).

    ``source="recurrence"`` takes lhs from ``mgf_recurrence``;
    ``source="counting"`` takes the true MGF from ``mgf_by_counting``.
    """
    if ell % 2 or ell < 4:
        raise ValueError("ell must be even and >= 4")
    if source == "recurrence":
        lhs = float(mgf_recurrence(ell, a))
    elif source == "counting":
        lhs = float(mgf_by_counting(ell, a))
    else:
        raise ValueError(f"unknown source {source!r}")
    rhs = (PHI**2 * a) ** (ell / 4) / double_factorial(ell // 2)
    return lhs, rhs, lhs <= rhs, a >= ell
