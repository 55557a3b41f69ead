"""Exact linear assignment: shortest augmenting paths with dual variables.

The core loop follows the Jonker-Volgenant scheme without the initialization
heuristics: rows are inserted one at a time and each insertion runs a
Dijkstra-style search for the cheapest augmenting path in reduced costs.
Worst case O(n^3).  The loop is compiled with numba when it is available.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import Instance, PermutationMap, cost_matrices

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = [
    "AssignmentSolution",
    "solve_assignment",
    "mle",
    "brute_force_mle",
    "BRUTE_FORCE_MAX_N",
]

BRUTE_FORCE_MAX_N = 10


@dataclass(frozen=True)
class AssignmentSolution:
    permutation: PermutationMap
    objective: float
    direction: str
    unique: bool | None = None  # None when uniqueness was not examined


@njit(cache=True)
def _sap_minimize(cost):
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    col4row = -np.ones(n, dtype=np.int64)
    row4col = -np.ones(n, dtype=np.int64)
    shortest = np.empty(n)
    path = np.empty(n, dtype=np.int64)
    in_sr = np.zeros(n, dtype=np.bool_)
    in_sc = np.zeros(n, dtype=np.bool_)
    remaining = np.empty(n, dtype=np.int64)

    for cur_row in range(n):
        for j in range(n):
            shortest[j] = np.inf
            path[j] = -1
            in_sr[j] = False
            in_sc[j] = False
            remaining[j] = j
        num_remaining = n
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            in_sr[i] = True
            index = -1
            lowest = np.inf
            for it in range(num_remaining):
                j = remaining[it]
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    path[j] = i
                    shortest[j] = r
                # prefer a free column on ties so the search ends early
                if shortest[j] < lowest or (shortest[j] == lowest and row4col[j] == -1):
                    lowest = shortest[j]
                    index = it
            min_val = lowest
            if min_val == np.inf:
                return col4row, u, v, False
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            in_sc[j] = True
            num_remaining -= 1
            remaining[index] = remaining[num_remaining]

        u[cur_row] += min_val
        for r in range(n):
            if in_sr[r] and r != cur_row:
                u[r] += min_val - shortest[col4row[r]]
        for c in range(n):
            if in_sc[c]:
                v[c] -= min_val - shortest[c]

        j = sink
        while True:
            r = path[j]
            row4col[j] = r
            prev = col4row[r]
            col4row[r] = j
            j = prev
            if r == cur_row:
                break
    return col4row, u, v, True


def _validate(cost) -> np.ndarray:
    arr = np.asarray(cost, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cost matrix has non-finite entries")
    return arr


def _tight_mask(cost, u, v) -> np.ndarray:
    reduced = cost - u[:, None] - v[None, :]
    tol = 1e-10 * max(1.0, float(np.abs(cost).max()))
    return reduced <= tol


def _has_alternative(tight, assignment) -> bool:
    """True when the tight subgraph holds an alternating cycle, i.e. a second optimum."""
    n = tight.shape[0]
    row_of_col = np.empty(n, dtype=np.int64)
    row_of_col[assignment] = np.arange(n)
    # arc i -> k: row i could take the column currently held by row k
    succ = [[int(k) for k in row_of_col[np.flatnonzero(tight[i])] if k != i] for i in range(n)]
    state = [0] * n  # 0 unvisited, 1 on the DFS stack, 2 finished
    for root in range(n):
        if state[root]:
            continue
        state[root] = 1
        stack = [(root, iter(succ[root]))]
        while stack:
            node, it = stack[-1]
            for k in it:
                if state[k] == 1:
                    return True
                if state[k] == 0:
                    state[k] = 1
                    stack.append((k, iter(succ[k])))
                    break
            else:
                state[node] = 2
                stack.pop()
    return False


def _lexicographic_optimum(tight) -> np.ndarray:
    """Lexicographically smallest perfect matching of a bipartite tight graph."""
    n = tight.shape[0]
    allowed = tight.copy()
    result = np.empty(n, dtype=np.int64)
    for i in range(n):
        for j in np.flatnonzero(allowed[i]):
            trial = allowed.copy()
            trial[i, :] = False
            trial[:, j] = False
            trial[i, j] = True
            m = maximum_bipartite_matching(csr_matrix(trial), perm_type="column")
            if np.all(m >= 0):
                allowed = trial
                result[i] = j
                break
        else:  # pragma: no cover - tight graph always has a perfect matching
            raise RuntimeError("tight graph lost its perfect matching")
    return result


def solve_assignment(cost, direction: str = "minimize", check_unique: bool = True) -> AssignmentSolution:
    """Globally optimal permutation for a dense square cost matrix.

    With ``direction="maximize"`` the costs are negated.  When several optima
    exist, the lexicographically smallest permutation among them is returned
    and ``unique`` is False; ties are detected from the optimal duals.
    """
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"direction must be 'minimize' or 'maximize', got {direction!r}")
    arr = _validate(cost)
    n = arr.shape[0]
    if n == 0:
        return AssignmentSolution(PermutationMap([]), 0.0, direction, True)
    work = -arr if direction == "maximize" else arr
    # shift so the reduced costs start near zero; the optimum is unchanged
    work = np.ascontiguousarray(work - work.min())
    col4row, u, v, ok = _sap_minimize(work)
    if not ok:  # pragma: no cover - cannot happen with finite dense input
        raise RuntimeError("assignment infeasible")
    unique = None
    if check_unique:
        tight = _tight_mask(work, u, v)
        unique = not _has_alternative(tight, col4row)
        if not unique:
            col4row = _lexicographic_optimum(tight)
    objective = float(arr[np.arange(n), col4row].sum())
    return AssignmentSolution(PermutationMap(col4row), objective, direction, unique)


def brute_force_mle(cost, direction: str = "minimize") -> AssignmentSolution:
    """Exhaustive optimum over all n! permutations (n <= 10).

    Permutations are visited in lexicographic order and only strict
    improvements replace the incumbent, so ties resolve to the
    lexicographically smallest optimum.
    """
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"direction must be 'minimize' or 'maximize', got {direction!r}")
    arr = _validate(cost)
    n = arr.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    sign = -1.0 if direction == "maximize" else 1.0
    rows = np.arange(n)
    scale = max(1.0, float(np.abs(arr).max()))
    best, best_val, vals_seen = None, math.inf, []
    perms_iter = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms_iter, 200_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, n)
        vals = sign * arr[rows, chunk].sum(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best, best_val = chunk[k].copy(), float(vals[k])
        vals_seen.append(np.sort(vals)[:2])
    lowest = np.sort(np.concatenate(vals_seen))
    unique = lowest.size < 2 or lowest[1] > best_val + 1e-9 * scale
    return AssignmentSolution(PermutationMap(best), float(arr[rows, best].sum()), direction, bool(unique))


def mle(inst: Instance, check_unique: bool = False) -> AssignmentSolution:
    """Maximum-likelihood matching: minimize total squared distance."""
    return solve_assignment(cost_matrices(inst).w0, "minimize", check_unique=check_unique)
