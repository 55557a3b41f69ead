"""Maximum-cardinality matching in general graphs.

``edmonds_matching`` is Edmonds' blossom algorithm in the compact
array form (base / parent / match arrays, blossoms contracted implicitly by
relabelling bases), O(V^3).  ``greedy_matching`` is a maximal matching,
``brute_force_matching`` an exhaustive oracle for tiny graphs.
"""

from __future__ import annotations

from collections import deque

__all__ = ["edmonds_matching", "greedy_matching", "brute_force_matching", "BRUTE_FORCE_MAX_V"]

BRUTE_FORCE_MAX_V = 16


def _adjacency(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        if i == j:
            continue
        adj[i].append(j)
        adj[j].append(i)
    return [sorted(set(a)) for a in adj]


def _pairs(match):
    return sorted((i, j) for i, j in enumerate(match) if j > i)


def edmonds_matching(n: int, edges) -> list[tuple[int, int]]:
    """Edges of a maximum matching, each as (i, j) with i < j."""
    adj = _adjacency(n, edges)
    match = [-1] * n
    parent = [-1] * n
    base = list(range(n))

    def lca(a, b):
        seen = [False] * n
        while True:
            a = base[a]
            seen[a] = True
            if match[a] == -1:
                break
            a = parent[match[a]]
        while True:
            b = base[b]
            if seen[b]:
                return b
            b = parent[match[b]]

    def mark_path(v, b, child, in_blossom):
        while base[v] != b:
            in_blossom[base[v]] = in_blossom[base[match[v]]] = True
            parent[v] = child
            child = match[v]
            v = parent[match[v]]

    def find_path(root):
        nonlocal parent, base
        used = [False] * n
        parent = [-1] * n
        base = list(range(n))
        used[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if base[v] == base[u] or match[v] == u:
                    continue
                if u == root or (match[u] != -1 and parent[match[u]] != -1):
                    cur = lca(v, u)
                    in_blossom = [False] * n
                    mark_path(v, cur, u, in_blossom)
                    mark_path(u, cur, v, in_blossom)
                    for i in range(n):
                        if in_blossom[base[i]]:
                            base[i] = cur
                            if not used[i]:
                                used[i] = True
                                queue.append(i)
                elif parent[u] == -1:
                    parent[u] = v
                    if match[u] == -1:
                        return u
                    used[match[u]] = True
                    queue.append(match[u])
        return -1

    # cheap greedy start; augmenting paths finish the job
    for v in range(n):
        if match[v] == -1:
            for u in adj[v]:
                if match[u] == -1:
                    match[u], match[v] = v, u
                    break
    for v in range(n):
        if match[v] != -1:
            continue
        u = find_path(v)
        while u != -1:
            pv = parent[u]
            ppv = match[pv]
            match[u], match[pv] = pv, u
            u = ppv
    return _pairs(match)


def greedy_matching(n: int, edges) -> list[tuple[int, int]]:
    """Maximal matching scanning edges in sorted order; at least half the maximum."""
    used = [False] * n
    out = []
    for i, j in sorted((min(e), max(e)) for e in edges):
        if i != j and not used[i] and not used[j]:
            used[i] = used[j] = True
            out.append((i, j))
    return out


def brute_force_matching(n: int, edges) -> list[tuple[int, int]]:
    """Exhaustive maximum matching by branching on the lowest vertex (n <= 16)."""
    if n > BRUTE_FORCE_MAX_V:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_V} vertices, got {n}")
    adj = _adjacency(n, edges)
    memo = {}

    def best(free):
        if not free:
            return []
        if free in memo:
            return memo[free]
        v = min(free)
        rest = free - {v}
        top = best(rest)  # v unmatched
        for u in adj[v]:
            if u in rest:
                cand = [(v, u)] + best(rest - {u})
                if len(cand) > len(top):
                    top = cand
        memo[free] = top
        return top

    return sorted(best(frozenset(range(n))))
