"""Online tracking of Brownian particles by iterated MLE matching.

Particles start at X_0 ~ N(0, I_d) and move by X_k = X_{k-1} + sqrt(delta) xi_k.
At each step the unlabeled snapshot X_k is matched to X_{k-1} by the MLE,
and the step matchings are composed to follow every particle.  Row i of
every snapshot is the true particle i, so a particle is tracked correctly
exactly when it is a fixed point of the composed permutation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .lap import solve_assignment
from .model import PermutationMap, derive_seed

__all__ = ["TrackingRun", "TmaxEstimate", "simulate_tracking", "estimate_Tmax", "step_matching", "tracking_csv"]


@dataclass(frozen=True)
class TrackingRun:
    n: int
    d: int
    delta: float
    K: int
    seed: int
    step_perms: np.ndarray = field(repr=False)  # (K, n), row k-1 is the MLE of step k
    fixed_points: np.ndarray = field(repr=False)  # (K+1,), entry 0 is n
    step_errors: np.ndarray = field(repr=False)  # (K+1,), entry 0 is 0
    displacement_var: np.ndarray = field(repr=False)  # (K,), per-step mean squared displacement / d

    def composed_at(self, k: int) -> PermutationMap:
        """pi_k o ... o pi_1: composed(i) is the row where particle i is believed to be at step k."""
        img = np.arange(self.n)
        for row in self.step_perms[:k]:
            img = row[img]
        return PermutationMap(img)

    @property
    def composed(self) -> PermutationMap:
        return self.composed_at(self.K)


@dataclass(frozen=True)
class TmaxEstimate:
    mean: float  # over uncensored trials, nan if all censored
    stderr: float
    censored_fraction: float
    times: tuple  # crossing time per trial, None when censored
    delta: float
    K_cap: int
    restricted_mean: float = math.nan  # censored trials counted at the cap, a lower bound on the mean


def step_matching(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """MLE matching of the rows of ``prev`` to the rows of ``cur`` (squared distances).

    In one dimension the squared-distance optimum is the monotone matching,
    so sorting replaces the assignment solver there.
    """
    if prev.shape[1] == 1:
        out = np.empty(prev.shape[0], dtype=np.int64)
        out[np.argsort(prev[:, 0], kind="stable")] = np.argsort(cur[:, 0], kind="stable")
        return out
    sq_prev = np.einsum("ij,ij->i", prev, prev)
    sq_cur = np.einsum("ij,ij->i", cur, cur)
    cost = sq_prev[:, None] + sq_cur[None, :] - 2.0 * prev @ cur.T
    return solve_assignment(cost, check_unique=False).permutation.image


def _check(n, d, delta, K):
    if n < 2 or d < 1:
        raise ValueError("tracking needs n >= 2 and d >= 1")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if K < 0:
        raise ValueError("K must be non-negative")


def _rescaled(x):
    return x / x.std()


def _run(n, d, delta, K, seed, rescale, stop_below=None, x0=None):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    x = rng.standard_normal((n, d))
    if x0 is not None:
        x = np.array(x0, dtype=float).reshape(n, d)
    step_sd = math.sqrt(delta)
    composed = np.arange(n)
    ident = np.arange(n)
    perms, fixed, errs, disp = [], [n], [0], []
    for _ in range(K):
        step = step_sd * rng.standard_normal((n, d))
        nxt = x + step
        disp.append(float(np.mean(step**2)))
        pi = step_matching(_rescaled(x), _rescaled(nxt)) if rescale else step_matching(x, nxt)
        composed = pi[composed]
        perms.append(pi)
        fixed.append(int(np.count_nonzero(composed == ident)))
        errs.append(int(np.count_nonzero(pi != ident)))
        x = nxt
        if stop_below is not None and fixed[-1] < stop_below:
            break
    return perms, fixed, errs, disp


def simulate_tracking(
    n: int, d: int, delta: float, K: int, seed: int, rescale: bool = False, x0=None
) -> TrackingRun:
    """Brownian snapshots with per-step variance ``delta``; ``x0`` overrides the N(0, I) start."""
    _check(n, d, delta, K)
    if x0 is not None and np.shape(x0) != (n, d):
        raise ValueError(f"x0 must have shape {(n, d)}")
    perms, fixed, errs, disp = _run(n, d, delta, K, seed, rescale, x0=x0)
    step_perms = np.array(perms, dtype=np.int64).reshape(K, n)
    return TrackingRun(
        n, d, float(delta), int(K), int(seed), step_perms, np.array(fixed), np.array(errs), np.array(disp)
    )


def estimate_Tmax(
    n: int, d: int, delta: float, trials: int, K_cap: int, seed: int, rescale: bool = False
) -> TmaxEstimate:
    """First time the composed matching has fewer than n/2 fixed points, averaged over trials.

    Trial t uses the seed derive_seed(seed, t), so calls with different delta
    but the same seed share initial positions and noise streams.
    """
    _check(n, d, delta, K_cap)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    times = []
    for t in range(trials):
        _, fixed, _, _ = _run(n, d, delta, K_cap, derive_seed(seed, t), rescale, stop_below=n / 2)
        times.append(delta * (len(fixed) - 1) if fixed[-1] < n / 2 else None)
    done = np.array([v for v in times if v is not None], dtype=float)
    mean = float(done.mean()) if done.size else math.nan
    se = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else math.nan
    cap = delta * K_cap
    restricted = float(np.mean([cap if v is None else v for v in times]))
    return TmaxEstimate(mean, se, 1.0 - done.size / trials, tuple(times), float(delta), int(K_cap), restricted)


def tracking_csv(run: TrackingRun) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["step", "time", "fixed_points", "step_errors"])
    for k in range(run.K + 1):
        wr.writerow([k, repr(k * run.delta), int(run.fixed_points[k]), int(run.step_errors[k])])
    return buf.getvalue()
