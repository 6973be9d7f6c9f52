"""Nuclear-norm matrix completion with an inequality data-fit constraint.

Solves ``min ||X||_*  s.t.  ||P_Omega(X - Y)||_F <= delta`` by accelerated
proximal gradient on the penalized problem

    mu ||X||_* + 1/2 ||P_Omega(X - Y)||_F^2

with a decreasing-mu continuation. The first stage whose solution meets the
constraint ends the solve.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import DomainError
from .sampling import ObservationSet


@dataclass(frozen=True)
class SolverOptions:
    max_stages: int = 20
    max_inner: int = 500
    tol: float = 1e-6
    mu_factor: float = 0.9
    mu_decay: float = 0.5
    # gradient-based momentum restart
    restart: bool = True
    # thresholding through an eigendecomposition of the smaller Gram matrix
    fast_svd: bool = True

    def __post_init__(self):
        if self.max_stages < 1 or self.max_inner < 1:
            raise DomainError("max_stages and max_inner must be positive")
        if not (self.tol > 0 and self.mu_factor > 0 and 0 < self.mu_decay < 1):
            raise DomainError("tol, mu_factor must be positive and mu_decay in (0, 1)")


@dataclass(frozen=True)
class CompletionProblem:
    observations: ObservationSet
    delta: float = 0.0
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not (self.delta >= 0):
            raise DomainError(f"delta must be >= 0, got {self.delta}")


class TraceRow(NamedTuple):
    iteration: int
    stage: int
    mu: float
    objective: float
    residual: float

    @property
    def merit(self) -> float:
        return self.mu * self.objective + 0.5 * self.residual ** 2


@dataclass
class CompletionResult:
    estimate: np.ndarray
    residual: float
    nuclear_norm: float
    iterations: int
    converged: bool
    trace: List[TraceRow]
    stage_merits: List[float]
    delta: float

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "stage", "mu", "objective", "residual", "merit"])
            for row in self.trace:
                w.writerow([row.iteration, row.stage, repr(row.mu), repr(row.objective),
                            repr(row.residual), repr(row.merit)])


def sv_soft_threshold(matrix: np.ndarray, tau: float) -> np.ndarray:
    """Proximal operator of ``tau ||.||_*``: shrink every singular value by tau."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    u, s, vh = np.linalg.svd(np.asarray(matrix), full_matrices=False)
    return (u * np.maximum(s - tau, 0.0)) @ vh


def _shrink_svd(g, tau):
    u, s, vh = np.linalg.svd(g, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (u[:, :k] * s[:k]) @ vh[:k], float(s.sum())


def _shrink_gram(g, tau):
    if g.shape[0] > g.shape[1]:
        x, nn = _shrink_gram(g.conj().T, tau)
        return x.conj().T, nn
    w, u = np.linalg.eigh(g @ g.conj().T)
    s = np.sqrt(np.maximum(w, 0.0))
    keep = s > tau
    if not keep.any():
        return np.zeros_like(g), 0.0
    # Gram eigenvalues lose relative accuracy below sqrt(eps) * s_max
    if s[keep].min() < 1e-6 * s[-1]:
        return _shrink_svd(g, tau)
    u, s = u[:, keep], s[keep]
    vh = (u.conj().T @ g) / s[:, None]
    return (u * (s - tau)) @ vh, float((s - tau).sum())


def _project(x, mask, y_obs, delta):
    """Euclidean projection onto {X : ||P_Omega(X - Y)||_F <= delta}."""
    r = x[mask] - y_obs
    norm = float(np.linalg.norm(r))
    if norm <= delta:
        return x
    out = x.copy()
    out[mask] = x[mask] - (1.0 - delta / norm) * r
    return out


def _candidate_ranks(s):
    """Ranks suggested by the singular value decay: the largest interior gap and
    the count above a 1e-12 s_max floor."""
    kept = s[s > 1e-12 * s[0]]
    ranks = {kept.size}
    if kept.size > 1:
        ranks.add(int(np.argmax(kept[:-1] / kept[1:])) + 1)
    return sorted(ranks)


def _refine_fixed_rank(x, mask, y_obs, r, sweeps=200, tol=1e-13):
    """Alternating least squares on the observed entries, started from the rank-r
    truncation of x. Returns None when some row or column has fewer than r samples."""
    rows = [np.nonzero(mask[i])[0] for i in range(x.shape[0])]
    cols = [np.nonzero(mask[:, j])[0] for j in range(x.shape[1])]
    if min(map(len, rows)) < r or min(map(len, cols)) < r:
        return None
    u, s, vh = np.linalg.svd(x, full_matrices=False)
    left = u[:, :r] * np.sqrt(s[:r])
    right = vh[:r].T * np.sqrt(s[:r])
    y = np.zeros_like(x)
    y[mask] = y_obs
    scale = float(np.linalg.norm(y_obs)) or 1.0
    prev = math.inf
    for _ in range(sweeps):
        for i, c in enumerate(rows):
            left[i] = np.linalg.lstsq(right[c], y[i, c], rcond=None)[0]
        for j, c in enumerate(cols):
            right[j] = np.linalg.lstsq(left[c], y[c, j], rcond=None)[0]
        res = float(np.linalg.norm((left @ right.T)[mask] - y_obs)) / scale
        if res < tol or prev - res < tol * 1e-3:
            break
        prev = res
    return left @ right.T


def complete(problem: CompletionProblem) -> CompletionResult:
    """Recover the full matrix from its observed entries.

    Returns the feasible point of smallest nuclear norm seen. If no stage meets
    the constraint, the last iterate and its fixed-rank refinement are projected
    onto the constraint set and compete as candidates. Never raises on
    non-convergence.
    """
    obs, delta, opt = problem.observations, float(problem.delta), problem.options
    if obs.count < 1:
        raise DomainError("cannot complete a matrix with no observed entries")
    mask = obs.mask
    y = obs.zero_filled().astype(complex)
    y_obs = y[mask]
    shrink = _shrink_gram if opt.fast_svd else _shrink_svd

    trace: List[TraceRow] = []
    stage_merits: List[float] = []
    best: Optional[tuple] = None
    x = np.zeros_like(y)
    mu = opt.mu_factor * np.linalg.norm(y, 2)
    if mu == 0.0:
        return CompletionResult(x, 0.0, 0.0, 0, True, trace, stage_merits, delta)

    iteration = 0
    feasible_stage = False
    inner_converged = False
    residual = nn = math.nan
    for stage in range(opt.max_stages):
        z, x_prev, t = x, x, 1.0
        inner_converged = False
        for _ in range(opt.max_inner):
            g = z.copy()
            g[mask] = y_obs
            x_new, nn = shrink(g, mu)
            residual = float(np.linalg.norm(x_new[mask] - y_obs))
            iteration += 1
            trace.append(TraceRow(iteration, stage, float(mu), nn, residual))
            if residual <= delta and (best is None or nn < best[1]):
                best = (x_new, nn, residual)
            step = x_new - x_prev
            if opt.restart and np.vdot(z - x_new, step).real > 0:
                t, z = 1.0, x_new
            else:
                t_next = (1 + math.sqrt(1 + 4 * t * t)) / 2
                z = x_new + ((t - 1) / t_next) * step
                t = t_next
            change = np.linalg.norm(step) / max(np.linalg.norm(x_prev), 1e-300)
            x_prev = x_new
            if change < opt.tol:
                inner_converged = True
                break
        x = x_prev
        stage_merits.append(mu * nn + 0.5 * residual ** 2)
        if residual <= delta:
            feasible_stage = True
            break
        mu *= opt.mu_decay

    if not feasible_stage:
        # the last iterate and its fixed-rank refinements compete after projection
        candidates = [x]
        if np.any(x):
            for r in _candidate_ranks(np.linalg.svd(x, compute_uv=False)):
                if r < min(x.shape):
                    refined = _refine_fixed_rank(x, mask, y_obs, r)
                    if refined is not None:
                        candidates.append(refined)
        for cand in candidates:
            polished = _project(cand, mask, y_obs, delta)
            p_res = float(np.linalg.norm(polished[mask] - y_obs))
            p_nn = float(np.linalg.svd(polished, compute_uv=False).sum())
            if best is None or p_nn < best[1]:
                best = (polished, p_nn, p_res)

    estimate, nn, residual = best
    converged = feasible_stage or (inner_converged and residual <= delta * (1 + 1e-6))
    return CompletionResult(estimate, residual, nn, iteration, converged,
                            trace, stage_merits, delta)


def choose_delta(noise_sigma: float, observed_count: int) -> float:
    """High-probability bound on ||P_Omega(E)||_F for i.i.d. noise of std sigma.

    ``sigma * sqrt(N + sqrt(8 N))``, i.e. the expected squared norm N sigma^2
    padded by sqrt(8 N) sigma^2.
    """
    if noise_sigma < 0 or observed_count < 1:
        raise DomainError("need noise_sigma >= 0 and observed_count >= 1")
    n = float(observed_count)
    return float(noise_sigma * math.sqrt(n + math.sqrt(8.0 * n)))


def recovery_error_bound(p: float, n1: int, n2: int, delta: float) -> float:
    """Stable-recovery bound 4 sqrt((2 + p) min(n1, n2) / p) delta + 2 delta."""
    if not (0 < p <= 1):
        raise DomainError(f"p must be in (0, 1], got {p}")
    if n1 < 1 or n2 < 1 or delta < 0:
        raise DomainError("need n1, n2 >= 1 and delta >= 0")
    return 4.0 * math.sqrt((2.0 + p) * min(n1, n2) / p) * delta + 2.0 * delta
