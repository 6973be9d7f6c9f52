"""Singular-vector spread diagnostics: strong incoherence parameters, the
maxima m1/m2 of the leading singular vectors, their CCDFs and the mu_B fit."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class IncoherenceReport:
    rank_used: int
    mu1: float
    mu2: float
    mu: float
    m1: float
    m2: float
    n1: int
    n2: int

    def as_row(self) -> dict:
        return asdict(self)


def _leading_vectors(matrix, r):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DomainError("expected a 2-D matrix")
    n1, n2 = matrix.shape
    if not 1 <= r <= min(n1, n2):
        raise DomainError(f"rank r={r} must be in [1, min(n1, n2)={min(n1, n2)}]")
    if not np.any(matrix):
        raise DomainError("matrix is identically zero")
    u, _, vh = np.linalg.svd(matrix, full_matrices=False)
    return u[:, :r], vh[:r].conj().T


def singular_vector_maxima(matrix, r: int) -> Tuple[float, float]:
    """Largest entry magnitude over the r leading left (m1) and right (m2) singular vectors."""
    u, v = _leading_vectors(matrix, r)
    return float(np.abs(u).max()), float(np.abs(v).max())


def strong_incoherence_mu(matrix, r: int) -> Tuple[float, float, float]:
    """Smallest (mu1, mu2) meeting the strong incoherence conditions, and their max.

    mu1 bounds the deviation of the projectors P_U, P_V from (r/n) I scaled by
    n / sqrt(r); mu2 bounds the entries of T = U V^H scaled by sqrt(n1 n2 / r).
    """
    u, v = _leading_vectors(matrix, r)
    n1, n2 = u.shape[0], v.shape[0]
    p_u = u @ u.conj().T - (r / n1) * np.eye(n1)
    p_v = v @ v.conj().T - (r / n2) * np.eye(n2)
    mu1 = max(np.abs(p_u).max() * n1, np.abs(p_v).max() * n2) / np.sqrt(r)
    t = u @ v.conj().T
    mu2 = np.abs(t).max() * np.sqrt(n1 * n2 / r)
    return float(mu1), float(mu2), float(max(mu1, mu2))


def incoherence_report(matrix, r: int) -> IncoherenceReport:
    matrix = np.asarray(matrix)
    m1, m2 = singular_vector_maxima(matrix, r)
    mu1, mu2, mu = strong_incoherence_mu(matrix, r)
    return IncoherenceReport(r, mu1, mu2, mu, m1, m2, *matrix.shape)


def empirical_ccdf(samples: Sequence[float], grid: Iterable[float]) -> np.ndarray:
    """Fraction of samples strictly greater than each threshold."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise DomainError("empirical_ccdf needs at least one sample")
    grid = np.asarray(list(grid) if not isinstance(grid, np.ndarray) else grid, dtype=float)
    return 1.0 - np.searchsorted(x, grid, side="right") / x.size


def bound_quantile(samples: Sequence[float], q: float = 0.99) -> float:
    """The 'bound' of a maximum statistic: its empirical q-quantile."""
    return float(np.quantile(np.asarray(samples, dtype=float), q))


def fit_mu_B(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares fit of ``m = sqrt(mu_B / n)``.

    Returns ``(mu_B, rms residual)``. The model is linear in c = sqrt(mu_B), so
    c = sum(m / sqrt(n)) / sum(1 / n).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DomainError("fit_mu_B needs at least two (n, m_bound) points")
    n, m = pts[:, 0], pts[:, 1]
    if np.any(np.diff(n) <= 0) or np.any(n <= 0):
        raise DomainError("n must be positive and strictly increasing")
    basis = 1.0 / np.sqrt(n)
    c = float(basis @ m / (basis @ basis))
    resid = float(np.sqrt(np.mean((m - c * basis) ** 2)))
    return c * c, resid


def write_ccdf_csv(path, grid, probabilities, comment: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["threshold", "probability"])
        for t, p in zip(grid, probabilities):
            w.writerow([repr(float(t)), repr(float(p))])
