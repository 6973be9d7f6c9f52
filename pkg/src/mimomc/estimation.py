"""Post-completion processing: matched filtering, pulse stacking, covariance
and joint angle-Doppler MUSIC."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.optimize import minimize

from .errors import DomainError
from .scene import SceneConfig, WaveformMatrix, doppler_matrix
from .synth import PulseMatrix

DEFAULT_ANGLE_GRID = np.round(np.arange(-89.95, 89.95 + 1e-9, 0.05), 10)
DEFAULT_SPEED_GRID = np.arange(150.0, 450.0 + 1e-9, 5.0)
_NULL_FLOOR = 1e-15


@dataclass(frozen=True)
class MatchedPulse:
    entries: np.ndarray
    pulse_index: int = 1


@dataclass(frozen=True)
class StackedData:
    """Y of shape (Q * M_t, M_r); row (q - 1) * M_t + m_t, column m_r holds Y_q[m_r, m_t]."""

    entries: np.ndarray
    num_pulses: int
    num_tx: int
    num_rx: int
    ordering: str = "row = (q - 1) * num_tx + m_t; col = m_r"


@dataclass(frozen=True)
class Peak:
    angle: float
    speed: float
    value: float


@dataclass
class EstimationReport:
    spectrum: np.ndarray  # (len(speed_grid), len(angle_grid))
    angle_grid: np.ndarray
    speed_grid: np.ndarray
    peaks: List[Peak]
    assumed_k: int
    success: Optional[List[bool]] = None
    truths: Optional[List[float]] = field(default=None)

    @property
    def angles(self) -> List[float]:
        return [p.angle for p in self.peaks]

    def doa_spectrum(self) -> np.ndarray:
        """Angle-only pseudospectrum: max over the speed grid at every angle."""
        return self.spectrum.max(axis=0)

    def to_dict(self) -> dict:
        return {
            "assumed_k": self.assumed_k,
            "peaks": [{"angle": p.angle, "speed": p.speed, "value": p.value} for p in self.peaks],
            "success": self.success,
            "truths": self.truths,
            "angle_grid": {"start": float(self.angle_grid[0]), "stop": float(self.angle_grid[-1]),
                           "count": int(self.angle_grid.size)},
            "speed_grid": {"start": float(self.speed_grid[0]), "stop": float(self.speed_grid[-1]),
                           "count": int(self.speed_grid.size)},
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_spectrum_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "speed", "value"])
            for i, v in enumerate(self.speed_grid):
                for j, a in enumerate(self.angle_grid):
                    w.writerow([f"{a:.6f}", f"{v:.6f}", repr(float(self.spectrum[i, j]))])

    def write_peaks_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "speed", "value"])
            for p in self.peaks:
                w.writerow([repr(p.angle), repr(p.speed), repr(p.value)])


def matched_filter(x_hat, waveforms: WaveformMatrix) -> MatchedPulse:
    """Y_q = (1/L) X_q S^H, shape (M_r, M_t)."""
    x = x_hat.entries if isinstance(x_hat, PulseMatrix) else np.asarray(x_hat)
    s = waveforms.entries
    if x.shape[1] != s.shape[1]:
        raise DomainError(f"pulse has {x.shape[1]} samples but waveforms have {s.shape[1]}")
    q = x_hat.pulse_index if isinstance(x_hat, PulseMatrix) else 1
    return MatchedPulse(x @ s.conj().T / s.shape[1], q)


def stack_and_reshape(pulses: Sequence[MatchedPulse], num_pulses: int, num_tx: int,
                      num_rx: int) -> StackedData:
    """Stack Q matched pulses into Y (Q M_t x M_r), ordered by pulse index."""
    indices = sorted(p.pulse_index for p in pulses)
    if indices != list(range(1, num_pulses + 1)):
        raise DomainError(f"expected pulse indices 1..{num_pulses} exactly once, got {indices}")
    for p in pulses:
        if p.entries.shape != (num_rx, num_tx):
            raise DomainError(f"pulse {p.pulse_index} has shape {p.entries.shape}, "
                              f"expected {(num_rx, num_tx)}")
    ordered = sorted(pulses, key=lambda p: p.pulse_index)
    y = np.concatenate([p.entries.T for p in ordered], axis=0)
    return StackedData(y, num_pulses, num_tx, num_rx)


def sample_covariance(y: StackedData) -> np.ndarray:
    """R = (1/M_r) Y Y^H."""
    data = y.entries if isinstance(y, StackedData) else np.asarray(y)
    if data.shape[1] < 1:
        raise DomainError("need at least one receive antenna")
    r = data @ data.conj().T / data.shape[1]
    return (r + r.conj().T) / 2


def _signal_basis(cov, k):
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, -k:] if k else vecs[:, :0]


def _null_spectrum(signal, scene, angle_grid, speed_grid):
    """1 - ||E_s^H (d (x) a)||^2 / ||d (x) a||^2 on the grid, shape (speeds, angles).

    Equals the normalized noise-subspace projection since the eigenbasis is orthonormal.
    """
    qn, mt = scene.num_pulses, scene.num_tx
    a = np.exp(1j * np.outer(np.arange(mt), 2 * np.pi / scene.wavelength * scene.tx_spacing
                             * np.sin(np.deg2rad(angle_grid))))
    d = doppler_matrix(speed_grid, qn, scene.pri, scene.wavelength)
    power = np.zeros((len(speed_grid), len(angle_grid)))
    for col in signal.T:
        e = col.conj().reshape(qn, mt)
        power += np.abs(d.T @ e @ a) ** 2
    return 1.0 - power / (qn * mt)


def _parabolic_offset(left, mid, right):
    denom = left - 2 * mid + right
    if denom <= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def music_spectrum(cov: np.ndarray, assumed_k: int, scene: SceneConfig,
                   angle_grid=None, speed_grid=None) -> EstimationReport:
    """MUSIC pseudospectrum over a joint (angle, speed) grid with peak picking.

    Passing the known target speeds as ``speed_grid`` gives the fixed-speed mode.
    Peaks are the ``assumed_k`` largest local maxima. Each is refined by parabolic
    interpolation along angle and speed, then by a bounded local minimization of
    the null spectrum within two grid cells, which removes the angle/speed coupling
    that per-axis interpolation leaves when the true speed falls between grid rows.
    """
    cov = np.asarray(cov)
    dim = scene.num_pulses * scene.num_tx
    if cov.shape != (dim, dim):
        raise DomainError(f"covariance shape {cov.shape} does not match Q*M_t = {dim}")
    if not 0 <= assumed_k < dim:
        raise DomainError(f"assumed_k must be in [0, {dim}), got {assumed_k}")
    angle_grid = DEFAULT_ANGLE_GRID if angle_grid is None else np.asarray(angle_grid, float)
    speed_grid = DEFAULT_SPEED_GRID if speed_grid is None else np.asarray(speed_grid, float)
    if angle_grid.size == 0 or speed_grid.size == 0:
        raise DomainError("angle and speed grids must be non-empty")
    if np.any(np.abs(angle_grid) >= 90):
        raise DomainError("angle grid must lie strictly inside (-90, 90)")

    signal = _signal_basis(cov, assumed_k)
    null = _null_spectrum(signal, scene, angle_grid, speed_grid)
    spectrum = 1.0 / np.maximum(null, _NULL_FLOOR)
    peaks = [_refine_peak(pk, signal, scene, angle_grid, speed_grid)
             for pk in _pick_peaks(spectrum, null, assumed_k, angle_grid, speed_grid)]
    return EstimationReport(spectrum, angle_grid, speed_grid, peaks, assumed_k)


def _pick_peaks(spectrum, null, k, angle_grid, speed_grid):
    if k == 0:
        return []
    is_max = spectrum >= maximum_filter(spectrum, size=3, mode="nearest")
    iv, ia = np.nonzero(is_max)
    order = np.argsort(-spectrum[iv, ia], kind="stable")
    chosen = []
    for idx in order:
        i, j = iv[idx], ia[idx]
        # plateaus report several adjacent maxima for one peak
        if any(abs(i - ci) <= 1 and abs(j - cj) <= 1 for ci, cj in chosen):
            continue
        chosen.append((i, j))
        if len(chosen) == k:
            break
    peaks = []
    for i, j in chosen:
        angle, speed = angle_grid[j], speed_grid[i]
        if 0 < j < len(angle_grid) - 1:
            off = _parabolic_offset(null[i, j - 1], null[i, j], null[i, j + 1])
            angle = angle + off * (angle_grid[j + 1] - angle_grid[j - 1]) / 2
        if 0 < i < len(speed_grid) - 1:
            off = _parabolic_offset(null[i - 1, j], null[i, j], null[i + 1, j])
            speed = speed + off * (speed_grid[i + 1] - speed_grid[i - 1]) / 2
        peaks.append(Peak(float(angle), float(speed), float(spectrum[i, j])))
    return peaks


def _grid_step(grid):
    return float(np.min(np.diff(grid))) if len(grid) > 1 else 0.0


def _refine_peak(peak, signal, scene, angle_grid, speed_grid):
    da, dv = _grid_step(angle_grid), _grid_step(speed_grid)
    if da == 0.0 and dv == 0.0:
        return peak

    def null_at(u):
        theta = float(np.clip(peak.angle + u[0] * da, -89.999, 89.999))
        return float(_null_spectrum(signal, scene, [theta], [peak.speed + u[1] * dv])[0, 0])

    start = null_at((0.0, 0.0))
    res = minimize(null_at, np.zeros(2), method="Nelder-Mead",
                   bounds=[(-2.0, 2.0) if da else (0.0, 0.0), (-2.0, 2.0) if dv else (0.0, 0.0)],
                   options={"xatol": 1e-7, "fatol": 1e-16, "initial_simplex":
                            [[0.0, 0.0], [0.25 if da else 0.0, 0.0], [0.0, 0.25 if dv else 0.0]]})
    if not res.fun < start:
        return peak
    null = max(float(res.fun), _NULL_FLOOR)
    return Peak(float(np.clip(peak.angle + res.x[0] * da, -89.999, 89.999)),
                float(peak.speed + res.x[1] * dv), 1.0 / null)


def match_estimates(estimates: Sequence[float], truths: Sequence[float]):
    """Greedy nearest pairing; returns the estimate index paired with each truth."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    dist = np.abs(tru[:, None] - est[None, :])
    pairs = sorted(((dist[t, e], t, e) for t in range(len(tru)) for e in range(len(est))))
    paired = [-1] * len(tru)
    used = set()
    for _, t, e in pairs:
        if paired[t] < 0 and e not in used:
            paired[t] = e
            used.add(e)
    return paired


def resolution_success(estimates: Sequence[float], truths: Sequence[float], d_theta: float,
                       epsilon: float = 0.1) -> List[bool]:
    """Per-target success flags: |theta - theta_hat| <= epsilon * d_theta after pairing."""
    if len(estimates) != len(truths):
        raise DomainError(f"got {len(estimates)} estimates for {len(truths)} targets")
    paired = match_estimates(estimates, truths)
    tol = epsilon * d_theta
    return [bool(abs(truths[t] - estimates[e]) <= tol + 1e-12) for t, e in enumerate(paired)]


def estimate_from_pulses(pulses: Sequence, waveforms: WaveformMatrix, scene: SceneConfig,
                         assumed_k: int, angle_grid=None, speed_grid=None) -> EstimationReport:
    """Full chain from recovered per-pulse matrices to a MUSIC report."""
    matched = [matched_filter(p, waveforms) for p in pulses]
    stacked = stack_and_reshape(matched, scene.num_pulses, scene.num_tx, scene.num_rx)
    return music_spectrum(sample_covariance(stacked), assumed_k, scene, angle_grid, speed_grid)
