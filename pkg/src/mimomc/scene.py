"""Radar geometry, targets and transmit waveforms for a colocated ULA MIMO radar.

Angles are in degrees at every public interface; speeds in m/s.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import hadamard

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 299792458.0


class WaveformKind(str, enum.Enum):
    HADAMARD = "hadamard"
    GAUSSIAN_ORTHOGONAL = "gaussian_orthogonal"

    @classmethod
    def parse(cls, value) -> "WaveformKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"gaussian": "gaussian_orthogonal", "g_orth": "gaussian_orthogonal",
                   "gorth": "gaussian_orthogonal", "h": "hadamard"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown waveform kind {value!r}; expected one of "
                              f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class SceneConfig:
    """Geometry and timing of one simulation scenario.

    ``tx_spacing`` and ``rx_spacing`` default to half a wavelength.
    """

    num_tx: int = 20
    num_rx: int = 40
    carrier_freq: float = 1e9
    num_pulses: int = 5
    pri: float = 1.0 / 4000.0
    num_samples: int = 128
    sample_period: float = 1e-6
    waveform_kind: WaveformKind = WaveformKind.GAUSSIAN_ORTHOGONAL
    rng_seed: int = 0
    tx_spacing: Optional[float] = None
    rx_spacing: Optional[float] = None
    wavelength: float = field(init=False)

    def __post_init__(self):
        if self.num_tx < 1 or self.num_rx < 1:
            raise ConfigError("num_tx and num_rx must be >= 1")
        if self.num_samples < self.num_tx:
            raise ConfigError(f"num_samples ({self.num_samples}) must be >= num_tx "
                              f"({self.num_tx}) for row-orthogonal waveforms")
        if self.num_pulses < 1:
            raise ConfigError("num_pulses must be >= 1")
        if not (self.carrier_freq > 0 and self.pri > 0 and self.sample_period > 0):
            raise ConfigError("carrier_freq, pri and sample_period must be positive")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be unsigned")
        wavelength = SPEED_OF_LIGHT / self.carrier_freq
        object.__setattr__(self, "wavelength", wavelength)
        object.__setattr__(self, "waveform_kind", WaveformKind.parse(self.waveform_kind))
        if self.tx_spacing is None:
            object.__setattr__(self, "tx_spacing", wavelength / 2)
        if self.rx_spacing is None:
            object.__setattr__(self, "rx_spacing", wavelength / 2)

    def replace(self, **changes) -> "SceneConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self) if f.init}
        # spacings tied to the old wavelength must follow a carrier change
        if "carrier_freq" in changes:
            for name in ("tx_spacing", "rx_spacing"):
                if name not in changes and math.isclose(values[name], self.wavelength / 2):
                    values[name] = None
        values.update(changes)
        return SceneConfig(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["waveform_kind"] = self.waveform_kind.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        data = dict(data)
        data.pop("wavelength", None)
        known = {f.name for f in fields(cls) if f.init}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown SceneConfig fields: {sorted(unknown)}")
        return cls(**data)


def load_scene(path) -> SceneConfig:
    """Read a SceneConfig from a JSON file (snake_case field names)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scene config {path}: {exc}") from exc
    if "scene" in data and isinstance(data["scene"], dict):
        data = data["scene"]
    return SceneConfig.from_dict(data)


@dataclass(frozen=True)
class Target:
    angle: float
    speed: float = 0.0
    reflectivity: complex = 1.0

    def __post_init__(self):
        _check_angle(self.angle)
        r = complex(self.reflectivity)
        if not (np.isfinite(r.real) and np.isfinite(r.imag)) or r == 0:
            raise DomainError(f"reflectivity must be finite and nonzero, got {r}")
        object.__setattr__(self, "reflectivity", r)


@dataclass(frozen=True)
class WaveformMatrix:
    """Transmit waveform matrix S of shape (num_tx, num_samples)."""

    entries: np.ndarray
    kind: WaveformKind

    @property
    def num_tx(self) -> int:
        return self.entries.shape[0]

    @property
    def num_samples(self) -> int:
        return self.entries.shape[1]

    def orthogonality_error(self) -> float:
        """Frobenius distance between (1/L) S S^H and the identity."""
        s = self.entries
        gram = s @ s.conj().T / s.shape[1]
        return float(np.linalg.norm(gram - np.eye(s.shape[0])))


def _check_angle(angle):
    a = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(np.abs(a) >= 90.0):
        raise DomainError(f"angle must lie strictly inside (-90, 90) degrees, got {angle}")


def _ula_steering(angle, num, spacing, wavelength):
    _check_angle(angle)
    if num < 1:
        raise DomainError("array must have at least one element")
    phase = 2 * np.pi / wavelength * spacing * np.sin(np.deg2rad(angle))
    return np.exp(1j * phase * np.arange(num))


def transmit_steering(angle: float, num_tx: int, spacing: float, wavelength: float) -> np.ndarray:
    """Transmit steering vector a(theta); element m is exp(j 2pi/lambda m d sin theta)."""
    return _ula_steering(angle, num_tx, spacing, wavelength)


def receive_steering(angle: float, num_rx: int, spacing: float, wavelength: float) -> np.ndarray:
    """Receive steering vector b(theta); same form as :func:`transmit_steering`."""
    return _ula_steering(angle, num_rx, spacing, wavelength)


def steering_matrix(angles: Iterable[float], num: int, spacing: float, wavelength: float) -> np.ndarray:
    """Stack steering vectors for several angles as columns, shape (num, len(angles))."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    _check_angle(angles)
    phase = 2 * np.pi / wavelength * spacing * np.sin(np.deg2rad(angles))
    return np.exp(1j * np.outer(np.arange(num), phase))


def doppler_vector(speed: float, num_pulses: int, pri: float, wavelength: float) -> np.ndarray:
    """Pulse-to-pulse Doppler phase progression.

    Element q is ``exp(j 2pi (2 v / lambda) q T_PRI)``.
    """
    if num_pulses < 1:
        raise DomainError("num_pulses must be >= 1")
    f_d = 2.0 * speed / wavelength
    return np.exp(2j * np.pi * f_d * pri * np.arange(num_pulses))


def doppler_matrix(speeds: Iterable[float], num_pulses: int, pri: float, wavelength: float) -> np.ndarray:
    speeds = np.atleast_1d(np.asarray(speeds, dtype=float))
    f_d = 2.0 * speeds / wavelength
    return np.exp(2j * np.pi * np.outer(np.arange(num_pulses) * pri, f_d))


def make_waveforms(kind, num_tx: int, num_samples: int, seed: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None) -> WaveformMatrix:
    """Build an orthogonal waveform matrix S with (1/L) S S^H = I.

    Hadamard waveforms are the first ``num_tx`` rows of the Sylvester Hadamard
    matrix of order ``num_samples`` (a power of two). Gaussian-orthogonal
    waveforms orthonormalize i.i.d. complex Gaussian rows and scale by sqrt(L).
    ``rng`` takes precedence over ``seed`` when both are given.
    """
    kind = WaveformKind.parse(kind)
    if num_tx < 1 or num_tx > num_samples:
        raise ConfigError(f"need 1 <= num_tx <= num_samples, got num_tx={num_tx}, "
                          f"num_samples={num_samples}")
    if kind is WaveformKind.HADAMARD:
        if num_samples & (num_samples - 1):
            raise ConfigError(f"Hadamard waveforms need num_samples to be a power of two "
                              f"(Sylvester construction), got {num_samples}")
        s = hadamard(num_samples)[:num_tx].astype(complex)
        return WaveformMatrix(s, kind)
    if rng is None:
        rng = np.random.default_rng(seed)
    g = (rng.standard_normal((num_samples, num_tx))
         + 1j * rng.standard_normal((num_samples, num_tx))) / np.sqrt(2)
    q, _ = np.linalg.qr(g)
    return WaveformMatrix(np.ascontiguousarray(q.T) * np.sqrt(num_samples), kind)


def random_targets(rng: np.random.Generator, count: int, angle_range=(-90.0, 90.0),
                   speed_range=(150.0, 450.0), min_separation: float = 0.0,
                   speeds: Optional[Sequence[float]] = None, max_tries: int = 10000,
                   unit_amplitude: bool = False) -> list:
    """Draw targets with uniform angles/speeds and complex Gaussian reflectivities.

    Angles are redrawn (rejection sampling) until every pair is at least
    ``min_separation`` degrees apart. ``speeds`` pins the speeds instead of drawing them.
    ``unit_amplitude`` gives equal-power targets with uniform random phase.
    """
    lo, hi = angle_range
    for _ in range(max_tries):
        angles = rng.uniform(lo, hi, count)
        if np.any(np.abs(angles) >= 90.0):
            continue
        if count < 2 or np.min(np.diff(np.sort(angles))) >= min_separation:
            break
    else:
        raise ConfigError(f"could not place {count} targets {min_separation} deg apart "
                          f"in {angle_range}")
    if speeds is None:
        v = rng.uniform(speed_range[0], speed_range[1], count)
    else:
        if len(speeds) != count:
            raise ConfigError("len(speeds) must equal the target count")
        v = np.asarray(speeds, dtype=float)
    if unit_amplitude:
        beta = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, count))
    else:
        beta = (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / np.sqrt(2)
    return [Target(float(a), float(s), complex(b)) for a, s, b in zip(angles, v, beta)]
