"""Per-pulse receive data matrices Z_q = B Sigma D_q A^T S and their noisy versions.

Binary pulse file layout (little-endian)::

    offset  size  field
    0       4     magic b"RMCP"
    4       1     version (1)
    5       1     dtype code: 0 = complex64, 1 = complex128
    6       1     flags: bit 0 set when the matrix carries noise
    7       1     reserved (0)
    8       2     pulse_index (u16, 1-based)
    10      4     rows (u32)
    14      4     cols (u32)
    18      ...   rows*cols complex values, row-major, interleaved (re, im)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DecodeError, DomainError
from .scene import SceneConfig, Target, WaveformMatrix, doppler_matrix, steering_matrix

PULSE_MAGIC = b"RMCP"
PULSE_VERSION = 1
_PULSE_HEADER = struct.Struct("<4sBBBBHII")
_DTYPES = {0: np.dtype("<c8"), 1: np.dtype("<c16")}


@dataclass(frozen=True)
class PulseMatrix:
    entries: np.ndarray
    pulse_index: int = 1
    is_noisy: bool = False

    @property
    def shape(self):
        return self.entries.shape


def pulse_seed(scene_seed: int, q: int) -> int:
    """Seed for the noise of pulse ``q``: the scene seed XOR the pulse index."""
    return int(scene_seed) ^ int(q)


def channel_matrix(scene: SceneConfig, targets: Sequence[Target], q: int) -> np.ndarray:
    """H_q = B Sigma D_q A^T, shape (num_rx, num_tx)."""
    if not targets:
        raise DomainError("at least one target is required")
    angles = [t.angle for t in targets]
    speeds = [t.speed for t in targets]
    beta = np.array([t.reflectivity for t in targets], dtype=complex)
    a = steering_matrix(angles, scene.num_tx, scene.tx_spacing, scene.wavelength)
    b = steering_matrix(angles, scene.num_rx, scene.rx_spacing, scene.wavelength)
    d_q = doppler_matrix(speeds, q, scene.pri, scene.wavelength)[q - 1]
    return (b * (beta * d_q)) @ a.T


def synthesize_pulse(scene: SceneConfig, targets: Sequence[Target], waveforms: WaveformMatrix,
                     q: int = 1) -> PulseMatrix:
    """Noise-free data matrix of pulse ``q`` (1-based), shape (num_rx, num_samples)."""
    if not 1 <= q <= scene.num_pulses:
        raise DomainError(f"pulse index must be in [1, {scene.num_pulses}], got {q}")
    if waveforms.entries.shape != (scene.num_tx, scene.num_samples):
        raise ConfigError(f"waveform shape {waveforms.entries.shape} does not match scene "
                          f"(num_tx, num_samples) = {(scene.num_tx, scene.num_samples)}")
    z = channel_matrix(scene, targets, q) @ waveforms.entries
    return PulseMatrix(z, q, False)


def add_noise(z: PulseMatrix, snr_db: float, seed=None, rng=None):
    """Add circular complex white Gaussian noise at the given per-entry SNR.

    The noise variance is ``||Z||_F^2 / (n1 n2 10^(snr_db/10))``. Returns the
    noisy pulse and the noise standard deviation; ``snr_db = inf`` adds nothing.
    """
    if z.is_noisy:
        raise DomainError("input pulse already carries noise")
    snr_db = float(snr_db)
    if np.isnan(snr_db) or snr_db == -np.inf:
        raise DomainError(f"snr_db must be finite or +inf, got {snr_db}")
    if snr_db == np.inf:
        return replace(z, is_noisy=True), 0.0
    n1, n2 = z.entries.shape
    power = np.linalg.norm(z.entries) ** 2 / (n1 * n2)
    sigma = float(np.sqrt(power / 10 ** (snr_db / 10)))
    if rng is None:
        rng = np.random.default_rng(seed)
    w = sigma * (rng.standard_normal((n1, n2)) + 1j * rng.standard_normal((n1, n2))) / np.sqrt(2)
    return PulseMatrix(z.entries + w, z.pulse_index, True), sigma


def save_pulse(path, pulse: PulseMatrix, dtype="complex128") -> None:
    Path(path).write_bytes(encode_pulse(pulse, dtype))


def load_pulse(path) -> PulseMatrix:
    return decode_pulse(Path(path).read_bytes())


def encode_pulse(pulse: PulseMatrix, dtype="complex128") -> bytes:
    code = {"complex64": 0, "complex128": 1}.get(np.dtype(dtype).name)
    if code is None:
        raise ConfigError(f"unsupported pulse dtype {dtype}")
    rows, cols = pulse.entries.shape
    header = _PULSE_HEADER.pack(PULSE_MAGIC, PULSE_VERSION, code, int(pulse.is_noisy), 0,
                                pulse.pulse_index, rows, cols)
    payload = np.ascontiguousarray(pulse.entries, dtype=_DTYPES[code]).tobytes()
    return header + payload


def decode_pulse(data: bytes) -> PulseMatrix:
    if len(data) < _PULSE_HEADER.size:
        raise DecodeError("truncated pulse header", len(data))
    magic, version, code, flags, _, q, rows, cols = _PULSE_HEADER.unpack_from(data)
    if magic != PULSE_MAGIC:
        raise DecodeError(f"bad magic {magic!r}", 0)
    if version != PULSE_VERSION:
        raise DecodeError(f"unknown pulse file version {version}", 4)
    if code not in _DTYPES:
        raise DecodeError(f"unknown dtype code {code}", 5)
    dt = _DTYPES[code]
    expected = _PULSE_HEADER.size + rows * cols * dt.itemsize
    if len(data) != expected:
        raise DecodeError(f"payload size mismatch: expected {expected} bytes, got {len(data)}",
                          min(len(data), expected))
    entries = np.frombuffer(data, dtype=dt, offset=_PULSE_HEADER.size).reshape(rows, cols)
    return PulseMatrix(entries.astype(complex), q, bool(flags & 1))
