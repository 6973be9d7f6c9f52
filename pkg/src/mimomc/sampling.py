"""Sub-Nyquist sampling masks and partially observed data matrices.

Per-antenna index generation contract
-------------------------------------
Seed-mode forwarding sends a 64-bit seed instead of column indices, so the
column selection for one antenna is pinned here exactly. All arithmetic is
unsigned 64-bit with wrap-around.

* ``mix(z)``: ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31`` (the SplitMix64 finalizer).
* ``draw(seed, k) = mix(seed + (k + 1) * 0x9E3779B97F4A7C15)``, k = 0, 1, ...
  This equals the k-th output of a SplitMix64 generator started at ``seed``.
* ``antenna_seed(mask_seed, row) = draw(mask_seed, row)``.
* ``sample_columns(seed, count, L)``: start from ``perm = [0, ..., L-1]``; for
  ``i = 0 .. count-1`` set ``j = i + draw(seed, i) mod (L - i)`` and swap
  ``perm[i], perm[j]``. The selected columns are ``sorted(perm[:count])``.

Observed values are always listed in ascending column order within a row.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError
from .synth import PulseMatrix

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Scheme(str, enum.Enum):
    PER_ANTENNA = "per_antenna"
    GLOBAL_UNIFORM = "global_uniform"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        key = {"perantenna": "per_antenna", "globaluniform": "global_uniform",
               "global": "global_uniform", "antenna": "per_antenna"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown sampling scheme {value!r}") from None


def mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def draw(seed: int, k: int) -> int:
    return mix64(seed + (k + 1) * _GOLDEN)


def antenna_seed(mask_seed: int, row: int) -> int:
    return draw(mask_seed, row)


def sample_columns(seed: int, count: int, num_samples: int) -> np.ndarray:
    """Columns selected by one antenna under the pinned generator contract."""
    if not 0 <= count <= num_samples:
        raise DomainError(f"count must be in [0, {num_samples}], got {count}")
    perm = list(range(num_samples))
    for i in range(count):
        j = i + draw(seed, i) % (num_samples - i)
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(sorted(perm[:count]), dtype=np.int64)


def per_row_count(fraction: float, num_cols: int) -> int:
    # rounding guards against 0.7 * 10 = 7.000000000000001
    return math.ceil(round(fraction * num_cols, 9))


@dataclass(frozen=True)
class Mask:
    """Observed-entry pattern Omega on a (rows, cols) grid."""

    grid: np.ndarray
    scheme: Scheme
    seed: Optional[int]
    fraction: float

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grid.shape

    @property
    def count(self) -> int:
        return int(self.grid.sum())

    def indices(self):
        """(rows, cols) arrays of observed entries in row-major order."""
        return np.nonzero(self.grid)


def make_mask(shape, fraction: float, scheme=Scheme.PER_ANTENNA, seed: int = 0) -> Mask:
    """Random observation pattern.

    PER_ANTENNA picks ceil(p L) distinct columns in every row using the pinned
    generator contract; GLOBAL_UNIFORM picks ceil(p n1 n2) entries uniformly
    over the whole grid.
    """
    scheme = Scheme.parse(scheme)
    if not (0 < fraction <= 1):
        raise DomainError(f"sampling fraction must be in (0, 1], got {fraction}")
    n1, n2 = shape
    seed = int(seed) & _MASK64
    grid = np.zeros((n1, n2), dtype=bool)
    if scheme is Scheme.PER_ANTENNA:
        count = per_row_count(fraction, n2)
        for row in range(n1):
            grid[row, sample_columns(antenna_seed(seed, row), count, n2)] = True
    else:
        total = per_row_count(fraction, n1 * n2)
        rng = np.random.default_rng(seed)
        grid.flat[rng.choice(n1 * n2, size=total, replace=False)] = True
    return Mask(grid, scheme, seed, float(fraction))


def full_mask(shape) -> Mask:
    return Mask(np.ones(shape, dtype=bool), Scheme.GLOBAL_UNIFORM, None, 1.0)


@dataclass(frozen=True)
class ObservationSet:
    """Sampled entries P_Omega(Y) of one pulse plus their indices."""

    shape: Tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    scheme: Scheme = Scheme.GLOBAL_UNIFORM
    seed: Optional[int] = None
    pulse_index: int = 1

    def __post_init__(self):
        n1, n2 = self.shape
        if not (len(self.rows) == len(self.cols) == len(self.values)):
            raise DomainError("rows, cols and values must have equal length")
        if len(self.rows) and (self.rows.min() < 0 or self.rows.max() >= n1
                               or self.cols.min() < 0 or self.cols.max() >= n2):
            raise DomainError("observation index out of range")
        flat = self.rows.astype(np.int64) * n2 + self.cols
        if len(np.unique(flat)) != len(flat):
            raise DomainError("duplicate observation indices")

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def fraction(self) -> float:
        return self.count / (self.shape[0] * self.shape[1])

    @property
    def mask(self) -> np.ndarray:
        grid = np.zeros(self.shape, dtype=bool)
        grid[self.rows, self.cols] = True
        return grid

    def zero_filled(self) -> np.ndarray:
        """Dense matrix with observed values in place and zeros elsewhere."""
        dense = np.zeros(self.shape, dtype=np.result_type(self.values.dtype, np.complex64))
        dense[self.rows, self.cols] = self.values
        return dense

    def row(self, r: int):
        """(cols, values) observed on antenna ``r``, ascending columns."""
        sel = self.rows == r
        order = np.argsort(self.cols[sel], kind="stable")
        return self.cols[sel][order], self.values[sel][order]


def observe(x: PulseMatrix, mask: Mask) -> ObservationSet:
    """Keep only the entries of ``x`` on the mask."""
    entries = x.entries if isinstance(x, PulseMatrix) else np.asarray(x)
    if mask.shape != entries.shape:
        raise DomainError(f"mask shape {mask.shape} does not match matrix {entries.shape}")
    rows, cols = mask.indices()
    q = x.pulse_index if isinstance(x, PulseMatrix) else 1
    return ObservationSet(entries.shape, rows, cols, entries[rows, cols].copy(),
                          mask.scheme, mask.seed, q)
