"""Wire format for the samples one antenna forwards to the fusion center.

Little-endian layout::

    header (14 bytes)
      magic        4s   b"RMC1"
      version      u8   1
      pulse_index  u16
      antenna_id   u16
      mode         u8   0 = explicit column indices, 1 = generator seed
      count        u32  number of samples
    payload, mode 0: count x (u32 column, f32 re, f32 im)
    payload, mode 1: u64 seed, then count x (f32 re, f32 im)

In seed mode the columns are ``sample_columns(seed, count, L)`` from
:mod:`mimomc.sampling`; values follow ascending column order in both modes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import DecodeError, DomainError
from .sampling import ObservationSet, Scheme, antenna_seed, sample_columns

MAGIC = b"RMC1"
VERSION = 1
MODE_INDICES = 0
MODE_SEED = 1

HEADER = struct.Struct("<4sBHHBI")
_SEED = struct.Struct("<Q")
_INDEXED = np.dtype([("col", "<u4"), ("re", "<f4"), ("im", "<f4")])
_VALUES = np.dtype([("re", "<f4"), ("im", "<f4")])


@dataclass(eq=False)
class ForwardedFragment:
    """Samples of one antenna for one pulse.

    ``columns`` is None for a seed-mode fragment decoded without knowing L;
    call :meth:`resolve` once L is known.
    """

    pulse_index: int
    antenna_id: int
    values: np.ndarray
    columns: Optional[np.ndarray] = None
    seed: Optional[int] = None

    @property
    def count(self) -> int:
        return len(self.values)

    def resolve(self, num_samples: int) -> "ForwardedFragment":
        if self.columns is None:
            self.columns = sample_columns(self.seed, self.count, num_samples)
        elif len(self.columns) and int(self.columns.max()) >= num_samples:
            raise DomainError(f"column {int(self.columns.max())} out of range for L={num_samples}")
        return self

    def __eq__(self, other):
        if not isinstance(other, ForwardedFragment):
            return NotImplemented
        same_cols = (self.columns is None and other.columns is None) or (
            self.columns is not None and other.columns is not None
            and np.array_equal(self.columns, other.columns))
        return (self.pulse_index == other.pulse_index and self.antenna_id == other.antenna_id
                and self.seed == other.seed and same_cols
                and np.array_equal(self.values, other.values))


def fragment_from_observations(obs: ObservationSet, antenna_id: int, mode: str = "indices"):
    """Slice the observations of one antenna (row) into a fragment."""
    cols, values = obs.row(antenna_id)
    values = values.astype(np.complex64)
    if mode == "seed":
        if obs.scheme is not Scheme.PER_ANTENNA or obs.seed is None:
            raise DomainError("seed-mode forwarding requires a seeded per-antenna mask")
        seed = antenna_seed(obs.seed, antenna_id)
        if not np.array_equal(sample_columns(seed, len(cols), obs.shape[1]), cols):
            raise DomainError("observed columns do not follow the per-antenna generator")
        return ForwardedFragment(obs.pulse_index, antenna_id, values, cols, seed)
    if mode != "indices":
        raise DomainError(f"unknown forwarding mode {mode!r}")
    return ForwardedFragment(obs.pulse_index, antenna_id, values, cols, None)


def encode_fragment(frag: ForwardedFragment) -> bytes:
    mode = MODE_INDICES if frag.seed is None else MODE_SEED
    header = HEADER.pack(MAGIC, VERSION, frag.pulse_index, frag.antenna_id, mode, frag.count)
    values = np.asarray(frag.values, dtype=np.complex64)
    if mode == MODE_SEED:
        body = np.empty(frag.count, dtype=_VALUES)
        body["re"], body["im"] = values.real, values.imag
        return header + _SEED.pack(frag.seed) + body.tobytes()
    body = np.empty(frag.count, dtype=_INDEXED)
    body["col"] = frag.columns
    body["re"], body["im"] = values.real, values.imag
    return header + body.tobytes()


def encode_forwarded(obs: ObservationSet, antenna_id: int, pulse_index: Optional[int] = None,
                     mode: str = "indices") -> bytes:
    """Serialize the samples antenna ``antenna_id`` forwards for one pulse."""
    frag = fragment_from_observations(obs, antenna_id, mode)
    if pulse_index is not None:
        frag.pulse_index = pulse_index
    return encode_fragment(frag)


def decode_forwarded(data: bytes, num_samples: Optional[int] = None) -> ForwardedFragment:
    """Parse one forwarded stream; raises DecodeError with the failing byte offset."""
    data = bytes(data)
    if len(data) < HEADER.size:
        raise DecodeError(f"truncated header: need {HEADER.size} bytes, got {len(data)}",
                          len(data))
    magic, version, pulse_index, antenna_id, mode, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise DecodeError(f"unknown version {version}", 4)
    if mode not in (MODE_INDICES, MODE_SEED):
        raise DecodeError(f"unknown mode {mode}", 9)
    offset = HEADER.size
    seed = None
    if mode == MODE_SEED:
        if len(data) < offset + _SEED.size:
            raise DecodeError("truncated seed", len(data))
        (seed,) = _SEED.unpack_from(data, offset)
        offset += _SEED.size
    record = _VALUES if mode == MODE_SEED else _INDEXED
    end = offset + count * record.itemsize
    if len(data) < end:
        # report the start of the first incomplete record
        whole = (len(data) - offset) // record.itemsize
        raise DecodeError(f"truncated payload: {count} records declared, {whole} present",
                          offset + whole * record.itemsize)
    if len(data) > end:
        raise DecodeError(f"{len(data) - end} trailing bytes after payload", end)
    body = np.frombuffer(data, dtype=record, count=count, offset=offset)
    values = np.empty(count, dtype=np.complex64)
    values.real, values.imag = body["re"], body["im"]
    columns = None
    if mode == MODE_INDICES:
        columns = body["col"].astype(np.int64)
        if len(np.unique(columns)) != count:
            raise DecodeError("duplicate column index", offset)
    frag = ForwardedFragment(pulse_index, antenna_id, values, columns, seed)
    if num_samples is not None:
        try:
            frag.resolve(num_samples)
        except DomainError as exc:
            raise DecodeError(str(exc), offset) from None
    return frag


def assemble(fragments: Iterable[ForwardedFragment], shape, scheme=Scheme.PER_ANTENNA,
             seed: Optional[int] = None) -> ObservationSet:
    """Merge antenna fragments of one pulse into an ObservationSet.

    The result does not depend on fragment arrival order.
    """
    fragments = sorted(fragments, key=lambda f: f.antenna_id)
    if not fragments:
        raise DomainError("no fragments to assemble")
    pulses = {f.pulse_index for f in fragments}
    if len(pulses) != 1:
        raise DomainError(f"fragments from several pulses: {sorted(pulses)}")
    ids = [f.antenna_id for f in fragments]
    if len(set(ids)) != len(ids):
        raise DomainError("duplicate antenna fragments")
    rows, cols, values = [], [], []
    for f in fragments:
        if f.antenna_id >= shape[0]:
            raise DomainError(f"antenna id {f.antenna_id} out of range")
        f.resolve(shape[1])
        rows.append(np.full(f.count, f.antenna_id, dtype=np.int64))
        cols.append(f.columns)
        values.append(f.values)
    return ObservationSet(tuple(shape), np.concatenate(rows), np.concatenate(cols),
                          np.concatenate(values), Scheme.parse(scheme), seed, pulses.pop())
