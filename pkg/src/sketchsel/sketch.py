"""Count sketch: a d x c grid of signed-hash accumulators.

ADD is linear (signed scatter into one bucket per row), QUERY is the median
over rows of the sign-corrected counters, so any single-row collision is
outvoted as long as most rows stay clean. Memory is Theta(d*c) regardless
of how large the feature ids get; the ambient dimension never materializes.

Hashing is a seeded 32-bit MurmurHash3-style mix of the feature id, with an
independent lane per (row, purpose) pair derived from the table seed, so a
table is reproducible across runs and platforms from (rows, width, seed)
alone. Buckets are hash mod width; the sign is +1 iff the hash's low bit is
set.

Tables are single-writer. Concurrent read-only queries between mutations
are safe; experiments parallelize across trials, each owning its tables.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from . import _kernels
from .svec import SparseVec

_MAGIC = b"CSK1"
_VERSION = 1
_M64 = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15

def _one_id(feature: int) -> np.ndarray:
    return np.array([feature], dtype=np.uint64)


def _splitmix64(z: int) -> int:
    z &= _M64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _M64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _M64
    z ^= z >> 31
    return z


def lane_seeds(seed: int, rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row 32-bit hash seeds (index lanes, sign lanes) from a 64-bit seed.

    Lane 2*j feeds the bucket hash of row j, lane 2*j+1 the sign hash.
    """
    lanes = [_splitmix64(seed + (lane + 1) * _GOLD) & 0xFFFFFFFF
             for lane in range(2 * rows)]
    return (np.array(lanes[0::2], dtype=np.uint32),
            np.array(lanes[1::2], dtype=np.uint32))


class CountSketchTable:
    """d rows of c buckets with per-row index/sign hash lanes.

    rows * width accumulators of float64; a fresh table is all zeros.
    """

    def __init__(self, rows: int, width: int, seed: int):
        if rows < 1 or width < 1:
            raise ValueError("rows and width must be positive")
        self.rows = int(rows)
        self.width = int(width)
        self.seed = int(seed) & _M64
        self.counters = np.zeros((self.rows, self.width))
        self.index_seeds, self.sign_seeds = lane_seeds(self.seed, self.rows)

    @property
    def total_size(self) -> int:
        return self.rows * self.width

    def _check_row(self, row: int) -> None:
        if not 0 <= row < self.rows:
            raise IndexError(f"row {row} out of range [0, {self.rows})")

    def hash_index(self, row: int, feature: int) -> int:
        """Deterministic bucket of a feature in one row, in [0, width)."""
        self._check_row(row)
        return int(_kernels.bucket_hash(int(self.index_seeds[row]),
                                        self.width, _one_id(feature))[0])

    def hash_sign(self, row: int, feature: int) -> int:
        """Deterministic sign of a feature in one row, in {+1, -1}."""
        self._check_row(row)
        return int(_kernels.sign_hash(int(self.sign_seeds[row]),
                                      _one_id(feature))[0])

    def buckets(self, row: int, ids: np.ndarray) -> np.ndarray:
        self._check_row(row)
        return _kernels.bucket_hash(int(self.index_seeds[row]), self.width, ids)

    def signs(self, row: int, ids: np.ndarray) -> np.ndarray:
        self._check_row(row)
        return _kernels.sign_hash(int(self.sign_seeds[row]), ids)

    def add(self, feature: int, delta: float) -> None:
        """Add hash_sign(j, feature)*delta to row j's bucket, for every row."""
        if not np.isfinite(delta):
            raise ValueError("delta must be finite")
        _kernels.sketch_add(self.counters, self.index_seeds, self.sign_seeds,
                            _one_id(feature), np.array([delta]))

    def add_sparse(self, v: SparseVec) -> None:
        """Batched add of every entry of v; order independent."""
        if v.nnz == 0:
            return
        _kernels.sketch_add(self.counters, self.index_seeds, self.sign_seeds,
                            v.ids, v.vals)

    def query(self, feature: int) -> float:
        """Median over rows of the sign-corrected counter for one feature."""
        return float(_kernels.sketch_query(self.counters, self.index_seeds,
                                           self.sign_seeds,
                                           _one_id(feature))[0])

    def query_many(self, ids: np.ndarray) -> np.ndarray:
        if len(ids) == 0:
            return np.empty(0)
        return _kernels.sketch_query(self.counters, self.index_seeds,
                                     self.sign_seeds, ids)

    def save(self, fp: BinaryIO) -> None:
        """Header {magic, version, rows, width, seed} then row-major counters,
        all little-endian; round-trips bit-exactly."""
        fp.write(_MAGIC)
        fp.write(struct.pack("<IIIQ", _VERSION, self.rows, self.width,
                             self.seed))
        fp.write(self.counters.astype("<f8", copy=False).tobytes())

    @classmethod
    def load(cls, fp: BinaryIO) -> "CountSketchTable":
        magic = fp.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad sketch magic {magic!r}")
        version, rows, width, seed = struct.unpack("<IIIQ", fp.read(20))
        if version != _VERSION:
            raise ValueError(f"unsupported sketch version {version}")
        table = cls(rows, width, seed)
        raw = fp.read(rows * width * 8)
        if len(raw) != rows * width * 8:
            raise ValueError("truncated sketch payload")
        table.counters[:] = np.frombuffer(raw, dtype="<f8").reshape(rows, width)
        return table

    def __eq__(self, other) -> bool:
        return (isinstance(other, CountSketchTable)
                and self.rows == other.rows and self.width == other.width
                and self.seed == other.seed
                and np.array_equal(self.counters, other.counters))
