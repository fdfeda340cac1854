"""Dataset ingestion (Vowpal-Wabbit-style text) and the synthetic
sparse-recovery generator.

VW lines look like `label ['|' [namespace]] (feature[:value])*`. Feature
tokens that are plain integers become ids directly; anything else is
hashed to a 32-bit id with a seeded MurmurHash3, using an ingestion seed
independent of any sketch seed so ingestion collisions stay measurable on
their own. Duplicate feature occurrences on one line are summed; an
omitted value means 1.0.

Labels are normalized: regression labels stay real, binary labels map
{-1, 0} -> 0 and {+1, 1} -> 1, multi-class labels are made zero-based
(an all-1..C label set is shifted down by one).

The synthetic generator draws standard-normal rows and noiseless labels
from a k-sparse ground-truth vector; rows are materialized per-row on
demand from a counter-based generator, so no n-by-p array is ever needed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

from .loss import Minibatch
from .svec import SparseVec

DEFAULT_STRING_SEED = 0x5EED1E55


class VWParseError(ValueError):
    pass


_M32 = 0xFFFFFFFF


def murmur3_32(data: bytes, seed: int) -> int:
    """Reference 32-bit MurmurHash3 over a byte string."""
    c1, c2 = 0xCC9E2D51, 0x1B873593
    h = seed & _M32
    nblocks = len(data) // 4
    for i in range(nblocks):
        k = int.from_bytes(data[4 * i:4 * i + 4], "little")
        k = (k * c1) & _M32
        k = ((k << 15) | (k >> 17)) & _M32
        k = (k * c2) & _M32
        h ^= k
        h = ((h << 13) | (h >> 19)) & _M32
        h = (h * 5 + 0xE6546B64) & _M32
    tail = data[4 * nblocks:]
    k = 0
    if len(tail) >= 3:
        k ^= tail[2] << 16
    if len(tail) >= 2:
        k ^= tail[1] << 8
    if len(tail) >= 1:
        k ^= tail[0]
        k = (k * c1) & _M32
        k = ((k << 15) | (k >> 17)) & _M32
        k = (k * c2) & _M32
        h ^= k
    h ^= len(data)
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & _M32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & _M32
    h ^= h >> 16
    return h


def _parse_label(token: str, task: str, where: str) -> float | int:
    try:
        value = float(token)
    except ValueError:
        raise VWParseError(f"{where}: bad label {token!r}") from None
    if task == "regression":
        return value
    if task == "binary":
        if value in (-1.0, 0.0):
            return 0
        if value == 1.0:
            return 1
        raise VWParseError(f"{where}: binary label must be -1/0/1, "
                           f"got {token!r}")
    if not value.is_integer() or value < 0:
        raise VWParseError(f"{where}: multiclass label must be a "
                           f"non-negative integer, got {token!r}")
    return int(value)


def parse_vw(line: str, task: str = "binary", *,
             string_seed: int = DEFAULT_STRING_SEED,
             lineno: int | None = None) -> tuple[SparseVec, float | int]:
    """One example from one VW-style line."""
    where = f"line {lineno}" if lineno is not None else "line"
    stripped = line.strip()
    if not stripped:
        raise VWParseError(f"{where}: empty line")
    if "|" in stripped:
        head, _, feat_part = stripped.partition("|")
        label_tokens = head.split()
        if len(label_tokens) != 1:
            raise VWParseError(f"{where}: expected a single label before '|'")
        # a token glued to the bar is a namespace tag; skip it
        if feat_part[:1] not in ("", " ", "\t"):
            rest = feat_part.split(None, 1)
            feat_part = rest[1] if len(rest) == 2 else ""
        feat_tokens = feat_part.split()
    else:
        tokens = stripped.split()
        label_tokens, feat_tokens = tokens[:1], tokens[1:]
    label = _parse_label(label_tokens[0], task, where)

    pairs = []
    for token in feat_tokens:
        name, sep, value_str = token.partition(":")
        if not name:
            raise VWParseError(f"{where}: bad feature token {token!r}")
        if sep:
            try:
                value = float(value_str)
            except ValueError:
                raise VWParseError(f"{where}: bad feature value in "
                                   f"{token!r}") from None
        else:
            value = 1.0
        if name.isdigit():
            fid = int(name)
        else:
            fid = murmur3_32(name.encode("utf-8"), string_seed)
        pairs.append((fid, value))
    return SparseVec.from_items(pairs), label


def format_vw(x: SparseVec, label) -> str:
    """Inverse of parse_vw for integer-id examples."""
    feats = " ".join(f"{i}:{v!r}" for i, v in x.items())
    return f"{label} | {feats}".rstrip()


@dataclass
class DatasetStats:
    name: str
    p_observed: int  # smallest p with every seen id < p
    n: int
    avg_active: float

    def to_csv(self) -> str:
        return ("name,p_observed,n,avg_active\n"
                f"{self.name},{self.p_observed},{self.n},"
                f"{self.avg_active!r}\n")


class InMemoryDataset:
    """Desk-scale dataset held as a list of parsed examples."""

    def __init__(self, examples: list[tuple[SparseVec, float | int]],
                 task: str, name: str = "dataset"):
        if not examples:
            raise VWParseError("dataset is empty")
        self.examples = examples
        self.task = task
        self.name = name
        self.n = len(examples)
        max_id = max((int(x.ids[-1]) for x, _ in examples if x.nnz),
                     default=-1)
        self.p = max_id + 1
        self.n_classes = (int(max(y for _, y in examples)) + 1
                          if task == "multiclass" else 1)

    def example(self, i: int) -> tuple[SparseVec, float | int]:
        return self.examples[int(i)]

    def stats(self) -> DatasetStats:
        avg = float(np.mean([x.nnz for x, _ in self.examples]))
        return DatasetStats(self.name, self.p, self.n, avg)


def read_vw(fp: TextIO, task: str, *,
            string_seed: int = DEFAULT_STRING_SEED,
            limit: int | None = None) -> Iterator[tuple[SparseVec, float | int]]:
    """Stream parsed examples; blank lines are skipped."""
    count = 0
    for lineno, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        yield parse_vw(line, task, string_seed=string_seed, lineno=lineno)
        count += 1
        if limit is not None and count >= limit:
            return


def load_vw(path_or_fp, task: str, *, string_seed: int = DEFAULT_STRING_SEED,
            limit: int | None = None, name: str | None = None) -> InMemoryDataset:
    if isinstance(path_or_fp, (str, bytes)) or hasattr(path_or_fp, "__fspath__"):
        name = name or str(path_or_fp)
        with open(path_or_fp, "r", encoding="utf-8") as fp:
            examples = list(read_vw(fp, task, string_seed=string_seed,
                                    limit=limit))
    else:
        name = name or "stream"
        examples = list(read_vw(path_or_fp, task, string_seed=string_seed,
                                limit=limit))
    if task == "multiclass":
        labels = sorted({int(y) for _, y in examples})
        if labels and labels[0] == 1:  # 1-based label sets get shifted
            examples = [(x, int(y) - 1) for x, y in examples]
    return InMemoryDataset(examples, task, name=name)


@dataclass(frozen=True)
class SyntheticSpec:
    p: int
    n: int
    k: int
    seed: int
    weight_low: float = 0.8
    weight_high: float = 1.2
    noise: float = 0.0  # labels are exact by default

    def __post_init__(self):
        if self.k > self.p:
            raise ValueError("k cannot exceed p")
        if self.n < 1:
            raise ValueError("n must be >= 1")


_ROW_STREAM = 0
_TRUTH_STREAM = 1 << 62


def _rng(seed: int, stream: int) -> np.random.Generator:
    key = ((seed & ((1 << 64) - 1)) << 64) | (stream & ((1 << 64) - 1))
    return np.random.Generator(np.random.Philox(key=key))


class SyntheticDataset:
    """Streamed standard-normal design with a k-sparse ground truth.

    Feature ids are 1..p. Row i is regenerated on demand from a
    counter-based generator keyed by (seed, i): no n-by-p design matrix is
    ever allocated here and access is random-order safe.
    """

    task = "regression"
    n_classes = 1

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.p = spec.p
        self.n = spec.n
        self.name = f"synthetic(p={spec.p},n={spec.n},k={spec.k},seed={spec.seed})"
        self.ids = np.arange(1, spec.p + 1, dtype=np.uint64)
        rng = _rng(spec.seed, _TRUTH_STREAM)
        support = np.sort(rng.choice(np.arange(1, spec.p + 1), size=spec.k,
                                     replace=False))
        weights = rng.uniform(spec.weight_low, spec.weight_high, size=spec.k)
        self.beta_star = SparseVec(support.astype(np.uint64), weights)
        self._support_pos = support - 1  # ids are 1-based, columns 0-based

    def row(self, i: int) -> np.ndarray:
        return _rng(self.spec.seed, _ROW_STREAM + int(i)).standard_normal(self.spec.p)

    def label_for(self, i: int, row: np.ndarray) -> float:
        y = float(np.dot(row[self._support_pos], self.beta_star.vals))
        if self.spec.noise > 0.0:
            y += self.spec.noise * float(
                _rng(self.spec.seed, _ROW_STREAM + int(i)).standard_normal())
        return y

    def example(self, i: int) -> tuple[SparseVec, float]:
        row = self.row(i)
        return (SparseVec(self.ids, row, _trusted=True),
                self.label_for(i, row))

    def dense_batch(self, indices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = np.stack([self.row(i) for i in indices])
        labels = np.array([self.label_for(i, rows[j])
                           for j, i in enumerate(indices)])
        return self.ids, rows, labels

    def materialized(self) -> "MaterializedSynthetic":
        return MaterializedSynthetic(self)

    def stats(self) -> DatasetStats:
        return DatasetStats(self.name, self.p + 1, self.n, float(self.p))


class MaterializedSynthetic:
    """Desk-scale cache of a SyntheticDataset (bench-harness convenience:
    sampling with replacement would otherwise regenerate rows every step)."""

    task = "regression"
    n_classes = 1

    def __init__(self, source: SyntheticDataset):
        self.spec = source.spec
        self.p = source.p
        self.n = source.n
        self.name = source.name
        self.ids = source.ids
        self.beta_star = source.beta_star
        self._rows = np.stack([source.row(i) for i in range(source.n)])
        self._labels = np.array([source.label_for(i, self._rows[i])
                                 for i in range(source.n)])

    def row(self, i: int) -> np.ndarray:
        return self._rows[int(i)]

    def example(self, i: int) -> tuple[SparseVec, float]:
        return (SparseVec(self.ids, self._rows[int(i)], _trusted=True),
                float(self._labels[int(i)]))

    def dense_batch(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        return self.ids, self._rows[idx], self._labels[idx]


def gen_synthetic(spec: SyntheticSpec) -> tuple[SyntheticDataset, SparseVec]:
    """The dataset plus its ground-truth weight vector."""
    ds = SyntheticDataset(spec)
    return ds, ds.beta_star


def make_minibatch(dataset, indices) -> Minibatch:
    if hasattr(dataset, "dense_batch"):
        ids, rows, labels = dataset.dense_batch(indices)
        return Minibatch.from_dense_rows(ids, rows, labels)
    return Minibatch([dataset.example(i) for i in indices])


def write_vw(fp: TextIO, dataset) -> None:
    for i in range(dataset.n):
        x, y = dataset.example(i)
        fp.write(format_vw(x, y) + "\n")


def dataset_from_text(text: str, task: str, **kwargs) -> InMemoryDataset:
    return load_vw(io.StringIO(text), task, **kwargs)
