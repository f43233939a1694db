"""Core immutable types for sampled model spaces.

A model is a binary inclusion vector over p variables; a trace is a matrix
of N sampled models; a partition splits the variable indices into disjoint
blocks; a block distribution is the empirical probability mass over the
sub-patterns observed inside one block.  Everything here is immutable after
construction and safe to share across threads.

Masses are kept as exact :class:`fractions.Fraction` values (counts over N)
so that ties, products and comparisons are deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Model",
    "SubModel",
    "SampleTrace",
    "Partition",
    "BlockDistribution",
    "restrict",
    "empirical_block_distribution",
    "log_cardinality",
]

_SUM_TOL = Fraction(1, 10**12)


def _as_binary_array(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D bit vector, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit vector entries must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


@dataclass(frozen=True)
class Model:
    """Inclusion vector stored as a packed bit string (8 bits per byte, LSB first).

    Equality and hashing operate on the packed bytes, so models work as
    dictionary keys even when N and p are large.
    """

    packed: bytes
    n_bits: int

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("a model needs at least one variable")
        if len(self.packed) != (self.n_bits + 7) // 8:
            raise ValueError("packed length does not match n_bits")
        pad = -self.n_bits % 8
        if pad and (self.packed[-1] >> (8 - pad)):
            raise ValueError("padding bits beyond n_bits must be zero")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "Model":
        arr = _as_binary_array(list(bits) if not isinstance(bits, np.ndarray) else bits)
        return cls(np.packbits(arr, bitorder="little").tobytes(), int(arr.size))

    def to_array(self) -> np.ndarray:
        raw = np.frombuffer(self.packed, dtype=np.uint8)
        return np.unpackbits(raw, count=self.n_bits, bitorder="little")

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(int(b) for b in self.to_array())

    def count(self) -> int:
        """Number of included variables (population count)."""
        return int.from_bytes(self.packed, "little").bit_count()

    def __len__(self) -> int:
        return self.n_bits

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.to_array())

    def __repr__(self) -> str:
        return f"Model('{self}')"


# A sub-model is the restriction of a model to one block; same representation,
# shorter length.
SubModel = Model


class SampleTrace:
    """N sampled inclusion vectors with one label per variable.

    The matrix is held as a read-only uint8 array of shape (N, p); rows are
    kept MCMC draws in sample order.
    """

    __slots__ = ("_matrix", "_labels")

    def __init__(self, matrix, labels: Sequence[str]):
        arr = np.asarray(matrix)
        if arr.ndim != 2:
            raise ValueError(f"trace matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("trace needs at least one sample and one variable")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("trace entries must be 0 or 1")
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        labels = tuple(str(l) for l in labels)
        if len(labels) != arr.shape[1]:
            raise ValueError(
                f"got {len(labels)} labels for {arr.shape[1]} variables"
            )
        if len(set(labels)) != len(labels):
            raise ValueError("variable labels must be distinct")
        arr.setflags(write=False)
        self._matrix = arr
        self._labels = labels

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def n_samples(self) -> int:
        return self._matrix.shape[0]

    @property
    def n_variables(self) -> int:
        return self._matrix.shape[1]

    def model(self, k: int) -> Model:
        return Model.from_bits(self._matrix[k])

    def models(self) -> Iterator[Model]:
        for row in self._matrix:
            yield Model.from_bits(row)

    def packed_rows(self) -> np.ndarray:
        """Rows packed to ceil(p/8) bytes each (LSB-first), shape (N, w)."""
        return np.packbits(self._matrix, axis=1, bitorder="little")

    def restrict_columns(self, indices: Sequence[int]) -> "SampleTrace":
        """New trace keeping only the given columns, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("need at least one column index")
        if idx.min() < 0 or idx.max() >= self.n_variables:
            raise ValueError("column index out of range")
        if len(set(idx.tolist())) != idx.size:
            raise ValueError("column indices must be distinct")
        return SampleTrace(self._matrix[:, idx], [self._labels[i] for i in idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleTrace):
            return NotImplemented
        return self._labels == other._labels and np.array_equal(
            self._matrix, other._matrix
        )

    def __repr__(self) -> str:
        return f"SampleTrace(n_samples={self.n_samples}, n_variables={self.n_variables})"


def _validated_block(block, p: int | None = None) -> tuple[int, ...]:
    idx = tuple(sorted(int(i) for i in block))
    if not idx:
        raise ValueError("block must be non-empty")
    if len(set(idx)) != len(idx):
        raise ValueError("block indices must be distinct")
    if idx[0] < 0:
        raise ValueError("block indices must be non-negative")
    if p is not None and idx[-1] >= p:
        raise ValueError(f"block index {idx[-1]} out of range for p={p}")
    return idx


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of variable indices.

    Indices inside a block are stored sorted ascending so sub-model bit
    patterns are canonical; block order is preserved as given.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        normalized = tuple(_validated_block(b) for b in self.blocks)
        if not normalized:
            raise ValueError("partition must have at least one block")
        seen: set[int] = set()
        for b in normalized:
            for i in b:
                if i in seen:
                    raise ValueError(f"index {i} appears in more than one block")
                seen.add(i)
        object.__setattr__(self, "blocks", normalized)

    @classmethod
    def singletons(cls, indices: Iterable[int]) -> "Partition":
        return cls(tuple((int(i),) for i in indices))

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(sorted(i for b in self.blocks for i in b))

    def merge(self, i: int, j: int) -> "Partition":
        """Partition with blocks i and j joined (placed at min(i, j))."""
        if i == j:
            raise ValueError("cannot merge a block with itself")
        i, j = min(i, j), max(i, j)
        merged = tuple(sorted(self.blocks[i] + self.blocks[j]))
        out = [merged if k == i else b for k, b in enumerate(self.blocks) if k != j]
        return Partition(tuple(out))

    def sorted_by_min(self) -> "Partition":
        return Partition(tuple(sorted(self.blocks, key=lambda b: b[0])))

    def as_sets(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(b) for b in self.blocks)

    def relabel(self, mapping: Sequence[int]) -> "Partition":
        """Map every index through ``mapping`` (e.g. reduced -> original)."""
        return Partition(tuple(tuple(int(mapping[i]) for i in b) for b in self.blocks))


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a probability")


@dataclass(frozen=True, eq=False)
class BlockDistribution:
    """Probability mass over the sub-models observed in one block.

    Only sub-models with positive mass are stored; anything absent has
    implicit mass zero.  Masses over the support must sum to one.
    """

    block: tuple[int, ...]
    mass: Mapping[SubModel, Fraction]

    def __post_init__(self):
        block = _validated_block(self.block)
        width = len(block)
        clean: dict[SubModel, Fraction] = {}
        for sub, value in self.mass.items():
            if not isinstance(sub, Model):
                raise TypeError("support keys must be SubModel instances")
            if sub.n_bits != width:
                raise ValueError(
                    f"sub-model width {sub.n_bits} does not match block size {width}"
                )
            frac = _as_fraction(value)
            if frac <= 0 or frac > 1:
                raise ValueError(f"sub-model mass {frac} outside (0, 1]")
            clean[sub] = frac
        if not clean:
            raise ValueError("block distribution needs non-empty support")
        total = sum(clean.values())
        if abs(total - 1) > _SUM_TOL:
            raise ValueError(f"support masses sum to {float(total)}, expected 1")
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "mass", MappingProxyType(clean))

    @classmethod
    def from_mapping(cls, block, mapping: Mapping) -> "BlockDistribution":
        """Build from ``{bits: probability}``; zero-mass entries are dropped.

        Keys may be SubModels, bit tuples/lists, or 0/1 strings; values may
        be Fraction, int, float, or strings like ``"9/10"``.
        """
        clean: dict[SubModel, Fraction] = {}
        for key, value in mapping.items():
            frac = _as_fraction(value)
            if frac == 0:
                continue
            if isinstance(key, Model):
                sub = key
            elif isinstance(key, str):
                sub = Model.from_bits([int(c) for c in key])
            else:
                sub = Model.from_bits(key)
            clean[sub] = frac
        return cls(tuple(block), clean)

    @property
    def support(self) -> tuple[SubModel, ...]:
        return tuple(sorted(self.mass, key=lambda m: m.bits))

    @property
    def n_support(self) -> int:
        return len(self.mass)

    def probability(self, sub: SubModel) -> Fraction:
        return self.mass.get(sub, Fraction(0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockDistribution):
            return NotImplemented
        return self.block == other.block and dict(self.mass) == dict(other.mass)

    def __repr__(self) -> str:
        return f"BlockDistribution(block={self.block}, n_support={self.n_support})"


def restrict(model: Model, block: Iterable[int]) -> SubModel:
    """Project a model onto a block: output bit k is the model bit at the
    k-th index of the block (indices sorted ascending)."""
    idx = _validated_block(block, model.n_bits)
    return Model.from_bits(model.to_array()[list(idx)])


def _packed_row_counts(sub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique packed rows of a (N, l) 0/1 matrix with their counts."""
    packed = np.packbits(sub, axis=1, bitorder="little")
    packed = np.ascontiguousarray(packed)
    as_void = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    uniq, counts = np.unique(as_void, return_counts=True)
    return uniq, counts


def empirical_block_distribution(trace: SampleTrace, block) -> BlockDistribution:
    """Empirical mass of each sub-model within a block: count over N.

    Sub-models never observed are absent from the map (implicit mass zero),
    which keeps the support at most min(N, 2^l) regardless of block size.
    """
    idx = _validated_block(block, trace.n_variables)
    sub = trace.matrix[:, list(idx)]
    uniq, counts = _packed_row_counts(sub)
    n = trace.n_samples
    width = len(idx)
    mass = {
        Model(row.tobytes(), width): Fraction(int(c), n)
        for row, c in zip(uniq, counts)
    }
    return BlockDistribution(idx, mass)


def log_cardinality(sets: Sequence) -> float:
    """Sum of log set sizes (nats); accepts sized collections or plain ints."""
    total = 0.0
    for s in sets:
        size = s if isinstance(s, int) else len(s)
        if size < 1:
            raise ValueError("every block credible set must be non-empty")
        total += math.log(size)
    return total
