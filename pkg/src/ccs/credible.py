"""Greedy construction of Cartesian credible sets and partition selection.

A Cartesian credible set pairs a partition of the variables with one set of
sub-models per block; its members are all blockwise concatenations and its
mass is the product of the per-block retained masses.  Construction starts
from each block's full observed support and repeatedly discards the cheapest
sub-model (smallest mass relative to what its removal buys in set size),
stopping just before the product mass would drop below the requested level.

Mass bookkeeping uses exact fractions so removals, ties, and the stopping
rule are deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model_space import (
    BlockDistribution,
    Model,
    Partition,
    SampleTrace,
    SubModel,
    empirical_block_distribution,
)
from .factorize import PartitionSequence

__all__ = [
    "BlockCredibleSet",
    "CartesianCredibleSet",
    "CriterionRow",
    "CriterionTrace",
    "SIGN_MODES",
    "find_block_sets",
    "block_pip",
    "modal_submodel",
    "partition_penalty",
    "select_partition",
]

SIGN_MODES = ("penalty-added", "paper-literal")


def _zero_submodel(width: int) -> SubModel:
    return Model.from_bits([0] * width)


@dataclass(frozen=True)
class BlockCredibleSet:
    """Retained sub-models of one block, ordered by decreasing mass.

    ``pi`` is the total retained mass, ``block_pip`` the retained mass of
    sub-models that include at least one variable, ``modal`` the highest-mass
    member (ties: lexicographically smallest).
    """

    block: tuple[int, ...]
    submodels: tuple[SubModel, ...]
    masses: tuple[Fraction, ...]
    pi: Fraction
    block_pip: Fraction
    modal: SubModel

    def __post_init__(self):
        if len(self.submodels) != len(self.masses):
            raise ValueError("one mass per sub-model required")
        if self.submodels and self.modal not in self.submodels:
            raise ValueError("modal sub-model must belong to the set")

    def __len__(self) -> int:
        return len(self.submodels)


@dataclass(frozen=True)
class CartesianCredibleSet:
    """A partition plus per-block credible sets with product mass >= level."""

    level: float
    partition: Partition
    blocks: tuple[BlockCredibleSet, ...]
    mass: Fraction
    log_mass: float
    log_size: float
    screened_out: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.blocks) != self.partition.n_blocks:
            raise ValueError("one block credible set per partition block required")
        for blk, bset in zip(self.partition.blocks, self.blocks):
            if blk != bset.block:
                raise ValueError("partition blocks and block sets must align")

    @property
    def n_models(self) -> int:
        out = 1
        for b in self.blocks:
            out *= len(b)
        return out


@dataclass(frozen=True)
class CriterionRow:
    partition_index: int
    log_size: float
    penalty: float
    criterion: float
    chosen: bool


@dataclass(frozen=True)
class CriterionTrace:
    """Criterion value per candidate partition; exactly one row is chosen."""

    rows: tuple[CriterionRow, ...]
    penalty_scale: float
    sign_mode: str

    def __post_init__(self):
        if sum(r.chosen for r in self.rows) != 1:
            raise ValueError("exactly one partition must be chosen")


def modal_submodel(dist: BlockDistribution) -> SubModel:
    """Highest-mass sub-model; ties go to the lexicographically smallest."""
    return min(dist.mass, key=lambda sub: (-dist.mass[sub], sub.bits))


def block_pip(obj: BlockDistribution | BlockCredibleSet) -> Fraction:
    """Retained mass of sub-models including at least one variable."""
    if isinstance(obj, BlockCredibleSet):
        zero = _zero_submodel(len(obj.block))
        return sum(
            (m for sub, m in zip(obj.submodels, obj.masses) if sub != zero),
            Fraction(0),
        )
    zero = _zero_submodel(len(obj.block))
    return sum((m for sub, m in obj.mass.items() if sub != zero), Fraction(0))


class _GreedyBlock:
    """Mutable per-block state for the removal loop.

    Entries are sorted by (mass, bits) ascending; ``cursor`` points at the
    next removal candidate, so the retained set is ``entries[cursor:]``.
    """

    __slots__ = ("index", "block", "entries", "cursor", "pi")

    def __init__(self, index: int, dist: BlockDistribution):
        self.index = index
        self.block = dist.block
        self.entries = sorted(dist.mass.items(), key=lambda kv: (kv[1], kv[0].bits))
        self.cursor = 0
        self.pi = sum((m for _, m in self.entries), Fraction(0))

    @property
    def n_remaining(self) -> int:
        return len(self.entries) - self.cursor

    @property
    def next_removal_mass(self) -> Fraction:
        return self.entries[self.cursor][1]

    def criterion(self) -> Fraction:
        # (min retained mass / pi) / (1 / #S): cheap-to-remove blocks score low
        return self.next_removal_mass * self.n_remaining / self.pi

    def remove(self) -> Fraction:
        mass = self.entries[self.cursor][1]
        self.cursor += 1
        self.pi -= mass
        return mass


def find_block_sets(
    dists: Sequence[BlockDistribution],
    level,
    *,
    screened_out: Sequence[int] = (),
) -> CartesianCredibleSet:
    """Build the Cartesian credible set at ``level`` over the given blocks.

    Starting from full observed support, repeatedly removes the minimum-mass
    sub-model from the block with the smallest removal criterion (ties:
    smallest block position, then lexicographically smallest sub-model) and
    stops before any removal that would push the product mass below
    ``level``.  Blocks reduced to a single sub-model are never emptied.
    """
    lam = level if isinstance(level, Fraction) else Fraction(level)
    if not 0 < lam <= 1:
        raise ValueError(f"credibility level must be in (0, 1], got {level}")
    if not dists:
        raise ValueError("at least one block distribution required")
    seen: set[int] = set()
    for d in dists:
        overlap = seen & set(d.block)
        if overlap:
            raise ValueError(f"blocks overlap on indices {sorted(overlap)}")
        seen.update(d.block)

    blocks = [_GreedyBlock(i, d) for i, d in enumerate(dists)]
    product = Fraction(1)
    for b in blocks:
        product *= b.pi

    while True:
        candidates = [b for b in blocks if b.n_remaining >= 2]
        if not candidates:
            break
        target = min(candidates, key=lambda b: (b.criterion(), b.index))
        removed_mass = target.next_removal_mass
        new_pi = target.pi - removed_mass
        new_product = product / target.pi * new_pi
        if new_product < lam:
            break
        target.remove()
        product = new_product

    out_blocks = []
    log_mass = 0.0
    log_size = 0.0
    for b in blocks:
        remaining = sorted(
            b.entries[b.cursor :], key=lambda kv: (-kv[1], kv[0].bits)
        )
        subs = tuple(sub for sub, _ in remaining)
        masses = tuple(m for _, m in remaining)
        zero = _zero_submodel(len(b.block))
        bp = sum((m for sub, m in remaining if sub != zero), Fraction(0))
        out_blocks.append(
            BlockCredibleSet(
                block=b.block,
                submodels=subs,
                masses=masses,
                pi=b.pi,
                block_pip=bp,
                modal=subs[0],
            )
        )
        log_mass += math.log(float(b.pi))
        log_size += math.log(len(subs))

    return CartesianCredibleSet(
        level=float(lam),
        partition=Partition(tuple(b.block for b in blocks)),
        blocks=tuple(out_blocks),
        mass=product,
        log_mass=log_mass,
        log_size=log_size,
        screened_out=tuple(int(i) for i in screened_out),
    )


def partition_penalty(partition: Partition, penalty_scale: float = 2.0) -> float:
    """Block-size penalty: K*log(scale) + sum over blocks of logGamma(size).

    This is the log of the Dirichlet-process exchangeable partition
    probability function with concentration ``penalty_scale``; it grows
    quickly with block size.
    """
    if penalty_scale <= 0:
        raise ValueError(f"penalty scale must be positive, got {penalty_scale}")
    return partition.n_blocks * math.log(penalty_scale) + sum(
        math.lgamma(size) for size in partition.sizes
    )


def select_partition(
    sequence: PartitionSequence,
    trace: SampleTrace,
    level,
    penalty_scale: float = 2.0,
    sign_mode: str = "penalty-added",
) -> tuple[int, CriterionTrace, CartesianCredibleSet]:
    """Pick the operating partition from an agglomerative sequence.

    Builds the credible set at ``level`` for every partition, scores each as
    log set size plus (default) or minus ("paper-literal") the block-size
    penalty, and returns the argmin; ties go to the earliest (finest)
    partition.
    """
    if sign_mode not in SIGN_MODES:
        raise ValueError(f"sign_mode must be one of {SIGN_MODES}, got {sign_mode!r}")
    if len(sequence) == 0:
        raise ValueError("partition sequence is empty")

    dist_cache: dict[tuple[int, ...], BlockDistribution] = {}

    def dist_for(block: tuple[int, ...]) -> BlockDistribution:
        if block not in dist_cache:
            dist_cache[block] = empirical_block_distribution(trace, block)
        return dist_cache[block]

    sets: list[CartesianCredibleSet] = []
    stats: list[tuple[float, float, float]] = []
    best_idx = 0
    best_value = math.inf
    for j, partition in enumerate(sequence.partitions):
        canonical = partition.sorted_by_min()
        ccs = find_block_sets([dist_for(b) for b in canonical.blocks], level)
        penalty = partition_penalty(canonical, penalty_scale)
        if sign_mode == "penalty-added":
            value = ccs.log_size + penalty
        else:
            value = ccs.log_size - penalty
        sets.append(ccs)
        stats.append((ccs.log_size, penalty, value))
        if value < best_value:
            best_value = value
            best_idx = j

    rows = tuple(
        CriterionRow(
            partition_index=j,
            log_size=ls,
            penalty=pen,
            criterion=val,
            chosen=(j == best_idx),
        )
        for j, (ls, pen, val) in enumerate(stats)
    )
    trace_out = CriterionTrace(
        rows=rows, penalty_scale=float(penalty_scale), sign_mode=sign_mode
    )
    return best_idx, trace_out, sets[best_idx]
