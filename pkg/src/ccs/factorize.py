"""Agglomerative search for a blockwise product approximation of the posterior.

The quality of a partition is the Monte Carlo KL divergence (up to a constant)
between the empirical model distribution and the product of its per-block
empirical distributions.  With empirical per-block masses this score is the
sum of block entropies, so merging two blocks improves it by exactly their
empirical mutual information.  :func:`agglomerate` greedily merges the pair
with the largest improvement until a single block remains.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_space import (
    BlockDistribution,
    Partition,
    SampleTrace,
    _validated_block,
    empirical_block_distribution,
)

__all__ = [
    "MergeRecord",
    "PartitionSequence",
    "block_entropy",
    "kl_score",
    "kl_score_direct",
    "merge_gain",
    "agglomerate",
]


@dataclass(frozen=True)
class MergeRecord:
    """One agglomerative step: the two blocks joined and the KL reduction."""

    first: tuple[int, ...]
    second: tuple[int, ...]
    gain: float


@dataclass(frozen=True)
class PartitionSequence:
    """Nested partitions from all-singletons down to (at most) one block.

    ``kl_scores[k]`` is the score of ``partitions[k]``; ``etas[k]`` is the
    signed score change produced by merge k+1 (non-positive up to rounding).
    """

    partitions: tuple[Partition, ...]
    kl_scores: tuple[float, ...]
    etas: tuple[float, ...]
    merge_log: tuple[MergeRecord, ...]

    def __post_init__(self):
        if len(self.kl_scores) != len(self.partitions):
            raise ValueError("one score per partition required")
        if len(self.etas) != len(self.partitions) - 1:
            raise ValueError("one eta per merge required")
        if len(self.merge_log) != len(self.etas):
            raise ValueError("one merge record per merge required")

    def __len__(self) -> int:
        return len(self.partitions)


def _entropy_from_counts(counts: np.ndarray, n: int) -> float:
    c = counts[counts > 0].astype(float)
    return float(np.log(n) - (c @ np.log(c)) / n)


def block_entropy(dist: BlockDistribution) -> float:
    """Empirical entropy of one block's sub-model distribution (nats)."""
    p = np.array([float(v) for v in dist.mass.values()])
    return float(-(p @ np.log(p)))


def _check_cover(trace: SampleTrace, partition: Partition) -> None:
    if partition.indices != tuple(range(trace.n_variables)):
        raise ValueError("partition must cover exactly the trace's variables")


def kl_score(trace: SampleTrace, partition: Partition) -> float:
    """Partition score via the entropy decomposition: sum of block entropies."""
    _check_cover(trace, partition)
    return sum(
        block_entropy(empirical_block_distribution(trace, b))
        for b in partition.blocks
    )


def kl_score_direct(trace: SampleTrace, partition: Partition) -> float:
    """Same score evaluated literally: minus the average log product mass of
    each draw under the per-block empirical distributions.

    Kept as an independent code path; tests hold it equal to
    :func:`kl_score` within 1e-10.
    """
    _check_cover(trace, partition)
    n = trace.n_samples
    total = 0.0
    for b in partition.blocks:
        _, labels, counts = _block_labels(trace, list(b))
        log_theta = np.log(counts / n)
        total += float(log_theta[labels].sum())
    return -total / n


def _block_labels(trace: SampleTrace, cols: list[int]):
    """Compact per-row sub-model ids for one block.

    Returns (n_distinct, labels, counts) where labels[i] is the id of row
    i's sub-pattern and counts[j] is the number of rows with id j.
    """
    sub = trace.matrix[:, cols]
    if len(cols) == 1:
        col = sub[:, 0].astype(np.int64)
        uniq, labels, counts = np.unique(col, return_inverse=True, return_counts=True)
        return len(uniq), labels.astype(np.int64), counts
    packed = np.ascontiguousarray(np.packbits(sub, axis=1, bitorder="little"))
    as_void = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    uniq, labels, counts = np.unique(as_void, return_inverse=True, return_counts=True)
    return len(uniq), labels.astype(np.int64), counts


def merge_gain(
    trace: SampleTrace, dist_i: BlockDistribution, dist_j: BlockDistribution
) -> float:
    """KL reduction from joining two blocks: H_i + H_j - H_joint.

    Equals the blocks' empirical mutual information, hence non-negative up
    to rounding.
    """
    if set(dist_i.block) & set(dist_j.block):
        raise ValueError("blocks must be disjoint")
    joint = empirical_block_distribution(trace, dist_i.block + dist_j.block)
    return block_entropy(dist_i) + block_entropy(dist_j) - block_entropy(joint)


class _LiveBlock:
    __slots__ = ("indices", "labels", "n_distinct", "entropy")

    def __init__(self, indices, labels, n_distinct, entropy):
        self.indices = indices
        self.labels = labels
        self.n_distinct = n_distinct
        self.entropy = entropy


def _joint_stats(a: _LiveBlock, b: _LiveBlock, n: int):
    combined = a.labels * np.int64(b.n_distinct) + b.labels
    uniq, labels, counts = np.unique(
        combined, return_inverse=True, return_counts=True
    )
    return len(uniq), labels.astype(np.int64), counts, _entropy_from_counts(counts, n)


def agglomerate(
    trace: SampleTrace,
    *,
    max_steps: int | None = None,
    max_block_size: int | None = None,
) -> PartitionSequence:
    """Greedy bottom-up merging of the partition with the best KL reduction.

    Starts from all singletons over the trace's columns (screen the trace
    first).  At each step the pair of blocks with the largest
    :func:`merge_gain` is joined; exact ties go to the pair whose blocks
    come first when the frontier is ordered by smallest member index.
    Stops at one block, after ``max_steps`` merges, or when every candidate
    pair would exceed ``max_block_size``.
    """
    n = trace.n_samples
    p = trace.n_variables
    frontier: list[_LiveBlock] = []
    for i in range(p):
        n_distinct, labels, counts = _block_labels(trace, [i])
        frontier.append(
            _LiveBlock((i,), labels, n_distinct, _entropy_from_counts(counts, n))
        )

    partitions = [Partition.singletons(range(p))]
    scores = [sum(b.entropy for b in frontier)]
    etas: list[float] = []
    merges: list[MergeRecord] = []

    # Gain cache keyed by each block's smallest member (unique per block).
    gains: dict[tuple[int, int], float] = {}

    def pair_key(a: _LiveBlock, b: _LiveBlock) -> tuple[int, int]:
        ka, kb = a.indices[0], b.indices[0]
        return (ka, kb) if ka < kb else (kb, ka)

    def gain_of(a: _LiveBlock, b: _LiveBlock) -> float:
        key = pair_key(a, b)
        if key not in gains:
            _, _, _, h_joint = _joint_stats(a, b, n)
            gains[key] = a.entropy + b.entropy - h_joint
        return gains[key]

    steps = 0
    while len(frontier) > 1 and (max_steps is None or steps < max_steps):
        frontier.sort(key=lambda blk: blk.indices[0])
        best: tuple[int, int] | None = None
        best_gain = -np.inf
        for ia in range(len(frontier)):
            for ib in range(ia + 1, len(frontier)):
                a, b = frontier[ia], frontier[ib]
                if (
                    max_block_size is not None
                    and len(a.indices) + len(b.indices) > max_block_size
                ):
                    continue
                g = gain_of(a, b)
                if g > best_gain:
                    best_gain = g
                    best = (ia, ib)
        if best is None:
            break

        a, b = frontier[best[0]], frontier[best[1]]
        n_distinct, labels, counts, h_joint = _joint_stats(a, b, n)
        merged = _LiveBlock(
            tuple(sorted(a.indices + b.indices)), labels, n_distinct, h_joint
        )
        gain = a.entropy + b.entropy - h_joint
        for blk in (a, b):
            for other in frontier:
                if other is not blk:
                    gains.pop(pair_key(blk, other), None)
        frontier = [blk for blk in frontier if blk is not a and blk is not b]
        frontier.append(merged)
        frontier.sort(key=lambda blk: blk.indices[0])

        partitions.append(Partition(tuple(blk.indices for blk in frontier)))
        scores.append(scores[-1] - gain)
        etas.append(-gain)
        merges.append(MergeRecord(first=a.indices, second=b.indices, gain=gain))
        steps += 1

    return PartitionSequence(
        partitions=tuple(partitions),
        kl_scores=tuple(scores),
        etas=tuple(etas),
        merge_log=tuple(merges),
    )
