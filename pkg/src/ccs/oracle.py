"""Brute-force reference implementations for validation.

Everything here trades efficiency for obviousness: exhaustive sums over the
model space, exact posterior enumeration at fixed hyperparameters, a full
scan over all partitions, and structural validation of credible sets.  The
enumeration bounds are hard refusals so a stray call cannot trigger an
exponential blowup.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .credible import CartesianCredibleSet
from .factorize import kl_score
from .model_space import (
    BlockDistribution,
    Model,
    Partition,
    SampleTrace,
    _as_fraction,
    empirical_block_distribution,
    restrict,
)
from .sampler import MarginalEngine, SingularModelError, _safe_log

__all__ = [
    "MODEL_ENUM_LIMIT",
    "PARTITION_ENUM_LIMIT",
    "EnumerationBoundError",
    "ExplicitDistribution",
    "ValidationReport",
    "marginal_block_distribution",
    "product_distribution",
    "exhaustive_set_mass",
    "exact_posterior_enumeration",
    "set_partitions",
    "exhaustive_partition_scan",
    "validate_credible_set",
]

MODEL_ENUM_LIMIT = 20
PARTITION_ENUM_LIMIT = 8

_SUM_TOL = Fraction(1, 10**12)


class EnumerationBoundError(ValueError):
    """Raised when an exhaustive operation would exceed its hard size bound."""


@dataclass(frozen=True, eq=False)
class ExplicitDistribution:
    """A fully enumerated distribution over models of a common length."""

    atoms: Mapping[Model, Fraction]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("distribution needs at least one atom")
        widths = {m.n_bits for m in self.atoms}
        if len(widths) != 1:
            raise ValueError("all models must have the same length")
        clean = {m: _as_fraction(v) for m, v in self.atoms.items()}
        if any(v < 0 for v in clean.values()):
            raise ValueError("probabilities must be non-negative")
        total = sum(clean.values())
        if abs(total - 1) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {float(total)}, expected 1")
        object.__setattr__(self, "atoms", MappingProxyType(clean))

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "ExplicitDistribution":
        clean: dict[Model, Fraction] = {}
        for key, value in mapping.items():
            if isinstance(key, Model):
                model = key
            elif isinstance(key, str):
                model = Model.from_bits([int(c) for c in key])
            else:
                model = Model.from_bits(key)
            clean[model] = _as_fraction(value)
        return cls(clean)

    @property
    def n_variables(self) -> int:
        return next(iter(self.atoms)).n_bits

    def probability(self, model: Model) -> Fraction:
        return self.atoms.get(model, Fraction(0))

    def as_trace(self, *, max_rows: int = 2_000_000) -> SampleTrace:
        """Trace enumerating every atom with multiplicity proportional to its
        mass, so empirical frequencies reproduce the distribution exactly.

        Requires rational atom masses with a small common denominator.
        """
        denom = math.lcm(*(v.denominator for v in self.atoms.values()))
        if denom > max_rows:
            raise ValueError(
                f"common denominator {denom} exceeds max_rows={max_rows}"
            )
        rows = []
        for model in sorted(self.atoms, key=lambda m: m.bits):
            copies = int(self.atoms[model] * denom)
            if copies:
                rows.append(np.tile(model.to_array(), (copies, 1)))
        matrix = np.concatenate(rows, axis=0)
        labels = [f"x{i + 1}" for i in range(self.n_variables)]
        return SampleTrace(matrix, labels)


def marginal_block_distribution(
    dist: ExplicitDistribution, block: Iterable[int]
) -> BlockDistribution:
    """Marginal of an explicit distribution on one block of indices."""
    totals: dict[Model, Fraction] = {}
    block = tuple(block)
    for model, mass in dist.atoms.items():
        if mass == 0:
            continue
        sub = restrict(model, block)
        totals[sub] = totals.get(sub, Fraction(0)) + mass
    return BlockDistribution(tuple(sorted(int(i) for i in block)), totals)


def product_distribution(dists: Sequence[BlockDistribution]) -> ExplicitDistribution:
    """Explicit distribution factorizing exactly over the given blocks."""
    blocks = [d.block for d in dists]
    p = sum(len(b) for b in blocks)
    covered = sorted(i for b in blocks for i in b)
    if covered != list(range(p)):
        raise ValueError("blocks must partition 0..p-1")
    if p > MODEL_ENUM_LIMIT:
        raise EnumerationBoundError(f"p={p} exceeds the bound {MODEL_ENUM_LIMIT}")
    atoms: dict[Model, Fraction] = {}
    supports = [sorted(d.mass.items(), key=lambda kv: kv[0].bits) for d in dists]
    for combo in itertools.product(*supports):
        bits = np.zeros(p, dtype=np.uint8)
        mass = Fraction(1)
        for (sub, m), block in zip(combo, blocks):
            bits[list(block)] = sub.to_array()
            mass *= m
        atoms[Model.from_bits(bits)] = mass
    return ExplicitDistribution(atoms)


def exhaustive_set_mass(
    dist: ExplicitDistribution, cset: CartesianCredibleSet
) -> Fraction:
    """Definition-level mass of a Cartesian credible set: the sum of atom
    probabilities over every blockwise concatenation of its members."""
    p = dist.n_variables
    if p > MODEL_ENUM_LIMIT:
        raise EnumerationBoundError(f"p={p} exceeds the bound {MODEL_ENUM_LIMIT}")
    blocks = [b.block for b in cset.blocks]
    covered = sorted(i for b in blocks for i in b)
    if covered != list(range(p)):
        raise ValueError(
            "credible-set blocks must cover all variables of the distribution"
        )
    total = Fraction(0)
    for combo in itertools.product(*(b.submodels for b in cset.blocks)):
        bits = np.zeros(p, dtype=np.uint8)
        for sub, block in zip(combo, blocks):
            bits[list(block)] = sub.to_array()
        total += dist.probability(Model.from_bits(bits))
    return total


def exact_posterior_enumeration(
    y, X, g: float, inclusion_prob: float
) -> ExplicitDistribution:
    """Normalized posterior over all 2^p models at fixed slab variance and
    inclusion probability (no hyperpriors)."""
    engine = MarginalEngine(y, X)
    p = engine.p
    if p > MODEL_ENUM_LIMIT:
        raise EnumerationBoundError(f"p={p} exceeds the bound {MODEL_ENUM_LIMIT}")
    pi = float(inclusion_prob)
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"inclusion probability must be in [0, 1], got {pi}")
    log_pi = _safe_log(pi)
    log_1mpi = _safe_log(1.0 - pi)

    models: list[Model] = []
    log_weights = np.full(2**p, -np.inf)
    for code in range(2**p):
        bits = np.array([(code >> i) & 1 for i in range(p)], dtype=np.uint8)
        models.append(Model.from_bits(bits))
        k = int(bits.sum())
        # 0 * log(0) is 0 here, not NaN
        log_prior = (k * log_pi if k else 0.0) + ((p - k) * log_1mpi if p > k else 0.0)
        if log_prior == -math.inf:
            continue
        try:
            log_weights[code] = engine.loglik(np.flatnonzero(bits), g) + log_prior
        except SingularModelError:
            continue
    norm = float(logsumexp(log_weights))
    probs = np.exp(log_weights - norm)
    atoms = {
        m: Fraction(float(q)) for m, q in zip(models, probs) if q > 0
    }
    return ExplicitDistribution(atoms)


def set_partitions(items: Sequence[int]):
    """All set partitions of ``items`` in a canonical deterministic order
    (first element's block grows first)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in set_partitions(rest):
        for i in range(len(sub)):
            yield sub[:i] + [[first] + sub[i]] + sub[i + 1 :]
        yield [[first]] + sub


def exhaustive_partition_scan(
    trace: SampleTrace,
) -> dict[int, tuple[Partition, float]]:
    """KL-best partition at every block count, by scanning all partitions.

    Returns ``{n_blocks: (partition, score)}``; ties keep the first
    partition in canonical enumeration order.
    """
    p = trace.n_variables
    if p > PARTITION_ENUM_LIMIT:
        raise EnumerationBoundError(f"p={p} exceeds the bound {PARTITION_ENUM_LIMIT}")
    best: dict[int, tuple[Partition, float]] = {}
    for raw in set_partitions(list(range(p))):
        partition = Partition(tuple(tuple(sorted(b)) for b in raw)).sorted_by_min()
        score = kl_score(trace, partition)
        key = partition.n_blocks
        if key not in best or score < best[key][1]:
            best[key] = (partition, score)
    return best


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    failures: tuple[str, ...]
    mass: float

    def __bool__(self) -> bool:
        return self.passed


def validate_credible_set(
    source: ExplicitDistribution | SampleTrace,
    cset: CartesianCredibleSet,
    level: float,
) -> ValidationReport:
    """Structural and mass checks for a Cartesian credible set.

    ``source`` is either the explicit distribution the set was built from
    (mass checked by exhaustive summation) or a trace (mass checked as the
    product of recomputed per-block retained masses).
    """
    failures: list[str] = []

    seen: set[int] = set()
    for bset in cset.blocks:
        if len(bset.submodels) == 0:
            failures.append(f"empty block {bset.block}")
            continue
        if set(bset.block) & seen:
            failures.append(f"partition blocks overlap at {bset.block}")
        seen.update(bset.block)
        if abs(sum(bset.masses, Fraction(0)) - bset.pi) > _SUM_TOL:
            failures.append(f"pi mismatch in block {bset.block}")
        top = max(bset.masses)
        if bset.modal not in bset.submodels:
            failures.append(f"modal sub-model missing from block {bset.block}")
        elif bset.masses[bset.submodels.index(bset.modal)] != top:
            failures.append(f"modal sub-model is not maximal in block {bset.block}")

    mass = Fraction(0)
    if not any(f.startswith("empty block") for f in failures):
        if isinstance(source, ExplicitDistribution):
            try:
                mass = exhaustive_set_mass(source, cset)
            except (ValueError, EnumerationBoundError) as exc:
                failures.append(f"mass check impossible: {exc}")
        else:
            mass = Fraction(1)
            for bset in cset.blocks:
                dist = empirical_block_distribution(source, bset.block)
                retained = sum(
                    (dist.probability(sub) for sub in bset.submodels), Fraction(0)
                )
                for sub, stored in zip(bset.submodels, bset.masses):
                    if dist.probability(sub) != stored:
                        failures.append(
                            f"stored mass of {sub} in block {bset.block} "
                            "does not match the trace"
                        )
                mass *= retained
        if mass < Fraction(level):
            failures.append(
                f"mass {float(mass)} is below the requested level {level}"
            )

    return ValidationReport(
        passed=not failures, failures=tuple(failures), mass=float(mass)
    )
