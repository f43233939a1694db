"""First-order and pairwise summaries of a sampled model posterior.

Covers marginal inclusion probabilities (PIPs), the median and empirical-MAP
models, the inclusion-indicator correlation matrix, PIP screening, and the
enumerated highest-posterior-probability (HPP) credible set used as a
comparison baseline.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .model_space import Model, SampleTrace, _packed_row_counts

__all__ = [
    "SummaryBundle",
    "EmptyRetainedSetError",
    "InfeasibleLevelError",
    "pips",
    "median_model",
    "map_model_estimate",
    "inclusion_correlation",
    "screen",
    "hpp_credible_set",
    "summarize",
]


class EmptyRetainedSetError(ValueError):
    """Raised when PIP screening removes every variable."""


class InfeasibleLevelError(ValueError):
    """Raised when the supplied probabilities cannot reach the requested level."""


@dataclass(frozen=True, eq=False)
class SummaryBundle:
    """Per-variable summaries of one trace.

    ``retained`` holds the indices surviving the PIP screen; degenerate
    (constant) inclusion columns get correlation 0 off-diagonal, 1 on the
    diagonal.
    """

    pips: np.ndarray
    median_model: Model
    map_model_estimate: Model
    inclusion_correlation: np.ndarray
    retained: tuple[int, ...]
    screen_tau: float


def pips(trace: SampleTrace) -> np.ndarray:
    """Marginal posterior inclusion probability of each variable."""
    return trace.matrix.mean(axis=0)


def median_model(pip_values) -> Model:
    """Model including exactly the variables with PIP strictly above 0.5."""
    arr = np.asarray(pip_values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("pips must be a 1-D vector")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("pips must lie in [0, 1]")
    return Model.from_bits((arr > 0.5).astype(np.uint8))


def map_model_estimate(trace: SampleTrace) -> Model:
    """Most frequently sampled model; ties go to the lexicographically
    smallest bit pattern.

    This is the empirical mode of the MCMC sample, an *estimate* of the MAP
    model only.
    """
    uniq, counts = _packed_row_counts(trace.matrix)
    top = counts.max()
    p = trace.n_variables
    candidates = [Model(uniq[i].tobytes(), p) for i in np.flatnonzero(counts == top)]
    return min(candidates, key=lambda m: m.bits)


def inclusion_correlation(trace: SampleTrace) -> np.ndarray:
    """Pearson correlation of the inclusion indicator columns.

    Entries involving a constant column are defined as 0 (diagonal 1).
    """
    if trace.n_samples < 2:
        raise ValueError("correlation needs at least two samples")
    x = trace.matrix.astype(float)
    xc = x - x.mean(axis=0)
    norms = np.sqrt((xc**2).sum(axis=0))
    p = trace.n_variables
    corr = np.zeros((p, p))
    alive = np.flatnonzero(norms > 0)
    if alive.size:
        sub = xc[:, alive]
        block = (sub.T @ sub) / np.outer(norms[alive], norms[alive])
        corr[np.ix_(alive, alive)] = np.clip(block, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def screen(trace: SampleTrace, tau: float) -> tuple[SampleTrace, tuple[int, ...]]:
    """Drop variables with PIP below ``tau``.

    Returns the reduced trace (columns in original order, labels preserved)
    and the retained original indices.  Raises
    :class:`EmptyRetainedSetError` if nothing survives.
    """
    tau = float(tau)
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"screen threshold must be in [0, 1), got {tau}")
    keep = np.flatnonzero(pips(trace) >= tau)
    if keep.size == 0:
        raise EmptyRetainedSetError(
            f"every variable has PIP below the screen threshold {tau}"
        )
    retained = tuple(int(i) for i in keep)
    if keep.size == trace.n_variables:
        return trace, retained
    return trace.restrict_columns(retained), retained


def hpp_credible_set(
    model_probabilities: Mapping[Model, Fraction | float], level
) -> list[Model]:
    """Smallest prefix of the probability-sorted models reaching ``level``.

    Models are ordered by decreasing probability, ties broken by the
    lexicographically smaller bit pattern.  Raises
    :class:`InfeasibleLevelError` when the total mass falls short.
    """
    if not 0 < level <= 1:
        raise ValueError(f"credibility level must be in (0, 1], got {level}")
    if not model_probabilities:
        raise InfeasibleLevelError("no models supplied")
    widths = {m.n_bits for m in model_probabilities}
    if len(widths) != 1:
        raise ValueError("all models must have the same length")
    ordered = sorted(model_probabilities.items(), key=lambda kv: (-kv[1], kv[0].bits))
    out: list[Model] = []
    cum = 0
    for model, prob in ordered:
        if prob < 0:
            raise ValueError("probabilities must be non-negative")
        out.append(model)
        cum = cum + prob
        if cum >= level:
            return out
    raise InfeasibleLevelError(
        f"total mass {float(cum)} is below the requested level {level}"
    )


def summarize(trace: SampleTrace, screen_tau: float = 0.04) -> SummaryBundle:
    """All first-order summaries in one bundle.

    Unlike :func:`screen` this never raises on an empty retained set; the
    bundle simply records it as empty.
    """
    if not 0.0 <= screen_tau < 1.0:
        raise ValueError(f"screen threshold must be in [0, 1), got {screen_tau}")
    pv = pips(trace)
    retained = tuple(int(i) for i in np.flatnonzero(pv >= screen_tau))
    if trace.n_samples >= 2:
        corr = inclusion_correlation(trace)
    else:
        corr = np.eye(trace.n_variables)
    return SummaryBundle(
        pips=pv,
        median_model=median_model(pv),
        map_model_estimate=map_model_estimate(trace),
        inclusion_correlation=corr,
        retained=retained,
        screen_tau=float(screen_tau),
    )
