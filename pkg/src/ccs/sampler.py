"""Add-delete-swap MCMC for spike-and-slab linear regression.

Model: y = alpha + X[:, included] @ beta + noise, with a flat prior on the
intercept, Jeffreys prior on the noise variance, independent N(0, g*sigma^2)
slabs on the included coefficients, iid Bernoulli(pi) inclusion, and
hyperpriors pi ~ Beta(1, (p - p0)/p0), g ~ Half-Cauchy.  The intercept,
coefficients and noise variance integrate out analytically, leaving a
marginal likelihood per inclusion vector that the sampler targets directly.

The inclusion vector moves by add / delete / swap proposals with
Metropolis-Hastings correction; pi has a conjugate Gibbs update; g moves by
an adaptive random walk on log g (Half-Cauchy is non-conjugate here).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .model_space import Model, SampleTrace

__all__ = [
    "SingularModelError",
    "LinearBvsConfig",
    "SamplerState",
    "MarginalEngine",
    "log_marginal_likelihood",
    "ads_step",
    "gibbs_pi",
    "update_g",
    "run_chain",
    "run_chains",
]

LEARN = "learn"


class SingularModelError(ValueError):
    """Raised when a model's marginal likelihood is numerically undefined."""


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


class MarginalEngine:
    """Centered sufficient statistics for fast per-model marginal likelihoods.

    After integrating the intercept the data enter only through the centered
    Gram matrix, the centered cross-products with y, and the centered total
    sum of squares, all precomputed here; each evaluation then costs one
    k x k Cholesky for k included variables.
    """

    def __init__(self, y, X):
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        if y.ndim != 1:
            raise ValueError("y must be a 1-D vector")
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError("X must be 2-D with one row per observation")
        if y.size < 2:
            raise ValueError("need at least two observations")
        self.n = int(y.size)
        self.p = int(X.shape[1])
        xc = X - X.mean(axis=0)
        yc = y - y.mean()
        self.gram = xc.T @ xc
        self.xty = xc.T @ yc
        self.yty = float(yc @ yc)
        m = self.n - 1
        self._const = (
            float(gammaln(m / 2.0)) - (m / 2.0) * math.log(2 * math.pi)
            - 0.5 * math.log(self.n)
        )

    def loglik(self, included: np.ndarray, g: float) -> float:
        """log p(y | model, g) for the variables indexed by ``included``."""
        if g <= 0:
            raise ValueError(f"slab variance must be positive, got {g}")
        k = included.size
        m = self.n - 1
        if k == 0:
            s = self.yty
            logdet = 0.0
        else:
            sub = self.gram[np.ix_(included, included)]
            mat = g * sub + np.eye(k)
            try:
                chol = np.linalg.cholesky(mat)
            except np.linalg.LinAlgError as exc:
                raise SingularModelError(
                    "slab-regularized Gram matrix is not positive definite"
                ) from exc
            u = solve_triangular(chol, self.xty[included], lower=True)
            s = self.yty - g * float(u @ u)
            logdet = 2.0 * float(np.log(np.diag(chol)).sum())
        if not s > 0:
            raise SingularModelError(
                "residual sum of squares vanished; marginal likelihood undefined"
            )
        return self._const - 0.5 * logdet - (m / 2.0) * math.log(s / 2.0)


def _included_indices(gamma, p: int) -> np.ndarray:
    if isinstance(gamma, Model):
        if gamma.n_bits != p:
            raise ValueError(f"model length {gamma.n_bits} does not match p={p}")
        return np.flatnonzero(gamma.to_array())
    arr = np.asarray(gamma)
    if arr.ndim != 1 or arr.size != p:
        raise ValueError(f"inclusion vector must have length p={p}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("inclusion vector entries must be 0 or 1")
    return np.flatnonzero(arr)


def log_marginal_likelihood(y, X, gamma, g: float) -> float:
    """log p(y | gamma, g) with intercept, coefficients and noise variance
    integrated out.

    Deterministic given the inputs; shifting y by a constant leaves the
    value unchanged (the flat intercept absorbs it).  Raises
    :class:`SingularModelError` if the marginal is numerically undefined.
    """
    engine = MarginalEngine(y, X)
    return engine.loglik(_included_indices(gamma, engine.p), float(g))


@dataclass
class LinearBvsConfig:
    """Settings for one sampling run.

    ``prior_mean_size`` is the expected number of included variables a
    priori (must be strictly between 0 and p).  ``slab_variance`` and
    ``inclusion_prob`` are either fixed positive values or ``"learn"``.
    """

    prior_mean_size: float
    iterations: int
    burn_in: int = 0
    thin: int = 1
    slab_variance: float | str = LEARN
    inclusion_prob: float | str = LEARN
    seed: int = 0
    move_probs: tuple[float, float, float] = (0.4, 0.4, 0.2)  # add, delete, swap
    halfcauchy_scale: float = 1.0

    def __post_init__(self):
        if self.prior_mean_size <= 0:
            raise ValueError("prior mean model size must be positive")
        if self.iterations < 1:
            raise ValueError("need at least one kept iteration")
        if self.burn_in < 0:
            raise ValueError("burn-in cannot be negative")
        if self.thin < 1:
            raise ValueError("thinning interval must be >= 1")
        probs = tuple(float(q) for q in self.move_probs)
        if len(probs) != 3 or any(q < 0 for q in probs):
            raise ValueError("move_probs must be three non-negative numbers")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("move_probs must sum to 1")
        self.move_probs = probs
        if self.slab_variance != LEARN and not float(self.slab_variance) > 0:
            raise ValueError("slab variance must be positive or 'learn'")
        if self.inclusion_prob != LEARN:
            q = float(self.inclusion_prob)
            if not 0.0 <= q <= 1.0:
                raise ValueError("inclusion probability must be in [0, 1] or 'learn'")
        if self.halfcauchy_scale <= 0:
            raise ValueError("Half-Cauchy scale must be positive")

    @property
    def learn_g(self) -> bool:
        return self.slab_variance == LEARN

    @property
    def learn_pi(self) -> bool:
        return self.inclusion_prob == LEARN


@dataclass
class SamplerState:
    """Current chain position; ``log_marginal`` caches p(y | gamma, g)."""

    gamma: Model
    pi: float
    g: float
    log_marginal: float


def _model_loglik(
    engine: MarginalEngine, arr: np.ndarray, g: float, memo: dict | None
) -> float:
    if memo is None:
        return engine.loglik(np.flatnonzero(arr), g)
    key = np.packbits(arr, bitorder="little").tobytes()
    value = memo.get(key)
    if value is None:
        value = engine.loglik(np.flatnonzero(arr), g)
        memo[key] = value
    return value


def ads_step(
    state: SamplerState,
    y,
    X,
    config: LinearBvsConfig,
    rng: np.random.Generator,
    *,
    engine: MarginalEngine | None = None,
    memo: dict | None = None,
) -> SamplerState:
    """One add / delete / swap proposal with MH acceptance.

    Degenerate proposals (add with a full model, delete or swap with an
    empty one, swap with a full one) count as rejected.  ``memo``, if
    given, caches log-marginals for the current slab variance keyed by the
    packed inclusion vector.
    """
    if engine is None:
        engine = MarginalEngine(y, X)
    p = engine.p
    arr = state.gamma.to_array()
    k = int(arr.sum())
    p_add, p_del, _ = config.move_probs

    u = rng.random()
    if u < p_add:
        move = "add"
    elif u < p_add + p_del:
        move = "delete"
    else:
        move = "swap"

    log_pi = _safe_log(state.pi)
    log_1mpi = _safe_log(1.0 - state.pi)

    if move == "add":
        if k == p:
            return state
        zeros = np.flatnonzero(arr == 0)
        j = int(zeros[rng.integers(zeros.size)])
        proposal = arr.copy()
        proposal[j] = 1
        log_fwd = _safe_log(p_add) - math.log(p - k)
        log_rev = _safe_log(p_del) - math.log(k + 1)
        log_prior_ratio = log_pi - log_1mpi
    elif move == "delete":
        if k == 0:
            return state
        ones = np.flatnonzero(arr == 1)
        j = int(ones[rng.integers(ones.size)])
        proposal = arr.copy()
        proposal[j] = 0
        log_fwd = _safe_log(p_del) - math.log(k)
        log_rev = _safe_log(p_add) - math.log(p - k + 1)
        log_prior_ratio = log_1mpi - log_pi
    else:
        if k == 0 or k == p:
            return state
        ones = np.flatnonzero(arr == 1)
        zeros = np.flatnonzero(arr == 0)
        j_out = int(ones[rng.integers(ones.size)])
        j_in = int(zeros[rng.integers(zeros.size)])
        proposal = arr.copy()
        proposal[j_out] = 0
        proposal[j_in] = 1
        # |gamma| unchanged: proposal and prior ratios both cancel
        log_fwd = 0.0
        log_rev = 0.0
        log_prior_ratio = 0.0

    try:
        proposal_lml = _model_loglik(engine, proposal, state.g, memo)
    except SingularModelError:
        return state

    log_accept = (
        proposal_lml - state.log_marginal + log_prior_ratio + log_rev - log_fwd
    )
    if math.log(rng.random()) < log_accept:
        return SamplerState(
            gamma=Model.from_bits(proposal),
            pi=state.pi,
            g=state.g,
            log_marginal=proposal_lml,
        )
    return state


def gibbs_pi(
    state: SamplerState,
    n_variables: int,
    config: LinearBvsConfig,
    rng: np.random.Generator,
) -> SamplerState:
    """Conjugate update: pi | gamma ~ Beta(1 + |gamma|, (p - p0)/p0 + p - |gamma|)."""
    p = n_variables
    p0 = config.prior_mean_size
    k = state.gamma.count()
    a = 1.0 + k
    b = (p - p0) / p0 + (p - k)
    return SamplerState(
        gamma=state.gamma,
        pi=float(rng.beta(a, b)),
        g=state.g,
        log_marginal=state.log_marginal,
    )


def update_g(
    state: SamplerState,
    y,
    X,
    config: LinearBvsConfig,
    rng: np.random.Generator,
    *,
    engine: MarginalEngine | None = None,
    step: float = 1.0,
) -> tuple[SamplerState, bool]:
    """One random-walk MH move on log g targeting p(y|gamma,g) * HalfCauchy(g).

    The log-scale walk contributes a Jacobian factor g'/g.  Returns the new
    state and whether the proposal was accepted (used for step adaptation).
    """
    if engine is None:
        engine = MarginalEngine(y, X)
    included = np.flatnonzero(state.gamma.to_array())
    scale = config.halfcauchy_scale
    g_new = state.g * math.exp(step * rng.standard_normal())
    try:
        lml_new = engine.loglik(included, g_new)
    except SingularModelError:
        return state, False

    def log_target(g: float, lml: float) -> float:
        # Half-Cauchy log-density up to constants, plus the log-walk Jacobian
        return lml - math.log1p((g / scale) ** 2) + math.log(g)

    log_accept = log_target(g_new, lml_new) - log_target(state.g, state.log_marginal)
    if math.log(rng.random()) < log_accept:
        return (
            SamplerState(
                gamma=state.gamma, pi=state.pi, g=g_new, log_marginal=lml_new
            ),
            True,
        )
    return state, False


def run_chain(
    y,
    X,
    config: LinearBvsConfig,
    labels: Iterable[str] | None = None,
    *,
    chain_index: int = 0,
) -> SampleTrace:
    """Run one chain and return the kept draws as a trace.

    Executes ``burn_in`` sweeps, then records the inclusion vector after
    every ``thin``-th sweep until ``iterations`` samples are kept.  A sweep
    is one add/delete/swap move plus the hyperparameter updates that are in
    learn mode.  Deterministic given (seed, chain_index).
    """
    engine = MarginalEngine(y, X)
    p = engine.p
    if not config.prior_mean_size < p:
        raise ValueError(
            f"prior mean model size must be below p={p}, got {config.prior_mean_size}"
        )
    rng = np.random.default_rng([int(config.seed), int(chain_index)])

    pi0 = (
        config.prior_mean_size / p if config.learn_pi else float(config.inclusion_prob)
    )
    g0 = 1.0 if config.learn_g else float(config.slab_variance)
    empty = np.zeros(p, dtype=np.uint8)
    state = SamplerState(
        gamma=Model.from_bits(empty),
        pi=pi0,
        g=g0,
        log_marginal=engine.loglik(np.flatnonzero(empty), g0),
    )

    memo: dict | None = {} if not config.learn_g else None
    log_step = 0.0
    kept = np.empty((config.iterations, p), dtype=np.uint8)
    n_kept = 0
    sweep = 0
    total = config.burn_in + config.iterations * config.thin
    while sweep < total:
        state = ads_step(state, y, X, config, rng, engine=engine, memo=memo)
        if config.learn_pi:
            state = gibbs_pi(state, p, config, rng)
        if config.learn_g:
            state, accepted = update_g(
                state, y, X, config, rng, engine=engine, step=math.exp(log_step)
            )
            if sweep < config.burn_in:
                gain = min(0.25, 4.0 / math.sqrt(sweep + 1.0))
                log_step += gain * ((1.0 if accepted else 0.0) - 0.3)
        sweep += 1
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            kept[n_kept] = state.gamma.to_array()
            n_kept += 1
    assert n_kept == config.iterations
    if labels is None:
        labels = [f"x{i + 1}" for i in range(p)]
    return SampleTrace(kept, list(labels))


def run_chains(
    y,
    X,
    config: LinearBvsConfig,
    n_chains: int,
    labels: Iterable[str] | None = None,
) -> SampleTrace:
    """Independent chains with per-chain RNG streams, concatenated in order."""
    if n_chains < 1:
        raise ValueError("need at least one chain")
    traces = [
        run_chain(y, X, config, labels, chain_index=i) for i in range(n_chains)
    ]
    matrix = np.concatenate([t.matrix for t in traces], axis=0)
    return SampleTrace(matrix, traces[0].labels)
