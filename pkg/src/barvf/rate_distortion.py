"""Rate-distortion trade-off between posterior value samples and target actions.

The information source is an empirical (plug-in) distribution over ``Z``
sampled action-value functions; the channel output is an action. Rates are
in nats; divide by ``ln 2`` for bits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from barvf._kernels import ba_iterate
from barvf.exceptions import InvalidInputError, NumericError, ShapeError

__all__ = [
    "BAConfig",
    "ChannelSolution",
    "RDPoint",
    "BlahutArimoto",
    "build_distortion_matrix",
    "distortion_from_values",
    "uniform_source",
    "blahut_arimoto",
    "rate_of",
    "expected_distortion",
    "trace_rd_curve",
    "trace_solutions",
    "write_rd_trace_csv",
    "read_distortion_csv",
]

NATS_PER_BIT = math.log(2.0)


@dataclass(frozen=True)
class BAConfig:
    beta: float = 1.0
    max_iterations: int = 200
    tolerance: float = 1e-9

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise InvalidInputError(f"beta must be finite and >= 0, got {self.beta!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidInputError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if not self.tolerance > 0:
            raise InvalidInputError(f"tolerance must be > 0, got {self.tolerance!r}")


@dataclass
class ChannelSolution:
    """Converged channel ``P(action | sample)`` and its rate/distortion summary."""

    conditional: np.ndarray
    marginal: np.ndarray
    rate: float
    expected_distortion: float
    iterations: int
    converged: bool
    beta: float = 0.0
    objective_history: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def objective(self) -> float:
        return self.rate + self.beta * self.expected_distortion


class RDPoint(NamedTuple):
    beta: float
    rate: float
    distortion: float


def distortion_from_values(values) -> np.ndarray:
    """Squared gap to the row maximum for a ``Z x A`` block of action values."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"expected a 2-d (samples x actions) array, got shape {values.shape}")
    gap = values.max(axis=1, keepdims=True) - values
    return gap * gap


def build_distortion_matrix(samples, state: int) -> np.ndarray:
    """Distortion of every action under every sample at ``state``.

    Entry ``(z, a)`` is ``(max_b Q_z(state, b) - Q_z(state, a)) ** 2``.

    Args:
        samples: sequence of ``S x A`` value tables, or a stacked ``Z x S x A`` array.
        state: state index valid for every sample.

    Returns:
        ``Z x A`` array of non-negative floats; each row has at least one zero.
    """
    if isinstance(samples, np.ndarray):
        if samples.ndim != 3:
            raise ShapeError(f"stacked samples must be 3-d, got shape {samples.shape}")
        stacked = samples
    else:
        samples = list(samples)
        if not samples:
            raise InvalidInputError("need at least one value-function sample")
        arrays = [np.asarray(q, dtype=np.float64) for q in samples]
        for q in arrays:
            if q.ndim != 2:
                raise ShapeError(f"each sample must be 2-d (states x actions), got {q.shape}")
        n_actions = {q.shape[1] for q in arrays}
        if len(n_actions) != 1:
            raise ShapeError(f"samples disagree on action count: {sorted(n_actions)}")
        n_states = min(q.shape[0] for q in arrays)
        if not 0 <= state < n_states:
            raise InvalidInputError(f"state {state} out of range for samples with {n_states} states")
        return distortion_from_values(np.stack([q[state] for q in arrays]))
    if stacked.shape[0] == 0:
        raise InvalidInputError("need at least one value-function sample")
    if not 0 <= state < stacked.shape[1]:
        raise InvalidInputError(f"state {state} out of range for samples with {stacked.shape[1]} states")
    return distortion_from_values(stacked[:, state, :])


def uniform_source(n: int) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("source needs at least one atom")
    return np.full(n, 1.0 / n)


def _check_distortion(d) -> np.ndarray:
    try:
        d = check_array(d, dtype=np.float64, ensure_all_finite=False)
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    if not np.all(np.isfinite(d)):
        raise NumericError("distortion matrix contains non-finite entries")
    if np.any(d < 0):
        raise InvalidInputError("distortion entries must be non-negative")
    return d


def _check_source(source, n: int) -> np.ndarray:
    if source is None:
        return uniform_source(n)
    w = np.asarray(source, dtype=np.float64).ravel()
    if w.shape[0] != n:
        raise ShapeError(f"source has {w.shape[0]} atoms but distortion matrix has {n} rows")
    if not np.all(np.isfinite(w)):
        raise NumericError("source weights must be finite")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidInputError("source weights must be non-negative and sum to 1")
    return w


def _check_conditional(conditional, n: int) -> np.ndarray:
    c = np.asarray(conditional, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != n:
        raise ShapeError(f"conditional shape {c.shape} does not match a source of {n} atoms")
    if np.any(c < 0) or np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-6):
        raise InvalidInputError("conditional rows must be probability distributions")
    return c


def _solve(d: np.ndarray, w: np.ndarray, cfg: BAConfig) -> ChannelSolution:
    # Unchecked path for per-step callers that already hold valid arrays.
    history = np.empty(int(cfg.max_iterations))
    cond, q, rate, dist, n_iter, converged = ba_iterate(
        d, w, float(cfg.beta), int(cfg.max_iterations), float(cfg.tolerance), history
    )
    return ChannelSolution(
        conditional=cond,
        marginal=q,
        rate=float(rate),
        expected_distortion=float(dist),
        iterations=int(n_iter),
        converged=bool(converged),
        beta=float(cfg.beta),
        objective_history=history[:n_iter],
    )


def blahut_arimoto(d, source=None, cfg: BAConfig | None = None) -> ChannelSolution:
    """Rate-distortion optimal channel for a fixed Lagrange multiplier.

    Starting from a uniform action marginal, alternates

    * ``conditional[z, a] ∝ marginal[a] * exp(-beta * d[z, a])``
    * ``marginal[a] = sum_z source[z] * conditional[z, a]``

    until the Lagrangian ``rate + beta * distortion`` changes by less than
    ``cfg.tolerance``. Marginal entries that fall below 1e-300 leave the
    support for good.

    Args:
        d: ``Z x A`` distortion matrix.
        source: length-``Z`` weights; defaults to the uniform plug-in measure.
        cfg: solver settings; defaults to ``BAConfig()``.

    Returns:
        ChannelSolution. ``converged`` is False only if the iteration cap was
        reached first.
    """
    cfg = BAConfig() if cfg is None else cfg
    d = _check_distortion(d)
    w = _check_source(source, d.shape[0])
    return _solve(d, w, cfg)


def rate_of(conditional, source) -> float:
    """Mutual information (nats) between source atom and action under ``conditional``."""
    w = np.asarray(source, dtype=np.float64).ravel()
    c = _check_conditional(conditional, w.shape[0])
    marginal = w @ c
    ratio = np.divide(c, marginal, out=np.ones_like(c), where=c > 0)
    terms = np.where(c > 0, c * np.log(ratio), 0.0)
    return max(float(w @ terms.sum(axis=1)), 0.0)


def expected_distortion(conditional, source, d) -> float:
    w = np.asarray(source, dtype=np.float64).ravel()
    c = np.asarray(conditional, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if c.shape != d.shape or c.ndim != 2 or c.shape[0] != w.shape[0]:
        raise ShapeError(f"shapes disagree: conditional {c.shape}, distortion {d.shape}, source {w.shape}")
    return float(w @ (c * d).sum(axis=1))


def trace_solutions(d, source=None, betas: Sequence[float] = (1.0,), cfg: BAConfig | None = None) -> list[ChannelSolution]:
    """One independently-initialized solve per multiplier in ``betas`` (strictly ascending)."""
    betas = [float(b) for b in betas]
    if not betas:
        raise InvalidInputError("betas must be non-empty")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise InvalidInputError("betas must be strictly ascending")
    cfg = BAConfig() if cfg is None else cfg
    d = _check_distortion(d)
    w = _check_source(source, d.shape[0])
    return [
        _solve(d, w, BAConfig(beta=b, max_iterations=cfg.max_iterations, tolerance=cfg.tolerance))
        for b in betas
    ]


def trace_rd_curve(d, source=None, betas: Sequence[float] = (1.0,), cfg: BAConfig | None = None) -> list[RDPoint]:
    """(beta, rate, distortion) for each multiplier; sweeps out points on R(D)."""
    return [RDPoint(s.beta, s.rate, s.expected_distortion) for s in trace_solutions(d, source, betas, cfg)]


def write_rd_trace_csv(solutions: Sequence[ChannelSolution], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "rate_nats", "expected_distortion", "iterations", "converged"])
        for s in solutions:
            writer.writerow([repr(s.beta), repr(s.rate), repr(s.expected_distortion), s.iterations, int(s.converged)])
    return path


def read_distortion_csv(path) -> np.ndarray:
    """Load a headerless comma-separated ``Z x A`` distortion matrix."""
    d = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    return _check_distortion(d)


class BlahutArimoto(BaseEstimator):
    """Estimator wrapper around :func:`blahut_arimoto`.

    ``fit`` takes the distortion matrix as ``X`` (one row per source atom) and
    optional source weights as ``sample_weight``. After fitting,
    ``predict_proba`` maps any distortion rows to action distributions under
    the fitted output marginal, so at the fixed point training rows reproduce ``conditional_``.

    Parameters
    ----------
    beta : float, default=1.0
        Lagrange multiplier trading rate against distortion.
    max_iter : int, default=200
    tol : float, default=1e-9
        Stop once the Lagrangian moves by less than this.
    """

    def __init__(self, beta=1.0, max_iter=200, tol=1e-9):
        self.beta = beta
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        cfg = BAConfig(beta=self.beta, max_iterations=self.max_iter, tolerance=self.tol)
        sol = blahut_arimoto(X, sample_weight, cfg)
        self.solution_ = sol
        self.conditional_ = sol.conditional
        self.marginal_ = sol.marginal
        self.rate_ = sol.rate
        self.distortion_ = sol.expected_distortion
        self.n_iter_ = sol.iterations
        self.converged_ = sol.converged
        self.n_features_in_ = sol.conditional.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "marginal_")
        d = _check_distortion(X)
        if d.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} actions, got {d.shape[1]}")
        with np.errstate(divide="ignore"):
            logits = np.log(self.marginal_)[None, :] - self.beta * d
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def transform(self, X):
        """Alias for ``predict_proba``; lets the solver sit inside a Pipeline."""
        return self.predict_proba(X)
