"""Gamma-process degradation and its discretization into transition matrices.

States are numbered 1..m as in the maintenance model: state 1 is as-good-as-new,
states 2..m-1 are progressively worse working conditions and state m is failure.
Matrices returned here are indexed 0-based, so ``Q[g - 1, h - 1]`` is the
probability of moving from state g to state h over one inspection interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

# CDF differences below this magnitude are treated as round-off.
NEGATIVE_FLOOR = 1e-14


class DomainError(ValueError):
    """Raised for out-of-domain distribution or grid arguments."""


def _check_finite_nonneg(x: float, name: str) -> None:
    if math.isnan(x) or x < 0:
        raise DomainError(f"{name} must be nonnegative, got {x!r}")


def _check_positive(v: float, name: str) -> None:
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"{name} must be positive and finite, got {v!r}")


def gamma_increment_cdf(x: float, shape: float, rate: float) -> float:
    """P(X <= x) for X ~ Gamma(shape, rate)."""
    _check_positive(shape, "shape")
    _check_positive(rate, "rate")
    _check_finite_nonneg(x, "x")
    if x == math.inf:
        return 1.0
    return float(special.gammainc(shape, rate * x))


def compound_gamma_increment_cdf(x: float, shape: float, kappa: float, lam: float) -> float:
    """Marginal CDF of X when X | r ~ Gamma(shape, r) and r ~ Gamma(kappa, lam).

    X / lam is beta-prime(shape, kappa) distributed, hence
    P(X <= x) = I_{x / (x + lam)}(shape, kappa).
    """
    _check_positive(shape, "shape")
    _check_positive(kappa, "kappa")
    _check_positive(lam, "lambda")
    _check_finite_nonneg(x, "x")
    if x == math.inf:
        return 1.0
    return float(special.betainc(shape, kappa, x / (x + lam)))


@dataclass(frozen=True)
class GammaProcessParams:
    """Stationary gamma process: increments over a duration t are Gamma(alpha * t, rate).

    With ``random_effect=(kappa, lam)`` the rate is itself Gamma(kappa, lam)
    distributed and ``rate`` must be left as None.
    """

    alpha: float
    rate: float | None = None
    random_effect: tuple[float, float] | None = None

    def __post_init__(self):
        _check_positive(self.alpha, "alpha")
        if (self.rate is None) == (self.random_effect is None):
            raise DomainError("give exactly one of a fixed rate or a (kappa, lambda) random effect")
        if self.rate is not None:
            _check_positive(self.rate, "rate")
        else:
            kappa, lam = self.random_effect
            _check_positive(kappa, "kappa")
            _check_positive(lam, "lambda")
            object.__setattr__(self, "random_effect", (float(kappa), float(lam)))

    @property
    def has_random_effect(self) -> bool:
        return self.random_effect is not None

    def increment_cdf(self, x, duration: float):
        """Vectorized CDF of the increment over ``duration``; negative x gives 0."""
        _check_positive(duration, "duration")
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        shape = self.alpha * duration
        if self.rate is not None:
            return special.gammainc(shape, self.rate * x)
        kappa, lam = self.random_effect
        return special.betainc(shape, kappa, x / (x + lam))

    def increment_sf(self, x, duration: float):
        """Vectorized survival function 1 - CDF, computed without cancellation."""
        _check_positive(duration, "duration")
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        shape = self.alpha * duration
        if self.rate is not None:
            return special.gammaincc(shape, self.rate * x)
        kappa, lam = self.random_effect
        return special.betaincc(shape, kappa, x / (x + lam))

    def sample_increments(self, rng: np.random.Generator, duration: float, size: int) -> np.ndarray:
        shape = self.alpha * duration
        if self.rate is not None:
            return rng.gamma(shape, 1.0 / self.rate, size=size)
        kappa, lam = self.random_effect
        rates = rng.gamma(kappa, 1.0 / lam, size=size)
        return rng.gamma(shape, 1.0 / rates)

    def to_dict(self) -> dict:
        if self.rate is not None:
            return {"alpha": self.alpha, "rate": self.rate}
        kappa, lam = self.random_effect
        return {"alpha": self.alpha, "kappa": kappa, "lambda": lam}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaProcessParams":
        if "rate" in d:
            if "kappa" in d or "lambda" in d:
                raise DomainError("gamma parameters mix a fixed rate with a random effect")
            return cls(alpha=float(d["alpha"]), rate=float(d["rate"]))
        return cls(alpha=float(d["alpha"]), random_effect=(float(d["kappa"]), float(d["lambda"])))


@dataclass(frozen=True)
class StateGrid:
    """Discretization of the degradation level into m states.

    ``bin_edges[k]`` is the upper edge of working state k+1, the last one being
    the failure threshold L; state m covers [L, inf).
    """

    m: int
    failure_threshold: float
    bin_edges: tuple[float, ...]
    representative_levels: tuple[float, ...]

    @property
    def lower_edges(self) -> np.ndarray:
        return np.concatenate(([0.0], np.asarray(self.bin_edges[:-1])))

    @property
    def upper_edges(self) -> np.ndarray:
        return np.asarray(self.bin_edges, dtype=float)

    def state_of(self, level: float) -> int:
        """1-based state containing a degradation level."""
        if level < 0:
            raise DomainError("degradation level must be nonnegative")
        if level >= self.failure_threshold:
            return self.m
        return int(np.searchsorted(self.upper_edges, level, side="right")) + 1


def make_state_grid(failure_threshold: float, m: int) -> StateGrid:
    """Equal-width working bins over [0, L); state 1 sits at level 0, others at bin midpoints."""
    _check_positive(failure_threshold, "failure_threshold")
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 2:
        raise DomainError(f"state count m must be an integer >= 2, got {m!r}")
    m = int(m)
    width = failure_threshold / (m - 1)
    edges = [width * k for k in range(1, m)]
    edges[-1] = float(failure_threshold)
    levels = [0.0] + [width * (k - 0.5) for k in range(2, m)]
    return StateGrid(m, float(failure_threshold), tuple(edges), tuple(levels))


def build_transition_matrix(params: GammaProcessParams, grid: StateGrid,
                            inspection_interval: float = 1.0) -> np.ndarray:
    """One-interval transition matrix of the discretized process (read-only m x m array)."""
    _check_positive(inspection_interval, "inspection_interval")
    m = grid.m
    d = np.asarray(grid.representative_levels, dtype=float)[:, None]
    upper = grid.upper_edges[None, :]
    lower = grid.lower_edges[None, :]

    Q = np.zeros((m, m))
    work = params.increment_cdf(upper - d, inspection_interval) - params.increment_cdf(lower - d, inspection_interval)
    Q[: m - 1, : m - 1] = np.triu(work)
    Q[: m - 1, m - 1] = params.increment_sf(grid.failure_threshold - d[:, 0], inspection_interval)
    Q[m - 1, m - 1] = 1.0
    return _normalize(Q)


def _normalize(Q: np.ndarray) -> np.ndarray:
    Q = np.where((Q < 0) & (Q > -NEGATIVE_FLOOR), 0.0, Q)
    if (Q < 0).any():
        raise DomainError("transition matrix has materially negative entries")
    Q = Q / Q.sum(axis=1, keepdims=True)
    Q.setflags(write=False)
    return Q


def check_transition_matrix(Q, tol: float = 1e-9) -> list[str]:
    """Problems with a candidate transition matrix; empty when well-formed."""
    Q = np.asarray(Q, dtype=float)
    problems = []
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 2:
        return [f"transition matrix must be square with m >= 2, got shape {Q.shape}"]
    if not np.isfinite(Q).all():
        problems.append("transition matrix has non-finite entries")
        return problems
    if (Q < 0).any() or (Q > 1 + tol).any():
        problems.append("transition matrix entries outside [0, 1]")
    bad_rows = np.flatnonzero(np.abs(Q.sum(axis=1) - 1) > tol)
    if bad_rows.size:
        problems.append(f"rows {[int(r) + 1 for r in bad_rows]} do not sum to 1")
    if np.any(np.tril(Q, -1) != 0):
        problems.append("transition matrix allows improvement without maintenance (below-diagonal mass)")
    return problems
