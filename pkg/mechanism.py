"""
Laplace mechanism: noise draws, noisy query answers and the exact output law.

Design & invariants
-------------------
* Noise is zero-mean Laplace with scale θ (density e^{−|z|/θ}/2θ, variance 2θ²).
* Draws use inverse-CDF sampling on a seeded PCG64 generator, so a given seed
  reproduces the same value on every platform. A sampler owns its generator
  state; use one sampler per thread.
* The output law of Y = X + N_θ for a discrete prior on X is a finite Laplace
  mixture. Mixtures are immutable. Evaluation switches to log space when an
  exponent exceeds LOG_SPACE_THRESHOLD in magnitude.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp
from scipy.stats import laplace

from dist import DiscreteDistribution, SystemConfig
from errors import BudgetError, DistributionError
from settings import LOG_SPACE_THRESHOLD

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _as_output(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


# =========================
# Noise
# =========================
@dataclass(frozen=True)
class LaplaceNoise:
    theta: float

    def __post_init__(self) -> None:
        theta = float(self.theta)
        if not math.isfinite(theta) or theta <= 0:
            raise BudgetError(f"Laplace scale must be finite and positive, got {self.theta!r}")
        object.__setattr__(self, "theta", theta)

    @property
    def variance(self) -> float:
        return 2.0 * self.theta ** 2

    def density(self, z: ArrayLike) -> ArrayLike:
        z = np.asarray(z, dtype=np.float64)
        return _as_output(np.exp(-np.abs(z) / self.theta) / (2.0 * self.theta))


def laplace_quantile(u: ArrayLike, theta: float) -> ArrayLike:
    """Inverse CDF of Laplace(0, θ) on the open unit interval."""
    u = np.asarray(u, dtype=np.float64)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DistributionError("Laplace quantile needs u strictly inside (0, 1)")
    centered = u - 0.5
    # ln(1 − 2|u − ½|) via log1p keeps the tails accurate near u = ½
    return _as_output(-theta * np.sign(centered) * np.log1p(-2.0 * np.abs(centered)))


class LaplaceSampler:
    """Seeded Laplace noise source; not shareable across threads."""

    def __init__(self, noise: LaplaceNoise, seed: int):
        self.noise = noise
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def _uniform(self, size: Optional[int]) -> np.ndarray:
        u = self._rng.random(size)
        # Generator.random lives on [0, 1); 0 has no finite quantile
        zeros = np.atleast_1d(u == 0.0)
        while zeros.any():
            if np.ndim(u) == 0:
                u = self._rng.random()
            else:
                u[zeros] = self._rng.random(int(zeros.sum()))
            zeros = np.atleast_1d(u == 0.0)
        return u

    def draw(self, size: Optional[int] = None) -> ArrayLike:
        return laplace_quantile(self._uniform(size), self.noise.theta)


def sample(noise: LaplaceNoise, seed: int) -> float:
    """One Laplace(0, θ) draw, fully determined by `seed`."""
    return float(LaplaceSampler(noise, seed).draw())


def answer_query(
    config: SystemConfig, realized: Mapping[str, Optional[float]], noise: LaplaceNoise, seed: int
) -> float:
    """Noisy sum of the reported values; `None` (or an omitted user) means absent."""
    present = []
    for user_id, value in realized.items():
        spec = config.user(user_id)
        if value is None:
            continue
        try:
            value = float(value)
        except (TypeError, ValueError) as exc:
            raise DistributionError(f"value {value!r} of user {user_id!r} is not a number") from exc
        if not spec.distribution.contains(value):
            raise DistributionError(f"value {value!r} of user {user_id!r} is outside its support")
        present.append(value)
    total = math.fsum(present)
    noisy = total + sample(noise, seed)
    logger.debug("answer_query: %d present users, sum=%g, noisy=%g", len(present), total, noisy)
    return noisy


# =========================
# Output law
# =========================
@dataclass(frozen=True)
class LaplaceMixture:
    """Density y ↦ Σ_x mass(x) · e^{−|y−x|/θ} / 2θ."""

    atoms: DiscreteDistribution
    theta: float

    def __post_init__(self) -> None:
        LaplaceNoise(self.theta)

    def _exponents(self, y: ArrayLike) -> np.ndarray:
        return -np.abs(np.subtract.outer(np.asarray(y, dtype=np.float64), self.atoms.support)) / self.theta

    def log_evaluate(self, y: ArrayLike) -> ArrayLike:
        values = logsumexp(self._exponents(y), b=self.atoms.mass, axis=-1) - math.log(2.0 * self.theta)
        return _as_output(values)

    def evaluate(self, y: ArrayLike) -> ArrayLike:
        exponents = self._exponents(y)
        if np.max(-exponents) > LOG_SPACE_THRESHOLD:
            return _as_output(np.exp(np.asarray(self.log_evaluate(y))))
        return _as_output(np.exp(exponents) @ self.atoms.mass / (2.0 * self.theta))

    def cdf(self, y: ArrayLike) -> ArrayLike:
        offsets = np.subtract.outer(np.asarray(y, dtype=np.float64), self.atoms.support)
        return _as_output(laplace.cdf(offsets, scale=self.theta) @ self.atoms.mass)

    def support_bounds(self, width: float = 40.0) -> Tuple[float, float]:
        """Interval holding all but a e^{−width} fraction of the mass."""
        return (
            float(self.atoms.support[0]) - width * self.theta,
            float(self.atoms.support[-1]) + width * self.theta,
        )


def output_density(prior: DiscreteDistribution, noise: LaplaceNoise) -> LaplaceMixture:
    return LaplaceMixture(prior, noise.theta)
