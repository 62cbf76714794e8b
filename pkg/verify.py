"""
Exact check of the pufferfish ratio bound for one secret pair.

Both arms of a pair induce Laplace mixtures with the same θ. Between two
consecutive atoms (kinks) each mixture reads A·e^{y/θ} + B·e^{−y/θ}, so the
density ratio is a Möbius function of e^{2y/θ} and is monotone there. The
supremum of |log m1 − log m2| over ℝ is therefore attained at an atom or in one
of the two tails, whose limits are

    y → +∞:  log Σ m1(x) e^{x/θ}  − log Σ m2(x) e^{x/θ}
    y → −∞:  log Σ m1(x) e^{−x/θ} − log Σ m2(x) e^{−x/θ}

Everything is evaluated with logsumexp, so large |x|/θ never overflows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from calibrate import PrivacyBudget
from dist import SecretPair, SystemConfig, conditional_prior
from errors import BudgetError
from mechanism import LaplaceMixture, LaplaceNoise, output_density
from settings import VERIFY_SLACK

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerificationReport:
    max_abs_log_ratio: float
    attained_at: float  # ±inf marks a tail limit
    satisfied: Optional[bool]
    pair: str = ""
    forward: float = 0.0   # sup log m1/m2
    backward: float = 0.0  # sup log m2/m1
    epsilon: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        where: Any = self.attained_at
        if math.isinf(where):
            where = "+inf" if where > 0 else "-inf"
        return {
            "max_abs_log_ratio": self.max_abs_log_ratio,
            "attained_at": where,
            "satisfied": self.satisfied,
            "pair": self.pair,
            "forward": self.forward,
            "backward": self.backward,
            "epsilon": self.epsilon,
        }


def _tail_log_weight(mixture: LaplaceMixture, sign: float) -> float:
    return float(logsumexp(sign * mixture.atoms.support / mixture.theta, b=mixture.atoms.mass))


def worst_case_log_ratio(
    m1: LaplaceMixture, m2: LaplaceMixture, epsilon: Optional[float] = None
) -> VerificationReport:
    if m1.theta != m2.theta:
        raise BudgetError(f"mixtures use different scales ({m1.theta!r} vs {m2.theta!r})")
    kinks = np.union1d(m1.atoms.support, m2.atoms.support)
    at_kinks = np.asarray(m1.log_evaluate(kinks)) - np.asarray(m2.log_evaluate(kinks))
    tails = np.array([
        _tail_log_weight(m1, -1.0) - _tail_log_weight(m2, -1.0),
        _tail_log_weight(m1, 1.0) - _tail_log_weight(m2, 1.0),
    ])
    diffs = np.concatenate((at_kinks, tails))
    points = np.concatenate((kinks, [-np.inf, np.inf]))

    forward, backward = float(diffs.max()), float((-diffs).max())
    worst = int(np.argmax(np.abs(diffs)))
    value = float(abs(diffs[worst]))
    satisfied = None if epsilon is None else value <= epsilon + VERIFY_SLACK
    return VerificationReport(
        max_abs_log_ratio=value,
        attained_at=float(points[worst]),
        satisfied=satisfied,
        forward=max(forward, 0.0),
        backward=max(backward, 0.0),
        epsilon=epsilon,
    )


def verify_pair(config: SystemConfig, pair: SecretPair, theta: float, eps: PrivacyBudget) -> VerificationReport:
    """Replay a calibrated θ against the full conditional priors of both arms."""
    first = conditional_prior(config, pair.first)
    second = conditional_prior(config, pair.second)
    if first.close_to(second):
        logger.debug("identical arms for %s; ratio is 1 everywhere", pair.describe())
        return VerificationReport(0.0, float(first.support[0]), True, pair.describe(), epsilon=eps.epsilon)
    if not theta > 0:
        raise BudgetError(f"theta must be positive for distinct arms, got {theta!r}")

    noise = LaplaceNoise(theta)
    report = worst_case_log_ratio(output_density(first, noise), output_density(second, noise), eps.epsilon)
    report = replace(report, pair=pair.describe())
    logger.info(
        "verify %s: max|log ratio|=%.12g at %s (eps=%g, %s)",
        report.pair, report.max_abs_log_ratio, report.attained_at, eps.epsilon,
        "ok" if report.satisfied else "VIOLATED",
    )
    return report


def verify_pairs(
    config: SystemConfig, pairs: Sequence[SecretPair], theta: float, eps: PrivacyBudget
) -> List[VerificationReport]:
    return [verify_pair(config, pair, theta, eps) for pair in pairs]
