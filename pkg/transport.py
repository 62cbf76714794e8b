"""
Kantorovich (1-Wasserstein) optimal transport between discrete distributions.

For distributions on the real line the optimal plan π* is the monotone
coupling, determined entirely by the two CDFs:

    π*(x_k, x'_l) = min(F_p(x_k), F_q(x'_l)) − min(F_p(x_{k−1}), F_q(x'_l))
                  − min(F_p(x_k), F_q(x'_{l−1})) + min(F_p(x_{k−1}), F_q(x'_{l−1}))

The calibrators only need sup_{(x,x') ∈ supp(π*)} |x − x'|, which `delta_star`
reads straight off the CDFs without building the plan.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from dist import CumulativeDistribution, DiscreteDistribution, cdf
from errors import DistributionError
from settings import CDF_TIE_TOLERANCE, MASS_TOLERANCE, PLAN_PRUNE_TOLERANCE

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling; entry k moves `mass[k]` from `source[k]` to `target[k]`.

    Entries are stored in lexicographic (x, x') order.
    """

    source: np.ndarray
    target: np.ndarray
    mass: np.ndarray
    first: DiscreteDistribution
    second: DiscreteDistribution

    def __len__(self) -> int:
        return int(self.mass.size)

    @property
    def entries(self) -> Dict[Tuple[float, float], float]:
        return {(float(x), float(y)): float(m) for x, y, m in zip(self.source, self.target, self.mass)}

    def mass_at(self, x: float, x_prime: float) -> float:
        hit = (np.abs(self.source - x) <= PLAN_PRUNE_TOLERANCE) & (np.abs(self.target - x_prime) <= PLAN_PRUNE_TOLERANCE)
        return float(self.mass[hit].sum())

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(float(x), float(y), float(m)) for x, y, m in zip(self.source, self.target, self.mass)]

    def cost(self) -> float:
        """Σ |x − x'| π*(x, x'), i.e. the 1-Wasserstein distance of the marginals."""
        return float(np.dot(np.abs(self.source - self.target), self.mass))


@dataclass(frozen=True)
class DeltaStarReport:
    per_point: Dict[float, float]
    sup: float
    witness: float


def kantorovich_plan(p: DiscreteDistribution, q: DiscreteDistribution) -> TransportPlan:
    Fp = np.concatenate(([0.0], cdf(p).cum))
    Fq = np.concatenate(([0.0], cdf(q).cum))
    corner = np.minimum.outer(Fp, Fq)
    block = corner[1:, 1:] - corner[:-1, 1:] - corner[1:, :-1] + corner[:-1, :-1]
    rows, cols = np.nonzero(block > PLAN_PRUNE_TOLERANCE)
    mass = block[rows, cols]

    # marginal check: pruning must not have eaten real mass
    row_sums = np.bincount(rows, weights=mass, minlength=len(p))
    col_sums = np.bincount(cols, weights=mass, minlength=len(q))
    if not (np.allclose(row_sums, p.mass, rtol=0.0, atol=MASS_TOLERANCE)
            and np.allclose(col_sums, q.mass, rtol=0.0, atol=MASS_TOLERANCE)):
        raise DistributionError("coupling marginals do not reproduce the inputs")

    plan = TransportPlan(p.support[rows], q.support[cols], mass, p, q)
    logger.debug("kantorovich plan: %d entries, W1=%.6g", len(plan), plan.cost())
    return plan


def max_plan_distance(plan: TransportPlan) -> float:
    if len(plan) == 0:
        return 0.0
    return float(np.max(np.abs(plan.source - plan.target)))


# =========================
# Δ* shortcut
# =========================
def _forward_reach(F: CumulativeDistribution, x: float, level: float) -> float:
    """Smallest Δ ≥ 0 with F(x + Δ) ≥ level (up to CDF_TIE_TOLERANCE).

    F is a step function, so the answer is attained at one of its atoms.
    """
    idx = int(np.searchsorted(F.cum, level - CDF_TIE_TOLERANCE, side="left"))
    idx = min(idx, F.support.size - 1)
    return max(0.0, float(F.support[idx]) - x)


def _delta_at(Fp: CumulativeDistribution, Fq: CumulativeDistribution, x: float) -> float:
    fp, fq = Fp.at(x), Fq.at(x)
    if abs(fp - fq) <= CDF_TIE_TOLERANCE:
        return 0.0
    if fp > fq:
        # p's atom at x still has mass to send right into q
        return _forward_reach(Fq, x, fp)
    # q's atom at x is fed from p's atoms further right
    return _forward_reach(Fp, x, fq)


def delta_star_at(p: DiscreteDistribution, q: DiscreteDistribution, x: float) -> float:
    """Δ*(x) at an arbitrary real point."""
    return _delta_at(cdf(p), cdf(q), float(x))


def delta_star(p: DiscreteDistribution, q: DiscreteDistribution) -> DeltaStarReport:
    """Δ*(x) over the domain supp(p) ∪ supp(q), its supremum and where it is attained.

    The supremum equals `max_plan_distance(kantorovich_plan(p, q))`.
    """
    Fp, Fq = cdf(p), cdf(q)
    per_point: Dict[float, float] = {}
    sup, witness = 0.0, float(p.support[0])
    for x in np.union1d(p.support, q.support):
        value = _delta_at(Fp, Fq, float(x))
        per_point[float(x)] = value
        if value > sup:
            sup, witness = value, float(x)
    logger.debug("delta*: sup=%g at x=%g over %d points", sup, witness, len(per_point))
    return DeltaStarReport(per_point=per_point, sup=sup, witness=witness)
