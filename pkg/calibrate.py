"""
Laplace scale calibration for (ε, 𝕊)-pufferfish privacy of summation queries.

Each secret-pair family has a closed-form (or one-dimensional root-finding)
calibrator; `calibrate_generic` is the system-level fallback that works on the
full conditional priors and cross-checks all of them. Every calibrator returns
the smallest θ its sufficient condition allows (the equality case).

Families
--------
* value pairs (s_a, s_b)          → calibrate_sab
* value vs absent (s_a, s_⊥)      → calibrate_saperp
* distribution vs absent (s_P, s_⊥) → calibrate_spperp_max / _mgf / _bernoulli
* distribution pairs (s_P, s_Q)   → calibrate_spq / _bernoulli / _bernoulli_relaxed
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from dist import (
    DiscreteDistribution,
    DistAbsent,
    DistPair,
    SecretPair,
    SystemConfig,
    ValueAbsent,
    ValuePair,
    background_sum,
    conditional_prior,
)
from errors import BudgetError, ConfigError, DistributionError, RootFindingError
from settings import BRACKET_HALVINGS, BRENT_MAXITER, BRENT_XTOL
from transport import delta_star, kantorovich_plan, max_plan_distance

logger = logging.getLogger(__name__)


# =========================
# Types
# =========================
class Method(str, Enum):
    SAB = "sab"
    SAPERP = "saperp"
    SPPERP_MAX = "spperp-max"
    SPPERP_MGF = "spperp-mgf"
    SPPERP_BERNOULLI = "spperp-bernoulli"
    SPQ_DELTA = "spq"
    SPQ_BERNOULLI = "spq-bernoulli"
    SPQ_BERNOULLI_RELAXED = "spq-bernoulli-relaxed"
    KANTOROVICH_GENERIC = "generic"


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self) -> None:
        eps = float(self.epsilon)
        if not math.isfinite(eps) or eps <= 0:
            raise BudgetError(f"privacy budget must be a finite positive number, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)


@dataclass(frozen=True)
class CalibrationResult:
    theta: float
    method: Method
    witness: str
    epsilon: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.theta) or self.theta < 0:
            raise BudgetError(f"calibrated scale must be finite and nonnegative, got {self.theta!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": float(self.theta),
            "method": self.method.value,
            "witness": self.witness,
            "epsilon": float(self.epsilon),
            "diagnostics": dict(self.diagnostics),
        }


def _relaxed_ratios(p: float, q: float, background: DiscreteDistribution) -> Dict[float, float]:
    """ψ(x') for every coupling column x' with a nonzero off-diagonal entry.

    With B the background pmf, the plan between background ⊛ Bernoulli(p) and
    background ⊛ Bernoulli(q) has off-diagonal entries at distance 1 only:
      p < q: column x' gets π*(x', x') = (1−q)B(x') + pB(x'−1) and π*(x'−1, x') = (q−p)B(x'−1)
      p > q: column x' gets π*(x', x') = (1−p)B(x') + qB(x'−1) and π*(x'+1, x') = (p−q)B(x')
    ψ is the diagonal / off-diagonal ratio; columns whose off-diagonal mass
    vanishes carry no constraint.
    """
    psi: Dict[float, float] = {}
    for x in np.union1d(background.support, background.support + 1.0):
        here, below = background.pmf(x), background.pmf(x - 1.0)
        if p < q:
            if below <= 0:
                continue
            psi[float(x)] = ((1.0 - q) * here + p * below) / ((q - p) * below)
        else:
            if here <= 0:
                continue
            psi[float(x)] = ((1.0 - p) * here + q * below) / ((p - q) * here)
    return psi


@dataclass(frozen=True)
class BinaryRelaxContext:
    """Bernoulli(p) vs Bernoulli(q) for one user over a fixed background law."""

    p: float
    q: float
    background: DiscreteDistribution
    psi: Dict[float, float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("p", "q"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DistributionError(f"Bernoulli parameter {name}={value!r} outside [0, 1]")
        if self.p == self.q:
            raise DistributionError("relaxed calibration needs p != q")
        object.__setattr__(self, "psi", _relaxed_ratios(self.p, self.q, self.background))


def relax_context(config: SystemConfig, user_id: str, p: float, q: float) -> BinaryRelaxContext:
    return BinaryRelaxContext(p, q, background_sum(config, user_id))


# =========================
# Value secrets
# =========================
def calibrate_sab(pairs: Sequence[ValuePair], eps: PrivacyBudget) -> CalibrationResult:
    best, witness = 0.0, "none"
    for pair in pairs:
        gap = abs(pair.a - pair.b)
        if gap > best:
            best, witness = gap, pair.describe()
    return CalibrationResult(best / eps.epsilon, Method.SAB, witness, eps.epsilon)


def calibrate_saperp(pairs: Sequence[ValueAbsent], eps: PrivacyBudget) -> CalibrationResult:
    # absence is indistinguishable from reporting 0
    best, witness = 0.0, "none"
    for pair in pairs:
        if abs(pair.a) > best:
            best, witness = abs(pair.a), pair.describe()
    return CalibrationResult(best / eps.epsilon, Method.SAPERP, witness, eps.epsilon)


# =========================
# Distribution vs absence
# =========================
def calibrate_spperp_max(dists: Sequence[DiscreteDistribution], eps: PrivacyBudget) -> CalibrationResult:
    best, witness = 0.0, "none"
    for i, dist in enumerate(dists):
        if dist.max_abs() > best:
            best, witness = dist.max_abs(), f"distribution #{i}: max |t| = {dist.max_abs():g}"
    return CalibrationResult(best / eps.epsilon, Method.SPPERP_MAX, witness, eps.epsilon)


def _mgf_root(dist: DiscreteDistribution, eps: float, tol: float) -> Tuple[float, Dict[str, Any]]:
    """Solve log E[exp(|D|/θ)] = ε for θ."""
    magnitudes = np.abs(dist.support)
    top = float(magnitudes.max())
    if top == 0.0:
        return 0.0, {"all_zero_support": True}
    if np.all(magnitudes == top):
        return top / eps, {"closed_form": True}

    def excess(theta: float) -> float:
        return float(logsumexp(magnitudes / theta, b=dist.mass)) - eps

    hi = top / eps
    if excess(hi) >= 0.0:
        return hi, {"closed_form": True}
    lo, halvings = hi / 2.0, 1
    while excess(lo) <= 0.0:
        if halvings >= BRACKET_HALVINGS:
            raise RootFindingError("could not bracket the MGF root from below")
        lo, halvings = lo / 2.0, halvings + 1
    logger.debug("mgf bracket [%g, %g] after %d halvings", lo, hi, halvings)

    root, info = brentq(excess, lo, hi, xtol=tol, maxiter=BRENT_MAXITER, full_output=True, disp=False)
    if not info.converged:
        raise RootFindingError(f"Brent's method did not converge after {info.iterations} iterations ({info.flag})")
    root = float(root)
    if excess(root) > 0.0:
        # landed left of the root; the returned θ must satisfy E[e^{|D|/θ}] ≤ e^ε
        root = min(hi, root + tol)
    return root, {"iterations": int(info.iterations), "bracket": [lo, hi]}


def calibrate_spperp_mgf(
    dists: Sequence[DiscreteDistribution], eps: PrivacyBudget, tol: float = BRENT_XTOL
) -> CalibrationResult:
    """Relaxed (s_P, s_⊥) calibration: E[exp(|D_i|/θ)] = e^ε, worst user wins."""
    if tol <= 0:
        raise BudgetError(f"root tolerance must be positive, got {tol!r}")
    best, witness, diagnostics = 0.0, "none", {}
    for i, dist in enumerate(dists):
        theta, diag = _mgf_root(dist, eps.epsilon, tol)
        if diag.get("all_zero_support"):
            logger.warning("distribution #%d is a point mass at 0; it needs no noise", i)
        if i == 0 or theta > best:
            best, witness, diagnostics = theta, f"distribution #{i}", diag
    logger.info("spperp-mgf: theta=%.10g at eps=%g (%s)", best, eps.epsilon, witness)
    return CalibrationResult(best, Method.SPPERP_MGF, witness, eps.epsilon, diagnostics)


def calibrate_spperp_bernoulli(p: float, eps: PrivacyBudget) -> CalibrationResult:
    """Closed form of the MGF condition for D_i ~ Bernoulli(p)."""
    if not 0.0 <= p <= 1.0:
        raise DistributionError(f"Bernoulli parameter {p!r} outside [0, 1]")
    if p == 0.0:
        return CalibrationResult(0.0, Method.SPPERP_BERNOULLI, "p = 0", eps.epsilon, {"all_zero_support": True})
    # (e^ε − (1 − p)) / p written as 1 + expm1(ε)/p for small-ε accuracy
    theta = 1.0 / math.log1p(math.expm1(eps.epsilon) / p)
    return CalibrationResult(theta, Method.SPPERP_BERNOULLI, f"p = {p:g}", eps.epsilon)


# =========================
# Distribution pairs
# =========================
def calibrate_spq(pairs: Sequence[DistPair], eps: PrivacyBudget) -> CalibrationResult:
    """θ from Δ* on the user's own CDFs; independent of every other user."""
    best, witness = 0.0, "none"
    for pair in pairs:
        report = delta_star(pair.P, pair.Q)
        if report.sup > best:
            best, witness = report.sup, f"{pair.describe()} at t={report.witness:g}"
    return CalibrationResult(best / eps.epsilon, Method.SPQ_DELTA, witness, eps.epsilon)


def calibrate_spq_bernoulli(eps: PrivacyBudget) -> CalibrationResult:
    return CalibrationResult(1.0 / eps.epsilon, Method.SPQ_BERNOULLI, "any Bernoulli pair", eps.epsilon)


def calibrate_spq_bernoulli_relaxed(ctx: BinaryRelaxContext, eps: PrivacyBudget) -> CalibrationResult:
    # ψ is never empty: the column next to the background's lowest (p < q) or
    # highest (p > q) atom always carries off-diagonal mass.
    # θ(ψ) = 1/log(e^ε + (e^ε − 1)ψ) decreases in ψ, so the smallest ψ binds
    x_min = min(ctx.psi, key=lambda x: (ctx.psi[x], x))
    psi_min = ctx.psi[x_min]
    theta = 1.0 / math.log1p(math.expm1(eps.epsilon) * (1.0 + psi_min))
    logger.debug("relaxed binary: psi_min=%g at x=%g over %d columns", psi_min, x_min, len(ctx.psi))
    return CalibrationResult(
        theta,
        Method.SPQ_BERNOULLI_RELAXED,
        f"x = {x_min:g}",
        eps.epsilon,
        {"psi_min": psi_min, "columns": len(ctx.psi)},
    )


# =========================
# System-level cross-check
# =========================
def calibrate_generic(
    config: SystemConfig, pairs: Sequence[SecretPair], eps: PrivacyBudget, use_plan: bool = False
) -> CalibrationResult:
    """θ = max over pairs of sup Δ* between the two full conditional priors, over ε.

    With `use_plan` the sup is read from the explicit Kantorovich plan instead.
    """
    best, witness = 0.0, "none"
    for pair in pairs:
        first = conditional_prior(config, pair.first)
        second = conditional_prior(config, pair.second)
        if use_plan:
            distance, where = max_plan_distance(kantorovich_plan(first, second)), "plan"
        else:
            report = delta_star(first, second)
            distance, where = report.sup, f"x={report.witness:g}"
        if distance > best:
            best, witness = distance, f"{pair.describe()} at {where}"
    return CalibrationResult(
        best / eps.epsilon, Method.KANTOROVICH_GENERIC, witness, eps.epsilon, {"use_plan": use_plan}
    )


# =========================
# Sweeps & dispatch
# =========================
def eps_grid(eps_min: float, eps_max: float, steps: int) -> List[float]:
    """Evenly spaced budgets including both ends."""
    if steps < 1:
        raise BudgetError("a sweep needs at least one step")
    if not (0 < eps_min <= eps_max):
        raise BudgetError(f"invalid sweep range [{eps_min!r}, {eps_max!r}]")
    return [float(e) for e in np.linspace(eps_min, eps_max, steps)]


def sweep(calibrator: Callable[[PrivacyBudget], CalibrationResult], grid: Iterable[float]) -> List[Tuple[float, float]]:
    return [(eps, calibrator(PrivacyBudget(eps)).theta) for eps in grid]


def _only(pairs: Sequence[SecretPair], cls: type, method: Method) -> list:
    wrong = [p for p in pairs if not isinstance(p, cls)]
    if wrong:
        raise ConfigError(f"method {method.value} expects {cls.kind} pairs, got {wrong[0].kind}")
    return list(pairs)


def calibrator_for(
    method: Method,
    *,
    config: Optional[SystemConfig] = None,
    pairs: Sequence[SecretPair] = (),
    dists: Sequence[DiscreteDistribution] = (),
    p: Optional[float] = None,
    q: Optional[float] = None,
    user_id: Optional[str] = None,
    tol: float = BRENT_XTOL,
    use_plan: bool = False,
) -> Callable[[PrivacyBudget], CalibrationResult]:
    """Bind the method's inputs once; the result maps a budget to a calibration."""

    def need(value: Any, name: str) -> Any:
        if value is None or (isinstance(value, (list, tuple)) and not value):
            raise ConfigError(f"method {method.value} needs {name}")
        return value

    if method is Method.SAB:
        chosen = _only(pairs, ValuePair, method)
        return lambda eps: calibrate_sab(chosen, eps)
    if method is Method.SAPERP:
        chosen = _only(pairs, ValueAbsent, method)
        return lambda eps: calibrate_saperp(chosen, eps)
    if method in (Method.SPPERP_MAX, Method.SPPERP_MGF):
        chosen = list(dists) or [pair.P for pair in _only(pairs, DistAbsent, method)]
        need(chosen, "distributions (--dist or s_P pairs)")
        if method is Method.SPPERP_MAX:
            return lambda eps: calibrate_spperp_max(chosen, eps)
        return lambda eps: calibrate_spperp_mgf(chosen, eps, tol)
    if method is Method.SPPERP_BERNOULLI:
        need(p, "--p")
        return lambda eps: calibrate_spperp_bernoulli(p, eps)
    if method is Method.SPQ_DELTA:
        chosen = _only(need(list(pairs), "pairs"), DistPair, method)
        return lambda eps: calibrate_spq(chosen, eps)
    if method is Method.SPQ_BERNOULLI:
        return calibrate_spq_bernoulli
    if method is Method.SPQ_BERNOULLI_RELAXED:
        ctx = relax_context(need(config, "--config"), need(user_id, "--user"), need(p, "--p"), need(q, "--q"))
        return lambda eps: calibrate_spq_bernoulli_relaxed(ctx, eps)
    if method is Method.KANTOROVICH_GENERIC:
        cfg, chosen = need(config, "--config"), need(list(pairs), "pairs")
        return lambda eps: calibrate_generic(cfg, chosen, eps, use_plan)
    raise ConfigError(f"unknown method {method!r}")
