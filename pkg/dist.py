"""
Finite discrete distributions and the multi-user summation model.

Overview
--------
* `DiscreteDistribution` is an immutable pmf on a strictly increasing real
  support; zero-mass atoms never survive construction, so `support` is
  exactly supp(P).
* `SystemConfig` is the adversary's prior: one `UserSpec` (presence ζ_i and
  data distribution P_i) per user.
* The query is f(D) = Σ_i D_i. `background_sum` gives the law of the sum over
  everyone but one user and `conditional_prior` the law of the answer given
  one arm of a secret pair.

Presence probabilities are carried and serialized but never enter a
conditional prior: for a fixed user i the factor Π_{j≠i} ζ_j is common to both
arms of every secret pair, so the conditionals are returned normalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Any, ClassVar, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
from typing_extensions import TypeAlias

from errors import ConfigError, DistributionError, UnknownUserError
from settings import MASS_TOLERANCE, SUPPORT_MERGE_TOLERANCE

logger = logging.getLogger(__name__)


# =========================
# Distributions
# =========================
def _frozen(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite-support probability mass function.

    Construction validates and prunes zero-mass atoms; it does not
    renormalize, so serialized distributions round-trip bit-exactly.
    """

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=np.float64)
        mass = np.asarray(self.mass, dtype=np.float64)
        if support.ndim != 1 or mass.ndim != 1 or support.shape != mass.shape:
            raise DistributionError("support and mass must be 1-D sequences of equal length")
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(mass))):
            raise DistributionError("support and mass must be finite")
        if np.any(mass < 0):
            raise DistributionError("mass entries must be nonnegative")
        if support.size > 1 and not np.all(np.diff(support) > 0):
            raise DistributionError("support must be strictly increasing")
        keep = mass > 0
        support, mass = support[keep], mass[keep]
        if support.size == 0:
            raise DistributionError("distribution has no positive mass")
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise DistributionError(f"mass sums to {total!r}, expected 1")
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "mass", _frozen(mass))

    # --- constructors -----------------------------------------------------
    @classmethod
    def from_mapping(cls, atoms: Union[Mapping[float, float], Iterable[Tuple[float, float]]]) -> "DiscreteDistribution":
        """Build from value→mass pairs in any order; duplicates are summed."""
        items = list(atoms.items()) if isinstance(atoms, Mapping) else list(atoms)
        if not items:
            raise DistributionError("no atoms given")
        values = np.array([v for v, _ in items], dtype=np.float64)
        masses = np.array([m for _, m in items], dtype=np.float64)
        if np.any(masses < 0):
            raise DistributionError("mass entries must be nonnegative")
        return _assemble(values, masses, renormalize=False)

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def bernoulli(cls, p: float) -> "DiscreteDistribution":
        if not 0.0 <= p <= 1.0:
            raise DistributionError(f"Bernoulli parameter {p!r} outside [0, 1]")
        return cls(np.array([0.0, 1.0]), np.array([1.0 - p, p]))

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "DiscreteDistribution":
        values = sorted(set(float(v) for v in values))
        return cls(np.array(values), np.full(len(values), 1.0 / len(values)))

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "DiscreteDistribution":
        try:
            support, mass = payload["support"], payload["mass"]
        except (KeyError, TypeError) as exc:
            raise ConfigError("distribution needs 'support' and 'mass' lists") from exc
        try:
            support_arr = np.asarray(support, dtype=np.float64)
            mass_arr = np.asarray(mass, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"distribution entries must be numbers: {exc}") from exc
        return cls(support_arr, mass_arr)

    def to_dict(self) -> Dict[str, List[float]]:
        return {"support": [float(v) for v in self.support], "mass": [float(m) for m in self.mass]}

    # --- queries ------------------------------------------------------------
    def __len__(self) -> int:
        return int(self.support.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(self.mass, other.mass)

    def __hash__(self) -> int:
        return hash((self.support.tobytes(), self.mass.tobytes()))

    def __repr__(self) -> str:
        atoms = ", ".join(f"{v:g}: {m:.6g}" for v, m in zip(self.support, self.mass))
        return f"DiscreteDistribution({{{atoms}}})"

    def is_point_mass(self) -> bool:
        return self.support.size == 1

    def pmf(self, value: float) -> float:
        idx = int(np.searchsorted(self.support, value))
        if idx < self.support.size and abs(self.support[idx] - value) <= SUPPORT_MERGE_TOLERANCE:
            return float(self.mass[idx])
        if idx > 0 and abs(self.support[idx - 1] - value) <= SUPPORT_MERGE_TOLERANCE:
            return float(self.mass[idx - 1])
        return 0.0

    def contains(self, value: float) -> bool:
        return self.pmf(value) > 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.mass))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.support)))

    def shift(self, offset: float) -> "DiscreteDistribution":
        return DiscreteDistribution(self.support + float(offset), self.mass)

    def close_to(self, other: "DiscreteDistribution", atol: float = SUPPORT_MERGE_TOLERANCE) -> bool:
        """Same atoms up to float noise (used to detect identical secret arms)."""
        return (
            self.support.shape == other.support.shape
            and bool(np.allclose(self.support, other.support, rtol=0.0, atol=atol))
            and bool(np.allclose(self.mass, other.mass, rtol=0.0, atol=atol))
        )


def _assemble(values: np.ndarray, masses: np.ndarray, renormalize: bool = True) -> DiscreteDistribution:
    """Sort atoms, merge values within SUPPORT_MERGE_TOLERANCE, drop zero mass."""
    order = np.argsort(values, kind="stable")
    values, masses = values[order], masses[order]
    starts = np.empty(values.size, dtype=bool)
    starts[0] = True
    starts[1:] = np.diff(values) > SUPPORT_MERGE_TOLERANCE
    groups = np.cumsum(starts) - 1
    support = values[starts]
    merged = np.bincount(groups, weights=masses)
    keep = merged > 0
    support, merged = support[keep], merged[keep]
    if merged.size == 0:
        raise DistributionError("distribution has no positive mass")
    if renormalize:
        merged = merged / merged.sum()
    return DiscreteDistribution(support, merged)


@dataclass(frozen=True, eq=False)
class CumulativeDistribution:
    """Right-continuous step CDF; `cum[k]` = Σ_{j≤k} mass[j], last entry 1."""

    support: np.ndarray
    cum: np.ndarray

    def at(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """F(x) for arbitrary real x (0 left of the support)."""
        idx = np.searchsorted(self.support, x, side="right") - 1
        values = np.where(idx >= 0, self.cum[np.clip(idx, 0, None)], 0.0)
        return float(values) if np.ndim(values) == 0 else values


def cdf(p: DiscreteDistribution) -> CumulativeDistribution:
    cum = np.minimum(np.cumsum(p.mass), 1.0)
    cum[-1] = 1.0
    return CumulativeDistribution(p.support, _frozen(cum))


def convolve(p: DiscreteDistribution, q: DiscreteDistribution) -> DiscreteDistribution:
    """Law of X + Y for independent X ~ p, Y ~ q."""
    if p.is_point_mass():
        return q.shift(p.support[0])
    if q.is_point_mass():
        return p.shift(q.support[0])
    values = np.add.outer(p.support, q.support).ravel()
    masses = np.multiply.outer(p.mass, q.mass).ravel()
    return _assemble(values, masses)


def convolve_all(dists: Iterable[DiscreteDistribution]) -> DiscreteDistribution:
    """Left fold of `convolve`; the empty sum is a point mass at 0."""
    dists = list(dists)
    if not dists:
        return DiscreteDistribution.point_mass(0.0)
    return reduce(convolve, dists)


# =========================
# System configuration (the prior ρ)
# =========================
@dataclass(frozen=True)
class UserSpec:
    id: str
    presence: float
    distribution: DiscreteDistribution

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ConfigError("user id must be a non-empty string")
        if not 0.0 <= float(self.presence) <= 1.0:
            raise ConfigError(f"presence of {self.id!r} must lie in [0, 1], got {self.presence!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "presence": float(self.presence), "distribution": self.distribution.to_dict()}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "UserSpec":
        try:
            return cls(
                id=payload["id"],
                presence=float(payload.get("presence", 1.0)),
                distribution=DiscreteDistribution.from_dict(payload["distribution"]),
            )
        except KeyError as exc:
            raise ConfigError(f"user entry is missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (ConfigError, DistributionError)):
                raise
            raise ConfigError(f"malformed user entry: {exc}") from exc


@dataclass(frozen=True)
class SystemConfig:
    users: Tuple[UserSpec, ...]

    def __post_init__(self) -> None:
        users = tuple(self.users)
        if not users:
            raise ConfigError("configuration needs at least one user")
        ids = [u.id for u in users]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ConfigError(f"duplicate user ids: {', '.join(duplicates)}")
        object.__setattr__(self, "users", users)

    @property
    def user_ids(self) -> List[str]:
        return [u.id for u in self.users]

    def index(self, user_id: str) -> int:
        for i, u in enumerate(self.users):
            if u.id == user_id:
                return i
        raise UnknownUserError(user_id)

    def user(self, user_id: str) -> UserSpec:
        return self.users[self.index(user_id)]

    def with_presence(self, user_id: str, presence: float) -> "SystemConfig":
        i = self.index(user_id)
        replaced = UserSpec(user_id, presence, self.users[i].distribution)
        return SystemConfig(self.users[:i] + (replaced,) + self.users[i + 1:])

    def to_dict(self) -> Dict[str, Any]:
        return {"users": [u.to_dict() for u in self.users]}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SystemConfig":
        if not isinstance(payload, Mapping) or not isinstance(payload.get("users"), list):
            raise ConfigError("configuration must be an object with a 'users' list")
        return cls(tuple(UserSpec.from_dict(entry) for entry in payload["users"]))


# =========================
# Secrets
# =========================
@dataclass(frozen=True)
class ValueArm:
    """s_{a_i}: user i is present and reports `value`."""

    user_id: str
    value: float


@dataclass(frozen=True)
class AbsentArm:
    """s_{⊥_i}: user i is absent."""

    user_id: str


@dataclass(frozen=True)
class DistArm:
    """s_{P_i}: user i is present with data drawn from `distribution`."""

    user_id: str
    distribution: DiscreteDistribution


SecretArm: TypeAlias = Union[ValueArm, AbsentArm, DistArm]


@dataclass(frozen=True)
class ValuePair:
    user_id: str
    a: float
    b: float
    kind: ClassVar[str] = "value_pair"

    @property
    def first(self) -> SecretArm:
        return ValueArm(self.user_id, self.a)

    @property
    def second(self) -> SecretArm:
        return ValueArm(self.user_id, self.b)

    def describe(self) -> str:
        return f"(s_a, s_b) user={self.user_id} a={self.a:g} b={self.b:g}"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "user": self.user_id, "a": float(self.a), "b": float(self.b)}


@dataclass(frozen=True)
class ValueAbsent:
    user_id: str
    a: float
    kind: ClassVar[str] = "value_absent"

    @property
    def first(self) -> SecretArm:
        return ValueArm(self.user_id, self.a)

    @property
    def second(self) -> SecretArm:
        return AbsentArm(self.user_id)

    def describe(self) -> str:
        return f"(s_a, s_absent) user={self.user_id} a={self.a:g}"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "user": self.user_id, "a": float(self.a)}


@dataclass(frozen=True)
class DistAbsent:
    user_id: str
    P: DiscreteDistribution
    kind: ClassVar[str] = "dist_absent"

    @property
    def first(self) -> SecretArm:
        return DistArm(self.user_id, self.P)

    @property
    def second(self) -> SecretArm:
        return AbsentArm(self.user_id)

    def describe(self) -> str:
        return f"(s_P, s_absent) user={self.user_id} P={self.P!r}"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "user": self.user_id, "P": self.P.to_dict()}


@dataclass(frozen=True)
class DistPair:
    user_id: str
    P: DiscreteDistribution
    Q: DiscreteDistribution
    kind: ClassVar[str] = "dist_pair"

    @property
    def first(self) -> SecretArm:
        return DistArm(self.user_id, self.P)

    @property
    def second(self) -> SecretArm:
        return DistArm(self.user_id, self.Q)

    def describe(self) -> str:
        return f"(s_P, s_Q) user={self.user_id} P={self.P!r} Q={self.Q!r}"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "user": self.user_id, "P": self.P.to_dict(), "Q": self.Q.to_dict()}


SecretPair: TypeAlias = Union[ValuePair, ValueAbsent, DistAbsent, DistPair]

_PAIR_KINDS = {cls.kind: cls for cls in (ValuePair, ValueAbsent, DistAbsent, DistPair)}


def pair_from_dict(payload: Mapping[str, Any]) -> SecretPair:
    """Parse one secret pair; the variant comes from "kind" or from the keys present."""
    if not isinstance(payload, Mapping):
        raise ConfigError("secret pair must be a JSON object")
    user = str(payload.get("user", ""))
    kind = payload.get("kind")
    if kind is None:
        if "a" in payload:
            kind = "value_pair" if "b" in payload else "value_absent"
        elif "P" in payload:
            kind = "dist_pair" if "Q" in payload else "dist_absent"
        else:
            raise ConfigError("secret pair needs 'a' (and optionally 'b') or 'P' (and optionally 'Q')")
    if kind not in _PAIR_KINDS:
        raise ConfigError(f"unknown secret pair kind {kind!r}")
    try:
        if kind == "value_pair":
            return ValuePair(user, float(payload["a"]), float(payload["b"]))
        if kind == "value_absent":
            return ValueAbsent(user, float(payload["a"]))
        if kind == "dist_absent":
            return DistAbsent(user, DiscreteDistribution.from_dict(payload["P"]))
        return DistPair(user, DiscreteDistribution.from_dict(payload["P"]), DiscreteDistribution.from_dict(payload["Q"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, DistributionError)):
            raise
        raise ConfigError(f"malformed {kind} entry: {exc}") from exc


def pairs_from_json(payload: Any) -> List[SecretPair]:
    items = payload if isinstance(payload, list) else [payload]
    return [pair_from_dict(item) for item in items]


# =========================
# Query-answer priors
# =========================
def background_sum(config: SystemConfig, excluded_user: str) -> DiscreteDistribution:
    """Law of f(D_{−i}) = Σ_{j≠i} D_j, every remaining user taken as present."""
    config.index(excluded_user)
    others = [u.distribution for u in config.users if u.id != excluded_user]
    return convolve_all(others)


def conditional_prior(config: SystemConfig, secret: SecretArm) -> DiscreteDistribution:
    """Normalized law of X = f(D) given one arm of a secret pair."""
    background = background_sum(config, secret.user_id)
    if isinstance(secret, ValueArm):
        return background.shift(secret.value)
    if isinstance(secret, AbsentArm):
        return background
    if isinstance(secret, DistArm):
        return convolve(background, secret.distribution)
    raise TypeError(f"not a secret arm: {secret!r}")
