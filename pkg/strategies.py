"""Hypothesis strategies for small randomized systems.

Supports are integers in [-10, 10] with integer weights, so every shift and
sum stays exact in floating point.
"""

from hypothesis import strategies as st

from dist import DiscreteDistribution, SystemConfig, UserSpec

epsilons = st.floats(min_value=0.05, max_value=5.0, allow_nan=False, allow_infinity=False)
support_values = st.integers(min_value=-10, max_value=10)


@st.composite
def distributions(draw, max_atoms=6, values=support_values):
    atoms = draw(st.lists(values, min_size=1, max_size=max_atoms, unique=True))
    weights = draw(st.lists(st.integers(1, 10), min_size=len(atoms), max_size=len(atoms)))
    total = sum(weights)
    return DiscreteDistribution.from_mapping({float(v): w / total for v, w in zip(atoms, weights)})


@st.composite
def multi_atom_distributions(draw, max_atoms=6):
    """At least two atoms with distinct |t|."""
    dist = draw(distributions(max_atoms=max_atoms))
    magnitudes = {abs(v) for v in dist.support}
    if len(magnitudes) < 2:
        extra = draw(st.integers(min_value=-10, max_value=10).filter(lambda v: abs(v) not in magnitudes))
        pairs = list(zip(dist.support, dist.mass * 0.5)) + [(float(extra), 0.5)]
        dist = DiscreteDistribution.from_mapping(pairs)
    return dist


@st.composite
def configs(draw, min_users=1, max_users=5):
    dists = draw(st.lists(distributions(), min_size=min_users, max_size=max_users))
    presences = draw(st.lists(st.floats(0.0, 1.0), min_size=len(dists), max_size=len(dists)))
    return SystemConfig(tuple(UserSpec(f"u{i}", z, d) for i, (z, d) in enumerate(zip(presences, dists))))


@st.composite
def config_and_user(draw, min_users=1, max_users=5):
    config = draw(configs(min_users, max_users))
    return config, draw(st.sampled_from(config.user_ids))
