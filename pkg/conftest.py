"""
Shared fixtures: the worked-example users and distributions used across the
suite, plus a hypothesis profile without deadlines (convolutions of five users
occasionally take longer than the default 200 ms on slow CI boxes).
"""

import pytest
from hypothesis import settings

from dist import DiscreteDistribution, SystemConfig, UserSpec

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def table(masses):
    """Distribution on 1..len(masses) from a row of masses (zeros allowed)."""
    return DiscreteDistribution.from_mapping({float(x): m for x, m in enumerate(masses, start=1)})


@pytest.fixture
def user1():
    return table([0.01, 0.04, 0.1, 0.2, 0.65])


@pytest.fixture
def user2():
    return table([0.7, 0.2, 0.05, 0.04, 0.01])


@pytest.fixture
def user3():
    return table([0.2, 0.2, 0.2, 0.2, 0.2])


@pytest.fixture
def P4():
    return table([0.4, 0.1, 0.0, 0.1, 0.4])


@pytest.fixture
def Q4():
    return table([0.0, 0.05, 0.9, 0.05, 0.0])


@pytest.fixture
def three_users(user1, user2, user3):
    return [user1, user2, user3]


@pytest.fixture
def four_user_config(user1, user2, user3, P4):
    """Three background users plus user 4 drawn from P4."""
    return SystemConfig((
        UserSpec("u1", 0.9, user1),
        UserSpec("u2", 0.8, user2),
        UserSpec("u3", 0.7, user3),
        UserSpec("u4", 0.6, P4),
    ))


@pytest.fixture
def prior_pair():
    """Two query-answer priors on 1..5 and their known monotone coupling."""
    p = table([0.2, 0.225, 0.5, 0.075, 0.0])
    q = table([0.0, 0.075, 0.5, 0.225, 0.2])
    return p, q


@pytest.fixture
def prior_pair_plan():
    return {
        (1.0, 2.0): 0.075,
        (1.0, 3.0): 0.125,
        (2.0, 3.0): 0.225,
        (3.0, 3.0): 0.15,
        (3.0, 4.0): 0.225,
        (3.0, 5.0): 0.125,
        (4.0, 5.0): 0.075,
    }
