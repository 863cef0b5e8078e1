import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from reggames.game import Game, GameSize, Profile

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def sizes(draw, max_players=3, max_actions=3):
    n = draw(st.integers(2, max_players))
    return GameSize(tuple(draw(st.integers(2, max_actions)) for _ in range(n)))


@st.composite
def seeds(draw):
    return draw(st.integers(0, 2**32 - 1))


def interior_profile(rng, size: GameSize) -> Profile:
    return Profile.from_simplex([rng.dirichlet(np.ones(k)) for k in size.shape])


def brute_expected(tensor, sigmas):
    """Sum over joint actions of payoff times product of probabilities."""
    total = 0.0
    for idx in np.ndindex(tensor.shape):
        p = 1.0
        for i, a in enumerate(idx):
            p *= sigmas[i][a]
        total += tensor[idx] * p
    return total


@pytest.fixture
def coordination():
    return Game.bimatrix([[1.0, 0.0], [0.0, 2.0]])
