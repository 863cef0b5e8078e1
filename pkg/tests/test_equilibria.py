import itertools

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from reggames.equilibria import (
    EquilibriumRecord,
    all_carriers,
    dedup,
    enumerate_2p,
    enumerate_potential,
    verify_equilibrium,
)
from reggames.game import Game, GameSize, Profile, carrier_of
from reggames.potential import degenerate_example, sample_general, sample_identical


def pure_equilibria(game: Game) -> set[tuple[int, ...]]:
    """Brute-force pure equilibria straight from the payoff tensors."""
    out = set()
    for a in np.ndindex(game.size.shape):
        ok = True
        for i in range(game.num_players):
            t = game.tensor(i)
            idx = list(a)
            here = t[tuple(idx)]
            for b in range(game.size.shape[i]):
                idx[i] = b
                if t[tuple(idx)] > here + 1e-12:
                    ok = False
            if not ok:
                break
        if ok:
            out.add(tuple(int(v) for v in a))
    return out


def _pure_records(records):
    out = set()
    for r in records:
        if all(len(s) == 1 for s in r.carrier.supports):
            out.add(tuple(s[0] for s in r.carrier.supports))
    return out


def mixed_2x2(row, col):
    """Closed-form interior equilibrium of a 2x2 bimatrix game, if any."""
    # column mixes to make row indifferent, and vice versa
    da = row[0, 0] - row[0, 1] - row[1, 0] + row[1, 1]
    db = col[0, 0] - col[0, 1] - col[1, 0] + col[1, 1]
    if da == 0 or db == 0:
        return None
    q = (row[1, 1] - row[0, 1]) / da
    p = (col[1, 1] - col[1, 0]) / db
    if 0 < p < 1 and 0 < q < 1:
        return np.array([p, 1 - p]), np.array([q, 1 - q])
    return None


def test_coordination_game(coordination):
    recs = enumerate_2p(coordination)
    assert len(recs) == 3
    assert all(r.isolated for r in recs)
    mixed = [r for r in recs if r.carrier.gamma == 2]
    assert len(mixed) == 1
    assert np.allclose(mixed[0].profile.simplex[0], [2 / 3, 1 / 3])


def test_degenerate_example_equilibria():
    recs = enumerate_2p(degenerate_example())
    got = {tuple(tuple(np.round(s, 9)) for s in r.profile.simplex): r.isolated for r in recs}
    assert got == {
        ((0.0, 1.0), (1.0, 0.0)): True,  # strict pure
        ((1.0, 0.0), (0.0, 1.0)): False,  # weak pure, end of the continuum
        ((1.0, 0.0), (0.5, 0.5)): False,  # first-order degenerate
    }


def test_dominant_strategy_game():
    row = np.array([[3.0, 0.0], [5.0, 1.0]])
    recs = enumerate_2p(Game.bimatrix(row, row.T))
    assert len(recs) == 1
    assert _pure_records(recs) == {(1, 1)}


@given(seeds(), st.sampled_from([(2, 2), (2, 3), (3, 3), (3, 4)]))
def test_bimatrix_records_are_equilibria(seed, shape):
    g = sample_general(np.random.default_rng(seed), GameSize(shape))
    recs = enumerate_2p(g)
    assert recs, "every finite game has an equilibrium"
    for r in recs:
        assert verify_equilibrium(g, r.profile) <= 1e-8
        assert carrier_of(r.profile) == r.carrier
    assert _pure_records(recs) == pure_equilibria(g)
    assert len(recs) % 2 == 1


@given(seeds())
def test_2x2_mixed_matches_closed_form(seed):
    g = sample_general(np.random.default_rng(seed), GameSize((2, 2)))
    row, col = g.tensor(0), g.tensor(1)
    expect = mixed_2x2(row, col)
    mixed = [r for r in enumerate_2p(g) if r.carrier.gamma == 2]
    if expect is None:
        assert not mixed
    else:
        assert len(mixed) == 1
        assert np.allclose(mixed[0].profile.simplex[0], expect[0], atol=1e-10)
        assert np.allclose(mixed[0].profile.simplex[1], expect[1], atol=1e-10)


@given(seeds(), st.sampled_from([(2, 2), (2, 3), (3, 3)]))
def test_two_enumerators_agree_on_identical_games(seed, shape):
    size = GameSize(shape)
    g = sample_identical(np.random.default_rng(seed), size)
    a = enumerate_2p(g)
    b = enumerate_potential(g.payoffs[0], size)
    assert len(a) == len(b)
    for r, s in zip(a, b):
        assert np.abs(r.profile.flat_reduced() - s.profile.flat_reduced()).max() < 1e-6


def test_three_player_pure_equilibria_found():
    for seed in range(8):
        size = GameSize((2, 2, 2))
        g = sample_identical(np.random.default_rng(seed), size)
        diag = {}
        recs = enumerate_potential(g.payoffs[0], size, seed=seed, diagnostics=diag)
        assert _pure_records(recs) == pure_equilibria(g)
        for r in recs:
            assert verify_equilibrium(g, r.profile) <= 1e-8
        assert diag["complete"] is False


def test_three_player_completely_mixed_equilibrium():
    # u = product of (+/-1) signs has the uniform profile as a critical point
    signs = np.array([1.0, -1.0])
    u = np.einsum("i,j,k->ijk", signs, signs, signs).reshape(-1)
    recs = enumerate_potential(u, GameSize((2, 2, 2)), seed=1)
    interior = [r for r in recs if r.carrier.gamma == 3]
    assert any(np.allclose(r.profile.flat_reduced(), 0.5, atol=1e-8) for r in interior)


def test_verify_equilibrium_reports_gain(coordination):
    x = Profile.pure(coordination.size, (0, 1))
    assert abs(verify_equilibrium(coordination, x) - 2.0) < 1e-12


def test_dedup_merges_close_points():
    size = GameSize((2, 2))
    x = Profile.from_simplex([[0.5, 0.5], [0.5, 0.5]])
    y = Profile.from_simplex([[0.5 + 1e-9, 0.5 - 1e-9], [0.5, 0.5]])
    recs = [EquilibriumRecord(x, carrier_of(x), 0.0), EquilibriumRecord(y, carrier_of(y), 0.0, isolated=False)]
    out = dedup(recs)
    assert len(out) == 1 and out[0].isolated is False


def test_all_carriers_count():
    size = GameSize((2, 3))
    assert len(list(all_carriers(size))) == 3 * 7
    assert len(set(itertools.chain(c.supports for c in all_carriers(size)))) == 21
