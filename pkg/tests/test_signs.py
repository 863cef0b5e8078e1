import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds, sizes
from reggames.game import Carrier, GameError, GameSize, Profile, carrier_of, restricted_gradient
from reggames.signs import (
    CapacityError,
    CarrierOrdering,
    SignPatternMatrix,
    build_bundle,
    full_row_rank,
    is_l_matrix,
    l_matrix_witness,
    l_pattern,
    q_eval,
    random_carrier,
    random_matrix_with_pattern,
    random_subcarrier_profile,
    verify_l_property,
)


def full_carrier(size):
    return Carrier(tuple(tuple(range(k)) for k in size.shape))


def test_sign_pattern_validation_and_json():
    L = SignPatternMatrix(np.array([[1, 0, -1]]))
    assert (L.rows, L.cols) == (1, 3)
    assert SignPatternMatrix.from_json(L.to_json()).entries.tolist() == [[1, 0, -1]]
    with pytest.raises(GameError):
        SignPatternMatrix(np.array([[2]]))
    assert SignPatternMatrix.of([[0.3, -2.0]]).entries.tolist() == [[1, -1]]


def test_q_function():
    size = GameSize((3, 2))
    order = CarrierOrdering(size, full_carrier(size))
    tau = next(t for t in range(6) if order.actions[0][order.alpha[t, 0]] == 2)
    assert q_eval(order, tau, 0, [0.25, 0.25]) == 0.25
    assert q_eval(order, tau, 0, 2) == 1.0
    assert q_eval(order, tau, 0, 1) == 0.0
    with pytest.raises(GameError):
        q_eval(order, 6, 0, 0)


@given(sizes(), seeds())
def test_q_sums_to_one_over_own_actions(size, seed):
    rng = np.random.default_rng(seed)
    order = CarrierOrdering(size, random_carrier(rng, size))
    x = Profile.from_simplex([rng.dirichlet(np.ones(k)) for k in size.shape])
    for i, k in enumerate(size.shape):
        # columns that differ only in player i's action cover all of Y_i once
        fixed = order.alpha[0].copy()
        cols = [t for t in range(size.joint_count) if all(order.alpha[t, j] == fixed[j] for j in range(size.num_players) if j != i)]
        assert len(cols) == k
        assert abs(sum(order.q(t, i, x.reduced[i]) for t in cols) - 1.0) < 1e-12


def test_ordering_is_a_permutation_with_carrier_block_first():
    size = GameSize((3, 3, 2))
    C = Carrier(((0, 2), (1,), (0, 1)))
    order = CarrierOrdering(size, C)
    assert sorted(order.joint.tolist()) == list(range(18))
    assert order.k_tilde == 4
    for t in range(order.k_tilde):
        stored = [order.actions[i][order.alpha[t, i]] for i in range(3)]
        assert all(a in C.supports[i] for i, a in enumerate(stored))


@given(sizes(), seeds())
def test_index_maps_inverse(size, seed):
    order = CarrierOrdering(size, random_carrier(np.random.default_rng(seed), size))
    for s, (i, k) in enumerate(zip(order.i_star, order.k_star)):
        assert order.s_star[(int(i), int(k))] == s
    assert len(order.i_star) == order.carrier.gamma


def test_full_2x2_bundle_r_columns():
    size = GameSize((2, 2))
    x = Profile.from_simplex([[0.3, 0.7], [0.6, 0.4]])
    b = build_bundle(x, full_carrier(size), size)
    assert b.k_tilde == 4 and b.A.shape == (2, 4)
    # alpha rows (0,0),(0,1),(1,0),(1,1): r^i is -1 when alpha^i is the reference
    assert b.R1.tolist() == [[-1, -1, 1, 1], [-1, 1, -1, 1]]
    assert np.all(b.P1 > 0)


@given(sizes(), seeds())
def test_bundle_structure(size, seed):
    rng = np.random.default_rng(seed)
    C = random_carrier(rng, size)
    x = random_subcarrier_profile(rng, C, size)
    b = build_bundle(x, C, size)
    assert np.array_equal(b.A, b.R * b.P)
    o = b.ordering
    for s, (i, k) in enumerate(zip(o.i_star, o.k_star)):
        for t in range(b.k_tilde):
            a = o.alpha[t, i]
            assert b.R1[s, t] == (-1 if a == 0 else (1 if a == k else 0))
    # columns with every action in carr(x) have positive P entries
    xc = carrier_of(x)
    for t in range(b.k_tilde):
        if all(o.actions[i][o.alpha[t, i]] in xc.supports[i] for i in range(size.num_players)):
            assert np.all(b.P1[:, t] > 0)


@given(sizes(), seeds())
def test_gradient_equals_a_times_u(size, seed):
    rng = np.random.default_rng(seed)
    C = random_carrier(rng, size)
    x = random_subcarrier_profile(rng, C, size)
    u = rng.standard_normal(size.joint_count)
    b = build_bundle(x, C, size)
    F = []
    for i in C.mixing_players:
        ref = C.supports[i][0]
        grad = restricted_gradient(u, x, i, ref)
        others = [a for a in range(size.shape[i]) if a != ref]
        F += [grad[others.index(a)] for a in C.supports[i][1:]]
    if F:
        assert np.abs(b.apply(u) - np.array(F)).max() < 1e-12


def test_bundle_rejects_outside_carrier():
    size = GameSize((2, 2))
    x = Profile.from_simplex([[0.5, 0.5], [1.0, 0.0]])
    with pytest.raises(GameError):
        build_bundle(x, Carrier(((0,), (0,))), size)


def test_rank_examples():
    size = GameSize((2, 2))
    x = Profile.from_simplex([[0.5, 0.5], [1.0, 0.0]])
    C = Carrier(((0, 1), (0,)))
    ok, smin = full_row_rank(build_bundle(x, C, size).A)
    assert ok and smin > 0
    assert full_row_rank(np.zeros((2, 3))) == (False, 0.0)


@given(sizes(), seeds())
def test_rank_and_l_property_on_subcarriers(size, seed):
    rng = np.random.default_rng(seed)
    C = random_carrier(rng, size)
    if C.gamma == 0:
        return
    x = random_subcarrier_profile(rng, C, size)
    assert full_row_rank(build_bundle(x, C, size).A)[0]
    assert verify_l_property(x, C)


def test_l_matrix_examples():
    assert is_l_matrix([[1]])
    assert not is_l_matrix([[0]])
    assert is_l_matrix(np.eye(2, dtype=int))
    assert l_matrix_witness(np.ones((2, 2), dtype=int)).tolist() == [1, -1]
    with pytest.raises(CapacityError):
        is_l_matrix(np.ones((13, 13), dtype=int))


def _brute_l(L):
    """Direct reading of the definition: all 3^m - 1 sign matrices, column by column."""
    import itertools

    m, n = L.shape
    for d in itertools.product((-1, 0, 1), repeat=m):
        if not any(d):
            continue
        DL = np.array(d)[:, None] * L
        good = False
        for c in range(n):
            col = DL[:, c]
            if np.any(col != 0) and (np.all(col >= 0) or np.all(col <= 0)):
                good = True
                break
        if not good:
            return False
    return True


@given(st.integers(1, 4), st.integers(1, 5), seeds())
def test_l_matrix_matches_definition(m, n, seed):
    L = np.random.default_rng(seed).integers(-1, 2, (m, n))
    assert is_l_matrix(L) == _brute_l(L)


@given(st.integers(1, 4), st.integers(1, 6), seeds())
def test_l_matrix_implies_full_rank(m, n, seed):
    rng = np.random.default_rng(seed)
    L = rng.integers(-1, 2, (m, n))
    if is_l_matrix(L):
        for _ in range(20):
            assert full_row_rank(random_matrix_with_pattern(rng, L))[0]


def test_l_pattern_full_2x2_interior():
    size = GameSize((2, 2))
    x = Profile.from_simplex([[0.4, 0.6], [0.7, 0.3]])
    assert verify_l_property(x, full_carrier(size))
    # sub-carrier x
    y = Profile.from_simplex([[1.0, 0.0], [0.7, 0.3]])
    assert verify_l_property(y, full_carrier(size))
    assert l_pattern(x, full_carrier(size)).rows == 2


def test_bundle_json():
    size = GameSize((2, 3))
    x = Profile.from_simplex([[0.4, 0.6], [0.2, 0.3, 0.5]])
    d = json.loads(json.dumps(build_bundle(x, full_carrier(size), size).to_dict()))
    assert d["k_tilde"] == 6 and len(d["A"]) == 3
