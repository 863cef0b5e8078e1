"""Potential structure: detection, recovery, associated games and samplers.

A weighted potential game satisfies, for every player ``i`` and unilateral
deviation ``y_i' -> y_i''``,

    v_i(y_i', y_-i) - v_i(y_i'', y_-i) = w_i * (u(y_i', y_-i) - u(y_i'', y_-i))

for one shared ``u`` and positive weights ``w``. Every such game decomposes
as ``v_i = w_i * u + d_i(y_-i)`` with ``d_i`` independent of player ``i``'s
own action. Recovered weights are normalized so that ``w_1 = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linprog

from .game import Game, GameError, GameSize

Kind = Literal["identical", "exact", "weighted"]

DETECTION_TOL = 1e-8
WEIGHT_RANGE = (0.1, 10.0)


@dataclass(frozen=True)
class PotentialDecomposition:
    potential: np.ndarray
    weights: np.ndarray
    dummies: tuple[np.ndarray, ...]
    kind: Kind
    mean_zero: bool = False

    def __post_init__(self):
        if np.any(np.asarray(self.weights) <= 0):
            raise GameError("potential weights must be positive")

    def reconstruct(self, size: GameSize) -> Game:
        u = np.asarray(self.potential, dtype=float).reshape(size.shape)
        rows = []
        for i, (w, d) in enumerate(zip(self.weights, self.dummies)):
            d_full = np.expand_dims(np.asarray(d).reshape(_others_shape(size, i)), axis=i)
            rows.append((w * u + d_full).reshape(-1))
        return Game(size, np.stack(rows))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "potential": np.asarray(self.potential).tolist(),
            "weights": np.asarray(self.weights).tolist(),
            "dummies": [np.asarray(d).reshape(-1).tolist() for d in self.dummies],
            "mean_zero": self.mean_zero,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialDecomposition":
        return cls(
            potential=np.asarray(data["potential"], dtype=float),
            weights=np.asarray(data["weights"], dtype=float),
            dummies=tuple(np.asarray(d, dtype=float) for d in data["dummies"]),
            kind=data["kind"],
            mean_zero=bool(data.get("mean_zero", False)),
        )


def _others_shape(size: GameSize, player: int) -> tuple[int, ...]:
    return tuple(k for j, k in enumerate(size.shape) if j != player)


def _scale(game: Game) -> float:
    return float(np.abs(game.payoffs).max())


def _own_action_dependence(t: np.ndarray, axis: int) -> np.ndarray:
    """``t - t|_{y_axis = first action}``: zero iff ``t`` ignores that axis."""
    return t - np.take(t, [0], axis=axis)


def deviation_residual(game: Game, potential, weights=None) -> float:
    """Largest violation of the weighted deviation identity over all deviations."""
    shape = game.size.shape
    u = np.asarray(potential, dtype=float).reshape(shape)
    weights = np.ones(game.num_players) if weights is None else np.asarray(weights, dtype=float)
    worst = 0.0
    for i in range(game.num_players):
        r = game.tensor(i) - weights[i] * u
        worst = max(worst, float(np.abs(_own_action_dependence(r, i)).max()))
    return worst


def four_cycle_sums(game: Game) -> np.ndarray:
    """Payoff-change sums around every elementary 4-cycle of two players' deviations.

    Exact potential games have all sums zero. Only player pairs ``(i, j)`` and
    action pairs relative to each player's first action are enumerated.
    """
    out = []
    n = game.num_players
    for i in range(n):
        for j in range(i + 1, n):
            vi = np.moveaxis(game.tensor(i), (i, j), (0, 1))
            vj = np.moveaxis(game.tensor(j), (i, j), (0, 1))
            # cycle (0,0) -> (a,0) -> (a,b) -> (0,b) -> (0,0)
            s = (
                (vi[1:, :1] - vi[:1, :1])
                + (vj[1:, 1:] - vj[1:, :1])
                + (vi[:1, 1:] - vi[1:, 1:])
                + (vj[:1, :1] - vj[:1, 1:])
            )
            out.append(s.reshape(-1))
    return np.concatenate(out)


def exact_potential_of(game: Game, tol: float = DETECTION_TOL) -> np.ndarray | None:
    """Recover an exact potential anchored at ``u(first joint action) = 0``.

    The potential is path-summed along unilateral deviations taken player by
    player from the anchor; the result is accepted only if every player's
    payoff minus the potential is independent of that player's own action.
    """
    shape = game.size.shape
    n = game.num_players
    u = np.zeros(shape)
    for i in range(n):
        # v_i(y_1..y_i, 0, ..., 0) - v_i(y_1..y_{i-1}, 0, 0, ..., 0)
        v = game.tensor(i)[tuple([slice(None)] * (i + 1) + [slice(0, 1)] * (n - i - 1))]
        u = u + _own_action_dependence(v, i)
    resid = deviation_residual(game, u)
    if resid > tol * _scale(game):
        return None
    return u.reshape(-1)


def _nullspace(M: np.ndarray, tol: float) -> np.ndarray:
    _, s, vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return vt[rank:].T


def weighted_potential_of(game: Game, tol: float = DETECTION_TOL) -> PotentialDecomposition | None:
    """Find ``(u, w)`` with ``w > 0`` solving the deviation identity, if any.

    Unknowns are ``u`` and ``lam_i = 1 / w_i``; the homogeneous system
    ``lam_i * dv_i = du`` (plus the anchor ``u[0] = 0``) is solved by SVD and
    its nullspace searched for a vector with all ``lam_i`` positive.
    """
    size = game.size
    shape, n, K = size.shape, game.num_players, size.joint_count
    scale = _scale(game)
    if scale == 0.0:
        return PotentialDecomposition(
            np.zeros(K), np.ones(n), tuple(np.zeros(K // k) for k in shape), "exact"
        )
    idx = np.arange(K).reshape(shape)
    rows = []
    for i in range(n):
        base = np.take(idx, [0], axis=i)
        dv = _own_action_dependence(game.tensor(i), i) / scale
        y = np.moveaxis(idx, i, 0)[1:].reshape(-1)
        y0 = np.broadcast_to(np.moveaxis(base, i, 0), np.moveaxis(idx, i, 0).shape)[1:].reshape(-1)
        d = np.moveaxis(dv, i, 0)[1:].reshape(-1)
        block = np.zeros((y.size, K + n))
        r = np.arange(y.size)
        block[r, y] -= 1.0
        block[r, y0] += 1.0
        block[r, K + i] = d
        rows.append(block)
    anchor = np.zeros((1, K + n))
    anchor[0, 0] = 1.0
    M = np.vstack(rows + [anchor])
    N = _nullspace(M, tol)
    if N.shape[1] == 0:
        return None
    lam_part = N[K:]
    if N.shape[1] == 1:
        z = N[:, 0] * np.sign(lam_part[0, 0] if lam_part[0, 0] != 0 else lam_part[:, 0].sum())
    else:
        # least-total positive representative: min sum(lam) s.t. lam >= 1
        res = linprog(
            c=lam_part.sum(axis=0),
            A_ub=-lam_part,
            b_ub=-np.ones(n),
            bounds=[(None, None)] * N.shape[1],
            method="highs",
        )
        if res.status != 0:
            return None
        z = N @ res.x
    lam = z[K:]
    if np.any(lam <= tol * np.abs(lam).max()):
        return None
    # dv columns were divided by scale; rescale u to player 1's payoff units
    u = z[:K] * scale / lam[0]
    weights = lam[0] / lam
    if deviation_residual(game, u, weights) > tol * scale:
        return None
    return PotentialDecomposition(
        potential=u, weights=weights, dummies=_dummies(game, u, weights), kind="weighted"
    )


def _dummies(game: Game, u, weights) -> tuple[np.ndarray, ...]:
    shape = game.size.shape
    u = np.asarray(u).reshape(shape)
    out = []
    for i in range(game.num_players):
        r = game.tensor(i) - weights[i] * u
        out.append(np.take(r, 0, axis=i).reshape(-1))
    return tuple(out)


def decompose(game: Game, tol: float = DETECTION_TOL) -> PotentialDecomposition | None:
    """Most specific potential class containing ``game`` (identical > exact > weighted)."""
    n = game.num_players
    if game.is_identical(tol * _scale(game)):
        u = game.payoffs[0].copy()
        return PotentialDecomposition(u, np.ones(n), _dummies(game, u, np.ones(n)), "identical")
    u = exact_potential_of(game, tol)
    if u is not None:
        return PotentialDecomposition(u, np.ones(n), _dummies(game, u, np.ones(n)), "exact")
    return weighted_potential_of(game, tol)


def associated_identical_game(potential, size: GameSize) -> Game:
    """The game in which every player's payoff is the potential."""
    u = np.asarray(potential, dtype=float).reshape(-1)
    if u.size != size.joint_count:
        raise GameError(f"potential has {u.size} entries, expected {size.joint_count}")
    return Game.identical(u, size)


def normalize_mean_zero(potential) -> np.ndarray:
    u = np.asarray(potential, dtype=float)
    return u - u.mean()


# ---------------------------------------------------------------------------
# Samplers


def sample_identical(rng: np.random.Generator, size: GameSize) -> Game:
    return Game.identical(rng.standard_normal(size.joint_count), size)


def sample_weighted(
    rng: np.random.Generator, size: GameSize, weights=None
) -> tuple[Game, PotentialDecomposition]:
    """``v_i = w_i * u + d_i(y_-i)``; ``w_i`` log-uniform on [0.1, 10] unless given.

    Draw order is potential, weights (only when not supplied), dummies, so
    supplying unit weights reproduces :func:`sample_exact` on the same stream.
    """
    u = rng.standard_normal(size.joint_count)
    if weights is None:
        lo, hi = np.log(WEIGHT_RANGE[0]), np.log(WEIGHT_RANGE[1])
        weights = np.exp(rng.uniform(lo, hi, size.num_players))
    weights = np.asarray(weights, dtype=float)
    dummies = tuple(rng.standard_normal(size.joint_count // k) for k in size.shape)
    kind: Kind = "exact" if np.all(weights == 1.0) else "weighted"
    dec = PotentialDecomposition(u, weights, dummies, kind)
    return dec.reconstruct(size), dec


def sample_exact(rng: np.random.Generator, size: GameSize) -> tuple[Game, PotentialDecomposition]:
    return sample_weighted(rng, size, weights=np.ones(size.num_players))


def sample_general(rng: np.random.Generator, size: GameSize) -> Game:
    return Game(size, rng.standard_normal((size.num_players, size.joint_count)))


def degenerate_example() -> Game:
    """2x2 identical-payoff game ``[[0, 0], [1, -1]]`` with a first-order degenerate equilibrium.

    The row player indexes rows. Equilibria: strict pure ``(a2, a1)``, weak
    pure ``(a1, a2)`` and ``(a1, (1/2, 1/2))``, the last two joined by a
    continuum ``(a1, q)`` with ``q(a1)`` in ``[0, 1/2]``.
    """
    return Game.bimatrix([[0.0, 0.0], [1.0, -1.0]])
