"""Finite normal-form games, mixed strategies and multilinear calculus.

Joint pure strategies are stored row-major with the last player varying
fastest, so a flat payoff array of length ``K`` reshapes (C order) to a tensor
of shape ``(K_1, ..., K_N)``.

Mixed strategies live canonically in the reduced space ``X_i`` (the weights
of actions ``2..K_i``); the weight of the first action is implied. ``T`` maps
reduced coordinates to simplex weights and back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

CARRIER_TOL = 1e-9
INDIFFERENCE_TOL = 1e-8
_SIMPLEX_TOL = 1e-9


class GameError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GameSize:
    actions_per_player: tuple[int, ...]

    def __post_init__(self):
        acts = tuple(int(k) for k in self.actions_per_player)
        object.__setattr__(self, "actions_per_player", acts)
        if len(acts) < 2:
            raise GameError("a game needs at least 2 players")
        if any(k < 2 for k in acts):
            raise GameError("every player needs at least 2 actions")

    @classmethod
    def parse(cls, text: str) -> "GameSize":
        """Parse ``"2x3"`` / ``"2x2x2"``."""
        try:
            return cls(tuple(int(t) for t in text.lower().split("x")))
        except ValueError as exc:
            raise GameError(f"bad size {text!r}") from exc

    @property
    def num_players(self) -> int:
        return len(self.actions_per_player)

    @property
    def joint_count(self) -> int:
        return prod(self.actions_per_player)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.actions_per_player

    def __str__(self) -> str:
        return "x".join(map(str, self.actions_per_player))


@dataclass(frozen=True)
class Game:
    """Payoffs ``u_i(y)`` as an ``(N, K)`` array in the row-major joint order."""

    size: GameSize
    payoffs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.payoffs, dtype=float)
        n, k = self.size.num_players, self.size.joint_count
        if p.shape != (n, k):
            raise GameError(f"payoffs must have shape {(n, k)}, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise GameError("payoffs must be finite")
        object.__setattr__(self, "payoffs", _frozen(p))

    @classmethod
    def from_tensors(cls, tensors: Sequence[np.ndarray]) -> "Game":
        arrs = [np.asarray(t, dtype=float) for t in tensors]
        size = GameSize(arrs[0].shape)
        if len(arrs) != size.num_players:
            raise GameError("need one payoff tensor per player")
        return cls(size, np.stack([a.reshape(-1) for a in arrs]))

    @classmethod
    def identical(cls, potential, size: GameSize) -> "Game":
        u = np.asarray(potential, dtype=float).reshape(-1)
        return cls(size, np.tile(u, (size.num_players, 1)))

    @classmethod
    def bimatrix(cls, row, col=None) -> "Game":
        """Two-player game; ``col`` defaults to ``row`` (identical payoffs)."""
        row = np.asarray(row, dtype=float)
        col = row if col is None else np.asarray(col, dtype=float)
        return cls.from_tensors([row, col])

    @property
    def num_players(self) -> int:
        return self.size.num_players

    def tensor(self, player: int) -> np.ndarray:
        return self.payoffs[player].reshape(self.size.shape)

    def is_identical(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.payoffs - self.payoffs[0]) <= tol))

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.payoffs).tobytes()).hexdigest()[:16]

    # JSON ------------------------------------------------------------------
    def to_dict(self) -> dict:
        if self.is_identical():
            return {
                "players": self.num_players,
                "actions": list(self.size.shape),
                "payoffs": self.payoffs[0].tolist(),
                "shared": True,
            }
        return {
            "players": self.num_players,
            "actions": list(self.size.shape),
            "payoffs": self.payoffs.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Game":
        size = GameSize(tuple(data["actions"]))
        if "players" in data and int(data["players"]) != size.num_players:
            raise GameError("'players' disagrees with 'actions'")
        payoffs = np.asarray(data["payoffs"], dtype=float)
        if data.get("shared", False):
            if payoffs.ndim == 2 and payoffs.shape[0] == 1:
                payoffs = payoffs[0]
            return cls.identical(payoffs, size)
        return cls(size, payoffs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Game":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Strategy spaces


def to_simplex(x, num_actions: int | None = None) -> np.ndarray:
    """``T_i``: reduced coordinates -> simplex weights."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if num_actions is not None and x.size != num_actions - 1:
        raise GameError(f"expected {num_actions - 1} reduced coordinates, got {x.size}")
    check_reduced(x)
    return np.concatenate([[1.0 - x.sum()], x])


def to_reduced(sigma, num_actions: int | None = None) -> np.ndarray:
    """``T_i^{-1}``: drop the first simplex weight."""
    sigma = simplex_strategy(sigma)
    if num_actions is not None and sigma.size != num_actions:
        raise GameError(f"expected {num_actions} weights, got {sigma.size}")
    return sigma[1:].copy()


def simplex_strategy(weights, tol: float = _SIMPLEX_TOL) -> np.ndarray:
    """Validate simplex weights, clamping tiny negatives and renormalizing."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size < 1 or not np.all(np.isfinite(w)):
        raise GameError("strategy weights must be finite")
    if np.any(w < -tol):
        raise GameError(f"negative strategy weight {w.min():g}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if abs(total - 1.0) > max(tol, 1e-12) * w.size:
        raise GameError(f"strategy weights sum to {total!r}, not 1")
    return w / total


def check_reduced(x, tol: float = _SIMPLEX_TOL) -> None:
    if not np.all(np.isfinite(x)):
        raise GameError("reduced coordinates must be finite")
    if np.any(x < -tol) or np.any(x > 1 + tol) or x.sum() > 1 + tol:
        raise GameError(f"point {x} is outside the reduced strategy space")


@dataclass(frozen=True)
class Profile:
    """Joint mixed strategy, stored as reduced coordinates per player."""

    reduced: tuple[np.ndarray, ...]
    _simplex: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = []
        sig = []
        for x in self.reduced:
            x = np.asarray(x, dtype=float).reshape(-1)
            s = simplex_strategy(np.concatenate([[1.0 - x.sum()], x]))
            xs.append(_frozen(s[1:]))
            sig.append(_frozen(s))
        object.__setattr__(self, "reduced", tuple(xs))
        object.__setattr__(self, "_simplex", tuple(sig))

    @classmethod
    def from_simplex(cls, sigmas: Iterable) -> "Profile":
        return cls(tuple(simplex_strategy(s)[1:] for s in sigmas))

    @classmethod
    def pure(cls, size: GameSize, actions: Sequence[int]) -> "Profile":
        if len(actions) != size.num_players:
            raise GameError("need one action per player")
        sig = []
        for k, a in zip(size.shape, actions):
            if not 0 <= a < k:
                raise GameError(f"action {a} out of range 0..{k - 1}")
            s = np.zeros(k)
            s[a] = 1.0
            sig.append(s)
        return cls.from_simplex(sig)

    @classmethod
    def uniform(cls, size: GameSize) -> "Profile":
        return cls.from_simplex([np.full(k, 1.0 / k) for k in size.shape])

    @property
    def simplex(self) -> tuple[np.ndarray, ...]:
        return self._simplex

    @property
    def num_players(self) -> int:
        return len(self.reduced)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(s.size for s in self._simplex)

    def flat_reduced(self) -> np.ndarray:
        return np.concatenate(self.reduced)

    def replace(self, player: int, sigma) -> "Profile":
        sig = list(self._simplex)
        sig[player] = np.asarray(sigma, dtype=float)
        return Profile.from_simplex(sig)

    def check_size(self, size: GameSize) -> None:
        if self.shape != size.shape:
            raise GameError(f"profile shape {self.shape} does not match game {size.shape}")

    def to_dict(self) -> dict:
        return {
            "simplex": [s.tolist() for s in self._simplex],
            "reduced": [x.tolist() for x in self.reduced],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Profile":
        if "simplex" in data:
            return cls.from_simplex(data["simplex"])
        if "reduced" in data:
            return cls(tuple(np.asarray(x, dtype=float) for x in data["reduced"]))
        raise GameError("profile JSON needs 'simplex' or 'reduced'")


@dataclass(frozen=True)
class Carrier:
    """Per-player supports ``C_i`` (sorted action indices)."""

    supports: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sup = tuple(tuple(sorted(set(int(a) for a in s))) for s in self.supports)
        if any(len(s) == 0 for s in sup):
            raise GameError("vanishing strategy: every carrier set must be nonempty")
        object.__setattr__(self, "supports", sup)

    @property
    def gamma_i(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.supports)

    @property
    def gamma(self) -> int:
        return sum(g - 1 for g in self.gamma_i)

    @property
    def n_tilde(self) -> int:
        return sum(1 for g in self.gamma_i if g >= 2)

    @property
    def mixing_players(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.gamma_i) if g >= 2)

    def contains(self, other: "Carrier") -> bool:
        return all(set(b) <= set(a) for a, b in zip(self.supports, other.supports))

    def check_size(self, size: GameSize) -> None:
        if len(self.supports) != size.num_players:
            raise GameError("carrier has the wrong number of players")
        for s, k in zip(self.supports, size.shape):
            if s[0] < 0 or s[-1] >= k:
                raise GameError(f"carrier action out of range in {s}")

    def to_list(self) -> list[list[int]]:
        return [list(s) for s in self.supports]


def carrier_of(x: Profile, tol: float = CARRIER_TOL) -> Carrier:
    """Actions whose simplex weight exceeds ``tol``."""
    sup = []
    for s in x.simplex:
        idx = tuple(int(a) for a in np.flatnonzero(s > tol))
        if not idx:
            raise GameError("vanishing strategy: no action weight above tolerance")
        sup.append(idx)
    return Carrier(tuple(sup))


def default_reference_actions(x: Profile, carrier: Carrier | None = None) -> tuple[int, ...]:
    """Max-weight carrier action per player, lowest index on ties."""
    carrier = carrier or carrier_of(x)
    refs = []
    for s, sup in zip(x.simplex, carrier.supports):
        sup = list(sup)
        refs.append(sup[int(np.argmax(s[sup]))])
    return tuple(refs)


def reordered_actions(num_actions: int, ref: int) -> list[int]:
    """Actions ``[ref, others ascending]``: the order placing ``ref`` first."""
    if not 0 <= ref < num_actions:
        raise GameError(f"reference action {ref} out of range")
    return [ref] + [a for a in range(num_actions) if a != ref]


# ---------------------------------------------------------------------------
# Multilinear evaluation


def contract(tensor: np.ndarray, sigmas: Sequence[np.ndarray], keep: Sequence[int] = ()) -> np.ndarray:
    """Contract ``tensor`` against ``sigmas`` on every axis not in ``keep``.

    The result has the kept axes in ascending order.
    """
    t = tensor
    for ax in range(tensor.ndim - 1, -1, -1):
        if ax in keep:
            continue
        t = np.tensordot(t, sigmas[ax], axes=([ax], [0]))
    return t


def _potential_tensor(potential, shape: tuple[int, ...]) -> np.ndarray:
    u = np.asarray(potential, dtype=float)
    if u.size != prod(shape):
        raise GameError(f"potential has {u.size} entries, expected {prod(shape)}")
    return u.reshape(shape)


def _check_player(player: int, n: int) -> None:
    if not 0 <= player < n:
        raise GameError(f"player index {player} out of range")


def expected_utility(game: Game, profile: Profile, player: int) -> float:
    _check_player(player, game.num_players)
    profile.check_size(game.size)
    return float(contract(game.tensor(player), profile.simplex))


def unilateral_values(game: Game, player: int, others: Profile) -> np.ndarray:
    """``U_i(y_i, sigma_{-i})`` for every pure action ``y_i``."""
    _check_player(player, game.num_players)
    others.check_size(game.size)
    return contract(game.tensor(player), others.simplex, keep=(player,))


def unilateral_value(game: Game, player: int, action: int, others: Profile) -> float:
    vals = unilateral_values(game, player, others)
    if not 0 <= action < vals.size:
        raise GameError(f"action index {action} out of range")
    return float(vals[action])


def best_response_pure_set(
    game: Game, player: int, others: Profile, tol: float = INDIFFERENCE_TOL
) -> tuple[frozenset[int], float]:
    vals = unilateral_values(game, player, others)
    best = float(vals.max())
    return frozenset(int(a) for a in np.flatnonzero(vals >= best - tol)), best


def restricted_gradient(potential, x: Profile, player: int, ref_action: int) -> np.ndarray:
    """``dU/dx_i^k = U(y^{k+1}, x_{-i}) - U(y^1, x_{-i})`` with ``ref_action`` as ``y^1``."""
    shape = x.shape
    _check_player(player, len(shape))
    order = reordered_actions(shape[player], ref_action)
    vals = contract(_potential_tensor(potential, shape), x.simplex, keep=(player,))
    return vals[order[1:]] - vals[ref_action]


def restricted_hessian(
    potential, x: Profile, carrier: Carrier, refs: Sequence[int] | None = None
) -> np.ndarray:
    """Hessian of the multilinear extension over the free coordinates of ``carrier``.

    Free coordinates of a mixing player are its carrier actions other than the
    reference, ascending. Diagonal blocks vanish identically.
    """
    shape = x.shape
    if carrier.n_tilde == 0:
        raise GameError("empty Hessian: carrier is pure")
    if refs is None:
        refs = default_reference_actions(x, carrier)
    u = _potential_tensor(potential, shape)
    mixers = carrier.mixing_players
    free = {i: [a for a in carrier.supports[i] if a != refs[i]] for i in mixers}
    offsets, pos = {}, 0
    for i in mixers:
        offsets[i] = pos
        pos += len(free[i])
    H = np.zeros((pos, pos))
    for a, i in enumerate(mixers):
        for j in mixers[a + 1 :]:
            M = contract(u, x.simplex, keep=(i, j))
            ri, rj = refs[i], refs[j]
            fi, fj = free[i], free[j]
            block = M[np.ix_(fi, fj)] - M[fi, rj][:, None] - M[ri, fj][None, :] + M[ri, rj]
            H[offsets[i] : offsets[i] + len(fi), offsets[j] : offsets[j] + len(fj)] = block
            H[offsets[j] : offsets[j] + len(fj), offsets[i] : offsets[i] + len(fi)] = block.T
    return H
