"""Regularity certificates for Nash equilibria.

An equilibrium is regular when the Jacobian of

    Ft_i^k(x) = T_i^1(x_i) * x_i^k * [U_i(y_i^{k+1}, x_-i) - U_i(y_i^1, x_-i)]

is nonsingular, with each player's reference action ``y_i^1`` taken from the
carrier. Three routes are computed and cross-checked:

* the Jacobian in reduced coordinates (``jacobian_x``);
* the Jacobian in simplex coordinates with the normalization rows
  ``sum(sigma_i) - 1`` appended (``jacobian_delta``);
* for potential games, first-order (gradient) and second-order (restricted
  Hessian) non-degeneracy of the potential.

Singularity is judged relative to the largest singular value. Values within
a factor ``GUARD`` of a threshold make the certificate *indeterminate*
instead of raising on a disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .equilibria import verify_equilibrium
from .game import (
    CARRIER_TOL,
    INDIFFERENCE_TOL,
    Carrier,
    Game,
    GameError,
    Profile,
    best_response_pure_set,
    carrier_of,
    contract,
    default_reference_actions,
    reordered_actions,
    restricted_gradient,
    restricted_hessian,
)
from .potential import PotentialDecomposition, associated_identical_game, decompose

SINGULAR_TOL = 1e-8
GUARD = 10.0

Verdict = Literal["regular", "first_order_degenerate", "second_order_degenerate", "not_equilibrium"]


class ConsistencyError(RuntimeError):
    """Two characterizations of regularity disagreed outside the guard band."""


def _player_tensors(u, shape: tuple[int, ...]) -> list[np.ndarray]:
    """Per-player payoff tensors from a Game, an (N, K) array or a shared potential."""
    if isinstance(u, Game):
        return [u.tensor(i) for i in range(u.num_players)]
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 1 or arr.shape == shape:
        t = arr.reshape(shape)
        return [t] * len(shape)
    return [row.reshape(shape) for row in arr]


def _check_refs(x: Profile, refs: Sequence[int]) -> None:
    for i, (s, r) in enumerate(zip(x.simplex, refs)):
        if not 0 <= r < s.size:
            raise GameError(f"reference action {r} out of range for player {i}")
        if s[r] <= CARRIER_TOL:
            raise GameError(f"reference action {r} of player {i} is outside the carrier")


def _refs(x: Profile, refs) -> tuple[int, ...]:
    refs = default_reference_actions(x) if refs is None else tuple(refs)
    _check_refs(x, refs)
    return refs


def f_tilde_x(x: Profile, u, refs: Sequence[int] | None = None) -> np.ndarray:
    """The regularity map, ordered by player then reordered action."""
    refs = _refs(x, refs)
    tensors = _player_tensors(u, x.shape)
    out = []
    for i, s in enumerate(x.simplex):
        order = reordered_actions(s.size, refs[i])
        vals = contract(tensors[i], x.simplex, keep=(i,))
        others = order[1:]
        out.append(s[refs[i]] * s[others] * (vals[others] - vals[refs[i]]))
    return np.concatenate(out)


def jacobian_delta(x: Profile, u, refs: Sequence[int] | None = None) -> np.ndarray:
    """Jacobian over simplex weights of the augmented map.

    Rows per player: the normalization row, then ``Ft_i^1..Ft_i^{K_i-1}``.
    Columns per player: the reference action's weight, then the other actions
    ascending.
    """
    refs = _refs(x, refs)
    sig = x.simplex
    tensors = _player_tensors(u, x.shape)
    orders = [reordered_actions(s.size, r) for s, r in zip(sig, refs)]
    offs = np.cumsum([0] + [s.size for s in sig])
    n = offs[-1]
    Jd = np.zeros((n, n))
    for i, s in enumerate(sig):
        oi, ri, o0 = orders[i], refs[i], offs[i]
        Jd[o0, o0 : offs[i + 1]] = 1.0
        vals = contract(tensors[i], sig, keep=(i,))
        for k, a in enumerate(oi[1:], start=1):
            D = vals[a] - vals[ri]
            row = o0 + k
            Jd[row, o0] = s[a] * D
            Jd[row, o0 + k] = s[ri] * D
        for j in range(len(sig)):
            if j == i:
                continue
            M = contract(tensors[i], sig, keep=tuple(sorted((i, j))))
            if j < i:
                M = M.T
            oj = orders[j]
            # d Ft_i^k / d sigma_j(b) = s_ref * s_a * (M[a, b] - M[ref, b])
            diff = M[oi[1:]][:, oj] - M[ri][oj][None, :]
            Jd[o0 + 1 : offs[i + 1], offs[j] : offs[j + 1]] = (s[ri] * s[oi[1:]])[:, None] * diff
    return Jd


def jacobian_x(x: Profile, u, refs: Sequence[int] | None = None) -> np.ndarray:
    """Jacobian of :func:`f_tilde_x` in reordered reduced coordinates.

    A reduced coordinate moves weight from the reference action to another
    action, so each column is a simplex column minus the reference column.
    """
    refs = _refs(x, refs)
    Jd = jacobian_delta(x, u, refs)
    sizes = x.shape
    offs = np.cumsum([0] + list(sizes))
    rows = np.concatenate([np.arange(offs[i] + 1, offs[i + 1]) for i in range(len(sizes))])
    cols = []
    for j in range(len(sizes)):
        for l in range(1, sizes[j]):
            cols.append(Jd[rows, offs[j] + l] - Jd[rows, offs[j]])
    return np.column_stack(cols)


def relative_min_singular(M: np.ndarray) -> float:
    """``sigma_min / sigma_max``; 0 for the zero matrix, ``inf`` for an empty one."""
    if M.size == 0:
        return float("inf")
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


# ---------------------------------------------------------------------------
# Degeneracy conditions on a potential


def _grad_tol(u, tol: float) -> float:
    return tol * max(1.0, float(np.max(np.abs(np.asarray(u, dtype=float)))))


def excluded_gradients(u, x: Profile, refs=None, carrier: Carrier | None = None) -> list[tuple[int, int, float]]:
    """``(player, action, dU/dx)`` for every action outside the carrier."""
    carrier = carrier or carrier_of(x)
    refs = default_reference_actions(x, carrier) if refs is None else refs
    out = []
    for i, k in enumerate(x.shape):
        grad = restricted_gradient(u, x, i, refs[i])
        for a, g in zip(reordered_actions(k, refs[i])[1:], grad):
            if a not in carrier.supports[i]:
                out.append((i, a, float(g)))
    return out


def first_order_check(
    u, x: Profile, tol: float = INDIFFERENCE_TOL, refs=None
) -> tuple[bool, list[tuple[int, int, float]]]:
    """``(degenerate, witnesses)``.

    Degenerate iff some action outside the carrier has a vanishing potential
    gradient. The quasi-strong form (pure best responses equal the carrier)
    is evaluated as well; a disagreement outside the guard band raises
    :class:`ConsistencyError`.
    """
    carrier = carrier_of(x)
    atol = _grad_tol(u, tol)
    grads = excluded_gradients(u, x, refs, carrier)
    witnesses = [w for w in grads if abs(w[2]) <= atol]
    game = associated_identical_game(u, _size_of(x))
    quasi_strong = all(
        best_response_pure_set(game, i, x, atol)[0] == set(carrier.supports[i]) for i in range(x.num_players)
    )
    degenerate = bool(witnesses)
    if degenerate == quasi_strong and not any(atol / GUARD < abs(g) <= atol * GUARD for *_, g in grads):
        raise ConsistencyError("gradient test and best-response test disagree")
    return degenerate, witnesses


def _size_of(x: Profile):
    from .game import GameSize

    return GameSize(x.shape)


def extended_carrier(u, x: Profile, tol: float = INDIFFERENCE_TOL, refs=None) -> Carrier:
    carrier = carrier_of(x)
    atol = _grad_tol(u, tol)
    sup = [set(s) for s in carrier.supports]
    for i, a, g in excluded_gradients(u, x, refs, carrier):
        if abs(g) <= atol:
            sup[i].add(a)
    return Carrier(tuple(tuple(s) for s in sup))


def second_order_check(u, x: Profile, tol_rel: float = SINGULAR_TOL, refs=None) -> tuple[bool, float]:
    """``(degenerate, relative min singular value)`` of the Hessian on the carrier face.

    A pure carrier is vacuously non-degenerate and reports ``inf``.
    """
    carrier = carrier_of(x)
    if carrier.n_tilde == 0:
        return False, float("inf")
    H = restricted_hessian(u, x, carrier, refs)
    rel = relative_min_singular(H)
    return rel < tol_rel, rel


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class RegularityCertificate:
    verdict: Verdict
    carrier: Carrier
    extended_carrier: Carrier
    gradient_witnesses: tuple[tuple[int, int, float], ...]
    hessian_min_singular: float
    x_jacobian_min_singular: float
    delta_jacobian_min_singular: float
    reference_actions: tuple[int, ...]
    max_regret: float
    potential_kind: str | None = None
    indeterminate: bool = False
    tolerances: dict = field(default_factory=dict)

    @property
    def regular(self) -> bool:
        return self.verdict == "regular"

    def to_dict(self) -> dict:
        def num(v):
            return v if np.isfinite(v) else str(v)

        return {
            "verdict": self.verdict,
            "indeterminate": self.indeterminate,
            "carrier": self.carrier.to_list(),
            "extended_carrier": self.extended_carrier.to_list(),
            "witnesses": [list(w) for w in self.gradient_witnesses],
            "hessian_min_singular": num(self.hessian_min_singular),
            "x_jacobian_min_singular": num(self.x_jacobian_min_singular),
            "delta_jacobian_min_singular": num(self.delta_jacobian_min_singular),
            "reference_actions": list(self.reference_actions),
            "max_regret": self.max_regret,
            "potential_kind": self.potential_kind,
            "tolerances": self.tolerances,
        }


def _in_band(value: float, threshold: float) -> bool:
    return threshold / GUARD <= value < threshold * GUARD


def certify(
    game: Game,
    x: Profile,
    tol: float = INDIFFERENCE_TOL,
    singular_tol: float = SINGULAR_TOL,
    refs: Sequence[int] | None = None,
    decomposition: PotentialDecomposition | None | Literal["auto"] = "auto",
) -> RegularityCertificate:
    """Certify ``x`` as regular or classify how it fails.

    Potential games are judged by first/second-order non-degeneracy of the
    recovered potential; the two Jacobians (on the game's own payoffs) must
    agree with that verdict. Other games are judged by the reduced-space
    Jacobian alone.
    """
    x.check_size(game.size)
    tolerances = {"indifference": tol, "singular_rel": singular_tol, "guard": GUARD, "carrier": CARRIER_TOL}
    regret = verify_equilibrium(game, x)
    carrier = carrier_of(x)
    atol = tol * max(1.0, float(np.abs(game.payoffs).max()))
    if regret > atol:
        return RegularityCertificate(
            "not_equilibrium", carrier, carrier, (), float("nan"), float("nan"), float("nan"),
            tuple(default_reference_actions(x, carrier)), regret, None, False, tolerances,
        )
    refs = _refs(x, refs)
    dec = decompose(game) if decomposition == "auto" else decomposition

    jx = relative_min_singular(jacobian_x(x, game, refs))
    jd = relative_min_singular(jacobian_delta(x, game, refs))
    x_singular, d_singular = jx < singular_tol, jd < singular_tol
    band = _in_band(jx, singular_tol) or _in_band(jd, singular_tol)

    if dec is not None:
        u = dec.potential
        fo_degenerate, witnesses = first_order_check(u, x, tol, refs)
        so_degenerate, hs = second_order_check(u, x, singular_tol, refs)
        ext = extended_carrier(u, x, tol, refs)
        grad_band = any(
            _grad_tol(u, tol) / GUARD < abs(g) <= _grad_tol(u, tol) * GUARD
            for *_, g in excluded_gradients(u, x, refs, carrier)
        )
        band = band or grad_band or (np.isfinite(hs) and _in_band(hs, singular_tol))
        irregular = fo_degenerate or so_degenerate
        if not band and not (x_singular == d_singular == irregular):
            raise ConsistencyError(
                f"regularity tests disagree: x-jacobian {jx:.3g}, delta-jacobian {jd:.3g}, "
                f"first-order {fo_degenerate}, hessian {hs:.3g}"
            )
        if fo_degenerate:
            verdict: Verdict = "first_order_degenerate"
        elif so_degenerate:
            verdict = "second_order_degenerate"
        else:
            verdict = "regular"
        kind = dec.kind
    else:
        # general game: the Jacobian decides; quasi-strong failure is reported as first order
        hs = float("nan")
        witnesses = []
        sup = [set(s) for s in carrier.supports]
        for i in range(game.num_players):
            br, _ = best_response_pure_set(game, i, x, atol)
            for a in sorted(br - set(carrier.supports[i])):
                vals = contract(game.tensor(i), x.simplex, keep=(i,))
                witnesses.append((i, a, float(vals[a] - vals[refs[i]])))
                sup[i].add(a)
        ext = Carrier(tuple(tuple(s) for s in sup))
        if not band and x_singular != d_singular:
            raise ConsistencyError(f"x-jacobian {jx:.3g} and delta-jacobian {jd:.3g} disagree")
        if not x_singular:
            verdict = "regular"
        elif witnesses:
            verdict = "first_order_degenerate"
        else:
            verdict = "second_order_degenerate"
        kind = None
    return RegularityCertificate(
        verdict, carrier, ext, tuple(witnesses), hs, jx, jd, refs, regret, kind, bool(band), tolerances
    )


def is_regular_game(game: Game, records, tol: float = INDIFFERENCE_TOL) -> bool:
    """All listed equilibria regular and isolated."""
    return all(r.isolated and certify(game, r.profile, tol).regular for r in records)
