"""Nash equilibrium enumeration for small games.

Two routes:

* :func:`enumerate_2p` -- support enumeration for bimatrix games. Each
  support pair yields two independent polytopes (one per player's mixture);
  a side whose indifference system is rank deficient is a continuum, whose
  extreme points are extracted by LP and flagged non-isolated.
* :func:`enumerate_potential` -- solves the critical-point system of the
  potential restricted to every carrier face, then keeps points that pass
  the best-response test. Exact for two players; best effort for three or
  more (damped Newton from random starts).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .game import (
    INDIFFERENCE_TOL,
    Carrier,
    Game,
    GameError,
    GameSize,
    Profile,
    carrier_of,
    contract,
)

DEDUP_RADIUS = 1e-6
NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-10
_NEWTON_ESCAPE = 10.0
_NEWTON_STALL = 8


@dataclass(frozen=True)
class EquilibriumRecord:
    profile: Profile
    carrier: Carrier
    max_regret: float
    isolated: bool = True

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "carrier": self.carrier.to_list(),
            "max_regret": self.max_regret,
            "isolated": self.isolated,
        }


def _abs_tol(game: Game, tol: float) -> float:
    return tol * max(1.0, float(np.abs(game.payoffs).max()))


def verify_equilibrium(game: Game, x: Profile, tol: float = INDIFFERENCE_TOL) -> float:
    """Largest gain from a unilateral pure deviation.

    A player's own pure action (when playing pure) is not a deviation, so a
    strict pure equilibrium has negative regret. ``x`` is an equilibrium iff
    the result is ``<= tol``.
    """
    x.check_size(game.size)
    sig = x.simplex
    worst = -np.inf
    for i in range(game.num_players):
        vals = contract(game.tensor(i), sig, keep=(i,))
        current = float(vals @ sig[i])
        dev = vals[sig[i] < 1.0]
        if dev.size:
            worst = max(worst, float(dev.max()) - current)
    return worst


def _sort_key(rec: EquilibriumRecord) -> tuple:
    return tuple(np.round(rec.profile.flat_reduced(), 9))


def dedup(
    records: Sequence[EquilibriumRecord],
    radius: float = DEDUP_RADIUS,
    game: Game | None = None,
) -> list[EquilibriumRecord]:
    """Merge records within ``radius`` (L-inf, reduced space) of a cluster seed.

    Each cluster is replaced by its centroid; when ``game`` is given the
    centroid's regret is recomputed. A cluster is isolated only if every
    member was.
    """
    if radius <= 0:
        raise GameError("dedup radius must be positive")
    clusters: list[list[EquilibriumRecord]] = []
    seeds: list[np.ndarray] = []
    for rec in records:
        z = rec.profile.flat_reduced()
        for seed, members in zip(seeds, clusters):
            if np.max(np.abs(seed - z), initial=0.0) <= radius:
                members.append(rec)
                break
        else:
            seeds.append(z)
            clusters.append([rec])
    out = []
    for members in clusters:
        if len(members) == 1:
            out.append(members[0])
            continue
        sig = [
            np.mean([m.profile.simplex[i] for m in members], axis=0)
            for i in range(members[0].profile.num_players)
        ]
        prof = Profile.from_simplex(sig)
        regret = verify_equilibrium(game, prof) if game is not None else max(m.max_regret for m in members)
        out.append(
            EquilibriumRecord(prof, carrier_of(prof), regret, all(m.isolated for m in members))
        )
    out.sort(key=_sort_key)
    return out


# ---------------------------------------------------------------------------
# Two-player support enumeration


def _subsets(n: int):
    for r in range(1, n + 1):
        yield from itertools.combinations(range(n), r)


def _side_points(M: np.ndarray, own: tuple, opp: tuple, tol: float) -> tuple[list[np.ndarray], bool]:
    """Opponent mixtures on ``opp`` making the owner of ``M`` indifferent over ``own``.

    ``M[a, b]`` is the owner's payoff for own action ``a`` against opponent
    action ``b``. Returns candidate mixtures (full length) and whether the
    solution is unique.
    """
    n_own, n_opp = M.shape
    own_l, opp_l = list(own), list(opp)
    rest = [a for a in range(n_own) if a not in own]
    m = len(opp_l)
    E = np.zeros((len(own_l) + 1, m + 1))
    E[: len(own_l), :m] = M[np.ix_(own_l, opp_l)]
    E[: len(own_l), m] = -1.0
    E[-1, :m] = 1.0
    rhs = np.zeros(len(own_l) + 1)
    rhs[-1] = 1.0
    rank = np.linalg.matrix_rank(E)

    def full(q):
        out = np.zeros(n_opp)
        out[opp_l] = q
        return out

    if rank == m + 1:
        sol, *_ = np.linalg.lstsq(E, rhs, rcond=None)
        q, v = sol[:m], sol[m]
        if np.max(np.abs(E @ sol - rhs)) > tol or np.any(q < -tol):
            return [], True
        if rest and np.any(M[np.ix_(rest, opp_l)] @ q > v + tol):
            return [], True
        q = np.clip(q, 0.0, None)
        return [full(q / q.sum())], True

    # continuum: polytope of mixtures; report its coordinate-extreme vertices
    A_ub = np.hstack([M[np.ix_(rest, opp_l)], -np.ones((len(rest), 1))]) if rest else None
    b_ub = np.zeros(len(rest)) if rest else None
    bounds = [(0, None)] * m + [(None, None)]
    kw = dict(A_ub=A_ub, b_ub=b_ub, A_eq=E, b_eq=rhs, bounds=bounds, method="highs")
    first = linprog(np.zeros(m + 1), **kw)
    if first.status != 0:
        return [], False
    points = []
    for j in range(m):
        for sgn in (1.0, -1.0):
            c = np.zeros(m + 1)
            c[j] = sgn
            res = linprog(c, **kw)
            if res.status == 0:
                q = np.clip(res.x[:m], 0.0, None)
                q = full(q / q.sum())
                if not any(np.max(np.abs(q - p)) < 1e-12 for p in points):
                    points.append(q)
    return points, False


def enumerate_2p(game: Game, tol: float = INDIFFERENCE_TOL) -> list[EquilibriumRecord]:
    """All equilibria of a two-player game, with continua reduced to extreme points."""
    if game.num_players != 2:
        raise GameError("enumerate_2p needs a two-player game")
    A, B = game.tensor(0), game.tensor(1)
    atol = _abs_tol(game, tol)
    m, n = A.shape
    cache: dict = {}

    def side(which, own, opp):
        key = (which, own, opp)
        if key not in cache:
            M = A if which == 0 else B.T
            cache[key] = _side_points(M, own, opp, atol)
        return cache[key]

    found = []
    for I in _subsets(m):
        for J in _subsets(n):
            # the side with fewer unknowns is cheap and usually infeasible
            order = [(0, I, J), (1, J, I)]
            if len(I) < len(J):
                order.reverse()
            sides = {}
            for which, own, opp in order:
                sides[which] = side(which, own, opp)
                if not sides[which][0]:
                    break
            else:
                qs, q_unique = sides[0]  # column mixtures from row indifference
                ps, p_unique = sides[1]
                for p in ps:
                    for q in qs:
                        prof = Profile.from_simplex([p, q])
                        regret = verify_equilibrium(game, prof)
                        if regret <= atol:
                            found.append(
                                EquilibriumRecord(prof, carrier_of(prof), regret, p_unique and q_unique)
                            )
    return dedup(found, DEDUP_RADIUS, game)


# ---------------------------------------------------------------------------
# Critical points of the potential on carrier faces


def _face_system(u: np.ndarray, carrier: Carrier, refs, sigmas):
    """Gradient components over the free carrier coordinates and their Jacobian."""
    mixers = carrier.mixing_players
    free = {i: [a for a in carrier.supports[i] if a != refs[i]] for i in mixers}
    F = []
    for i in mixers:
        vals = contract(u, sigmas, keep=(i,))
        F.append(vals[free[i]] - vals[refs[i]])
    F = np.concatenate(F)
    J = np.zeros((F.size, F.size))
    off = np.cumsum([0] + [len(free[i]) for i in mixers])
    for a, i in enumerate(mixers):
        for b in range(a + 1, len(mixers)):
            j = mixers[b]
            Mij = contract(u, sigmas, keep=(i, j))
            fi, fj, ri, rj = free[i], free[j], refs[i], refs[j]
            blk = Mij[np.ix_(fi, fj)] - Mij[fi, rj][:, None] - Mij[ri, fj][None, :] + Mij[ri, rj]
            J[off[a] : off[a + 1], off[b] : off[b + 1]] = blk
            J[off[b] : off[b + 1], off[a] : off[a + 1]] = blk.T
    return F, J


def _sigmas_from_free(z, shape, carrier: Carrier, refs) -> list[np.ndarray]:
    sig, pos = [], 0
    for i, k in enumerate(shape):
        s = np.zeros(k)
        free = [a for a in carrier.supports[i] if a != refs[i]]
        s[free] = z[pos : pos + len(free)]
        s[refs[i]] = 1.0 - s[free].sum()
        pos += len(free)
        sig.append(s)
    return sig


def _newton(u, carrier, refs, shape, z0) -> np.ndarray | None:
    """Damped Newton on the face system; ``None`` on stall, escape or no convergence."""
    z = z0.copy()
    F, J = _face_system(u, carrier, refs, _sigmas_from_free(z, shape, carrier, refs))
    history = []
    for _ in range(NEWTON_MAX_ITER):
        norm = np.max(np.abs(F))
        if norm < NEWTON_TOL:
            return z
        history.append(norm)
        if len(history) > _NEWTON_STALL and norm > 0.5 * history[-_NEWTON_STALL - 1]:
            return None
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        t = 1.0
        while True:
            zt = z + t * step
            Ft, Jt = _face_system(u, carrier, refs, _sigmas_from_free(zt, shape, carrier, refs))
            if np.max(np.abs(Ft)) < (1 - 1e-4 * t) * norm:
                break
            t *= 0.5
            if t < 1e-3:
                return None
        z, F, J = zt, Ft, Jt
        if np.max(np.abs(z)) > _NEWTON_ESCAPE:
            return None
    return z if np.max(np.abs(F)) < NEWTON_TOL else None


def _face_lp_points(F0, J, carrier: Carrier, br, atol):
    """Coordinate-extreme points of ``{z : F0 + J z = 0, z on the face}``.

    ``br`` optionally adds affine best-response constraints ``G z <= -g0``.
    """
    gamma = F0.size
    rows, rhs = [], []
    pos = 0
    for i in carrier.mixing_players:
        n_free = len(carrier.supports[i]) - 1
        r = np.zeros(gamma)
        r[pos : pos + n_free] = 1.0
        rows.append(r)
        rhs.append(1.0)
        pos += n_free
    A_ub, b_ub = np.array(rows), np.array(rhs)
    if br is not None and br[0].size:
        g0, G = br
        A_ub = np.vstack([A_ub, G])
        b_ub = np.concatenate([b_ub, -g0])
    kw = dict(A_ub=A_ub, b_ub=b_ub, A_eq=J, b_eq=-F0, bounds=[(0, None)] * gamma, method="highs")
    if linprog(np.zeros(gamma), **kw).status != 0:
        return []
    pts: list[np.ndarray] = []
    for k in range(gamma):
        for sgn in (1.0, -1.0):
            c = np.zeros(gamma)
            c[k] = sgn
            res = linprog(c, **kw)
            if res.status == 0 and np.max(np.abs(F0 + J @ res.x), initial=0.0) <= atol:
                if not any(np.max(np.abs(res.x - p)) < 1e-12 for p in pts):
                    pts.append(res.x)
    return pts


def _linear_br_constraints(u, carrier: Carrier, refs, shape):
    """Gains of non-carrier actions over the reference, as ``g0 + G z`` (two players)."""
    gamma = carrier.gamma

    def gains(z):
        sig = _sigmas_from_free(z, shape, carrier, refs)
        out = []
        for i in range(len(shape)):
            vals = contract(u, sig, keep=(i,))
            outside = [a for a in range(shape[i]) if a not in carrier.supports[i]]
            out.append(vals[outside] - vals[refs[i]])
        return np.concatenate(out)

    g0 = gains(np.zeros(gamma))
    G = np.column_stack([gains(e) - g0 for e in np.eye(gamma)]) if gamma else np.zeros((g0.size, 0))
    return g0, G


def all_carriers(size: GameSize):
    """Every carrier in lexicographic order."""
    for sup in itertools.product(*(list(_subsets(k)) for k in size.shape)):
        yield Carrier(sup)


def enumerate_potential(
    potential,
    size: GameSize,
    tol: float = INDIFFERENCE_TOL,
    starts: int | None = None,
    seed: int = 0,
    diagnostics: dict | None = None,
) -> list[EquilibriumRecord]:
    """Equilibria of the identical-payoff game with payoff ``potential``.

    Faces with at most two mixing players give an affine system solved
    directly (rank deficiency flags a continuum); larger faces use damped
    Newton from ``starts`` random interior points (default ``20 * gamma``).
    Critical points failing the best-response test are counted in
    ``diagnostics['filtered']``.
    """
    u = np.asarray(potential, dtype=float).reshape(size.shape)
    game = Game.identical(u.reshape(-1), size)
    atol = _abs_tol(game, tol)
    rng = np.random.default_rng(seed)
    stats = {"filtered": 0, "newton_failures": 0, "faces": 0, "complete": size.num_players == 2}
    found = []
    for carrier in all_carriers(size):
        stats["faces"] += 1
        refs = tuple(s[0] for s in carrier.supports)
        gamma = carrier.gamma
        candidates: list[tuple[np.ndarray, bool]] = []
        if gamma == 0:
            candidates.append((np.zeros(0), True))
        elif len(carrier.mixing_players) <= 2:
            F0, J = _face_system(u, carrier, refs, _sigmas_from_free(np.zeros(gamma), size.shape, carrier, refs))
            s = np.linalg.svd(J, compute_uv=False)
            if s[-1] > 1e-10 * max(s[0], 1e-300):
                z = np.linalg.solve(J, -F0)
                candidates.append((z, True))
            else:
                cons = _linear_br_constraints(u, carrier, refs, size.shape) if size.num_players == 2 else None
                candidates.extend((z, False) for z in _face_lp_points(F0, J, carrier, cons, atol))
        else:
            n_starts = starts if starts is not None else 20 * gamma
            for _ in range(n_starts):
                z0 = np.concatenate(
                    [rng.dirichlet(np.ones(len(carrier.supports[i])))[1:] for i in carrier.mixing_players]
                )
                z = _newton(u, carrier, refs, size.shape, z0)
                if z is None:
                    stats["newton_failures"] += 1
                    continue
                _, J = _face_system(u, carrier, refs, _sigmas_from_free(z, size.shape, carrier, refs))
                s = np.linalg.svd(J, compute_uv=False)
                candidates.append((z, bool(s[-1] > 1e-10 * max(s[0], 1e-300))))
        for z, isolated in candidates:
            sig = _sigmas_from_free(z, size.shape, carrier, refs)
            if any(np.any(s < -tol) for s in sig):
                stats["filtered"] += 1
                continue
            prof = Profile.from_simplex([np.clip(s, 0.0, None) / np.clip(s, 0.0, None).sum() for s in sig])
            regret = verify_equilibrium(game, prof)
            if regret > atol:
                stats["filtered"] += 1
                continue
            found.append(EquilibriumRecord(prof, carrier_of(prof), regret, isolated))
    if diagnostics is not None:
        diagnostics.update(stats)
    return dedup(found, DEDUP_RADIUS, game)
