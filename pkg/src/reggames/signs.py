"""Sign structure of the equilibrium equations on a fixed carrier.

For a carrier ``C`` every player's actions are viewed in carrier-first order
(carrier actions ascending, then the rest ascending); the first action in
that order is the player's reference. Joint strategies are viewed in an order
whose first ``K~ = prod(gamma_i)`` entries enumerate all carrier
combinations. Neither reordering touches the game's storage; both are index
tables.

With ``q_i^tau(x_i)`` the weight ``x_i`` puts on player ``i``'s action in
joint strategy ``tau``, the gradient components of the potential on the
carrier are

    F_i^k(x, u) = sum_tau u^tau (q_i^tau(y_i^{k+1}) - q_i^tau(y_i^1)) prod_{j != i} q_j^tau(x_j)
                = (A(x) u)_s,      A = R o P  (Hadamard),

with one row ``s`` per mixing player ``i`` and free index ``k``.

Indexing here is 0-based for rows ``s``, columns ``tau`` and players; ``k``
runs over ``1..gamma_i - 1`` as in ``x_i^k``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .game import Carrier, GameError, GameSize, Profile, carrier_of, to_simplex

L_MATRIX_MAX_ROWS = 12
RANK_TOL = 1e-8
_CHUNK = 1 << 15


class CapacityError(GameError):
    """Input exceeds the brute-force bound."""


@dataclass(frozen=True)
class SignPatternMatrix:
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2:
            raise GameError("sign pattern must be a 2-d array")
        if not np.all(np.isin(e, (-1, 0, 1))):
            raise GameError("sign pattern entries must be -1, 0 or 1")
        e = e.astype(np.int8)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def of(cls, M) -> "SignPatternMatrix":
        return cls(np.sign(np.asarray(M, dtype=float)).astype(np.int8))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def to_json(self) -> str:
        return json.dumps(self.entries.tolist())

    @classmethod
    def from_json(cls, text: str) -> "SignPatternMatrix":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["pattern"]
        return cls(np.asarray(data, dtype=int).reshape(len(data), -1) if data else np.zeros((0, 0)))


# ---------------------------------------------------------------------------
# Orderings and the A(x) matrix


@dataclass(frozen=True)
class CarrierOrdering:
    """Carrier-first views of each ``Y_i`` and of ``Y``."""

    size: GameSize
    carrier: Carrier

    def __post_init__(self):
        self.carrier.check_size(self.size)

    @cached_property
    def actions(self) -> tuple[tuple[int, ...], ...]:
        """``actions[i][a]`` is the stored index of player ``i``'s ``a``-th action in carrier-first order."""
        out = []
        for sup, k in zip(self.carrier.supports, self.size.shape):
            out.append(tuple(sup) + tuple(a for a in range(k) if a not in sup))
        return tuple(out)

    @property
    def k_tilde(self) -> int:
        return int(np.prod(self.carrier.gamma_i))

    @cached_property
    def alpha(self) -> np.ndarray:
        """``(K, N)`` positions (carrier-first) of each player's action in column ``tau``."""
        shape = self.size.shape
        gam = self.carrier.gamma_i
        inner = list(itertools.product(*[range(g) for g in gam]))
        seen = set(inner)
        outer = [a for a in itertools.product(*[range(k) for k in shape]) if a not in seen]
        return np.array(inner + outer, dtype=int).reshape(-1, len(shape))

    @cached_property
    def joint(self) -> np.ndarray:
        """Stored flat joint index of column ``tau``."""
        stored = np.array(
            [[self.actions[i][a] for i, a in enumerate(row)] for row in self.alpha], dtype=int
        ).reshape(-1, self.size.num_players)
        return np.ravel_multi_index(tuple(stored.T), self.size.shape)

    @cached_property
    def s_star(self) -> dict[tuple[int, int], int]:
        table, s = {}, 0
        for i in self.carrier.mixing_players:
            for k in range(1, self.carrier.gamma_i[i]):
                table[(i, k)] = s
                s += 1
        return table

    @cached_property
    def i_star(self) -> np.ndarray:
        return np.array([i for (i, _), _s in sorted(self.s_star.items(), key=lambda t: t[1])], dtype=int)

    @cached_property
    def k_star(self) -> np.ndarray:
        return np.array([k for (_, k), _s in sorted(self.s_star.items(), key=lambda t: t[1])], dtype=int)

    def q(self, tau: int, player: int, x_i) -> float:
        """``q_i^tau``: weight on the action player ``i`` plays in column ``tau``.

        ``x_i`` is either a reduced strategy (stored action order) or an int
        naming a stored pure action, in which case the result is 1 or 0.
        """
        K = self.size.joint_count
        if not 0 <= tau < K:
            raise GameError(f"column {tau} out of range 0..{K - 1}")
        if not 0 <= player < self.size.num_players:
            raise GameError(f"player {player} out of range")
        played = self.actions[player][self.alpha[tau, player]]
        if isinstance(x_i, (int, np.integer)):
            if not 0 <= x_i < self.size.shape[player]:
                raise GameError(f"action {x_i} out of range")
            return float(played == x_i)
        sigma = to_simplex(x_i, self.size.shape[player])
        return float(sigma[played])


def q_eval(ordering: CarrierOrdering, tau: int, player: int, x_i) -> float:
    return ordering.q(tau, player, x_i)


@dataclass(frozen=True)
class CarrierMatrixBundle:
    A: np.ndarray
    R: np.ndarray
    P: np.ndarray
    ordering: CarrierOrdering

    @property
    def carrier(self) -> Carrier:
        return self.ordering.carrier

    @property
    def k_tilde(self) -> int:
        return self.ordering.k_tilde

    @property
    def alpha(self) -> np.ndarray:
        return self.ordering.alpha[: self.k_tilde]

    @property
    def A1(self) -> np.ndarray:
        return self.A[:, : self.k_tilde]

    @property
    def R1(self) -> np.ndarray:
        return self.R[:, : self.k_tilde]

    @property
    def P1(self) -> np.ndarray:
        return self.P[:, : self.k_tilde]

    def apply(self, u) -> np.ndarray:
        """``A(x) u`` with ``u`` in stored joint order."""
        return self.A @ np.asarray(u, dtype=float).reshape(-1)[self.ordering.joint]

    def to_dict(self) -> dict:
        o = self.ordering
        return {
            "carrier": self.carrier.to_list(),
            "k_tilde": self.k_tilde,
            "joint_order": o.joint.tolist(),
            "alpha": o.alpha.tolist(),
            "i_star": o.i_star.tolist(),
            "k_star": o.k_star.tolist(),
            "A": self.A.tolist(),
            "R": self.R.tolist(),
            "P": self.P.tolist(),
        }


def build_bundle(x: Profile, carrier: Carrier, size: GameSize) -> CarrierMatrixBundle:
    """``A(x) = R o P(x)`` for the fixed carrier ``carrier``; requires ``carr(x)`` inside it."""
    x.check_size(size)
    order = CarrierOrdering(size, carrier)
    if not carrier.contains(carrier_of(x)):
        raise GameError("carrier inconsistency: carr(x) is not contained in the given carrier")
    sig = x.simplex
    # weights in carrier-first order, then per column tau
    q_cols = np.stack(
        [sig[i][list(order.actions[i])][order.alpha[:, i]] for i in range(size.num_players)]
    )  # (N, K)
    rows = len(order.i_star)
    K = size.joint_count
    R = np.zeros((rows, K))
    P = np.zeros((rows, K))
    for s, (i, k) in enumerate(zip(order.i_star, order.k_star)):
        a = order.alpha[:, i]
        R[s] = (a == k).astype(float) - (a == 0).astype(float)
        P[s] = np.prod(np.delete(q_cols, i, axis=0), axis=0)
    return CarrierMatrixBundle(R * P, R, P, order)


def full_row_rank(A, tol_rel: float = RANK_TOL) -> tuple[bool, float]:
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if m == 0:
        return True, float("inf")
    s = np.linalg.svd(A, compute_uv=False)
    if m > n:
        return False, 0.0
    smin = float(s[-1])
    return bool(s[0] > 0 and smin > tol_rel * s[0]), smin


# ---------------------------------------------------------------------------
# L-matrices


def _sign_vectors(m: int) -> np.ndarray:
    """Nonzero vectors over ``(-1, 0, 1)`` whose first nonzero entry is +1, in lexicographic order."""
    D = np.array(list(itertools.product((-1, 0, 1), repeat=m)), dtype=np.int8).reshape(-1, m)
    nz = D != 0
    has = nz.any(axis=1)
    first = D[np.arange(len(D)), np.argmax(nz, axis=1)]
    return D[has & (first == 1)]


def l_matrix_witness(L) -> np.ndarray | None:
    """Lexicographically smallest diagonal of a sign matrix ``D`` violating the L-matrix test.

    The test: for every nonzero ``D``, some column of ``D L`` is nonzero with
    all its nonzero entries of one sign. ``D`` and ``-D`` are interchangeable,
    so only ``D`` with first nonzero entry +1 are scanned. ``None`` means ``L``
    is an L-matrix.
    """
    L = L.entries if isinstance(L, SignPatternMatrix) else SignPatternMatrix(np.asarray(L)).entries
    m, n = L.shape
    if m > L_MATRIX_MAX_ROWS:
        raise CapacityError(f"{m} rows exceeds the brute-force bound of {L_MATRIX_MAX_ROWS}")
    if m == 0:
        return None
    if n == 0:
        return np.eye(1, m, dtype=np.int8)[0]
    Lp = (L > 0).astype(np.int32)
    Ln = (L < 0).astype(np.int32)
    D = _sign_vectors(m)
    for start in range(0, len(D), _CHUNK):
        d = D[start : start + _CHUNK]
        dp = (d > 0).astype(np.int32)
        dn = (d < 0).astype(np.int32)
        pos = dp @ Lp + dn @ Ln
        neg = dp @ Ln + dn @ Lp
        ok = ((pos > 0) != (neg > 0)).any(axis=1)
        if not ok.all():
            return d[int(np.argmin(ok))].copy()
    return None


def is_l_matrix(L) -> bool:
    return l_matrix_witness(L) is None


def l_pattern(x: Profile, carrier: Carrier) -> SignPatternMatrix:
    """``R_1 o sgn(P_1(x))``."""
    b = build_bundle(x, carrier, GameSize(x.shape))
    return SignPatternMatrix((b.R1 * np.sign(b.P1)).astype(np.int8))


def verify_l_property(x: Profile, carrier: Carrier) -> bool:
    if carrier.gamma > L_MATRIX_MAX_ROWS:
        raise CapacityError(f"gamma = {carrier.gamma} exceeds the brute-force bound")
    return is_l_matrix(l_pattern(x, carrier))


def random_matrix_with_pattern(rng: np.random.Generator, L) -> np.ndarray:
    """Real matrix with sign pattern ``L`` and log-normal magnitudes."""
    L = L.entries if isinstance(L, SignPatternMatrix) else np.asarray(L)
    return L * np.exp(rng.standard_normal(L.shape))


def random_subcarrier_profile(rng: np.random.Generator, carrier: Carrier, size: GameSize) -> Profile:
    """Random ``x`` with ``carr(x)`` a nonempty random subset of ``carrier``."""
    sig = []
    for sup, k in zip(carrier.supports, size.shape):
        sup = np.array(sup)
        keep = sup[rng.random(sup.size) < 0.75]
        if keep.size == 0:
            keep = rng.choice(sup, 1)
        s = np.zeros(k)
        s[keep] = rng.dirichlet(np.ones(keep.size))
        s[keep] = np.maximum(s[keep], 1e-6)
        sig.append(s / s.sum())
    return Profile.from_simplex(sig)


def random_carrier(rng: np.random.Generator, size: GameSize) -> Carrier:
    sup = []
    for k in size.shape:
        mask = rng.random(k) < 0.6
        if not mask.any():
            mask[rng.integers(k)] = True
        sup.append(tuple(np.flatnonzero(mask)))
    return Carrier(tuple(sup))
