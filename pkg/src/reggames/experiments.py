"""Seeded Monte Carlo experiments over random games.

Each sample draws its randomness from
``SeedSequence(master_seed, spawn_key=(index,))``, so a sample's result does
not depend on which worker ran it or in what order. Rows are CSV, aggregates
JSON; both are byte-identical across runs of the same config.

For identical-payoff runs the degenerate 2x2 example is prepended as sample
0 (a canary); it must certify as irregular and is excluded from all rates.
Random samples are numbered 1..samples.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .equilibria import DEDUP_RADIUS, enumerate_2p, enumerate_potential
from .game import CARRIER_TOL, INDIFFERENCE_TOL, Game, GameError, GameSize, carrier_of
from .potential import (
    DETECTION_TOL,
    PotentialDecomposition,
    associated_identical_game,
    decompose,
    degenerate_example,
    sample_exact,
    sample_general,
    sample_identical,
    sample_weighted,
)
from .regularity import GUARD, SINGULAR_TOL, ConsistencyError, certify
from .signs import (
    CapacityError,
    build_bundle,
    full_row_rank,
    is_l_matrix,
    l_pattern,
    random_carrier,
    random_matrix_with_pattern,
    random_subcarrier_profile,
)

Experiment = Literal[
    "oddness", "regularity_rate", "rank_sweep", "lmatrix_sweep", "equivalence_triangle", "potential_roundtrip"
]
GameClass = Literal["identical", "exact", "weighted", "general"]

EXPERIMENTS = ("oddness", "regularity_rate", "rank_sweep", "lmatrix_sweep", "equivalence_triangle", "potential_roundtrip")
GAME_CLASSES = ("identical", "exact", "weighted", "general")
INDETERMINATE_CAP = 0.01
RATE_THRESHOLD = 0.99
PATTERN_DRAWS = 200


@dataclass(frozen=True)
class Tolerances:
    indifference: float = INDIFFERENCE_TOL
    carrier: float = CARRIER_TOL
    singular_rel: float = SINGULAR_TOL
    dedup_radius: float = DEDUP_RADIUS
    detection: float = DETECTION_TOL
    guard: float = GUARD


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    game_class: str = "identical"
    size: GameSize = field(default_factory=lambda: GameSize((2, 2)))
    samples: int = 100
    master_seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_path: str | None = None
    max_players: int = 3
    max_actions: int = 4
    canary: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.game_class not in GAME_CLASSES:
            raise ValueError(f"unknown game class {self.game_class!r}")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must be a 64-bit unsigned integer")
        if self.size.num_players > self.max_players or max(self.size.shape) > self.max_actions:
            raise ValueError(
                f"size {self.size} exceeds the caps N <= {self.max_players}, K_i <= {self.max_actions}"
            )

    @property
    def uses_canary(self) -> bool:
        return (
            self.canary
            and self.game_class == "identical"
            and self.experiment in ("oddness", "regularity_rate", "equivalence_triangle")
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["size"] = str(self.size)
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[dict]
    aggregates: dict
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.aggregates["passed"])

    def write(self, stem: str | os.PathLike) -> tuple[Path, Path]:
        stem = Path(stem)
        if stem.suffix in (".csv", ".json"):
            stem = stem.with_suffix("")
        stem.parent.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        cols = list(COLUMNS[self.config.experiment])
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for row in self.rows:
                w.writerow({c: _cell(row.get(c)) for c in cols})
        with open(json_path, "w") as fh:
            json.dump({"config": self.config.to_dict(), "aggregates": self.aggregates}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


_COMMON = ("sample", "canary", "game_hash", "error")
COLUMNS = {
    "oddness": _COMMON + ("n_equilibria", "all_isolated", "odd", "verdicts", "indeterminate", "min_x_singular"),
    "regularity_rate": _COMMON
    + ("n_equilibria", "n_regular", "all_isolated", "all_regular", "verdicts", "indeterminate", "min_x_singular"),
    "rank_sweep": ("sample", "size", "carrier", "x_carrier", "gamma", "full_rank", "min_singular", "error"),
    "lmatrix_sweep": ("sample", "size", "carrier", "gamma", "l_matrix", "pattern_rank_failures", "error"),
    "equivalence_triangle": _COMMON + ("n_equilibria", "n_agree", "n_band", "n_disagree", "verdicts"),
    "potential_roundtrip": _COMMON
    + ("detected_kind", "potential_error", "weight_ratio_error", "equilibria_match", "verdicts_match"),
}


def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def sample_game(rng: np.random.Generator, game_class: str, size: GameSize) -> tuple[Game, PotentialDecomposition | None]:
    """A random game and its ground-truth decomposition (``None`` for general games)."""
    if game_class == "identical":
        g = sample_identical(rng, size)
        n = size.num_players
        zeros = tuple(np.zeros(size.joint_count // k) for k in size.shape)
        return g, PotentialDecomposition(g.payoffs[0].copy(), np.ones(n), zeros, "identical")
    if game_class == "exact":
        return sample_exact(rng, size)
    if game_class == "weighted":
        return sample_weighted(rng, size)
    return sample_general(rng, size), None


def equilibria_of(game: Game, dec: PotentialDecomposition | None, tol: float, seed: int):
    if game.num_players == 2:
        return enumerate_2p(game, tol)
    if dec is None:
        raise CapacityError("enumeration for general games needs two players")
    return enumerate_potential(dec.potential, game.size, tol, seed=seed)


def _certify_all(game, records, dec, tol: Tolerances):
    return [certify(game, r.profile, tol.indifference, tol.singular_rel, decomposition=dec) for r in records]


def _verdict_counts(certs) -> dict:
    out: dict[str, int] = {}
    for c in certs:
        out[c.verdict] = out.get(c.verdict, 0) + 1
    return dict(sorted(out.items()))


def _game_for(config: ExperimentConfig, index: int, rng):
    if config.uses_canary and index == 0:
        g = degenerate_example()
        return g, decompose(g), True
    g, truth = sample_game(rng, config.game_class, config.size)
    # the pipeline re-detects structure instead of trusting the sampler
    return g, decompose(g, config.tolerances.detection), False


def _run_game_sample(config: ExperimentConfig, index: int) -> dict:
    rng = sample_rng(config.master_seed, index)
    tol = config.tolerances
    game, dec, canary = _game_for(config, index, rng)
    row = {"sample": index, "canary": canary, "game_hash": game.fingerprint()}
    seed = int(rng.integers(2**63))
    try:
        records = equilibria_of(game, dec, tol.indifference, seed)
        certs = _certify_all(game, records, dec, tol)
    except (GameError, ConsistencyError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    n = len(records)
    isolated = all(r.isolated for r in records)
    indeterminate = sum(c.indeterminate for c in certs)
    row.update(
        n_equilibria=n,
        all_isolated=isolated,
        verdicts=_verdict_counts(certs),
        indeterminate=indeterminate,
    )
    finite = [c.x_jacobian_min_singular for c in certs if np.isfinite(c.x_jacobian_min_singular)]
    if config.experiment in ("oddness", "regularity_rate"):
        row["min_x_singular"] = float(min(finite)) if finite else None
    if config.experiment == "oddness":
        row["odd"] = isolated and n % 2 == 1
    elif config.experiment == "regularity_rate":
        n_reg = sum(c.regular for c in certs)
        row.update(n_regular=n_reg, all_regular=isolated and n_reg == n)
    elif config.experiment == "equivalence_triangle":
        agree = band = 0
        for c in certs:
            if c.indeterminate:
                band += 1
                continue
            xs = c.x_jacobian_min_singular < tol.singular_rel
            ds = c.delta_jacobian_min_singular < tol.singular_rel
            agree += xs == ds == (not c.regular)
        row.update(n_agree=agree, n_band=band, n_disagree=n - band - agree)
    return row


def roundtrip_sample(config: ExperimentConfig, index: int) -> dict:
    rng = sample_rng(config.master_seed, index)
    tol = config.tolerances
    cls = config.game_class if config.game_class in ("exact", "weighted") else "weighted"
    game, truth = sample_game(rng, cls, config.size)
    row = {"sample": index, "canary": False, "game_hash": game.fingerprint()}
    dec = decompose(game, tol.detection)
    if dec is None:
        row.update(detected_kind=None, error="potential structure not detected")
        return row
    row["detected_kind"] = dec.kind
    # recovered potentials are in player 1's payoff units, up to a constant
    shift = np.asarray(dec.potential) - truth.weights[0] * truth.potential
    row["potential_error"] = float(np.abs(shift - shift.mean()).max())
    row["weight_ratio_error"] = float(
        np.abs(dec.weights / dec.weights[0] - truth.weights / truth.weights[0]).max()
    )
    ident = associated_identical_game(dec.potential, config.size)
    seed = int(rng.integers(2**63))
    try:
        rec_g = equilibria_of(game, dec, tol.indifference, seed)
        rec_u = equilibria_of(ident, dec, tol.indifference, seed)
        row["equilibria_match"] = match_equilibria(rec_g, rec_u, tol.dedup_radius)
        if row["equilibria_match"]:
            vg = [c.verdict for c in _certify_all(game, rec_g, dec, tol)]
            vu = [c.verdict for c in _certify_all(ident, rec_u, decompose(ident), tol)]
            row["verdicts_match"] = vg == vu
        else:
            row["verdicts_match"] = False
    except (GameError, ConsistencyError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def match_equilibria(a, b, radius: float) -> bool:
    """Same number of records, pairwise within ``radius`` (L-infinity) after sorting."""
    if len(a) != len(b):
        return False
    used = set()
    for r in a:
        x = r.profile.flat_reduced()
        hit = next(
            (j for j, s in enumerate(b) if j not in used and np.abs(s.profile.flat_reduced() - x).max() <= radius),
            None,
        )
        if hit is None:
            return False
        used.add(hit)
    return True


def sweep_sample(config: ExperimentConfig, index: int) -> dict:
    """One random (carrier, x) draw with ``carr(x)`` inside the carrier."""
    rng = sample_rng(config.master_seed, index)
    size = config.size
    carrier = random_carrier(rng, size)
    x = random_subcarrier_profile(rng, carrier, size)
    row = {"sample": index, "size": str(size), "carrier": carrier.to_list(), "gamma": carrier.gamma}
    if config.experiment == "rank_sweep":
        row["x_carrier"] = carrier_of(x).to_list()
        ok, smin = full_row_rank(build_bundle(x, carrier, size).A, config.tolerances.singular_rel)
        row.update(full_rank=ok, min_singular=smin)
        return row
    try:
        L = l_pattern(x, carrier)
        row["l_matrix"] = is_l_matrix(L)
    except CapacityError as exc:
        row["error"] = str(exc)
        return row
    # L => every real matrix with this pattern has full row rank
    fails = 0
    if row["l_matrix"] and L.rows:
        mats = np.stack([random_matrix_with_pattern(rng, L) for _ in range(PATTERN_DRAWS)])
        s = np.linalg.svd(mats, compute_uv=False)
        fails = int(np.sum(s[:, -1] <= config.tolerances.singular_rel * s[:, 0]))
    row["pattern_rank_failures"] = fails
    return row


def run_sample(config: ExperimentConfig, index: int) -> dict:
    if config.experiment in ("rank_sweep", "lmatrix_sweep"):
        return sweep_sample(config, index)
    if config.experiment == "potential_roundtrip":
        return roundtrip_sample(config, index)
    return _run_game_sample(config, index)


def _run_indexed(args) -> dict:
    return run_sample(*args)


def worker_count() -> int:
    env = os.environ.get("REGGAMES_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def aggregate(config: ExperimentConfig, rows: list[dict]) -> dict:
    """Aggregates recomputed from rows alone."""
    exp = config.experiment
    rows_main = [r for r in rows if not r.get("canary")]
    errors = sum(1 for r in rows_main if r.get("error"))
    agg: dict = {"samples": len(rows_main), "errors": errors}
    passed = True
    if exp in ("oddness", "regularity_rate", "equivalence_triangle"):
        ok_rows = [r for r in rows_main if not r.get("error")]
        indet = [r for r in ok_rows if r.get("indeterminate") or r.get("n_band")]
        counted = [r for r in ok_rows if r not in indet]
        agg["indeterminate_samples"] = len(indet)
        agg["indeterminate_rate"] = len(indet) / max(1, len(rows_main))
        agg["suspicious"] = agg["indeterminate_rate"] > INDETERMINATE_CAP
        passed = not agg["suspicious"] and errors == 0
        hist: dict[str, int] = {}
        for r in ok_rows:
            hist[str(r["n_equilibria"])] = hist.get(str(r["n_equilibria"]), 0) + 1
        agg["count_histogram"] = dict(sorted(hist.items(), key=lambda t: int(t[0])))
        if exp == "oddness":
            agg["odd_rate"] = sum(bool(r["odd"]) for r in counted) / max(1, len(counted))
            passed = passed and agg["odd_rate"] >= RATE_THRESHOLD
        elif exp == "regularity_rate":
            agg["regular_rate"] = sum(bool(r["all_regular"]) for r in counted) / max(1, len(counted))
            n_eq = sum(r["n_equilibria"] for r in counted)
            agg["equilibrium_regular_rate"] = sum(r["n_regular"] for r in counted) / max(1, n_eq)
            passed = passed and agg["regular_rate"] >= RATE_THRESHOLD
        else:
            agg["equilibria"] = sum(r["n_equilibria"] for r in ok_rows)
            agg["guard_band"] = sum(r["n_band"] for r in ok_rows)
            agg["disagreements"] = sum(r["n_disagree"] for r in ok_rows)
            passed = passed and agg["disagreements"] == 0
        canary = [r for r in rows if r.get("canary")]
        if canary:
            c = canary[0]
            flagged = not c.get("error") and (
                not c["all_isolated"] or any(v != "regular" for v in c["verdicts"])
            )
            agg["canary_flagged_irregular"] = bool(flagged)
            passed = passed and flagged
    elif exp == "rank_sweep":
        agg["rank_failures"] = sum(1 for r in rows_main if r["gamma"] >= 1 and not r["full_rank"])
        passed = agg["rank_failures"] == 0 and errors == 0
    elif exp == "lmatrix_sweep":
        agg["l_failures"] = sum(1 for r in rows_main if r.get("l_matrix") is False)
        agg["pattern_rank_failures"] = sum(r.get("pattern_rank_failures", 0) for r in rows_main)
        passed = agg["l_failures"] == 0 and agg["pattern_rank_failures"] == 0 and errors == 0
    elif exp == "potential_roundtrip":
        ok = [r for r in rows_main if not r.get("error")]
        agg["max_potential_error"] = max((r["potential_error"] for r in ok), default=0.0)
        agg["max_weight_ratio_error"] = max((r["weight_ratio_error"] for r in ok), default=0.0)
        agg["equilibria_mismatches"] = sum(1 for r in ok if not r["equilibria_match"])
        agg["verdict_mismatches"] = sum(1 for r in ok if not r["verdicts_match"])
        passed = (
            errors == 0
            and agg["max_potential_error"] < 1e-8
            and agg["max_weight_ratio_error"] < 1e-8
            and agg["equilibria_mismatches"] == 0
            and agg["verdict_mismatches"] == 0
        )
    agg["passed"] = bool(passed)
    return agg


def run(config: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    start = time.perf_counter()
    first = 0 if config.uses_canary else 1
    indices = list(range(first, config.samples + 1))
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(indices) < 2 * workers:
        rows = [run_sample(config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(indices) // (4 * workers))
            rows = list(pool.map(_run_indexed, [(config, i) for i in indices], chunksize=chunk))
    report = ExperimentReport(config, rows, aggregate(config, rows), time.perf_counter() - start)
    if config.output_path:
        report.write(config.output_path)
    return report
