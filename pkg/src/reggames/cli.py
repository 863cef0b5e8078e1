"""Command-line entry point: ``reggames <command> ...``.

Exit codes: 0 pass, 1 threshold failure (experiment thresholds, irregular
certificate, pattern not an L-matrix), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .equilibria import enumerate_2p, enumerate_potential
from .experiments import EXPERIMENTS, GAME_CLASSES, ExperimentConfig, run
from .game import INDIFFERENCE_TOL, Game, GameError, GameSize, Profile
from .potential import decompose
from .regularity import certify
from .signs import CapacityError, SignPatternMatrix, l_matrix_witness

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _load_game(path: str) -> Game:
    return Game.from_dict(_read_json(path))


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_analyze(args) -> int:
    game = _load_game(args.game)
    dec = decompose(game, args.tol)
    out = {"size": str(game.size), "fingerprint": game.fingerprint()}
    if dec is None:
        out["kind"] = None
    else:
        out.update(dec.to_dict())
    _emit(out)
    return EXIT_OK


def _enumerate(game: Game, tol: float, seed: int):
    if game.num_players == 2:
        return enumerate_2p(game, tol)
    dec = decompose(game)
    if dec is None:
        raise UsageError("games with three or more players must have potential structure")
    return enumerate_potential(dec.potential, game.size, tol, seed=seed)


def cmd_enumerate(args) -> int:
    game = _load_game(args.game)
    records = _enumerate(game, args.tol, args.seed)
    _emit({"count": len(records), "equilibria": [r.to_dict() for r in records]})
    return EXIT_OK


def cmd_certify(args) -> int:
    game = _load_game(args.game)
    profile = Profile.from_dict(_read_json(args.profile))
    cert = certify(game, profile, args.tol)
    _emit(cert.to_dict())
    return EXIT_OK if cert.regular else EXIT_FAIL


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig(
        experiment=args.name,
        game_class=args.game_class,
        size=GameSize.parse(args.size),
        samples=args.samples,
        master_seed=args.seed,
        output_path=args.out,
        max_players=args.max_players,
        max_actions=args.max_actions,
    )
    report = run(cfg, workers=args.workers)
    _emit(report.aggregates)
    print(f"runtime {report.runtime:.2f}s", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_lmatrix(args) -> int:
    L = SignPatternMatrix.from_json(Path(args.pattern).read_text())
    witness = l_matrix_witness(L)
    out = {"rows": L.rows, "cols": L.cols, "l_matrix": witness is None}
    if witness is not None:
        out["witness_diagonal"] = witness.tolist()
    _emit(out)
    return EXIT_OK if witness is None else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reggames", description="Regularity of equilibria in potential games.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="detect potential structure")
    a.add_argument("game")
    a.add_argument("--tol", type=float, default=1e-8)
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("enumerate", help="list Nash equilibria")
    e.add_argument("game")
    e.add_argument("--tol", type=float, default=INDIFFERENCE_TOL)
    e.add_argument("--seed", type=int, default=0, help="seed for multi-start Newton (N >= 3)")
    e.set_defaults(func=cmd_enumerate)

    c = sub.add_parser("certify", help="regularity certificate for one profile")
    c.add_argument("game")
    c.add_argument("--profile", required=True)
    c.add_argument("--tol", type=float, default=INDIFFERENCE_TOL)
    c.set_defaults(func=cmd_certify)

    x = sub.add_parser("experiment", help="seeded Monte Carlo experiment")
    x.add_argument("name", choices=EXPERIMENTS)
    x.add_argument("--class", dest="game_class", choices=GAME_CLASSES, default="identical")
    x.add_argument("--size", default="2x2")
    x.add_argument("--samples", type=int, default=100)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", default=None, help="output stem; writes <stem>.csv and <stem>.json")
    x.add_argument("--workers", type=int, default=None, help="defaults to REGGAMES_THREADS or cpu count")
    x.add_argument("--max-players", type=int, default=3)
    x.add_argument("--max-actions", type=int, default=4)
    x.set_defaults(func=cmd_experiment)

    m = sub.add_parser("lmatrix-check", help="brute-force L-matrix test of a sign pattern")
    m.add_argument("pattern")
    m.set_defaults(func=cmd_lmatrix)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, GameError, CapacityError, ValueError, KeyError, OSError) as exc:
        print(f"reggames: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
