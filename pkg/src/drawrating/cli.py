"""Command-line pipelines: rate, predict, optimize, validate, simulate.

Every subcommand is deterministic given its inputs and seed, writes
machine-readable delimited output, and exits 0 on success, 1 on input
errors, 2 on numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import hyperopt, model, oracle, simulate, store
from .engine import DegenerateUpdateError, EngineConfig, PlayerBelief, run_period
from .model import Hyperparameters

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_DEGENERATE = 2


def _add_hyperparameter_flags(parser):
    group = parser.add_argument_group("hyperparameters")
    defaults = model.DEFAULT_HYPERPARAMETERS
    group.add_argument("--alpha0", type=float, default=defaults.alpha0,
                       help="white-advantage intercept")
    group.add_argument("--alpha1", type=float, default=defaults.alpha1,
                       help="white-advantage slope in average strength")
    group.add_argument("--beta0", type=float, default=defaults.beta0,
                       help="draw intercept")
    group.add_argument("--beta1", type=float, default=defaults.beta1,
                       help="draw slope in average strength")
    group.add_argument("--tau", type=float, default=defaults.tau,
                       help="innovation standard deviation per period")


def _add_config_flags(parser):
    group = parser.add_argument_group("engine configuration")
    group.add_argument("--sigma-cap", type=float, default=0.691,
                       help="rating-deviation growth cap (latent units)")
    group.add_argument("--no-draw-override", action="store_true",
                       help="use the model's own draw score instead of 1/2")
    group.add_argument("--default-prior-elo", type=float, default=1800.0)
    group.add_argument("--default-prior-sd-elo", type=float, default=250.0)
    group.add_argument("--rated-prior-sd-elo", type=float, default=100.0)


def _hyperparameters(args) -> Hyperparameters:
    return Hyperparameters(args.alpha0, args.alpha1, args.beta0, args.beta1, args.tau)


def _config(args) -> EngineConfig:
    return EngineConfig(
        sigma_cap=args.sigma_cap,
        draw_score_override=not args.no_draw_override,
        default_prior_elo=args.default_prior_elo,
        default_prior_sd_elo=args.default_prior_sd_elo,
        rated_prior_sd_elo=args.rated_prior_sd_elo,
    )


def _warn_rejects(rejects, what):
    for line_no, reason in rejects:
        print(f"warning: {what} line {line_no}: {reason}", file=sys.stderr)


def cmd_rate(args) -> int:
    h = _hyperparameters(args)
    cfg = _config(args)
    if args.snapshot:
        snapshot = store.read_snapshot_file(args.snapshot)
        state, played, period = snapshot.state(), snapshot.games_played(), snapshot.period
    else:
        state, played, period = {}, {}, 1

    games, rejects = store.read_games(args.games)
    _warn_rejects(rejects, "games")
    periods = {g.period for g in games}
    if len(periods) > 1:
        raise ValueError(f"rate expects a single period per file, got {sorted(periods)}")
    if periods and periods != {period}:
        raise ValueError(
            f"games are for period {periods.pop()}, snapshot expects {period}"
        )

    result = run_period(state, games, h, cfg)
    _warn_rejects(result.rejected, "games")
    for u in result.updates:
        played[u.player_id] = played.get(u.player_id, 0) + u.games_count

    entries = [
        (pid, belief.mu, belief.sigma, played.get(pid, 0))
        for pid, belief in sorted(result.state.items())
    ]
    store.write_snapshot_file(
        store.RatingSnapshot(period + 1, entries, h, cfg), args.out_snapshot
    )

    report = args.report and open(args.report, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(report or sys.stdout, lineterminator="\n")
        writer.writerow([
            "player", "games", "elo_prior", "rd_prior", "elo_post", "rd_post",
            "elo_change", "mu_prior", "sigma_prior", "mu_post", "sigma_post",
        ])
        for u in result.updates:
            elo_prior = model.latent_to_elo(u.mu_prior)
            elo_post = model.latent_to_elo(u.mu_post)
            writer.writerow([
                u.player_id, u.games_count,
                f"{elo_prior:.2f}", f"{u.sigma_prior * model.ELO_SCALE:.2f}",
                f"{elo_post:.2f}", f"{u.sigma_post * model.ELO_SCALE:.2f}",
                f"{elo_post - elo_prior:.2f}",
                repr(u.mu_prior), repr(u.sigma_prior),
                repr(u.mu_post), repr(u.sigma_post),
            ])
    finally:
        if report:
            report.close()
    return EXIT_OK


def cmd_predict(args) -> int:
    h = _hyperparameters(args)
    cfg = _config(args)
    snapshot = store.read_snapshot_file(args.snapshot)
    state = snapshot.state()

    def belief(pid) -> PlayerBelief:
        existing = state.get(pid)
        if existing is None:
            print(f"warning: unknown player {pid!r}, using default prior",
                  file=sys.stderr)
            return cfg.default_belief(pid)
        return existing

    out = args.out and open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out or sys.stdout, lineterminator="\n")
        writer.writerow(["white", "black", "p_win", "p_draw", "p_loss", "p_win_decisive"])
        with open(args.fixtures, newline="", encoding="utf-8") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if not row or (line_no == 1 and row[0].strip().lower() == "white"):
                    continue
                if len(row) != 2 or not row[0].strip() or not row[1].strip():
                    print(f"warning: fixtures line {line_no}: expected 'white,black'",
                          file=sys.stderr)
                    continue
                white, black = (c.strip() for c in row)
                w, b = belief(white), belief(black)
                p = hyperopt.predictive_probability_array(
                    w.mu, w.sigma, b.mu, b.sigma, h, order=args.order
                )
                writer.writerow([
                    white, black, repr(float(p[0])), repr(float(p[1])),
                    repr(float(p[2])), repr(float(p[0] / (p[0] + p[2]))),
                ])
    finally:
        if out:
            out.close()
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    games, rejects = store.read_games(args.games)
    _warn_rejects(rejects, "games")
    initial_state = None
    if args.ratings:
        initial_state = store.initialize_priors(_read_ratings(args.ratings), cfg)

    trace = hyperopt.TraceRecorder()
    result = hyperopt.optimize(
        games, cfg, args.train_until,
        fix_alpha=not args.free_alpha,
        initial_state=initial_state,
        trace=trace,
    )
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(trace.to_delimited())

    out = args.out and open(args.out, "w", encoding="utf-8")
    try:
        fh = out or sys.stdout
        b = result.best
        fh.write("parameter,value\n")
        for name in ("alpha0", "alpha1", "beta0", "beta1", "tau"):
            fh.write(f"{name},{getattr(b, name)!r}\n")
        fh.write(f"objective,{result.objective!r}\n")
        fh.write(f"evaluations,{result.evaluations}\n")
        fh.write(f"converged,{int(result.converged)}\n")
    finally:
        if out:
            out.close()
    return EXIT_OK if result.converged else EXIT_INPUT_ERROR


def _read_ratings(path):
    ratings = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (line_no == 1 and row[0].strip().lower() == "player"):
                continue
            ratings.append((row[0].strip(), float(row[1])))
    return ratings


def cmd_validate(args) -> int:
    h = _hyperparameters(args)
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    games = []
    for _ in range(args.games):
        focal = PlayerBelief("focal", rng.uniform(-1.0, 8.0), rng.uniform(0.2, 1.2))
        opponent = PlayerBelief("opp", rng.uniform(-1.0, 8.0), rng.uniform(0.2, 1.2))
        color = 1 if rng.random() < 0.5 else -1
        p = hyperopt.predictive_probability_array(
            focal.mu, focal.sigma, opponent.mu, opponent.sigma, h
        )
        if color == -1:
            p = p[::-1]
        outcome = [model.WIN, model.DRAW, model.LOSS][
            int((rng.random() < p.cumsum()).argmax())
        ]
        games.append((focal, opponent, outcome, color))

    report = oracle.compare_updates(games, h, cfg, order=args.order,
                                    stratify=args.stratify)
    text = report.to_delimited()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if report.excluded:
        print(f"warning: {report.excluded} games excluded", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    h = _hyperparameters(args)
    cfg = simulate.LeagueConfig(
        players=args.players,
        periods=args.periods,
        games_per_period=args.games_per_period,
        pairing=args.pairing,
        initial_mean=args.initial_mean,
        initial_sd=args.initial_sd,
        seed=args.seed,
    )
    league = simulate.simulate_league(cfg, h)
    with open(args.out_games, "w", newline="", encoding="utf-8") as fh:
        store.write_games(league.games, fh)
    if args.out_strengths:
        with open(args.out_strengths, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["player"] + [f"period_{t}" for t in range(1, cfg.periods + 1)])
            for i in range(cfg.players):
                writer.writerow(
                    [simulate.player_name(i)]
                    + [repr(float(v)) for v in league.true_strengths[i]]
                )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drawrating",
        description="Rating engine for win/draw/loss games with "
                    "strength-dependent draw probabilities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rate = sub.add_parser("rate", help="apply one rating period")
    rate.add_argument("--games", required=True, help="game CSV for one period")
    rate.add_argument("--snapshot", help="input rating snapshot (omit to start fresh)")
    rate.add_argument("--out-snapshot", required=True)
    rate.add_argument("--report", help="per-player update report CSV (default stdout)")
    _add_hyperparameter_flags(rate)
    _add_config_flags(rate)
    rate.set_defaults(func=cmd_rate)

    predict = sub.add_parser("predict", help="outcome probabilities for fixtures")
    predict.add_argument("--snapshot", required=True)
    predict.add_argument("--fixtures", required=True, help="CSV of white,black pairs")
    predict.add_argument("--out")
    predict.add_argument("--order", type=int, default=3, help="quadrature order")
    _add_hyperparameter_flags(predict)
    _add_config_flags(predict)
    predict.set_defaults(func=cmd_predict)

    optimize = sub.add_parser("optimize", help="tune hyperparameters on game history")
    optimize.add_argument("--games", required=True)
    optimize.add_argument("--train-until", type=int, required=True,
                          help="last period used purely for training")
    optimize.add_argument("--ratings", help="CSV of player,elo initial ratings")
    optimize.add_argument("--free-alpha", action="store_true",
                          help="also optimize the white-advantage parameters")
    optimize.add_argument("--trace", help="write the evaluation trace CSV here")
    optimize.add_argument("--out")
    _add_config_flags(optimize)
    optimize.set_defaults(func=cmd_optimize)

    validate = sub.add_parser(
        "validate", help="compare fast updates against the quadrature oracle"
    )
    validate.add_argument("--games", type=int, default=1000)
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--order", type=int, default=9)
    validate.add_argument("--stratify", action="store_true")
    validate.add_argument("--out")
    _add_hyperparameter_flags(validate)
    _add_config_flags(validate)
    validate.set_defaults(func=cmd_validate)

    sim = sub.add_parser("simulate", help="generate a synthetic league")
    sim.add_argument("--players", type=int, required=True)
    sim.add_argument("--periods", type=int, required=True)
    sim.add_argument("--games-per-period", type=int, required=True)
    sim.add_argument("--pairing", choices=["rating-banded", "uniform-random"],
                     default="rating-banded")
    sim.add_argument("--initial-mean", type=float, default=0.0)
    sim.add_argument("--initial-sd", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out-games", required=True)
    sim.add_argument("--out-strengths")
    _add_hyperparameter_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateUpdateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
