"""Hyperparameter selection by one-step-ahead predictive likelihood.

The engine is run through a training span, then each later period is scored
*before* its games are folded in: the probability of every observed outcome
is integrated over both players' current priors (3-point tensor quadrature),
summed in log, and only then does the period update the state.  The total
over all validation periods is maximized with Nelder-Mead from several
starting points, with tau searched on the log scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import engine, model
from .engine import EngineConfig, PlayerBelief
from .model import Hyperparameters

#: Simplex stops when the objective spread falls below this.
SPREAD_TOL = 1e-6
#: Hard budget of objective evaluations per start.
MAX_EVALUATIONS = 2000


@dataclass(frozen=True)
class PredictiveEvaluation:
    per_period_loglik: tuple
    total: float
    games_evaluated: int


@dataclass(frozen=True)
class OptimizationStart:
    initial: Hyperparameters
    converged: Hyperparameters
    objective: float


@dataclass
class OptimizationResult:
    best: Hyperparameters
    objective: float
    starts: list
    evaluations: int
    converged: bool = True


@dataclass
class TraceRecorder:
    """Collects (evaluation index, parameters, objective) audit rows."""

    rows: list = field(default_factory=list)

    def record(self, h: Hyperparameters, objective: float):
        self.rows.append((len(self.rows), h, objective))

    def to_delimited(self, sep: str = ",") -> str:
        lines = ["evaluation,alpha0,alpha1,beta0,beta1,tau,objective"]
        for i, h, obj in self.rows:
            lines.append(sep.join([
                str(i), repr(h.alpha0), repr(h.alpha1),
                repr(h.beta0), repr(h.beta1), repr(h.tau), repr(obj),
            ]))
        return "\n".join(lines) + "\n"


def predictive_probability_array(
    white_mu, white_sigma, black_mu, black_sigma, h: Hyperparameters, order: int = 3
) -> np.ndarray:
    """Belief-integrated outcome probabilities, (win, draw, loss) last axis.

    Integrates the outcome model over both players' independent normal
    beliefs using an order^2 tensor grid; broadcasts over leading axes.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    weights = weights / math.sqrt(math.pi)
    white_mu = np.asarray(white_mu, dtype=float)[..., None, None]
    white_sigma = np.asarray(white_sigma, dtype=float)[..., None, None]
    black_mu = np.asarray(black_mu, dtype=float)[..., None, None]
    black_sigma = np.asarray(black_sigma, dtype=float)[..., None, None]
    theta_w = white_mu + math.sqrt(2.0) * white_sigma * nodes[:, None]
    theta_b = black_mu + math.sqrt(2.0) * black_sigma * nodes[None, :]
    p = model.probability_array(theta_w, theta_b, 1.0, h)
    w2 = weights[:, None, None] * weights[None, :, None]
    return (p * w2).sum(axis=(-3, -2))


def game_predictive_likelihood(
    white: PlayerBelief,
    black: PlayerBelief,
    outcome: float,
    h: Hyperparameters,
    order: int = 3,
) -> float:
    """Probability of the realized outcome, integrated over both beliefs."""
    p = predictive_probability_array(
        white.mu, white.sigma, black.mu, black.sigma, h, order
    )
    return float(p[model.outcome_index(outcome)])


def games_by_period(games: list) -> dict:
    """Group game records into {period: [games]} preserving input order."""
    grouped = {}
    for g in games:
        grouped.setdefault(g.period, []).append(g)
    return grouped


def _period_loglik(state, period_games, h, cfg, order):
    """Sum of log predictive likelihoods for one period's games."""
    if not period_games:
        return 0.0, 0
    valid = [g for g in period_games if engine._validate_game(g) is None]
    if not valid:
        return 0.0, 0

    def belief(pid):
        return state.get(pid) or cfg.default_belief(pid)

    wmu = np.array([belief(g.white_id).mu for g in valid])
    wsd = np.array([belief(g.white_id).sigma for g in valid])
    bmu = np.array([belief(g.black_id).mu for g in valid])
    bsd = np.array([belief(g.black_id).sigma for g in valid])
    idx = np.array([model.outcome_index(g.outcome) for g in valid])
    p = predictive_probability_array(wmu, wsd, bmu, bsd, h, order)
    chosen = p[np.arange(len(valid)), idx]
    with np.errstate(divide="ignore"):  # an underflown outcome scores -inf
        return float(np.log(chosen).sum()), len(valid)


def evaluate_hyperparameters(
    games: list,
    h: Hyperparameters,
    cfg: EngineConfig,
    train_until: int,
    initial_state: dict | None = None,
    order: int = 3,
) -> PredictiveEvaluation:
    """Cumulative one-step-ahead predictive log-likelihood.

    Runs the filter over periods 1..train_until, then alternates scoring a
    period's games against the current priors with folding them in, exactly
    once per validation period.  Future outcomes are never read before their
    period is scored.
    """
    grouped = games_by_period(games)
    if not grouped:
        raise ValueError("no games supplied")
    last = max(grouped)
    if train_until >= last:
        raise ValueError(
            f"train_until ({train_until}) must precede the last period ({last})"
        )
    state = dict(initial_state) if initial_state else {}
    per_period = []
    evaluated = 0
    for period in range(1, last + 1):
        period_games = grouped.get(period, [])
        if period > train_until:
            loglik, n = _period_loglik(state, period_games, h, cfg, order)
            per_period.append(loglik)
            evaluated += n
        state = engine.run_period(state, period_games, h, cfg).state
    return PredictiveEvaluation(tuple(per_period), math.fsum(per_period), evaluated)


def default_starts() -> list[Hyperparameters]:
    """Three standard starting points spanning low and high draw slopes."""
    return [
        Hyperparameters(beta0=0.35338, beta1=0.57041, tau=0.46040),
        Hyperparameters(beta0=1.09861, beta1=0.17037, tau=0.14391),
        Hyperparameters(beta0=0.0, beta1=0.0, tau=0.2),
    ]


def _to_vector(h: Hyperparameters, fix_alpha: bool) -> np.ndarray:
    core = [h.beta0, h.beta1, math.log(max(h.tau, 1e-8))]
    if fix_alpha:
        return np.array(core)
    return np.array([h.alpha0, h.alpha1] + core)


def _from_vector(v: np.ndarray, fix_alpha: bool) -> Hyperparameters:
    if fix_alpha:
        beta0, beta1, log_tau = v
        return Hyperparameters(0.0, 0.0, float(beta0), float(beta1), math.exp(log_tau))
    alpha0, alpha1, beta0, beta1, log_tau = v
    return Hyperparameters(
        float(alpha0), float(alpha1), float(beta0), float(beta1), math.exp(log_tau)
    )


def optimize(
    games: list,
    cfg: EngineConfig,
    train_until: int,
    starts: list[Hyperparameters] | None = None,
    fix_alpha: bool = True,
    initial_state: dict | None = None,
    trace: TraceRecorder | None = None,
    objective_fn=None,
) -> OptimizationResult:
    """Maximize predictive log-likelihood with multi-start Nelder-Mead.

    ``objective_fn`` (Hyperparameters -> float, larger is better) replaces
    the predictive evaluation when given; used for testing the search.
    """
    starts = default_starts() if starts is None else list(starts)
    if not starts:
        raise ValueError("at least one start is required")
    if objective_fn is None:
        def objective_fn(h):
            return evaluate_hyperparameters(
                games, h, cfg, train_until, initial_state
            ).total

    evaluations = 0

    def negative(v):
        nonlocal evaluations
        evaluations += 1
        h = _from_vector(v, fix_alpha)
        try:
            value = objective_fn(h)
        except engine.DegenerateUpdateError:
            # pathological candidate (probabilities underflow); score it as
            # arbitrarily bad so the simplex backs off instead of aborting
            value = -math.inf
        if trace is not None:
            trace.record(h, value)
        return -value

    results = []
    for start in starts:
        x0 = _to_vector(start, fix_alpha)
        res = minimize(
            negative,
            x0,
            method="Nelder-Mead",
            options={
                "fatol": SPREAD_TOL,
                "xatol": 1e-6,
                "maxfev": MAX_EVALUATIONS,
            },
        )
        results.append(
            OptimizationStart(start, _from_vector(res.x, fix_alpha), -res.fun)
        )

    best = max(results, key=lambda r: r.objective)
    initial_best = max(objective_fn(s) for s in starts)
    converged = best.objective > initial_best
    if not converged:
        # no start improved on its initial point; report the best initial
        best_start = max(starts, key=objective_fn)
        return OptimizationResult(
            best_start, initial_best, results, evaluations, converged=False
        )
    return OptimizationResult(
        best.converged, best.objective, results, evaluations, converged=True
    )
