"""Per-period Bayesian filtering of player ratings.

Each rating period, every player's normal belief is updated from their game
results via a 2-point quadrature over each opponent's prior and a single
Newton-Raphson step at the focal player's prior mean.  Updates read only the
period's *prior* snapshot, so all players can be processed independently;
afterwards the innovation variance is added (subject to a growth cap) to
form the next period's priors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import Hyperparameters


class DegenerateUpdateError(ArithmeticError):
    """Raised when the posterior precision is non-positive.

    Mathematically every game term reduces curvature by a non-positive
    amount, so the precision stays above the prior's.  A non-positive value
    indicates floating-point pathology; we refuse to clamp because a silent
    fixup would corrupt every downstream prior.
    """


@dataclass
class PlayerBelief:
    """Normal belief about one player's latent strength."""

    player_id: str
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError(f"belief for {self.player_id!r} must be finite")
        if self.sigma <= 0:
            raise ValueError(
                f"belief for {self.player_id!r} needs sigma > 0, got {self.sigma}"
            )

    @property
    def elo(self) -> float:
        return model.latent_to_elo(self.mu)

    @property
    def elo_sd(self) -> float:
        return self.sigma * model.ELO_SCALE


@dataclass(frozen=True)
class EngineConfig:
    """Engine policy constants (distinct from the likelihood hyperparameters)."""

    sigma_cap: float = 0.691
    draw_score_override: bool = True
    default_prior_elo: float = 1800.0
    default_prior_sd_elo: float = 250.0
    rated_prior_sd_elo: float = 100.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma_cap) and self.sigma_cap > 0):
            raise ValueError(f"sigma_cap must be positive, got {self.sigma_cap}")

    def default_belief(self, player_id: str) -> PlayerBelief:
        return PlayerBelief(
            player_id,
            model.elo_to_latent(self.default_prior_elo),
            model.elo_sd_to_latent(self.default_prior_sd_elo),
        )


@dataclass(frozen=True)
class GameTerm:
    """One game's contribution to the focal player's log-posterior derivatives."""

    delta1: float
    delta2: float
    p_observed: float


@dataclass(frozen=True)
class PeriodUpdate:
    player_id: str
    mu_prior: float
    sigma_prior: float
    mu_post: float
    sigma_post: float
    games_count: int


@dataclass
class PeriodResult:
    """Outcome of processing one rating period."""

    state: dict
    updates: list
    rejected: list = field(default_factory=list)


def _delta_arrays(focal_mu, opp_mu, opp_sigma, outcome, color, h, draw_score_override):
    """Vectorized game-term computation; all inputs broadcast to 1-D.

    The outcome model is evaluated at opponent nodes mu_j - sigma_j and
    mu_j + sigma_j with the focal strength fixed at its prior mean.  The
    equal 1/2 node weights cancel between numerator and denominator of the
    delta terms; p_observed keeps the uncancelled two-node sum.
    """
    focal_mu, opp_mu, opp_sigma, outcome, color = np.broadcast_arrays(
        np.asarray(focal_mu, dtype=float),
        np.asarray(opp_mu, dtype=float),
        np.asarray(opp_sigma, dtype=float),
        np.asarray(outcome, dtype=float),
        np.asarray(color, dtype=float),
    )
    a = model.score_coefficient_array(color, h, draw_score_override)  # (n, 3)
    idx = np.searchsorted([0.0, 0.5, 1.0], outcome)  # loss=0, draw=1, win=2
    idx = np.array([2, 1, 0])[idx]  # -> (win, draw, loss) positions
    rows = np.arange(outcome.shape[0] if outcome.ndim else 1)
    a_y = a.reshape(-1, 3)[rows, idx.reshape(-1)]

    p_obs = np.zeros_like(np.atleast_1d(focal_mu))
    num1 = np.zeros_like(p_obs)
    num2 = np.zeros_like(p_obs)
    for node in (-1.0, 1.0):
        p = model.probability_array(focal_mu, opp_mu + node * opp_sigma, color, h)
        p = p.reshape(-1, 3)
        s1 = np.einsum("ij,ij->i", p, a.reshape(-1, 3))
        s2 = np.einsum("ij,ij->i", p, a.reshape(-1, 3) ** 2)
        p_y = p[rows, idx.reshape(-1)]
        p_obs += p_y
        num1 += p_y * (a_y - s1)
        num2 += p_y * (a_y**2 - s2 - 2.0 * s1 * (a_y - s1))
    # p_obs can underflow to exactly 0 for pathological hyperparameters;
    # the resulting NaNs are caught by the precision check downstream
    with np.errstate(divide="ignore", invalid="ignore"):
        delta1 = num1 / p_obs
        delta2 = num2 / p_obs - delta1**2
    return delta1, delta2, p_obs


def game_term(
    focal: PlayerBelief,
    opponent: PlayerBelief,
    outcome: float,
    color: int,
    h: Hyperparameters,
    cfg: EngineConfig,
) -> GameTerm:
    """Derivative contributions of one game, evaluated at the focal prior mean."""
    model.outcome_index(outcome)
    if opponent.sigma <= 0 or focal.sigma <= 0:
        raise ValueError("beliefs need positive sigma")
    d1, d2, p = _delta_arrays(
        focal.mu, opponent.mu, opponent.sigma, outcome, color, h,
        cfg.draw_score_override,
    )
    if not (p[0] > 0):
        raise DegenerateUpdateError(
            "realized outcome has zero probability at both quadrature nodes"
        )
    return GameTerm(float(d1[0]), float(d2[0]), float(p[0]))


def period_update(focal: PlayerBelief, terms: list[GameTerm]) -> PeriodUpdate:
    """One-step Newton-Raphson posterior from a player's game terms."""
    if not terms:
        return PeriodUpdate(
            focal.player_id, focal.mu, focal.sigma, focal.mu, focal.sigma, 0
        )
    sum1 = math.fsum(t.delta1 for t in terms)
    sum2 = math.fsum(t.delta2 for t in terms)
    precision = focal.sigma**-2 - sum2
    if precision <= 0 or not math.isfinite(precision):
        raise DegenerateUpdateError(
            f"non-positive posterior precision {precision} for {focal.player_id!r}"
        )
    mu_post = focal.mu + sum1 / precision
    sigma_post = precision**-0.5
    return PeriodUpdate(
        focal.player_id, focal.mu, focal.sigma, mu_post, sigma_post, len(terms)
    )


def advance_time(post: PlayerBelief, h: Hyperparameters, cfg: EngineConfig) -> PlayerBelief:
    """Next-period prior: add innovation variance unless the cap is reached."""
    if post.sigma < cfg.sigma_cap:
        sigma = math.sqrt(post.sigma**2 + h.tau**2)
    else:
        sigma = post.sigma
    return PlayerBelief(post.player_id, post.mu, sigma)


def _validate_game(game) -> str | None:
    if game.white_id == game.black_id:
        return f"self-play: {game.white_id!r}"
    try:
        model.outcome_index(game.outcome)
    except ValueError:
        return f"unknown outcome {game.outcome!r}"
    return None


def run_period(
    state: dict,
    games: list,
    h: Hyperparameters,
    cfg: EngineConfig,
) -> PeriodResult:
    """Process one rating period.

    Every game yields two directed terms (one per player); both are computed
    against the opponents' prior beliefs, never their posteriors.  Players
    absent from ``state`` receive the default prior on first appearance.
    Afterwards every tracked player, active or not, is advanced in time.
    Summation order is fixed by sorted term keys so reruns and permuted
    inputs are bit-identical.
    """
    state = dict(state)
    rejected = []
    directed = []  # (focal_id, opp_id, outcome, color)
    for line_no, game in enumerate(games):
        reason = _validate_game(game)
        if reason is not None:
            rejected.append((line_no, reason))
            continue
        for pid in (game.white_id, game.black_id):
            if pid not in state:
                state[pid] = cfg.default_belief(pid)
        y = float(game.outcome)
        directed.append((game.white_id, game.black_id, y, 1.0))
        directed.append((game.black_id, game.white_id, 1.0 - y, -1.0))
    directed.sort()

    ids = sorted(state)
    index = {pid: k for k, pid in enumerate(ids)}
    mu = np.array([state[pid].mu for pid in ids])
    sigma = np.array([state[pid].sigma for pid in ids])
    counts = np.zeros(len(ids), dtype=int)
    sum1 = np.zeros(len(ids))
    sum2 = np.zeros(len(ids))
    if directed:
        focal_idx = np.array([index[t[0]] for t in directed])
        opp_idx = np.array([index[t[1]] for t in directed])
        outcome = np.array([t[2] for t in directed])
        color = np.array([t[3] for t in directed])
        d1, d2, _ = _delta_arrays(
            mu[focal_idx], mu[opp_idx], sigma[opp_idx], outcome, color, h,
            cfg.draw_score_override,
        )
        counts = np.bincount(focal_idx, minlength=len(ids))
        sum1 = np.bincount(focal_idx, weights=d1, minlength=len(ids))
        sum2 = np.bincount(focal_idx, weights=d2, minlength=len(ids))

    precision = sigma**-2 - sum2
    if np.any(precision <= 0) or not np.all(np.isfinite(precision)):
        bad = [ids[k] for k in np.nonzero(~(precision > 0))[0]]
        raise DegenerateUpdateError(f"non-positive posterior precision for {bad}")
    active = counts > 0
    mu_post = np.where(active, mu + sum1 / precision, mu)
    sigma_post = np.where(active, precision**-0.5, sigma)

    updates = [
        PeriodUpdate(
            pid, float(mu[k]), float(sigma[k]),
            float(mu_post[k]), float(sigma_post[k]), int(counts[k]),
        )
        for k, pid in enumerate(ids)
    ]
    new_state = {
        pid: advance_time(
            PlayerBelief(pid, float(mu_post[k]), float(sigma_post[k])), h, cfg
        )
        for k, pid in enumerate(ids)
    }
    return PeriodResult(new_state, updates, rejected)
