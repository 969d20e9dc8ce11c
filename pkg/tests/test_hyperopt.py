"""Tests for predictive scoring and hyperparameter search.

Frozen predictive probabilities come from independent dense trapezoid
integration over both players' beliefs (4001-point grids, +/- 8 sd).
"""

import math

import numpy as np
import pytest

from drawrating import engine, hyperopt, model
from drawrating.engine import EngineConfig, PlayerBelief
from drawrating.model import Hyperparameters
from drawrating.store import GameRecord

H2 = Hyperparameters()
CFG = EngineConfig()


def belief(mu, sigma, pid="x"):
    return PlayerBelief(pid, mu, sigma)


class TestPredictiveProbability:
    # (white_mu, white_sd, black_mu, black_sd) -> (p_win, p_draw, p_loss)
    FROZEN = [
        ((0.4, 0.8, 1.1, 0.6),
         (0.14003963913644246, 0.5907372361329505, 0.2692231247306051)),
        ((2.0, 0.5756, 1.4, 0.5756),
         (0.22974694152685096, 0.6401501502679289, 0.1301029082052178)),
    ]

    @pytest.mark.parametrize("args,expected", FROZEN)
    def test_high_order_matches_grid_integration(self, args, expected):
        p = hyperopt.predictive_probability_array(*args, H2, order=9)
        np.testing.assert_allclose(p, expected, rtol=0, atol=1e-9)

    @pytest.mark.parametrize("args,expected", FROZEN)
    def test_default_order_is_close(self, args, expected):
        p = hyperopt.predictive_probability_array(*args, H2, order=3)
        np.testing.assert_allclose(p, expected, rtol=0, atol=1e-4)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        wmu, bmu = rng.uniform(-2, 8, 50), rng.uniform(-2, 8, 50)
        wsd, bsd = rng.uniform(0.2, 1.5, 50), rng.uniform(0.2, 1.5, 50)
        p = hyperopt.predictive_probability_array(wmu, wsd, bmu, bsd, H2)
        np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)

    def test_certain_beliefs_reduce_to_point_model(self):
        tiny = 1e-9
        p = hyperopt.predictive_probability_array(1.2, tiny, 0.3, tiny, H2)
        point = model.probability_array(1.2, 0.3, 1.0, H2)
        np.testing.assert_allclose(p, point, atol=1e-8)

    def test_game_predictive_likelihood_scalar_path(self):
        w, b = belief(0.4, 0.8), belief(1.1, 0.6, "b")
        p = hyperopt.predictive_probability_array(0.4, 0.8, 1.1, 0.6, H2)
        for y, idx in [(1.0, 0), (0.5, 1), (0.0, 2)]:
            assert hyperopt.game_predictive_likelihood(w, b, y, H2) == pytest.approx(
                float(p[idx])
            )


class TestGamesByPeriod:
    def test_grouping_preserves_order(self):
        games = [
            GameRecord(2, "a", "b", 1.0),
            GameRecord(1, "c", "d", 0.5),
            GameRecord(2, "e", "f", 0.0),
        ]
        grouped = hyperopt.games_by_period(games)
        assert sorted(grouped) == [1, 2]
        assert [g.white_id for g in grouped[2]] == ["a", "e"]


def _league_games(periods=4, games_per_period=30, seed=0):
    rng = np.random.default_rng(seed)
    players = [f"p{i}" for i in range(8)]
    games = []
    for t in range(1, periods + 1):
        for _ in range(games_per_period):
            w, b = rng.choice(len(players), 2, replace=False)
            y = float(rng.choice([1.0, 0.5, 0.0]))
            games.append(GameRecord(t, players[w], players[b], y))
    return games


class TestEvaluateHyperparameters:
    def test_period_accounting(self):
        games = _league_games(periods=5)
        ev = hyperopt.evaluate_hyperparameters(games, H2, CFG, train_until=2)
        assert len(ev.per_period_loglik) == 3  # periods 3, 4, 5 scored
        assert ev.games_evaluated == 3 * 30
        assert ev.total == pytest.approx(math.fsum(ev.per_period_loglik))
        assert ev.total < 0.0

    def test_train_until_must_precede_last_period(self):
        games = _league_games(periods=3)
        with pytest.raises(ValueError):
            hyperopt.evaluate_hyperparameters(games, H2, CFG, train_until=3)

    def test_empty_games_rejected(self):
        with pytest.raises(ValueError):
            hyperopt.evaluate_hyperparameters([], H2, CFG, train_until=1)

    def test_scoring_never_peeks_at_later_periods(self):
        """Per-period scores depend only on strictly earlier outcomes."""
        games = _league_games(periods=4)
        flipped = [
            GameRecord(g.period, g.white_id, g.black_id,
                       1.0 - g.outcome if g.period == 4 else g.outcome)
            for g in games
        ]
        base = hyperopt.evaluate_hyperparameters(games, H2, CFG, train_until=1)
        changed = hyperopt.evaluate_hyperparameters(flipped, H2, CFG, train_until=1)
        assert changed.per_period_loglik[0] == base.per_period_loglik[0]
        assert changed.per_period_loglik[1] == base.per_period_loglik[1]
        assert changed.per_period_loglik[2] != base.per_period_loglik[2]

    def test_scores_period_before_folding_it_in(self):
        """A single validation game is scored against the pre-game priors."""
        games = [
            GameRecord(1, "a", "b", 1.0),
            GameRecord(2, "a", "b", 0.5),
        ]
        state = {"a": belief(0.3, 0.5, "a"), "b": belief(-0.1, 0.6, "b")}
        ev = hyperopt.evaluate_hyperparameters(
            games, H2, CFG, train_until=1, initial_state=state
        )
        trained = engine.run_period(state, games[:1], H2, CFG).state
        expected = math.log(
            hyperopt.game_predictive_likelihood(trained["a"], trained["b"], 0.5, H2)
        )
        assert ev.per_period_loglik[0] == pytest.approx(expected, abs=1e-12)

    def test_unknown_players_use_default_prior(self):
        games = [GameRecord(1, "a", "b", 1.0), GameRecord(2, "new", "b", 0.0)]
        ev = hyperopt.evaluate_hyperparameters(games, H2, CFG, train_until=1)
        assert math.isfinite(ev.total)
        assert ev.games_evaluated == 1

    def test_invalid_games_skipped(self):
        games = [
            GameRecord(1, "a", "b", 1.0),
            GameRecord(2, "a", "a", 1.0),
            GameRecord(2, "a", "b", 0.5),
        ]
        ev = hyperopt.evaluate_hyperparameters(games, H2, CFG, train_until=1)
        assert ev.games_evaluated == 1


class TestVectorMapping:
    def test_round_trip_fixed_alpha(self):
        h = Hyperparameters(beta0=0.4, beta1=0.6, tau=0.3)
        v = hyperopt._to_vector(h, fix_alpha=True)
        assert len(v) == 3
        back = hyperopt._from_vector(v, fix_alpha=True)
        assert back.beta0 == pytest.approx(0.4)
        assert back.tau == pytest.approx(0.3)
        assert (back.alpha0, back.alpha1) == (0.0, 0.0)

    def test_round_trip_free_alpha(self):
        h = Hyperparameters(0.1, -0.2, 0.4, 0.6, 0.3)
        back = hyperopt._from_vector(hyperopt._to_vector(h, False), False)
        assert back.alpha0 == pytest.approx(0.1)
        assert back.alpha1 == pytest.approx(-0.2)
        assert back.tau == pytest.approx(0.3)

    def test_tau_searched_on_log_scale(self):
        v = hyperopt._to_vector(Hyperparameters(tau=0.5), True)
        assert v[2] == pytest.approx(math.log(0.5))


class TestOptimize:
    @staticmethod
    def quadratic_objective(target):
        def objective(h):
            return -(
                (h.beta0 - target.beta0) ** 2
                + (h.beta1 - target.beta1) ** 2
                + (math.log(h.tau) - math.log(target.tau)) ** 2
            )
        return objective

    def test_recovers_quadratic_maximum(self):
        target = Hyperparameters(beta0=0.8, beta1=0.25, tau=0.3)
        result = hyperopt.optimize(
            [], CFG, train_until=1,
            starts=[Hyperparameters(beta0=0.2, beta1=0.6, tau=0.15)],
            objective_fn=self.quadratic_objective(target),
        )
        assert result.converged
        assert result.best.beta0 == pytest.approx(0.8, abs=1e-3)
        assert result.best.beta1 == pytest.approx(0.25, abs=1e-3)
        assert result.best.tau == pytest.approx(0.3, abs=1e-3)
        assert result.evaluations > 0

    def test_multi_start_picks_best(self):
        target = Hyperparameters(beta0=1.0, beta1=0.1, tau=0.2)
        result = hyperopt.optimize(
            [], CFG, train_until=1,
            starts=[
                Hyperparameters(beta0=0.0, beta1=0.0, tau=0.1),
                Hyperparameters(beta0=2.0, beta1=1.0, tau=0.5),
            ],
            objective_fn=self.quadratic_objective(target),
        )
        assert len(result.starts) == 2
        assert result.objective == pytest.approx(
            max(s.objective for s in result.starts)
        )

    def test_free_alpha_search_space(self):
        target = Hyperparameters(0.15, -0.05, 0.8, 0.25, 0.3)

        def objective(h):
            return -(
                (h.alpha0 - 0.15) ** 2 + (h.alpha1 + 0.05) ** 2
                + (h.beta0 - 0.8) ** 2 + (h.beta1 - 0.25) ** 2
                + (math.log(h.tau) - math.log(0.3)) ** 2
            )

        result = hyperopt.optimize(
            [], CFG, train_until=1, fix_alpha=False,
            starts=[Hyperparameters(tau=0.2)], objective_fn=objective,
        )
        assert result.best.alpha0 == pytest.approx(0.15, abs=1e-2)
        assert result.best.alpha1 == pytest.approx(-0.05, abs=1e-2)

    def test_degenerate_candidates_are_penalized_not_fatal(self):
        """Candidates that break the filter score -inf and the search goes on."""
        target = Hyperparameters(beta0=0.8, beta1=0.25, tau=0.3)
        base = self.quadratic_objective(target)

        def fragile(h):
            if h.beta0 > 0.9:
                raise engine.DegenerateUpdateError("synthetic blow-up")
            return base(h)

        result = hyperopt.optimize(
            [], CFG, train_until=1,
            starts=[Hyperparameters(beta0=0.2, beta1=0.6, tau=0.15)],
            objective_fn=fragile,
        )
        assert result.best.beta0 == pytest.approx(0.8, abs=1e-2)

    def test_trace_records_every_evaluation(self):
        trace = hyperopt.TraceRecorder()
        result = hyperopt.optimize(
            [], CFG, train_until=1,
            starts=[Hyperparameters(beta0=0.2, beta1=0.6, tau=0.15)],
            objective_fn=self.quadratic_objective(Hyperparameters()),
            trace=trace,
        )
        assert len(trace.rows) == result.evaluations
        text = trace.to_delimited()
        assert text.startswith("evaluation,alpha0,alpha1,beta0,beta1,tau,objective\n")
        assert len(text.strip().split("\n")) == result.evaluations + 1

    def test_non_improving_search_flags_non_convergence(self):
        result = hyperopt.optimize(
            [], CFG, train_until=1,
            starts=[Hyperparameters()],
            objective_fn=lambda h: 0.0,
        )
        assert not result.converged
        assert result.objective == 0.0

    def test_requires_a_start(self):
        with pytest.raises(ValueError):
            hyperopt.optimize([], CFG, train_until=1, starts=[],
                              objective_fn=lambda h: 0.0)

    def test_default_starts(self):
        starts = hyperopt.default_starts()
        assert len(starts) == 3
        assert any(s.beta0 == pytest.approx(1.09861) for s in starts)

    def test_end_to_end_on_tiny_league(self):
        """The real predictive objective runs and returns finite results."""
        rng = np.random.default_rng(11)
        games = []
        for t in range(1, 5):
            for _ in range(40):
                w, b = rng.choice(6, 2, replace=False)
                p = model.probability_array(float(w) * 0.4, float(b) * 0.4, 1.0, H2)
                y = [1.0, 0.5, 0.0][int((rng.random() < p.cumsum()).argmax())]
                games.append(GameRecord(t, f"p{w}", f"p{b}", y))
        result = hyperopt.optimize(
            games, CFG, train_until=2,
            starts=[Hyperparameters(beta0=0.8, beta1=0.2, tau=0.2)],
        )
        assert math.isfinite(result.objective)
        assert result.best.tau > 0
