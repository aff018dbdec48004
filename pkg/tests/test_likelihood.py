import numpy as np
import pytest

from cmjp import (
    DegeneratePosteriorError,
    ModelParams,
    Path,
    alpha_mle,
    conditional_transition,
    holding_survival,
    joint_jump,
    mat_exp,
    observed_loglik,
    posterior_weights,
    regime_logliks,
    switching_posterior,
)
from cmjp.model import SufficientStats, from_vector, param_dim, path_stats, to_vector

from conftest import random_model


@pytest.fixture
def two_state_pair():
    """Two-state model with one slow and one fast symmetric regime."""
    return ModelParams(
        alpha=np.array([1.0, 0.0]),
        phi=np.array([[0.5, 0.5], [0.5, 0.5]]),
        Q=np.array([[[-1.0, 1.0], [1.0, -1.0]], [[-2.0, 2.0], [2.0, -2.0]]]),
    )


def one_jump_stats():
    """One sojourn of 1.0 in state 1, then a jump to state 2 (no residual)."""
    return SufficientStats(
        b=np.array([1.0, 0.0]),
        n=np.array([[0.0, 1.0], [0.0, 0.0]]),
        t_occ=np.array([1.0, 0.0]),
    )


class TestRegimeLogliks:
    def test_hand_case(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]),
            phi=np.array([[1.0], [1.0]]),
            Q=np.array([[[-1.0, 1.0], [0.5, -0.5]]]),
        )
        stats = SufficientStats(
            b=np.array([1.0, 0.0]),
            n=np.array([[0.0, 1.0], [1.0, 0.0]]),
            t_occ=np.array([1.3, 0.7]),
        )
        # (log 1 - 1*1.3) + (log 0.5 - 0.5*0.7) = -1.65 + log 0.5
        expected = -1.65 + np.log(0.5)
        assert abs(regime_logliks(stats, model)[0] - expected) < 1e-12

    def test_no_jumps(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]),
            phi=np.array([[1.0], [1.0]]),
            Q=np.array([[[-0.7, 0.7], [0.5, -0.5]]]),
        )
        stats = SufficientStats(b=np.array([1.0, 0.0]), n=np.zeros((2, 2)), t_occ=np.array([3.0, 0.0]))
        assert abs(regime_logliks(stats, model)[0] - (-0.7 * 3.0)) < 1e-12

    def test_impossible_transition_is_minus_inf(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]),
            phi=np.array([[1.0], [1.0]]),
            Q=np.array([[[0.0, 0.0], [0.5, -0.5]]]),
        )
        assert regime_logliks(one_jump_stats(), model)[0] == -np.inf


class TestSwitchingPosterior:
    def test_empty_history_returns_prior_row(self, two_state_pair):
        empty = SufficientStats(b=np.array([1.0, 0.0]), n=np.zeros((2, 2)), t_occ=np.zeros(2))
        out = switching_posterior(empty, (1, 0.0), two_state_pair)
        assert np.allclose(out, [0.5, 0.5], atol=1e-15)

    def test_identical_generators_keep_prior(self):
        model = ModelParams(
            alpha=np.array([0.5, 0.5]),
            phi=np.array([[0.3, 0.7], [0.8, 0.2]]),
            Q=np.array([[[-1.0, 1.0], [1.0, -1.0]]] * 2),
        )
        stats = one_jump_stats()
        out = switching_posterior(stats, (2, 0.4), model)
        assert np.allclose(out, [0.3, 0.7], atol=1e-12)

    def test_hand_case_after_one_jump(self, two_state_pair):
        # weights proportional to (0.5 * 1 * e^-1, 0.5 * 2 * e^-2)
        out = switching_posterior(one_jump_stats(), (2, 0.0), two_state_pair)
        w = np.array([np.exp(-1.0), 2.0 * np.exp(-2.0)])
        assert np.allclose(out, w / w.sum(), atol=1e-12)
        assert np.allclose(np.round(out, 5), [0.57612, 0.42388])

    def test_sums_to_one(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            model = random_model(rng, 3, 3)
            stats = SufficientStats(
                b=np.eye(3)[rng.integers(3)],
                n=np.floor(rng.uniform(0, 3, (3, 3))) * (1 - np.eye(3)),
                t_occ=rng.uniform(0.1, 4.0, 3),
            )
            out = switching_posterior(stats, (int(rng.integers(1, 4)), float(rng.uniform(0, 2))), model)
            assert abs(out.sum() - 1.0) < 1e-12
            assert out.min() >= 0

    def test_all_zero_weight_raises(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]),
            phi=np.array([[0.5, 0.5], [0.5, 0.5]]),
            Q=np.array([[[0.0, 0.0], [0.5, -0.5]]] * 2),
        )
        with pytest.raises(DegeneratePosteriorError):
            switching_posterior(one_jump_stats(), (2, 0.0), model)

    def test_negative_residual_rejected(self, two_state_pair):
        with pytest.raises(ValueError):
            switching_posterior(one_jump_stats(), (2, -0.1), two_state_pair)


class TestPosteriorWeights:
    def test_single_regime(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]), phi=np.array([[1.0], [1.0]]), Q=np.array([[[-1.0, 1.0], [0.5, -0.5]]])
        )
        path = Path(id=0, times=[0.0, 1.0], states=[1, 2], horizon=1.5)
        assert np.array_equal(posterior_weights(path_stats(path, 2), model), [1.0])

    def test_censored_tail_included(self, two_state_pair):
        # prefix as in the hand case, then 0.5 censored time in state 2:
        # weights proportional to (e^-1 * e^-0.5, 2 e^-2 * e^-1)
        path = Path(id=0, times=[0.0, 1.0], states=[1, 2], horizon=1.5)
        out = posterior_weights(path_stats(path, 2), two_state_pair)
        w = np.array([np.exp(-1.5), 2.0 * np.exp(-3.0)])
        assert np.allclose(out, w / w.sum(), atol=1e-12)
        assert np.allclose(np.round(out, 5), [0.69144, 0.30856])

    def test_matches_switching_posterior_at_horizon(self, two_state_pair):
        path = Path(id=0, times=[0.0, 1.0], states=[1, 2], horizon=1.5)
        full = posterior_weights(path_stats(path, 2), two_state_pair)
        prefix = one_jump_stats()
        assert np.allclose(full, switching_posterior(prefix, (2, 0.5), two_state_pair), atol=1e-12)


class TestObservedLoglik:
    def test_single_regime_additive_form(self):
        model = ModelParams(
            alpha=np.array([0.4, 0.6]), phi=np.array([[1.0], [1.0]]), Q=np.array([[[-1.0, 1.0], [0.5, -0.5]]])
        )
        path = Path(id=0, times=[0.0, 1.0], states=[1, 2], horizon=1.5)
        st = path_stats(path, 2)
        expected = np.log(0.4) + regime_logliks(st, model)[0]
        assert abs(observed_loglik([st], model) - expected) < 1e-12

    def test_duplicate_path_doubles_value(self, two_state_pair):
        path = Path(id=0, times=[0.0, 1.0], states=[1, 2], horizon=1.5)
        st = path_stats(path, 2)
        one = observed_loglik([st], two_state_pair)
        two = observed_loglik([st, st], two_state_pair)
        assert abs(two - 2.0 * one) < 1e-12

    def test_hand_value(self, two_state_pair):
        # log alpha_1 + log(0.5 e^-1.5 + 0.5 * 2 e^-3) with alpha_1 = 1
        path = Path(id=0, times=[0.0, 1.0], states=[1, 2], horizon=1.5)
        st = path_stats(path, 2)
        expected = np.log(0.5 * np.exp(-1.5) + np.exp(-3.0))
        value = observed_loglik([st], two_state_pair)
        assert abs(value - expected) < 1e-12
        assert abs(value - (-1.8241660451586303)) < 1e-12

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(9)
        model = random_model(rng, 3, 3)
        from cmjp import simulate_paths

        stats = [path_stats(s.path, 3) for s in simulate_paths(model, 10, 5.0, seed=2)]
        base = observed_loglik(stats, model)
        for order in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
            assert abs(observed_loglik(stats, model.with_regime_order(order)) - base) < 1e-9


class TestScoreIdentity:
    def test_fd_gradient_equals_weighted_complete_score(self):
        # central finite differences of the observed log-likelihood agree
        # with the posterior-weighted complete-data score in free coordinates
        from cmjp import simulate_paths
        from cmjp.inference import observed_score

        rng = np.random.default_rng(10)
        for trial in range(5):
            model = random_model(rng, 2, 2)
            stats = [path_stats(s.path, 2) for s in simulate_paths(model, 8, 4.0, seed=100 + trial)]
            theta = random_model(rng, 2, 2)
            analytic = observed_score(stats, theta)
            vec = to_vector(theta)
            h = 1e-6
            for i in range(param_dim(2, 2)):
                vp, vm = vec.copy(), vec.copy()
                vp[i] += h
                vm[i] -= h
                fd = (
                    observed_loglik(stats, from_vector(vp, 2, 2, theta.alpha))
                    - observed_loglik(stats, from_vector(vm, 2, 2, theta.alpha))
                ) / (2 * h)
                assert abs(fd - analytic[i]) <= 1e-5 * max(1.0, abs(fd))


class TestAlphaMle:
    def test_all_same_start(self):
        stats = [path_stats(Path(id=k, times=[0.0], states=[1], horizon=1.0), 3) for k in range(4)]
        assert np.array_equal(alpha_mle(stats), [1.0, 0.0, 0.0])

    def test_mixed_starts(self):
        starts = [1, 2, 2, 3]
        stats = [path_stats(Path(id=k, times=[0.0], states=[s], horizon=1.0), 3) for k, s in enumerate(starts)]
        assert np.array_equal(alpha_mle(stats), [0.25, 0.5, 0.25])

    def test_monte_carlo_consistency(self, benchmark):
        from cmjp import simulate_paths

        K = 4000
        stats = [path_stats(s.path, 3) for s in simulate_paths(benchmark, K, 1.0, seed=3)]
        a_hat = alpha_mle(stats)
        assert np.abs(a_hat - 1.0 / 3.0).max() < 3 * np.sqrt(2.0 / (9 * K))


class TestTransitionLaws:
    def test_zero_duration_is_indicator(self, two_state_pair):
        out = conditional_transition(np.array([0.4, 0.6]), 2, 0.0, two_state_pair)
        assert np.array_equal(out, [0.0, 1.0])

    def test_single_regime_is_markov_row(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]), phi=np.array([[1.0], [1.0]]), Q=np.array([[[-1.0, 1.0], [0.5, -0.5]]])
        )
        out = conditional_transition(np.array([1.0]), 1, 2.0, model)
        assert np.allclose(out, mat_exp(model.Q[0], 2.0)[0], atol=1e-14)

    def test_posterior_mixture_of_rows(self, two_state_pair):
        out = conditional_transition(np.array([0.5, 0.5]), 1, 1.0, two_state_pair)
        expected = 0.5 * mat_exp(two_state_pair.Q[0], 1.0)[0] + 0.5 * mat_exp(two_state_pair.Q[1], 1.0)[0]
        assert np.allclose(out, expected, atol=1e-14)

    def test_is_probability_vector(self):
        rng = np.random.default_rng(11)
        model = random_model(rng, 4, 3)
        post = rng.dirichlet(np.ones(3))
        out = conditional_transition(post, 2, 3.0, model)
        assert abs(out.sum() - 1.0) < 1e-10 and out.min() >= 0

    def test_equal_generators_ignore_posterior(self):
        model = ModelParams(
            alpha=np.array([0.5, 0.5]),
            phi=np.array([[0.3, 0.7], [0.8, 0.2]]),
            Q=np.array([[[-1.0, 1.0], [0.5, -0.5]]] * 2),
        )
        a = conditional_transition(np.array([0.9, 0.1]), 1, 2.0, model)
        b = conditional_transition(np.array([0.1, 0.9]), 1, 2.0, model)
        assert np.allclose(a, b, atol=1e-14)


class TestHoldingAndJointLaws:
    def test_survival_at_zero(self, two_state_pair):
        assert holding_survival(np.array([0.5, 0.5]), 1, 0.0, two_state_pair) == 1.0

    def test_survival_single_regime(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]), phi=np.array([[1.0], [1.0]]), Q=np.array([[[-1.5, 1.5], [0.5, -0.5]]])
        )
        assert abs(holding_survival(np.array([1.0]), 1, 2.0, model) - np.exp(-3.0)) < 1e-14

    def test_survival_hand_value(self, two_state_pair):
        # 0.3 e^-1 + 0.7 e^-2 with exit rates (1, 2) in state 1
        out = holding_survival(np.array([0.3, 0.7]), 1, 1.0, two_state_pair)
        assert abs(out - 0.20509853061706157) < 1e-12
        assert round(out, 5) == 0.20510

    def test_negative_duration_rejected(self, two_state_pair):
        with pytest.raises(ValueError):
            holding_survival(np.array([0.5, 0.5]), 1, -1.0, two_state_pair)

    def test_joint_jump_sums_to_one_in_the_limit(self):
        rng = np.random.default_rng(12)
        model = random_model(rng, 3, 2)
        post = np.array([0.25, 0.75])
        total = sum(joint_jump(post, 1, 1e6, y, model) for y in (2, 3))
        assert abs(total - 1.0) < 1e-9

    def test_joint_jump_single_regime(self):
        model = ModelParams(
            alpha=np.array([1.0, 0.0]), phi=np.array([[1.0], [1.0]]), Q=np.array([[[-2.0, 2.0], [0.5, -0.5]]])
        )
        out = joint_jump(np.array([1.0]), 1, 1.0, 2, model)
        assert abs(out - (1.0 - np.exp(-2.0))) < 1e-14

    def test_joint_jump_not_a_product_law(self, two_state_pair):
        # the sojourn length and the landing state are dependent when the
        # regimes disagree, so P{jump <= du, land y} != P{jump <= du} P{land y}
        model = ModelParams(
            alpha=np.array([1.0, 0.0, 0.0]),
            phi=np.array([[0.5, 0.5]] * 3),
            Q=np.array(
                [
                    [[-1.0, 0.9, 0.1], [0.5, -1.0, 0.5], [0.5, 0.5, -1.0]],
                    [[-5.0, 0.5, 4.5], [0.5, -1.0, 0.5], [0.5, 0.5, -1.0]],
                ]
            ),
        )
        post = np.array([0.5, 0.5])
        du = 0.5
        joint = joint_jump(post, 1, du, 2, model)
        jump_prob = 1.0 - holding_survival(post, 1, du, model)
        marginal_land = sum(
            post[m] * model.Q[m, 0, 1] / (-model.Q[m, 0, 0]) for m in range(2)
        )
        assert abs(joint - jump_prob * marginal_land) > 1e-3

    def test_joint_jump_same_state_rejected(self, two_state_pair):
        with pytest.raises(ValueError):
            joint_jump(np.array([0.5, 0.5]), 1, 1.0, 1, two_state_pair)
