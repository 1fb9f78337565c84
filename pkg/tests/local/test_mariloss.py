import math

import numpy as np
import pytest

from forgetmari.exceptions import DomainError, ShapeMismatch, SupportMismatch
from forgetmari.gradcheck import max_relative_error, numerical_gradient
from forgetmari.langmodel import PositionMarginals, SequenceBatch
from forgetmari.mariloss import (
    alpha_for,
    alt_marginal_kl,
    mari_gradient,
    mari_loss_and_gradient,
    mari_pooled,
    mari_tokenwise,
    mari_value,
    marginal_information,
)
from tests.local.test_langmodel import GRAD_TOL, random_instance

JS_HALF_POINT = 0.215762


def pm(rows, tag="retain"):
    return PositionMarginals(np.array(rows, dtype=float), tag)


def random_pm(gen, T, V, tag="retain"):
    return PositionMarginals(gen.dirichlet(np.ones(V), size=T), tag)


class TestAlpha:
    def test_sizes(self):
        assert alpha_for(90, 10) == 0.9
        assert alpha_for(1, 1) == 0.5

    def test_empty(self):
        with pytest.raises(DomainError):
            alpha_for(0, 3)


class TestTokenwise:
    def test_identical_marginals(self, gen):
        pr = random_pm(gen, 3, 4)
        est = mari_tokenwise(pr, pm(pr.per_t, "unlearn"), 0.5)
        assert est.value == 0.0
        assert est.per_position_js == (0.0, 0.0, 0.0)

    def test_single_position(self):
        est = mari_tokenwise(pm([[1, 0]]), pm([[0, 1]], "unlearn"), 0.5)
        assert est.value == pytest.approx(JS_HALF_POINT, abs=1e-6)
        assert est.mode == "token_wise" and est.alpha == 0.5

    def test_mean_over_positions(self):
        est = mari_tokenwise(pm([[1, 0], [0.5, 0.5]]), pm([[0, 1], [0.5, 0.5]], "unlearn"), 0.5)
        assert est.per_position_js[1] == 0.0
        assert est.value == pytest.approx(JS_HALF_POINT / 2, abs=1e-6)
        assert est.value == pytest.approx(math.fsum(est.per_position_js) / 2, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mari_tokenwise(pm([[1, 0]]), pm([[1, 0], [0, 1]]), 0.5)

    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_alpha_domain(self, alpha):
        with pytest.raises(DomainError):
            mari_tokenwise(pm([[1, 0]]), pm([[0, 1]]), alpha)


class TestPooled:
    def test_single_position_equals_tokenwise(self, gen):
        pr, pu = random_pm(gen, 1, 5), random_pm(gen, 1, 5, "unlearn")
        assert mari_pooled(pr, pu, 0.3).value == mari_tokenwise(pr, pu, 0.3).value

    def test_swap_example(self):
        pr = pm([[1, 0], [0, 1]])
        pu = pm([[0, 1], [1, 0]], "unlearn")
        assert mari_pooled(pr, pu, 0.5).value == 0.0
        assert mari_tokenwise(pr, pu, 0.5).value == pytest.approx(JS_HALF_POINT, abs=1e-6)

    def test_lower_bounds_tokenwise(self, gen):
        for _ in range(1000):
            T, V = int(gen.integers(1, 7)), int(gen.integers(2, 9))
            pr, pu = random_pm(gen, T, V), random_pm(gen, T, V, "unlearn")
            alpha = float(gen.uniform(0.01, 0.99))
            assert mari_pooled(pr, pu, alpha).value <= mari_tokenwise(pr, pu, alpha).value + 1e-9

    def test_dispatch(self, gen):
        pr, pu = random_pm(gen, 2, 3), random_pm(gen, 2, 3, "unlearn")
        assert marginal_information(pr, pu, 0.4, "pooled").mode == "pooled"
        assert marginal_information(pr, pu, 0.4).mode == "token_wise"
        with pytest.raises(DomainError):
            marginal_information(pr, pu, 0.4, "hetero")


class TestAlphaSensitivity:
    def test_vanishes_as_alpha_grows(self, gen):
        for _ in range(50):
            pr, pu = random_pm(gen, 3, 4), random_pm(gen, 3, 4, "unlearn")
            for estimator in (mari_tokenwise, mari_pooled):
                values = [estimator(pr, pu, a).value for a in np.linspace(0.05, 0.999, 40)]
                assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
                assert values[-1] < 1e-3


class TestAltMarginalKL:
    def test_identical(self, gen):
        pr = random_pm(gen, 2, 3)
        assert alt_marginal_kl(pr, pm(pr.per_t, "unlearn"), 0.5) == 0.0

    def test_frozen_target(self):
        pr = pm([[0.75, 0.25]])
        pu = pm([[0.25, 0.75]], "unlearn")
        # p^d = (0.5, 0.5) scored against the frozen p^r
        value = alt_marginal_kl(pr, pu, 0.5, frozen_pr=pm([[0.75, 0.25]]))
        assert value == pytest.approx(0.143841, abs=1e-6)

    def test_support_mismatch(self):
        with pytest.raises(SupportMismatch):
            alt_marginal_kl(pm([[0.5, 0.5]]), pm([[0.5, 0.5]]), 0.5, frozen_pr=pm([[1.0, 0.0]]))


class TestGradient:
    def test_identical_batches(self, tiny_ckpt, tiny_batches):
        batch = tiny_batches[0]
        for mode in ("token_wise", "pooled"):
            estimate, grad = mari_loss_and_gradient(tiny_ckpt, batch, batch, 0.5, mode)
            assert estimate.value == pytest.approx(0.0, abs=1e-15)
            assert np.allclose(grad, 0.0, atol=1e-12)

    @pytest.mark.parametrize("mode", ["token_wise", "pooled"])
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed, mode):
        ckpt, retain = random_instance(seed)
        gen = np.random.default_rng(seed + 7)
        unlearn = SequenceBatch.from_ids(
            [list(gen.integers(2, ckpt.arch.vocab_size, size=3)) for _ in range(2)], retain.T
        )
        alpha = alpha_for(retain.size, unlearn.size)
        analytic = mari_gradient(ckpt, retain, unlearn, alpha, mode)
        numeric = numerical_gradient(lambda c: mari_value(c, retain, unlearn, alpha, mode), ckpt)
        assert max_relative_error(analytic, numeric) <= GRAD_TOL

    def test_permutation_invariant(self, tiny_ckpt, tiny_batches):
        retain, unlearn = tiny_batches
        a = mari_value(tiny_ckpt, retain, unlearn, 0.4, "token_wise")
        b = mari_value(tiny_ckpt, retain.subset([1, 0]), unlearn.subset([2, 0, 1]), 0.4)
        assert a == pytest.approx(b, abs=1e-15)
