import math

import numpy as np
import pytest

from forgetmari.exceptions import DomainError, LengthMismatch, SupportMismatch
from forgetmari.infomath import (
    TokenDistribution,
    binary_entropy,
    binary_entropy_inv,
    entropy,
    js_divergence,
    kl_divergence,
    kl_pointwise_coeff,
    mix,
    to_bits,
    tv_distance,
    weighted_js_divergence,
)

LN2 = math.log(2)
N_RANDOM = 10_000


def random_pairs(gen, n=N_RANDOM, max_v=8):
    """Random distribution pairs, some sparse (exact zeros)."""
    for _ in range(n):
        v = int(gen.integers(2, max_v + 1))
        p, q = gen.dirichlet(np.ones(v)), gen.dirichlet(np.ones(v))
        if gen.random() < 0.2:
            p[gen.integers(v)] = 0.0
            p /= p.sum()
        yield p, q


class TestTokenDistribution:
    def test_valid(self):
        d = TokenDistribution.from_probs([0.25, 0.75], size=2)
        assert len(d) == 2
        assert np.array_equal(np.asarray(d), [0.25, 0.75])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            TokenDistribution.from_probs([1.5, -0.5])

    def test_rejects_bad_sum(self):
        with pytest.raises(DomainError):
            TokenDistribution.from_probs([0.5, 0.4])

    def test_rejects_wrong_size(self):
        with pytest.raises(LengthMismatch):
            TokenDistribution.from_probs([0.5, 0.5], size=3)

    def test_uniform(self):
        assert entropy(TokenDistribution.uniform(4)) == pytest.approx(math.log(4))

    def test_is_read_only(self):
        d = TokenDistribution.from_probs([0.5, 0.5])
        with pytest.raises(ValueError):
            d.probs[0] = 1.0


class TestKL:
    def test_identical(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_point_mass_vs_uniform(self):
        assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(LN2, abs=1e-12)

    def test_derived_value(self):
        assert kl_divergence([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.143841, abs=1e-6)

    def test_support_mismatch(self):
        with pytest.raises(SupportMismatch):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])

    def test_batched_rows(self):
        p = np.array([[0.5, 0.5], [1.0, 0.0]])
        q = np.array([[0.75, 0.25], [0.5, 0.5]])
        out = kl_divergence(p, q)
        assert out.shape == (2,)
        assert out[1] == pytest.approx(LN2)


class TestJS:
    def test_identical(self):
        assert js_divergence([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_disjoint_point_masses(self):
        assert js_divergence([1, 0], [0, 1]) == pytest.approx(LN2, abs=1e-12)

    def test_derived_value(self):
        assert js_divergence([0.5, 0.5], [1, 0]) == pytest.approx(0.215762, abs=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            js_divergence([1.0], [0.5, 0.5])

    def test_symmetric_and_bounded(self, gen):
        for p, q in random_pairs(gen):
            a, b = js_divergence(p, q), js_divergence(q, p)
            assert a == b
            assert 0.0 <= a <= LN2 + 1e-12

    def test_zero_iff_equal(self, gen):
        for p, q in random_pairs(gen, n=200):
            assert js_divergence(p, p) == 0.0
            if not np.allclose(p, q):
                assert js_divergence(p, q) > 0.0

    def test_weighted_equals_js_at_half(self):
        assert weighted_js_divergence([0.5, 0.5], [1, 0], 0.5) == js_divergence([0.5, 0.5], [1, 0])

    def test_weighted_rejects_bad_weight(self):
        with pytest.raises(DomainError):
            weighted_js_divergence([0.5, 0.5], [1, 0], 1.0)

    def test_weighted_bounded_by_prior_entropy(self, gen):
        for p, q in random_pairs(gen, n=500):
            w = float(gen.uniform(0.05, 0.95))
            assert weighted_js_divergence(p, q, w) <= binary_entropy(w) + 1e-12


class TestTV:
    def test_values(self):
        assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert tv_distance([1, 0], [0, 1]) == 1.0
        assert tv_distance([0.5, 0.5], [1, 0]) == 0.5

    def test_controlled_by_js(self, gen):
        for p, q in random_pairs(gen):
            assert tv_distance(p, q) <= math.sqrt(2.0 * js_divergence(p, q)) + 1e-12

    def test_exact_scaling_under_mixture(self, gen):
        for pr, pu in random_pairs(gen):
            alpha = float(gen.uniform(0.01, 0.99))
            scaled = tv_distance(mix(pr, pu, alpha), pr) / (1.0 - alpha)
            assert tv_distance(pu, pr) == pytest.approx(scaled, abs=1e-12)


class TestBinaryEntropy:
    @pytest.mark.parametrize(
        "p, expected", [(0.0, 0.0), (1.0, 0.0), (0.5, LN2), (0.2, 0.500402)]
    )
    def test_values(self, p, expected):
        assert binary_entropy(p) == pytest.approx(expected, abs=1e-6)

    def test_symmetric(self):
        assert binary_entropy(0.3) == pytest.approx(binary_entropy(0.7), abs=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 1.1])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            binary_entropy(p)

    def test_inverse_values(self):
        assert binary_entropy_inv(0.0) == 0.0
        assert binary_entropy_inv(LN2) == 0.5
        assert binary_entropy_inv(0.5) == pytest.approx(0.1997, abs=1e-4)

    def test_inverse_clamps_near_boundary(self):
        assert binary_entropy_inv(LN2 + 1e-13) == 0.5
        assert binary_entropy_inv(-1e-13) == 0.0

    @pytest.mark.parametrize("h", [-0.01, 0.7])
    def test_inverse_domain(self, h):
        with pytest.raises(DomainError):
            binary_entropy_inv(h)

    def test_round_trip(self):
        for p in np.linspace(0.0, 0.5, 201):
            assert binary_entropy_inv(binary_entropy(p)) == pytest.approx(p, abs=1e-9)


class TestPointwiseKL:
    def test_values(self):
        assert kl_pointwise_coeff(2.0) == pytest.approx(2 * LN2, abs=1e-6)
        assert kl_pointwise_coeff(math.e) == pytest.approx(math.e / (math.e - 1), abs=1e-6)
        assert kl_pointwise_coeff(1.001) == pytest.approx(1.0, abs=1e-3)

    def test_increasing(self):
        values = [kl_pointwise_coeff(m) for m in np.linspace(1.01, 20, 100)]
        assert all(a < b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("M", [1.0, 0.5])
    def test_domain(self, M):
        with pytest.raises(DomainError):
            kl_pointwise_coeff(M)

    def test_coordinate_bound(self, gen):
        checked = 0
        for p, q in random_pairs(gen):
            if np.any(p == 0):
                continue
            M = float(max((p / q).max(), (q / p).max()))
            if M <= 1.0:
                continue
            coeff = kl_pointwise_coeff(M)
            for x in np.nonzero(p >= q)[0]:
                assert p[x] * math.log(p[x] / q[x]) <= coeff * (p[x] - q[x]) + 1e-12
                checked += 1
        assert checked > 0


class TestMix:
    def test_identity(self):
        p = np.array([0.1, 0.2, 0.7])
        assert np.allclose(mix(p, p, 0.3), p)

    def test_weights_first_argument(self):
        assert np.allclose(mix([1, 0], [0, 1], 0.5), [0.5, 0.5])
        assert np.allclose(mix([1, 0], [0, 1], 0.75), [0.75, 0.25])

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5])
    def test_alpha_domain(self, alpha):
        with pytest.raises(DomainError):
            mix([1, 0], [0, 1], alpha)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mix([1, 0], [0, 0, 1], 0.5)


def test_bits_conversion():
    assert to_bits(LN2) == pytest.approx(1.0)
