import math

import numpy as np
import pytest

from signtrack.losses import (
    PROB_CEIL,
    PROB_FLOOR,
    clamp_probability,
    cross_entropy,
    focal_loss,
    focal_loss_exp,
    focal_loss_exp_grad,
)

CROSSOVER_P = 1.0 - math.log(2.0)


class TestCrossEntropy:
    def test_half(self):
        assert cross_entropy(0.5) == pytest.approx(0.6931471805599453, abs=1e-15)

    def test_one_is_zero(self):
        assert cross_entropy(1.0) == 0.0

    def test_vectorized_shape(self):
        arr = np.array([[0.25, 0.5], [0.75, 1.0]])
        out = cross_entropy(arr)
        assert out.shape == (2, 2)
        assert out[0, 1] == pytest.approx(math.log(2.0))

    def test_rejects_out_of_range(self):
        for bad in (0.0, -0.1, 1.0001, float("nan")):
            with pytest.raises(ValueError):
                cross_entropy(bad)


class TestFocalLoss:
    def test_half_gamma_two(self):
        assert focal_loss(0.5, 2.0) == pytest.approx(0.17328679513998632, abs=1e-15)

    def test_gamma_zero_recovers_cross_entropy(self):
        ps = np.linspace(0.01, 1.0, 200)
        np.testing.assert_allclose(focal_loss(ps, 0.0), cross_entropy(ps), rtol=1e-14)

    def test_monotone_decreasing_in_gamma(self):
        p = 0.3
        losses = [focal_loss(p, g) for g in (0.0, 0.5, 1.0, 2.0, 5.0)]
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_rejects_negative_gamma(self):
        with pytest.raises(ValueError):
            focal_loss(0.5, -1.0)


class TestAdaptiveFocalLoss:
    def test_half(self):
        assert focal_loss_exp(0.5) == pytest.approx(0.22106037584711935, abs=1e-15)

    def test_exponent_at_half_is_sqrt_e(self):
        # The adaptive exponent at p = 0.5 evaluates to e^0.5.
        p = 0.5
        expected = -((1.0 - p) ** math.exp(1.0 - p)) * math.log(p)
        assert math.exp(0.5) == pytest.approx(1.6487212707001282, abs=1e-15)
        assert focal_loss_exp(p) == pytest.approx(expected, abs=1e-16)

    def test_crossover_point(self):
        # At p = 1 - ln 2 the adaptive exponent equals 2 exactly, so the
        # two focal curves agree there to machine precision.
        assert abs(focal_loss_exp(CROSSOVER_P) - focal_loss(CROSSOVER_P, 2.0)) < 1e-12
        assert focal_loss_exp(CROSSOVER_P) == pytest.approx(0.5676009744726854, abs=1e-12)

    def test_ordering_below_crossover(self):
        ps = np.linspace(0.01, CROSSOVER_P - 1e-6, 300)
        fle = focal_loss_exp(ps)
        fl2 = focal_loss(ps, 2.0)
        assert np.all(fle < fl2)

    def test_ordering_above_crossover(self):
        ps = np.linspace(CROSSOVER_P + 1e-6, 0.999, 300)
        fle = focal_loss_exp(ps)
        fl2 = focal_loss(ps, 2.0)
        assert np.all(fl2 < fle)

    def test_never_exceeds_cross_entropy(self):
        ps = np.linspace(1e-6, 1.0, 1000)
        assert np.all(focal_loss_exp(ps) <= cross_entropy(ps) + 1e-15)

    def test_zero_at_one(self):
        assert focal_loss_exp(1.0) == 0.0

    def test_strictly_decreasing(self):
        ps = np.linspace(1e-4, 1.0, 2000)
        vals = focal_loss_exp(ps)
        assert np.all(np.diff(vals) < 0.0)


class TestAdaptiveFocalGrad:
    def test_matches_central_difference(self):
        h = 1e-7
        for p in np.linspace(0.01, 0.99, 97):
            numeric = (focal_loss_exp(p + h) - focal_loss_exp(p - h)) / (2 * h)
            analytic = focal_loss_exp_grad(p)
            assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-8)

    def test_negative_in_interior(self):
        ps = np.linspace(0.01, 0.999, 500)
        assert np.all(focal_loss_exp_grad(ps) < 0.0)

    def test_zero_limit_at_one(self):
        assert focal_loss_exp_grad(1.0) == 0.0

    def test_vectorized_matches_scalar(self):
        ps = np.array([0.1, 0.4, 0.7, 0.95])
        vec = focal_loss_exp_grad(ps)
        for i, p in enumerate(ps):
            assert vec[i] == pytest.approx(focal_loss_exp_grad(float(p)), rel=1e-14)


class TestClampProbability:
    def test_bounds(self):
        assert clamp_probability(0.0) == PROB_FLOOR
        assert clamp_probability(1.0) == PROB_CEIL
        assert clamp_probability(-5.0) == PROB_FLOOR
        assert clamp_probability(2.0) == PROB_CEIL

    def test_interior_untouched(self):
        assert clamp_probability(0.5) == 0.5

    def test_array(self):
        out = clamp_probability(np.array([-1.0, 0.5, 3.0]))
        np.testing.assert_allclose(out, [PROB_FLOOR, 0.5, PROB_CEIL])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            clamp_probability(float("nan"))

    def test_composes_with_losses(self):
        # The clamp guarantees a finite loss even for a saturated sigmoid.
        assert math.isfinite(cross_entropy(clamp_probability(0.0)))
        assert math.isfinite(focal_loss_exp(clamp_probability(1.0)))
