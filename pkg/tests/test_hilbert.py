"""Inner products, norms, and the simplex/logit algebra."""

import numpy as np
import pytest

from fenc import hilbert
from fenc.errors import FencError, ShapeError
from fenc.hilbert import (EUCLIDEAN, FunctionDataset, label_to_logits,
                          logit_inner_product, logit_space,
                          logit_to_probability, mc_inner_product, norm,
                          probability_to_logit, simplex_add, simplex_scale)


def _random_simplex(rng, d):
    raw = rng.exponential(size=d)
    return raw / raw.sum()


# -- mc_inner_product / norm --------------------------------------------------

def test_ip_constant_functions():
    for m in (1, 5, 50):
        f = np.ones((m, 1))
        assert mc_inner_product(f, f) == pytest.approx(1.0)


def test_ip_linear_hand_value():
    # f(x)=x, g(x)=x at {-1, 0, 1}: mean of (1, 0, 1) = 2/3
    x = np.array([-1.0, 0.0, 1.0])
    assert mc_inner_product(x, x) == pytest.approx(2.0 / 3.0)


def test_ip_odd_even_cancellation():
    x = np.array([-1.0, 0.0, 1.0])
    assert mc_inner_product(x, np.ones(3)) == pytest.approx(0.0)


def test_ip_shape_mismatch_and_empty():
    with pytest.raises(ShapeError):
        mc_inner_product(np.ones((3, 1)), np.ones((4, 1)))
    with pytest.raises(FencError):
        mc_inner_product(np.ones((0, 1)), np.ones((0, 1)))


def test_norm_zero_and_constant():
    assert norm(np.zeros((7, 1))) == 0.0
    assert norm(np.full((7, 1), -2.5)) == pytest.approx(2.5)


def test_logit_space_constant_rows_are_zero():
    vals = np.full((5, 2), 3.3)
    assert norm(vals, logit_space(2)) == 0.0


def test_bilinearity_and_symmetry():
    rng = np.random.default_rng(12)
    for space in (EUCLIDEAN, logit_space(3)):
        d = 3
        for _ in range(20):
            f = rng.normal(size=(30, d))
            g = rng.normal(size=(30, d))
            h = rng.normal(size=(30, d))
            a, b = rng.normal(size=2)
            left = mc_inner_product(a * f + b * h, g, space)
            right = (a * mc_inner_product(f, g, space)
                     + b * mc_inner_product(h, g, space))
            assert left == pytest.approx(right, abs=1e-10)
            assert mc_inner_product(f, g, space) == mc_inner_product(g, f, space)


def test_cauchy_schwarz():
    rng = np.random.default_rng(21)
    for space in (EUCLIDEAN, logit_space(4)):
        for _ in range(50):
            f = rng.normal(size=(25, 4))
            g = rng.normal(size=(25, 4))
            ip = abs(mc_inner_product(f, g, space))
            assert ip <= norm(f, space) * norm(g, space) + 1e-10


def test_mc_convergence_to_analytic_integral():
    # <x, x^2+1> under uniform samples on [-1, 1] tends to the domain
    # average (1/2) * integral of x(x^2+1) = 0; use f=x, g=x so the limit
    # is (1/2) * integral x^2 = 1/3, with O(1/sqrt(m)) error decay
    analytic = 1.0 / 3.0
    med_errs = []
    for m in (10**2, 10**4, 10**6):
        errs = []
        for seed in range(20):
            x = np.random.default_rng([seed, m]).uniform(-1, 1, m)
            errs.append(abs(mc_inner_product(x, x) - analytic))
        med_errs.append(np.median(errs))
    assert med_errs[0] > med_errs[1] > med_errs[2]


# -- logit algebra ------------------------------------------------------------

def test_logit_inner_product_hand_value():
    assert logit_inner_product([1.0, -1.0], [1.0, -1.0]) == pytest.approx(2.0)


def test_logit_inner_product_constant_vanishes():
    rng = np.random.default_rng(0)
    y = rng.normal(size=4)
    assert logit_inner_product(np.full(4, 2.7), y) == pytest.approx(0.0, abs=1e-12)


def test_logit_inner_product_shift_invariance_exact():
    # dyadic entries with D=4 (power of two) make the centering exact in
    # floating point, so shifted inputs give bit-identical results
    x = np.array([0.25, -1.5, 2.0, 0.75])
    y = np.array([1.25, 0.5, -0.25, 3.0])
    for c in (1.0, -2.0, 0.5, 16.0):
        assert logit_inner_product(x + c, y) == logit_inner_product(x, y)


def test_logit_inner_product_shift_invariance_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        d = int(rng.integers(2, 8))
        x = rng.normal(size=d)
        y = rng.normal(size=d)
        c = rng.normal()
        assert logit_inner_product(x + c, y) == pytest.approx(
            logit_inner_product(x, y), abs=1e-10)


def test_probability_logit_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = _random_simplex(rng, int(rng.integers(2, 9)))
        back = logit_to_probability(probability_to_logit(p))
        np.testing.assert_allclose(back, p, atol=1e-12)


def test_logit_to_probability_shift_invariant():
    z = np.array([2.0, 0.0, -1.0])
    np.testing.assert_allclose(logit_to_probability(z),
                               logit_to_probability(z + 5.0), atol=1e-15)


def test_logit_to_probability_hand_values():
    np.testing.assert_allclose(logit_to_probability([0.0, 0.0]), [0.5, 0.5])
    e2 = np.exp(2.0)
    np.testing.assert_allclose(logit_to_probability([2.0, 0.0]),
                               [e2 / (e2 + 1.0), 1.0 / (e2 + 1.0)])


def test_probability_to_logit_uniform_is_constant():
    z = probability_to_logit([0.5, 0.5])
    assert z[0] == pytest.approx(z[1])
    np.testing.assert_allclose(logit_to_probability(z), [0.5, 0.5])


def test_probability_to_logit_rejects_nonpositive():
    with pytest.raises(FencError):
        probability_to_logit([1.0, 0.0])


# -- simplex operations -------------------------------------------------------

def test_simplex_uniform_is_zero_vector():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = int(rng.integers(2, 7))
        x = _random_simplex(rng, d)
        np.testing.assert_allclose(simplex_add(x, np.full(d, 1.0 / d)), x,
                                   atol=1e-12)


def test_simplex_scale_zero_gives_uniform():
    rng = np.random.default_rng(4)
    x = _random_simplex(rng, 5)
    np.testing.assert_allclose(simplex_scale(0.0, x), np.full(5, 0.2),
                               atol=1e-15)


def test_simplex_add_fixed_point():
    np.testing.assert_allclose(simplex_add([0.5, 0.5], [0.5, 0.5]), [0.5, 0.5])


def test_simplex_rejects_invalid():
    with pytest.raises(FencError):
        simplex_add([0.7, 0.4], [0.5, 0.5])
    with pytest.raises(FencError):
        simplex_scale(2.0, [1.2, -0.2])


def test_homomorphism_through_logit_space():
    # perturbation/powering on the simplex = addition/scaling of logits,
    # up to a constant shift; inner products agree through either route
    rng = np.random.default_rng(8)
    for _ in range(200):
        d = int(rng.integers(2, 7))
        x = _random_simplex(rng, d)
        y = _random_simplex(rng, d)
        alpha = rng.normal()

        via_simplex = probability_to_logit(simplex_add(x, y))
        via_logits = probability_to_logit(x) + probability_to_logit(y)
        diff = via_simplex - via_logits
        assert np.ptp(diff) < 1e-10  # constant vector

        via_simplex_scale = probability_to_logit(simplex_scale(alpha, x))
        via_logit_scale = alpha * probability_to_logit(x)
        assert np.ptp(via_simplex_scale - via_logit_scale) < 1e-10

        ip_a = logit_inner_product(via_simplex, via_simplex_scale)
        ip_b = logit_inner_product(via_logits, via_logit_scale)
        assert ip_a == pytest.approx(ip_b, abs=1e-10)


# -- label encoding -----------------------------------------------------------

def test_label_to_logits_construction():
    np.testing.assert_array_equal(label_to_logits(0, 2, 2.0, -2.0), [2.0, -2.0])
    np.testing.assert_array_equal(label_to_logits(1, 3, 2.0, -2.0),
                                  [-2.0, 2.0, -2.0])


def test_label_to_logits_softmax_confidence():
    p = logit_to_probability(label_to_logits(0, 2, 2.0, -2.0))
    assert p[0] == pytest.approx(0.9820137900379085, abs=1e-12)
    assert p[1] == pytest.approx(0.017986209962091502, abs=1e-12)


def test_label_to_logits_errors():
    with pytest.raises(FencError):
        label_to_logits(3, 3, 2.0, -2.0)
    with pytest.raises(FencError):
        label_to_logits(0, 2, -2.0, 2.0)


# -- datasets -----------------------------------------------------------------

def test_dataset_validation():
    with pytest.raises(ShapeError):
        FunctionDataset(np.ones((3, 1)), np.ones((4, 1)))
    with pytest.raises(FencError):
        FunctionDataset(np.ones((2, 1)), np.array([[np.nan], [1.0]]))
    with pytest.raises(ShapeError):
        FunctionDataset(np.ones((2, 1)), np.ones((2, 3)), logit_space(2))


def test_dataset_promotes_1d_columns():
    ds = FunctionDataset(np.arange(4.0), np.arange(4.0))
    assert ds.inputs.shape == (4, 1)
    assert ds.outputs.shape == (4, 1)
