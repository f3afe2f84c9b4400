"""Span/hull projection oracles and transfer classification."""

import numpy as np
import pytest

from fenc import geometry, tasks
from fenc.errors import FencError
from fenc.geometry import (classify_transfer, hull_projection,
                           project_to_simplex, span_projection)
from fenc.hilbert import FunctionDataset, norm


def _poly_dataset(coeffs, x):
    return FunctionDataset(x, tasks.poly_eval(coeffs, x))


def _random_sources(rng, n, x, degree=2):
    return [_poly_dataset(rng.uniform(-3, 3, degree + 1), x) for _ in range(n)]


# -- simplex projection -------------------------------------------------------

def test_project_to_simplex_basics():
    np.testing.assert_allclose(project_to_simplex([0.2, 0.3, 0.5]),
                               [0.2, 0.3, 0.5])
    np.testing.assert_allclose(project_to_simplex([5.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(project_to_simplex([-1.0, -2.0]), [1.0, 0.0])


def test_project_to_simplex_properties():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.normal(scale=3.0, size=int(rng.integers(1, 12)))
        w = project_to_simplex(v)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        # projection optimality vs random simplex points
        for _ in range(10):
            other = rng.dirichlet(np.ones(v.size))
            assert (np.linalg.norm(v - w)
                    <= np.linalg.norm(v - other) + 1e-12)


# -- span projection ----------------------------------------------------------

def test_span_recovers_single_source():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (200, 1))
    sources = _random_sources(rng, 3, x)
    report = span_projection(sources[0], sources)
    np.testing.assert_allclose(report.weights, [1.0, 0.0, 0.0], atol=1e-8)
    assert report.residual_norm < 1e-8


def test_span_exact_combination():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, (300, 1))
    s1 = _poly_dataset([1.0, 0.5, -2.0], x)
    s2 = _poly_dataset([0.0, 1.0, 1.0], x)
    target = FunctionDataset(x, 2.0 * s1.outputs - 3.0 * s2.outputs)
    report = span_projection(target, [s1, s2])
    np.testing.assert_allclose(report.weights, [2.0, -3.0], atol=1e-8)
    assert report.residual_norm < 1e-8


def test_span_orthogonal_target_full_residual():
    # build a target orthogonal to the sources by Gram-Schmidt on samples
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, (500, 1))
    sources = _random_sources(rng, 2, x)
    raw = rng.normal(size=(500, 1))
    basis = np.stack([s.outputs[:, 0] for s in sources], axis=1)
    q, _ = np.linalg.qr(basis)
    resid = raw[:, 0] - q @ (q.T @ raw[:, 0])
    target = FunctionDataset(x, resid[:, None])
    report = span_projection(target, sources)
    assert report.relative_residual == pytest.approx(1.0, abs=1e-6)


def test_span_requires_shared_inputs():
    rng = np.random.default_rng(4)
    x1 = rng.uniform(-1, 1, (50, 1))
    x2 = rng.uniform(-1, 1, (50, 1))
    with pytest.raises(FencError):
        span_projection(_poly_dataset([1, 1, 1], x1),
                        [_poly_dataset([1, 0, 0], x2)])


def test_span_idempotent():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, (400, 1))
    sources = _random_sources(rng, 3, x)
    target = _poly_dataset([2.0, -1.0, 0.5, 1.0], x, )
    first = span_projection(target, sources)
    approx = sum(w * s.outputs for w, s in zip(first.weights, sources))
    second = span_projection(FunctionDataset(x, approx), sources)
    assert second.residual_norm < 1e-10


# -- hull projection ----------------------------------------------------------

def _hull_grid_oracle(target, sources, step=1e-3):
    """Exhaustive simplex grid search for n <= 3 sources.

    Expands the squared error to t2 - 2 w.v + w'Gw with inner products
    computed directly from the samples, then scans the weight grid.
    """
    m = target.outputs.shape[0]
    cols = np.stack([s.outputs[:, 0] for s in sources], axis=1)
    t = target.outputs[:, 0]
    gram = cols.T @ cols / m
    v = cols.T @ t / m
    t2 = t @ t / m
    grid = np.arange(0.0, 1.0 + step / 2, step)
    if len(sources) == 2:
        weights = np.stack([grid, 1.0 - grid], axis=1)
    elif len(sources) == 3:
        a, b = np.meshgrid(grid, grid, indexing="ij")
        keep = a + b <= 1.0 + step / 2
        weights = np.stack([a[keep], b[keep], 1.0 - a[keep] - b[keep]], axis=1)
    else:
        raise ValueError("oracle supports n in {2, 3}")
    objective = (t2 - 2.0 * weights @ v
                 + np.einsum("ni,ij,nj->n", weights, gram, weights))
    return float(np.sqrt(max(np.min(objective), 0.0)))


def test_hull_recovers_interior_combination():
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, (300, 1))
    s1 = _poly_dataset([2.0, 1.0, 0.0], x)
    s2 = _poly_dataset([-1.0, 0.0, 1.0], x)
    target = FunctionDataset(x, 0.5 * s1.outputs + 0.5 * s2.outputs)
    report = hull_projection(target, [s1, s2])
    np.testing.assert_allclose(report.weights, [0.5, 0.5], atol=1e-6)
    assert report.residual_norm < 1e-6


def test_hull_out_of_hull_lands_on_face():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, (300, 1))
    s1 = _poly_dataset([1.0, 2.0, 0.5], x)
    s2 = _poly_dataset([0.5, -1.0, 1.0], x)
    target = FunctionDataset(x, 2.0 * s1.outputs - s2.outputs)
    hull = hull_projection(target, [s1, s2])
    span = span_projection(target, [s1, s2])
    assert hull.residual_norm > span.residual_norm
    on_face = np.any(np.isclose(hull.weights, 0.0, atol=1e-6)
                     | np.isclose(hull.weights, 1.0, atol=1e-6))
    assert on_face
    # grid-search oracle over the 1-simplex
    oracle = _hull_grid_oracle(target, [s1, s2])
    assert hull.residual_norm**2 <= oracle**2 + 1e-6


def test_hull_single_source_degenerate():
    rng = np.random.default_rng(8)
    x = rng.uniform(-1, 1, (100, 1))
    source = _poly_dataset([1.0, 1.0, 1.0], x)
    target = _poly_dataset([0.0, 2.0, -1.0], x)
    report = hull_projection(target, [source])
    np.testing.assert_allclose(report.weights, [1.0])
    assert report.residual_norm == pytest.approx(
        norm(target.outputs - source.outputs), abs=1e-12)


def test_hull_matches_grid_oracle_three_sources():
    rng = np.random.default_rng(9)
    x = rng.uniform(-1, 1, (200, 1))
    for _ in range(5):
        sources = _random_sources(rng, 3, x)
        target = _poly_dataset(rng.uniform(-4, 4, 3), x)
        report = hull_projection(target, sources)
        oracle = _hull_grid_oracle(target, sources)
        assert report.residual_norm**2 <= oracle**2 + 1e-6


def test_hull_nesting_inside_span():
    rng = np.random.default_rng(10)
    for trial in range(20):
        x = rng.uniform(-1, 1, (150, 1))
        n = int(rng.integers(1, 6))
        sources = _random_sources(rng, n, x)
        target = _poly_dataset(rng.uniform(-5, 5, 4), x)
        hull = hull_projection(target, sources)
        span = span_projection(target, sources)
        assert hull.residual_norm >= span.residual_norm - 1e-8


def test_scaling_target_scales_residuals():
    rng = np.random.default_rng(11)
    x = rng.uniform(-1, 1, (200, 1))
    sources = _random_sources(rng, 2, x)
    target = _poly_dataset([1.0, -2.0, 3.0, 0.5], x)
    for s in (2.0, 7.5):
        scaled = FunctionDataset(x, s * target.outputs)
        base_span = span_projection(target, sources)
        scaled_span = span_projection(scaled, sources)
        assert scaled_span.residual_norm == pytest.approx(
            s * base_span.residual_norm, rel=1e-8)
        assert scaled_span.relative_residual == pytest.approx(
            base_span.relative_residual, abs=1e-8)


# -- classification -----------------------------------------------------------

def test_classify_three_types():
    rng = np.random.default_rng(12)
    x = rng.uniform(-1, 1, (1000, 1))
    sources = _random_sources(rng, 3, x)

    convex = rng.dirichlet(np.ones(3))
    t1 = FunctionDataset(x, sum(w * s.outputs
                                for w, s in zip(convex, sources)))
    assert classify_transfer(t1, sources).transfer_type == geometry.TYPE1

    t2 = FunctionDataset(x, 2.0 * sources[0].outputs - sources[1].outputs)
    assert classify_transfer(t2, sources).transfer_type == geometry.TYPE2

    t3 = _poly_dataset([0.0, 0.0, 0.0, 1.0], x)  # pure cubic
    assert classify_transfer(t3, sources).transfer_type == geometry.TYPE3


def test_classify_cubic_against_quadratic_monomials():
    # span residual of x^3 against {1, x, x^2} is analytically nonzero;
    # verified against a direct normal-equation solve on the samples
    rng = np.random.default_rng(13)
    x = rng.uniform(-1, 1, (2000, 1))
    sources = [_poly_dataset(c, x) for c in ([1.0], [0.0, 1.0], [0.0, 0.0, 1.0])]
    target = _poly_dataset([0.0, 0.0, 0.0, 1.0], x)
    report = classify_transfer(target, sources)
    assert report.transfer_type == geometry.TYPE3
    design = np.stack([s.outputs[:, 0] for s in sources], axis=1)
    w, *_ = np.linalg.lstsq(design, target.outputs[:, 0], rcond=None)
    res = norm(target.outputs - design @ w[:, None])
    assert report.span.residual_norm == pytest.approx(res, rel=1e-6)


def test_classify_tolerances_validated():
    rng = np.random.default_rng(14)
    x = rng.uniform(-1, 1, (50, 1))
    sources = _random_sources(rng, 2, x)
    with pytest.raises(FencError):
        classify_transfer(sources[0], sources, hull_tol=0.0)


def test_classification_pure_function_of_reports():
    rng = np.random.default_rng(15)
    x = rng.uniform(-1, 1, (500, 1))
    sources = _random_sources(rng, 3, x)
    target = _poly_dataset(rng.uniform(-3, 3, 3), x)
    a = classify_transfer(target, sources)
    b = classify_transfer(target, sources)
    assert a.transfer_type == b.transfer_type
    np.testing.assert_array_equal(a.hull.weights, b.hull.weights)
    np.testing.assert_array_equal(a.span.weights, b.span.weights)
