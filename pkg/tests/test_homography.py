import numpy as np
import pytest
import scipy.linalg
from scipy.optimize import minimize_scalar

from ctdecomp.colorspace import rgi_matrix, rgi_matrix_inv, to_homogeneous_chromaticity, valid_mask
from ctdecomp.errors import DegenerateInputError, ShapeError
from ctdecomp.homography import (
    AlsSettings,
    _row_scales,
    apply_homography,
    dlt_homography,
    estimate_homography_als,
    least_squares_solve,
    rg_to_rgb_homography,
)
from ctdecomp.oracle import random_homography, synth_pair

H_TRUE = np.array([[1.05, 0.05, 0.0], [0.02, 0.95, 0.03], [0.0, 0.05, 0.85]])


def rel_error_up_to_scale(h, h_true):
    s = np.vdot(h, h_true) / np.vdot(h, h)
    return np.linalg.norm(s * h - h_true) / np.linalg.norm(h_true)


def test_least_squares_matches_scipy(rng):
    x, y = rng.random((40, 3)), rng.random((40, 3))
    expected = scipy.linalg.lstsq(x, y)[0]
    np.testing.assert_allclose(least_squares_solve(x, y), expected, rtol=1e-10, atol=1e-12)


def test_least_squares_rank_deficient(rng):
    x = rng.random((10, 2))
    with pytest.raises(DegenerateInputError):
        least_squares_solve(np.hstack([x, x[:, :1]]), rng.random((10, 3)))
    with pytest.raises(DegenerateInputError):
        least_squares_solve(rng.random((2, 3)), rng.random((2, 3)))


def test_row_scales_match_scalar_minimizer(rng):
    x, y = rng.random((5, 3)), rng.random((5, 3))
    d = _row_scales(x, y)
    for i in range(5):
        best = minimize_scalar(lambda t: np.sum((t * x[i] - y[i]) ** 2)).x
        assert d[i] == pytest.approx(best, rel=1e-6)


def test_row_scales_floor_and_zero_rows():
    x = np.array([[1.0, 0, 0], [0, 0, 0]])
    y = np.array([[-2.0, 0, 0], [1, 1, 1]])
    np.testing.assert_array_equal(_row_scales(x, y, 1e-6), [1e-6, 1.0])


def test_rgb_homography_conjugation():
    h_rg = np.array([[1.0, 0.1, 0.0], [0.0, 0.9, 0.2], [0.1, 0.0, 1.0]])
    np.testing.assert_allclose(rg_to_rgb_homography(h_rg), rgi_matrix() @ h_rg @ rgi_matrix_inv())
    rho = np.array([0.3, 0.5, 0.2])
    # rho @ H in RGI coordinates equals (rho in RGI) @ H_rg.
    np.testing.assert_allclose(rho @ rg_to_rgb_homography(h_rg) @ rgi_matrix(),
                               rho @ rgi_matrix() @ h_rg)


def test_dlt_exact(astronaut64, rng):
    h = random_homography(rng)
    mask = valid_mask(astronaut64)
    a = to_homogeneous_chromaticity(astronaut64, mask)
    b = a @ h
    b = b / b[:, 2:3]
    assert rel_error_up_to_scale(dlt_homography(a, b), h) < 1e-9


def test_als_recovers_rgb_homography(astronaut64):
    tgt = synth_pair(astronaut64, H_TRUE, lambda b: np.ones_like(b))
    res = estimate_homography_als(astronaut64, tgt)
    assert rel_error_up_to_scale(res.h, H_TRUE) < 1e-8
    assert res.h_rg[2, 2] == 1.0
    assert res.converged


def test_als_with_shading_recovers_homography_and_shading(astronaut64):
    tgt = synth_pair(astronaut64, H_TRUE, lambda b: 0.6 + 0.8 * b)
    res = estimate_homography_als(astronaut64, tgt)
    assert rel_error_up_to_scale(res.h, H_TRUE) < 1e-8
    # In RGB space the shading then reproduces the target exactly.
    mapped = apply_homography(astronaut64, res.h)
    ok = valid_mask(astronaut64)
    p, q = mapped[ok], tgt[ok]
    d = np.einsum("ic,ic->i", p, q) / np.einsum("ic,ic->i", p, p)
    np.testing.assert_allclose(d[:, None] * p, q, atol=1e-10)


def test_als_residuals_monotone_from_identity(astronaut64, coffee64):
    from ctdecomp.oracle import statistic_transfer
    tgt = statistic_transfer(astronaut64, coffee64)
    res = estimate_homography_als(astronaut64, tgt,
                                  settings=AlsSettings(init="identity", max_iterations=30))
    assert np.all(np.diff(res.residuals) <= 1e-9)


def test_als_shading_is_one_outside_mask(astronaut64):
    tgt = synth_pair(astronaut64, H_TRUE, lambda b: 1.0)
    mask = np.zeros(astronaut64.shape[:2], bool)
    mask[10:40, 5:50] = True
    res = estimate_homography_als(astronaut64, tgt, mask)
    assert np.all(res.shading[~mask] == 1.0)
    assert rel_error_up_to_scale(res.h, H_TRUE) < 1e-8


def test_als_identical_images_give_identity(coffee64):
    res = estimate_homography_als(coffee64, coffee64)
    np.testing.assert_allclose(res.h, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(res.shading, 1.0, atol=1e-9)


def test_als_iteration_cap_reported(astronaut64, coffee64):
    from ctdecomp.oracle import statistic_transfer
    tgt = statistic_transfer(astronaut64, coffee64)
    res = estimate_homography_als(astronaut64, tgt,
                                  settings=AlsSettings(init="identity", max_iterations=2,
                                                       epsilon=1e-300))
    assert res.iterations == 2 and not res.converged


def test_als_too_few_pixels():
    img = np.zeros((4, 4, 3))
    img[0, 0] = [0.2, 0.3, 0.4]
    with pytest.raises(DegenerateInputError):
        estimate_homography_als(img, img)


def test_als_single_chromaticity_is_degenerate():
    img = np.linspace(0.1, 0.9, 16)[:, None, None] * np.array([0.5, 0.3, 0.2])
    img = img.reshape(4, 4, 3)
    with pytest.raises(DegenerateInputError):
        estimate_homography_als(img, img)


def test_als_shape_mismatch():
    with pytest.raises(ShapeError):
        estimate_homography_als(np.ones((2, 2, 3)), np.ones((2, 3, 3)))


@pytest.mark.parametrize("kwargs", [dict(epsilon=0), dict(max_iterations=0), dict(init="svd")])
def test_settings_validation(kwargs):
    with pytest.raises(ValueError):
        AlsSettings(**kwargs)


def test_apply_homography_unclamped():
    out = apply_homography(np.full((1, 1, 3), 0.8), 2 * np.eye(3))
    np.testing.assert_allclose(out, 1.6)
