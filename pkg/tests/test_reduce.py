import itertools
import math

import numpy as np
import pytest

from rdsynth.errors import CapacityError, ConfigError
from rdsynth.integrate import Pattern, reference_integrate, simulate_pattern
from rdsynth.model import build_system, sample_profile
from rdsynth.reduce import (
    build_pair, build_projection, commutation_defect, cross_apply, k2_constant, project_state,
    reduction_error_bound,
)

from test_bounds import dense_laplacian
from test_model import EX1_MODES, ex1


def test_projection_shape_and_orthonormal_rows():
    Pi = build_projection(2)
    s = 1 / math.sqrt(2)
    np.testing.assert_array_equal(Pi, [[s, s, 0, 0], [0, 0, s, s]])
    for M1 in range(1, 65):
        Pi = build_projection(M1)
        assert Pi.shape == (M1, 2 * M1)
        assert np.max(np.abs(Pi @ Pi.T - np.eye(M1))) <= 1e-12
    np.testing.assert_allclose(project_state(np.ones(4)), [math.sqrt(2)] * 2)
    w = np.random.default_rng(0).random((3, 10))
    np.testing.assert_allclose(project_state(w), w @ build_projection(5).T, atol=1e-15)
    with pytest.raises(ConfigError):
        build_projection(0)


def test_defect_single_pair_by_hand():
    red = build_system(M=1, L=4.0, sigma=1.0, reaction={"kind": "bistable-cubic", "theta": 0.3},
                       modes=[(0, 0)], tau=0.1)
    full = red.replace(M=2)
    D, rows = commutation_defect(full, red)
    h1, h2 = 2.0, 4.0 / 3.0
    a = (2 / h1**2 - 1 / h2**2) / math.sqrt(2)
    np.testing.assert_allclose(D, [[a, a]], atol=1e-15)
    assert rows[0]["cols"] == [0, 1]


def test_defect_vanishes_for_lifted_stencil():
    # replacing the fine operator by the lifted coarse one cancels exactly
    M1, h1 = 4, 0.7
    Pi = build_projection(M1)
    lifted = Pi.T @ dense_laplacian(M1, h1) @ Pi
    D = Pi @ lifted - dense_laplacian(M1, h1) @ Pi
    assert np.max(np.abs(D)) <= 1e-12
    assert k2_constant(np.zeros((2, 4))) == 0.0


def test_k2_hand_case_and_methods():
    a = 1.7
    assert k2_constant(np.array([[a, a]])) == pytest.approx(2 * a)
    assert k2_constant(np.array([[a, a]]), "interval-bound") == pytest.approx(2 * a)
    rng = np.random.default_rng(1)
    for _ in range(20):
        D = rng.standard_normal((3, 6))
        brute = max(np.linalg.norm(D @ np.array(v)) for v in itertools.product((0.0, 1.0), repeat=6))
        exact = k2_constant(D)
        assert exact == pytest.approx(brute, rel=1e-14)
        assert k2_constant(D, "interval-bound") >= exact - 1e-12
        samples = rng.random((2000, 6))
        assert np.linalg.norm(samples @ D.T, axis=1).max() <= exact + 1e-12
    with pytest.raises(CapacityError):
        k2_constant(np.zeros((13, 26)))
    with pytest.raises(ConfigError):
        k2_constant(np.zeros((1, 2)), "svd")


def test_example_pair_constants():
    red = ex1()
    pair = build_pair(red.replace(M=10), red, lambda_h1=-0.322)
    assert pair.defect.shape == (5, 10)
    ref = max(np.linalg.norm(pair.defect @ np.array(v))
              for v in itertools.product((0.0, 1.0), repeat=10))
    assert pair.k2 == pytest.approx(ref, rel=1e-14)
    assert pair.bound == pytest.approx(pair.k2 / 0.322)
    default = build_pair(red.replace(M=10))
    assert default.lambda_h1 == pytest.approx(-0.33955, abs=1e-4)


def test_reduction_bound_arithmetic():
    assert reduction_error_bound(5.764, 1.0, -0.322) == pytest.approx(17.90, abs=0.01)
    assert reduction_error_bound(5.764, 0.5, -0.322) == pytest.approx(8.95, abs=0.01)
    assert reduction_error_bound(0.0, 1.0, -0.322) == 0.0
    with pytest.raises(ValueError):
        reduction_error_bound(1.0, 1.0, 0.0)


def test_pair_validation():
    red = ex1()
    with pytest.raises(ConfigError):
        build_pair(red.replace(M=9), red)
    with pytest.raises(ConfigError):
        build_pair(red.replace(M=10, sigma=0.5), red)
    with pytest.raises(ConfigError):
        build_pair(red.replace(M=11))


def test_projected_trajectory_envelope():
    red = ex1()
    pair = build_pair(red.replace(M=10), red)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        w = rng.random(10)
        y = project_state(w)
        for u in rng.integers(0, red.m, 3):
            for _ in range(4):
                w = reference_integrate(pair.full, red.modes[u], w, red.tau / 4, check=False)
                y = reference_integrate(red, red.modes[u], y, red.tau / 4, check=False)
                worst = max(worst, float(np.linalg.norm(project_state(w) - y)))
    assert worst <= pair.bound


def test_cross_apply_consistency():
    red = ex1()
    full = red.replace(M=10)
    pair = build_pair(full, red, lambda_h1=-0.322)
    y_f = np.full(5, 0.3)
    pat = Pattern((4, 0, 2, 2, 1))
    w0, y0 = sample_profile(full, 0.8, 0.1), sample_profile(red, 0.8, 0.1)
    rep, ftr, rtr = cross_apply(pair, pat, w0, y_f, 0.001, y1_0=y0, traces=True)
    np.testing.assert_array_equal(rtr.final, simulate_pattern(red, pat, y0, 0.001).final)
    np.testing.assert_array_equal(ftr.final, simulate_pattern(full, pat, w0, 0.001).final)
    assert rep.reduced_distance == pytest.approx(np.linalg.norm(rtr.final - y_f))
    assert rep.projected_distance == pytest.approx(np.linalg.norm(project_state(ftr.final) - y_f))
    assert rep.full_distance == pytest.approx(np.linalg.norm(ftr.final - 0.3))
    assert rep.within_bound and rep.projected_distance <= rep.reduced_distance + pair.bound
    with pytest.raises(ConfigError):
        cross_apply(pair, pat, w0, np.linspace(0.1, 0.5, 5), 0.001)


def test_cross_apply_bound_on_random_patterns():
    red = ex1(modes=EX1_MODES)
    pair = build_pair(red.replace(M=10), red)
    rng = np.random.default_rng(3)
    for _ in range(5):
        pat = Pattern(tuple(int(u) for u in rng.integers(0, 6, 8)))
        rep = cross_apply(pair, pat, rng.random(10), np.full(5, 0.3), 0.001, y1_0=rng.random(5))
        assert rep.projected_distance <= rep.reduced_distance + pair.bound
