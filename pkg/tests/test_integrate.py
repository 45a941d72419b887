import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdsynth.bounds import c_constant, check_hypothesis, delta_bound, osl_constant
from rdsynth.errors import BlowUpError
from rdsynth.integrate import (
    Pattern, euler_batch, euler_step, integrate_mode, read_trace_csv, reference_integrate,
    reference_pattern, simulate_batch, simulate_pattern, substep_count, write_trace_csv,
)
from rdsynth.model import ReactionSpec, build_system, vector_field

from test_bounds import EX1_C, dense_laplacian
from test_model import ex1


def one_node():
    return build_system(M=1, L=2.0, sigma=1.0, reaction={"kind": "bistable-cubic", "theta": 0.3},
                        modes=[(1, 1)], tau=0.1)


def small(M=2, L=1.5, sigma=1.0, modes=((0.0, 0.0), (1.0, 1.0)), tau=0.1):
    return build_system(M=M, L=L, sigma=sigma, reaction={"kind": "bistable-cubic", "theta": 0.3},
                        modes=modes, tau=tau)


def test_euler_step_example():
    s = one_node()
    np.testing.assert_allclose(euler_step(s, s.modes[0], [0.5], 0.1), [0.605], atol=1e-15)


def test_euler_fixed_point_and_first_order():
    s = build_system(M=3, L=4.0, sigma=1.0, reaction=ReactionSpec.zero(), modes=[(0, 0)], tau=0.1)
    np.testing.assert_array_equal(euler_step(s, s.modes[0], np.zeros(3), 0.37), np.zeros(3))
    s = ex1()
    y = np.linspace(0.1, 0.9, 5)
    one = euler_step(s, s.modes[2], y, 0.01)
    two = euler_step(s, s.modes[2], euler_step(s, s.modes[2], y, 0.005), 0.005)
    assert np.max(np.abs(one - two)) > 1e-8


def test_integrate_mode_tiling():
    s = ex1()
    y = np.linspace(0.1, 0.9, 5)
    np.testing.assert_array_equal(integrate_mode(s, s.modes[1], y, 0.001, 0.001),
                                  euler_step(s, s.modes[1], y, 0.001))
    assert substep_count(0.1, 0.001) == 100
    with pytest.raises(ValueError):
        integrate_mode(s, s.modes[1], y, 0.1, 0.03)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(1, 60), st.integers(0, 2**31), st.booleans())
def test_compiled_kernel_matches_numpy_bitwise(M, n, seed, poly):
    reaction = ({"kind": "polynomial", "coeffs": [0.05, -0.4, 1.1, -0.8]} if poly
                else {"kind": "bistable-cubic", "theta": 0.3})
    s = build_system(M=M, L=3.0, sigma=0.7, reaction=reaction, modes=[(0.3, 0.8)], tau=0.1)
    rng = np.random.default_rng(seed)
    y = rng.random(M)
    dt = 0.1 / n
    ref = y.copy()
    for _ in range(n):
        ref = euler_step(s, s.modes[0], ref, dt)
    np.testing.assert_array_equal(integrate_mode(s, s.modes[0], y, 0.1, dt), ref)


def test_batches_match_sequential():
    s = ex1()
    Y = np.random.default_rng(4).random((300, 5))
    seq = np.array([integrate_mode(s, s.modes[3], y, 0.1, 0.001) for y in Y])
    np.testing.assert_array_equal(euler_batch(s, s.modes[3], Y, 100, 0.001), seq)
    np.testing.assert_array_equal(euler_batch(s, s.modes[3], Y, 100, 0.001, workers=4, chunk=37), seq)
    pat = Pattern((1, 4, 0))
    fin = simulate_batch(s, pat, Y[:20], 0.001)
    for i in range(20):
        np.testing.assert_array_equal(fin[i], simulate_pattern(s, pat, Y[i], 0.001).final)


def test_simulate_pattern_structure():
    s = ex1()
    y0 = np.linspace(0.1, 0.9, 5)
    empty = simulate_pattern(s, Pattern(()), y0, 0.001)
    assert empty.times.tolist() == [0.0] and np.array_equal(empty.states[0], y0)
    pat = Pattern((2, 0, 5))
    tr = simulate_pattern(s, pat, y0, 0.001)
    assert len(tr.times) == len(tr.states) == 301
    assert tr.times[0] == 0.0 and np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == pytest.approx(0.3)
    assert [m.u0 for m in tr.mode_log] == [0.4, 0.0, 1.0]
    coarse = simulate_pattern(s, pat, y0, 0.001, record_every=100)
    assert len(coarse.times) == 4
    np.testing.assert_array_equal(coarse.states[1:], tr.states[100::100])
    again = simulate_pattern(s, pat, y0, 0.001)
    np.testing.assert_array_equal(again.states, tr.states)


def test_extended_pattern_equals_flattened():
    s = ex1()
    y0 = np.linspace(0.1, 0.9, 5)
    ext = simulate_pattern(s, Pattern((13, 35), p=2), y0, 0.001)  # (2,1), (5,5)
    flat = simulate_pattern(s, Pattern((2, 1, 5, 5)), y0, 0.001)
    np.testing.assert_array_equal(ext.states, flat.states)


def test_blow_up_reports_substep():
    s = build_system(M=3, L=1.0, sigma=1.0, reaction={"kind": "bistable-cubic", "theta": 0.3},
                     modes=[(1, 1)], tau=200.0)
    with pytest.raises(BlowUpError) as info:
        simulate_pattern(s, Pattern((0,)), np.full(3, 0.5), 1.0)
    assert info.value.step is not None


def test_reference_matches_spectral_solution():
    s = build_system(M=6, L=2.0, sigma=0.8, reaction=ReactionSpec.zero(), modes=[(0, 0)], tau=0.1)
    A = s.sigma * dense_laplacian(s.M, s.h)
    w, V = np.linalg.eigh(A)
    y0 = np.random.default_rng(5).random(6)
    for t in (1e-3, 0.05, 0.1):
        exact = V @ (np.exp(w * t) * (V.T @ y0))
        got = reference_integrate(s, s.modes[0], y0, t)
        assert np.max(np.abs(got - exact)) <= 1e-8
    np.testing.assert_array_equal(reference_integrate(s, s.modes[0], y0, 0.0), y0)


def test_reference_vs_subsampled_euler_within_delta():
    s = ex1()
    y0 = np.random.default_rng(6).random(5)
    for mode, c in zip(s.modes, EX1_C):
        ref = reference_integrate(s, mode, y0, 0.1)
        eul = integrate_mode(s, mode, y0, 0.1, 0.001)
        assert np.linalg.norm(ref - eul) <= delta_bound(-0.322, c, 0.0, 0.1)


def test_single_step_error_envelope():
    s = ex1()
    lam = osl_constant(s)
    rng = np.random.default_rng(7)
    n = 50
    Y0 = rng.random((n, 5))
    mu = 10 ** rng.uniform(-4, -1.5, n)
    d = rng.standard_normal((n, 5))
    Z0 = Y0 + (mu * rng.uniform(0, 1, n))[:, None] * d / np.linalg.norm(d, axis=1)[:, None]
    which = np.arange(n) % s.m
    for u, mode in enumerate(s.modes):
        rows = which == u
        c = c_constant(s, mode)
        for t in (s.tau / 4, s.tau / 2, s.tau):
            exact = reference_integrate(s, mode, Y0[rows], t, check=False)
            eul = Z0[rows] + t * vector_field(s, mode, Z0[rows])
            err = np.linalg.norm(exact - eul, axis=1)
            bound = np.array([delta_bound(lam, c, m, t) for m in mu[rows]])
            assert np.all(err <= bound + 1e-9)


def test_flow_contracts_at_osl_rate():
    s = ex1()
    lam = osl_constant(s)
    rng = np.random.default_rng(8)
    Y1, Y2 = rng.random((12, 5)), rng.random((12, 5))
    for mode in s.modes:
        for t in (0.02, 0.1):
            a = reference_integrate(s, mode, Y1, t, check=False)
            b = reference_integrate(s, mode, Y2, t, check=False)
            lhs = np.linalg.norm(a - b, axis=1)
            assert np.all(lhs <= math.exp(lam * t) * np.linalg.norm(Y1 - Y2, axis=1) * (1 + 1e-6))


def test_subsampled_euler_tracks_exact_flow_within_epsilon():
    # with dt <= tau_max and |y0 - z0| <= eps the Euler image from z0 stays in
    # the eps-ball around the exact trajectory from y0
    s = small()
    eps = math.sqrt(2) / 2 / 7
    rep = check_hypothesis(s, eps)
    n = 10 * math.ceil(rep.substeps_per_tau / 10)
    rep = check_hypothesis(s, eps, substeps=n)
    assert rep.satisfied
    rng = np.random.default_rng(9)
    for trial in range(6):
        k = int(rng.integers(1, 6))
        pat = Pattern(tuple(int(u) for u in rng.integers(0, 2, k)))
        y0 = rng.random(2)
        d = rng.standard_normal(2)
        z0 = y0 + eps * rng.uniform(0, 1) * d / np.linalg.norm(d)
        _, ref = reference_pattern(s, pat, y0, dt=rep.delta_t, samples_per_period=10)
        tr = simulate_pattern(s, pat, z0, rep.delta_t, record_every=n // 10)
        assert ref.shape == tr.states.shape
        assert np.all(np.linalg.norm(ref - tr.states, axis=1) <= eps)


def test_trace_csv_round_trip(tmp_path):
    s = ex1()
    tr = simulate_pattern(s, Pattern((1, 3)), np.linspace(0.1, 0.9, 5), 0.001, record_every=50)
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    raw = path.read_bytes()
    assert raw.startswith(b"t,y1,y2,y3,y4,y5,u0,uL\n") and b"\r" not in raw
    t, Y, U = read_trace_csv(path)
    np.testing.assert_array_equal(t, tr.times)
    np.testing.assert_array_equal(Y, tr.states)
    assert U[0].tolist() == [0.2, 0.2] and U[-1].tolist() == [0.6, 0.6]
