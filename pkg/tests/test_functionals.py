import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifespan_lab import functionals as fn
from lifespan_lab.model import ProblemSpec, thm2_integrals
from lifespan_lab.solver import SURVIVED, SolutionRun, evolve


def fake_run(spec, u_value, t_end=5.0, d=0.05, every=2):
    """A SolutionRun whose stored u is a constant, for closed-form checks."""
    levels = np.arange(0, int(round(t_end / d)) + 1, every)
    x = np.arange(-int((t_end + spec.R) / d) - 3, int((t_end + spec.R) / d) + 4) * d
    fields = np.full((levels.size, x.size), float(u_value))
    times = d * np.arange(levels[-1] + 1)
    return SolutionRun(spec, d, SURVIVED, float(times[-1]), times, np.zeros(times.size),
                       np.zeros(times.size), x, levels, fields, np.zeros_like(fields),
                       np.zeros_like(fields))


def test_constants_examples():
    c = fn.constants(ProblemSpec(2.0, 0.0, 0.1), R0=0.75)
    assert c.D5 == c.D6 == 1.0
    assert c.R1 == pytest.approx(1 / 8) and c.D10 == pytest.approx(3 / 8)
    z = fn.constants(ProblemSpec(2.0, 0.0, 0.1, preset="zero"))
    assert z.C_f == 0 and z.C_g == 0 and z.M7 == 0
    with pytest.raises(ValueError):
        fn.constants(ProblemSpec(2.0, 0.0, 0.1), R0=0.4)
    with pytest.raises(ValueError):
        fn.constants(ProblemSpec(2.0, 0.0, 0.1), R0=1.0)


@given(st.floats(1.1, 4), st.floats(-1, 1), st.floats(1, 3))
@settings(max_examples=25, deadline=None)
def test_constants_invariants(p, a, R):
    if a >= p:
        return
    c = fn.constants(ProblemSpec(p, a, 0.1, R=R), n_quad=400, lai_tu_C=math.e)
    assert c.D5 <= c.D6 and c.R1 > 0 and c.C_f >= 0 and c.C_g >= 0
    assert 0.5 < c.R0 < R


def test_thm2_M7_positive_and_d9_variants():
    c = fn.constants(ProblemSpec(2.0, 0.0, 0.1, preset="thm2"))
    assert c.M7 > 0
    assert c.D9 == c.D9_derivation
    assert c.D9_text != c.D9_derivation


def test_lai_tu_constant_a0_is_e():
    # int_0^{1+t} e^{x-t} dx = e - e^{-t}, sup on [0, 50] is e - e^{-50}
    assert fn.lai_tu_constant(0.0, 2.0) == pytest.approx(math.e, abs=1e-9)


def test_strip_H_constant_field_closed_form():
    spec = ProblemSpec(2.0, 0.0, 0.1)
    R0 = 0.75
    H = fn.strip_H(fake_run(spec, 1.0), R0)
    expect = (spec.R - R0) * (H.times - 1) ** 2 / 2
    np.testing.assert_allclose(H.values, expect, atol=1e-3)
    assert H.times[0] == 1.0
    H0 = fn.strip_H(fake_run(spec, 0.0), R0)
    assert not np.any(H0.values)


def test_strip_H_errors():
    run = fake_run(ProblemSpec(2.0, 0.0, 0.1), 1.0, t_end=2.0)
    with pytest.raises(ValueError):
        fn.strip_H(run, 0.75, t_upto=3.0)
    with pytest.raises(ValueError):
        fn.strip_H(run, 0.75, fn.CRITICAL)


def test_exp_moments_zero_and_initial_value():
    z = evolve(ProblemSpec(2.0, 0.0, 0.1, preset="zero"), 0.05, 1.0, store_every=2)
    F, G = fn.exp_moments(z)
    assert not np.any(F.values) and not np.any(G.values)
    spec = ProblemSpec(2.0, 0.0, 0.3, preset="bump_both")
    run = evolve(spec, 1 / 200, 0.1, store_every=1)
    F, G = fn.exp_moments(run)
    x = np.linspace(-1, 1, 20001)
    ref = 0.3 * np.trapezoid((np.exp(-x) - np.exp(x)) * spec.data.fp(x), x)
    assert F.values[0] == pytest.approx(ref, rel=1e-4)
    assert G.values[0] == F.values[0]


def test_linear_run_residual_within_tol():
    spec = ProblemSpec(2.0, 0.0, 0.2)
    run = evolve(spec, 1 / 100, 4.0, nonlinear=False, store_every=10)
    F, G = fn.exp_moments(run)
    tol = fn.calibrate_tol_fd(spec, 1 / 100, 10, 4.0)
    assert np.max(np.abs(G.d2 + 2 * G.d1)) <= tol
    # F'' - F vanishes for the free wave as well; the centered stencil leaves
    # dt^2/12 F'''' = dt^2/12 F, relative to F
    dt = F.times[1] - F.times[0]
    err = np.abs(F.d2[1:-1] - F.values[1:-1])
    assert np.all(err <= 2 * dt**2 / 12 * np.abs(F.values[1:-1]) + 10 * tol)


def test_zero_residual_for_zero_solution():
    run = evolve(ProblemSpec(2.0, 0.0, 0.1, preset="zero"), 0.05, 1.0, store_every=2)
    res = fn.inequality_residuals(fn.exp_moments(run), fn.constants(run.spec), 2.0, 0.0)
    assert not np.any(res.residual)


def test_residual_needs_three_samples():
    t = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        fn.FunctionalSeries.from_values(t, t)


def test_centered_derivatives_exact_on_cubic():
    t = np.linspace(0, 2, 21)
    d1, d2 = fn.centered_derivatives(t, t**2)
    np.testing.assert_allclose(d1, 2 * t, atol=1e-12)
    np.testing.assert_allclose(d2, 2.0, atol=1e-9)
    _, d2c = fn.centered_derivatives(t, t**3)
    np.testing.assert_allclose(d2c, 6 * t, atol=1e-9)


def test_gt2_rhs_constant_G():
    t = np.linspace(0, 3, 3001)
    G = fn.FunctionalSeries.from_values(t, np.full(t.size, 0.5))
    rhs = fn.gt2_rhs(G, 2.0, 2.0, 0.0)
    np.testing.assert_allclose(rhs, 2.0 * 0.25 * (t / 2 - (1 - np.exp(-2 * t)) / 4), atol=1e-6)


def test_sy_holds():
    assert fn.sy_holds(0.75, 1.0)
    assert fn.sy_holds(0.6, 3.0)


@pytest.fixture(scope="module")
def bump_f_run():
    spec = ProblemSpec(2.0, 0.0, 0.1, preset="bump_f")
    return evolve(spec, 1 / 50, 100.0, blow_threshold=1.6e4, store_every=5)


def test_H_lower_bound_on_bump_f_run(bump_f_run):
    run = bump_f_run
    c = fn.constants(run.spec)
    H = fn.strip_H(run, c.R0)
    bound, start = fn.lower_bound("cf", c, run.spec.eps, 2.0, 0.0, run.spec.R, H.times)
    m = (H.times >= start) & (H.times <= 0.9 * run.t_end)
    assert m.sum() > 10
    assert np.all(H.values[m] >= bound[m])


def test_sandwich_on_weighted_run():
    run = evolve(ProblemSpec(2.0, 0.5, 0.2, preset="bump_f"), 1 / 25, 10.0, store_every=5)
    assert fn.sandwich_holds(run, fn.constants(run.spec))


def test_to_csv_and_report(tmp_path, bump_f_run):
    run = bump_f_run
    c = fn.constants(run.spec)
    H = fn.strip_H(run, c.R0)
    F, G = fn.exp_moments(run)
    res = fn.inequality_residuals((F, G), c, 2.0, 0.0)
    fn.to_csv(tmp_path / "f.csv", H, F, G, res)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "t,H,Hp,Hpp,F,G,residual"
    assert len(lines) == G.times.size + 1
    text = fn.format_report([fn.Verdict("a", True, "ok"), fn.Verdict("b", False)])
    assert text.splitlines() == ["PASS  a  ok", "FAIL  b", "summary: 1/2 passed"]


def test_thm2_corrected_linear_floor():
    """G stays above the free-wave part eps[int psi f' + (1 - e^{-2t})/2 int psi (g' - f')]."""
    spec = ProblemSpec(2.0, 0.0, 0.2, preset="thm2")
    run = evolve(spec, 1 / 50, 100.0, blow_threshold=1.6e4, store_every=5)
    i1, i2 = thm2_integrals(spec.data)
    _, G = fn.exp_moments(run)
    floor = spec.eps * (i1 + (1 - np.exp(-2 * G.times)) / 2 * i2)
    m = G.times <= 0.9 * run.t_end
    assert np.all(G.values[m] >= floor[m] - 1e-4)
