import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifespan_lab.model import LightCone, ProblemSpec, free_solution
from lifespan_lab.solver import (BLEW_UP, FAILED, SURVIVED, NumericalFailure, area_on_grid,
                                 duhamel_area, estimate_lifespan, evolve, read_field_dump)

# 0.5 * int_0^1 int_{s-1}^{1-s} dy/(1+y^2) ds by scipy dblquad (epsabs 1e-14);
# equals pi/4 - log(2)/2
AREA_A2_T1 = 0.43882457311747564


def ones(y, s):
    return np.ones_like(y)


def test_duhamel_area_trivial():
    assert duhamel_area(lambda y, s: np.zeros_like(y), 0.3, 2.0, 0.0) == 0.0
    assert duhamel_area(ones, 0.0, 0.0, 1.0) == 0.0
    assert duhamel_area(ones, 5.0, 2.0, 0.0) == pytest.approx(2.0, abs=1e-12)


def test_duhamel_area_weighted_oracle():
    assert AREA_A2_T1 == pytest.approx(math.pi / 4 - math.log(2) / 2, abs=1e-15)
    assert duhamel_area(ones, 0.0, 1.0, 2.0, quad_n=10_000) == pytest.approx(AREA_A2_T1, abs=1e-8)


def test_duhamel_area_second_order():
    errs = [abs(duhamel_area(ones, 0.0, 1.0, 2.0, quad_n=n) - AREA_A2_T1) for n in (101, 201)]
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)


def test_duhamel_area_errors():
    with pytest.raises(ValueError):
        duhamel_area(ones, 0.0, -1.0, 0.0)
    with pytest.raises(ValueError):
        duhamel_area(ones, 0.0, 1.0, 0.0, quad_n=1)


@given(st.floats(-10, 10), st.floats(0, 5))
@settings(max_examples=30, deadline=None)
def test_duhamel_area_constant_field(x, t):
    assert duhamel_area(ones, x, t, 0.0, quad_n=50) == pytest.approx(t * t / 2, rel=1e-12, abs=1e-14)


def test_linear_run_second_order():
    spec = ProblemSpec(2.0, 0.0, 1.0)
    errs = []
    for d in (1 / 50, 1 / 100):
        run = evolve(spec, d, 1.0, nonlinear=False)
        u0 = free_solution(spec.data, spec.eps, run.x, run.t_end)[0]
        errs.append(np.max(np.abs(run.final.u - u0)))
    assert math.log2(errs[0] / errs[1]) >= 1.9


def test_zero_data_survives_identically():
    run = evolve(ProblemSpec(2.0, 0.0, 1.0, preset="zero"), 0.05, 3.0, store_every=1)
    assert run.status == SURVIVED
    assert not np.any(run.u_fields) and not np.any(run.w_fields) and not np.any(run.v_fields)


def test_initial_level_and_cone_locality():
    spec = ProblemSpec(2.0, 0.0, 0.2, preset="bump_both")
    d = 0.02
    run = evolve(spec, d, 2.0, store_every=10)
    x = run.x
    np.testing.assert_allclose(run.w_fields[0], spec.eps * spec.data.fp(x), atol=1e-15)
    np.testing.assert_allclose(run.v_fields[0], spec.eps * spec.data.g(x), atol=1e-15)
    np.testing.assert_allclose(run.u_fields[0], spec.eps * spec.data.f(x), atol=1e-15)
    cone = LightCone(spec.R)
    for t, w, v in zip(run.field_times, run.w_fields, run.v_fields):
        out = ~cone.contains(x, t + 1e-9)
        assert not np.any(w[out]) and not np.any(v[out])
    # array covers the cone plus two nodes
    assert x[0] <= -(run.t_end + spec.R) - 2 * d and x[-1] >= run.t_end + spec.R + 2 * d
    assert run.final.level == round(run.t_end / d)
    np.testing.assert_allclose(run.final.x, x, atol=1e-12)


def test_blow_up_run_monotone_tail():
    spec = ProblemSpec(2.0, 0.0, 0.5)
    run = evolve(spec, 1 / 400, 50.0, blow_threshold=1e4)
    assert run.status == BLEW_UP and math.isfinite(run.t_end)
    tail = run.max_w[int(0.9 * run.max_w.size):]
    assert np.all(np.diff(tail) > 0)
    assert np.all(np.diff(run.times) > 0)


def test_crossing_time_interpolation():
    run = evolve(ProblemSpec(2.0, 0.0, 0.5), 1 / 100, 50.0, blow_threshold=1e4)
    t1, t2 = run.crossing_time(1e3), run.crossing_time(4e3)
    assert t1 < t2 <= run.t_end
    k = np.nonzero(run.max_w >= 1e3)[0][0]
    assert run.times[k - 1] <= t1 <= run.times[k]
    assert run.crossing_time(1e9) is None


def test_overflow_reported_as_failure():
    spec = ProblemSpec(2.0, 0.0, 0.5)
    run = evolve(spec, 0.05, 50.0)
    assert run.status == FAILED
    with pytest.raises(NumericalFailure):
        evolve(spec, 0.05, 50.0, raise_on_failure=True)


def test_snapshot_csv_and_dump_roundtrip(tmp_path):
    run = evolve(ProblemSpec(2.0, 0.0, 0.1), 1 / 64, 0.5, store_every=4)
    run.snapshot_csv(tmp_path / "snap.csv")
    lines = (tmp_path / "snap.csv").read_text().splitlines()
    assert lines[0] == "t,max_ux,max_u"
    assert len(lines) == run.times.size + 1
    run.dump_fields(tmp_path / "w.bin", "w")
    arr, delta = read_field_dump(tmp_path / "w.bin")
    np.testing.assert_array_equal(arr, run.w_fields)
    assert delta == run.delta
    raw = (tmp_path / "w.bin").read_bytes()
    assert len(raw) == 24 + 8 * arr.size


def test_area_on_grid_matches_quadrature():
    spec = ProblemSpec(2.0, 0.5, 0.1)
    d = 1 / 80
    run = evolve(spec, d, 1.0, store_every=1)
    k = run.field_levels.size - 1
    i = int(np.argmin(np.abs(run.x - 0.3)))
    grid_val = area_on_grid(run, i, k)

    def field(y, s):
        lev = np.clip(np.rint(s / d).astype(int), 0, k)
        return np.abs(np.array([np.interp(yy, run.x, run.w_fields[l]) for yy, l in
                                zip(np.atleast_2d(y), lev.ravel())])) ** spec.p

    quad_val = duhamel_area(field, run.x[i], run.field_times[k], spec.a, quad_n=81)
    assert grid_val == pytest.approx(quad_val, rel=2e-3)


def test_representation_consistency_small():
    spec = ProblemSpec(2.0, 0.0, 0.1)
    d = 1 / 50
    run = evolve(spec, d, 1.0, store_every=1)
    rng = np.random.default_rng(1)
    k = run.field_levels.size - 1
    inside = np.nonzero(np.abs(run.x) < run.t_end + spec.R - 2 * d)[0]
    for i in rng.choice(inside, 5, replace=False):
        u0 = free_solution(spec.data, spec.eps, run.x[i], run.field_times[k])[0]
        assert abs(run.u_fields[k, i] - u0 - area_on_grid(run, i, k)) <= 10 * d * d


def test_estimate_lifespan_brackets_and_monotone_in_eps():
    spec = ProblemSpec(2.0, 0.0, 0.2)
    est = estimate_lifespan(spec, 1 / 25, t_max=100)
    assert est.t_lo <= est.t_star <= est.t_hi
    assert math.isfinite(est.refinement_ratio)
    assert len(est.t_star_by_delta) == 3
    for tc in est.crossings.values():
        assert tc[0] < tc[1] < tc[2]
    est2 = estimate_lifespan(spec.with_eps(0.4), 1 / 25, t_max=100)
    assert est2.t_star < est.t_star


def test_estimate_lifespan_survived_sentinel():
    est = estimate_lifespan(ProblemSpec(2.0, 2.0, 0.05), 1 / 10, t_max=40, levels=1)
    assert est.survived and est.t_star == math.inf and est.t_lo == 40


def test_estimate_lifespan_rejects_bad_thresholds():
    with pytest.raises(ValueError):
        estimate_lifespan(ProblemSpec(2.0, 0.0, 0.2), 0.1, thresholds=(1e3, 1e3, 2e3))
    with pytest.raises(ValueError):
        estimate_lifespan(ProblemSpec(2.0, 0.0, 0.2), 0.1, thresholds=(1e3, 2e3))
