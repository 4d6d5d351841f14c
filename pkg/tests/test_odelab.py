import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifespan_lab import odelab as od

# prod_{k>=1} (1 + 2^{-k}) from mpmath.nprod at 40 digits
R_INF_RATIO = 2.384231029031371724
# prod_{i>=1} (1 + 4^{-i}), the p = 2 slicing limit, same source
L_INF_P2 = 1.355909673863479380


def test_lemma1_constant_by_substitution():
    # p = 2, a = 0, D2 = 1: 2^4 * 2^5 * 5^2 / 1
    assert od.lemma1_constant(1.0, 2.0, 0.0) == pytest.approx(16 * 32 * 25, rel=1e-14)
    rep = od.lemma1_bound(1.0, 1.0, 2.0, 0.0)
    assert rep.constant == pytest.approx(12800.0, rel=1e-14)
    assert rep.t_bound == pytest.approx(12800.0, rel=1e-14)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.sampled_from([1.5, 2.0, 3.0]),
       st.sampled_from([-1.0, -0.5, 0.0, 0.5]))
def test_lemma1_monotone_and_scaling(d2a, d2b, p, a):
    lo, hi = sorted((d2a, d2b))
    assert od.lemma1_constant(hi, p, a) <= od.lemma1_constant(lo, p, a) * (1 + 1e-12)
    t1 = od.lemma1_bound(1.0, lo, p, a).t_bound
    t2 = od.lemma1_bound(2.0, lo, p, a).t_bound
    assert t2 / t1 == pytest.approx(2.0 ** (-(p - 1) / (1 - a)), rel=1e-12)


def test_lemma1_rejects_bad_parameters():
    with pytest.raises(od.ConstraintError):
        od.lemma1_bound(1.0, 1.0, 2.0, 1.0)
    with pytest.raises(od.ConstraintError):
        od.lemma1_bound(0.0, 1.0, 2.0, 0.0)


def test_lizhou_critical_constant_by_substitution():
    # a = 1, p = 2, M2 = 4: 2^3 * 2^2 * (4 / 4)^1
    assert od.lizhou_constant(4.0, 2.0, 1.0) == pytest.approx(32.0, rel=1e-14)
    rep = od.lizhou_bound(2.0, 4.0, 2.0, 1.0)
    assert rep.t_bound == pytest.approx(math.exp(16.0), rel=1e-12)


def test_lizhou_branch_boundary_and_errors():
    assert od.lizhou_constant(1.0, 2.0, 0.0) == od.lizhou_constant(1.0, 2.0, -0.0)
    with pytest.raises(od.ConstraintError):
        od.lizhou_bound(1.0, 1.0, 2.0, 1.5)
    with pytest.raises(od.ConstraintError):
        od.lizhou_bound(1.0, 0.0, 2.0, 0.0)


@given(st.floats(1e-3, 1.0), st.sampled_from([-1.0, 0.0, 0.5, 1.0]))
@settings(max_examples=40)
def test_lizhou_bound_grows_as_M1_shrinks(m1, a):
    big = od.lizhou_bound(m1, 1.0, 2.0, a).t_bound
    small = od.lizhou_bound(m1 / 2, 1.0, 2.0, a).t_bound
    assert small >= big


def test_r_inf_ratio():
    assert od.r_inf_ratio() == pytest.approx(R_INF_RATIO, rel=1e-14)


def test_lemma3_critical_instantiation():
    for p in (1.5, 2.0, 3.0):
        rep = od.lemma3_bound(1.0, 1.0, 2.0, a=1.0, b=0.0, c=1.0, x=-(p - 1), y=-(p + 1), z=0.0, p=p)
        assert rep.inputs["R_inf"] == pytest.approx(2.0 * R_INF_RATIO, rel=1e-14)
        assert rep.t_bound >= (2.0 * R_INF_RATIO) ** 2 * (1 - 1e-12)


def test_lemma3_names_violated_constraint():
    with pytest.raises(od.ConstraintError, match=r"y \+ p a = -1"):
        od.lemma3_bound(1.0, 1.0, 2.0, a=1.0, b=0.0, c=1.0, x=-1.0, y=-2.0, z=0.0, p=2.0)
    with pytest.raises(od.ConstraintError, match="R > 1"):
        od.lemma3_bound(1.0, 1.0, 1.0, a=1.0, b=0.0, c=1.0, x=-1.0, y=-3.0, z=0.0, p=2.0)


def test_seq_first_terms():
    t = od.seq_eval("lem1_abc", 2.0, 0.0, 1)
    assert t.recurrence["a"][0] == 2.5 and t.recurrence["b"][0] == 0.0
    q = od.seq_eval("lizhou_ql", 2.7, 0.3, 5)
    assert q.n_start == 0 and q.recurrence["q"][0] == 0.0
    prod = od.seq_eval("products", 2.0, 0.0, 10)
    assert prod.extra["k_inf"] == pytest.approx(2.0, abs=1e-14)
    assert prod.extra["l_inf"] == pytest.approx(L_INF_P2, rel=1e-14)


@pytest.mark.parametrize("kind", ["lem1_abc", "lizhou_mk", "lizhou_hjt", "lizhou_ql"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("a", [-1.0, 0.0, 0.5, 1.0])
def test_recurrence_matches_closed_form(kind, p, a):
    if kind == "lizhou_mk" and a == 1:
        with pytest.raises(ValueError):
            od.seq_eval(kind, p, a, 30)
        return
    assert od.seq_eval(kind, p, a, 30).max_rel_error() < 1e-12


def test_seq_errors():
    with pytest.raises(ValueError):
        od.seq_eval("lem1_abc", 1.0, 0.0, 3)
    with pytest.raises(ValueError):
        od.seq_eval("nope", 2.0, 0.0, 3)
    with pytest.raises(ValueError):
        od.seq_eval("lem1_abc", 2.0, 0.0, 0)
    with pytest.raises(OverflowError):
        od.seq_eval("lem1_abc", 3.0, 0.0, 2000)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_b_ratio_bound_with_n0(p):
    n0 = od.n0_index(p)
    m = np.arange(1, 61)
    l = od.l_products(p, 61)
    direct = p**m * np.log(l[:-1] / l[1:])
    # the direct log of a ratio near 1 carries p^m * machine-eps absolute error
    assert np.all(np.abs(od.log_b(p, m) - direct) <= 1e-5 * np.abs(direct) + 1e-14 * p**m)
    assert np.all(od.log_b(p, m) >= -(p**n0) * math.log(2.0))


@given(st.floats(1.05, 6))
@settings(max_examples=30)
def test_products_monotone_with_limits(p):
    l = od.l_products(p, 50)
    assert np.all(np.diff(l) >= 0) and l[-1] <= od.l_infinity(p) * (1 + 1e-15)
    k = od.k_sums(50)
    assert np.all(np.diff(k) > 0) and k[-1] < 2.0


def test_lizhou_ode_zero_origin_stable():
    rep = od.ode_blowup("lizhou", dict(p=2.0, a=0.0, M1=1.0, M2=1.0), E=0.0)
    assert math.isfinite(rep.t_observed)
    assert rep.step_agreement < 0.01
    assert rep.margin >= 1


def test_lizhou_ode_without_nonlinearity_never_escapes():
    with pytest.raises(od.NoBlowUp):
        od.ode_blowup("lizhou", dict(p=2.0, a=0.0, M1=1.0, M2=0.0), t_cap=1e4)


def test_lem1_ode_dominated_p2():
    rep = od.ode_blowup("lem1", dict(p=2.0, a=0.0, D1=1.0, D2=1.0))
    assert rep.margin >= 1 and rep.step_agreement < 0.01


def test_lem1_forced_escapes_before_plain_lem1():
    params = dict(p=2.0, a=0.5, D1=0.5, D2=0.5)
    forced = od.ode_blowup("lem1_forced", params)
    plain = od.ode_blowup("lem1", params)
    assert forced.lemma == "lem1_forced"
    assert forced.t_observed <= plain.t_observed


def test_ode_blowup_unknown_kind():
    with pytest.raises(ValueError):
        od.ode_blowup("lem3", dict(p=2.0, a=0.0))


def test_lizhou_scaling_slope():
    m1 = 2.0 ** -np.arange(7)
    t = [od.ode_blowup("lizhou", dict(p=2.0, a=0.0, M1=m, M2=1 / 16)).t_observed for m in m1]
    slope, _ = od.fit_loglog(m1, t)
    assert slope == pytest.approx(-1.0, abs=0.1)


def test_sweep_csv(tmp_path):
    reps = [od.ode_blowup("lizhou", dict(p=2.0, a=0.0, M1=1.0, M2=1.0)),
            od.lemma1_bound(1.0, 1.0, 2.0, 0.0)]
    od.sweep_csv(tmp_path / "s.csv", reps)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "lemma,p,a,param1,param2,t_bound,t_observed,margin"
    assert lines[1].startswith("lizhou,2.0,0.0,1.0,1.0,")
    assert lines[2].endswith(",nan,nan")


def test_fit_loglog_exact_power():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert od.fit_loglog(x, 3 * x**-1.5) == pytest.approx((-1.5, math.log(3)), abs=1e-12)


def test_lem1_forced_dominated_on_full_grid():
    # the forced variant keeps H >= D1 t^{2-a/p}, so the bound must hold everywhere
    for p, a, d1, d2 in itertools.product((1.5, 2.0, 3.0), (-1.0, -0.5, 0.0, 0.5), (0.5, 1.0, 2.0),
                                          (0.5, 1.0, 2.0)):
        rep = od.ode_blowup("lem1_forced", dict(p=p, a=a, D1=d1, D2=d2))
        assert rep.margin >= 1 and rep.step_agreement < 0.01
