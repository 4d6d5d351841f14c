"""Weighted functionals of computed solutions and the inequalities they obey.

H is the strip functional int (t - s) ds int_{s+R0}^{s+R} u(x, s) w(x, s) dx,
F(t) = int psi u_x dx and G = e^{-t} F with psi(x) = e^{-x} - e^{x}.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .model import ProblemSpec, hyperbolic_pair, thm2_integrals, weight
from .solver import SolutionRun

SUBCRITICAL, CRITICAL = "subcritical", "critical"


@dataclass(frozen=True)
class ConstantSet:
    R0: float
    R1: float
    C_f: float
    C_g: float
    D5: float
    D6: float
    D7: float
    D8: float
    D9_text: float
    D9_derivation: float
    D10: float
    D11: float
    D12: float
    M6: float
    M7: float
    lai_tu_C: float

    @property
    def D9(self):
        # the value the chain of inequalities actually produces
        return self.D9_derivation

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class FunctionalSeries:
    times: np.ndarray
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, times, values, **extra):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        d1, d2 = centered_derivatives(times, values)
        return cls(times, values, d1, d2, extra)


@dataclass(frozen=True)
class ResidualSeries:
    times: np.ndarray
    residual: np.ndarray
    source_residual: np.ndarray | None = None


def centered_derivatives(t, v):
    """First and second derivatives by three-point centred differences.

    Endpoints use one-sided second-order stencils (four points for the
    second derivative on uniform samples, otherwise the neighbour's value).
    """
    n = len(t)
    if n < 3:
        raise ValueError("need at least 3 samples")
    d1 = np.gradient(v, t, edge_order=2)
    hl = t[1:-1] - t[:-2]
    hr = t[2:] - t[1:-1]
    d2 = np.empty(n)
    d2[1:-1] = 2.0 * (hl * v[2:] - (hl + hr) * v[1:-1] + hr * v[:-2]) / (hl * hr * (hl + hr))
    h = t[1] - t[0]
    if n >= 4 and np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
        d2[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
        d2[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    else:
        d2[0], d2[-1] = d2[1], d2[-2]
    return d1, d2


@functools.lru_cache(maxsize=64)
def lai_tu_constant(a, p, t_max=50.0, n_t=501):
    """sup over t in [0, t_max] of int_0^{1+t} e^{-(t-x)} (1+x)^b dx / (1+t)^b, b = a/(p-1)."""
    b = a / (p - 1)
    best = 0.0
    for t in np.linspace(0.0, t_max, n_t):
        val, _ = integrate.quad(lambda x: math.exp(x - t) * (1 + x) ** b, 0.0, 1.0 + t, limit=200)
        best = max(best, val / (1 + t) ** b)
    return best


def default_R0(R):
    """Midpoint of the admissible interval (1/2, R)."""
    return (R + 0.5) / 2


def constants(spec: ProblemSpec, R0=None, lai_tu_C=None, n_quad=10_000) -> ConstantSet:
    """Evaluate every proof constant for ``spec``."""
    p, a, R = spec.p, spec.a, spec.R
    R0 = default_R0(R) if R0 is None else R0
    if not 0.5 < R0 < R:
        raise ValueError(f"R0 must satisfy 1/2 < R0 < R, got {R0}")
    if not a < p:
        raise ValueError("constants need a < p")
    data = spec.data
    R1 = (R - R0) / 2
    y = np.linspace(R0, R, n_quad)
    C_f = float(np.trapezoid(data.f(y), y))
    y = np.linspace((R + R0) / 2, R, n_quad)
    C_g = float(np.trapezoid(data.g(y), y))
    q = a / p
    base = (2 * (R + 1)) ** (-q)
    D5, D6 = min(base, 1.0), max(base, 1.0)
    D7 = C_f * D5 * (1 - 0.5 ** (1 - q)) * (1 - 0.5 ** (2 - q)) / (2 * (1 - q) * (2 - q))
    D8 = min((2 * (R + 1)) ** (-a), 1.0)
    tail = D6 ** (-p) * R1 ** (-2 * (p - 1))
    D9_text = D5 * D7 / 2 * tail
    D9_derivation = D5 * D8 / 2 * tail
    D10 = R0 / (2 * R)
    D11 = D10 * 4.0 ** (-p) * R1 ** (-2 * (p - 1))
    D12 = (1 - 0.5 ** (1 - q)) * (1 - 0.5 ** (2 - q)) * C_g * D5 * R1 / (2 * (1 - q) * (2 - q))
    C = lai_tu_constant(float(a), float(p)) if lai_tu_C is None else lai_tu_C
    M6 = (4 * C) ** (-(p - 1)) * 2.0 ** (-a)
    i1, i2 = thm2_integrals(data, n_quad)
    M7 = 0.5 * i2 + i1
    return ConstantSet(R0, R1, C_f, C_g, D5, D6, D7, D8, D9_text, D9_derivation,
                       D10, D11, D12, M6, M7, C)


def _strip_integrals(run: SolutionRun, R0, kernel, n_pts):
    R = run.spec.R
    out = np.empty(run.field_levels.size)
    for k, (s, u) in enumerate(zip(run.field_times, run.u_fields)):
        x = np.linspace(s + R0, s + R, n_pts)
        out[k] = np.trapezoid(np.interp(x, run.x, u) * kernel(x, s), x)
    return out


def strip_H(run: SolutionRun, R0=None, variant=SUBCRITICAL, weight_kind=None, t_upto=None,
            n_pts=None) -> FunctionalSeries:
    """Strip functional H(t) on the stored levels of ``run``.

    ``variant`` fixes the time origin (1 for subcritical, 0 for critical)
    and the default weight: <x>^{-a/p} (subcritical) or x^{-1} (critical).
    ``weight_kind`` may override the weight with ``"time"`` (s^{-a/p}) or
    ``"bracket_inverse"`` (<x>^{-1}). ``extra`` carries J = H'' computed by
    quadrature.
    """
    if run.u_fields is None:
        raise ValueError("run has no stored fields")
    spec = run.spec
    R0 = default_R0(spec.R) if R0 is None else R0
    if variant == CRITICAL and spec.a != 1:
        raise ValueError("the critical functional needs a = 1")
    if t_upto is not None and t_upto > run.field_times[-1] + 1e-12:
        raise ValueError(f"requested t={t_upto} beyond the run horizon {run.field_times[-1]}")
    start = 1.0 if variant == SUBCRITICAL else 0.0
    q = spec.a / spec.p
    kind = weight_kind or ("bracket" if variant == SUBCRITICAL else "inverse_x")
    kernels = {
        "bracket": lambda x, s: weight(x, q),
        "time": lambda x, s: np.full_like(x, s ** (-q) if s > 0 else 1.0),
        "inverse_x": lambda x, s: 1.0 / x,
        "bracket_inverse": lambda x, s: weight(x, 1.0),
    }
    if n_pts is None:
        n_pts = max(64, 4 * int(math.ceil((spec.R - R0) / run.delta)) + 1)
    J = _strip_integrals(run, R0, kernels[kind], n_pts)
    ts = run.field_times.astype(float)
    keep = ts > start
    s = np.concatenate([[start], ts[keep]])
    Js = np.concatenate([[np.interp(start, ts, J)], J[keep]])
    if t_upto is not None:
        m = s <= t_upto + 1e-12
        s, Js = s[m], Js[m]
    c0 = integrate.cumulative_trapezoid(Js, s, initial=0.0)
    c1 = integrate.cumulative_trapezoid(s * Js, s, initial=0.0)
    H = s * c0 - c1
    return FunctionalSeries.from_values(s, H, J=Js, Hp=c0, origin=start, weight=kind)


def exp_moments(run: SolutionRun):
    """F(t) = int psi u_x dx and G = e^{-t} F at every stored level.

    G is evaluated as int (e^{-x-t} - e^{x-t}) u_x dx to keep the
    exponentials bounded on the cone. ``extra['S']`` on G holds
    e^{-t} int |u_x|^p <x>^{-a} phi dx, which equals G'' + 2G'.
    """
    if run.w_fields is None:
        raise ValueError("run has no stored fields")
    spec = run.spec
    x = run.x
    wgt = weight(x, spec.a)
    t = run.field_times.astype(float)
    G = np.empty(t.size)
    S = np.empty(t.size)
    for k, (tk, w) in enumerate(zip(t, run.w_fields)):
        # u_x vanishes off the cone; cutting there keeps e^{|x|-t} finite
        m = np.abs(x) <= tk + spec.R + 2 * run.delta
        xs, w = x[m], w[m]
        em, ep = np.exp(-xs - tk), np.exp(xs - tk)
        G[k] = np.trapezoid((em - ep) * w, xs)
        src = np.abs(w) ** spec.p * wgt[m] if run.nonlinear else np.zeros_like(w)
        S[k] = np.trapezoid((em + ep) * src, xs)
    F = np.exp(t) * G
    return FunctionalSeries.from_values(t, F), FunctionalSeries.from_values(t, G, S=S)


def inequality_residuals(series, consts: ConstantSet, p, a) -> ResidualSeries:
    """r(t) = G'' + 2G' - M6 |G|^p (1+t)^{-a} from discrete derivatives of G.

    ``series`` is the (F, G) pair from :func:`exp_moments`. When G carries
    the source moment S, ``source_residual`` = G'' + 2G' - S checks the
    moment identity itself.
    """
    _, G = series
    if G.times.size < 3:
        raise ValueError("need at least 3 time samples")
    lhs = G.d2 + 2 * G.d1
    r = lhs - consts.M6 * np.abs(G.values) ** p * (1 + G.times) ** (-a)
    src = G.extra.get("S")
    return ResidualSeries(G.times, r, None if src is None else lhs - src)


def calibrate_tol_fd(spec: ProblemSpec, delta, store_every, t_end, safety=10.0):
    """Finite-difference tolerance c * dt^2 from the exactly linear run.

    The linear run has G'' + 2G' = 0 identically, so its discrete residual
    measures the differencing error alone.
    """
    from .solver import evolve

    run = evolve(spec, delta, t_end, nonlinear=False, store_every=store_every)
    _, G = exp_moments(run)
    lin = np.max(np.abs(G.d2 + 2 * G.d1))
    dt = store_every * delta
    c = safety * max(lin, np.finfo(float).tiny) / dt**2
    return c * dt**2


def gt2_rhs(G: FunctionalSeries, M6, p, a):
    """M6 int_0^t e^{-2s} ds int_0^s e^{2r} |G|^p (1+r)^{-a} dr by nested trapezoids."""
    t = G.times
    inner = integrate.cumulative_trapezoid(np.exp(2 * t) * np.abs(G.values) ** p * (1 + t) ** (-a),
                                           t, initial=0.0)
    return M6 * integrate.cumulative_trapezoid(np.exp(-2 * t) * inner, t, initial=0.0)


def lower_bound(kind, consts: ConstantSet, eps, p, a, R, t):
    """Lower bounds for H and the time from which each one is claimed.

    kinds: ``cf`` and ``cg`` (subcritical, f- or g-driven), ``ccf`` and
    ``ccg`` (critical). Returns (values, t_start).
    """
    t = np.asarray(t, dtype=float)
    q = a / p
    if kind == "cf":
        return consts.D7 * eps * t ** (2 - q), 4.0
    if kind == "cg":
        return consts.D12 * eps * t ** (2 - q), 4 * consts.R1
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "ccf":
            return consts.C_f * eps / 4 * t * np.log(t / (2 * R)), 0.0
        if kind == "ccg":
            return consts.C_g * consts.R1 * eps / 4 * t * np.log(t / (4 * R)), 2 * consts.R1
    raise ValueError(f"unknown bound {kind!r}")


def sandwich_holds(run: SolutionRun, consts: ConstantSet, rtol=1e-9):
    """D5 * Htilde <= H <= D6 * Htilde on every stored time (subcritical H)."""
    H = strip_H(run, consts.R0, SUBCRITICAL)
    Ht = strip_H(run, consts.R0, SUBCRITICAL, weight_kind="time")
    lo = consts.D5 * Ht.values
    hi = consts.D6 * Ht.values
    scale = rtol * np.max(np.abs(Ht.values)) if Ht.values.size else 0.0
    return bool(np.all(lo <= H.values + scale) and np.all(H.values <= hi + scale))


def sy_holds(R0, R, s_max=100.0, n=400):
    """1/<y> >= (R0 / 2R) / (s + R0) for y in [s + R0, s + R], s in [0, s_max]."""
    s = np.linspace(0.0, s_max, n)[:, None]
    y = s + R0 + (R - R0) * np.linspace(0.0, 1.0, 50)[None, :]
    return bool(np.all(weight(y, 1.0) >= (R0 / (2 * R)) / (s + R0)))


def to_csv(path, H: FunctionalSeries | None, F: FunctionalSeries, G: FunctionalSeries,
           residual: ResidualSeries | None):
    """Rows ``t,H,Hp,Hpp,F,G,residual`` on the times of G; H columns are nan before its origin."""
    t = G.times
    cols = {}
    if H is not None:
        for name, arr in (("H", H.values), ("Hp", H.d1), ("Hpp", H.d2)):
            col = np.full(t.size, np.nan)
            idx = np.searchsorted(t, H.times)
            ok = (idx < t.size) & np.isclose(t[np.minimum(idx, t.size - 1)], H.times)
            col[idx[ok]] = arr[ok]
            cols[name] = col
    else:
        cols = {k: np.full(t.size, np.nan) for k in ("H", "Hp", "Hpp")}
    res = residual.residual if residual is not None else np.full(t.size, np.nan)
    lines = ["t,H,Hp,Hpp,F,G,residual"]
    for i in range(t.size):
        row = [t[i], cols["H"][i], cols["Hp"][i], cols["Hpp"][i], F.values[i], G.values[i], res[i]]
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""


def format_report(verdicts):
    """Plain-text report, one ``PASS``/``FAIL`` line per inequality."""
    lines = []
    for v in verdicts:
        lines.append(f"{'PASS' if v.passed else 'FAIL'}  {v.name}  {v.detail}".rstrip())
    lines.append(f"summary: {sum(v.passed for v in verdicts)}/{len(verdicts)} passed")
    return "\n".join(lines) + "\n"
