"""Closed-form blow-up bounds for the iteration lemmas and their equality ODEs.

Three bounds are covered:

* the power-weight lemma for H >= D1 t^{2-a/p}, H >= D2 int int r^{1-2p-a/p}|H|^p;
* the Li-Zhou type lemma for G'' + 2G' >= M2 |G|^p (1+t)^{-a}, any a <= 1;
* the logarithmic lemma used in the critical case.

:func:`ode_blowup` integrates the equality versions so each bound can be
compared with an actual escape time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

LEM1, LEM1_FORCED, LIZHOU, LEM3 = "lem1", "lem1_forced", "lizhou", "lem3"
SEQ_KINDS = ("lem1_abc", "lizhou_mk", "lizhou_hjt", "lizhou_ql", "products")

ESCAPE_LEVEL = 1.0e12
T_CAP_MAX = 1.0e300
N0_SCAN = 200


class ConstraintError(ValueError):
    """Parameters outside a lemma's hypotheses."""


class NoBlowUp(RuntimeError):
    """The equality ODE did not escape before the time cap."""


@dataclass(frozen=True)
class BoundReport:
    lemma: str
    inputs: dict
    constant: float
    t_bound: float
    t_observed: float = math.nan
    t_observed_half: float = math.nan

    @property
    def margin(self):
        return self.t_bound / self.t_observed

    @property
    def step_agreement(self):
        return abs(self.t_observed - self.t_observed_half) / self.t_observed_half


@dataclass(frozen=True)
class SequenceTable:
    """Recurrence and closed-form values, indexed from ``n_start``."""

    kind: str
    n_start: int
    recurrence: dict
    closed_form: dict
    extra: dict = field(default_factory=dict)

    def max_rel_error(self):
        worst = 0.0
        for key, closed in self.closed_form.items():
            rec = np.asarray(self.recurrence[key])
            closed = np.asarray(closed)
            err = np.abs(rec - closed) / np.maximum(np.abs(closed), 1.0)
            worst = max(worst, float(np.max(err)))
        return worst


# -- slicing products -------------------------------------------------------

def l_products(p, n):
    """l_1..l_n with l_k = prod_{i<=k} (1 + (2p)^{-i})."""
    terms = 1.0 + (2.0 * p) ** -np.arange(1, n + 1, dtype=float)
    return np.cumprod(terms)


def l_infinity(p):
    """Partial product of (1 + (2p)^{-i}) until it stops changing."""
    val, i = 1.0, 1
    while True:
        nxt = val * (1.0 + (2.0 * p) ** -i)
        if nxt == val:
            return val
        val, i = nxt, i + 1


def k_sums(n):
    """k_0..k_n with k_m = sum_{i<=m} 2^{-i}."""
    return np.cumsum(0.5 ** np.arange(n + 1, dtype=float))


def log_b(p, m):
    """log of b_m = (l_m / l_{m+1})^{p^m} = (1 + (2p)^{-(m+1)})^{-p^m}."""
    m = np.asarray(m, dtype=float)
    return -(p**m) * np.log1p((2.0 * p) ** -(m + 1))


def n0_index(p, scan=N0_SCAN):
    """Smallest n >= 1 with b_m >= (1/2)^{p^n} for all m in [1, scan]."""
    worst = float(np.min(log_b(p, np.arange(1, scan + 1))))
    n = 1
    while -(p**n) * math.log(2.0) > worst:
        n += 1
    return n


# -- sequences --------------------------------------------------------------

def seq_eval(kind, p, a, n, M1=1.0, M2=1.0, D1=1.0, D2=1.0) -> SequenceTable:
    """Evaluate one family of iteration sequences up to index ``n``.

    Recurrence values are produced by stepping the recursion; closed forms
    are evaluated independently. Coefficient sequences (C_n, K_n, T_n,
    L_n) are returned in log form in ``extra`` since they over- or
    underflow quickly.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if kind not in SEQ_KINDS:
        raise ValueError(f"unknown sequence kind {kind!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = np.arange(1, n + 1, dtype=float)
    with np.errstate(over="raise"):
        try:
            pw = p ** (idx - 1)
        except FloatingPointError as exc:
            raise OverflowError(f"p^{n} overflows") from exc
    if kind == "lem1_abc":
        a_rec, b_rec, logC = [(1 - a) / p + 2], [0.0], [math.log(D1)]
        for _ in range(1, n):
            a_next = p * a_rec[-1] + 2 + (1 - a) / p
            logC.append(math.log(D2) + p * logC[-1] - 2 * math.log(a_next))
            a_rec.append(a_next)
            b_rec.append(p * b_rec[-1] + 2 * p)
        closed = {
            "a": -(2 * p + 1 - a) / (1 - p) * pw + (2 * p + 1 - a) / (p * (1 - p)),
            "b": -(2 * p) / (1 - p) * pw + 2 * p / (1 - p),
        }
        return SequenceTable(kind, 1, {"a": a_rec, "b": b_rec}, closed, {"logC": logC})
    if kind == "lizhou_mk":
        if a >= 1:
            raise ValueError("the m/K sequences need a < 1; a = 1 uses lizhou_hjt")
        l = l_products(p, n + 1)
        m_rec, logK = [0.0], [math.log(M1)]
        for k in range(1, n):
            m = m_rec[-1]
            e = m * p - a
            logK.append(math.log(M2) + p * logK[-1] - (k + 2) * math.log(2 * p)
                        - math.log(e + 1) + e * math.log(l[k - 1] / l[k]))
            m_rec.append(m * p + 1 - a)
        closed = {"m": (1 - a) * (pw - 1) / (p - 1)}
        return SequenceTable(kind, 1, {"m": m_rec}, closed, {"logK": logK})
    if kind == "lizhou_hjt":
        l = l_products(p, n + 1)
        h_rec, j_rec, logT = [0.0], [0.0], [math.log(M1)]
        for k in range(1, n):
            h = h_rec[-1]
            logT.append(math.log(M2) + p * logT[-1] - (k + 2) * math.log(2 * p)
                        - math.log(h * p + 1) + h * p * math.log(l[k - 1] / l[k]))
            h_rec.append(h * p + 1)
            j_rec.append(j_rec[-1] * p + a)
        closed = {"h": (pw - 1) / (p - 1), "j": a * (pw - 1) / (p - 1)}
        return SequenceTable(kind, 1, {"h": h_rec, "j": j_rec}, closed, {"logT": logT})
    if kind == "lizhou_ql":
        q_rec, logL = [0.0], [math.log(M1)]
        for k in range(0, n):
            q_next = q_rec[-1] * p + 1
            logL.append(math.log(M2) + p * logL[-1] - math.log(4 * (2**k + 1) * q_next))
            q_rec.append(q_next)
        qidx = np.arange(0, n + 1, dtype=float)
        closed = {"q": (p**qidx - 1) / (p - 1)}
        return SequenceTable(kind, 0, {"q": q_rec}, closed, {"logL": logL})
    # products
    l = l_products(p, n)
    k = k_sums(n)
    extra = {"l": l, "l_inf": l_infinity(p), "k": k, "k_inf": float(np.sum(0.5 ** np.arange(64.0))),
             "n0": n0_index(p), "log_b": log_b(p, idx)}
    return SequenceTable(kind, 1, {}, {}, extra)


# -- bounds -----------------------------------------------------------------

def lemma1_constant(D2, p, a):
    return (p ** (2 * p / (p - 1) ** 2) * 2 ** ((2 * p + 1 - a) / (p - 1))
            * (2 * p + 1 - a) ** (2 / (p - 1)) / (D2 * (p - 1) ** 2) ** (1 / (p - 1)))


def lemma1_bound(D1, D2, p, a) -> BoundReport:
    """T > (D / D1)^{(p-1)/(1-a)} rules out H; D depends on D2, p, a only."""
    if a >= 1:
        raise ConstraintError("lemma1 needs a < 1")
    if not (p > 1 and D1 > 0 and D2 > 0):
        raise ConstraintError("lemma1 needs p > 1 and D1, D2 > 0")
    D = lemma1_constant(D2, p, a)
    t = (D / D1) ** ((p - 1) / (1 - a))
    return BoundReport(LEM1, {"D1": D1, "D2": D2, "p": p, "a": a}, D, t)


def lizhou_constant(M2, p, a, n0=None):
    if a == 1:
        return 2 ** ((2 * p - 1) / (p - 1) ** 2) * p ** (p / (p - 1) ** 2) * (4 / (M2 * (p - 1))) ** (1 / (p - 1))
    n0 = n0_index(p) if n0 is None else n0
    head = (2 * p) ** ((4 * p - 2) / (p - 1) ** 2)
    if a <= 0:
        return (head * 2 ** ((1 - a) * (p - 1 + p**n0) / (p - 1) ** 2) * (1 - a) ** (1 / (p - 1))
                * (M2 * (p - 1)) ** (-1 / (p - 1)))
    return head * 2 ** (((1 + a) * (p - 1) + p**n0) / (p - 1) ** 2) * (M2 * (p - 1)) ** (-1 / (p - 1))


def lizhou_bound(M1, M2, p, a) -> BoundReport:
    """Lifespan bound for G >= M1, G >= M2 int e^{-2s} int e^{2r}|G|^p (1+r)^{-a}."""
    if a > 1:
        raise ConstraintError("the Li-Zhou bound covers a <= 1 only")
    if not (p > 1 and M1 > 0 and M2 > 0):
        raise ConstraintError("lizhou needs p > 1 and M1, M2 > 0")
    n0 = n0_index(p)
    M = lizhou_constant(M2, p, a, n0)
    if a == 1:
        expo = (M / M1) ** (p - 1)
        t = math.exp(expo) if expo < 709 else math.inf
    else:
        t = (M / M1) ** ((p - 1) / (1 - a))
    return BoundReport(LIZHOU, {"M1": M1, "M2": M2, "p": p, "a": a, "n0": n0}, M, t)


def r_inf_ratio():
    """prod_{k>=1} (1 + 2^{-k}) to machine precision."""
    val, k = 1.0, 1
    while True:
        nxt = val * (1.0 + 0.5**k)
        if nxt == val:
            return val
        val, k = nxt, k + 1


def lemma3_bound(A, B, R, a, b, c, x, y, z, p) -> BoundReport:
    """Logarithmic lemma: T <= exp(max{2 log R_inf, (D/A)^{(p-1)/(x+z+1+(c-b)(p-1))}})."""
    checks = [
        (p > 1, "p > 1"),
        (a <= 1, "a <= 1"),
        (b >= max(0.0, x / (p - 1)), "b >= max{0, x/(p-1)}"),
        (math.isclose(y + p * a, -1.0, rel_tol=0, abs_tol=1e-12), "y + p a = -1"),
        (z + c * p > -1, "z + c p > -1"),
        (z + c * p >= c - 1, "z + c p >= c - 1"),
        (A > 0 and B > 0, "A, B > 0"),
        (R > 1, "R > 1"),
    ]
    for ok, name in checks:
        if not ok:
            raise ConstraintError(f"violated: {name}")
    D = (2 ** (c + (p + (z + 1) * (p - 1)) / (p - 1) ** 2) * p ** (p / (p - 1) ** 2)
         * (max(c + (z + 1) / (p - 1), c + (z + 1) / p) / B) ** (1 / (p - 1)))
    R_inf = R * r_inf_ratio()
    denom = x + z + 1 + (c - b) * (p - 1)
    expo = max(2 * math.log(R_inf), (D / A) ** ((p - 1) / denom))
    t = math.exp(expo) if expo < 709 else math.inf
    inputs = dict(A=A, B=B, R=R, a=a, b=b, c=c, x=x, y=y, z=z, p=p, R_inf=R_inf)
    return BoundReport(LEM3, inputs, D, t)


# -- equality ODEs ----------------------------------------------------------

def _escape_time(kind, p, a, c2, forcing, t0, y0, step0, t_cap, level=ESCAPE_LEVEL):
    t = _kernels.escape_time(kind, float(p), float(a), float(c2), float(forcing), float(t0),
                             float(y0[0]), float(y0[1]), float(step0), float(t_cap), float(level))
    if math.isnan(t):
        raise NoBlowUp(f"no escape before t_cap={t_cap:g}")
    return t


def ode_blowup(kind, params, E=1.0, step0=0.01, t_cap=None):
    """Escape time of the equality ODE, run at step0 and step0/2.

    lem1:   H'' = D2 t^{1-2p-a/p} |H|^p, H(E) = D1 E^{2-a/p},
            H'(E) = D1 (2-a/p) E^{1-a/p};
    lem1_forced: same data, H'' = D1 q(q-1) t^{q-2} + D2 t^{1-2p-a/p} |H|^p
            with q = 2-a/p, so H = D1 t^q + D2 int int (...) keeps both
            hypotheses of the lemma (the plain lem1 ODE need not);
    lizhou: G'' + 2G' = M2 |G|^p (1+t)^{-a}, G(E) = M1, G'(E) = 0.

    Returns a :class:`BoundReport` carrying the lemma bound, the escape time
    at step0/2 as ``t_observed`` and the step0 value for the Richardson
    comparison. Raises :class:`NoBlowUp` past t_cap (default 10 t_bound,
    clipped to 1e300 when the bound itself overflows).
    """
    p, a = params["p"], params["a"]
    if kind in (LEM1, LEM1_FORCED):
        D1, D2 = params["D1"], params["D2"]
        bound = lemma1_bound(D1, D2, p, a)
        q = 2 - a / p
        y0 = (D1 * E**q, D1 * q * E ** (q - 1))
        forcing = D1 * q * (q - 1) if kind == LEM1_FORCED else 0.0
        code, c2 = 0, D2
    elif kind == LIZHOU:
        M1, M2 = params["M1"], params["M2"]
        if M2 == 0:
            # linear damped ODE: G stays at M1 forever
            bound = BoundReport(LIZHOU, dict(params), math.nan, math.inf)
        else:
            bound = lizhou_bound(M1, M2, p, a)
        y0 = (M1, 0.0)
        forcing, code, c2 = 0.0, 1, M2
    else:
        raise ValueError(f"unknown ODE kind {kind!r}")
    if t_cap is None:
        t_cap = min(10 * bound.t_bound, T_CAP_MAX)
    coarse = _escape_time(code, p, a, c2, forcing, E, y0, step0, t_cap)
    fine = _escape_time(code, p, a, c2, forcing, E, y0, step0 / 2, t_cap)
    lemma = LEM1_FORCED if kind == LEM1_FORCED else bound.lemma
    return BoundReport(lemma, {**bound.inputs, "E": E}, bound.constant, bound.t_bound,
                       t_observed=fine, t_observed_half=coarse)


def sweep_csv(path, reports):
    """Rows ``lemma,p,a,param1,param2,t_bound,t_observed,margin``."""
    lines = ["lemma,p,a,param1,param2,t_bound,t_observed,margin"]
    for r in reports:
        inp = r.inputs
        p1 = inp.get("D1", inp.get("M1", math.nan))
        p2 = inp.get("D2", inp.get("M2", math.nan))
        row = [r.lemma, repr(float(inp["p"])), repr(float(inp["a"])), repr(float(p1)), repr(float(p2)),
               repr(float(r.t_bound)), repr(float(r.t_observed)), repr(float(r.margin))]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def fit_loglog(xs, ys):
    """Least-squares slope and intercept of log y against log x."""
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope), float(intercept)
