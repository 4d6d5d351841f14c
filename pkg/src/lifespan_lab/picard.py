"""Picard iteration for the u_x integral equation and its a-priori estimate.

w_{j+1} = eps u0_x + Lbar'_a(|w_j|^p), w_1 = eps u0_x, solved on the same
unit-CFL grid as :mod:`lifespan_lab.solver` so line quadratures need no
interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .model import LightCone, ProblemSpec, free_solution, weight

PLUS, MINUS = "plus", "minus"


@dataclass(frozen=True)
class GridField:
    """Values on the (levels x nodes) characteristic grid."""

    values: np.ndarray
    x: np.ndarray
    delta: float

    @property
    def times(self):
        return self.delta * np.arange(self.values.shape[0])


@dataclass(frozen=True)
class PicardReport:
    iterate_norms: list
    diff_norms: list
    contraction_ratios: list
    converged: bool
    diverged: bool
    final_field: GridField

    def to_csv(self, path):
        """Rows ``j,norm,diff,ratio``; row j carries ||w_j|| and ||w_j - w_{j-1}||."""
        lines = ["j,norm,diff,ratio"]
        for j, norm in enumerate(self.iterate_norms, start=1):
            diff = self.diff_norms[j - 2] if j >= 2 else math.nan
            ratio = self.contraction_ratios[j - 3] if j >= 3 else math.nan
            lines.append(f"{j},{float(norm)!r},{float(diff)!r},{float(ratio)!r}")
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class AprioriReport:
    T: float
    a: float
    measured_lhs: float
    rhs_factor: float
    implied_C: float
    dominated: bool


def duhamel_line(field_fn, x, t, a, sign=MINUS, quad_n=200):
    """(1/2) int_0^t F(x+t-s, s) ds  +/-  (1/2) int_0^t F(x-t+s, s) ds, F = field <y>^{-a}.

    ``sign='plus'`` gives L'_a, ``sign='minus'`` its conjugate.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if sign not in (PLUS, MINUS):
        raise ValueError("sign must be 'plus' or 'minus'")
    if t == 0:
        return 0.0
    s = np.linspace(0.0, t, quad_n)
    yl, yr = x + t - s, x - t + s
    fl = np.asarray(field_fn(yl, s), dtype=float) * weight(yl, a)
    fr = np.asarray(field_fn(yr, s), dtype=float) * weight(yr, a)
    sgn = 1.0 if sign == PLUS else -1.0
    return 0.5 * float(np.trapezoid(fl, s)) + sgn * 0.5 * float(np.trapezoid(fr, s))


def line_operator(src, x, delta, a, sign=MINUS):
    """L'_a or Lbar'_a of grid values ``src`` (levels x nodes) at every node."""
    src = np.ascontiguousarray(src, dtype=float) * weight(x, a)[None, :]
    a_int = np.empty_like(src)
    b_int = np.empty_like(src)
    _kernels.line_integrals(src, float(delta), a_int, b_int)
    sgn = 1.0 if sign == PLUS else -1.0
    return 0.5 * (a_int + sgn * b_int)


def apriori_factor(T, a, R):
    """E(T): (T+2R)^{1-a} for a < 1, log(T+2R) for a = 1, 1 for a > 1."""
    if T < 0 or R < 1:
        raise ValueError("need T >= 0 and R >= 1")
    if a < 1:
        return (T + 2 * R) ** (1 - a)
    if a == 1:
        return math.log(T + 2 * R)
    return 1.0


def cone_grid(R, T, delta):
    """Node coordinates covering |x| <= T + R with a three-node margin."""
    half = int(math.ceil((T + R) / delta)) + 3
    x = (np.arange(2 * half + 1) - half) * delta
    levels = int(round(T / delta)) + 1
    return x, levels


def picard_run(spec: ProblemSpec, T, delta, j_max=50, tol=1e-13) -> PicardReport:
    """Iterate the u_x integral equation on [0, T].

    Stops once the sup-norm update falls to ``tol``, at ``j_max`` iterates,
    or when the update grows three times in a row (reported as diverged).
    """
    if not (T > 0 and delta > 0) or j_max < 2:
        raise ValueError("need T, delta > 0 and j_max >= 2")
    x, levels = cone_grid(spec.R, T, delta)
    t = delta * np.arange(levels)
    _, ux0, _, _ = free_solution(spec.data, spec.eps, x[None, :], t[:, None])
    outside = ~LightCone(spec.R).contains(x[None, :], t[:, None] + 1e-9 * delta)

    w = ux0
    norms, diffs, ratios = [float(np.max(np.abs(w)))], [], []
    converged = diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(1, j_max):
            w_next = ux0 + line_operator(np.abs(w) ** spec.p, x, delta, spec.a, MINUS)
            if np.any(w_next[outside] != 0.0):
                raise AssertionError("Picard iterate left the light cone")
            diff = float(np.max(np.abs(w_next - w)))
            norms.append(float(np.max(np.abs(w_next))))
            if diffs:
                ratios.append(diff / diffs[-1] if diffs[-1] > 0 else 0.0)
            diffs.append(diff)
            w = w_next
            if not np.isfinite(diff):
                diverged = True
                break
            if diff <= tol and (not ratios or ratios[-1] < 1):
                converged = True
                break
            if len(diffs) >= 4 and all(b > a for a, b in zip(diffs[-4:], diffs[-3:])):
                diverged = True
                break
    return PicardReport(norms, diffs, ratios, converged, diverged, GridField(w, x, delta))


def apriori_check(w: GridField, T, a, R, p) -> AprioriReport:
    """Measure ||Lbar'_a(|w|^p)|| against ||w||^p E(T) on the grid.

    Also checks |Lbar'_a(v)| <= L'_a(|v|) at every node.
    """
    keep = w.times <= T + 1e-12
    vals = w.values[keep]
    src = np.abs(vals) ** p
    conj = line_operator(src, w.x, w.delta, a, MINUS)
    full = line_operator(src, w.x, w.delta, a, PLUS)
    dominated = bool(np.all(np.abs(conj) <= full * (1 + 1e-12) + 1e-300))
    lhs = float(np.max(np.abs(conj)))
    rhs = float(np.max(np.abs(vals)) ** p * apriori_factor(T, a, R))
    implied = lhs / rhs if rhs > 0 else 0.0
    return AprioriReport(T, a, lhs, rhs, implied, dominated)


def domination_holds(v, x, delta, a):
    """Pointwise |Lbar'_a(v)| <= L'_a(|v|) for an arbitrary grid field v."""
    conj = line_operator(v, x, delta, a, MINUS)
    full = line_operator(np.abs(v), x, delta, a, PLUS)
    return bool(np.all(np.abs(conj) <= full * (1 + 1e-12) + 1e-300))
