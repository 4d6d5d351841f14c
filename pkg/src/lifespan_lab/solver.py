"""Characteristic-grid evolution, Duhamel area operator and lifespan estimation.

The grid has Delta x = Delta t, so the Riemann invariants r = u_t + u_x and
s = u_t - u_x are transported exactly from node to node and all
discretisation error sits in the source integration.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .model import LightCone, ProblemSpec, weight

log = logging.getLogger(__name__)

SURVIVED = "survived"
BLEW_UP = "blew_up"
FAILED = "failed"

DEFAULT_THETA = 1.0e3
DEFAULT_THRESHOLDS = (DEFAULT_THETA, 4 * DEFAULT_THETA, 16 * DEFAULT_THETA)


class NumericalFailure(RuntimeError):
    """Non-finite values appeared before any blow-up threshold was crossed."""


@dataclass
class CharGrid:
    """State of the characteristic grid at one time level."""

    delta: float
    level: int
    x0: float
    v: np.ndarray
    w: np.ndarray
    u: np.ndarray

    @property
    def t(self):
        return self.level * self.delta

    @property
    def x(self):
        return self.x0 + self.delta * np.arange(self.u.size)


@dataclass(frozen=True)
class SolutionRun:
    """Outcome of :func:`evolve`.

    ``times``, ``max_w`` and ``max_u`` hold one entry per computed level.
    Full fields are kept only at the levels listed in ``field_levels``;
    ``final`` is the grid state at the last computed level.
    """

    spec: ProblemSpec
    delta: float
    status: str
    t_end: float
    times: np.ndarray
    max_w: np.ndarray
    max_u: np.ndarray
    x: np.ndarray
    field_levels: np.ndarray
    u_fields: np.ndarray | None = None
    w_fields: np.ndarray | None = None
    v_fields: np.ndarray | None = None
    nonlinear: bool = True
    threshold: float = math.inf
    final: CharGrid | None = None

    @property
    def blew_up(self):
        return self.status == BLEW_UP

    @property
    def field_times(self):
        return self.field_levels * self.delta

    def crossing_time(self, theta):
        """First time max|u_x| reaches ``theta``, interpolated linearly in 1/max|u_x|.

        Returns None when the run never reached ``theta``.
        """
        hit = np.nonzero(self.max_w >= theta)[0]
        if hit.size == 0:
            return None
        k = int(hit[0])
        if k == 0:
            return float(self.times[0])
        m0, m1 = self.max_w[k - 1], self.max_w[k]
        t0, t1 = self.times[k - 1], self.times[k]
        if not np.isfinite(m1) or m0 <= 0:
            return float(t1)
        # blow-up is close to |u_x| ~ c/(T - t), which is linear in 1/|u_x|
        lam = (1.0 / m0 - 1.0 / theta) / (1.0 / m0 - 1.0 / m1)
        return float(t0 + lam * (t1 - t0))

    def field_at(self, t, name="u"):
        """Stored field closest to time ``t``."""
        arr = {"u": self.u_fields, "w": self.w_fields, "v": self.v_fields}[name]
        if arr is None:
            raise ValueError("run was produced without stored fields")
        k = int(np.argmin(np.abs(self.field_times - t)))
        return arr[k]

    def snapshot_csv(self, path):
        """Write ``t,max_ux,max_u`` rows, one per level."""
        lines = ["t,max_ux,max_u"]
        for t, mw, mu in zip(self.times, self.max_w, self.max_u):
            lines.append(f"{t!r},{float(mw)!r},{float(mu)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    def dump_fields(self, path, name="w"):
        """Binary dump: int64 header (levels, nodes, round(delta * 2**32)) then float64 rows."""
        arr = {"u": self.u_fields, "w": self.w_fields, "v": self.v_fields}[name]
        if arr is None:
            raise ValueError("run was produced without stored fields")
        arr = np.ascontiguousarray(arr, dtype="<f8")
        header = struct.pack("<3q", arr.shape[0], arr.shape[1], int(round(self.delta * 2**32)))
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes(order="C"))


def read_field_dump(path):
    """Inverse of :meth:`SolutionRun.dump_fields`; returns (array, delta)."""
    raw = Path(path).read_bytes()
    levels, nodes, dfix = struct.unpack("<3q", raw[:24])
    arr = np.frombuffer(raw[24:], dtype="<f8").reshape(levels, nodes)
    return arr, dfix / 2**32


@dataclass(frozen=True)
class LifespanEstimate:
    t_star: float
    t_lo: float
    t_hi: float
    thresholds_used: tuple = ()
    refinement_ratio: float = math.nan
    crossings: dict = field(default_factory=dict)
    t_star_by_delta: dict = field(default_factory=dict)

    @property
    def survived(self):
        return math.isinf(self.t_star)


def duhamel_area(field_fn, x, t, a, quad_n=200, chunk=2_000_000):
    """(1/2) int_0^t ds int_{x-t+s}^{x+t-s} field(y, s) <y>^{-a} dy by trapezoids.

    ``field_fn`` must accept broadcast arrays (y, s). ``quad_n`` nodes are
    used along each axis.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if quad_n < 2:
        raise ValueError("quad_n must be >= 2")
    if t == 0:
        return 0.0
    s = np.linspace(0.0, t, quad_n)
    unit = np.linspace(-1.0, 1.0, quad_n)
    wy = np.full(quad_n, 2.0 / (quad_n - 1))
    wy[0] = wy[-1] = 1.0 / (quad_n - 1)
    inner = np.empty(quad_n)
    rows = max(1, chunk // quad_n)
    for k0 in range(0, quad_n, rows):
        sk = s[k0:k0 + rows, None]
        half = t - sk
        y = x + half * unit[None, :]
        vals = np.asarray(field_fn(y, sk), dtype=float)
        if a != 0:
            vals = vals * weight(y, a)
        # segment length 2*half; unit weights integrate over [-1, 1]
        inner[k0:k0 + rows] = half[:, 0] * (vals @ wy)
    return 0.5 * float(np.trapezoid(inner, s))


def _initial_state(spec, nodes_x):
    f, fp, _, g, _ = spec.data.table(nodes_x)
    eps = spec.eps
    r = eps * (g + fp)
    s = eps * (g - fp)
    u = eps * f
    return r, s, u


def evolve(spec: ProblemSpec, delta, t_max, blow_threshold=math.inf, *,
           nonlinear=True, store_every=None, check_every=100, raise_on_failure=False):
    """Advance the problem on the unit-CFL characteristic grid.

    Stops at the first level with max|u_x| >= ``blow_threshold`` (status
    ``blew_up``) or at ``t_max`` (status ``survived``). Non-finite values
    before the threshold give status ``failed``, or raise
    :class:`NumericalFailure` when ``raise_on_failure`` is set.

    ``store_every`` keeps full (u, u_x, u_t) rows every that many levels.
    """
    if not delta > 0 or not t_max > 0:
        raise ValueError("delta and t_max must be positive")
    n_levels = int(math.ceil(t_max / delta - 1e-9))
    half_width = int(math.ceil((t_max + spec.R) / delta)) + 3
    size = 2 * half_width + 1
    x = (np.arange(size) - half_width) * delta
    cone = LightCone(spec.R)

    r, s, u = _initial_state(spec, x)
    wgt = weight(x, spec.a)
    n_old = np.zeros(size)
    p = float(spec.p)
    if nonlinear:
        _kernels.source(r, s, wgt, p, 1, size - 2, n_old)
    r_new, s_new, u_new, n_new = (np.zeros(size) for _ in range(4))

    times = np.empty(n_levels + 1)
    max_w = np.empty(n_levels + 1)
    max_u = np.empty(n_levels + 1)
    times[0] = 0.0
    max_w[0] = float(np.max(np.abs(0.5 * (r - s))))
    max_u[0] = float(np.max(np.abs(u)))

    stored_levels, u_rows, w_rows, v_rows = [], [], [], []

    def keep(level):
        stored_levels.append(level)
        u_rows.append(u.copy())
        w_rows.append(0.5 * (r - s))
        v_rows.append(0.5 * (r + s))

    if store_every:
        keep(0)

    base = int(math.ceil(spec.R / delta)) + 2
    status = SURVIVED
    last = n_levels
    for n in range(1, n_levels + 1):
        k = min(base + n, half_width - 1)
        lo, hi = half_width - k, half_width + k
        mw, mu, finite = _kernels.heun_level(r, s, u, n_old, wgt, p, delta, lo, hi,
                                            nonlinear, r_new, s_new, u_new, n_new)
        r, r_new = r_new, r
        s, s_new = s_new, s
        u, u_new = u_new, u
        n_old, n_new = n_new, n_old
        times[n] = n * delta
        max_w[n] = mw
        max_u[n] = mu
        if not finite:
            status, last = FAILED, n
            break
        if mw >= blow_threshold:
            status, last = BLEW_UP, n
            if store_every:
                keep(n)
            break
        if store_every and n % store_every == 0:
            keep(n)
        if check_every and n % check_every == 0:
            outside = ~cone.contains(x, n * delta + 1e-9 * delta)
            if np.any(r[outside] != 0.0) or np.any(s[outside] != 0.0):
                raise AssertionError(f"nonzero field outside the light cone at level {n}")

    if status == FAILED:
        log.warning("non-finite values at t=%g before threshold %g", last * delta, blow_threshold)
        if raise_on_failure:
            raise NumericalFailure(f"non-finite values at t={last * delta:g}")

    fields = {}
    if store_every:
        fields = dict(u_fields=np.array(u_rows), w_fields=np.array(w_rows), v_fields=np.array(v_rows))
    with np.errstate(invalid="ignore", over="ignore"):
        final = CharGrid(delta, last, float(x[0]), 0.5 * (r + s), 0.5 * (r - s), u.copy())
    return SolutionRun(
        spec=spec, delta=delta, status=status, t_end=last * delta,
        times=times[:last + 1].copy(), max_w=max_w[:last + 1].copy(), max_u=max_u[:last + 1].copy(),
        x=x, field_levels=np.array(stored_levels, dtype=int), nonlinear=nonlinear,
        threshold=blow_threshold,
        final=final, **fields)


def extrapolate_crossings(thresholds, crossings):
    """Intercept of a least-squares line of t_theta against 1/log(theta)."""
    z = 1.0 / np.log(np.asarray(thresholds, dtype=float))
    tc = np.asarray(crossings, dtype=float)
    slope, intercept = np.polyfit(z, tc, 1)
    return float(intercept)


def estimate_lifespan(spec: ProblemSpec, delta0, thresholds=DEFAULT_THRESHOLDS, t_max=1.0e3,
                      levels=3) -> LifespanEstimate:
    """Blow-up time from runs at delta0, delta0/2, delta0/4.

    Each run records the times at which max|u_x| crosses the thresholds; the
    limit in 1/log(theta) gives t*(delta). The finest grid supplies t_star,
    bracketed by its last crossing and t_star plus the crossing spread.
    """
    thresholds = tuple(float(v) for v in thresholds)
    if len(thresholds) < 3 or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("need at least 3 strictly increasing thresholds")
    crossings, t_stars = {}, {}
    for k in range(levels):
        d = delta0 / 2**k
        run = evolve(spec, d, t_max, blow_threshold=thresholds[-1], raise_on_failure=True)
        if not run.blew_up:
            return LifespanEstimate(math.inf, t_max, math.inf, thresholds, math.nan)
        tc = [run.crossing_time(th) for th in thresholds]
        crossings[d] = tuple(tc)
        t_stars[d] = max(extrapolate_crossings(thresholds, tc), tc[-1])
    ds = sorted(t_stars, reverse=True)
    finest = ds[-1]
    tc = crossings[finest]
    t_star = t_stars[finest]
    spread = max(tc) - min(tc)
    ratio = math.nan
    if len(ds) >= 3:
        num = abs(t_stars[ds[-3]] - t_stars[ds[-2]])
        den = abs(t_stars[ds[-2]] - t_stars[ds[-1]])
        ratio = num / den if den > 0 else math.inf
    t_hi = t_star + spread
    if spread > 0.05 * t_star:
        grid_gap = abs(t_stars[ds[-2]] - t_star) if len(ds) >= 2 else spread
        t_hi += max(spread, grid_gap)
    return LifespanEstimate(t_star, tc[-1], t_hi, thresholds, ratio,
                            crossings=crossings, t_star_by_delta=t_stars)


def area_on_grid(run: SolutionRun, i_node, level_idx, p=None, a=None):
    """L_a(|u_x|^p) at a stored node by trapezoids over the stored levels.

    Needs fields stored every level (``store_every=1``). The backward
    triangle of node (i, n) meets level m in nodes i-(n-m) .. i+(n-m).
    """
    if run.w_fields is None:
        raise ValueError("run has no stored fields")
    p = run.spec.p if p is None else p
    a = run.spec.a if a is None else a
    levels = run.field_levels
    if np.any(np.diff(levels) != 1):
        raise ValueError("area_on_grid needs every level stored")
    n = level_idx
    d = run.delta
    wgt = weight(run.x, a)
    inner = np.zeros(n + 1)
    last = run.x.size - 1
    for m in range(n):
        h = n - m
        # the field vanishes beyond the array, so clipping loses nothing
        lo, hi = max(0, i_node - h), min(last, i_node + h)
        seg = np.abs(run.w_fields[m, lo:hi + 1]) ** p * wgt[lo:hi + 1]
        inner[m] = np.trapezoid(seg, dx=d)
    return 0.5 * float(np.trapezoid(inner, dx=d))
