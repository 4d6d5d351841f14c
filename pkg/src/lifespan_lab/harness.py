"""epsilon scans, lifespan-exponent fits and deterministic output."""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .model import ProblemSpec
from .solver import BLEW_UP, DEFAULT_THRESHOLDS, SURVIVED, NumericalFailure, estimate_lifespan

POWER, EXP, GLOBAL = "power", "exp", "global"
SCAN_COLUMNS = ("eps", "delta_finest", "t_star", "t_lo", "t_hi", "status")
WORKERS_ENV = "LIFESPAN_LAB_WORKERS"
MIN_ROWS = 5
PEARSON_MIN = 0.98


class ScanError(RuntimeError):
    """A scan row failed numerically; ``eps`` names the offending amplitude."""

    def __init__(self, eps, cause):
        super().__init__(f"numerical failure at eps={eps!r}: {cause}")
        self.eps = eps


class FingerprintMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ScanRow:
    eps: float
    delta_finest: float
    t_star: float
    t_lo: float
    t_hi: float
    status: str

    def csv(self):
        nums = (self.eps, self.delta_finest, self.t_star, self.t_lo, self.t_hi)
        return ",".join(repr(float(v)) for v in nums) + "," + self.status


def fingerprint(spec: ProblemSpec, settings: dict) -> str:
    """sha256 of the ProblemSpec (without eps) and the solver settings."""
    payload = {k: v for k, v in spec.as_dict().items() if k != "eps"}
    payload["solver"] = settings
    blob = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ScanTable:
    p: float
    a: float
    fingerprint: str
    rows: tuple = ()
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: -r.eps))
        eps = [r.eps for r in rows]
        if len(set(eps)) != len(eps):
            raise ValueError("duplicate eps rows")
        object.__setattr__(self, "rows", rows)

    def merge(self, other: "ScanTable") -> "ScanTable":
        if other.fingerprint != self.fingerprint:
            raise FingerprintMismatch("scan tables come from different specs or solver settings")
        return ScanTable(self.p, self.a, self.fingerprint, self.rows + other.rows, self.settings)

    def blown(self):
        return [r for r in self.rows if r.status == BLEW_UP]

    def without_largest(self) -> "ScanTable":
        return ScanTable(self.p, self.a, self.fingerprint, self.rows[1:], self.settings)

    def to_csv(self):
        return "\n".join([",".join(SCAN_COLUMNS)] + [r.csv() for r in self.rows]) + "\n"


@dataclass(frozen=True)
class FitReport:
    regime: str
    slope: float
    intercept: float
    stderr: float
    predicted_slope: float
    passed: bool
    tolerance: float = math.nan
    pearson_r: float = math.nan


def worker_count(configured=1):
    env = os.environ.get(WORKERS_ENV)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer")
        return n
    return max(1, int(configured))


def check_eps_grid(eps_grid):
    """Geometric with ratio in [1.2, 2] and at least five points."""
    eps = sorted((float(e) for e in eps_grid), reverse=True)
    if len(eps) < MIN_ROWS:
        raise ValueError(f"need at least {MIN_ROWS} eps values")
    if eps[-1] <= 0:
        raise ValueError("eps values must be positive")
    ratios = np.array(eps[:-1]) / np.array(eps[1:])
    if not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("eps grid is not geometric")
    if not 1.2 - 1e-12 <= ratios[0] <= 2 + 1e-12:
        raise ValueError(f"eps ratio {ratios[0]:.4g} outside [1.2, 2]")
    return eps


def geometric_grid(eps_max, ratio, n):
    return [eps_max / ratio**k for k in range(n)]


def lifespan_scan(spec: ProblemSpec, eps_grid, delta0, thresholds=DEFAULT_THRESHOLDS,
                  t_max=1.0e3, levels=3, workers=1) -> ScanTable:
    """Estimate t* for every eps; rows run concurrently, sorted by eps."""
    eps = check_eps_grid(eps_grid)
    settings = {"delta0": float(delta0), "thresholds": [float(v) for v in thresholds],
                "t_max": float(t_max), "levels": int(levels)}
    finest = delta0 / 2 ** (levels - 1)

    def one(e):
        try:
            est = estimate_lifespan(spec.with_eps(e), delta0, thresholds, t_max=t_max, levels=levels)
        except NumericalFailure as exc:
            raise ScanError(e, exc) from exc
        if est.survived:
            return ScanRow(e, finest, math.inf, t_max, math.inf, SURVIVED)
        return ScanRow(e, finest, est.t_star, est.t_lo, est.t_hi, BLEW_UP)

    n = worker_count(workers)
    if n == 1:
        rows = [one(e) for e in eps]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(one, eps))
    return ScanTable(spec.p, spec.a, fingerprint(spec, settings), tuple(rows), settings)


def predicted_slope(p, a):
    return -(p - 1) / (1 - a)


def fit_exponent(table: ScanTable, regime, tolerance=None) -> FitReport:
    """Fit log t* against log eps (power), eps^{-(p-1)} (exp), or check survival (global).

    The default power-law tolerance is 15% of the predicted slope.
    """
    if regime == GLOBAL:
        ok = bool(table.rows) and all(r.status == SURVIVED for r in table.rows)
        return FitReport(GLOBAL, math.nan, math.nan, math.nan, math.nan, ok)
    rows = table.blown()
    if len(rows) < MIN_ROWS:
        raise ValueError(f"need at least {MIN_ROWS} blow-up rows, got {len(rows)}")
    eps = np.array([r.eps for r in rows])
    logt = np.log([r.t_star for r in rows])
    if regime == POWER:
        fit = stats.linregress(np.log(eps), logt)
        pred = predicted_slope(table.p, table.a)
        tol = 0.15 * abs(pred) if tolerance is None else tolerance
        ok = abs(fit.slope - pred) <= tol
        return FitReport(POWER, float(fit.slope), float(fit.intercept), float(fit.stderr),
                         pred, bool(ok), tol, float(fit.rvalue))
    if regime == EXP:
        fit = stats.linregress(eps ** (-(table.p - 1)), logt)
        ok = fit.slope > 0 and fit.rvalue >= PEARSON_MIN
        return FitReport(EXP, float(fit.slope), float(fit.intercept), float(fit.stderr),
                         math.nan, bool(ok), PEARSON_MIN, float(fit.rvalue))
    raise ValueError(f"unknown regime {regime!r}")


def slope_shift(table: ScanTable, regime=POWER):
    """Change in fitted slope when the largest-eps row is dropped."""
    return abs(fit_exponent(table, regime).slope - fit_exponent(table.without_largest(), regime).slope)


def emit(results: ScanTable, out_dir, formats=("csv", "svg"), fit: FitReport | None = None,
         stem="scan"):
    """Write ``<stem>.csv`` and/or ``<stem>.svg``; returns the written paths."""
    if results is None or not results.rows:
        raise ValueError("nothing to emit")
    unknown = set(formats) - {"csv", "svg"}
    if unknown:
        raise ValueError(f"unknown formats {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / f"{stem}.csv"
        path.write_text(results.to_csv())
        written.append(path)
    if "svg" in formats:
        path = out / f"{stem}.svg"
        _plot(results, fit, path)
        written.append(path)
    return written


def _plot(table, fit, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = table.blown()
    with matplotlib.rc_context({"svg.hashsalt": "lifespan-lab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        if rows:
            le = np.log([r.eps for r in rows])
            lt = np.log([r.t_star for r in rows])
            ax.plot(le, lt, "o", label="t* (finest grid)")
            if fit is not None and fit.regime == POWER and len(rows) >= 2:
                ax.plot(le, fit.intercept + fit.slope * le, "-",
                        label=f"slope {fit.slope:.3f} (predicted {fit.predicted_slope:.3f})")
            ax.legend()
        ax.set_xlabel("log eps")
        ax.set_ylabel("log t*")
        ax.set_title(f"p={table.p:g}, a={table.a:g}")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
