"""Command-line entry point: ``python -m lifespan_lab <subcommand>``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import itertools
import math
import sys
from pathlib import Path

import numpy as np

from . import functionals as fn
from . import harness, odelab, picard, solver
from .model import LightCone, ProblemSpec

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "problem": {"p": "2", "a": "0", "eps": "0.1", "R": "1", "preset": "bump_both",
                "amp_f": "1", "amp_g": "1"},
    "solver": {"delta": "0.01", "t_max": "1000", "thresholds": "1e3, 4e3, 1.6e4", "levels": "3",
               "store_every": "1", "check_points": "20", "j_max": "50", "tol": "1e-13",
               "step0": "0.01", "E": "1"},
    "scan": {"eps_max": "0.2", "eps_ratio": "1.4142135623730951", "points": "9", "workers": "1",
             "regime": "auto", "tolerance": "", "lemmas": "lem1, lizhou",
             "p_values": "1.5, 2, 3", "a_values": "-1, -0.5, 0, 0.5", "c_values": "0.5, 1, 2"},
    "output": {"formats": "csv, svg", "stem": "", "dump": "none"},
}


class ConfigError(ValueError):
    pass


def load_config(path=None):
    """Defaults overlaid with ``path``; unknown sections or keys are errors."""
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str
    cfg.read_dict(DEFAULTS)
    if path is None:
        return cfg
    user = configparser.ConfigParser(interpolation=None)
    user.optionxform = str
    try:
        with open(path) as fh:
            user.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for section in user.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in user[section].items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            cfg[section][key] = value
    return cfg


def _num(cfg, section, key, kind=float):
    raw = cfg[section][key]
    try:
        return kind(float(raw)) if kind is int else kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from exc


def _list(cfg, section, key, kind=float):
    raw = cfg[section][key]
    try:
        return [kind(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a list") from exc


def spec_from(cfg) -> ProblemSpec:
    pr = cfg["problem"]
    try:
        return ProblemSpec(p=_num(cfg, "problem", "p"), a=_num(cfg, "problem", "a"),
                           eps=_num(cfg, "problem", "eps"), R=_num(cfg, "problem", "R"),
                           preset=pr["preset"],
                           preset_params=(_num(cfg, "problem", "amp_f"), _num(cfg, "problem", "amp_g")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _stem(cfg, default):
    return cfg["output"]["stem"] or default


def _formats(cfg):
    fmts = [f.strip() for f in cfg["output"]["formats"].split(",") if f.strip()]
    if set(fmts) - {"csv", "svg"}:
        raise ConfigError(f"unknown output formats {fmts}")
    return fmts


def _say(lines):
    for line in lines:
        print(line)


# -- subcommands --------------------------------------------------------------

def cmd_solve(cfg, out, rng):
    spec = spec_from(cfg)
    delta = _num(cfg, "solver", "delta")
    t_max = _num(cfg, "solver", "t_max")
    thresholds = _list(cfg, "solver", "thresholds")
    n_check = _num(cfg, "solver", "check_points", int)
    dump = cfg["output"]["dump"]
    if dump not in ("none", "u", "w", "v"):
        raise ConfigError(f"[output] dump must be none, u, w or v, got {dump!r}")
    store = 1 if n_check > 0 else (_num(cfg, "solver", "store_every", int) if dump != "none" else None)
    run = solver.evolve(spec, delta, t_max, blow_threshold=thresholds[-1], store_every=store,
                        raise_on_failure=True)
    stem = _stem(cfg, "solve")
    run.snapshot_csv(out / f"{stem}.csv")
    if dump != "none":
        run.dump_fields(out / f"{stem}_{dump}.bin", dump)
    print(f"status={run.status} t_end={run.t_end:.6g} max|u_x|={run.max_w[-1]:.6g}")
    if n_check <= 0 or run.blew_up:
        return EXIT_OK
    err = representation_error(run, n_check, rng)
    ok = err <= 10 * delta**2
    print(f"{'PASS' if ok else 'FAIL'}  representation  max|u - eps u0 - L_a| = {err:.3e}"
          f" (limit {10 * delta**2:.3e})")
    return EXIT_OK if ok else EXIT_CHECK


def representation_error(run, n_points, rng):
    """Largest |u - eps u0 - L_a(|u_x|^p)| over random cone-interior nodes."""
    from .model import free_solution

    spec = run.spec
    cone = LightCone(spec.R)
    levels = run.field_levels
    candidates = [(i, k) for k in range(1, levels.size) for i in
                  np.nonzero(cone.contains(run.x, run.field_times[k] - 2 * run.delta))[0]]
    pick = rng.choice(len(candidates), size=min(n_points, len(candidates)), replace=False)
    worst = 0.0
    for j in pick:
        i, k = candidates[j]
        u0 = free_solution(spec.data, spec.eps, run.x[i], run.field_times[k])[0]
        diff = run.u_fields[k, i] - u0 - solver.area_on_grid(run, i, k)
        worst = max(worst, abs(float(diff)))
    return worst


def cmd_lifespan(cfg, out, rng):
    spec = spec_from(cfg)
    est = solver.estimate_lifespan(spec, _num(cfg, "solver", "delta"), _list(cfg, "solver", "thresholds"),
                                   t_max=_num(cfg, "solver", "t_max"),
                                   levels=_num(cfg, "solver", "levels", int))
    if est.survived:
        print(f"survived to t_max={est.t_lo:g}")
    else:
        print(f"t_star={est.t_star:.6g} bracket=[{est.t_lo:.6g}, {est.t_hi:.6g}] "
              f"refinement_ratio={est.refinement_ratio:.3g}")
        for d, t in sorted(est.t_star_by_delta.items(), reverse=True):
            print(f"  delta={d:.6g}  t*={t:.6g}  crossings={', '.join(f'{c:.6g}' for c in est.crossings[d])}")
    finest = _num(cfg, "solver", "delta") / 2 ** (_num(cfg, "solver", "levels", int) - 1)
    status = solver.SURVIVED if est.survived else solver.BLEW_UP
    row = harness.ScanRow(spec.eps, finest, est.t_star, est.t_lo, est.t_hi, status)
    (out / f"{_stem(cfg, 'lifespan')}.csv").write_text(",".join(harness.SCAN_COLUMNS) + "\n" + row.csv() + "\n")
    return EXIT_OK


def _regime(cfg, a):
    regime = cfg["scan"]["regime"]
    if regime == "auto":
        return harness.POWER if a < 1 else (harness.EXP if a == 1 else harness.GLOBAL)
    if regime not in (harness.POWER, harness.EXP, harness.GLOBAL):
        raise ConfigError(f"unknown regime {regime!r}")
    return regime


def cmd_scan(cfg, out, rng):
    spec = spec_from(cfg)
    grid = harness.geometric_grid(_num(cfg, "scan", "eps_max"), _num(cfg, "scan", "eps_ratio"),
                                  _num(cfg, "scan", "points", int))
    try:
        harness.check_eps_grid(grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    table = harness.lifespan_scan(spec, grid, _num(cfg, "solver", "delta"),
                                  _list(cfg, "solver", "thresholds"),
                                  t_max=_num(cfg, "solver", "t_max"),
                                  levels=_num(cfg, "solver", "levels", int),
                                  workers=_num(cfg, "scan", "workers", int))
    regime = _regime(cfg, spec.a)
    tol = cfg["scan"]["tolerance"]
    try:
        fit = harness.fit_exponent(table, regime, float(tol) if tol else None)
    except ValueError as exc:
        print(f"FAIL  fit  {exc}")
        harness.emit(table, out, [f for f in _formats(cfg) if f == "csv"], stem=_stem(cfg, "scan"))
        return EXIT_CHECK
    harness.emit(table, out, _formats(cfg), fit=fit, stem=_stem(cfg, "scan"))
    for r in table.rows:
        print(f"eps={r.eps:.6g}  t*={r.t_star:.6g}  [{r.t_lo:.6g}, {r.t_hi:.6g}]  {r.status}")
    if regime == harness.POWER:
        detail = f"slope={fit.slope:.4f} predicted={fit.predicted_slope:.4f} tol={fit.tolerance:.3g}"
    elif regime == harness.EXP:
        detail = f"slope={fit.slope:.4g} pearson_r={fit.pearson_r:.4f}"
    else:
        detail = "all rows survived" if fit.passed else "some rows blew up"
    print(f"{'PASS' if fit.passed else 'FAIL'}  {regime}  {detail}")
    return EXIT_OK if fit.passed else EXIT_CHECK


def cmd_picard(cfg, out, rng):
    spec = spec_from(cfg)
    T = _num(cfg, "solver", "t_max")
    delta = _num(cfg, "solver", "delta")
    rep = picard.picard_run(spec, T, delta, _num(cfg, "solver", "j_max", int), _num(cfg, "solver", "tol"))
    rep.to_csv(out / f"{_stem(cfg, 'picard')}.csv")
    checks = []
    contracting = all(r < 1 for r in rep.contraction_ratios)
    checks.append(("contraction", contracting and not rep.diverged,
                   f"ratios max={max(rep.contraction_ratios, default=math.nan):.3g} converged={rep.converged}"))
    run = solver.evolve(spec, delta, T, store_every=1, raise_on_failure=True)
    if run.blew_up or run.w_fields.shape[0] != rep.final_field.values.shape[0]:
        checks.append(("solver agreement", False, "evolve did not cover [0, T]"))
    else:
        off = (run.x.size - rep.final_field.x.size) // 2
        diff = float(np.max(np.abs(run.w_fields[:, off:off + rep.final_field.x.size] - rep.final_field.values)))
        checks.append(("solver agreement", diff <= 10 * delta**2, f"{diff:.3e} (limit {10 * delta**2:.3e})"))
    ap = picard.apriori_check(rep.final_field, T, spec.a, spec.R, spec.p)
    checks.append(("domination", ap.dominated, f"implied C={ap.implied_C:.4g} ||w||^p E(T)={ap.rhs_factor:.4g}"))
    _say(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}" for name, ok, detail in checks)
    return EXIT_OK if all(c[1] for c in checks) else EXIT_CHECK


def cmd_functionals(cfg, out, rng):
    spec = spec_from(cfg)
    delta = _num(cfg, "solver", "delta")
    every = max(1, _num(cfg, "solver", "store_every", int))
    thresholds = _list(cfg, "solver", "thresholds")
    run = solver.evolve(spec, delta, _num(cfg, "solver", "t_max"), blow_threshold=thresholds[-1],
                        store_every=every, raise_on_failure=True)
    report = functional_verdicts(run, every)
    (out / f"{_stem(cfg, 'functionals')}_report.txt").write_text(fn.format_report(report.verdicts))
    fn.to_csv(out / f"{_stem(cfg, 'functionals')}.csv", report.H, report.F, report.G, report.residual)
    print(fn.format_report(report.verdicts), end="")
    return EXIT_OK if all(v.passed for v in report.verdicts) else EXIT_CHECK


class _FunctionalReport:
    def __init__(self, H, F, G, residual, verdicts):
        self.H, self.F, self.G, self.residual, self.verdicts = H, F, G, residual, verdicts


def functional_verdicts(run, store_every):
    """Verdicts for the lower bounds and the G differential inequality on [0, 0.9 t_end]."""
    spec = run.spec
    consts = fn.constants(spec)
    horizon = 0.9 * run.t_end
    verdicts = []
    H = None
    if spec.a < 1 and spec.preset in ("bump_f", "bump_g", "bump_both"):
        H = fn.strip_H(run, consts.R0, fn.SUBCRITICAL)
        kind = "cg" if spec.preset == "bump_g" else "cf"
        bound, start = fn.lower_bound(kind, consts, spec.eps, spec.p, spec.a, spec.R, H.times)
        m = (H.times >= start) & (H.times <= horizon)
        if np.any(m):
            margin = float(np.min(H.values[m] / bound[m]))
            verdicts.append(fn.Verdict(f"H >= {kind} bound", margin >= 1, f"min ratio {margin:.4g}"))
        else:
            verdicts.append(fn.Verdict(f"H >= {kind} bound", False, "no samples in range"))
        verdicts.append(fn.Verdict("sandwich D5 Ht <= H <= D6 Ht", fn.sandwich_holds(run, consts)))
    F, G = fn.exp_moments(run)
    res = fn.inequality_residuals((F, G), consts, spec.p, spec.a)
    tol = fn.calibrate_tol_fd(spec, run.delta, store_every, min(run.t_end, 5.0))
    m = res.times <= horizon
    worst = float(np.min(res.residual[m]))
    verdicts.append(fn.Verdict("G'' + 2G' >= M6 |G|^p (1+t)^-a", worst >= -tol,
                               f"min residual {worst:.3e}, tol_fd {tol:.3e}"))
    if spec.preset == "thm2":
        floor = consts.M7 * spec.eps
        low = float(np.min(G.values[m]))
        verdicts.append(fn.Verdict("G >= M7 eps", low >= floor, f"min G {low:.4g} vs {floor:.4g}"))
    return _FunctionalReport(H, F, G, res, verdicts)


def _sweep_params(cfg):
    lemmas = [v.strip() for v in cfg["scan"]["lemmas"].split(",") if v.strip()]
    for lemma in lemmas:
        if lemma not in (odelab.LEM1, odelab.LEM1_FORCED, odelab.LIZHOU):
            raise ConfigError(f"unknown lemma {lemma!r}")
    ps, as_, cs = (_list(cfg, "scan", k) for k in ("p_values", "a_values", "c_values"))
    return lemmas, ps, as_, cs


def cmd_odelab(cfg, out, rng):
    lemmas, ps, as_, cs = _sweep_params(cfg)
    step0, E = _num(cfg, "solver", "step0"), _num(cfg, "solver", "E")
    reports, failures = [], 0
    for lemma, p, a, c1, c2 in itertools.product(lemmas, ps, as_, cs, cs):
        names = ("D1", "D2") if lemma != odelab.LIZHOU else ("M1", "M2")
        params = {"p": p, "a": a, names[0]: c1, names[1]: c2}
        try:
            rep = odelab.ode_blowup(lemma, params, E=E, step0=step0)
            ok = rep.margin >= 1 and rep.step_agreement < 0.01
        except odelab.NoBlowUp:
            bound = (odelab.lemma1_bound(c1, c2, p, a) if lemma != odelab.LIZHOU
                     else odelab.lizhou_bound(c1, c2, p, a))
            rep = odelab.BoundReport(lemma, {**bound.inputs, "E": E}, bound.constant, bound.t_bound,
                                     t_observed=math.inf, t_observed_half=math.inf)
            ok = False
        reports.append(rep)
        if not ok:
            failures += 1
            print(f"FAIL  {lemma} p={p:g} a={a:g} {names[0]}={c1:g} {names[1]}={c2:g}"
                  f"  t_bound={rep.t_bound:.4g} t_observed={rep.t_observed:.4g}")
    odelab.sweep_csv(out / f"{_stem(cfg, 'odelab')}.csv", reports)
    print(f"summary: {len(reports) - failures}/{len(reports)} dominated")
    return EXIT_OK if failures == 0 else EXIT_CHECK


def cmd_bounds(cfg, out, rng):
    spec = spec_from(cfg)
    p, a = spec.p, spec.a
    lines, ok = [], True
    for kind in ("lem1_abc", "lizhou_mk", "lizhou_hjt", "lizhou_ql"):
        if kind == "lizhou_mk" and a >= 1:
            continue
        tab = odelab.seq_eval(kind, p, a, 30)
        err = tab.max_rel_error()
        good = err <= 1e-12
        ok &= good
        lines.append(f"{'PASS' if good else 'FAIL'}  {kind} recurrence vs closed form  rel err {err:.2e}")
    prod = odelab.seq_eval("products", p, a, 60)
    n0 = prod.extra["n0"]
    good = bool(np.all(prod.extra["log_b"] >= -(p**n0) * math.log(2)))
    ok &= good
    lines.append(f"{'PASS' if good else 'FAIL'}  b_n >= 2^(-p^n0) for n <= 60  n0={n0}")
    lines.append(f"l_inf={prod.extra['l_inf']:.15g} k_inf={prod.extra['k_inf']:.15g}")
    c = fn.constants(spec) if spec.preset != "zero" and a < p else None
    if a < 1:
        D1 = c.D7 * spec.eps if c is not None else 1.0
        D2 = c.D9 if c is not None else 1.0
        b = odelab.lemma1_bound(D1, D2, p, a)
        lines.append(f"lem1  D1={D1:.4g} D2={D2:.4g}  D={b.constant:.6g}  t_bound={b.t_bound:.6g}")
    if a <= 1:
        M1 = c.M7 * spec.eps if c is not None else 1.0
        M2 = c.M6 if c is not None else 1.0
        if M1 > 0:
            b = odelab.lizhou_bound(M1, M2, p, a)
            lines.append(f"lizhou  M1={M1:.4g} M2={M2:.4g}  M={b.constant:.6g}  t_bound={b.t_bound:.6g}")
    _say(lines)
    (out / f"{_stem(cfg, 'bounds')}.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "solve": (cmd_solve, "evolve one spec; check the integral representation on survival"),
    "lifespan": (cmd_lifespan, "estimate t* with threshold extrapolation and refinement"),
    "scan": (cmd_scan, "eps scan and lifespan-exponent fit"),
    "picard": (cmd_picard, "Picard iteration, contraction and solver agreement"),
    "functionals": (cmd_functionals, "H, F, G functionals and their inequalities"),
    "odelab": (cmd_odelab, "equality-ODE blow-up times against the lemma bounds"),
    "bounds": (cmd_bounds, "closed-form bounds and sequence identities"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lifespan_lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, help="INI file with [problem] [solver] [scan] [output]")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="seed for random check points")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(args.seed)
        return COMMANDS[args.command][0](cfg, args.out, rng)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (solver.NumericalFailure, harness.ScanError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
