"""Command-line experiment runner.

Each experiment writes ``<experiment>-<hash>.csv`` and ``<experiment>-<hash>.json``
into the output directory, where ``<hash>`` is a digest of the resolved
configuration. Files carry no timestamps, so identical configs give identical
bytes.

CSV columns per experiment:

    regularity        coord, ell, grad, orientation
    agmon-distance    coord, d_E
    forward-decay     probe, h, log_abs_u
    control           h, m, lambda, mass
    reverse-agmon     h, m, lambda, beta, beta_unweighted, c4_slack, upshot_slack
    carleman-bracket  y_n, dV, bracket_xi0, bracket_xi1
    restriction       h, lambda, log_norm, green_discrete, green_continuum
    nodal             h, m, count
    counterexample    h, m, lambda, mass, beta
    full-suite        experiment, exit_code, artifact

Exit codes: 0 pass, 2 fail, 3 not applicable (control condition fails),
64 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agmon import agmon_distance_1d, lemma_lower_bound_check
from .config import EXPERIMENTS, ExperimentConfig, build_problem, load_config, parse_mode
from .core_model import build_collar, check_regular_energy, default_r0, tau0
from .errors import AgmonLabError, ConfigError, UnderflowFloor
from .nodal import count_sign_changes, nodal_scaling_fit, restrict_to_curve
from .spectral import solve_family
from .verify import (CONTROL_FAILS, CONTROL_HOLDS, bracket, bracket_positivity_check,
                     bumped_curve, carleman_weight_build, control_fit, forward_agmon_fit,
                     level_curve, restriction_bound_check, reverse_agmon_check,
                     upshot_chain_check, upshot_eps)
from .verify.restriction import _coord_at

log = logging.getLogger("agmonlab")

EXIT_PASS, EXIT_FAIL, EXIT_NA, EXIT_CONFIG = 0, 2, 3, 64


@dataclass
class Result:
    experiment: str
    code: int
    header: tuple
    rows: list
    report: dict
    summary: list = field(default_factory=list)
    stem: str | None = None


# ------------------------------------------------------------ serialisation

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12e}"
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_artifacts(result, cfg):
    os.makedirs(cfg.out, exist_ok=True)
    stem = os.path.join(cfg.out, f"{result.experiment}-{cfg.digest()}")
    with open(stem + ".csv", "w", newline="") as fh:
        fh.write(csv_text(result.header, result.rows))
    payload = {"experiment": result.experiment, "exit_code": result.code,
               "config": json.loads(cfg.canonical()), "report": result.report}
    with open(stem + ".json", "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    result.stem = stem
    return stem


# ------------------------------------------------------------- shared setup

class Context:
    """Problem, collar and Agmon distance shared by an experiment."""

    def __init__(self, cfg, map_=map):
        self.cfg = cfg
        self.problem = build_problem(cfg)
        self.line = self.problem.normal_line()
        self.r0 = cfg.r0 if cfg.r0 is not None else default_r0(self.problem, self.line)
        self.collar = build_collar(self.problem, self.r0, self.line)
        self.map = map_
        self._dE = None
        self._family = None

    @property
    def E(self):
        return self.problem.E

    @property
    def dE(self):
        if self._dE is None:
            self._dE = agmon_distance_1d(self.problem, self.collar)
        return self._dE

    @property
    def family(self):
        if self._family is None:
            log.info("solving %d eigenproblems", len(self.problem.h_seq))
            self._family = solve_family(self.problem, map_=self.map)
        return self._family


def _hs(fam):
    return [e.h for e in fam]


# -------------------------------------------------------------- experiments

def run_regularity(ctx):
    rep = check_regular_energy(ctx.problem)
    col = ctx.collar
    rows = [(c.coord, c.ell, c.grad, c.orientation) for c in rep.crossings]
    report = {"regular": rep.regular, "tol": rep.tol, "r0": ctx.r0, "tau0": tau0(col),
              "dV_min_forbidden": col.dV_min_forbidden(), "dV_max": col.dV_max(),
              "useful_bounds_hold": col.useful_bounds_hold}
    summary = [f"E = {ctx.E:g} regular: {rep.regular}; {len(rows)} crossing(s)",
               f"r0 = {ctx.r0:g}, tau0 = {report['tau0']:.6f}"]
    return Result("regularity", EXIT_PASS if rep.regular else EXIT_FAIL,
                  ("coord", "ell", "grad", "orientation"), rows, report, summary)


def run_agmon_distance(ctx):
    dE = ctx.dE
    lem = lemma_lower_bound_check(dE, ctx.collar)
    probes = ctx.cfg.probes or ()
    values = {f"{x:g}": dE.at(x) for x in probes}
    rows = list(zip(dE.coords[0], dE.values))
    report = {"probes": values, "lemma_min_slack": lem.min_slack, "lemma_passed": lem.passed,
              "r0": ctx.r0, "tau0": tau0(ctx.collar)}
    summary = [f"d_E({k}) = {v:.6f}" for k, v in values.items()]
    summary.append(f"lemma lower bound min slack {lem.min_slack:.3e}: {'PASS' if lem.passed else 'FAIL'}")
    return Result("agmon-distance", EXIT_PASS if lem.passed else EXIT_FAIL,
                  ("coord", "d_E"), rows, report, summary)


def _default_probes(ctx):
    return tuple(float(v) for v in _coord_at(ctx.collar, [0.5 * ctx.r0])[:, 0])


def run_forward_decay(ctx):
    probes = ctx.cfg.probes or _default_probes(ctx)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnderflowFloor)
        rates = forward_agmon_fit(ctx.family, ctx.dE, probes)
    rows = [(r.probe, h, lv) for r in rates for h, lv in zip(_hs(ctx.family), r.log_abs_u)]
    ok = bool(rates) and all(r.above_floor for r in rates)
    report = {"rates": [r.__dict__ for r in rates],
              "dropped": [str(w.message) for w in caught if issubclass(w.category, UnderflowFloor)]}
    summary = [f"x = {r.probe:g}: rate {r.rate:.5f} vs d_E {r.d_E:.5f} "
               f"({'ok' if r.above_floor else 'below floor'})" for r in rates]
    return Result("forward-decay", EXIT_PASS if ok else EXIT_FAIL, ("probe", "h", "log_abs_u"),
                  rows, report, summary)


def _control(ctx):
    return control_fit(ctx.family, ctx.cfg.eps, ctx.E)


def run_control(ctx):
    fit = _control(ctx)
    rows = [(h, e.m, e.lam, mass) for (h, mass), e in zip(fit.pairs, ctx.family)]
    summary = [f"control: {fit.classification} (N = {fit.N:.4f}, gamma = {fit.gamma:.4f})"]
    code = EXIT_PASS if fit.classification == CONTROL_HOLDS else EXIT_NA
    return Result("control", code, ("h", "m", "lambda", "mass"), rows, fit.as_dict(), summary)


def _annulus(cfg):
    if cfg.delta1 is None and cfg.delta2 is None:
        return None
    if cfg.delta1 is None or cfg.delta2 is None:
        raise ConfigError("give both delta1 and delta2")
    return (cfg.delta1, cfg.delta2)


def _reverse(ctx, control):
    rep = reverse_agmon_check(ctx.family, ctx.dE, ctx.collar, _annulus(ctx.cfg), ctx.cfg.weight_eps,
                              control.classification)
    up = upshot_chain_check(ctx.family, carleman_weight_build(ctx.collar, upshot_eps(ctx.collar)),
                            ctx.collar)
    return rep, up


def run_reverse_agmon(ctx):
    control = _control(ctx)
    rep, up = _reverse(ctx, control)
    rows = [(h, e.m, e.lam, b, b0, s4, su) for h, e, b, b0, s4, su in
            zip(rep.hs, ctx.family, rep.beta, rep.beta_unweighted, up.c4_slack, up.upshot_slack)]
    report = {"reverse": rep.as_dict(), "upshot": up.as_dict(), "control": control.as_dict()}
    summary = [f"control: {control.classification}",
               f"beta limsup proxy {rep.limsup_proxy:.5f} vs cap {rep.beta_cap:.5f}: {rep.verdict}"
               + ("" if rep.applicable else " (not applicable)"),
               f"Carleman audit: c4 {'ok' if up.tail_ok_c4 else 'violated'}, "
               f"floor {'ok' if up.tail_ok_upshot else 'violated'}"]
    return Result("reverse-agmon", rep.exit_code,
                  ("h", "m", "lambda", "beta", "beta_unweighted", "c4_slack", "upshot_slack"),
                  rows, report, summary)


def run_carleman_bracket(ctx):
    col = ctx.collar
    w = carleman_weight_build(col, ctx.cfg.weight_eps)
    rep = bracket_positivity_check(w, col)
    w0 = carleman_weight_build(col, 0.0)
    sel = col.forbidden_collar
    border = bracket(w0, col.y_n.values[sel], col.dV.values[sel], 0.0)
    lo, hi = w.interval
    y = col.y_n.values
    keep = col.collar & (y > lo) & (y < hi)
    ys, dv = y[keep], col.dV.values[keep]
    rows = list(zip(ys, dv, bracket(w, ys, dv, 0.0), bracket(w, ys, dv, 1.0)))
    report = {"weight": w.as_dict(), "min_bracket": rep.min_value, "at_y": rep.at_y,
              "at_xi": rep.at_xi, "threshold": rep.threshold, "passed": rep.passed,
              "borderline_max_abs": float(np.max(np.abs(border))) if border.size else 0.0,
              "product_identity": w.product_identity()}
    summary = [f"eps = {w.eps:g}, tau = {w.tau:.6f}: min bracket {rep.min_value:.4e} "
               f"({'PASS' if rep.passed else 'FAIL'})",
               f"unperturbed weight at xi=0: max |bracket| {report['borderline_max_abs']:.2e}"]
    return Result("carleman-bracket", EXIT_PASS if rep.passed else EXIT_FAIL,
                  ("y_n", "dV", "bracket_xi0", "bracket_xi1"), rows, report, summary)


def _curve(ctx, level):
    if ctx.cfg.bump:
        return bumped_curve(ctx.collar, ctx.dE, level, ctx.cfg.bump)
    return level_curve(ctx.collar, ctx.dE, level)


def run_restriction(ctx):
    level = ctx.cfg.level if ctx.cfg.level is not None else 0.3 * ctx.r0
    curve = _curve(ctx, level)
    control = _control(ctx)
    rep = restriction_bound_check(ctx.family, curve, ctx.cfg.p, ctx.collar, ctx.dE)
    rows = []
    for h, e, ln, g in zip(rep.hs, ctx.family, rep.log_norm, rep.green):
        g = g or {"discrete": math.nan, "continuum": math.nan}
        rows.append((h, e.lam, ln, g["discrete"], g["continuum"]))
    code = rep.exit_code if control.classification == CONTROL_HOLDS else EXIT_NA
    report = {"restriction": rep.as_dict(), "control": control.classification}
    summary = [f"E(H) = {curve.E_of_H:.6f}, d_E^H = {curve.dE_H_max_over_Lambda:.6f}, "
               f"d_E(H) = {curve.dE_H_min:.6f}, tau0 = {curve.tau0:.6f}",
               f"gamma_H = {rep.gamma_H:.5f} vs ceiling {rep.ceiling:.5f}; "
               f"Green residual {rep.green_max:.2e}: {rep.verdict}"]
    return Result("restriction", code,
                  ("h", "lambda", "log_norm", "green_discrete", "green_continuum"),
                  rows, report, summary)


def run_nodal(ctx):
    level = ctx.cfg.level if ctx.cfg.level is not None else 0.6 * ctx.r0
    curve = level_curve(ctx.collar, ctx.dE, level)
    g_level = ctx.cfg.gamma_level if ctx.cfg.gamma_level is not None else level / 3.0
    d_gamma = level_curve(ctx.collar, ctx.dE, g_level).dE_H_min
    s_H = float(curve.nodes[0, 0])
    counts = [count_sign_changes(restrict_to_curve(e, s_H)) for e in ctx.family]
    modes = [e.m for e in ctx.family]
    fit = nodal_scaling_fit(_hs(ctx.family), counts, modes, curve, d_gamma)
    control = _control(ctx)
    rows = list(zip(_hs(ctx.family), modes, counts))
    report = {"fit": fit.as_dict(), "curve": curve.as_dict(), "control": control.classification}
    summary = [f"counts {counts} for m = {modes}",
               f"slope {fit.slope:.4f} against 1/h; geometric factor {fit.geometric_factor:.5f} "
               f"(tube constant not computed)"]
    return Result("nodal", EXIT_PASS, ("h", "m", "count"), rows, report, summary)


def run_counterexample(ctx):
    control = _control(ctx)
    rep, up = _reverse(ctx, control)
    reproduced = control.classification == CONTROL_FAILS and rep.verdict == "FAIL"
    rows = [(h, e.m, e.lam, mass, b) for (h, mass), e, b in zip(control.pairs, ctx.family, rep.beta)]
    report = {"control": control.as_dict(), "reverse": rep.as_dict(), "upshot": up.as_dict(),
              "reproduced": reproduced}
    summary = [f"control: {control.classification} (gamma = {control.gamma:.4f})",
               f"reverse check: {rep.verdict} (beta proxy {rep.limsup_proxy:.4f} vs cap {rep.beta_cap:.4f})",
               f"counterexample {'reproduced' if reproduced else 'NOT reproduced'}"]
    return Result("counterexample", EXIT_PASS if reproduced else EXIT_FAIL,
                  ("h", "m", "lambda", "mass", "beta"), rows, report, summary)


RUNNERS = {
    "regularity": run_regularity,
    "agmon-distance": run_agmon_distance,
    "forward-decay": run_forward_decay,
    "control": run_control,
    "reverse-agmon": run_reverse_agmon,
    "carleman-bracket": run_carleman_bracket,
    "restriction": run_restriction,
    "nodal": run_nodal,
    "counterexample": run_counterexample,
}

SUITE = (
    ("regularity", {"builtin": "airy"}),
    ("agmon-distance", {"builtin": "airy", "probes": (1.0,)}),
    ("forward-decay", {"builtin": "quadratic", "probes": (2.0,)}),
    ("carleman-bracket", {"builtin": "airy", "weight_eps": 0.1}),
    ("control", {"builtin": "sphere", "mode": "fixed:1"}),
    ("reverse-agmon", {"builtin": "sphere", "mode": "fixed:1"}),
    ("restriction", {"builtin": "airy", "level": 0.3}),
    ("nodal", {"builtin": "sphere", "mode": "inverse:1", "level": 0.15, "gamma_level": 0.05}),
    ("counterexample", {"builtin": "sphere", "mode": "inverse:1"}),
)


def _counterexample_cfg(cfg):
    if cfg.builtin != "sphere" or parse_mode(cfg.mode).kind != "inverse":
        return cfg.with_(builtin="sphere", mode="inverse:1")
    return cfg


def run_single(cfg, map_=map, write=True):
    if cfg.experiment == "counterexample":
        cfg = _counterexample_cfg(cfg)
    ctx = Context(cfg, map_)
    result = RUNNERS[cfg.experiment](ctx)
    if write:
        write_artifacts(result, cfg)
    return result


def run_suite(cfg, map_=map, write=True):
    subs = []
    for name, over in SUITE:
        sub = ExperimentConfig(experiment=name, out=cfg.out, **over)
        log.info("full-suite: %s", name)
        try:
            subs.append(run_single(sub, map_, write))
        except AgmonLabError as exc:
            subs.append(Result(name, EXIT_FAIL, (), [], {"error": str(exc)}, [f"error: {exc}"]))
    code = max(r.code for r in subs)
    rows = [(r.experiment, r.code, os.path.basename(r.stem) if r.stem else "") for r in subs]
    summary = [f"{r.experiment:17s} exit {r.code}" for r in subs]
    result = Result("full-suite", code, ("experiment", "exit_code", "artifact"), rows,
                    {r.experiment: r.code for r in subs}, summary)
    if write:
        write_artifacts(result, cfg)
    return result, subs


def run(cfg, parallel=None, write=True):
    """Run one configured experiment; returns its Result (``full-suite``
    returns the suite summary)."""
    if parallel and parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            return _dispatch(cfg, pool.map, write)
    return _dispatch(cfg, map, write)


def _dispatch(cfg, map_, write):
    if cfg.experiment == "full-suite":
        return run_suite(cfg, map_, write)[0]
    return run_single(cfg, map_, write)


# --------------------------------------------------------------------- main

def build_parser():
    p = argparse.ArgumentParser(
        prog="agmonlab",
        description="Semiclassical Agmon-estimate experiments.",
        epilog=__doc__.split("\n\n", 2)[2] if __doc__ else None,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", metavar="PATH", help="key=value config file with [section] headers")
    p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment name (overrides the config)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="threads for per-h work")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config:
            cfg = load_config(args.config, args.experiment, args.out)
        elif args.experiment:
            cfg = ExperimentConfig(experiment=args.experiment,
                                   **({"out": args.out} if args.out else {}))
        else:
            raise ConfigError("give --config or --experiment")
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
        result = run(cfg, args.parallel)
    except ConfigError as exc:
        print(f"agmonlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AgmonLabError as exc:
        print(f"agmonlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"== {result.experiment} ==")
    for line in result.summary:
        print(line)
    if result.stem:
        print(f"artifacts: {result.stem}.csv, {result.stem}.json")
    print(f"exit code {result.code}")
    return result.code


if __name__ == "__main__":
    sys.exit(main())
