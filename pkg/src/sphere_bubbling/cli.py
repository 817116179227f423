"""Command-line entry point: ``sphere-bubbling {verify,analyze,existence,flow}``.

Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import report as rp
from .bubbles import constants_table, make_configuration
from .catalog import check_H1, enumerate_Finfinity, theorem12_criterion
from .config import DEFAULTS, RunConfig, describe_defaults, load_config
from .curvature import classify_Iplus, euler_checksum, find_critical_points, parse_curvature
from .errors import (ArityError, BubblingError, CombinatorialOverflow, ConfigError,
                     DegenerateCritical, ExpressionSyntaxError, PositivityViolation, StepFailure)
from .flow import FlowSettings, FlowState, ensemble_placements, pseudogradient_regimes, run_ensemble
from .geometry import as_sphere_point

log = logging.getLogger("sphere_bubbling")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
STATUS = {EXIT_OK: "ok", EXIT_CHECK: "check_failure", EXIT_CONFIG: "config_error",
          EXIT_NUMERIC: "numerical_error"}

# flag -> (section, key); flags mirror config keys
FLAGS = {
    "n": ("problem", "n"), "gamma": ("problem", "gamma"),
    "K": ("curvature", "K"), "n_starts": ("curvature", "n_starts"),
    "L": ("quadrature", "L"), "test_points": ("quadrature", "test_points"),
    "p": ("flow", "p"), "placement": ("flow", "placement"),
    "placement_radius": ("flow", "placement_radius"), "centers": ("flow", "centers"),
    "lambda0": ("flow", "lambda0"), "lambda_max": ("flow", "lambda_max"),
    "s_max": ("flow", "s_max"), "sample_interval": ("flow", "sample_interval"),
    "seed": ("flow", "seed"), "ensemble": ("flow", "ensemble"),
    "p_max": ("criterion", "p_max"), "out": ("output", "dir"), "threads": ("run", "threads"),
}


class CommandError(Exception):
    def __init__(self, code, kind, message, results=None):
        super().__init__(message)
        self.code, self.kind, self.results = code, kind, results or {}


# ---------------------------------------------------------------------------
# commands

def _field(cfg: RunConfig):
    c = cfg["curvature"]
    try:
        return parse_curvature(c["K"], cfg.params, probe=c["probe_points"])
    except (ExpressionSyntaxError, ArityError, PositivityViolation) as exc:
        raise CommandError(EXIT_CONFIG, type(exc).__name__, str(exc)) from exc


def _critical_points(cfg: RunConfig, K):
    c = cfg["curvature"]
    return find_critical_points(K, n_starts=c["n_starts"], seed=c["search_seed"])


def cmd_verify(cfg: RunConfig):
    """Run the verification suites."""
    from .verify import run_verification

    q = cfg["quadrature"]
    checks = run_verification(cfg.params, L=q["L"], n_test=q["test_points"])
    for c in checks:
        print(c.line())
    failures = [{"kind": "check", "message": c.line()} for c in checks if not c.passed]
    results = {"checks": [c.to_dict() for c in checks],
               "constants": constants_table(cfg.params).to_dict()}
    return (EXIT_CHECK if failures else EXIT_OK), results, failures


def _analysis(cfg: RunConfig):
    K = _field(cfg)
    try:
        recs = _critical_points(cfg, K)
    except DegenerateCritical as exc:
        loc = None if exc.location is None else [float(v) for v in exc.location]
        results = {"nd": {"holds": False, "message": str(exc)}, "critical_points": [],
                   "nd_witness": loc}
        raise CommandError(EXIT_CHECK, type(exc).__name__, str(exc), results) from exc
    Ip = classify_Iplus(recs)
    results = {"nd": {"holds": True, "message": "all critical points non-degenerate"},
               "critical_points": [r.to_dict() for r in recs],
               "I_plus": [r.label for r in Ip],
               "euler_checksum": euler_checksum(recs)}
    return K, recs, Ip, results


def cmd_analyze(cfg: RunConfig):
    """Critical points of K, I^+ and the non-degeneracy status."""
    _, recs, Ip, results = _analysis(cfg)
    print(f"{len(recs)} critical points, |I+| = {len(Ip)}, Euler checksum {results['euler_checksum']}")
    for r in recs:
        print(f"  {r.label}: index {r.index}, K = {r.K_value:.12g}, Delta K = {r.laplacian:.12g}"
              f"{'  (I+)' if r.in_I_plus else ''}")
    return EXIT_OK, results, []


def _catalog(cfg: RunConfig, Ip):
    params = cfg.params
    p_max = cfg["criterion"]["p_max"] or None
    S = constants_table(params).S
    try:
        return enumerate_Finfinity(Ip, params.n, params.gamma, S, p_max)
    except CombinatorialOverflow as exc:
        raise CommandError(EXIT_CONFIG, "CombinatorialOverflow", str(exc)) from exc


def cmd_existence(cfg: RunConfig):
    """Catalog of critical points at infinity and the existence criterion."""
    _, recs, Ip, results = _analysis(cfg)
    cat = _catalog(cfg, Ip)
    crit = theorem12_criterion(Ip, cfg.params.n)
    total, h1 = check_H1(cat)
    crit.h1 = [{"signed_count": total, "differs_from_one": bool(h1)}]
    results.update({"catalog": [x.to_dict() for x in cat], "criterion": crit.to_dict()})
    print(f"catalog: {len(cat)} critical points at infinity; criterion value "
          f"{crit.criterion_value}, conclusion: {crit.conclusion}"
          + (f", index bound {crit.index_bound}" if crit.index_bound is not None else ""))
    return EXIT_OK, results, []


def _explicit_initial(cfg: RunConfig) -> FlowState:
    f = cfg["flow"]
    try:
        cs = [as_sphere_point(np.array([float(v) for v in part.split(",")]), tol=1e-6)
              for part in f["centers"].split(";") if part.strip()]
    except ValueError as exc:
        raise CommandError(EXIT_CONFIG, "ConfigError", f"[flow] centers: {exc}") from exc
    if len(cs) != f["p"] or any(c.size != cfg.params.n + 1 for c in cs):
        raise CommandError(EXIT_CONFIG, "ConfigError",
                           f"[flow] centers must list p = {f['p']} points in R^{cfg.params.n + 1}")
    return FlowState(0.0, make_configuration(cs, [f["lambda0"]] * f["p"]))


def cmd_flow(cfg: RunConfig):
    """Integrate the reduced flow (optionally an ensemble)."""
    params = cfg.params
    f = cfg["flow"]
    K, recs, Ip, results = _analysis(cfg)
    cat = _catalog(cfg, Ip)
    ct = constants_table(params)
    if f["placement"] == "explicit":
        initials = [_explicit_initial(cfg)] * f["ensemble"]
    else:
        try:
            initials = ensemble_placements(Ip, f["p"], f["lambda0"], f["placement_radius"],
                                           f["seed"], f["ensemble"])
        except ValueError as exc:
            raise CommandError(EXIT_CONFIG, "ConfigError", str(exc), results) from exc
    st = FlowSettings(lam_max=f["lambda_max"], lam_min=f["lambda_min"], s_max=f["s_max"],
                      match_radius=f["match_radius"], sample_interval=f["sample_interval"],
                      rtol=f["rtol"], atol=f["atol"])
    outs = run_ensemble(initials, K, params, Ip, cat, st, ct, threads=cfg["run"]["threads"])
    tdir = Path(cfg["output"]["dir"]) / cfg["output"]["trajectories"]
    tdir.mkdir(parents=True, exist_ok=True)
    events, failures = [], []
    for k, (init, out) in enumerate(zip(initials, outs)):
        name = f"traj_{k:03d}.csv"
        if isinstance(out, StepFailure):
            failures.append({"kind": "StepFailure", "message": f"{name}: {out}"})
            continue
        traj, ev = out
        (tdir / name).write_text(traj.to_csv(), encoding="utf-8")
        last = make_configuration(traj.final_centers, traj.final_lams)
        _, weights = pseudogradient_regimes(FlowState(traj.s[-1], last), K,
                                            params, st.regime_C, st.grad_threshold,
                                            st.concentrating_lambda, ct)
        d = ev.to_dict()
        d.update({"trajectory": f"{cfg['output']['trajectories']}/{name}",
                  "initial_centers": init.config.centers.tolist(),
                  "final_lambdas": [float(v) for v in traj.final_lams],
                  "steps": traj.steps, "rejected": traj.rejected, "weights": weights})
        events.append(d)
        print(f"{name}: {ev.kind} at s = {ev.s:.6g}"
              + (f" -> {ev.target.labels}" if ev.target is not None else ""))
    results.update({"events": events, "catalog": [x.to_dict() for x in cat]})
    return (EXIT_NUMERIC if failures else EXIT_OK), results, failures


COMMANDS = {"verify": cmd_verify, "analyze": cmd_analyze, "existence": cmd_existence,
            "flow": cmd_flow}


# ---------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sphere-bubbling",
                                 description="Bubbles and critical points at infinity on S^n.")
    ap.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().split("\n")[0])
        sp.add_argument("--config", help="config file (INI sections, key = value)")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config key")
        sp.add_argument("-v", "--verbose", action="store_true")
        for flag, (section, key) in FLAGS.items():
            typ, default, doc = DEFAULTS[section][key]
            sp.add_argument("--" + flag.replace("_", "-"), dest=flag, default=None,
                            help=f"{doc} [{section}] {key} (default {default})")
    return ap


def _overrides(args) -> dict:
    out = {}
    for flag, target in FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            out[target] = v
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, k = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[(section.strip(), k.strip())] = value.strip()
    return out


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.print_defaults:
        print(describe_defaults())
        return EXIT_OK
    if args.command is None:
        ap.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    results, failures = {}, []
    try:
        cfg = load_config(args.config, _overrides(args))
        code, results, failures = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        code, failures = EXIT_CONFIG, [{"kind": "ConfigError", "message": str(exc)}]
    except CommandError as exc:
        code, results = exc.code, exc.results
        failures = [{"kind": exc.kind, "message": str(exc)}]
    except BubblingError as exc:
        code, failures = EXIT_NUMERIC, [{"kind": type(exc).__name__, "message": str(exc)}]
    for fl in failures:
        print(f"error ({fl['kind']}): {fl['message']}", file=sys.stderr)
    if cfg is not None:
        out_dir = Path(cfg["output"]["dir"])
    else:  # the config did not load; still honour an explicit --out
        out_dir = Path(args.out if args.out is not None else DEFAULTS["output"]["dir"][1])
    name = cfg["output"]["report"] if cfg is not None else DEFAULTS["output"]["report"][1]
    rep = rp.make_report(args.command, cfg.to_dict() if cfg is not None else {}, STATUS[code], code,
                         results, failures)
    rp.write_json(rep, out_dir / name)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
