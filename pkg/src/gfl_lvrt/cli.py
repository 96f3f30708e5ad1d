"""Command-line front end: ``gfl-lvrt <command> SOURCE [--section.field=value ...]``.

SOURCE is a built-in case name or a YAML scenario file.  Exit codes:
0 success, 1 configuration error, 2 simulation event (LOS or DC collapse),
3 internal error, 4 acceptance assertions failed.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, cases, config, report
from .config import ConfigError
from .control import Mode
from .simulator import BracketFailure, NoPrefaultEP, RecoveryCriterion, cct_search, simulate

EXIT_OK, EXIT_CONFIG, EXIT_EVENT, EXIT_INTERNAL, EXIT_FAILED = 0, 1, 2, 3, 4

log = logging.getLogger("gfl_lvrt")


def _modes(text: str) -> list[Mode]:
    try:
        return [Mode(m.strip()) for m in text.split(",") if m.strip()]
    except ValueError:
        raise ConfigError(f"unknown mode in {text!r}; use traditional and/or decoupled", "mode") from None


def _scenario(args, mode=None):
    overrides = list(args.overrides)
    if mode is not None:
        overrides.append(f"converter.mode={Mode(mode).value}")
    elif getattr(args, "mode", None):
        overrides.append(f"converter.mode={args.mode}")
    return config.load_scenario(args.source, overrides)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline=""), True


def _emit(lines, path=None):
    fh, close = _open_out(path)
    try:
        for line in lines:
            fh.write(line + "\n")
    finally:
        if close:
            fh.close()


def _criterion(args) -> RecoveryCriterion:
    return RecoveryCriterion(levels=(args.env_start, args.env_end), horizon=args.horizon)


def _cct(scn, args):
    try:
        return cct_search(scn, _criterion(args), lo=args.cct_lo, hi=args.cct_hi)
    except BracketFailure as exc:
        log.warning("%s: %s", scn.name, exc)
        return None


def _run_one(scn, args, with_cct=False):
    ts = simulate(scn)
    summ = report.summarize(ts, scn.fault.t_clear)
    if with_cct:
        res = _cct(scn, args)
        if res is not None:
            summ.cct, summ.cct_censored = res.cct, res.censored
    return ts, summ


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    scn = _scenario(args)
    ts, summ = _run_one(scn, args, args.cct)
    fh, close = _open_out(args.out)
    try:
        report.write_csv(ts, fh)
    finally:
        if close:
            fh.close()
    lines = summ.lines()
    if args.summary:
        _emit(lines, args.summary)
    else:  # keep stdout clean when it carries the CSV
        dest = sys.stderr if args.out in (None, "-") else sys.stdout
        for line in lines:
            print(line, file=dest)
    return EXIT_EVENT if summ.terminated in ("LOS", "DcCollapse") else EXIT_OK


def cmd_compare(args) -> int:
    modes = _modes(args.modes)
    summaries, status = {}, EXIT_OK
    for m in modes:
        scn = _scenario(args, m)
        ts, summ = _run_one(scn, args, args.cct)
        summaries[m.value] = summ
        if args.out_dir:
            path = os.path.join(args.out_dir, f"{scn.name}_{m.value}.csv")
            fh, _ = _open_out(path)
            with fh:
                report.write_csv(ts, fh)
        if summ.terminated in ("LOS", "DcCollapse"):
            status = EXIT_EVENT
    lines = []
    for name, s in summaries.items():
        lines += [f"[{name}]"] + s.lines()
    lines += report.compare_lines(summaries)
    _emit(lines, os.path.join(args.out_dir, "compare.txt") if args.out_dir else None)
    if args.out_dir:
        _emit(lines)
    return status


def cmd_surface(args) -> int:
    p = cases.SURFACE_CONTROL if args.source is None else _scenario(args).control
    g = analysis.qp_surface(p, U_max=args.u_max, U_step=args.u_step,
                            theta_step_deg=args.theta_step)
    deg = np.degrees(g.theta_v)
    os.makedirs(args.out_dir, exist_ok=True)
    for name in ("P_ideal", "Q_ideal", "P_actual", "Q_actual"):
        with open(os.path.join(args.out_dir, f"{name}.csv"), "w", encoding="utf-8") as fh:
            report.write_grid_csv(fh, "theta_v_deg", deg, "U_c", g.U_c, getattr(g, name))
    with open(os.path.join(args.out_dir, "crossover.csv"), "w", encoding="utf-8") as fh:
        fh.write("theta_v_deg,U_c_crossover\n")
        for t, u in zip(deg, g.crossover):
            fh.write(f"{report.fmt(t)},{report.fmt(u)}\n")
    nT, nU = g.shape
    print(f"surface: {nU} U_c x {nT} theta_v nodes written to {args.out_dir}")
    return EXIT_OK


def cmd_classify(args) -> int:
    scn = _scenario(args)
    if not hasattr(scn.network, "Z_c"):
        raise ConfigError("classification needs a two-bus network", "network.type")
    fc = analysis.classify_fault(scn.network, scn.fault, scn.control, scn.pll,
                                 scn.bases.current_scale)
    print(fc.row)
    print(f"voltage_tendency: {fc.voltage_tendency}")
    print(f"U_c_onfault: {report.fmt(fc.U_c)}")
    print(f"U_cq_onfault: {report.fmt(fc.U_cq)}")
    print(f"projected_drift_deg: {report.fmt(math.degrees(fc.drift))}")
    print(f"dc_risk: {str(fc.dc_risk).lower()}")
    return EXIT_OK


def cmd_cct(args) -> int:
    lines = ["mode,cct,censored"]
    for m in _modes(args.modes):
        res = _cct(_scenario(args, m), args)
        if res is None:
            lines.append(f"{m.value},,bracket_failure")
        else:
            lines.append(f"{m.value},{report.fmt(res.cct)},{str(res.censored).lower()}")
    _emit(lines, args.out)
    return EXIT_OK


def cmd_domain(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    lines = ["mode,stable_fraction"]
    for m in _modes(args.modes):
        scn = _scenario(args, m)
        sm = analysis.stability_map(scn, m, n_delta=args.n_delta, n_omega=args.n_omega,
                                    omega_span=args.omega_span, horizon=args.horizon)
        with open(os.path.join(args.out_dir, f"domain_{m.value}.csv"), "w", encoding="utf-8") as fh:
            report.write_grid_csv(fh, "delta_offset_deg", np.degrees(sm.offsets),
                                  "omega_c", sm.omegas, sm.labels)
        lines.append(f"{m.value},{report.fmt(sm.stable_fraction)}")
    _emit(lines)
    _emit(lines, os.path.join(args.out_dir, "fractions.csv"))
    return EXIT_OK


def _sweep_job(job):
    source, overrides, key = job
    scn = config.load_scenario(source, overrides)
    ts = simulate(scn)
    return key, report.summarize(ts, scn.fault.t_clear)


def cmd_sweep(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    config.parse_override(f"{args.param}=0")  # validates the field name
    jobs = []
    for m in _modes(args.modes):
        for v in values:
            ov = list(args.overrides) + [f"{args.param}={v}", f"converter.mode={m.value}"]
            config.load_scenario(args.source, ov)  # surface config errors before fan-out
            jobs.append((args.source, ov, (v, m.value)))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = dict(pool.map(_sweep_job, jobs))
    else:
        results = dict(map(_sweep_job, jobs))
    lines = [f"{args.param},mode,recovery_start,U_c_post_max,U_dc_max,theta_v_abs_max,status"]
    for v, m in (j[2] for j in jobs):
        s = results[v, m]
        lines.append(",".join([v, m] + [report.fmt(x) for x in (
            s.recovery_start, s.U_c_post_max, s.U_dc_max, s.theta_v_abs_max)] + [s.terminated or "ok"]))
    _emit(lines, args.out)
    return EXIT_OK


def cmd_acceptance(args) -> int:
    from . import acceptance
    paths = args.manifests or acceptance.default_manifests()
    suite = []
    for p in paths:
        try:
            suite.append(acceptance.load_manifest(p))
        except OSError as exc:
            raise ConfigError(f"cannot read manifest: {exc.strerror}", p) from None
        except acceptance.ManifestError as exc:
            raise ConfigError(str(exc)) from None
    rep = acceptance.run_acceptance(suite, overrides=args.overrides)
    _emit(rep.lines())
    if args.csv:
        fh, _ = _open_out(args.csv)
        with fh:
            rep.write_csv(fh)
    return EXIT_OK if rep.ok else EXIT_FAILED


def cmd_dump(args) -> int:
    sys.stdout.write(config.dump(_scenario(args)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_cct_opts(p):
    p.add_argument("--cct-lo", type=float, default=0.01, help="shortest fault duration tried (s)")
    p.add_argument("--cct-hi", type=float, default=0.5, help="longest fault duration tried (s)")
    p.add_argument("--env-start", type=float, default=0.15, help="envelope level at clearing (p.u.)")
    p.add_argument("--env-end", type=float, default=0.90, help="envelope level 1 s after clearing")
    p.add_argument("--horizon", type=float, default=1.2, help="post-clearing time simulated (s)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gfl-lvrt", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_, source=True):
        p = sub.add_parser(name, help=help_)
        if source == "optional":
            p.add_argument("source", nargs="?", default=None)
        elif source:
            p.add_argument("source", help="built-in case name or YAML file")
        p.set_defaults(func=fn)
        return p

    p = cmd("run", cmd_run, "simulate one scenario and write its time series")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("-o", "--out", help="CSV path (default: stdout)")
    p.add_argument("--summary", help="write the run summary here")
    p.add_argument("--cct", action="store_true", help="also search the critical clearing time")
    _add_cct_opts(p)

    p = cmd("compare", cmd_compare, "run several LVRT modes on one scenario")
    p.add_argument("--modes", default="traditional,decoupled")
    p.add_argument("--out-dir")
    p.add_argument("--cct", action="store_true")
    _add_cct_opts(p)

    p = cmd("surface", cmd_surface, "ideal/actual P and Q over (U_c, theta_v)", source="optional")
    p.add_argument("--out-dir", default="surface")
    p.add_argument("--u-max", type=float, default=1.2)
    p.add_argument("--u-step", type=float, default=0.01)
    p.add_argument("--theta-step", type=float, default=1.0, help="degrees")

    p = cmd("classify", cmd_classify, "categorize the scenario's fault")
    p.add_argument("--mode", choices=[m.value for m in Mode])

    p = cmd("cct", cmd_cct, "critical clearing time per mode")
    p.add_argument("--modes", default="traditional,decoupled")
    p.add_argument("-o", "--out")
    _add_cct_opts(p)

    p = cmd("domain", cmd_domain, "sampled post-fault stability map per mode")
    p.add_argument("--modes", default="traditional,decoupled")
    p.add_argument("--out-dir", default="domain")
    p.add_argument("--n-delta", type=int, default=181)
    p.add_argument("--n-omega", type=int, default=101)
    p.add_argument("--omega-span", type=float, default=100.0, help="rad/s")
    p.add_argument("--horizon", type=float, default=2.0)

    p = cmd("sweep", cmd_sweep, "vary one field and summarize each run")
    p.add_argument("--param", required=True, help="section.field to vary")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--modes", default="traditional,decoupled")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--out")

    p = cmd("acceptance", cmd_acceptance, "run expectation manifests", source=False)
    p.add_argument("manifests", nargs="*", help="manifest files (default: packaged suite)")
    p.add_argument("--csv", help="also write the report as CSV")

    p = cmd("dump", cmd_dump, "print the scenario as a YAML document")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    return ap


def _split_overrides(argv):
    """Pull ``--section.field=value`` tokens out before argparse sees them."""
    rest, overrides = [], []
    for a in argv:
        key = a[2:].split("=", 1)[0] if a.startswith("--") else ""
        if "." in key and "=" in a and key.split(".")[0] in config.SCHEMA:
            overrides.append(a[2:])
        else:
            rest.append(a)
    return rest, overrides


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    rest, overrides = _split_overrides(argv)
    args = build_parser().parse_args(rest)
    args.overrides = overrides
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        for o in overrides:
            config.parse_override(o)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoPrefaultEP as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_EVENT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
