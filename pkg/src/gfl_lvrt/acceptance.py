"""Expectation manifests and the acceptance runner.

A manifest names a set of runs and a list of assertions over quantities
derived from them::

    id: case4
    runs:
      trad: {scenario: case4.yaml, mode: traditional}
      dec:  {scenario: case4.yaml, mode: decoupled}
    assertions:
      - quantity: dec.recovery_start - trad.recovery_start
        comparator: ">="
        bound: 0.05
        provenance: PAPER

``quantity`` is an arithmetic expression over ``<run>.<metric>`` terms.
Every bound must carry a provenance tag.  Assertions marked
``spike_sensitive`` depend on the converter current-lag transient and are
excluded when the suite runs with ``converter.tau_c`` overridden.
"""
from __future__ import annotations

import ast
import csv
import glob
import math
import operator
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import config, report
from .simulator import BracketFailure, RecoveryCriterion, cct_search, simulate

PROVENANCE = ("PAPER", "TRIVIAL", "DERIVED")
COMPARATORS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}
SPIKE_FIELDS = ("converter.tau_c",)
SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "scenarios")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    scenario: str
    mode: Optional[str] = None
    overrides: tuple = ()
    cct: bool = False


@dataclass(frozen=True)
class Assertion:
    quantity: str
    comparator: str
    bound: float
    provenance: str
    tolerance: float = 0.0
    name: str = ""
    spike_sensitive: bool = False


@dataclass(frozen=True)
class Manifest:
    id: str
    runs: dict
    assertions: tuple
    path: str = ""


@dataclass
class Outcome:
    manifest: str
    assertion: Assertion
    status: str              # PASS | FAIL | EXCLUDED | ERROR
    measured: float = math.nan
    note: str = ""


@dataclass
class AcceptanceReport:
    outcomes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(o.status in ("PASS", "EXCLUDED") for o in self.outcomes)

    def lines(self) -> list[str]:
        out = []
        for o in self.outcomes:
            a = o.assertion
            label = f"{o.manifest}: {a.name or a.quantity}"
            out.append(f"[{o.status}] {label}: {a.quantity} {a.comparator} {report.fmt(a.bound)}"
                       f" (measured {report.fmt(o.measured)}, tol {report.fmt(a.tolerance)})"
                       f" [{a.provenance}]" + (f" {o.note}" if o.note else ""))
        n_pass = sum(o.status == "PASS" for o in self.outcomes)
        out.append(f"{n_pass}/{len(self.outcomes)} passed")
        return out

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["manifest", "name", "quantity", "comparator", "bound", "tolerance",
                    "provenance", "measured", "status", "note"])
        for o in self.outcomes:
            a = o.assertion
            w.writerow([o.manifest, a.name, a.quantity, a.comparator, report.fmt(a.bound),
                        report.fmt(a.tolerance), a.provenance, report.fmt(o.measured),
                        o.status, o.note])


# ---------------------------------------------------------------------------
# loading


def _assertion(raw: dict, where: str) -> Assertion:
    if not isinstance(raw, dict):
        raise ManifestError(f"{where}: assertion must be a mapping")
    missing = [k for k in ("quantity", "comparator", "bound") if k not in raw]
    if missing:
        raise ManifestError(f"{where}: missing {', '.join(missing)}")
    tag = raw.get("provenance")
    if tag not in PROVENANCE:
        raise ManifestError(f"{where}: bound {raw['bound']!r} needs a provenance tag "
                            f"({'/'.join(PROVENANCE)}), got {tag!r}")
    if raw["comparator"] not in COMPARATORS:
        raise ManifestError(f"{where}: unknown comparator {raw['comparator']!r}")
    _compile(str(raw["quantity"]), where)
    return Assertion(quantity=str(raw["quantity"]), comparator=raw["comparator"],
                     bound=float(raw["bound"]), provenance=tag,
                     tolerance=float(raw.get("tolerance", 0.0)), name=str(raw.get("name", "")),
                     spike_sensitive=bool(raw.get("spike_sensitive", False)))


def parse_manifest(doc: dict, path: str = "") -> Manifest:
    if not isinstance(doc, dict) or "id" not in doc:
        raise ManifestError(f"{path or 'manifest'}: needs an 'id'")
    mid = str(doc["id"])
    runs = {}
    for rid, r in (doc.get("runs") or {}).items():
        if not isinstance(r, dict) or "scenario" not in r:
            raise ManifestError(f"{mid}: run {rid!r} needs a scenario")
        ov = r.get("overrides") or {}
        ov = tuple(f"{k}={v}" for k, v in ov.items()) if isinstance(ov, dict) else tuple(ov)
        for o in ov:
            config.parse_override(o)
        runs[str(rid)] = RunSpec(str(r["scenario"]), r.get("mode"), ov, bool(r.get("cct", False)))
    asserts = tuple(_assertion(a, f"{mid}[{k}]") for k, a in enumerate(doc.get("assertions") or []))
    for a in asserts:
        for run, _ in _terms(a.quantity):
            if run not in runs:
                raise ManifestError(f"{mid}: quantity {a.quantity!r} refers to unknown run {run!r}")
    return Manifest(mid, runs, asserts, path)


def load_manifest(path: str) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(yaml.safe_load(fh), path)


def default_manifests() -> list[str]:
    return sorted(glob.glob(os.path.join(SCENARIO_DIR, "*.expect.yaml")))


# ---------------------------------------------------------------------------
# quantity expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv}


def _compile(expr: str, where: str = "") -> ast.AST:
    try:
        tree = ast.parse(expr, mode="eval").body
    except SyntaxError:
        raise ManifestError(f"{where}: cannot parse quantity {expr!r}") from None
    for node in ast.walk(tree):
        ok = isinstance(node, (ast.BinOp, ast.UnaryOp, ast.Constant, ast.Attribute, ast.Name,
                               ast.Load, ast.USub, ast.Call) + tuple(_BINOPS))
        if isinstance(node, ast.Call):
            ok = isinstance(node.func, ast.Name) and node.func.id == "abs" and len(node.args) == 1
        if isinstance(node, ast.Attribute):
            ok = isinstance(node.value, ast.Name)
        if not ok:
            raise ManifestError(f"{where}: unsupported expression {expr!r}")
    return tree


def _terms(expr: str):
    return [(n.value.id, n.attr) for n in ast.walk(_compile(expr)) if isinstance(n, ast.Attribute)]


def evaluate(expr: str, metrics: dict) -> float:
    def ev(node):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Attribute):
            return float(metrics[node.value.id][node.attr])
        if isinstance(node, ast.UnaryOp):
            return -ev(node.operand)
        if isinstance(node, ast.Call):
            return abs(ev(node.args[0]))
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ManifestError(f"unsupported term in {expr!r}")
    return ev(_compile(expr))


# ---------------------------------------------------------------------------
# running


def _resolve(scenario: str, base_dir: str) -> str:
    from .cases import BUILTIN
    if scenario in BUILTIN:
        return scenario
    path = scenario if os.path.isabs(scenario) else os.path.join(base_dir, scenario)
    return path


def run_metrics(source: str, spec: RunSpec, extra=()) -> dict:
    """Quantities a manifest may reference for one run.

    With ``cct`` set the search runs first and the remaining metrics come
    from the trajectory at that clearing time.
    """
    ov = list(spec.overrides) + list(extra)
    if spec.mode:
        ov.append(f"converter.mode={spec.mode}")
    scn = config.load_scenario(source, ov)
    out = {}
    if spec.cct:
        crit = RecoveryCriterion()
        try:
            res = cct_search(scn, crit)
            out.update(cct=res.cct, cct_censored=float(res.censored))
            scn = scn.with_fault_duration(res.cct, crit.horizon)
        except BracketFailure:
            out.update(cct=math.nan, cct_censored=math.nan)
    ts = simulate(scn)
    s = report.summarize(ts, scn.fault.t_clear)
    f = scn.fault
    t = ts.t
    k_on = int(abs(t - f.t_on).argmin())
    k_clear = int(abs(t - f.t_clear).argmin())
    post = ts.window(f.t_clear, open_left=True)
    first = int(post.argmax()) if post.any() else len(t) - 1
    out.update(
        U_c0=float(ts["U_c"][0]),
        delta_change_deg=math.degrees(ts["delta_c"][k_clear] - ts["delta_c"][k_on]),
        U_c_first_post=float(ts["U_c"][first]),
        theta_v_first_post_deg=math.degrees(ts["theta_v"][first]),
        recovery_start=s.recovery_start, U_c_post_min=s.U_c_post_min,
        U_c_post_max=s.U_c_post_max, U_dc_max=s.U_dc_max,
        theta_v_abs_max_deg=math.degrees(s.theta_v_abs_max),
        los=float(s.terminated == "LOS"),
    )
    return out


def _job(args):
    key, source, spec, extra = args
    try:
        return key, run_metrics(source, spec, extra), ""
    except Exception as exc:  # noqa: BLE001 - reported per assertion
        return key, None, f"{type(exc).__name__}: {exc}"


def _check(a: Assertion, value: float) -> bool:
    if math.isnan(value):
        return False
    op = COMPARATORS[a.comparator]
    slack = a.tolerance if a.comparator in (">", ">=") else -a.tolerance
    return bool(op(value + slack, a.bound))


def run_acceptance(suite, overrides=(), workers: int = 1) -> AcceptanceReport:
    """Execute every manifest; failures are report content, never exceptions."""
    overrides = tuple(overrides)
    spike_off = any(o.lstrip("-").split("=", 1)[0] in SPIKE_FIELDS for o in overrides)
    jobs = []
    for m in suite:
        base = os.path.dirname(m.path) if m.path else SCENARIO_DIR
        for rid, spec in m.runs.items():
            jobs.append(((m.id, rid), _resolve(spec.scenario, base), spec, overrides))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_job, jobs))
    else:
        done = [_job(j) for j in jobs]
    metrics = {key: (vals, err) for key, vals, err in done}

    rep = AcceptanceReport()
    for m in suite:
        for a in m.assertions:
            if a.spike_sensitive and spike_off:
                rep.outcomes.append(Outcome(m.id, a, "EXCLUDED",
                                            note="spike-sensitive; excluded with tau_c perturbed"))
                continue
            runs = {r for r, _ in _terms(a.quantity)}
            errs = [metrics[m.id, r][1] for r in runs if metrics[m.id, r][1]]
            if errs:
                rep.outcomes.append(Outcome(m.id, a, "ERROR", note=errs[0]))
                continue
            value = evaluate(a.quantity, {r: metrics[m.id, r][0] for r in runs})
            rep.outcomes.append(Outcome(m.id, a, "PASS" if _check(a, value) else "FAIL", value))
    return rep
