"""YAML scenario documents.

Sections: ``system``, ``converter``, ``pll``, ``load``, ``fault``, ``sim``
and, for the nodal cases, ``network``.  Impedances are written as complex
literals (``0.03+0.3j``, ``j0.12``, ``0.495+j0.0495``); the fault impedance
may carry an ``ohm`` suffix and is then converted on the declared bases.
A top-level ``case`` key starts from a built-in scenario and applies the
remaining sections on top of it.
"""
from __future__ import annotations

import math
import re
from typing import Any, Optional

import yaml

from .control import ControlParams, Mode
from .loads import ImParams, LoadDescriptor, OPEN
from .network import FaultSpec, TwoBusNetwork
from .pll import PllParams
from .simulator import Bases, Scenario, SimSettings


class ConfigError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = ""
        if field:
            where += f"{field}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)


SCHEMA = {
    "system": ("S_b", "S_c", "U_b", "U_dc", "omega_0", "U_g", "Z_g", "Z_c"),
    "converter": ("I_max", "K_q", "U_low", "I_cd_ref", "I_cq_ref", "mode", "tau_c",
                  "t_decouple_delay", "hysteresis", "C_dc"),
    "pll": ("K_p", "K_i"),
    "load": ("mix", "Z_imp", "Z_s", "X_r", "R_r", "X_m", "H_m", "T_m", "size", "s0"),
    "fault": ("Z_cf", "Z_f", "t_on", "t_clear", "bus"),
    "sim": ("dt", "t_end", "integrator", "dt_out"),
    "network": ("type", "Z_7"),
}
TOP_LEVEL = ("name", "case")

_OHM = re.compile(r"^(.*?)\s*(ohm|ohms|Ω)$", re.IGNORECASE)
_JPREFIX = re.compile(r"(^|[+\-])\s*j\s*([0-9.eE+\-]*)")


# ---------------------------------------------------------------------------
# value parsing


def parse_complex(value: Any, field: str = "") -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"expected an impedance, got {value!r}", field)
    if isinstance(value, (int, float)):
        return complex(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected an impedance, got {value!r}", field)
    text = value.strip().replace(" ", "")
    if text.lower() in ("open", "inf"):
        return OPEN
    text = _JPREFIX.sub(lambda m: f"{m.group(1)}{m.group(2) or '1'}j", text)
    try:
        return complex(text)
    except ValueError:
        raise ConfigError(f"malformed impedance {value!r}", field) from None


def format_complex(z: complex) -> str:
    if math.isinf(abs(z)):
        return "open"
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}j"


def _float(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError(f"expected a number, got {value!r}", field)
    return float(value)


def _ohm_or_pu(value: Any, field: str, bases: Bases) -> complex:
    if isinstance(value, str):
        m = _OHM.match(value.strip())
        if m:
            return bases.ohm_to_pu(parse_complex(m.group(1), field))
    return parse_complex(value, field)


# ---------------------------------------------------------------------------
# document <-> scenario


def _line_map(text: str) -> dict[str, int]:
    lines: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for k, v in root.value:
        lines[k.value] = k.start_mark.line + 1
        if isinstance(v, yaml.MappingNode):
            for kk, _ in v.value:
                lines[f"{k.value}.{kk.value}"] = kk.start_mark.line + 1
    return lines


def load_document(text: str) -> tuple[dict, dict[str, int]]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    return doc, _line_map(text)


def _check_schema(doc: dict, lines: dict[str, int]) -> None:
    for key, val in doc.items():
        if key in TOP_LEVEL:
            continue
        if key not in SCHEMA:
            raise ConfigError("unknown section", key, lines.get(key))
        if not isinstance(val, dict):
            raise ConfigError("section must be a mapping", key, lines.get(key))
        for f in val:
            if f not in SCHEMA[key]:
                name = f"{key}.{f}"
                raise ConfigError("unknown field", name, lines.get(name))


def merge(base: dict, extra: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v
    return out


def to_document(scn: Scenario) -> dict:
    """Config document describing ``scn``; inverse of :func:`from_document`."""
    c, b = scn.control, scn.bases
    doc: dict[str, Any] = {"name": scn.name}
    sysd = {"S_b": b.S_b, "S_c": b.S_c, "U_b": b.U_b, "U_dc": b.U_dc, "omega_0": b.omega_0}
    net = scn.network
    load: dict[str, Any]
    if isinstance(net, TwoBusNetwork):
        sysd.update(U_g=net.U_g, Z_g=format_complex(net.Z_g), Z_c=format_complex(net.Z_c))
        ld = net.load
        load = {"mix": ld.mix, "Z_imp": format_complex(ld.Z_imp)}
        im = ld.im
    else:
        spec = dict(scn.meta)
        if spec.get("type") != "ieee9":
            raise ConfigError("only the built-in nodal network can be serialized")
        doc["network"] = {"type": "ieee9", "Z_7": format_complex(spec["Z_7"])}
        load = {"mix": spec["mix"], "s0": spec["s0"]}
        im = spec["im"]
    if im is not None:
        load.update(Z_s=format_complex(im.Z_s), X_r=im.X_r, R_r=im.R_r, X_m=im.X_m, H_m=im.H_m)
        if isinstance(net, TwoBusNetwork):
            load.update(T_m=im.T_m, size=im.size)
    doc["system"] = sysd
    doc["converter"] = {"I_max": c.I_max, "K_q": c.K_q, "U_low": c.U_low, "I_cd_ref": c.I_cd_ref,
                        "I_cq_ref": c.I_cq_ref, "mode": c.mode.value, "tau_c": c.tau_c,
                        "t_decouple_delay": c.t_decouple_delay, "hysteresis": c.hysteresis,
                        "C_dc": scn.C_dc}
    doc["pll"] = {"K_p": scn.pll.K_p, "K_i": scn.pll.K_i}
    doc["load"] = load
    f = scn.fault
    doc["fault"] = {"Z_cf": format_complex(f.Z_cf), "Z_f": format_complex(f.Z_f),
                    "t_on": f.t_on, "t_clear": f.t_clear}
    if f.bus is not None:
        doc["fault"]["bus"] = f.bus
    doc["sim"] = {"dt": scn.sim.dt, "t_end": scn.sim.t_end, "integrator": scn.sim.integrator,
                  "dt_out": scn.sim.dt_out}
    return doc


def dump(scn: Scenario) -> str:
    return yaml.safe_dump(to_document(scn), sort_keys=False)


def from_document(doc: dict, lines: Optional[dict[str, int]] = None) -> Scenario:
    lines = lines or {}
    if "case" in doc:
        from .cases import builtin
        name = doc["case"]
        try:
            base = to_document(builtin(str(name)))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), "case", lines.get("case")) from None
        doc = merge(base, {k: v for k, v in doc.items() if k != "case"})
    _check_schema(doc, lines)

    def sec(name):
        return doc.get(name) or {}

    def need(section, key):
        try:
            return sec(section)[key]
        except KeyError:
            raise ConfigError("missing field", f"{section}.{key}", lines.get(section)) from None

    def num(section, key, default=None):
        if key not in sec(section):
            if default is None:
                need(section, key)
            return default
        name = f"{section}.{key}"
        try:
            return _float(sec(section)[key], name)
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], name, lines.get(name)) from None

    def imp(section, key, default=None, ohm=False):
        if key not in sec(section):
            if default is None:
                need(section, key)
            return default
        name = f"{section}.{key}"
        try:
            if ohm:
                return _ohm_or_pu(sec(section)[key], name, bases)
            return parse_complex(sec(section)[key], name)
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], name, lines.get(name)) from None

    def wrap_value_error(fn, section):
        try:
            return fn()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), section, lines.get(section)) from None

    d = Bases()
    bases = wrap_value_error(lambda: Bases(
        S_b=num("system", "S_b", d.S_b), S_c=num("system", "S_c", d.S_c),
        U_b=num("system", "U_b", d.U_b), U_dc=num("system", "U_dc", d.U_dc),
        omega_0=num("system", "omega_0", d.omega_0)), "system")

    dc = ControlParams()
    mode = sec("converter").get("mode", dc.mode.value)
    if mode not in [m.value for m in Mode]:
        raise ConfigError(f"mode must be one of {[m.value for m in Mode]}", "converter.mode",
                          lines.get("converter.mode"))
    control = wrap_value_error(lambda: ControlParams(
        I_max=num("converter", "I_max", dc.I_max), K_q=num("converter", "K_q", dc.K_q),
        U_low=num("converter", "U_low", dc.U_low), I_cd_ref=num("converter", "I_cd_ref", dc.I_cd_ref),
        I_cq_ref=num("converter", "I_cq_ref", dc.I_cq_ref), mode=Mode(mode),
        tau_c=num("converter", "tau_c", dc.tau_c),
        t_decouple_delay=num("converter", "t_decouple_delay", dc.t_decouple_delay),
        hysteresis=num("converter", "hysteresis", dc.hysteresis)), "converter")
    C_dc = num("converter", "C_dc", 0.1)

    dp = PllParams()
    pll = wrap_value_error(lambda: PllParams(num("pll", "K_p", dp.K_p), num("pll", "K_i", dp.K_i),
                                             bases.omega_0), "pll")

    ds = SimSettings()
    sim = wrap_value_error(lambda: SimSettings(
        dt=num("sim", "dt", ds.dt), t_end=num("sim", "t_end", ds.t_end),
        integrator=str(sec("sim").get("integrator", ds.integrator)),
        dt_out=num("sim", "dt_out", ds.dt_out)), "sim")

    mix = num("load", "mix", 0.0)
    di = ImParams()
    has_im = mix > 0 or any(k in sec("load") for k in ("X_m", "R_r", "X_r", "Z_s"))

    def motor():
        return ImParams(Z_s=imp("load", "Z_s", di.Z_s), X_r=num("load", "X_r", di.X_r),
                        R_r=num("load", "R_r", di.R_r), X_m=num("load", "X_m", di.X_m),
                        H_m=num("load", "H_m", di.H_m), T_m=num("load", "T_m", di.T_m),
                        size=num("load", "size", di.size))

    name = str(doc.get("name", "scenario"))
    net_type = sec("network").get("type", "twobus")
    if net_type == "ieee9":
        from .cases import nine_bus
        im = wrap_value_error(motor, "load") if has_im else None
        Z_7 = imp("network", "Z_7")
        s0 = num("load", "s0", 0.02)
        network, _ = wrap_value_error(lambda: nine_bus(Z_7, mix, control.I_cd_ref, s0, im, control.I_cq_ref),
                                      "network")
        meta = (("type", "ieee9"), ("Z_7", Z_7), ("mix", mix), ("s0", s0), ("im", im))
    elif net_type == "twobus":
        im = wrap_value_error(motor, "load") if has_im else None
        load = wrap_value_error(lambda: LoadDescriptor(Z_imp=imp("load", "Z_imp", OPEN), im=im, mix=mix),
                                "load")
        network = wrap_value_error(lambda: TwoBusNetwork(
            num("system", "U_g"), imp("system", "Z_g"), imp("system", "Z_c"), load), "system")
        meta = ()
    else:
        raise ConfigError(f"unknown network type {net_type!r}", "network.type",
                          lines.get("network.type"))
    bus = sec("fault").get("bus")
    fault = wrap_value_error(lambda: FaultSpec(
        Z_cf=imp("fault", "Z_cf", 0j), Z_f=imp("fault", "Z_f", 0j, ohm=True),
        t_on=num("fault", "t_on"), t_clear=num("fault", "t_clear"),
        bus=None if bus is None else int(bus)), "fault")

    return wrap_value_error(lambda: Scenario(name=name, network=network, fault=fault, control=control,
                                             pll=pll, sim=sim, bases=bases, C_dc=C_dc, meta=meta),
                            "sim")


def parse_override(arg: str) -> tuple[str, str, Any]:
    """``section.field=value`` with the value read as YAML scalar."""
    if "=" not in arg:
        raise ConfigError(f"override {arg!r} must look like section.field=value")
    key, raw = arg.split("=", 1)
    key = key.lstrip("-")
    if "." not in key:
        raise ConfigError(f"override {arg!r} must name section.field", key)
    section, field = key.split(".", 1)
    if section not in SCHEMA or field not in SCHEMA[section]:
        raise ConfigError("unknown field", key)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return section, field, value


def apply_overrides(doc: dict, overrides) -> dict:
    out = merge(doc, {})
    for arg in overrides:
        section, field, value = parse_override(arg)
        out.setdefault(section, {})
        out[section][field] = value
    return out


def load_scenario(source: str, overrides=()) -> Scenario:
    """Scenario from a YAML path or a built-in case name, with overrides applied."""
    from .cases import BUILTIN
    if source in BUILTIN:
        doc, lines = {"case": source}, {}
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source) from None
        doc, lines = load_document(text)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return from_document(doc, lines)


def scenario_from_text(text: str) -> Scenario:
    doc, lines = load_document(text)
    return from_document(doc, lines)
