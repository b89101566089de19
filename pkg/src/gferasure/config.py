"""Run configuration: YAML with unit-carrying quantities, presets and validation.

A config names one experiment, gives it a block of the same name, and
supplies the device, noise and erasure-instrument sections either directly
or through ``preset``; explicit sections are merged over the preset key by
key. Every violation found is reported with the offending field path and,
where the YAML is available, its line.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .device import DeviceConfig, ResonatorParams, TransmonParams
from .engine.instruments import ErasureInstrument
from .noise import NoiseParams
from .units import UnitError, parse_quantity

EXPERIMENTS = ("crossings", "chi", "budget", "lifetime", "rb", "bell", "psd", "readout-cal")
PRESETS = ("cooldown-A", "cooldown-B", "ideal", "paper-S5")
TOP_LEVEL = ("experiment", "seed", "output_dir", "preset", "device", "noise", "instrument") + EXPERIMENTS


class ConfigError(ValueError):
    """Raised with every violation collected during parsing or validation."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


# field kinds: freq (MHz), khz, time (us), float, int, bool, str, (choices,), [kind] for lists
TRANSMON = {"omega": "freq", "alpha": "freq", "levels": "int"}
SCHEMA: dict[str, dict] = {
    "device": {
        "data": TRANSMON,
        "ancilla": TRANSMON,
        "coupling_g": "freq",
        "resonator": {"omega_r": "freq", "kappa_r": "freq", "g_r": "freq", "chi_bias": "freq"},
        "drive_detuning": "freq",
        "stark_shift": "khz",
    },
    "noise": {
        "t1_ge": "time", "t1_ef": "time", "tphi_gf": "time", "p_thermal": "float",
        "ancilla_t1": "time", "ancilla_t2e": "time", "readout_len": "time", "dephasing_weights": ["float"],
    },
    "instrument": {
        "p_false_pos_0L": "float", "p_false_pos_1L": "float", "p_fn_to_0L": "float",
        "p_fn_to_1L": "float", "p_fn_stay_e": "float", "reset": "bool",
    },
    "crossings": {"freq_min": "freq", "freq_max": "freq", "step": "freq", "window": "freq", "pairs": ["str"]},
    "chi": {"modes": ["str"], "chi_for_dephasing": "khz"},
    "budget": {"t_cycle": "time", "p_fn_0L": "float", "p_fn_1L": "float", "p_fn_e": "float",
               "gate_error_per_pulse": "float", "pulses_per_cycle": "int"},
    "lifetime": {"initial_state": ("+Z", "-Z", "+X", "-X", "+Y", "-Y", "0L", "1L"), "dd": ("xy4", "spinlock", "none"),
                 "cycle_time": "time", "n_rounds_max": "int", "n_shots": "int", "spinlock_rabi": "freq",
                 "readout": ("Q1", "ideal"), "thermal_init": "bool", "check_position": ("after", "before"),
                 "method": ("trajectory", "density"), "ideal_gates": "bool"},
    "rb": {"sequence_lengths": ["int"], "n_randomizations": "int", "shots_per_length": "int",
           "check_every": "int", "cycle_time": "time", "post_select": "bool", "method": ("density", "trajectory"),
           "ideal_gates": "bool", "use_instrument": "bool"},
    "bell": {"omega_eff": "freq", "delta_ac": "freq", "duration": "time", "phases": ("minus", "plus"),
             "control_state": ("0L", "1L"), "wait": "time", "with_erasure": "bool", "n_shots": "int",
             "q2": {"t1_ge": "time", "t1_ef": "time", "tphi_gf": "time", "p_thermal": "float"}},
    "psd": {"rabis": ["freq"], "t_max": "time"},
    "readout-cal": {"n_shots": "int", "matrix": ("Q1", "Q2"), "mode": ("matrix", "gaussian"),
                    "instrument_shots": "int"},
}

# experiment defaults; anything not listed is required
DEFAULTS: dict[str, dict] = {
    "crossings": {"freq_min": 4000.0, "freq_max": 7000.0, "step": 0.25, "window": 20.0, "pairs": None},
    "chi": {"modes": ["analytic", "exact"], "chi_for_dephasing": None},
    "budget": {"t_cycle": 3.52, "p_fn_0L": 0.039, "p_fn_1L": 0.0012, "p_fn_e": 0.0328,
               "gate_error_per_pulse": 2.34e-4, "pulses_per_cycle": 4},
    "lifetime": {"initial_state": "+Z", "dd": "xy4", "cycle_time": 3.52, "n_rounds_max": 40, "n_shots": 20000,
                 "spinlock_rabi": 2.0, "readout": "Q1", "thermal_init": True, "check_position": "after",
                 "method": "trajectory", "ideal_gates": False},
    "rb": {"sequence_lengths": [1, 25, 50, 100, 150, 200, 300, 400], "n_randomizations": 20,
           "shots_per_length": 1000, "check_every": 29, "cycle_time": 5.04, "post_select": True,
           "method": "density", "ideal_gates": False, "use_instrument": True},
    "bell": {"omega_eff": 2.0, "delta_ac": 0.5, "duration": None, "phases": "minus", "control_state": "0L",
             "wait": 1.3, "with_erasure": False, "n_shots": 10000,
             "q2": {"t1_ge": 20.0, "t1_ef": 15.0, "tphi_gf": 21.4, "p_thermal": 0.007}},
    "psd": {"rabis": [0.25, 0.5, 1.0, 2.0, 4.0], "t_max": 200.0},
    "readout-cal": {"n_shots": 100000, "matrix": "Q1", "mode": "gaussian", "instrument_shots": 100000},
}

UNIT_OUT = {"freq": "MHz", "khz": "kHz", "time": "us"}


# --- YAML with line numbers ---------------------------------------------------


def _line_map(text: str) -> dict[tuple, int]:
    """Map each key path in the YAML document to its 1-based line."""
    out: dict[tuple, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    walk(root, ())
    return out


def _where(path: tuple, lines: dict[tuple, int]) -> str:
    name = ".".join(str(p) for p in path)
    for n in range(len(path), 0, -1):
        if path[:n] in lines:
            return f"line {lines[path[:n]]}: {name}"
    return name


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError([f"preset: unknown preset {name!r}; expected one of {', '.join(PRESETS)}"])
    text = resources.files("gferasure").joinpath("presets", f"{name}.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base: Any, over: Any) -> Any:
    if isinstance(base, dict) and isinstance(over, dict):
        out = dict(base)
        for k, v in over.items():
            out[k] = _merge(base.get(k), v) if k in base else v
        return out
    return copy.deepcopy(over)


# --- field parsing ------------------------------------------------------------


def _parse_value(kind, value, path, problems, lines):
    where = _where(path, lines)
    try:
        if value is None:
            return None
        if isinstance(kind, list):
            if not isinstance(value, list):
                raise UnitError(f"expected a list, got {value!r}")
            return [_parse_value(kind[0], v, path + (i,), problems, lines) for i, v in enumerate(value)]
        if isinstance(kind, tuple):
            if value not in kind:
                raise UnitError(f"must be one of {', '.join(map(str, kind))}, got {value!r}")
            return value
        if kind == "freq":
            return parse_quantity(value, "freq")
        if kind == "khz":
            # bare numbers and kHz strings are taken as they stand so values round-trip exactly
            if isinstance(value, str):
                num = value.strip()
                if num.lower().endswith("khz"):
                    return parse_quantity(num[:-3], "plain")
                if num and (num[-1].isdigit() or num[-1] == "."):
                    return parse_quantity(num, "plain")
                return parse_quantity(value, "freq") * 1e3
            return parse_quantity(value, "plain")
        if kind == "time":
            return parse_quantity(value, "time")
        if kind == "float":
            return parse_quantity(value, "plain")
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise UnitError(f"expected an integer, got {value!r}")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise UnitError(f"expected true or false, got {value!r}")
            return value
        if kind == "str":
            return str(value)
    except UnitError as exc:
        problems.append(f"{where}: {exc}")
        return None
    raise AssertionError(f"unknown schema kind {kind!r}")


def _parse_section(schema: dict, raw, path: tuple, problems: list, lines) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        problems.append(f"{_where(path, lines)}: expected a mapping, got {type(raw).__name__}")
        return {}
    out = {}
    for key, value in raw.items():
        p = path + (key,)
        if key not in schema:
            problems.append(f"{_where(p, lines)}: unknown field {key!r} (allowed: {', '.join(schema)})")
            continue
        kind = schema[key]
        out[key] = _parse_section(kind, value, p, problems, lines) if isinstance(kind, dict) \
            else _parse_value(kind, value, p, problems, lines)
    return out


def _check_ranges(schema: dict, values: dict, path: str, problems: list) -> bool:
    """Report every out-of-range field of a noise or instrument section; True if all pass."""
    before = len(problems)
    for key, v in values.items():
        if v is None or isinstance(schema.get(key), (dict, list)):
            continue
        kind = schema.get(key)
        if kind == "time" and not v > 0:
            problems.append(f"{path}.{key}: must be positive, got {v}")
        elif key == "p_thermal" and not 0 <= v < 0.5:
            problems.append(f"{path}.{key}: must lie in [0, 0.5), got {v}")
        elif kind == "float" and key.startswith("p_") and not 0 <= v <= 1:
            problems.append(f"{path}.{key}: probability must lie in [0, 1], got {v}")
    return len(problems) == before


def _build(cls, values: dict, path: str, problems: list, required=()):
    missing = [k for k in required if values.get(k) is None]
    if missing:
        problems.append(f"{path}: missing required field(s) {', '.join(missing)}")
        return None
    kwargs = {k: v for k, v in values.items() if v is not None}
    if "dephasing_weights" in kwargs:
        kwargs["dephasing_weights"] = tuple(kwargs["dephasing_weights"])
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"{path}: {exc}")
        return None


# --- run config ---------------------------------------------------------------


@dataclass
class RunConfig:
    experiment: str
    seed: int
    output_dir: str
    device: DeviceConfig
    noise: NoiseParams | None
    instrument: ErasureInstrument
    params: dict = field(default_factory=dict)
    preset: str | None = None

    def to_dict(self) -> dict:
        """Canonical nested structure with unit strings, suitable for YAML."""
        d = {"experiment": self.experiment, "seed": self.seed, "output_dir": self.output_dir}
        dev = self.device
        d["device"] = _emit(SCHEMA["device"], {
            "data": _asdict(dev.data), "ancilla": _asdict(dev.ancilla), "coupling_g": dev.coupling_g,
            "resonator": _asdict(dev.resonator), "drive_detuning": dev.drive_detuning, "stark_shift": dev.stark_shift})
        d["noise"] = None if self.noise is None else _emit(SCHEMA["noise"], _asdict(self.noise))
        d["instrument"] = _emit(SCHEMA["instrument"], _asdict(self.instrument))
        d[self.experiment] = _emit(SCHEMA[self.experiment], self.params)
        return d

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _asdict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _emit(schema, values):
    if isinstance(schema, dict):
        return {k: _emit(schema[k], v) for k, v in values.items() if k in schema}
    if values is None:
        return None
    if isinstance(schema, list):
        return [_emit(schema[0], v) for v in values]
    if isinstance(schema, str) and schema in UNIT_OUT:
        return f"{float(values)!r} {UNIT_OUT[schema]}"
    if schema == "float":
        return float(values)
    return values


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse YAML ``text`` (plus dotted-key ``overrides``) into a RunConfig or raise ConfigError."""
    lines = _line_map(text)
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError([f"{loc}invalid YAML: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping at the top level"])
    for key, value in (overrides or {}).items():
        _set_dotted(raw, key, value)
    return _from_raw(raw, lines)


def _set_dotted(raw: dict, key: str, value) -> None:
    parts = key.split(".")
    node = raw
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def _from_raw(raw: dict, lines) -> RunConfig:
    problems: list[str] = []
    for key in raw:
        if key not in TOP_LEVEL:
            problems.append(f"{_where((key,), lines)}: unknown field {key!r} (allowed: {', '.join(TOP_LEVEL)})")
    experiment = raw.get("experiment")
    blocks = [k for k in EXPERIMENTS if k in raw]
    if experiment is None:
        problems.append("experiment: missing; expected one of " + ", ".join(EXPERIMENTS))
    elif experiment not in EXPERIMENTS:
        problems.append(f"{_where(('experiment',), lines)}: unknown experiment {experiment!r}")
    elif experiment not in blocks:
        problems.append(f"{experiment}: missing experiment block {experiment!r}")
    if len(blocks) > 1:
        problems.append(f"exactly one experiment block is allowed, found {', '.join(blocks)}")
    seed = raw.get("seed")
    if seed is None:
        problems.append("seed: missing; an explicit seed is required")
    elif isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        problems.append(f"{_where(('seed',), lines)}: seed must be an integer in [0, 2^64), got {seed!r}")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        problems.append(f"{_where(('output_dir',), lines)}: output_dir must be a string")

    preset = raw.get("preset")
    base: dict = {}
    if preset is not None:
        try:
            base = preset_dict(preset)
        except ConfigError as exc:
            problems.extend(exc.problems)
    sections = {}
    for name in ("device", "noise", "instrument"):
        merged = _merge(base.get(name), raw[name]) if name in raw else base.get(name)
        if name == "noise" and name in raw and raw[name] is None:
            merged = None
        sections[name] = merged

    dev_raw = _parse_section(SCHEMA["device"], sections["device"], ("device",), problems, lines)
    noise_raw = _parse_section(SCHEMA["noise"], sections["noise"], ("noise",), problems, lines)
    inst_raw = _parse_section(SCHEMA["instrument"], sections["instrument"], ("instrument",), problems, lines)

    device = None
    if sections["device"] is None:
        problems.append("device: missing (give a device section or a preset)")
    else:
        data = _build(TransmonParams, dev_raw.get("data", {}), "device.data", problems, ("omega", "alpha"))
        anc = _build(TransmonParams, dev_raw.get("ancilla", {}), "device.ancilla", problems, ("omega", "alpha"))
        res = _build(ResonatorParams, dev_raw.get("resonator", {}), "device.resonator", problems,
                     ("omega_r", "kappa_r"))
        rest = {k: v for k, v in dev_raw.items() if k not in ("data", "ancilla", "resonator")}
        if None not in (data, anc, res):
            device = _build(DeviceConfig, {**rest, "data": data, "ancilla": anc, "resonator": res}, "device",
                            problems, ("coupling_g",))
    noise = None
    if sections["noise"] is not None:
        if _check_ranges(SCHEMA["noise"], noise_raw, "noise", problems):
            noise = _build(NoiseParams, noise_raw, "noise", problems, ("t1_ge", "t1_ef", "tphi_gf"))
    instrument = None
    if _check_ranges(SCHEMA["instrument"], inst_raw, "instrument", problems):
        instrument = _build(ErasureInstrument, inst_raw, "instrument", problems)

    params = {}
    if experiment in EXPERIMENTS and experiment in raw:
        given = _parse_section(SCHEMA[experiment], raw[experiment], (experiment,), problems, lines)
        params = _merge(DEFAULTS[experiment], given)
        if experiment == "bell":
            _check_ranges(SCHEMA["bell"]["q2"], params["q2"], "bell.q2", problems)
        problems.extend(_check_experiment(experiment, params))
    if problems:
        raise ConfigError(problems)
    return RunConfig(experiment, seed, output_dir, device, noise, instrument, params, preset)


def _check_experiment(name: str, p: dict) -> list[str]:
    """Invariants of an experiment block, reported without running anything."""
    out = []

    def need(cond, msg):
        if not cond:
            out.append(f"{name}: {msg}")

    if name == "crossings":
        need(p["freq_min"] < p["freq_max"], "freq_min must be below freq_max")
        need(p["step"] > 0 and p["window"] > 0, "step and window must be positive")
        for pair in p["pairs"] or []:
            need(isinstance(pair, str) and pair.count("-") == 1, f"pair {pair!r} must look like 'eg-0Le'")
    elif name == "chi":
        need(set(p["modes"]) <= {"analytic", "exact"} and p["modes"], "modes must be analytic and/or exact")
    elif name == "budget":
        for k in ("p_fn_0L", "p_fn_1L", "p_fn_e"):
            need(0 <= p[k] <= 1, f"{k} must lie in [0, 1]")
        need(p["t_cycle"] > 0, "t_cycle must be positive")
    elif name == "lifetime":
        need(p["n_rounds_max"] >= 1, "n_rounds_max must be at least 1")
        need(p["n_shots"] >= 1, "n_shots must be at least 1")
        need(p["cycle_time"] > 0, "cycle_time must be positive")
    elif name == "rb":
        ls = p["sequence_lengths"]
        need(len(ls) >= 4 and all(b > a for a, b in zip(ls, ls[1:])) and ls[0] >= 1,
             "sequence_lengths must hold at least 4 strictly ascending positive lengths")
        need(p["n_randomizations"] >= 1, "n_randomizations must be at least 1")
        need(p["shots_per_length"] >= 2 * p["n_randomizations"], "shots_per_length must cover both recovery polarities")
        need(p["check_every"] >= 1, "check_every must be at least 1")
    elif name == "bell":
        need(p["omega_eff"] > 0, "omega_eff must be positive")
        need(p["n_shots"] is None or p["n_shots"] >= 1, "n_shots must be positive")
    elif name == "psd":
        need(len(p["rabis"]) >= 1 and all(r > 0 for r in p["rabis"]), "rabis must be positive")
    elif name == "readout-cal":
        need(p["n_shots"] >= 1 and p["instrument_shots"] >= 1, "shot counts must be positive")
    return out


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config ({exc.strerror})"]) from None
    return parse_config(text, overrides)


def parse_overrides(items: list[str]) -> dict:
    """``key.sub=value`` pairs; values are read as YAML scalars ("40 us" stays a string)."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError([f"override {item!r}: expected key=value"])
        key, value = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    return out
