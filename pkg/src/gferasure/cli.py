"""Command-line runner: ``gferasure run CONFIG`` and ``gferasure validate CONFIG``.

Each run writes results.csv, summary.json (with a provenance block) and,
for experiments built from a pulse schedule, schedule.txt. Outputs depend
only on the config and the seed, never on ``--jobs`` or the clock.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import BudgetInput, FitError, error_budget, error_per_cycle_from_lifetime
from .config import ConfigError, RunConfig, load_config, parse_overrides
from .device import CROSSING_PAIRS, chi_logical_effective, exact_dispersive, find_level_crossings, shot_noise_dephasing
from .engine.instruments import ASSIGN_LABELS
from .engine.master import IntegrationError
from .engine.trajectories import default_jobs
from .noise import NoiseParams
from .pulses import CalibrationError, GateSet

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (FitError, CalibrationError, IntegrationError, np.linalg.LinAlgError, RuntimeError,
                  FloatingPointError)


@dataclass
class Outcome:
    header: list[str]
    rows: list[list]
    summary: dict
    schedule: str | None = None
    extra: dict[str, str] = field(default_factory=dict)  # additional text files


def _need_noise(cfg: RunConfig) -> NoiseParams:
    if cfg.noise is None:
        raise ConfigError([f"{cfg.experiment}: needs a noise section (the selected preset has none)"])
    return cfg.noise


def _fit_summary(fn) -> dict:
    """Run a fit; a curve that does not decay is reported rather than treated as a crash."""
    try:
        return fn()
    except (FitError, ValueError) as exc:
        return {"fit_error": str(exc)}


# --- experiments ----------------------------------------------------------------


def run_crossings(cfg: RunConfig, jobs: int) -> Outcome:
    p = cfg.params
    pairs = [tuple(s.split("-")) for s in p["pairs"]] if p["pairs"] else CROSSING_PAIRS
    found = find_level_crossings(cfg.device, (p["freq_min"], p["freq_max"]), pairs, p["step"], p["window"])
    rows = [[f"{c.pair[0]}-{c.pair[1]}", c.ancilla_freq, c.min_gap, c.bare_freq] for c in found]
    summary = {"n_pairs": len(found), "n_found": sum(c.ancilla_freq is not None for c in found),
               "crossings": {r[0]: {"freq_MHz": r[1], "gap_MHz": r[2]} for r in rows}}
    return Outcome(["pair", "freq_MHz", "gap_MHz", "bare_freq_MHz"], rows, summary)


def run_chi(cfg: RunConfig, jobs: int) -> Outcome:
    p = cfg.params
    rows, summary = [], {}
    for mode in p["modes"]:
        chi = chi_logical_effective(cfg.device, mode)
        rows.append([mode, chi])
        summary[f"chi_{mode}_kHz"] = chi
    if "exact" in p["modes"]:
        det = exact_dispersive(cfg.device)
        summary.update(nbar=det.nbar, g_r_MHz=det.g_r, chi_undriven_kHz=det.chi_undriven)
    chi_dep = p["chi_for_dephasing"]
    if chi_dep is None:
        chi_dep = summary.get("chi_analytic_kHz", rows[0][1])
    stark, gamma = shot_noise_dephasing(cfg.device, chi_dep)
    summary.update(chi_for_dephasing_kHz=chi_dep, stark_shift_kHz=stark, shot_noise_dephasing_Hz=gamma)
    return Outcome(["mode", "chi_kHz"], rows, summary)


def run_budget(cfg: RunConfig, jobs: int) -> Outcome:
    noise = _need_noise(cfg)
    p = cfg.params
    b = BudgetInput(t_cycle=p["t_cycle"], t1_ge=noise.t1_ge, t1_ef=noise.t1_ef, p_fn_0L=p["p_fn_0L"],
                    p_fn_1L=p["p_fn_1L"], p_fn_e=p["p_fn_e"], gate_error_per_pulse=p["gate_error_per_pulse"],
                    pulses_per_cycle=p["pulses_per_cycle"])
    table = error_budget(b)
    rows = [[k, pz, mz] for k, pz, mz in table.rows()] + [["average", table.average, table.average]]
    summary = {"eps_l": table.eps_l, "total_plus_z": table.total_plus, "total_minus_z": table.total_minus,
               "average": table.average, "plus_z": table.plus_z, "minus_z": table.minus_z}
    return Outcome(["term", "plus_z", "minus_z"], rows, summary, extra={"budget.txt": table.to_text()})


def run_lifetime_cmd(cfg: RunConfig, jobs: int) -> Outcome:
    from .protocols.lifetime import LifetimeConfig, run_lifetime

    p = cfg.params
    lc = LifetimeConfig(initial_state=p["initial_state"], dd=p["dd"], cycle_time=p["cycle_time"],
                        n_rounds_max=p["n_rounds_max"], n_shots=p["n_shots"], instrument=cfg.instrument,
                        spinlock_rabi=p["spinlock_rabi"], gate_set=GateSet(check_position=p["check_position"]),
                        readout=p["readout"], thermal_init=p["thermal_init"], ideal_gates=p["ideal_gates"])
    schedule = lc.schedule()
    res = run_lifetime(lc, cfg.noise, seed=cfg.seed, jobs=jobs, method=p["method"], alpha=cfg.device.data.alpha)
    counts = res.counts.astype(int) if p["method"] == "trajectory" else res.counts
    rows = [[r + 1, res.times[r], res.survival[r], *counts[r], *res.code_populations[r], res.polarization[r]]
            for r in range(len(res.times))]

    def fit_surv():
        f = res.fit_survival()
        return {"time_constant_us": f.time_constant, "time_constant_err_us": f.time_constant_err,
                "error_per_cycle": 1.0 - math.exp(-lc.cycle_time / f.time_constant)}

    def fit_pol():
        f = res.fit_polarization()
        return {"time_constant_us": f.time_constant, "time_constant_err_us": f.time_constant_err,
                "error_per_cycle": error_per_cycle_from_lifetime(f.time_constant, lc.cycle_time)}

    surv, pol = _fit_summary(fit_surv), _fit_summary(fit_pol)
    summary = {"initial_state": lc.initial_state, "method": p["method"], "cycle_time_us": lc.cycle_time,
               "erasure": surv, "post_selected": pol}
    if "time_constant_us" in surv and "time_constant_us" in pol:
        summary["lifetime_ratio"] = pol["time_constant_us"] / surv["time_constant_us"]
    header = ["round", "time_us", "survival", "n_0L", "n_e", "n_1L", "p_0L", "p_1L", "polarization"]
    return Outcome(header, rows, summary, schedule.to_text())


def run_rb_cmd(cfg: RunConfig, jobs: int) -> Outcome:
    from .protocols.rb import RBConfig, default_rb_instrument, run_rb

    p = cfg.params
    rc = RBConfig(sequence_lengths=tuple(p["sequence_lengths"]), n_randomizations=p["n_randomizations"],
                  shots_per_length=p["shots_per_length"], check_every=p["check_every"], cycle_time=p["cycle_time"],
                  post_select=p["post_select"], ideal_gates=p["ideal_gates"],
                  instrument=cfg.instrument if p["use_instrument"] else default_rb_instrument())
    res = run_rb(rc, cfg.noise, seed=cfg.seed, method=p["method"], alpha=cfg.device.data.alpha, jobs=jobs)
    raw = res.raw
    ps = res.post_selected if rc.post_select else [None] * len(raw)
    kept = res.kept_fraction if rc.post_select else [None] * len(raw)
    rows = [[int(m), raw[i], ps[i], kept[i]] for i, m in enumerate(res.lengths)]

    def leak(exact):
        f = res.fit_raw(exact)
        return {"error_per_clifford": f.error_per_clifford, "error_per_clifford_err": f.error_per_clifford_err,
                "p": f.p, "leakage": f.leakage, "seepage": f.seepage}

    def ps_fit(exact):
        f = res.fit_post_selected(exact)
        return {"error_per_clifford": f.error_per_clifford, "error_per_clifford_err": f.error_per_clifford_err,
                "p": f.p}

    summary = {"raw": _fit_summary(lambda: leak(False)), "raw_exact": _fit_summary(lambda: leak(True))}
    if rc.post_select:
        summary["post_selected"] = _fit_summary(lambda: ps_fit(False))
        summary["post_selected_exact"] = _fit_summary(lambda: ps_fit(True))
    return Outcome(["length", "raw_p0", "post_selected", "kept_fraction"], rows, summary)


def run_bell_cmd(cfg: RunConfig, jobs: int) -> Outcome:
    from .protocols.bell import BellNoise, CRParams, run_parity_bell

    p = cfg.params
    cr = CRParams(omega_eff=p["omega_eff"], delta_ac=p["delta_ac"], duration=p["duration"], phases=p["phases"],
                  control_state=p["control_state"], wait=p["wait"])
    bn = None
    if cfg.noise is not None:
        q2 = NoiseParams(**{k: v for k, v in p["q2"].items() if v is not None})
        bn = BellNoise(cfg.noise, q2, cfg.noise.ancilla_t1, cfg.noise.ancilla_t2e, cfg.noise.readout_len)
    res = run_parity_bell(cr, bn, with_erasure=p["with_erasure"], seed=cfg.seed, n_shots=p["n_shots"],
                          instrument=cfg.instrument)
    rows = [[h, res.targets[h], res.herald_probabilities[h], res.fidelities[h], res.kept_fraction[h]]
            for h in ("g", "e")]
    summary = {"heralds": {r[0]: {"target": r[1], "probability": r[2], "fidelity": r[3], "kept_fraction": r[4]}
                           for r in rows},
               "states": {h: {"real": np.real(s.data).tolist(), "imag": np.imag(s.data).tolist()}
                          for h, s in res.states.items()}}
    return Outcome(["herald", "target", "probability", "fidelity", "kept_fraction"], rows, summary)


def run_psd_cmd(cfg: RunConfig, jobs: int) -> Outcome:
    from .protocols.lifetime import spinlock_psd

    noise = _need_noise(cfg)
    p = cfg.params
    pairs, points = spinlock_psd(noise, p["rabis"], p["t_max"], alpha=cfg.device.data.alpha)
    rows = [[r, t, pt.s_omega, pt.clipped] for (r, t), pt in zip(pairs, points)]
    summary = {"points": [{"rabi_MHz": r[0], "t1rho_us": r[1], "s_omega_per_us": r[2], "clipped": r[3]}
                          for r in rows], "n_clipped": sum(pt.clipped for pt in points)}
    return Outcome(["rabi_MHz", "t1rho_us", "s_omega_per_us", "clipped"], rows, summary)


def run_readout_cal(cfg: RunConfig, jobs: int) -> Outcome:
    from .protocols.readout import readout_model, sample_confusion, sample_flag_rates

    p = cfg.params
    est = sample_confusion(readout_model(p["matrix"], p["mode"]), p["n_shots"], cfg.seed, jobs)
    p_th = cfg.noise.p_thermal if cfg.noise is not None else 0.0
    flags = sample_flag_rates(cfg.instrument, p_th, p["instrument_shots"], cfg.seed + 1, jobs)
    z = est.z_scores()
    rows = [["assignment", ASSIGN_LABELS[i], ASSIGN_LABELS[j], est.matrix[i, j], est.target[i, j], z[i, j]]
            for i in range(3) for j in range(3)]
    names = ("false_positive_0L", "false_positive_1L", "false_negative")
    got = (flags.false_pos_0L, flags.false_pos_1L, flags.false_neg)
    for name, g, e, zz in zip(names, got, flags.expected, flags.z_scores()):
        rows.append(["erasure_check", name, "", g, e, zz])
    summary = {"matrix": p["matrix"], "mode": p["mode"], "estimate": est.matrix.tolist(),
               "max_abs_z_assignment": float(np.max(np.abs(z))),
               "flag_rates": dict(zip(names, got)), "flag_rates_expected": dict(zip(names, flags.expected)),
               "max_abs_z_flags": float(max(abs(v) for v in flags.z_scores()))}
    return Outcome(["kind", "prepared", "assigned", "estimate", "target", "z"], rows, summary)


RUNNERS = {"crossings": run_crossings, "chi": run_chi, "budget": run_budget, "lifetime": run_lifetime_cmd,
           "rb": run_rb_cmd, "bell": run_bell_cmd, "psd": run_psd_cmd, "readout-cal": run_readout_cal}


# --- output ---------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if not math.isfinite(v) else v
    return v


def write_outputs(cfg: RunConfig, out: Outcome, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(to_csv(out.header, out.rows), newline="")
    summary = {"experiment": cfg.experiment, "results": _jsonable(out.summary),
               "provenance": {"config_sha256": cfg.config_hash(), "seed": cfg.seed,
                              "version": __version__, "preset": cfg.preset}}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n")
    (out_dir / "config.resolved.yaml").write_text(cfg.to_yaml())
    if out.schedule is not None:
        (out_dir / "schedule.txt").write_text(out.schedule)
    for name, text in out.extra.items():
        (out_dir / name).write_text(text)


# --- entry points -----------------------------------------------------------------


def _load(args) -> RunConfig:
    path = args.config or args.config_pos
    if path is None:
        raise ConfigError(["no config given (pass CONFIG or --config PATH)"])
    overrides = parse_overrides(args.override)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(path, overrides)


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        _report(exc)
        return EXIT_CONFIG
    jobs = args.jobs if args.jobs is not None else default_jobs()
    out_dir = Path(args.out if args.out is not None else cfg.output_dir)
    try:
        outcome = RUNNERS[cfg.experiment](cfg, jobs)
    except ConfigError as exc:
        _report(exc)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure in {cfg.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # protocol-level parameter checks that the schema cannot see
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(cfg, outcome, out_dir)
    print(f"{cfg.experiment}: wrote {out_dir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        _report(exc)
        return EXIT_CONFIG
    print(f"ok: {cfg.experiment} config is valid")
    return EXIT_OK


def _report(exc: ConfigError) -> None:
    print(f"config error ({len(exc.problems)} problem{'s' if len(exc.problems) != 1 else ''}):", file=sys.stderr)
    for p in exc.problems:
        print(f"  {p}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gferasure", description="g-f erasure qubit simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run the experiment named in a config"),
                           ("validate", "check a config without running it")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config_pos", nargs="?", metavar="CONFIG", help="config file")
        sp.add_argument("--config", help="config file (alternative to the positional argument)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted override, e.g. noise.t1_ef='30 us' (repeatable)")
        sp.add_argument("--seed", type=int, help="seed, replacing the config's")
        if name == "run":
            sp.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
            sp.add_argument("--out", help="output directory, replacing output_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return cmd_run(args) if args.command == "run" else cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
