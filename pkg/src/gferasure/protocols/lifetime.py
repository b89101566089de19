"""Logical memory with dynamical decoupling and repeated erasure checks.

Every cycle is reduced to a handful of channels on the data transmon: the
noisy evolution up to the end of the erasure SWAP, the erasure instrument,
and whatever follows the check. A copy of the state is read out after each
cycle, so one trajectory yields the whole time trace and shots are
discarded from the first flagged round onwards.

Cardinal labels follow the error budget: its |+Z> column is the state hurt
by a missed erasure that resets into |0_L>, which is |1_L>. So +Z = |1_L>
and -Z = |0_L>, and +X, +Y are (|0_L> + |1_L>)/sqrt2 and (|0_L> + i|1_L>)/sqrt2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..analysis import FitResult, correct_readout, fit_exponential
from ..engine.instruments import M_Q1, AssignmentModel, ErasureInstrument, erasure_branches
from ..engine.master import EvolutionSpec, apply_superop, propagator, superop_to_kraus
from ..engine.trajectories import CheckStep, KrausStep, MeasureStep, Program, run_program
from ..noise import NoiseParams, psd_from_spinlock
from ..pulses import GateSet, PulseSequence, compile_idle_cycle, compile_spin_locking, compile_xy4_cycle, logical_frame_energies
from ..units import angular
from .gates import GateLibrary, channel_collapses, embed_logical

CARDINAL_LABELS = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")
ALIASES = {"1L": "+Z", "0L": "-Z"}


def logical_vector(label: str) -> np.ndarray:
    """Amplitudes on (|0_L>, |1_L>) of a cardinal state."""
    label = ALIASES.get(label, label)
    s = 1 / np.sqrt(2)
    table = {"+Z": [0, 1], "-Z": [1, 0], "+X": [s, s], "-X": [s, -s], "+Y": [s, 1j * s], "-Y": [s, -1j * s]}
    if label not in table:
        raise ValueError(f"unknown logical state {label!r}; expected one of {CARDINAL_LABELS + tuple(ALIASES)}")
    return np.array(table[label], dtype=complex)


def readout_rotation(label: str) -> np.ndarray:
    """Logical unitary taking the cardinal state ``label`` to |0_L>."""
    v = logical_vector(label)
    w = np.array([-np.conj(v[1]), np.conj(v[0])])
    return np.array([v.conj(), w.conj()])


def initial_state(label: str, levels: int, p_thermal: float = 0.0) -> np.ndarray:
    psi = np.zeros(levels, complex)
    psi[[0, 2]] = logical_vector(label)
    rho = (1 - p_thermal) * np.outer(psi, psi.conj())
    rho[1, 1] += p_thermal
    return rho


@dataclass(frozen=True)
class LifetimeConfig:
    initial_state: str = "+Z"
    dd: str = "xy4"  # xy4 | spinlock | none
    cycle_time: float = 3.52  # us
    n_rounds_max: int = 40
    n_shots: int = 20000
    instrument: ErasureInstrument = field(default_factory=ErasureInstrument.measured)
    spinlock_rabi: float = 2.0  # MHz
    gate_set: GateSet = field(default_factory=GateSet)
    readout: str = "Q1"  # Q1 | ideal
    thermal_init: bool = True
    levels: int = 4
    ideal_gates: bool = False

    def __post_init__(self):
        logical_vector(self.initial_state)
        if self.dd not in ("xy4", "spinlock", "none"):
            raise ValueError(f"dd must be xy4, spinlock or none, got {self.dd!r}")
        if self.n_rounds_max < 1:
            raise ValueError("n_rounds_max must be at least 1")
        if self.n_shots < 1:
            raise ValueError("n_shots must be at least 1")
        if self.readout not in ("Q1", "ideal"):
            raise ValueError(f"readout must be Q1 or ideal, got {self.readout!r}")
        if self.levels < 3:
            raise ValueError("levels must be at least 3")

    def schedule(self) -> PulseSequence:
        if self.dd == "xy4":
            return compile_xy4_cycle(self.gate_set, self.cycle_time)
        if self.dd == "spinlock":
            return compile_spin_locking(self.spinlock_rabi, self.cycle_time, self.gate_set)
        return compile_idle_cycle(self.gate_set, self.cycle_time)

    def assignment(self) -> AssignmentModel:
        return AssignmentModel(matrix=M_Q1 if self.readout == "Q1" else np.eye(3))


def lock_superop(noise: NoiseParams | None, rabi: float, duration: float, alpha: float = 180.0,
                 levels: int = 4) -> np.ndarray:
    """Continuous drive along the logical X axis at Rabi frequency ``rabi`` (MHz)."""
    h0 = np.diag(logical_frame_energies(alpha, levels)).astype(complex)
    h0[0, 2] = h0[2, 0] = angular(rabi) / 2
    spec = EvolutionSpec(h0, collapses=channel_collapses(noise, "all", levels), dims=(levels,))
    return propagator(spec, duration)


def cycle_segments(seq: PulseSequence, lib: GateLibrary) -> tuple[list[np.ndarray], int]:
    """Split one cycle into superoperators separated by the erasure check(s).

    Returns the segments and the number of checks; segment k runs up to
    check k and the last one runs from the last check to the end of cycle.
    """
    d2 = lib.levels**2
    segs, acc, n_checks = [], np.eye(d2, dtype=complex), 0
    for it in seq.items:
        if not it.blocking:
            continue
        dur = it.duration_ns * 1e-3
        if it.kind == "delay":
            s = lib.idle(dur)
        elif it.kind == "pulse":
            s = lib.superop(it.gate)
        elif it.kind == "lock":
            s = lock_superop(lib.noise, dict(it.params)["rabi_MHz"], dur, lib.alpha, lib.levels)
        elif it.kind == "erasure_check":
            s = lib.idle(dur)
        else:
            raise ValueError(f"cannot simulate sequence item {it.kind!r}")
        acc = s @ acc
        if it.kind == "erasure_check":
            segs.append(acc)
            acc = np.eye(d2, dtype=complex)
            n_checks += 1
    segs.append(acc)
    return segs, n_checks


@dataclass
class LifetimeResult:
    label: str
    times: np.ndarray  # end of each round, us
    survival: np.ndarray  # fraction of shots with no flag up to and including the round
    counts: np.ndarray  # (rounds, 3) assignments (0_L, e, 1_L) among survivors
    code_populations: np.ndarray  # (rounds, 2) readout-corrected, renormalised to the code space
    polarization: np.ndarray  # <sigma> along the prepared axis among survivors
    n_shots: int
    method: str
    raw_counts: np.ndarray | None = None  # (rounds, 3) over all shots, flags ignored
    raw_polarization: np.ndarray | None = None

    def survivors(self) -> np.ndarray:
        return np.round(self.survival * self.n_shots).astype(int)

    def fit_survival(self) -> FitResult:
        return fit_exponential(self.times, self.survival, offset=0.0)

    def fit_polarization(self) -> FitResult:
        ok = self.survivors() > 0 if self.method == "trajectory" else np.ones(len(self.times), bool)
        return fit_exponential(self.times[ok], self.polarization[ok], offset=0.0)


def _polarization(code_pops: np.ndarray) -> np.ndarray:
    # after the readout rotation the prepared state sits in |0_L>
    return code_pops[:, 0] - code_pops[:, 1]


def run_lifetime(cfg: LifetimeConfig, noise: NoiseParams | None, seed: int = 0, jobs: int = 1,
                 method: str = "trajectory", alpha: float = 180.0) -> LifetimeResult:
    """Repeated DD cycles with erasure checks, post-selected on no flag so far."""
    if method not in ("trajectory", "density"):
        raise ValueError(f"method must be trajectory or density, got {method!r}")
    n = cfg.levels
    lib = GateLibrary(noise, alpha=alpha, duration=cfg.gate_set.gate, levels=n, ideal=cfg.ideal_gates)
    segs, n_checks = cycle_segments(cfg.schedule(), lib)
    if n_checks != 1:
        raise ValueError(f"a memory cycle needs exactly one erasure check, found {n_checks}")
    p_th = noise.p_thermal if (noise is not None and cfg.thermal_init) else 0.0
    rho0 = initial_state(cfg.initial_state, n, p_th)
    rot = embed_logical(readout_rotation(cfg.initial_state), n)
    model = cfg.assignment()
    m_mat = model.induced_matrix()
    times = cfg.cycle_time * np.arange(1, cfg.n_rounds_max + 1)
    if method == "density":
        surv, counts, raw = _density_rounds(segs, cfg.instrument, rho0, rot, m_mat, cfg.n_rounds_max, n)
    else:
        prog = Program(n)
        check = CheckStep.from_instrument(cfg.instrument, n)
        pre = np.array(superop_to_kraus(segs[0]))
        post = np.array(superop_to_kraus(segs[1])) if not np.allclose(segs[1], np.eye(n * n)) else None
        for _ in range(cfg.n_rounds_max):
            prog.add(KrausStep(pre)).add(check)
            if post is not None:
                prog.add(KrausStep(post))
            prog.add(MeasureStep(model, rot))
        res = run_program(prog, rho0, cfg.n_shots, seed, jobs)
        alive = np.cumprod(~res.flags, axis=1).astype(bool)
        surv = alive.mean(axis=0)
        counts = np.stack([np.bincount(res.assignments[alive[:, r], r], minlength=3)
                           for r in range(cfg.n_rounds_max)]).astype(float)
        raw = np.stack([np.bincount(res.assignments[:, r], minlength=3)
                        for r in range(cfg.n_rounds_max)]).astype(float)
    if cfg.n_rounds_max >= 2 and surv[1] == 0:
        raise RuntimeError("every shot was flagged before round 2; check the erasure instrument")
    code, raw_code = _code_populations(counts, m_mat), _code_populations(raw, m_mat)
    return LifetimeResult(cfg.initial_state, times, surv, counts, code, _polarization(code), cfg.n_shots, method,
                          raw, _polarization(raw_code))


def _code_populations(counts, m_mat):
    """Readout-corrected populations renormalised to the code space, per round."""
    code = np.full((len(counts), 2), np.nan)
    for r, c in enumerate(counts):
        if c.sum() > 0:
            cp = correct_readout(c, m_mat).populations[[0, 2]]
            if cp.sum() > 0:
                code[r] = cp / cp.sum()
    return code


def _density_rounds(segs, inst, rho0, rot, m_mat, rounds, n):
    """Exact survival and expected assignment frequencies, post-selected and raw."""
    rho, full = rho0.copy(), rho0.copy()
    surv, counts, raw = np.empty(rounds), np.empty((rounds, 3)), np.empty((rounds, 3))

    def assigned(r):
        pops = np.real(np.diag(rot @ r @ rot.conj().T))
        pops3 = np.array([pops[0], pops[1], pops[2:].sum()])
        return pops3 / pops3.sum() @ m_mat

    for r in range(rounds):
        rho = apply_superop(segs[0], rho)
        (_, p_clean, rho), _ = erasure_branches(rho, inst, n)
        rho = apply_superop(segs[1], rho)
        (_, _, f0), (_, _, f1) = erasure_branches(apply_superop(segs[0], full), inst, n)
        full = apply_superop(segs[1], f0 + f1)
        surv[r] = np.real(np.trace(rho))
        counts[r], raw[r] = assigned(rho), assigned(full)
    return surv, counts, raw


def spinlock_t1rho(noise: NoiseParams, rabi: float, t_max: float = 200.0, n_points: int = 41,
                   alpha: float = 180.0, levels: int = 4) -> FitResult:
    """Decay of <sigma_x> for |+X> held by a continuous lock along X, without erasure checks."""
    lock = lock_superop(noise, rabi, t_max / (n_points - 1), alpha, levels)
    rho = initial_state("+X", levels)
    times, sx = [], []
    for k in range(n_points):
        times.append(k * t_max / (n_points - 1))
        sx.append(2 * np.real(rho[0, 2]))
        rho = apply_superop(lock, rho)
    return fit_exponential(np.array(times), np.array(sx), offset=0.0)


def spinlock_psd(noise: NoiseParams, rabis, t_max: float = 200.0, alpha: float = 180.0):
    """T1rho at each lock Rabi frequency (MHz) and the dephasing PSD it implies."""
    pairs = [(float(r), spinlock_t1rho(noise, float(r), t_max, alpha=alpha).time_constant) for r in rabis]
    return pairs, psd_from_spinlock(pairs, noise.t1_ef)
