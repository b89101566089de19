"""Heralded Bell states of two g-f qubits from an ancilla parity measurement.

Both data transmons (three levels each) start on the equator, two
cross-resonance CNOTs write their parity onto a two-level ancilla, and the
ancilla outcome heralds one of two Bell states. The effective
cross-resonance Hamiltonian drives the ancilla when its control is in
|0_L>, while the CNOT is usually described as flipping on |1_L>. The two
differ by an unconditional ancilla flip per gate, which cancels over the
pair, so ``control_state`` only relabels and both choices herald the same
states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine.instruments import ErasureInstrument, erasure_branches
from ..engine.master import EvolutionSpec, apply_superop, propagator
from ..noise import CollapseOperator, NoiseParams, collapse_operators
from ..pulses import ideal_logical
from ..qsys import DensityMatrix, embed, partial_trace, state_fidelity
from ..units import angular
from .gates import embed_logical
from .tomography import tomography

DIMS = (3, 3, 2)  # Q1, Q2, ancilla
S2 = 1 / np.sqrt(2)
# two-qubit targets on (0_L 0_L, 0_L 1_L, 1_L 0_L, 1_L 1_L)
TARGETS = {
    "00-i11": np.array([S2, 0, 0, -1j * S2]),
    "00+i11": np.array([S2, 0, 0, 1j * S2]),
    "10-01": np.array([0, -S2, S2, 0]),
}
# data-qubit frame phases that realise each pair of heralded targets
PHASE_PRESETS = {
    "minus": (np.pi / 4, -3 * np.pi / 4),  # g -> 00-i11, e -> 10-01
    "plus": (3 * np.pi / 4, -np.pi / 4),  # g -> 00+i11, e -> 10-01
}
HERALD_TARGETS = {"minus": {"g": "00-i11", "e": "10-01"}, "plus": {"g": "00+i11", "e": "10-01"}}


@dataclass(frozen=True)
class CRParams:
    omega_eff: float = 2.0  # MHz, conditional Rabi rate
    delta_ac: float = 0.5  # MHz, Stark term
    duration: float | None = None  # us; None gives the CNOT time pi / omega_eff
    phases: str = "minus"
    control_state: str = "0L"  # data state that drives the ancilla
    wait: float = 1.3  # us between the herald and tomography
    swap_time: float = 0.2

    def __post_init__(self):
        if not self.omega_eff > 0:
            raise ValueError("omega_eff must be positive")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.phases not in PHASE_PRESETS:
            raise ValueError(f"phases must be one of {tuple(PHASE_PRESETS)}")
        if self.control_state not in ("0L", "1L"):
            raise ValueError("control_state must be 0L or 1L")
        if self.wait < 0:
            raise ValueError("wait must be non-negative")

    @property
    def gate_time(self) -> float:
        return self.duration if self.duration is not None else 1.0 / (2.0 * self.omega_eff)


@dataclass(frozen=True)
class BellNoise:
    q1: NoiseParams
    q2: NoiseParams
    ancilla_t1: float = 17.0
    ancilla_t2e: float = 17.0
    readout_len: float = 1.4

    def __post_init__(self):
        if not (self.ancilla_t1 > 0 and 0 < self.ancilla_t2e <= 2 * self.ancilla_t1):
            raise ValueError("ancilla needs T1 > 0 and 0 < T2 <= 2 T1")

    @property
    def herald_error(self) -> float:
        """Probability that an excited ancilla relaxes during the first half of its readout."""
        return 1.0 - np.exp(-self.readout_len / (2.0 * self.ancilla_t1))


def _ancilla_collapses(bn: BellNoise) -> list[CollapseOperator]:
    out = [CollapseOperator(embed(np.array([[0, 1], [0, 0]], complex), 2, DIMS), 1 / bn.ancilla_t1)]
    g_phi = 1 / bn.ancilla_t2e - 1 / (2 * bn.ancilla_t1)
    if g_phi > 0:
        out.append(CollapseOperator(embed(np.diag([0, 1]).astype(complex), 2, DIMS), 2 * g_phi))
    return out


def _collapses(bn: BellNoise | None, ancilla: bool = True) -> list[CollapseOperator]:
    if bn is None:
        return []
    cs = collapse_operators(bn.q1, 3, 0, DIMS) + collapse_operators(bn.q2, 3, 1, DIMS)
    return cs + (_ancilla_collapses(bn) if ancilla else [])


def _code_projectors():
    p0 = np.diag([1, 0, 0]).astype(complex)
    p1 = np.diag([0, 0, 1]).astype(complex)
    return p0, p1


def cr_hamiltonian(cr: CRParams, control: int) -> np.ndarray:
    """(delta_ac/2)(P0 - P1) x I + (omega_eff/2) P0 x sigma_x, in rad/us (P1 with control_state 1L)."""
    p0, p1 = _code_projectors()
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    z_term = embed(p0 - p1, control, DIMS)
    drive = embed(p0 if cr.control_state == "0L" else p1, control, DIMS) @ embed(sx, 2, DIMS)
    return angular(cr.delta_ac) / 2 * z_term + angular(cr.omega_eff) / 2 * drive


def _virtual_z(control: int, angle: float) -> np.ndarray:
    """exp(+i angle/2 (P0 - P1)) on ``control``: undoes the Stark phase of one CR pulse."""
    p0, p1 = _code_projectors()
    d = np.exp(1j * angle / 2 * np.real(np.diag(p0 - p1)))
    return embed(np.diag(d), control, DIMS)


def _data_phase(index: int, theta: float) -> np.ndarray:
    return embed(np.diag([1, 1, np.exp(1j * theta)]), index, DIMS)


def _conj(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


@dataclass
class BellResult:
    herald_probabilities: dict[str, float]
    states: dict[str, DensityMatrix]  # reconstructed two-qubit code-space states
    exact_states: dict[str, DensityMatrix]  # before tomography sampling
    fidelities: dict[str, float]
    targets: dict[str, str]
    kept_fraction: dict[str, float]  # code-space share (and no-flag share with erasure checks)


def _code_block(rho9: np.ndarray) -> tuple[np.ndarray, float]:
    idx = [0 * 3 + 0, 0 * 3 + 2, 2 * 3 + 0, 2 * 3 + 2]
    block = rho9[np.ix_(idx, idx)]
    w = float(np.real(np.trace(block)))
    return block / w, w


def run_parity_bell(cr: CRParams, noise: BellNoise | None, with_erasure: bool = False, seed: int = 0,
                    n_shots: int | None = 10000,
                    instrument: ErasureInstrument | None = None) -> BellResult:
    """Prepare, entangle, herald, wait, optionally check for erasures, then tomography."""
    inst = ErasureInstrument.measured() if instrument is None else instrument
    psi = np.zeros(int(np.prod(DIMS)), complex)
    psi[0] = 1
    rho = np.outer(psi, psi.conj())
    x90 = embed_logical(ideal_logical(np.pi / 2, 0.0), 3)
    rho = _conj(embed(x90, 0, DIMS) @ embed(x90, 1, DIMS), rho)
    t = cr.gate_time
    for control in (0, 1):
        spec = EvolutionSpec(cr_hamiltonian(cr, control), collapses=_collapses(noise), dims=DIMS)
        rho = apply_superop(propagator(spec, t), rho)
        rho = _conj(_virtual_z(control, angular(cr.delta_ac) * t), rho)
    th1, th2 = PHASE_PRESETS[cr.phases]
    rho = _conj(_data_phase(0, th1) @ _data_phase(1, th2), rho)

    # ancilla readout: |e> is reported as g with the relaxation probability
    eps = noise.herald_error if noise is not None else 0.0
    branch = {}
    for a in (0, 1):
        pa = embed(np.diag([1.0 - a, a]).astype(complex), 2, DIMS)
        branch[a] = partial_trace(DensityMatrix(pa @ rho @ pa, DIMS), [0, 1]).data
    heralded = {"g": branch[0] + eps * branch[1], "e": (1 - eps) * branch[1]}

    if noise is not None:
        idle_spec = EvolutionSpec(np.zeros((9, 9), complex),
                                  collapses=collapse_operators(noise.q1, 3, 0, (3, 3)) + collapse_operators(noise.q2, 3, 1, (3, 3)),
                                  dims=(3, 3))
    probs, states, exact, fids, kept = {}, {}, {}, {}, {}
    for k, (label, r) in enumerate(heralded.items()):
        p = float(np.real(np.trace(r)))
        probs[label] = p
        r = r / p
        survive = 1.0
        if noise is not None:
            r = apply_superop(propagator(idle_spec, cr.wait), r)
        if with_erasure:
            for q in (0, 1):
                if noise is not None:
                    r = apply_superop(propagator(idle_spec, cr.swap_time), r)
                (_, pc, r), _ = erasure_branches(r, inst, 3, q, (3, 3))
                survive *= pc
                r = r / pc
        block, w = _code_block(r)
        kept[label] = survive * w
        exact[label] = DensityMatrix(block, (2, 2))
        states[label] = tomography(block, n_shots, seed=seed + k)
        target = HERALD_TARGETS[cr.phases][label]
        fids[label] = state_fidelity(states[label], TARGETS[target])
    return BellResult(probs, states, exact, fids, dict(HERALD_TARGETS[cr.phases]), kept)
