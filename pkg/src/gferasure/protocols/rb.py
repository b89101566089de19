"""Single-qubit randomized benchmarking of the g-f qubit with mid-sequence erasure checks.

With erasure detection, a block of ``check_every`` Cliffords is padded with
an idle to the cycle time and followed by the erasure SWAP and the check;
flagged shots are discarded and the curve is P(0_L) within the code space.
The raw curve runs the same Clifford words back to back with no checks and
counts a final |e> as a failure.

Every random word is run twice, once recovering to |0_L> and once to
|1_L>, each with half the shots. The difference of the two raw curves
removes leaked and seeped population, which the leakage-aware fit needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..analysis import PHYSICAL_PER_CLIFFORD, LeakageRBFit, RBFit, leakage_rb_fit, rb_fit
from ..engine.instruments import AssignmentModel, ErasureInstrument
from ..engine.master import superop_to_kraus
from ..engine.trajectories import CheckStep, KrausStep, MeasureStep, Program, run_program
from ..noise import NoiseParams
from ..pulses import clifford_index, clifford_inverse, clifford_products, compile_clifford, gate_unitary
from .gates import GateLibrary


def default_rb_instrument() -> ErasureInstrument:
    """17% missed erasures, a third of which stay in |e> for the next check."""
    return ErasureInstrument.from_fn_rate(0.17, 1.0 / 3.0)


@dataclass(frozen=True)
class RBConfig:
    sequence_lengths: tuple[int, ...] = (1, 25, 50, 100, 150, 200, 300, 400)
    n_randomizations: int = 20
    shots_per_length: int = 1000
    check_every: int = 29  # Cliffords per erasure check
    cycle_time: float = 5.04  # us, one block of Cliffords plus its check
    post_select: bool = True
    instrument: ErasureInstrument = field(default_factory=default_rb_instrument)
    gate_time: float = 0.08
    swap_time: float = 0.2
    levels: int = 4
    ideal_gates: bool = False

    def __post_init__(self):
        lengths = tuple(int(m) for m in self.sequence_lengths)
        object.__setattr__(self, "sequence_lengths", lengths)
        if len(lengths) < 3:
            raise ValueError("need at least 3 sequence lengths")
        if any(m < 1 for m in lengths) or any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValueError("sequence_lengths must be positive and strictly ascending")
        if self.n_randomizations < 1 or self.shots_per_length < 2 * self.n_randomizations:
            raise ValueError("need at least one randomization and one shot per randomization")
        if self.check_every < 1:
            raise ValueError("check_every must be at least 1")
        if self.pad_time < 0:
            raise ValueError(f"cycle_time {self.cycle_time} us is shorter than {self.check_every} Cliffords plus the SWAP")

    @property
    def pad_time(self) -> float:
        """Idle added to every block so that gates, idle and SWAP fill the cycle."""
        return self.cycle_time - self.check_every * PHYSICAL_PER_CLIFFORD * self.gate_time - self.swap_time

    @property
    def shots_per_sequence(self) -> int:
        """Shots for each recovery polarity of one random word."""
        return self.shots_per_length // (2 * self.n_randomizations)


def random_sequence(m: int, rng: np.random.Generator, target: int = 0) -> list[int]:
    """m random Clifford indices and a recovery Clifford that ends in |target_L>."""
    idx = rng.integers(0, 24, size=m)
    table = clifford_products()
    net = 0
    for i in idx:
        net = table[net, i]
    rec = clifford_inverse(int(net))
    if target:
        rec = int(table[rec, clifford_index(gate_unitary("X"))])
    return [int(i) for i in idx] + [rec]


def flip_recovery(seq: list[int]) -> list[int]:
    """The same word with its recovery followed by X, so it ends in the other logical state."""
    return seq[:-1] + [int(clifford_products()[seq[-1], clifford_index(gate_unitary("X"))])]


class _Channels:
    """Clifford, pad and check superoperators on one transmon."""

    def __init__(self, cfg: RBConfig, noise: NoiseParams | None, alpha: float):
        self.lib = GateLibrary(noise, alpha=alpha, duration=cfg.gate_time, levels=cfg.levels, ideal=cfg.ideal_gates)
        n = cfg.levels
        self.cliff = []
        for i in range(24):
            s = np.eye(n * n, dtype=complex)
            for g in compile_clifford(i):
                s = self.lib.superop(g) @ s
            self.cliff.append(s)
        self.pad = self.lib.idle(cfg.pad_time + cfg.swap_time)
        ks = cfg.instrument.kraus(n)
        self.clean = sum(np.kron(k, k.conj()) for k in ks[False])
        self.flagged = sum(np.kron(k, k.conj()) for k in ks[True])


def _fold(p: np.ndarray) -> np.ndarray:
    return np.array([p[0], p[1], p[2:].sum()])


def _final_pops(v: np.ndarray, n: int) -> np.ndarray:
    return _fold(np.real(np.diag(v.reshape(n, n))))


def _is_check_point(k: int, seq_len: int, every: int) -> bool:
    # after every ``every`` Cliffords, but never right before the final measurement
    return (k + 1) % every == 0 and k + 1 < seq_len


def _sequence_outcomes(seq: list[int], ch: _Channels, cfg: RBConfig) -> tuple[np.ndarray, np.ndarray]:
    """Outcome probabilities for one Clifford word.

    Returns (detected, raw): ``detected`` has rows never flagged / flagged
    at least once and columns 0_L, e, 1_L; ``raw`` is the three-outcome
    distribution of the same word without any check.
    """
    n = cfg.levels
    v0 = np.zeros(n * n, dtype=complex)
    v0[0] = 1.0
    raw, tot, clean = v0.copy(), v0.copy(), v0.copy()
    for k, c in enumerate(seq):
        s = ch.cliff[c]
        raw, tot, clean = s @ raw, s @ tot, s @ clean
        if cfg.post_select and _is_check_point(k, len(seq), cfg.check_every):
            tot = (ch.clean + ch.flagged) @ (ch.pad @ tot)
            clean = ch.clean @ (ch.pad @ clean)
    a, c = _final_pops(tot, n), _final_pops(clean, n)
    return np.clip(np.array([c, a - c]), 0, None), np.clip(_final_pops(raw, n), 0, None)


@dataclass
class RBResult:
    """Counts indexed by (length, randomization, recovery polarity, ...).

    ``raw_histograms`` ends in the outcome (0_L, e, 1_L); ``histograms`` has
    an extra flag axis (never flagged, flagged) before the outcome.
    """

    lengths: np.ndarray
    raw_histograms: np.ndarray
    histograms: np.ndarray | None
    raw_exact_probs: np.ndarray
    exact: np.ndarray | None

    def _need_ps(self):
        if self.histograms is None:
            raise ValueError("this run had no erasure checks")

    @staticmethod
    def _raw_curves(h):
        # h: (L, R, 2, 3) counts or probabilities, averaged per word
        frac = h / h.sum(axis=-1, keepdims=True)
        p0 = frac[..., 0].mean(axis=1)  # (L, 2)
        code = (frac[..., 0] + frac[..., 2]).mean(axis=(1, 2))
        return p0[:, 0], p0[:, 0] - p0[:, 1], code

    @staticmethod
    def _ps_curve(h):
        # h: (L, R, 2, 2, 3); correct outcome is 0_L for polarity 0 and 1_L for polarity 1
        clean = h[:, :, :, 0].sum(axis=1)
        good = clean[:, 0, 0] + clean[:, 1, 2]
        return good / (clean[:, :, 0].sum(axis=1) + clean[:, :, 2].sum(axis=1))

    @property
    def raw(self) -> np.ndarray:
        """P(0_L) over all shots without erasure detection, |e> counted as a failure."""
        return self._raw_curves(self.raw_histograms)[0]

    @property
    def raw_exact(self) -> np.ndarray:
        return self._raw_curves(self.raw_exact_probs)[0]

    @property
    def post_selected(self) -> np.ndarray:
        """P(ideal outcome) within the code space among never-flagged shots."""
        self._need_ps()
        return self._ps_curve(self.histograms)

    @property
    def post_selected_exact(self) -> np.ndarray:
        self._need_ps()
        return self._ps_curve(self.exact)

    @property
    def kept_fraction(self) -> np.ndarray:
        self._need_ps()
        h = self.histograms.sum(axis=(1, 2))
        return h[:, 0].sum(axis=-1) / h.sum(axis=(-2, -1))

    def fit_raw(self, exact: bool = False) -> LeakageRBFit:
        _, diff, code = self._raw_curves(self.raw_exact_probs if exact else self.raw_histograms)
        return leakage_rb_fit(self.lengths, diff, code)

    def fit_post_selected(self, exact: bool = False) -> RBFit:
        return rb_fit(self.lengths, self.post_selected_exact if exact else self.post_selected)


def run_rb(cfg: RBConfig, noise: NoiseParams | None, seed: int = 0, method: str = "density",
           alpha: float = 180.0, jobs: int = 1) -> RBResult:
    """Random Clifford sequences, without checks and (if ``post_select``) with periodic checks.

    ``density`` propagates each word's density matrix exactly and samples
    shot counts from the outcome distribution; ``trajectory`` unravels
    every shot and is meant for cross-checks at small sizes.
    """
    if method not in ("density", "trajectory"):
        raise ValueError(f"method must be density or trajectory, got {method!r}")
    ch = _Channels(cfg, noise, alpha)
    seq_rng, shot_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    n_l, n_r, per = len(cfg.sequence_lengths), cfg.n_randomizations, cfg.shots_per_sequence
    raw_h = np.zeros((n_l, n_r, 2, 3), dtype=np.int64)
    raw_p = np.zeros((n_l, n_r, 2, 3))
    hist = np.zeros((n_l, n_r, 2, 2, 3), dtype=np.int64)
    exact = np.zeros((n_l, n_r, 2, 2, 3))
    for i, m in enumerate(cfg.sequence_lengths):
        for j in range(n_r):
            base = random_sequence(m, seq_rng)
            for pol, seq in enumerate((base, flip_recovery(base))):
                exact[i, j, pol], raw_p[i, j, pol] = _sequence_outcomes(seq, ch, cfg)
                if method == "density":
                    raw_h[i, j, pol] = shot_rng.multinomial(per, raw_p[i, j, pol] / raw_p[i, j, pol].sum())
                    if cfg.post_select:
                        p = exact[i, j, pol].ravel()
                        hist[i, j, pol] = shot_rng.multinomial(per, p / p.sum()).reshape(2, 3)
                else:
                    s1, s2 = (int(x) for x in shot_rng.integers(2**63, size=2))
                    raw_h[i, j, pol] = _trajectory_counts(seq, ch, cfg, per, s1, jobs, False).sum(axis=0)
                    if cfg.post_select:
                        hist[i, j, pol] = _trajectory_counts(seq, ch, cfg, per, s2, jobs, True)
    lengths = np.array(cfg.sequence_lengths)
    if not cfg.post_select:
        return RBResult(lengths, raw_h, None, raw_p, None)
    return RBResult(lengths, raw_h, hist, raw_p, exact)


def _trajectory_counts(seq, ch: _Channels, cfg: RBConfig, shots: int, seed: int, jobs: int,
                       checks: bool) -> np.ndarray:
    n = cfg.levels
    prog = Program(n)
    check = CheckStep.from_instrument(cfg.instrument, n)
    pad = np.array(superop_to_kraus(ch.pad))
    kraus = {}
    for k, c in enumerate(seq):
        if c not in kraus:
            kraus[c] = np.array(superop_to_kraus(ch.cliff[c]))
        prog.add(KrausStep(kraus[c]))
        if checks and _is_check_point(k, len(seq), cfg.check_every):
            prog.add(KrausStep(pad)).add(check)
    prog.add(MeasureStep(AssignmentModel()))
    rho0 = np.zeros((n, n), complex)
    rho0[0, 0] = 1
    res = run_program(prog, rho0, shots, seed, jobs)
    flagged = res.flags.any(axis=1).astype(int) if res.flags.size else np.zeros(shots, int)
    out = np.zeros((2, 3), dtype=np.int64)
    np.add.at(out, (flagged, res.assignments[:, -1]), 1)
    return out
