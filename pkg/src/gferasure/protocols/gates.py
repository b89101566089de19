"""Noisy physical g-f gates and their six-cardinal-state error breakdown."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..engine.master import EvolutionSpec, apply_superop, propagator, unitary_superop
from ..noise import NoiseParams, collapse_operators
from ..pulses import (CARDINALS, GATE_ANGLES, GateCalibration, axis_rotation, calibrate_gf_pi,
                      gate_spec, ideal_logical, logical_frame_energies, virtual_z)

CHANNELS = ("none", "dephasing", "decay", "all")


@lru_cache(maxsize=16)
def calibrated(angle: float, alpha: float = 180.0, duration: float = 0.08, drag: float = 1.0,
               levels: int = 4, dt: float = 0.00025) -> GateCalibration:
    return calibrate_gf_pi(alpha, duration, angle, drag, levels, dt)


def channel_collapses(noise: NoiseParams | None, channels: str, levels: int):
    if noise is None or channels == "none":
        return []
    if channels not in CHANNELS:
        raise ValueError(f"unknown channel set {channels!r}; expected one of {CHANNELS}")
    return collapse_operators(noise, levels, decay=channels in ("decay", "all"),
                              thermal=channels in ("decay", "all"),
                              dephasing=channels in ("dephasing", "all"))


def idle_superop(noise: NoiseParams | None, duration: float, alpha: float = 180.0, levels: int = 4,
                 channels: str = "all") -> np.ndarray:
    h0 = np.diag(logical_frame_energies(alpha, levels)).astype(complex)
    spec = EvolutionSpec(h0, collapses=channel_collapses(noise, channels, levels), dims=(levels,))
    return propagator(spec, duration)


def embed_logical(u2: np.ndarray, levels: int) -> np.ndarray:
    """Lift a 2x2 logical operator to the transmon, identity on |e> and above |f>."""
    u = np.eye(levels, dtype=complex)
    u[np.ix_([0, 2], [0, 2])] = u2
    return u


class GateLibrary:
    """Superoperators of the physical gate set {I, X, Y, +-X/2, +-Y/2} on one transmon.

    Pulses are calibrated noise-free once, then re-simulated with the
    requested collapse operators. Gates about other axes follow from the X
    gate by conjugation with a frame rotation, which commutes with every
    collapse operator used here. With ``ideal`` every gate is the perfect,
    instantaneous logical rotation and only idles see the noise.
    """

    def __init__(self, noise: NoiseParams | None, alpha: float = 180.0, duration: float = 0.08,
                 levels: int = 4, channels: str = "all", drag: float = 1.0, dt: float = 0.00025,
                 ideal: bool = False):
        self.noise, self.alpha, self.duration = noise, alpha, duration
        self.levels, self.channels, self.drag, self.dt = levels, channels, drag, dt
        self.ideal = ideal
        self._base: dict[float, np.ndarray] = {}
        self._cache: dict[str, np.ndarray] = {}

    def calibration(self, angle: float) -> GateCalibration:
        return calibrated(float(angle), self.alpha, self.duration, self.drag, self.levels, self.dt)

    def _x_superop(self, angle: float) -> np.ndarray:
        if angle not in self._base:
            cal = self.calibration(angle)
            spec = gate_spec(cal.shape, self.levels, channel_collapses(self.noise, self.channels, self.levels),
                             self.dt)
            s = propagator(spec, self.duration)
            pre = unitary_superop(virtual_z(cal.z_pre, self.levels))
            post = unitary_superop(virtual_z(cal.z_post, self.levels))
            self._base[angle] = post @ s @ pre
        return self._base[angle]

    def superop(self, name: str) -> np.ndarray:
        if name not in self._cache:
            angle, theta = GATE_ANGLES[name]
            if self.ideal:
                s = unitary_superop(embed_logical(ideal_logical(angle, theta), self.levels))
            elif angle == 0:
                s = idle_superop(self.noise, self.duration, self.alpha, self.levels, self.channels)
            else:
                r = unitary_superop(axis_rotation(theta, self.levels))
                s = r @ self._x_superop(angle) @ r.conj().T
            self._cache[name] = s
        return self._cache[name]

    def idle(self, duration: float) -> np.ndarray:
        return idle_superop(self.noise, duration, self.alpha, self.levels, self.channels)


@dataclass(frozen=True)
class GateErrorBreakdown:
    leak_e: float
    leak_h: float
    pauli: float  # residual, labelled control error when there is no decoherence
    total: float


def cardinal_breakdown(s: np.ndarray, target: np.ndarray, levels: int) -> GateErrorBreakdown:
    fid = le = lh = 0.0
    for v in CARDINALS:
        psi = np.zeros(levels, complex)
        psi[[0, 2]] = v
        out = apply_superop(s, np.outer(psi, psi.conj()))
        tgt = np.zeros(levels, complex)
        tgt[[0, 2]] = target @ v
        fid += np.real(tgt.conj() @ out @ tgt)
        le += np.real(out[1, 1])
        lh += np.real(np.trace(out[3:, 3:]))
    fid, le, lh = fid / 6, le / 6, lh / 6
    return GateErrorBreakdown(le, lh, 1 - fid - le - lh, 1 - fid)


def post_selected(b: GateErrorBreakdown, eps_fn: float, catchable: float = 1.0 / 3.0) -> GateErrorBreakdown:
    """Error left after discarding flagged |e> leakage with false-negative rate ``eps_fn``."""
    le = b.leak_e * eps_fn * (1 - catchable)
    return GateErrorBreakdown(le, b.leak_h, b.pauli, le + b.leak_h + b.pauli)


def gate_error_table(name: str, noise: NoiseParams, eps_fn: float = 0.17, catchable: float = 1.0 / 3.0,
                     alpha: float = 180.0, duration: float = 0.08, levels: int = 4) -> dict[str, GateErrorBreakdown]:
    """Columns: no decoherence, pure dephasing, decay, both, both with imperfect post-selection."""
    target = ideal_logical(*GATE_ANGLES[name])
    out = {}
    for ch in CHANNELS:
        lib = GateLibrary(noise, alpha, duration, levels, ch)
        out[ch] = cardinal_breakdown(lib.superop(name), target, levels)
    out["all_ps"] = post_selected(out["all"], eps_fn, catchable)
    return out
