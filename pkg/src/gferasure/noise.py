"""Collapse operators for a decaying, dephasing transmon and the spin-lock PSD relation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qsys import embed

# h -> f relaxation relative to f -> e, from the sqrt(n) ladder scaling (3/2)
H_DECAY_SCALE = 1.5


@dataclass(frozen=True)
class NoiseParams:
    t1_ge: float
    t1_ef: float
    tphi_gf: float
    p_thermal: float = 0.0
    ancilla_t1: float = 15.0
    ancilla_t2e: float = 1.1
    readout_len: float = 1.4
    # relative phase weight of each level in the dephasing operator
    dephasing_weights: tuple[float, ...] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("t1_ge", "t1_ef", "tphi_gf", "ancilla_t1", "ancilla_t2e", "readout_len"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if not 0 <= self.p_thermal < 0.5:
            raise ValueError(f"p_thermal must lie in [0, 0.5), got {self.p_thermal}")
        w = self.dephasing_weights
        if len(w) < 3 or w[2] == w[0]:
            raise ValueError("dephasing_weights must distinguish g from f")

    @property
    def gamma_up(self) -> float:
        return self.p_thermal / self.t1_ge


@dataclass(frozen=True)
class CollapseOperator:
    operator: np.ndarray
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"collapse rate must be non-negative, got {self.rate}")
        object.__setattr__(self, "operator", np.asarray(self.operator, dtype=complex))

    @property
    def scaled(self) -> np.ndarray:
        return np.sqrt(self.rate) * self.operator


def _jump(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


def collapse_operators(params: NoiseParams, levels: int = 3, index: int = 0,
                       dims: Sequence[int] | None = None, decay: bool = True,
                       dephasing: bool = True, thermal: bool = True) -> list[CollapseOperator]:
    """Lindblad operators for one transmon, optionally embedded at ``index`` of ``dims``.

    The dephasing operator is diag(w) with w the level weights, normalised so
    that the g-f coherence decays at exactly 1/tphi_gf.
    """
    n = levels
    out = []
    if decay:
        out.append(CollapseOperator(_jump(n, 0, 1), 1.0 / params.t1_ge))
        if n > 2:
            out.append(CollapseOperator(_jump(n, 1, 2), 1.0 / params.t1_ef))
        if n > 3:
            out.append(CollapseOperator(_jump(n, 2, 3), H_DECAY_SCALE / params.t1_ef))
    if thermal and params.p_thermal > 0:
        out.append(CollapseOperator(_jump(n, 1, 0), params.gamma_up))
    if dephasing and n > 2:
        w = np.zeros(n)
        k = min(n, len(params.dephasing_weights))
        w[:k] = params.dephasing_weights[:k]
        w = w / (w[2] - w[0])
        # D[sqrt(r) diag(w)] damps rho_gf at r (w_f - w_g)^2 / 2
        out.append(CollapseOperator(np.diag(w).astype(complex), 2.0 / params.tphi_gf))
    if dims is not None:
        out = [CollapseOperator(embed(c.operator, index, dims), c.rate) for c in out]
    return out


@dataclass(frozen=True)
class PSDPoint:
    freq: float  # MHz
    s_omega: float  # 1/us
    clipped: bool


def psd_from_spinlock(t1rho: Sequence[tuple[float, float]], t1_ef: float) -> list[PSDPoint]:
    """Invert 1/T1rho = S/2 + 1/(2 T1ef) for the dephasing noise density at each lock rate."""
    out = []
    for freq, t in t1rho:
        if not t > 0:
            raise ValueError(f"T1rho must be positive, got {t} at {freq} MHz")
        s = 2.0 * (1.0 / t - 1.0 / (2.0 * t1_ef))
        out.append(PSDPoint(float(freq), max(s, 0.0), s < 0))
    return out
