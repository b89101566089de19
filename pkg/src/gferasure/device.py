"""Static data/ancilla transmon Hamiltonian, level crossings and dispersive estimates.

Parameters are linear frequencies in MHz. :func:`build_static_hamiltonian`
returns rad/us (via :func:`gferasure.units.angular`); the crossing and
dispersive helpers work in MHz throughout and convert back where needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .qsys import Operator, destroy, flat_index, parse_state_label
from .units import angular


@dataclass(frozen=True)
class TransmonParams:
    omega: float  # g-e frequency, MHz
    alpha: float  # anharmonicity, MHz, subtractive
    levels: int = 4

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"transmon frequency must be positive, got {self.omega}")
        if not self.alpha > 0:
            raise ValueError(f"anharmonicity must be positive, got {self.alpha}")
        if not 2 <= self.levels <= 6:
            raise ValueError(f"levels must lie in [2, 6], got {self.levels}")

    def energies(self, frame: float = 0.0) -> np.ndarray:
        """Bare ladder in MHz, in a frame rotating at ``frame`` per excitation."""
        n = np.arange(self.levels, dtype=float)
        return (self.omega - frame) * n - 0.5 * self.alpha * n * (n - 1)


@dataclass(frozen=True)
class ResonatorParams:
    omega_r: float
    kappa_r: float
    g_r: float = 0.0
    chi_bias: float = 0.0  # measured chi_a,bias, MHz

    def __post_init__(self):
        if not self.kappa_r > 0:
            raise ValueError(f"kappa_r must be positive, got {self.kappa_r}")


@dataclass(frozen=True)
class DeviceConfig:
    data: TransmonParams
    ancilla: TransmonParams
    coupling_g: float
    resonator: ResonatorParams
    drive_detuning: float = 0.64  # MHz
    stark_shift: float = 70.0  # kHz

    def __post_init__(self):
        if self.coupling_g < 0:
            raise ValueError(f"coupling_g must be non-negative, got {self.coupling_g}")


@dataclass(frozen=True)
class Crossing:
    pair: tuple[str, str]
    ancilla_freq: float | None
    min_gap: float | None
    bare_freq: float | None = None

    @property
    def present(self) -> bool:
        return self.ancilla_freq is not None


CROSSING_PAIRS: tuple[tuple[str, str], ...] = (
    ("eg", "0Le"),
    ("1Lg", "ee"),
    ("1Lg", "0Lf"),
    ("ee", "0Lf"),
    ("hg", "ef"),
    ("hg", "0Lh"),
    ("1Le", "ef"),
    ("1Le", "0Lh"),
    ("ef", "0Lh"),
)


def _static_matrix_mhz(cfg: DeviceConfig, ancilla_omega: float | None = None,
                       levels: tuple[int, int] | None = None) -> np.ndarray:
    nd, na = levels or (cfg.data.levels, cfg.ancilla.levels)
    data = TransmonParams(cfg.data.omega, cfg.data.alpha, nd)
    anc = TransmonParams(cfg.ancilla.omega if ancilla_omega is None else ancilla_omega,
                         cfg.ancilla.alpha, na)
    s = np.kron(destroy(nd), np.eye(na))
    c = np.kron(np.eye(nd), destroy(na))
    h0 = np.diag(np.add.outer(data.energies(), anc.energies()).ravel()).astype(complex)
    return h0 + cfg.coupling_g * (s + s.conj().T) @ (c + c.conj().T)


def build_static_hamiltonian(cfg: DeviceConfig, ancilla_omega_override: float | None = None) -> Operator:
    """H0 + H_int for data (x) ancilla in rad/us, resonator and drive omitted."""
    h = angular(1.0) * _static_matrix_mhz(cfg, ancilla_omega_override)
    return Operator(h, (cfg.data.levels, cfg.ancilla.levels), hermitian=True)


def _bare_degeneracy(cfg: DeviceConfig, a: tuple[int, int], b: tuple[int, int]) -> float | None:
    # bare energies are affine in the ancilla frequency: E = E_data + n_a * w_a - alpha_a n_a(n_a-1)/2
    ed = cfg.data.energies()
    curv = lambda n: -0.5 * cfg.ancilla.alpha * n * (n - 1)
    slope = a[1] - b[1]
    if slope == 0:
        return None
    offset = (ed[a[0]] + curv(a[1])) - (ed[b[0]] + curv(b[1]))
    return -offset / slope


def _spectra(cfg: DeviceConfig, freqs: np.ndarray):
    hs = np.stack([_static_matrix_mhz(cfg, f) for f in freqs])
    return np.linalg.eigh(hs)


def scan_spectrum(cfg: DeviceConfig, freqs: Sequence[float]) -> np.ndarray:
    """Sorted eigenvalues (MHz) of the static Hamiltonian at each ancilla frequency."""
    w, _ = _spectra(cfg, np.asarray(freqs, dtype=float))
    return w


def track_levels(cfg: DeviceConfig, freqs: Sequence[float], labels: Sequence[str]) -> np.ndarray:
    """Follow adiabatically-connected eigenvalues starting from bare-state labels.

    At the first frequency each label is assigned the eigenvector with largest
    overlap with its bare state; afterwards each tracked vector moves to the
    eigenvector with largest overlap with its previous value.
    """
    dims = (cfg.data.levels, cfg.ancilla.levels)
    w, v = _spectra(cfg, np.asarray(freqs, dtype=float))
    out = np.empty((len(freqs), len(labels)))
    for j, lab in enumerate(labels):
        k = flat_index(parse_state_label(lab, dims), dims)
        cur = int(np.argmax(np.abs(v[0][k, :])))
        ref = v[0][:, cur]
        for i in range(len(freqs)):
            cur = int(np.argmax(np.abs(ref.conj() @ v[i])))
            ref = v[i][:, cur]
            out[i, j] = w[i][cur]
    return out


def find_level_crossings(cfg: DeviceConfig, freq_range: tuple[float, float] = (4000.0, 7000.0),
                         pairs: Sequence[tuple[str, str]] = CROSSING_PAIRS,
                         step: float = 0.25, window: float = 20.0) -> list[Crossing]:
    """Locate avoided crossings between labelled pairs as the ancilla is tuned.

    For each pair the scan covers ``window`` MHz around the bare degeneracy,
    tracks both dressed states by maximum overlap from step to step, then
    refines the minimum gap with a bounded golden-section search.
    """
    lo, hi = freq_range
    if lo < 4000.0 or hi > 7000.0 or lo >= hi:
        raise ValueError(f"frequency range must lie within 4000-7000 MHz, got {freq_range}")
    dims = (cfg.data.levels, cfg.ancilla.levels)
    results = []
    for pair in pairs:
        a = parse_state_label(pair[0], dims)
        b = parse_state_label(pair[1], dims)
        f0 = _bare_degeneracy(cfg, a, b)
        if f0 is None or not lo <= f0 <= hi:
            results.append(Crossing(tuple(pair), None, None, f0))
            continue
        freqs = np.arange(max(lo, f0 - window), min(hi, f0 + window) + 1e-9, step)
        w, v = _spectra(cfg, freqs)
        ia, ib = flat_index(a, dims), flat_index(b, dims)
        refs = []
        ka = int(np.argmax(np.abs(v[0][ia, :])))
        kb = int(np.argmax(np.abs(v[0][ib, :])))
        ra, rb = v[0][:, ka], v[0][:, kb]
        gaps = np.empty(len(freqs))
        for i in range(len(freqs)):
            ka = int(np.argmax(np.abs(ra.conj() @ v[i])))
            ov = np.abs(rb.conj() @ v[i])
            ov[ka] = -1.0
            kb = int(np.argmax(ov))
            ra, rb = v[i][:, ka], v[i][:, kb]
            refs.append((ra, rb))
            gaps[i] = abs(w[i][ka] - w[i][kb])
        k = int(np.argmin(gaps))
        if k == 0 or k == len(freqs) - 1:
            results.append(Crossing(tuple(pair), None, None, f0))
            continue
        ra, rb = refs[k]

        def gap_at(f):
            ww, vv = np.linalg.eigh(_static_matrix_mhz(cfg, f))
            ja = int(np.argmax(np.abs(ra.conj() @ vv)))
            ov = np.abs(rb.conj() @ vv)
            ov[ja] = -1.0
            return abs(ww[ja] - ww[int(np.argmax(ov))])

        res = minimize_scalar(gap_at, bounds=(freqs[k - 1], freqs[k + 1]), method="bounded",
                              options={"xatol": 1e-5})
        results.append(Crossing(tuple(pair), float(res.x), float(res.fun), f0))
    return results


# --- dispersive shifts -------------------------------------------------------


def _detunings(res: ResonatorParams, ancilla: TransmonParams, omega_bias: float):
    d1 = omega_bias - res.omega_r
    d2 = omega_bias - ancilla.alpha - res.omega_r
    if d1 == 0 or d2 == 0:
        raise ValueError("ancilla transition resonant with the readout resonator")
    if np.sign(d1) != np.sign(d2):
        raise ValueError("ancilla in the straddling regime; the dispersive formula does not apply")
    return d1, d2


def chi_ancilla_bias(res: ResonatorParams, ancilla: TransmonParams, omega_bias: float,
                     g_r: float | None = None) -> float:
    """Resonator pull between ancilla |g> and |e>, MHz (full e-g difference)."""
    d1, d2 = _detunings(res, ancilla, omega_bias)
    g_r = res.g_r if g_r is None else g_r
    return -2.0 * g_r**2 * ancilla.alpha / (d1 * d2)


def g_r_from_chi(chi: float, res: ResonatorParams, ancilla: TransmonParams, omega_bias: float) -> float:
    """Inverse of :func:`chi_ancilla_bias`: coupling that reproduces a measured chi."""
    d1, d2 = _detunings(res, ancilla, omega_bias)
    val = -chi * d1 * d2 / (2.0 * ancilla.alpha)
    if val < 0:
        raise ValueError(f"chi={chi} MHz has the wrong sign for these detunings")
    return float(np.sqrt(val))


def ancilla_level_shifts(res: ResonatorParams, ancilla: TransmonParams, g_r: float,
                         levels: int | None = None) -> np.ndarray:
    """Per-photon dispersive shift of each ancilla level (MHz), second order in g_r."""
    n = levels or ancilla.levels
    ext = TransmonParams(ancilla.omega, ancilla.alpha, min(n + 1, 6) if n < 6 else 6)
    trans = np.diff(ext.energies())
    shifts = np.zeros(n)
    for k in range(n):
        down = k * g_r**2 / (trans[k - 1] - res.omega_r) if k > 0 else 0.0
        up = (k + 1) * g_r**2 / (trans[k] - res.omega_r) if k < len(trans) else 0.0
        shifts[k] = down - up
    return shifts


def _gf_splitting(cfg: DeviceConfig, ancilla_shift: np.ndarray) -> float:
    h = _static_matrix_mhz(cfg)
    nd, na = cfg.data.levels, cfg.ancilla.levels
    h = h + np.diag(np.tile(ancilla_shift, nd))
    w, v = np.linalg.eigh(h)
    e_of = lambda idx: w[int(np.argmax(np.abs(v[idx, :])))]
    return e_of(flat_index((2, 0), (nd, na))) - e_of(flat_index((0, 0), (nd, na)))


@dataclass(frozen=True)
class DispersiveDetails:
    chi_eff: float  # kHz
    chi_undriven: float  # kHz
    nbar: float
    g_r: float  # MHz


def exact_dispersive(cfg: DeviceConfig, nbar: float | None = None) -> DispersiveDetails:
    """Exact g-f dispersive shift from diagonalising data (x) ancilla with a photon-dependent ancilla shift.

    The resonator enters only as ``nbar * chi_k`` on ancilla level k. With
    ``nbar`` unset, the photon number is solved so that the data g-f Stark
    shift equals the configured ``stark_shift``; the returned ``chi_eff`` is
    the differential shift d(omega_gf)/d(nbar) at that operating point.
    """
    res, anc = cfg.resonator, cfg.ancilla
    g_r = g_r_from_chi(res.chi_bias, res, anc, anc.omega) if res.chi_bias else res.g_r
    chi_k = ancilla_level_shifts(res, anc, g_r)
    base = _gf_splitting(cfg, np.zeros_like(chi_k))
    stark = lambda nb: (_gf_splitting(cfg, nb * chi_k) - base) * 1e3  # kHz

    h = 1e-3
    chi0 = stark(h) / h
    if nbar is None:
        target = abs(cfg.stark_shift)
        if target == 0 or chi0 == 0:
            nbar = 0.0
        else:
            hi = 2.0 * target / abs(chi0) + 1.0
            nbar = brentq(lambda nb: abs(stark(nb)) - target, 0.0, hi, xtol=1e-9)
    d = 1e-2
    if nbar > d:
        chi = (stark(nbar + d) - stark(nbar - d)) / (2 * d)
    else:
        chi = chi0
    return DispersiveDetails(float(chi), float(chi0), float(nbar), float(g_r))


def chi_logical_effective(cfg: DeviceConfig, mode: str = "analytic") -> float:
    """Effective g-f dispersive shift of the data qubit on the ancilla resonator, in kHz."""
    if mode == "analytic":
        det = cfg.data.omega - cfg.data.alpha - cfg.ancilla.omega
        return cfg.resonator.chi_bias * (np.sqrt(2.0) * cfg.coupling_g / det) ** 2 * 1e3
    if mode == "exact":
        return exact_dispersive(cfg).chi_eff
    raise ValueError(f"unknown mode {mode!r}; expected 'analytic' or 'exact'")


def stark_shift_from_drive(cfg: DeviceConfig, chi_eff: float, drive_amp: float) -> float:
    """Data g-f Stark shift (kHz) for a readout drive of amplitude ``drive_amp`` (MHz)."""
    delta, kappa = cfg.drive_detuning, cfg.resonator.kappa_r
    return chi_eff * drive_amp**2 / (delta**2 + (kappa / 2) ** 2)


def shot_noise_dephasing(cfg: DeviceConfig, chi_eff: float,
                         stark_shift: float | None = None) -> tuple[float, float]:
    """Return (Stark shift in kHz, photon shot-noise dephasing rate in Hz).

    All of chi, kappa and the drive detuning are handled as linear
    frequencies so no 2*pi factor is mixed in.
    """
    stark = cfg.stark_shift if stark_shift is None else stark_shift
    delta = cfg.drive_detuning  # MHz
    kappa = cfg.resonator.kappa_r  # MHz
    chi_mhz = chi_eff * 1e-3
    if abs(delta) < 10.0 * abs(chi_mhz):
        raise ValueError(f"drive detuning {delta} MHz is not large compared with chi_eff {chi_eff} kHz")
    ratio = abs(chi_mhz / 2.0) * kappa / (delta**2 + (kappa / 2.0) ** 2)
    gamma_hz = ratio * abs(stark) * 1e3
    return float(stark), float(gamma_hz)
