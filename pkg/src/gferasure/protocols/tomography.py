"""Two-qubit logical state tomography by linear inversion."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..qsys import DensityMatrix

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# rotations taking the +1 eigenstate of each Pauli to |0>
_PRE = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}
ALL_BASES = tuple(a + b for a, b in product("XYZ", repeat=2))


class TomographyError(ValueError):
    pass


def basis_probabilities(rho: np.ndarray, basis: str) -> np.ndarray:
    """Outcome probabilities (00, 01, 10, 11) after rotating into ``basis`` (e.g. "XZ")."""
    u = np.kron(_PRE[basis[0]], _PRE[basis[1]])
    p = np.real(np.diag(u @ rho @ u.conj().T))
    p = np.clip(p, 0, None)
    return p / p.sum()


def sample_counts(rho, n_shots: int | None, seed: int = 0, bases=ALL_BASES) -> dict[str, np.ndarray]:
    """Counts per basis from ``n_shots`` multinomial draws; ``None`` returns exact probabilities."""
    rho = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise TomographyError(f"expected a two-qubit (4x4) state, got shape {rho.shape}")
    rng = np.random.default_rng(seed)
    out = {}
    for b in bases:
        p = basis_probabilities(rho, b)
        out[b] = p if n_shots is None else rng.multinomial(n_shots, p).astype(float)
    return out


@dataclass(frozen=True)
class Reconstruction:
    rho: DensityMatrix
    linear: np.ndarray  # before the positivity projection
    expectations: dict[str, float]


def _signs(which: tuple[bool, bool]) -> np.ndarray:
    # eigenvalue of the measured Pauli (or 1 for identity) for outcomes 00, 01, 10, 11
    s0 = np.array([1, 1, -1, -1]) if which[0] else np.ones(4)
    s1 = np.array([1, -1, 1, -1]) if which[1] else np.ones(4)
    return s0 * s1


def project_physical(m: np.ndarray) -> np.ndarray:
    """Nearest positive unit-trace matrix by eigenvalue clipping and renormalisation."""
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise TomographyError("reconstructed matrix has no positive part")
    return (v * (w / w.sum())) @ v.conj().T


def reconstruct(counts: dict[str, np.ndarray]) -> Reconstruction:
    """Linear inversion from all nine Pauli-pair bases, then positivity projection."""
    missing = [b for b in ALL_BASES if b not in counts]
    if missing:
        raise TomographyError(f"tomography needs all nine bases; missing {', '.join(missing)}")
    freqs = {}
    for b in ALL_BASES:
        c = np.asarray(counts[b], dtype=float)
        if c.shape != (4,) or c.sum() <= 0:
            raise TomographyError(f"basis {b}: expected four non-negative counts")
        freqs[b] = c / c.sum()
    expect = {"II": 1.0}
    for a, b in product("IXYZ", repeat=2):
        if a == b == "I":
            continue
        # average over every measured basis that determines this Pauli
        est = [freqs[m] @ _signs((a != "I", b != "I")) for m in ALL_BASES
               if (a == "I" or m[0] == a) and (b == "I" or m[1] == b)]
        expect[a + b] = float(np.mean(est))
    lin = sum(v * np.kron(PAULIS[k[0]], PAULIS[k[1]]) for k, v in expect.items()) / 4
    return Reconstruction(DensityMatrix(project_physical(lin), (2, 2)), lin, expect)


def tomography(rho, n_shots: int | None = 10000, seed: int = 0, bases=ALL_BASES) -> DensityMatrix:
    """Simulate measuring ``rho`` in the Pauli-pair ``bases`` and reconstruct it."""
    return reconstruct(sample_counts(rho, n_shots, seed, bases)).rho
