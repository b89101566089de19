"""Dense operators and states on small composite Hilbert spaces.

Everything here is a thin layer over numpy arrays. ``Operator`` and
``DensityMatrix`` carry the subsystem dimensions alongside the matrix so
that tensor products and partial traces can do their own bookkeeping.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

MAX_DIM = 64
ATOL = 1e-9

LEVEL_NAMES = {"g": 0, "e": 1, "f": 2, "h": 3}
LOGICAL_ALIASES = {"0L": "g", "0_L": "g", "1L": "f", "1_L": "f"}


class DimensionError(ValueError):
    pass


def _check_dims(dims: Sequence[int], n: int) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be positive, got {dims}")
    if int(np.prod(dims)) != n:
        raise DimensionError(f"dims {dims} do not multiply to matrix size {n}")
    if n > MAX_DIM:
        raise DimensionError(f"dimension {n} exceeds the supported maximum {MAX_DIM}")
    return dims


@dataclass(frozen=True)
class Operator:
    """Square complex matrix on a composite space with subsystem ``dims``."""

    data: np.ndarray
    dims: tuple[int, ...] = field(default=())
    hermitian: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"operator must be square, got shape {data.shape}")
        dims = self.dims or (data.shape[0],)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", _check_dims(dims, data.shape[0]))
        if self.hermitian and not np.allclose(data, data.conj().T, atol=ATOL):
            raise ValueError("operator flagged Hermitian but is not")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.dims, self.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.dims != other.dims:
            raise DimensionError(f"dims mismatch {self.dims} vs {other.dims}")
        return Operator(self.data @ other.data, self.dims)

    def __add__(self, other: "Operator") -> "Operator":
        if self.dims != other.dims:
            raise DimensionError(f"dims mismatch {self.dims} vs {other.dims}")
        return Operator(self.data + other.data, self.dims)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.data * scalar, self.dims)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {data.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", _check_dims(self.dims or (data.shape[0],), data.shape[0]))

    @classmethod
    def from_ket(cls, psi: np.ndarray, dims: Sequence[int] = ()) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), tuple(dims) or (psi.size,))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-9, eig_tol: float = 1e-9) -> None:
        validate_density(self.data, herm_tol, trace_tol, eig_tol)


def validate_density(rho: np.ndarray, herm_tol: float = 1e-10, trace_tol: float = 1e-9,
                     eig_tol: float = 1e-9) -> None:
    """Raise ``ValueError`` if ``rho`` is not a valid density matrix."""
    rho = np.asarray(rho)
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > herm_tol:
        raise ValueError(f"not Hermitian: max deviation {herm_err:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr:.12f} differs from 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -eig_tol:
        raise ValueError(f"negative eigenvalue {lam:.3e}")


def tensor(*ops):
    """Kronecker product of operators (or density matrices); dims concatenate."""
    if len(ops) == 1 and isinstance(ops[0], (list, tuple)):
        ops = tuple(ops[0])
    if not ops:
        raise ValueError("tensor needs at least one operand")
    data = reduce(np.kron, [o.data for o in ops])
    dims = tuple(d for o in ops for d in o.dims)
    kind = DensityMatrix if all(isinstance(o, DensityMatrix) for o in ops) else Operator
    if kind is Operator:
        return Operator(data, dims, all(getattr(o, "hermitian", False) for o in ops))
    return DensityMatrix(data, dims)


def partial_trace(rho: DensityMatrix | Operator, keep: Iterable[int]):
    """Trace out every subsystem not listed in ``keep``."""
    dims = rho.dims
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise IndexError(f"subsystem index out of range for dims {dims}")
    n = len(dims)
    t = rho.data.reshape(dims + dims)
    # contract traced-out subsystems pairwise
    drop = [i for i in range(n) if i not in keep]
    for shift, i in enumerate(drop):
        ax = i - shift
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    kd = tuple(dims[i] for i in keep)
    m = int(np.prod(kd))
    return type(rho)(t.reshape(m, m), kd)


def state_fidelity(rho: DensityMatrix | np.ndarray, psi: np.ndarray) -> float:
    """``<psi|rho|psi>`` for a pure target ``psi``."""
    mat = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != mat.shape[0]:
        raise DimensionError(f"state of size {psi.size} does not match rho of size {mat.shape[0]}")
    psi = psi / np.linalg.norm(psi)
    val = np.real(psi.conj() @ mat @ psi)
    return float(min(1.0, max(0.0, val)))


def destroy(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def number(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def basis(n: int, k: int) -> np.ndarray:
    if not 0 <= k < n:
        raise IndexError(f"level {k} outside dimension {n}")
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


def projector(n: int, k: int) -> np.ndarray:
    p = np.zeros((n, n), dtype=complex)
    p[k, k] = 1.0
    return p


def embed(op: np.ndarray, index: int, dims: Sequence[int]) -> np.ndarray:
    """Place a single-subsystem operator at position ``index`` of ``dims``."""
    mats = [np.eye(d, dtype=complex) for d in dims]
    mats[index] = np.asarray(op, dtype=complex)
    return reduce(np.kron, mats)


def level_index(label: str) -> int:
    label = LOGICAL_ALIASES.get(label, label)
    try:
        return LEVEL_NAMES[label]
    except KeyError:
        raise ValueError(f"unknown level name {label!r}") from None


def parse_state_label(label: str | Sequence[str], dims: Sequence[int]) -> tuple[int, ...]:
    """Turn ``"eg"``, ``"1_Lg"`` or ``["f", "g"]`` into per-subsystem level indices."""
    parts = re.findall(r"[01]_?L|[gefh]", label) if isinstance(label, str) else list(label)
    if len(parts) != len(dims):
        raise ValueError(f"label {label!r} has {len(parts)} parts, expected {len(dims)}")
    idx = tuple(level_index(p) for p in parts)
    for i, d in zip(idx, dims):
        if i >= d:
            raise ValueError(f"level {i} of label {label!r} exceeds dimension {d}")
    return idx


def product_ket(levels: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    return reduce(np.kron, [basis(d, k) for k, d in zip(levels, dims)])


def flat_index(levels: Sequence[int], dims: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(levels), tuple(dims)))


def unitary_from_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    return expm(-1j * t * np.asarray(h))
