"""Lindblad master-equation integration on dense superoperators.

Vectorisation is row-major: vec(rho) = rho.reshape(-1), so that
vec(A rho B) = kron(A, B.T) vec(rho).

Time-dependent problems are stepped with a fourth-order commutator-free
Magnus exponential (two exponentials per step at the Gauss nodes), which
is exact for piecewise-constant generators and keeps every step CPTP to
rounding. A classical RK4 stepper is kept for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from ..noise import CollapseOperator
from ..qsys import DensityMatrix

_C1, _C2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
_A1, _A2 = (3 - 2 * np.sqrt(3)) / 12, (3 + 2 * np.sqrt(3)) / 12


class IntegrationError(RuntimeError):
    pass


Envelope = Callable[[float], complex]


@dataclass
class EvolutionSpec:
    """H(t) = h0 + sum_k (f_k(t) A_k + conj(f_k(t)) A_k^dag) / 2, all in rad/us."""

    h0: np.ndarray
    drives: list[tuple[np.ndarray, Envelope]] = field(default_factory=list)
    collapses: list[CollapseOperator] = field(default_factory=list)
    dt: float = 0.0005
    dims: tuple[int, ...] = ()

    def __post_init__(self):
        self.h0 = np.asarray(self.h0, dtype=complex)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.dims:
            self.dims = (self.h0.shape[0],)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def static(self) -> bool:
        return not self.drives

    def hamiltonian(self, t: float) -> np.ndarray:
        h = self.h0.copy()
        for op, f in self.drives:
            v = f(t)
            if v != 0:
                h += 0.5 * (v * op + np.conj(v) * op.conj().T)
        return h


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator(collapses: Sequence[CollapseOperator], n: int) -> np.ndarray:
    eye = np.eye(n)
    out = np.zeros((n * n, n * n), dtype=complex)
    for c in collapses:
        if c.rate == 0:
            continue
        l = c.operator
        ldl = l.conj().T @ l
        out += c.rate * (np.kron(l, l.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T))
    return out


def liouvillian(h: np.ndarray, collapses: Sequence[CollapseOperator] = ()) -> np.ndarray:
    return hamiltonian_superop(h) + dissipator(collapses, h.shape[0])


def apply_superop(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    return (s @ rho.reshape(-1)).reshape(n, n)


def _check(m: np.ndarray, t: float):
    if not np.all(np.isfinite(m)):
        raise IntegrationError(f"non-finite values encountered at t = {t:.6g} us")


def propagator(spec: EvolutionSpec, duration: float, t0: float = 0.0,
               unitary: bool = False) -> np.ndarray:
    """Superoperator (or unitary, if ``unitary``) mapping the state at t0 to t0 + duration."""
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got {duration}")
    n = spec.dim
    gen = (lambda h: -1j * h) if unitary else (lambda h: liouvillian(h, spec.collapses))
    size = n if unitary else n * n
    if duration == 0:
        return np.eye(size, dtype=complex)
    if spec.static:
        out = expm(gen(spec.h0) * duration)
        _check(out, t0 + duration)
        return out
    nstep = max(1, int(np.ceil(duration / spec.dt - 1e-9)))
    h = duration / nstep
    diss = None if unitary else dissipator(spec.collapses, n)
    out = np.eye(size, dtype=complex)
    for k in range(nstep):
        t = t0 + k * h
        h1 = spec.hamiltonian(t + _C1 * h)
        h2 = spec.hamiltonian(t + _C2 * h)
        if unitary:
            g1, g2 = -1j * h1, -1j * h2
        else:
            g1 = hamiltonian_superop(h1) + diss
            g2 = hamiltonian_superop(h2) + diss
        out = expm(h * (_A1 * g1 + _A2 * g2)) @ expm(h * (_A2 * g1 + _A1 * g2)) @ out
        _check(out, t + h)
    return out


def _rk4(spec: EvolutionSpec, rho: np.ndarray, t0: float, duration: float) -> np.ndarray:
    n = spec.dim
    diss = dissipator(spec.collapses, n)
    f = lambda t, v: (hamiltonian_superop(spec.hamiltonian(t)) + diss) @ v
    nstep = max(1, int(np.ceil(duration / spec.dt - 1e-9)))
    h = duration / nstep
    v = rho.reshape(-1).astype(complex)
    for k in range(nstep):
        t = t0 + k * h
        k1 = f(t, v)
        k2 = f(t + h / 2, v + h / 2 * k1)
        k3 = f(t + h / 2, v + h / 2 * k2)
        k4 = f(t + h, v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        _check(v, t + h)
    return v.reshape(n, n)


@dataclass
class MasterResult:
    times: np.ndarray
    states: list[DensityMatrix]

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]

    def expect(self, op: np.ndarray) -> np.ndarray:
        return np.array([np.real(np.trace(op @ s.data)) for s in self.states])


def evolve_master(spec: EvolutionSpec, rho0: DensityMatrix | np.ndarray,
                  t_span: float | tuple[float, float], times: Sequence[float] | None = None,
                  method: str = "magnus4") -> MasterResult:
    """Integrate the Lindblad equation and return states at ``times`` (default: endpoints)."""
    if isinstance(t_span, (int, float)):
        t_span = (0.0, float(t_span))
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    rho = rho0.data if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    dims = rho0.dims if isinstance(rho0, DensityMatrix) else spec.dims
    grid = np.array([t0, t1] if times is None else sorted(times), dtype=float)
    if grid[0] < t0 - 1e-12 or grid[-1] > t1 + 1e-12:
        raise ValueError("requested times fall outside t_span")
    out = []
    cur, t = rho.astype(complex), t0
    static_cache: dict[float, np.ndarray] = {}
    for tk in grid:
        dur = tk - t
        if dur > 0:
            if method == "rk4":
                cur = _rk4(spec, cur, t, dur)
            elif spec.static:
                key = round(dur, 12)
                if key not in static_cache:
                    static_cache[key] = propagator(spec, dur, t)
                cur = apply_superop(static_cache[key], cur)
            else:
                cur = apply_superop(propagator(spec, dur, t), cur)
            cur = 0.5 * (cur + cur.conj().T)
        out.append(DensityMatrix(cur.copy(), dims))
        t = tk
    return MasterResult(grid, out)


# --- channel conversions -----------------------------------------------------


def superop_to_choi(s: np.ndarray) -> np.ndarray:
    """Choi matrix J = sum_ij |i><j| (x) E(|i><j|), indexed [(i,a),(j,b)]."""
    n = int(round(np.sqrt(s.shape[0])))
    # s[(a,b),(i,j)] = <a|E(|i><j|)|b>
    t = s.reshape(n, n, n, n)  # a b i j
    return t.transpose(2, 0, 3, 1).reshape(n * n, n * n)


def choi_to_kraus(j: np.ndarray, tol: float = 1e-14) -> list[np.ndarray]:
    n = int(round(np.sqrt(j.shape[0])))
    w, v = np.linalg.eigh(0.5 * (j + j.conj().T))
    ks = []
    for lam, vec in sorted(zip(w, v.T), key=lambda p: -p[0]):
        if lam > tol:
            # vec indexed (i, a); K[a, i]
            ks.append(np.sqrt(lam) * vec.reshape(n, n).T)
    return ks


def superop_to_kraus(s: np.ndarray, tol: float = 1e-14) -> list[np.ndarray]:
    return choi_to_kraus(superop_to_choi(s), tol)


def kraus_to_superop(kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in kraus)


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())
