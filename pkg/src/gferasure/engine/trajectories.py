"""Stochastic unravelling of channel sequences, vectorised over shots.

A protocol is compiled into a :class:`Program`, a flat list of steps that
each consume a fixed number of uniforms per shot:

* ``KrausStep``: a CPTP map given by Kraus operators, one jump drawn per shot
* ``CheckStep``: the erasure instrument, records a flag
* ``MeasureStep``: assigns a copy of the state (the trajectory is not collapsed)
* ``SnapshotStep``: stores the current state vector

Every shot owns a private uniform stream derived from ``(seed, shot)``, so
results do not depend on how shots are batched or distributed over
processes. Row-wise arithmetic avoids BLAS kernels whose rounding could
depend on batch size.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from ..qsys import DensityMatrix
from .instruments import AssignmentModel, ErasureInstrument
from .master import EvolutionSpec, propagator, superop_to_kraus

CHUNK = 2048


@dataclass(frozen=True)
class KrausStep:
    ops: np.ndarray  # (m, d, d)
    draws: int = 1


@dataclass(frozen=True)
class CheckStep:
    flag_ops: np.ndarray
    clean_ops: np.ndarray
    draws: int = 1

    @classmethod
    def from_instrument(cls, inst: ErasureInstrument, levels: int) -> "CheckStep":
        ks = inst.kraus(levels)
        empty = np.zeros((0, levels, levels), dtype=complex)
        stack = lambda l: np.array(l) if l else empty
        return cls(stack(ks[True]), stack(ks[False]))


@dataclass(frozen=True)
class MeasureStep:
    model: AssignmentModel
    rotation: np.ndarray | None = None  # applied to the copy only, e.g. a basis change
    draws: int = 3


@dataclass(frozen=True)
class SnapshotStep:
    draws: int = 0


@dataclass
class Program:
    dim: int
    steps: list = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return sum(s.draws for s in self.steps)

    def add(self, step) -> "Program":
        self.steps.append(step)
        return self

    def count(self, kind) -> int:
        return sum(isinstance(s, kind) for s in self.steps)


@dataclass
class ProgramResult:
    flags: np.ndarray  # (n, n_checks) bool
    assignments: np.ndarray  # (n, n_meas) int
    snapshots: np.ndarray  # (n, n_snap, d) complex
    final: np.ndarray  # (n, d)

    @staticmethod
    def concat(parts: Sequence["ProgramResult"]) -> "ProgramResult":
        return ProgramResult(*(np.concatenate([getattr(p, f) for p in parts])
                               for f in ("flags", "assignments", "snapshots", "final")))


def shot_uniforms(seed: int, start: int, stop: int, n_draws: int) -> np.ndarray:
    """Uniforms for shots [start, stop), one independent stream per shot index."""
    out = np.empty((stop - start, n_draws))
    for i, shot in enumerate(range(start, stop)):
        out[i] = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shot,))).random(n_draws)
    return out


def _apply_ops(ops: np.ndarray, states: np.ndarray) -> np.ndarray:
    # (n, m, d) without BLAS so that each row is computed identically in any batch
    return (ops[None, :, :, :] * states[:, None, None, :]).sum(axis=-1)


def _select(amps: np.ndarray, u: np.ndarray):
    probs = (amps.real**2 + amps.imag**2).sum(axis=-1)
    cum = np.cumsum(probs, axis=1)
    idx = (u[:, None] * cum[:, -1:] >= cum).sum(axis=1)
    idx = np.minimum(idx, amps.shape[1] - 1)
    chosen = amps[np.arange(len(idx)), idx]
    nrm = np.sqrt((chosen.real**2 + chosen.imag**2).sum(axis=-1))
    return chosen / nrm[:, None], idx


def sample_initial(rho0: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Draw pure states from the eigen-ensemble of ``rho0`` using one uniform per shot."""
    rho0 = np.asarray(rho0, dtype=complex)
    w, v = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    w = np.clip(w, 0, None)
    cum = np.cumsum(w / w.sum())
    idx = np.minimum((u[:, None] >= cum).sum(axis=1), len(w) - 1)
    return v[:, idx].T.copy()


def execute(program: Program, rho0: np.ndarray, uniforms: np.ndarray) -> ProgramResult:
    """Run the program on len(uniforms) shots; column 0 of ``uniforms`` picks the initial state."""
    n = uniforms.shape[0]
    states = sample_initial(rho0, uniforms[:, 0])
    col = 1
    flags, assigns, snaps = [], [], []
    for step in program.steps:
        u = uniforms[:, col:col + step.draws]
        col += step.draws
        if isinstance(step, KrausStep):
            states, _ = _select(_apply_ops(step.ops, states), u[:, 0])
        elif isinstance(step, CheckStep):
            ops = np.concatenate([step.clean_ops, step.flag_ops])
            states, idx = _select(_apply_ops(ops, states), u[:, 0])
            flags.append(idx >= len(step.clean_ops))
        elif isinstance(step, MeasureStep):
            meas = states if step.rotation is None else _apply_ops(step.rotation[None], states)[:, 0]
            pops = meas.real**2 + meas.imag**2
            cum = np.cumsum(pops, axis=1)
            level = np.minimum((u[:, 0:1] * cum[:, -1:] >= cum).sum(axis=1), states.shape[1] - 1)
            assigns.append(step.model.assign(level, u[:, 1:3]))
        elif isinstance(step, SnapshotStep):
            snaps.append(states.copy())
        else:
            raise TypeError(f"unknown program step {type(step).__name__}")
    d = states.shape[1]
    return ProgramResult(
        np.array(flags, dtype=bool).T.reshape(n, len(flags)),
        np.array(assigns, dtype=int).T.reshape(n, len(assigns)),
        np.array(snaps).transpose(1, 0, 2).reshape(n, len(snaps), d) if snaps else np.zeros((n, 0, d), complex),
        states,
    )


def _run_chunk(program: Program, rho0: np.ndarray, seed: int, bounds: tuple[int, int]) -> ProgramResult:
    u = shot_uniforms(seed, bounds[0], bounds[1], 1 + program.n_draws)
    return execute(program, rho0, u)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def run_program(program: Program, rho0, n_shots: int, seed: int, jobs: int = 1) -> ProgramResult:
    """Execute ``n_shots`` trajectories; identical output for any ``jobs``."""
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    rho0 = rho0.data if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    bounds = [(a, min(a + CHUNK, n_shots)) for a in range(0, n_shots, CHUNK)]
    work = partial(_run_chunk, program, rho0, int(seed))
    if jobs <= 1 or len(bounds) == 1:
        parts = [work(b) for b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(bounds))) as pool:
            parts = list(pool.map(work, bounds))
    return ProgramResult.concat(parts)


@dataclass
class TrajectoryResult:
    times: np.ndarray
    states: np.ndarray  # (n_traj, n_times, d)

    def average(self) -> list[np.ndarray]:
        return [np.einsum("ni,nj->ij", s, s.conj()) / len(s) for s in self.states.transpose(1, 0, 2)]

    def populations(self) -> np.ndarray:
        """(n_times, d) average populations."""
        return (np.abs(self.states) ** 2).mean(axis=0)


def run_trajectories(spec: EvolutionSpec, rho0, n_traj: int, seed: int, t_span: float,
                     n_steps: int = 50, jobs: int = 1) -> TrajectoryResult:
    """Quantum-jump unravelling of ``spec`` recorded at ``n_steps`` equal intervals.

    Each interval's exact channel is decomposed into canonical Kraus
    operators and one operator is drawn per trajectory, so the ensemble
    average reproduces the master equation at every recorded time.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    dt = t_span / n_steps
    prog = Program(spec.dim).add(SnapshotStep())
    cache = None
    for k in range(n_steps):
        if spec.static and cache is not None:
            ops = cache
        else:
            ops = np.array(superop_to_kraus(propagator(spec, dt, k * dt)))
            cache = ops
        prog.add(KrausStep(ops)).add(SnapshotStep())
    res = run_program(prog, rho0, n_traj, seed, jobs)
    return TrajectoryResult(np.linspace(0.0, t_span, n_steps + 1), res.snapshots)
