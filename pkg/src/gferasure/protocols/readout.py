"""Readout calibration: sampled confusion matrices and erasure-check flag rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine.instruments import M_Q1, M_Q2, AssignmentModel, ErasureInstrument
from ..engine.trajectories import CheckStep, MeasureStep, Program, run_program

MATRICES = {"Q1": M_Q1, "Q2": M_Q2}


@dataclass(frozen=True)
class ConfusionEstimate:
    counts: np.ndarray  # (3, 3) prepared x assigned
    target: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.counts / self.counts.sum(axis=1, keepdims=True)

    @property
    def sigma(self) -> np.ndarray:
        n = self.counts.sum(axis=1, keepdims=True)
        p = self.target
        return np.sqrt(p * (1 - p) / n)

    def z_scores(self) -> np.ndarray:
        s = self.sigma
        return np.where(s > 0, (self.matrix - self.target) / np.where(s > 0, s, 1), 0.0)


def readout_model(matrix: str = "Q1", mode: str = "gaussian") -> AssignmentModel:
    m = MATRICES[matrix]
    if mode == "gaussian":
        return AssignmentModel.gaussian_from_matrix(m)
    if mode == "matrix":
        return AssignmentModel(matrix=m)
    raise ValueError(f"mode must be matrix or gaussian, got {mode!r}")


def sample_confusion(model: AssignmentModel, n_shots: int, seed: int = 0, jobs: int = 1) -> ConfusionEstimate:
    """Prepare g, e and f ``n_shots`` times each and tally the assignments."""
    prog = Program(3).add(MeasureStep(model))
    counts = np.zeros((3, 3))
    for k in range(3):
        rho = np.zeros((3, 3), complex)
        rho[k, k] = 1
        res = run_program(prog, rho, n_shots, seed * 3 + k, jobs)
        counts[k] = np.bincount(res.assignments[:, 0], minlength=3)
    return ConfusionEstimate(counts, model.induced_matrix())


@dataclass(frozen=True)
class FlagRates:
    n_shots: int
    false_pos_0L: float  # flagged after preparing |0_L> (thermal |e> included)
    false_pos_1L: float
    false_neg: float  # unflagged after preparing |e>
    expected: tuple[float, float, float]

    def z_scores(self) -> tuple[float, float, float]:
        got = (self.false_pos_0L, self.false_pos_1L, self.false_neg)
        return tuple((g - p) / np.sqrt(p * (1 - p) / self.n_shots) if 0 < p < 1 else 0.0
                     for g, p in zip(got, self.expected))


def expected_flag_rates(inst: ErasureInstrument, p_thermal: float = 0.0) -> tuple[float, float, float]:
    fn = inst.fn_total
    fp0 = (1 - p_thermal) * inst.p_false_pos_0L + p_thermal * (1 - fn)
    fp1 = (1 - p_thermal) * inst.p_false_pos_1L + p_thermal * (1 - fn)
    return fp0, fp1, fn


def sample_flag_rates(inst: ErasureInstrument, p_thermal: float, n_shots: int, seed: int = 0,
                      jobs: int = 1) -> FlagRates:
    """One erasure check on |0_L>, |1_L> (each with thermal |e>) and on |e>."""
    prog = Program(3).add(CheckStep.from_instrument(inst, 3))
    rates = []
    for k, (level, th) in enumerate(((0, p_thermal), (2, p_thermal), (1, 0.0))):
        rho = np.zeros((3, 3), complex)
        rho[level, level] = 1 - th
        rho[1, 1] += th
        flags = run_program(prog, rho, n_shots, seed * 3 + k, jobs).flags[:, 0]
        rates.append(float(flags.mean()))
    return FlagRates(n_shots, rates[0], rates[1], 1.0 - rates[2], expected_flag_rates(inst, p_thermal))
