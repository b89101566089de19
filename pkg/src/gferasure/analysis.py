"""Exponential and RB fits, the per-cycle error budget, Clifford error composition and readout correction."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

PHYSICAL_PER_CLIFFORD = 45 / 24


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitResult:
    time_constant: float
    amplitude: float
    offset: float
    time_constant_err: float
    amplitude_err: float
    offset_err: float

    def __post_init__(self):
        if not self.time_constant > 0:
            raise FitError(f"fitted time constant {self.time_constant} is not positive")


def fit_exponential(t, y, offset: float | None = None, sigma=None) -> FitResult:
    """Least-squares fit of A exp(-t/T) + B; pass ``offset`` to hold B fixed."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size != y.size:
        raise ValueError("t and y must have the same length")
    if t.size < 4:
        raise ValueError(f"need at least 4 points, got {t.size}")
    if np.ptp(y) == 0:
        raise ValueError("y is constant; no decay to fit")
    # seed T from a log-spaced scan where A (and B) follow by linear least squares
    span = max(t[-1] - t[0], 1e-12)
    best = None
    for tau in span * np.logspace(-2, 3, 200):
        e = np.exp(-t / tau)
        cols = np.column_stack([e, np.ones_like(e)]) if offset is None else e[:, None]
        rhs = y if offset is None else y - offset
        coef, *_ = np.linalg.lstsq(cols, rhs, rcond=None)
        cost = np.sum((cols @ coef - rhs) ** 2)
        if best is None or cost < best[0]:
            best = (cost, tau, coef)
    _, tau0, coef = best
    if offset is None:
        f = lambda x, a, tau, b: a * np.exp(-x / tau) + b
        p0 = [coef[0], tau0, coef[1]]
    else:
        f = lambda x, a, tau: a * np.exp(-x / tau) + offset
        p0 = [coef[0], tau0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", OptimizeWarning)
            popt, pcov = curve_fit(f, t, y, p0=p0, sigma=sigma, maxfev=20000)
    except (RuntimeError, OptimizeWarning) as exc:
        resid = y - f(t, *p0)
        raise FitError(f"exponential fit did not converge ({exc}); rms residual at start {np.sqrt(np.mean(resid**2)):.3g}") from None
    err = np.sqrt(np.clip(np.diag(pcov), 0, None)) if np.all(np.isfinite(pcov)) else np.full(len(popt), np.nan)
    if offset is None:
        return FitResult(float(popt[1]), float(popt[0]), float(popt[2]), float(err[1]), float(err[0]), float(err[2]))
    return FitResult(float(popt[1]), float(popt[0]), float(offset), float(err[1]), float(err[0]), 0.0)


def error_per_cycle_from_lifetime(T: float, t_cycle: float, convention: str = "polarization") -> float:
    """Per-cycle logical error implied by a lifetime T.

    The polarization convention p = t_cycle / (2T) treats T as the decay
    constant of <Z>; the population convention p = t_cycle / T treats it as
    that of the surviving population.
    """
    if not T > t_cycle:
        raise ValueError(f"lifetime {T} must exceed the cycle time {t_cycle}")
    if convention == "polarization":
        return t_cycle / (2.0 * T)
    if convention == "population":
        return t_cycle / T
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class BudgetInput:
    t_cycle: float = 3.52
    t1_ge: float = 52.0
    t1_ef: float = 26.0
    t1_eg: float | None = None
    p_fn_0L: float = 0.039  # P(0_L g | e g)
    p_fn_1L: float = 0.0012  # P(1_L g | e g)
    p_fn_e: float = 0.0328  # P(e g | e g)
    gate_error_per_pulse: float = 2.34e-4
    pulses_per_cycle: int = 4

    def __post_init__(self):
        for name in ("p_fn_0L", "p_fn_1L", "p_fn_e"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("t_cycle", "t1_ge", "t1_ef"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


BUDGET_ROWS = ("leakage", "cascaded", "fn_0L", "fn_1L", "fn_e", "gate")


@dataclass(frozen=True)
class BudgetTable:
    eps_l: float
    plus_z: dict[str, float]
    minus_z: dict[str, float]

    @property
    def total_plus(self) -> float:
        return sum(v for k, v in self.plus_z.items() if k != "leakage")

    @property
    def total_minus(self) -> float:
        return sum(v for k, v in self.minus_z.items() if k != "leakage")

    @property
    def average(self) -> float:
        return 0.5 * (self.total_plus + self.total_minus)

    def rows(self) -> list[tuple[str, float, float]]:
        out = [(k, self.plus_z[k], self.minus_z[k]) for k in BUDGET_ROWS]
        out.append(("total", self.total_plus, self.total_minus))
        return out

    def to_text(self) -> str:
        lines = [f"{'term':<10}{'+Z':>12}{'-Z':>12}"]
        lines += [f"{k:<10}{p:>12.3e}{m:>12.3e}" for k, p, m in self.rows()]
        lines.append(f"{'average':<10}{self.average:>12.3e}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["term", "plus_z", "minus_z"])
        for k, p, m in self.rows():
            w.writerow([k, repr(p), repr(m)])
        w.writerow(["average", repr(self.average), repr(self.average)])
        return buf.getvalue()


def error_budget(b: BudgetInput) -> BudgetTable:
    """Per-cycle bit-flip error terms for |+Z> and |-Z>; leakage itself is listed but not summed."""
    t1_eg = b.t1_ge if b.t1_eg is None else b.t1_eg
    eps = 1.0 - np.exp(-b.t_cycle / (2.0 * b.t1_ef))
    casc = b.t_cycle**2 / (8.0 * b.t1_ef * b.t1_ge)
    gate = b.pulses_per_cycle * b.gate_error_per_pulse
    plus = {"leakage": eps, "cascaded": casc, "fn_0L": 2.0 * eps * b.p_fn_0L / 3.0, "fn_1L": 0.0,
            "fn_e": eps * b.p_fn_e * (1.0 - np.exp(-b.t_cycle / t1_eg)) / 2.0, "gate": gate}
    minus = {"leakage": eps, "cascaded": casc, "fn_0L": 0.0, "fn_1L": eps * b.p_fn_1L, "fn_e": 0.0,
             "gate": gate}
    return BudgetTable(float(eps), {k: float(v) for k, v in plus.items()}, {k: float(v) for k, v in minus.items()})


def clifford_error_compose(eps_pi: float, eps_id: float, eps_pi2: float) -> float:
    """Error per Clifford from the 8 pi, 1 identity and 36 pi/2 gates of the 24-element table."""
    if min(eps_pi, eps_id, eps_pi2) < 0:
        raise ValueError("gate errors must be non-negative")
    return (8.0 * eps_pi + eps_id + 36.0 * eps_pi2) / 24.0


@dataclass(frozen=True)
class RBFit:
    p: float
    p_err: float
    amplitude: float
    offset: float
    error_per_clifford: float
    error_per_clifford_err: float

    @property
    def physical_error(self) -> float:
        return self.error_per_clifford / PHYSICAL_PER_CLIFFORD


def rb_fit(lengths, probs, offset: float | None = 0.5, sigma=None) -> RBFit:
    """Fit A p^m + B and return r = (1 - p)/2; B is fixed at 1/2 unless ``offset`` is None."""
    m = np.asarray(lengths, dtype=float)
    y = np.asarray(probs, dtype=float)
    if m.size < 3:
        raise ValueError(f"need at least 3 lengths, got {m.size}")
    if offset is None:
        f = lambda x, a, p, b: a * p**x + b
        p0 = [y[0] - y[-1] if y[0] != y[-1] else 0.5, 0.99, y[-1]]
        bounds = ([-np.inf, 0.0, -np.inf], [np.inf, 1.0, np.inf])
    else:
        f = lambda x, a, p: a * p**x + offset
        p0 = [max(y[0] - offset, 1e-3), 0.99]
        bounds = ([-np.inf, 0.0], [np.inf, 1.0])
    try:
        popt, pcov = curve_fit(f, m, y, p0=p0, sigma=sigma, bounds=bounds, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"RB fit did not converge: {exc}") from None
    perr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    p = float(popt[1])
    b = float(popt[2]) if offset is None else float(offset)
    return RBFit(p, float(perr[1]), float(popt[0]), b, (1 - p) / 2, float(perr[1]) / 2)


@dataclass(frozen=True)
class LeakageRBFit:
    """Leakage-aware RB: depolarising decay p, leakage rate L1 and seepage rate L2 per Clifford."""

    p: float
    p_err: float
    lambda1: float
    leakage: float
    leakage_err: float
    seepage: float
    error_per_clifford: float
    error_per_clifford_err: float

    @property
    def physical_error(self) -> float:
        return self.error_per_clifford / PHYSICAL_PER_CLIFFORD


def leakage_rb_fit(lengths, polarity_difference, code_population) -> LeakageRBFit:
    """Qubit RB with leakage from two curves of the same Clifford words.

    ``code_population`` is the mean population left in the code space and
    follows A + B lambda1^m, giving L1 = (1 - A)(1 - lambda1) and
    L2 = A (1 - lambda1). ``polarity_difference`` is P(0_L) for words that
    recover to |0_L> minus P(0_L) for words that recover to |1_L>; leaked
    and seeped population cancels in it, leaving C p^m. The average
    infidelity per Clifford is ((1 - p) + L1) / 2.
    """
    m = np.asarray(lengths, dtype=float)
    d = np.asarray(polarity_difference, dtype=float)
    pc = np.asarray(code_population, dtype=float)
    if m.size < 4:
        raise ValueError(f"need at least 4 lengths, got {m.size}")
    try:
        (c, p), cov_p = curve_fit(lambda x, c, p: c * p**x, m, d, p0=[max(d[0], 1e-3), 0.99],
                                  bounds=([0, 0], [np.inf, 1]), maxfev=20000)
        (a, b, lam), cov_l = curve_fit(lambda x, a, b, l: a + b * l**x, m, pc, p0=[pc[-1], pc[0] - pc[-1], 0.99],
                                       bounds=([0, -np.inf, 0], [1, np.inf, 1]), maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"leakage RB fit did not converge: {exc}") from None
    p_err = float(np.sqrt(max(cov_p[1, 1], 0)))
    # first-order error propagation of L1 = (1 - a)(1 - lam)
    jac = np.array([-(1 - lam), 0.0, -(1 - a)])
    l1_err = float(np.sqrt(max(jac @ cov_l @ jac, 0)))
    l1 = (1 - a) * (1 - lam)
    r = ((1 - p) + l1) / 2
    return LeakageRBFit(float(p), p_err, float(lam), float(l1), l1_err, float(a * (1 - lam)), float(r),
                        float(np.hypot(p_err, l1_err) / 2))


@dataclass(frozen=True)
class ReadoutCorrection:
    populations: np.ndarray
    residual: float  # most negative pre-clip population (0 if none)
    raw: np.ndarray


def apply_readout(populations, m: np.ndarray) -> np.ndarray:
    """Assignment probabilities for true ``populations`` (row vector) under row-stochastic M."""
    return np.asarray(populations, dtype=float) @ np.asarray(m, dtype=float)


def correct_readout(counts, m: np.ndarray) -> ReadoutCorrection:
    """Solve measured = populations @ M, then clip negatives and renormalise."""
    c = np.asarray(counts, dtype=float)
    m = np.asarray(m, dtype=float)
    if abs(np.linalg.det(m)) < 1e-12:
        raise np.linalg.LinAlgError("assignment matrix is singular")
    meas = c / c.sum()
    raw = np.linalg.solve(m.T, meas)
    resid = float(min(raw.min(), 0.0))
    pops = np.clip(raw, 0, None)
    return ReadoutCorrection(pops / pops.sum(), resid, raw)
