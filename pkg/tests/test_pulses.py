import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.linalg import expm

from gferasure.pulses import (GateSet, PulseShape, PulseSequence, SequenceItem, calibrate_gf_pi, clifford_inverse,
                              clifford_products, clifford_unitaries, compile_clifford, compile_idle_cycle,
                              compile_spin_locking, compile_xy4_cycle, drag_envelope, envelope_area, gate_counts,
                              same_up_to_phase, word_unitary)
from gferasure.protocols.rb import random_sequence

SX = np.array([[0, 1], [1, 0]], complex)
SY = np.array([[0, -1j], [1j, 0]], complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


class TestEnvelope:
    def test_lifted_edges_are_zero(self):
        s = PulseShape(amplitude=3.0, drag_coeff=0.0)
        assert abs(drag_envelope(s, 0.0)) < 1e-12 and abs(drag_envelope(s, s.duration)) < 1e-12

    def test_area_closed_form(self):
        for lift in (True, False):
            s = PulseShape(amplitude=2.0, lift=lift)
            num, _ = quad(lambda t: drag_envelope(s, t).real, 0, s.duration, epsabs=1e-13)
            assert envelope_area(s) == pytest.approx(num, rel=1e-10)

    def test_drag_quadrature_is_derivative(self):
        s = PulseShape(amplitude=1.0, drag_coeff=0.5, alpha=200.0)
        t, h = 0.03, 1e-6
        dg = (drag_envelope(s, t + h).real - drag_envelope(s, t - h).real) / (2 * h)
        assert drag_envelope(s, t).imag == pytest.approx(0.5 * dg / (2 * np.pi * 200.0), rel=1e-6)

    @pytest.mark.parametrize("kw", [dict(duration=0.0), dict(amplitude=np.inf), dict(kind="square")])
    def test_invariants(self, kw):
        with pytest.raises(ValueError):
            PulseShape(**kw)

    def test_outside_window(self):
        with pytest.raises(ValueError):
            drag_envelope(PulseShape(), 0.1)


class TestSequences:
    def test_xy4_layout(self):
        seq = compile_xy4_cycle(GateSet(), 3.52)
        assert seq.total_duration_ns == 3520
        delays = [i.duration_ns for i in seq.items if i.kind == "delay" and i.blocking]
        assert delays == [375, 750, 750, 750, 375]
        assert [i.gate for i in seq.items if i.kind == "pulse"] == ["X", "Y", "X", "Y"]
        # readout and ring-down run on the ancilla in parallel with the next cycle
        assert [i.kind for i in seq.items if not i.blocking] == ["readout", "delay"]

    def test_check_before(self):
        seq = compile_xy4_cycle(GateSet(check_position="before"), 3.52)
        assert seq.items[0].kind == "erasure_check"

    def test_too_short_cycle(self):
        with pytest.raises(ValueError):
            compile_xy4_cycle(GateSet(), 2.0)

    def test_schedule_text(self):
        text = compile_xy4_cycle().to_text().splitlines()
        assert text[1] == "375 data pulse dur=80 gate=X"
        assert text[-1].startswith("3520 ancilla delay dur=1000")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2700, 8000))
    def test_total_duration_is_cycle(self, ns):
        for seq in (compile_xy4_cycle(GateSet(), ns / 1000), compile_idle_cycle(GateSet(), ns / 1000),
                    compile_spin_locking(1.0, ns / 1000)):
            assert seq.total_duration_ns == ns

    def test_spinlock_zero_rabi_is_idle(self):
        seq = compile_spin_locking(0.0, 4.8)
        assert "lock" not in [i.kind for i in seq.items]

    def test_item_invariants(self):
        with pytest.raises(ValueError):
            SequenceItem("delay", -1)
        with pytest.raises(ValueError):
            SequenceItem("teleport", 10)

    def test_repeat_and_add(self):
        seq = compile_idle_cycle()
        assert (seq + seq).total_duration_ns == seq.repeat(2).total_duration_ns == 7040
        assert PulseSequence().to_text() == ""


class TestClifford:
    def test_group_closure_exhaustive(self):
        table = clifford_products()
        assert table.shape == (24, 24)
        for row in table:
            assert sorted(row) == list(range(24))
        us = clifford_unitaries()
        for i in range(24):
            for j in range(24):
                assert same_up_to_phase(us[table[i, j]], us[j] @ us[i])

    def test_elements_distinct(self):
        us = clifford_unitaries()
        assert not any(same_up_to_phase(us[i], us[j]) for i in range(24) for j in range(i))

    def test_gate_counts(self):
        # 45 physical gates: 8 pi, 1 identity, 36 pi/2
        assert gate_counts() == {"pi": 8, "id": 1, "pi2": 36}

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 60), st.integers(0, 2**32 - 1))
    def test_recovery_restores_ground(self, m, seed):
        seq = random_sequence(m, np.random.default_rng(seed))
        gates = [g for c in seq for g in compile_clifford(c)]
        psi = word_unitary(gates) @ np.array([1, 0], complex)
        assert abs(psi[0]) ** 2 == pytest.approx(1.0, abs=1e-9)

    def test_inverse(self):
        for i in range(24):
            assert clifford_products()[i, clifford_inverse(i)] == 0


def xy4_residual(delta, gate_ns, seq):
    """Rotation angle left after one compiled cycle under a static logical detuning.

    Pulses are ideal pi rotations of width ``gate_ns`` (0: instantaneous at the
    pulse centre); the detuning acts throughout.
    """
    h0 = delta / 2 * SZ
    u = np.eye(2, dtype=complex)
    for it in seq.items:
        if not it.blocking or it.kind == "erasure_check":
            continue
        if it.kind == "delay":
            u = expm(-1j * h0 * it.duration) @ u
        else:
            axis = SX if it.gate == "X" else SY
            if gate_ns == 0:
                half = expm(-1j * h0 * it.duration / 2)
                u = half @ (-1j * axis) @ half @ u
            else:
                tp = gate_ns / 1000
                u = expm(-1j * (h0 + np.pi / (2 * tp) * axis) * tp) @ u
    return 2 * np.arccos(min(1.0, abs(np.trace(u)) / 2))


class TestXY4Decoupling:
    seq = compile_xy4_cycle(GateSet(), 3.52)
    tau = 0.75
    deltas = 2 * np.pi * np.array([0.005, 0.01, 0.02, 0.04])

    def test_ideal_pulses_third_order(self):
        free = self.deltas * 3.32
        res = np.array([xy4_residual(d, 0, self.seq) for d in self.deltas])
        assert np.all(res <= (self.deltas * self.tau) ** 3)
        assert np.all(res < 1e-3 * free)

    def test_finite_pulses_leave_width_limited_residual(self):
        res = np.array([xy4_residual(d, 80, self.seq) for d in self.deltas])
        slope = np.polyfit(np.log(self.deltas), np.log(res), 1)[0]
        # first order cancels; what remains is second order in delta times the pulse width
        assert 1.9 < slope < 2.1
        assert np.all(res < (self.deltas * 0.08) ** 2)


@pytest.mark.slow
class TestCalibration:
    def test_pi_pulse_calibrates(self):
        cal = calibrate_gf_pi()
        assert cal.infidelity < 1e-3
        assert cal.leak_e + cal.leak_h < 1e-3
