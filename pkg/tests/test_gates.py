import numpy as np
import pytest

from gferasure.engine.master import apply_superop, unitary_superop
from gferasure.noise import NoiseParams
from gferasure.protocols.gates import (GateErrorBreakdown, GateLibrary, cardinal_breakdown, channel_collapses,
                                       embed_logical, gate_error_table, post_selected)
from gferasure.pulses import GATE_ANGLES, ideal_logical

NOISE = NoiseParams(52.0, 26.0, 440.0)


class TestBreakdown:
    def test_perfect_gate_has_no_error(self):
        u = embed_logical(ideal_logical(np.pi, 0.0), 4)
        b = cardinal_breakdown(unitary_superop(u), ideal_logical(np.pi, 0.0), 4)
        assert b.total == pytest.approx(0, abs=1e-12)

    def test_post_selection_only_removes_e(self):
        b = GateErrorBreakdown(1e-3, 2e-5, 1e-4, 1e-3 + 2e-5 + 1e-4)
        ps = post_selected(b, 0.17)
        assert ps.leak_e == pytest.approx(1e-3 * 0.17 * 2 / 3)
        assert ps.leak_h == b.leak_h and ps.pauli == b.pauli
        assert ps.total == pytest.approx(ps.leak_e + ps.leak_h + ps.pauli)

    def test_unknown_channel(self):
        with pytest.raises(ValueError):
            channel_collapses(NOISE, "bogus", 4)


class TestLibrary:
    def test_ideal_library_is_exact(self):
        lib = GateLibrary(NOISE, ideal=True)
        for name in GATE_ANGLES:
            rho = np.diag([1, 0, 0, 0]).astype(complex)
            u = embed_logical(ideal_logical(*GATE_ANGLES[name]), 4)
            assert np.allclose(apply_superop(lib.superop(name), rho), u @ rho @ u.conj().T)

    def test_trace_preserving(self):
        lib = GateLibrary(NOISE)
        s = lib.superop("Y")
        for k in range(4):
            rho = np.zeros((4, 4), complex)
            rho[k, k] = 1
            assert np.trace(apply_superop(s, rho)) == pytest.approx(1, abs=1e-9)


class TestTable:
    @pytest.fixture(scope="class")
    @staticmethod
    def table():
        return gate_error_table("X", NOISE)

    def test_noise_only_adds_error(self, table):
        assert table["none"].total < table["dephasing"].total < table["all"].total
        assert table["none"].total < table["decay"].total < table["all"].total

    def test_decay_dominated_by_e_leakage(self, table):
        assert table["decay"].leak_e > table["decay"].pauli

    def test_post_selection_helps(self, table):
        assert table["all_ps"].total < table["all"].total
