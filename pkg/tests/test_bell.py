import numpy as np
import pytest

from gferasure.engine.instruments import ErasureInstrument
from gferasure.noise import NoiseParams
from gferasure.protocols.bell import BellNoise, CRParams, TARGETS, run_parity_bell
from gferasure.qsys import state_fidelity


def _exact_fid(res, label):
    return state_fidelity(res.exact_states[label], TARGETS[res.targets[label]])


class TestNoiseFree:
    def test_heralds_perfect_bell_states(self):
        res = run_parity_bell(CRParams(), None, n_shots=None)
        assert res.herald_probabilities["g"] == pytest.approx(0.5, abs=1e-9)
        assert res.herald_probabilities["e"] == pytest.approx(0.5, abs=1e-9)
        for label in "ge":
            assert _exact_fid(res, label) == pytest.approx(1, abs=1e-9)

    def test_plus_phases(self):
        res = run_parity_bell(CRParams(phases="plus"), None, n_shots=None)
        assert res.targets["g"] == "00+i11"
        assert _exact_fid(res, "g") == pytest.approx(1, abs=1e-9)

    def test_control_state_is_a_relabelling(self):
        a = run_parity_bell(CRParams(control_state="0L"), None, n_shots=None)
        b = run_parity_bell(CRParams(control_state="1L"), None, n_shots=None)
        for label in "ge":
            assert np.allclose(a.exact_states[label].data, b.exact_states[label].data, atol=1e-9)


class TestNoise:
    def test_herald_error(self):
        bn = BellNoise(NoiseParams(30, 15, 50), NoiseParams(30, 15, 50), ancilla_t1=17.0, readout_len=1.4)
        assert bn.herald_error == pytest.approx(1 - np.exp(-0.7 / 17))

    def test_invalid_ancilla(self):
        with pytest.raises(ValueError):
            BellNoise(NoiseParams(30, 15, 50), NoiseParams(30, 15, 50), ancilla_t1=10.0, ancilla_t2e=25.0)

    def test_ideal_check_equals_code_restriction(self):
        # an ideal instant check discards exactly the leaked share that the code-block restriction drops
        q = NoiseParams(20.0, 10.0, 60.0)
        bn = BellNoise(q, q)
        plain = run_parity_bell(CRParams(swap_time=0.0), bn, n_shots=None)
        checked = run_parity_bell(CRParams(swap_time=0.0), bn, with_erasure=True, n_shots=None,
                                  instrument=ErasureInstrument.ideal())
        for label in "ge":
            assert np.allclose(checked.exact_states[label].data, plain.exact_states[label].data, atol=1e-9)
            assert checked.kept_fraction[label] == pytest.approx(plain.kept_fraction[label], abs=1e-9)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            CRParams(phases="other")
