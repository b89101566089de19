import numpy as np
import pytest

from gferasure.engine.instruments import ErasureInstrument
from gferasure.protocols.readout import (MATRICES, expected_flag_rates, readout_model, sample_confusion,
                                         sample_flag_rates)

BOUND = 3.0


class TestConfusion:
    @pytest.mark.parametrize("name", ["Q1", "Q2"])
    @pytest.mark.parametrize("mode", ["matrix", "gaussian"])
    def test_reproduces_matrix(self, name, mode):
        est = sample_confusion(readout_model(name, mode), 20000, seed=3)
        assert np.allclose(est.target, MATRICES[name], atol=1e-6)
        assert np.abs(est.z_scores()).max() < BOUND

    def test_jobs_do_not_change_counts(self):
        m = readout_model("Q1", "matrix")
        assert np.array_equal(sample_confusion(m, 3000, 1, jobs=1).counts, sample_confusion(m, 3000, 1, jobs=3).counts)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            readout_model("Q1", "other")


class TestFlags:
    def test_thermal_adds_false_positives(self):
        inst = ErasureInstrument.measured()
        fp0, fp1, fn = expected_flag_rates(inst, 0.0)
        fp0t, fp1t, fnt = expected_flag_rates(inst, 0.01)
        assert fp0t > fp0 and fp1t > fp1 and fnt == fn

    def test_sampled_rates(self):
        rates = sample_flag_rates(ErasureInstrument.measured(), 0.007, 20000, seed=2)
        assert max(abs(z) for z in rates.z_scores()) < BOUND
