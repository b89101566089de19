import numpy as np
import pytest
from scipy import stats

from gferasure.engine.instruments import ErasureInstrument
from gferasure.noise import NoiseParams
from gferasure.protocols.rb import RBConfig, _is_check_point, flip_recovery, random_sequence, run_rb
from gferasure.pulses import clifford_products


class TestConfig:
    def test_pad_time(self):
        assert RBConfig().pad_time == pytest.approx(5.04 - 29 * 1.875 * 0.08 - 0.2)

    @pytest.mark.parametrize("kw", [dict(sequence_lengths=(1, 5)), dict(sequence_lengths=(5, 3, 8)),
                                    dict(cycle_time=1.0), dict(shots_per_length=10)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            RBConfig(**kw)


class TestSequences:
    def test_flip_recovery_targets_one(self, rng):
        seq = random_sequence(10, rng)
        tab = clifford_products()
        acc = 0
        for c in flip_recovery(seq):
            acc = tab[acc, c]
        assert acc == 3  # the X element

    def test_check_points(self):
        pts = [k for k in range(100) if _is_check_point(k, 100, 29)]
        assert pts == [28, 57, 86]


class TestRun:
    small = dict(sequence_lengths=(1, 10, 20, 40), n_randomizations=3, shots_per_length=600, ideal_gates=True)

    def test_noise_free(self):
        res = run_rb(RBConfig(**self.small, instrument=ErasureInstrument.ideal()), None, seed=1)
        assert np.allclose(res.raw, 1.0) and np.allclose(res.post_selected, 1.0)

    def test_deterministic(self):
        noise = NoiseParams(52.0, 26.0, 440.0, 0.007)
        a = run_rb(RBConfig(**self.small), noise, seed=5)
        b = run_rb(RBConfig(**self.small), noise, seed=5)
        assert np.array_equal(a.histograms, b.histograms) and np.array_equal(a.raw_histograms, b.raw_histograms)

    def test_trajectory_matches_density(self):
        noise = NoiseParams(20.0, 10.0, 100.0, 0.01)
        cfg = RBConfig(**self.small)
        res = run_rb(cfg, noise, seed=3, method="trajectory", jobs=2)
        # the same words and expected outcome probabilities are available exactly
        chi2, dof = 0.0, 0
        per = cfg.shots_per_sequence
        for obs, p in ((res.raw_histograms, res.raw_exact_probs), (res.histograms.reshape(*res.histograms.shape[:3], 6),
                                                                   res.exact.reshape(*res.exact.shape[:3], 6))):
            p = p / p.sum(axis=-1, keepdims=True)
            exp = per * p
            ok = exp > 5
            chi2 += np.sum((obs[ok] - exp[ok]) ** 2 / exp[ok])
            # one constraint per multinomial
            dof += ok.sum() - np.prod(obs.shape[:-1])
        assert chi2 < stats.chi2.ppf(stats.norm.cdf(3), dof)

    def test_post_selection_improves(self):
        res = run_rb(RBConfig(sequence_lengths=(1, 50, 100, 200), n_randomizations=4, shots_per_length=800),
                     NoiseParams(52.0, 26.0, 440.0, 0.007), seed=2)
        assert res.fit_post_selected(exact=True).error_per_clifford < res.fit_raw(exact=True).error_per_clifford
        assert np.all(res.kept_fraction <= 1.0)
