import numpy as np
import pytest

from gferasure.engine.master import EvolutionSpec, propagator, superop_to_choi
from gferasure.noise import CollapseOperator, NoiseParams, collapse_operators, psd_from_spinlock
from gferasure.protocols.gates import idle_superop


class TestNoiseParams:
    @pytest.mark.parametrize("kw", [dict(t1_ge=0), dict(p_thermal=0.5), dict(p_thermal=-0.1), dict(tphi_gf=-3)])
    def test_invariants(self, kw):
        base = dict(t1_ge=52.0, t1_ef=26.0, tphi_gf=440.0)
        with pytest.raises(ValueError):
            NoiseParams(**{**base, **kw})

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            CollapseOperator(np.eye(2), -1.0)


class TestChannel:
    def test_choi_positive_over_one_cycle(self, cooldown_b):
        s = idle_superop(cooldown_b.noise, 3.52, levels=3)
        w = np.linalg.eigvalsh(superop_to_choi(s))
        assert w.min() > -1e-9
        # trace preservation: sum_a <a|E(|i><j|)|a> = delta_ij
        t = s.reshape(3, 3, 3, 3)
        assert np.allclose(np.einsum("aaij->ij", t), np.eye(3), atol=1e-12)

    def test_gf_coherence_decay_rate(self):
        # only pure dephasing: rho_gf decays at exactly 1/tphi_gf
        n = NoiseParams(t1_ge=1e9, t1_ef=1e9, tphi_gf=40.0)
        spec = EvolutionSpec(np.zeros((3, 3)), collapses=collapse_operators(n, 3, decay=False, thermal=False))
        rho = np.zeros((3, 3), complex)
        rho[0, 0] = rho[2, 2] = rho[0, 2] = rho[2, 0] = 0.5
        out = (propagator(spec, 10.0) @ rho.reshape(-1)).reshape(3, 3)
        assert abs(out[0, 2]) == pytest.approx(0.5 * np.exp(-10 / 40), rel=1e-10)

    def test_f_to_e_to_g_cascade(self):
        # analytic two-step decay populations with no dephasing
        n = NoiseParams(t1_ge=50.0, t1_ef=20.0, tphi_gf=1e9)
        spec = EvolutionSpec(np.zeros((3, 3)), collapses=collapse_operators(n, 3, dephasing=False, thermal=False))
        rho = np.diag([0, 0, 1]).astype(complex)
        t = 15.0
        out = np.real(np.diag((propagator(spec, t) @ rho.reshape(-1)).reshape(3, 3)))
        a, b = 1 / 20, 1 / 50
        pf = np.exp(-a * t)
        pe = a / (a - b) * (np.exp(-b * t) - np.exp(-a * t))
        assert np.allclose(out, [1 - pf - pe, pe, pf], atol=1e-12)


class TestPSD:
    def test_inversion(self):
        (p,) = psd_from_spinlock([(1.0, 40.0)], 26.0)
        assert p.s_omega == pytest.approx(2 * (1 / 40 - 1 / 52))
        assert not p.clipped

    def test_clipping(self):
        (p,) = psd_from_spinlock([(1.0, 60.0)], 26.0)
        assert p.s_omega == 0.0 and p.clipped

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            psd_from_spinlock([(1.0, 0.0)], 26.0)
