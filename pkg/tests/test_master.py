import numpy as np
import pytest

from gferasure.engine.master import (EvolutionSpec, evolve_master, kraus_to_superop, propagator, superop_to_choi,
                                     superop_to_kraus)
from gferasure.noise import CollapseOperator, NoiseParams, collapse_operators
from gferasure.qsys import DensityMatrix, destroy


def driven_qutrit(noise=None):
    n = 3
    h0 = np.diag([0.0, 2 * np.pi * 0.3, -2 * np.pi * 1.0]).astype(complex)
    env = lambda t: 2 * np.pi * 2.0 * np.sin(np.pi * t / 0.5) ** 2
    col = collapse_operators(noise, n) if noise else []
    return EvolutionSpec(h0, [(destroy(n).conj().T, env)], col, dt=0.002)


class TestPropagator:
    def test_every_step_is_a_valid_state(self):
        noise = NoiseParams(20.0, 10.0, 30.0, p_thermal=0.02)
        spec = driven_qutrit(noise)
        res = evolve_master(spec, np.diag([1, 0, 0]).astype(complex), 0.5, times=np.linspace(0, 0.5, 26))
        for s in res.states:
            s.validate()

    def test_choi_positive_driven(self):
        spec = driven_qutrit(NoiseParams(20.0, 10.0, 30.0))
        j = superop_to_choi(propagator(spec, 0.5))
        assert np.linalg.eigvalsh(0.5 * (j + j.conj().T)).min() > -1e-9

    def test_magnus_matches_rk4(self):
        spec = driven_qutrit(NoiseParams(20.0, 10.0, 30.0))
        rho0 = np.diag([1, 0, 0]).astype(complex)
        a = evolve_master(spec, rho0, 0.5).final.data
        spec.dt = 0.0005
        b = evolve_master(spec, rho0, 0.5, method="rk4").final.data
        assert np.max(np.abs(a - b)) < 1e-6

    def test_unitary_limit(self):
        spec = driven_qutrit()
        u = propagator(spec, 0.5, unitary=True)
        s = propagator(spec, 0.5)
        assert np.allclose(u @ u.conj().T, np.eye(3), atol=1e-12)
        assert np.allclose(s, np.kron(u, u.conj()), atol=1e-10)

    def test_analytic_t1(self):
        spec = EvolutionSpec(np.zeros((2, 2)), collapses=[CollapseOperator(np.array([[0, 1], [0, 0]]), 1 / 7.0)])
        res = evolve_master(spec, np.diag([0, 1]).astype(complex), 10.0, times=[0, 3, 10])
        assert np.allclose(res.expect(np.diag([0, 1])), np.exp(-np.array([0, 3, 10]) / 7.0), atol=1e-12)

    def test_negative_duration(self):
        with pytest.raises(ValueError):
            propagator(driven_qutrit(), -1.0)


class TestKraus:
    def test_round_trip(self):
        s = propagator(driven_qutrit(NoiseParams(5.0, 3.0, 4.0)), 0.5)
        ks = superop_to_kraus(s)
        assert np.allclose(kraus_to_superop(ks), s, atol=1e-10)
        assert np.allclose(sum(k.conj().T @ k for k in ks), np.eye(3), atol=1e-10)
