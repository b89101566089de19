import numpy as np
import pytest
from scipy import stats

from gferasure.protocols.tomography import (ALL_BASES, TomographyError, project_physical, reconstruct,
                                            sample_counts, tomography)
from gferasure.qsys import DensityMatrix, state_fidelity

BELL = np.array([1, 0, 0, 1j]) / np.sqrt(2)


def random_state(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = g @ g.conj().T
    return m / np.trace(m)


class TestReconstruct:
    def test_exact_probabilities_invert(self, rng):
        for _ in range(5):
            rho = random_state(rng)
            rec = reconstruct(sample_counts(rho, None))
            assert np.abs(rec.linear - rho).max() < 1e-9

    def test_bell_state_from_shots(self):
        rho = tomography(np.outer(BELL, BELL.conj()), n_shots=10000, seed=2)
        assert state_fidelity(rho, BELL) == pytest.approx(1, abs=0.02)

    def test_mixed_state_expectations(self):
        n = 4000
        rec = reconstruct(sample_counts(np.eye(4) / 4, n, seed=5))
        # each two-body Pauli is measured in one basis, each local one in three
        z = []
        for k, v in rec.expectations.items():
            if k == "II":
                continue
            reps = 1 if "I" not in k else 3
            z.append(v / np.sqrt(1 / (n * reps)))
        assert np.max(np.abs(z)) < stats.norm.ppf(1 - 0.0015 / len(z))

    def test_result_is_physical(self, rng):
        rho = tomography(np.eye(4) / 4, n_shots=50, seed=1)
        w = np.linalg.eigvalsh(rho.data)
        assert w.min() >= -1e-12 and np.sum(w) == pytest.approx(1)


class TestErrors:
    def test_missing_basis(self):
        counts = sample_counts(np.eye(4) / 4, 100, bases=ALL_BASES[:-1])
        with pytest.raises(TomographyError, match="ZZ"):
            reconstruct(counts)

    def test_wrong_shape(self):
        with pytest.raises(TomographyError):
            sample_counts(np.eye(3) / 3, 10)

    def test_projection_keeps_physical(self):
        rho = np.outer(BELL, BELL.conj())
        assert np.allclose(project_physical(rho), rho)
