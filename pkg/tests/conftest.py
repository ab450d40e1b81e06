import numpy as np
import pytest

from latent_elevator import make_schedule
from latent_elevator.synth import make_gp_prior


@pytest.fixture(scope="session")
def sched_t2i():
    return make_schedule("linear_beta", 1000, beta_start=1e-4, beta_end=2e-2)


@pytest.fixture(scope="session")
def sched_t2v():
    return make_schedule("scaled_linear_beta", 1000, beta_start=1e-4, beta_end=2e-2)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def std_normal_prior():
    # rho=0, flat unit spectrum, zero mean: the identity-covariance prior
    return make_gp_prior(4, 2, 4, 4, rho=0.0, spectrum_kind="flat")


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, the oracle-side spectral basis."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def dense_covariance(prior) -> np.ndarray:
    """Brute-force covariance matrix of a separable prior, built from
    explicit Kronecker factors (independent of the library's eigen path)."""
    f, c, h, w = prior.shape
    idx = np.arange(f)
    c_t = prior.temporal_rho ** np.abs(idx[:, None] - idx[None, :])
    f2 = np.kron(dft_matrix(h), dft_matrix(w))
    c_s = (f2.conj().T @ np.diag(prior.spatial_spectrum.ravel()) @ f2).real
    return prior.variance_scale * np.kron(c_t, np.kron(np.eye(c), c_s))
