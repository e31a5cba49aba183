import numpy as np
import pytest

from prbmlab import EnsembleSpec, LindbladModel, full_spectrum, sample_operator


@pytest.fixture(scope="session")
def complex_pair_model():
    """A model whose slowest mode is a complex conjugate pair.

    Sites 0 and 1 form an exactly decoupled two-level block with pure
    transverse coupling and a tiny jump-operator splitting; its Bloch
    precession makes the oscillating coherence the slowest decaying mode,
    while the remaining sites relax orders of magnitude faster.
    """
    n = 24
    kappa = np.concatenate([[0.0, 0.02], np.linspace(-2.2, 2.2, n - 2)])
    h = np.zeros((n, n))
    h[0, 1] = h[1, 0] = 0.5
    h[2:, 2:] = 0.5 * sample_operator(EnsembleSpec(n - 2, 0.0, seed=5)).matrix
    model = LindbladModel(h, [(np.diag(kappa), 4.0)])
    return model, full_spectrum(model)
