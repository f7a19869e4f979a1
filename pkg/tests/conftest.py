import numpy as np
import pytest

from modkal import _kernels, armodel


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger jit compilation outside any timed region."""
    rng = np.random.default_rng(0)
    y = rng.standard_normal((20, 2))
    coeffs, resid, mu = armodel.ar2_window_fits(y, 16, 4)
    widx = np.zeros(20, dtype=np.int64)
    _kernels.run_logpower_tracker(y, coeffs, resid, mu, widx)
    _kernels.run_logpower_tracker(y, coeffs, resid, mu, widx, w_intra=0.3,
                                  intra_coeff=np.array([0.5]),
                                  intra_resid=np.array([0.2]))
    _kernels.run_amplitude_tracker(np.exp(y), y, coeffs, resid, mu, widx)
    return True
