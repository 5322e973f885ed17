"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from trihomog.oscillation import OscillationProfile


@pytest.fixture
def cosine_profile():
    """The reference experiment profile b(y) = 1 + cos(2 pi y)."""
    return OscillationProfile(1, {(0,): 1.0, (1,): 0.5, (-1,): 0.5})


def random_nonneg_profile(rng, n_pairs=2, dim=1):
    """A random finite Fourier profile kept non-negative by giving the zero
    mode at least the total mass of the oscillating modes."""
    coeffs = {}
    total = 0.0
    ks = rng.choice(np.arange(1, 7), size=n_pairs, replace=False)
    for k in ks:
        bk = complex(rng.normal(), rng.normal()) * 0.3
        coeffs[(int(k),) * dim] = bk
        total += 2.0 * abs(bk)
    coeffs[(0,) * dim] = total + 0.1 + rng.random()
    return OscillationProfile(dim, coeffs)
