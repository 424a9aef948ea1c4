import warnings

import numpy as np
import pytest

from adiabatic_switch.errors import NormalizationWarning
from adiabatic_switch.hamiltonian import two_level_family
from adiabatic_switch.schedule import build_bump_schedule


@pytest.fixture(scope="session")
def bump():
    return build_bump_schedule()


@pytest.fixture(scope="session")
def two_level(bump):
    """Factory for the avoided-crossing family (normalization warning silenced)."""
    def make(delta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NormalizationWarning)
            return two_level_family(delta, bump)
    return make


def random_hermitian(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (A + A.conj().T) / 2
