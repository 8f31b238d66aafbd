from pathlib import Path

import numpy as np
import pytest

from fqess.sim.pauli import PauliHamiltonian, from_dict

DATA = Path(__file__).resolve().parent.parent / 'data'
EXAMPLE = Path(__file__).resolve().parent.parent / 'example'

H2_GROUND = -1.85158
H2_EXCITED = -0.23312


@pytest.fixture
def h2() -> PauliHamiltonian:
    return from_dict(1, {'I': -1.04235, 'X': 0.1813, 'Z': -0.78865})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
