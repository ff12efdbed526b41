import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tests.chains import make_gantry_chain, make_planar_chain


@pytest.fixture
def planar_chain():
    return make_planar_chain()


@pytest.fixture
def gantry_chain():
    return make_gantry_chain()
