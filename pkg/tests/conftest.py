import warnings

import numpy as np
import pytest

from activedoi import Params


@pytest.fixture
def make_params():
    """Params factory that silences the soft resolution warnings of small test grids."""

    def make(**kw):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return Params(**kw)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
