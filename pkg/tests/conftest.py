import warnings

import pytest

from bhdimer.errors import RabiRegimeWarning


@pytest.fixture(autouse=True)
def _quiet_rabi_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RabiRegimeWarning)
        yield
