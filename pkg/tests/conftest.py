import pytest

from densecell.model import db_to_linear, preset_3gpp_case1, preset_single_slope


@pytest.fixture(scope="session")
def case1_env():
    return preset_3gpp_case1()


@pytest.fixture(scope="session")
def single_slope_env():
    return preset_single_slope(3.75, db_to_linear(-32.9))
