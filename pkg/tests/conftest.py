import pytest


def pytest_addoption(parser):
    parser.addoption("--paper-scale", action="store_true", default=False,
                     help="also run the ~20 min full paper-scale reproduction")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: heavier statistical checks")
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


@pytest.fixture(autouse=True)
def _silence_small_exceedance_warnings():
    import warnings
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="only .* exceedances")
        yield
