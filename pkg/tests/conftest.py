import gattrim.models


def pytest_configure(config):
    # every forward in the suite re-checks attention normalization
    gattrim.models.VALIDATE_ATTENTION = True
