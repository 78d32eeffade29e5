import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Property tests share one core with the optimization-heavy acceptance
# tests, so keep deadlines off and sizes moderate; export
# HYPOTHESIS_PROFILE=thorough for a heavier local sweep.
settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RUN_SLOW"):
        return
    skip = pytest.mark.skip(reason="extended-budget run; set RUN_SLOW=1 to enable")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
