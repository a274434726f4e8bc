import os

import pytest

# In-memory registry for the whole suite; must be set before app.config is imported
os.environ["DATABASE_URL"] = "sqlite://"
os.environ.setdefault("LOG_LEVEL", "WARNING")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte-Carlo acceptance runs, enabled with RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
