import pytest

from surropt import generate_setting


@pytest.fixture(scope="session")
def bench():
    """Benchmark draws shared across test modules, keyed by (setting, n, seed)."""
    cache = {}

    def get(setting=1, n=2000, seed=101):
        key = (setting, n, seed)
        if key not in cache:
            cache[key] = generate_setting(setting, n, seed=seed)
        return cache[key]

    return get
