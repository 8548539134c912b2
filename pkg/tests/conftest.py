import pytest

from mcm_sim.config import CONFIG_ENV, DEFAULT_PRESET, load_config


@pytest.fixture(autouse=True)
def _no_config_env(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)


@pytest.fixture(scope="session")
def config():
    return load_config(str(DEFAULT_PRESET))


@pytest.fixture(scope="session")
def env(config):
    return config.environment()
