import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from mimopc.harness import CampaignSpec, run_campaign  # noqa: E402
from mimopc.model import NetworkConfig, load_config  # noqa: E402
from mimopc.cli import default_config_path  # noqa: E402

# reproducible by default; HYPOTHESIS_PROFILE=stress explores more
settings.register_profile("default", derandomize=True)
settings.register_profile("stress", max_examples=400, derandomize=False)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CAMPAIGN_DROPS = 2000
CAMPAIGN_SEED = 1


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the full-scale campaigns")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def default_cfg() -> NetworkConfig:
    return load_config(default_config_path())


@pytest.fixture(scope="session")
def reference_campaign(default_cfg):
    """2000 full-scale drops, seeds 1..2000, shared by the statistical checks."""
    return run_campaign(CampaignSpec(cfg=default_cfg, num_drops=CAMPAIGN_DROPS, base_seed=CAMPAIGN_SEED))


ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
