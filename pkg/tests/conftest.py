import json

import numpy as np
import pytest

from semiscat import example_path
from semiscat.config import ExperimentConfig
from semiscat.potential import AngularProfile, HomogeneousTerm, PotentialExpansion


def bundled(name: str) -> dict:
    return json.loads(example_path(name).read_text())


@pytest.fixture(scope="session")
def two_layer_cfg():
    return bundled("two_layer")


@pytest.fixture(scope="session")
def two_layer(two_layer_cfg):
    return PotentialExpansion.from_dict(two_layer_cfg["potential"])


@pytest.fixture(scope="session")
def experiment(two_layer_cfg):
    return ExperimentConfig.from_dict(two_layer_cfg["experiment"])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def iso(*pairs, core=0.5):
    """Potential with isotropic terms given as (rho, c) pairs."""
    return PotentialExpansion(tuple(HomogeneousTerm(r, AngularProfile.isotropic(c)) for r, c in pairs), core)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
