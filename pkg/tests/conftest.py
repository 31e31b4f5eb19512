from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from pfcontrol.config import RunConfig, parse_config
from pfcontrol.cost import CostSpec
from pfcontrol.grid import SpatialMesh
from pfcontrol.potential import PotentialSpec
from pfcontrol.state import InitialData, ModelParams

ROOT = Path(__file__).resolve().parents[1]
BASELINE = ROOT / "configs" / "baseline.cfg"

_ACCEPTANCE = pytest.StashKey[list]()


@dataclass
class Problem:
    cfg: RunConfig
    mesh: SpatialMesh
    params: ModelParams
    spec: PotentialSpec
    init: InitialData
    u: np.ndarray

    def cost(self) -> CostSpec:
        return self.cfg.cost(self.mesh, self.params, self.spec, self.init)

    @property
    def args(self):
        return self.mesh, self.params, self.spec, self.init


def load_problem(*overrides: str) -> Problem:
    cfg = parse_config(BASELINE.read_text(), list(overrides))
    mesh = cfg.mesh()
    params = cfg.params(mesh)
    return Problem(cfg, mesh, params, cfg.potential(), cfg.initial(mesh), cfg.control(mesh, params))


@pytest.fixture(scope="session")
def baseline() -> Problem:
    return load_problem()


@pytest.fixture(scope="session")
def small() -> Problem:
    """9 nodes, 5 steps: small enough for dense oracles."""
    return load_problem("mesh.nodes_x=9", "model.steps=5")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
