import pytest
from hypothesis import settings

from src.core.conjugation import build_forms
from src.core.maximal_solver import solve_dirichlet
from src.core.strip_domain import SingularSet, StripConfig

settings.register_profile("ci", max_examples=50, deadline=None)
settings.load_profile("ci")

# coarse desk grid: ell = 0.6 gives eta = 0.2, h = 1/16
COARSE_H = 1.0 / 16.0


@pytest.fixture(scope="session")
def cfg():
    return StripConfig(ell=0.6, grid_h=COARSE_H)


@pytest.fixture(scope="session")
def empty_field(cfg):
    return solve_dirichlet(cfg, SingularSet.empty())


@pytest.fixture(scope="session")
def single_field(cfg):
    return solve_dirichlet(cfg, SingularSet.centred([0]))


@pytest.fixture(scope="session")
def empty_forms(empty_field):
    return build_forms(empty_field)


@pytest.fixture(scope="session")
def single_forms(single_field):
    return build_forms(single_field)


@pytest.fixture
def write_conf(tmp_path):
    """Write a key=value config file and return its path."""
    def _write(text, name="run.conf"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
