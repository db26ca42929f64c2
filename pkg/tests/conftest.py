import time
from types import SimpleNamespace

import pytest

from socompliance import data_path, oracle
from socompliance.assignment import SO, solve_equilibrium
from socompliance.compliance import max_ue_share
from socompliance.pipeline import PipelineOptions, run_pipeline
from socompliance.reduced_cost import EMPIRICAL, EXACT, reduced_cost_sets
from socompliance.tntp import load_model

CORPUS_AEC = 1e-12
CORPUS_RC_TOL = 1e-8
SF_AEC = 1e-8


@pytest.fixture
def pigou():
    return oracle.pigou()


@pytest.fixture
def braess():
    return oracle.braess()


@pytest.fixture(scope="session")
def sioux_falls():
    return load_model(data_path("SiouxFalls_net.tntp"), data_path("SiouxFalls_trips.tntp"))


@pytest.fixture(scope="session")
def sf_run(sioux_falls):
    """Sioux Falls run the way the experiments were run (empirical reduced costs), timed."""
    start = time.perf_counter()
    result = run_pipeline(sioux_falls, PipelineOptions(aec_target=SF_AEC, rc_mode=EMPIRICAL))
    return SimpleNamespace(result=result, seconds=time.perf_counter() - start)


@pytest.fixture(scope="session")
def sf_pipeline(sf_run):
    return sf_run.result


@pytest.fixture(scope="session")
def corpus_runs():
    """(name, model, so, rc, result) for every oracle corpus instance."""
    runs = []
    for name, model in oracle.corpus():
        so = solve_equilibrium(model, SO, CORPUS_AEC, max_iterations=5000)
        rc = reduced_cost_sets(model, so, EXACT, CORPUS_RC_TOL)
        runs.append((name, model, so, rc, max_ue_share(model, so, rc)))
    return runs


# ------------------------------------------------------------ acceptance lines

_CRITERIA = {}


@pytest.fixture
def criterion():
    """``criterion(n, passed, detail)`` records one acceptance line and returns ``passed``."""
    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
