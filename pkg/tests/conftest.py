import numpy as np
import pytest

from waiome.synth import GeneratorConfig, generate_cohort


@pytest.fixture(scope="session")
def default_cohort():
    return generate_cohort(GeneratorConfig())


@pytest.fixture(scope="session")
def small_cohort():
    return generate_cohort(GeneratorConfig(n_normal=24, n_ome=16, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        number = int(name.split("_")[2])
        label = " ".join(name.split("_")[3:])
        status = {"passed": "PASS", "skipped": "SKIP"}.get(_criteria[name], "FAIL")
        terminalreporter.write_line(f"criterion {number:2d} {status}  {label}")
