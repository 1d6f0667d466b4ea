import numpy as np
import pytest

from perturblab.operators import (
    PerturbationFamily,
    build_clamped_bilaplacian,
    build_delta_perturbation,
    build_kernel_perturbation,
    build_nonlocal_robin,
    build_robin_laplacian,
    kernel_by_name,
    make_space,
)
from perturblab.semigroup import SemigroupEvaluator


@pytest.fixture(scope="session")
def space200():
    return make_space(200)


@pytest.fixture(scope="session")
def neumann200(space200):
    return build_robin_laplacian(space200)


@pytest.fixture(scope="session")
def heat200(neumann200):
    return SemigroupEvaluator(neumann200.generator())


@pytest.fixture(scope="session")
def delta200(space200):
    return build_delta_perturbation(space200, float(space200.x[100]))


@pytest.fixture(scope="session")
def delta_family(neumann200, delta200):
    return PerturbationFamily(neumann200.generator(), delta200)


@pytest.fixture(scope="session")
def mixed_family(neumann200, space200):
    return PerturbationFamily(neumann200.generator(),
                              build_kernel_perturbation(space200, kernel_by_name("mixed")))


@pytest.fixture(scope="session")
def beam200():
    return SemigroupEvaluator(build_clamped_bilaplacian(make_space(200, closed=False)).generator())


@pytest.fixture(scope="session")
def nonlocal200(space200):
    return SemigroupEvaluator(build_nonlocal_robin(space200, 1.0, -1.0).generator())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance criteria: one PASS/FAIL line each in the terminal summary

_CRITERIA: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    failed_setup = rep.when == "setup" and not rep.passed
    if rep.when == "call" or failed_setup:
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if rep.failed:
            msg = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else ""
            detail = "; ".join(x for x in (detail, msg.splitlines()[0] if msg else "") if x)
        _CRITERIA.append(("PASS" if rep.passed else "FAIL", marker.args[0], detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for verdict, label, detail in _CRITERIA:
        terminalreporter.write_line(f"{verdict} {label}" + (f" | {detail}" if detail else ""))
