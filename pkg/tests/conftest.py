import functools

import pytest

from survscreen.datagen import ScenarioSpec
from survscreen.runner import GridConfig, simulate_scenario

SEED = GridConfig().master_seed
_FULL_GRID = GridConfig()


def scenario_id(n, censoring, rho):
    """Position of a cell in the default grid, so tests see the same streams as `survscreen run`."""
    for spec in _FULL_GRID.scenarios():
        if (spec.n, spec.censoring_rate, spec.rho) == (n, censoring, rho):
            return spec.scenario_id
    raise KeyError((n, censoring, rho))


@functools.lru_cache(maxsize=None)
def scenario_run(n, censoring, rho, replicates=1000, models=None, with_ph_test=False):
    spec = ScenarioSpec(n=n, censoring_rate=censoring, rho=rho, replicates=replicates,
                        master_seed=SEED, scenario_id=scenario_id(n, censoring, rho))
    kwargs = {} if models is None else {"models": models}
    return simulate_scenario(spec, with_ph_test=with_ph_test, **kwargs)


def reports_by_model(run):
    return {r.model: r for r in run.reports()}


# --- acceptance reporting ---------------------------------------------------
# Tests marked ``@pytest.mark.criterion(k, "title")`` get one PASS/FAIL line
# each in the terminal summary; ``note(request, text)`` attaches the measured
# values to that line.

_CRITERIA = []


def note(request, text):
    request.node.user_properties.append(("detail", text))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    details = [v for k, v in item.user_properties if k == "detail"]
    _CRITERIA.append((mark.args[0], mark.args[1], report.passed, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))
