import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wavematch.calibration import locate_operations
from wavematch.synth import generate, repeated_operation_scenario

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


class Scenario:
    """One rendered repeated-operation recording plus its ground truth."""

    def __init__(self, seed):
        self.spec, self.patterns = repeated_operation_scenario(seed=seed)
        self.trace, self.truth = generate(self.spec, self.patterns)
        self.pattern = self.patterns["op"]
        self.good = [t.position for t in self.truth if t.well_formed]
        self.bad = [t.position for t in self.truth if not t.well_formed]
        self.seed_start = self.good[0]

    def locate(self):
        seed = self.trace.samples[self.seed_start:self.seed_start + len(self.pattern)]
        return locate_operations(self.trace, seed)


@pytest.fixture(scope="session")
def scenario():
    return Scenario(0)


@pytest.fixture(scope="session")
def located(scenario):
    return scenario.locate()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    class Recorder:
        def __call__(self, number, title):
            self.key = (number, title)
            results[self.key] = ("FAIL", "did not finish")
            return self

        def note(self, text):
            results[self.key] = ("PASS", text)

        def fail(self, text):
            results[self.key] = ("FAIL", text)

    rec = Recorder()
    yield rec
    call = getattr(request.node, "rep_call", None)
    if call is not None and call.failed and hasattr(rec, "key"):
        results[rec.key] = ("FAIL", results[rec.key][1])


@pytest.hookimpl(wrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    setattr(item, f"rep_{rep.when}", rep)
    return rep


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (status, text) in sorted(results.items()):
        terminalreporter.write_line(f"criterion {number} [{status}] {title}: {text}")
