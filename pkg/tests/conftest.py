from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from logbranch import BranchingMechanism, CompoundPoissonExp, GammaTail, ModelSpec, NoJumps, Stable

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    log = request.config.stash[_ACCEPTANCE]

    def record(number: int, title: str, checks: dict, detail: str) -> bool:
        passed = all(checks.values())
        failed = [k for k, ok in checks.items() if not ok]
        line = f"[{number}] {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        if failed:
            line += f"  (failed: {', '.join(failed)})"
        log.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def feller():
    """psi(z) = z^2, c = 1, sigma^2 = 1."""
    return ModelSpec(BranchingMechanism(b=0.0, gamma2=1.0), sigma=1.0, c=1.0)


@pytest.fixture(scope="session")
def linear_drift():
    """psi(z) = -z, c = 1, sigma^2 = 1."""
    return ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0)


def subordinator_models():
    """A spread of subordinator models over three jump families."""
    out = []
    for delta in (0.5, 1.0):
        out.append(ModelSpec(BranchingMechanism.from_delta(delta, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0))
        out.append(ModelSpec(BranchingMechanism.from_delta(delta, GammaTail(0.7, 2.0)), sigma=1.2, c=0.8))
        out.append(ModelSpec(BranchingMechanism.from_delta(delta, Stable(0.5, 0.6)), sigma=0.9, c=1.5))
    return out


__all__ = ["NoJumps", "subordinator_models"]
