import numpy as np
import pytest

from svrpg_lab.envs import make_env
from svrpg_lab.policy import GaussianPolicy


@pytest.fixture
def bandit():
    return make_env("bandit", {"c": 1.0})


@pytest.fixture
def bandit_policy():
    """Constant-mean Gaussian with sigma 0.5: the mean parameter is the action mean."""
    return GaussianPolicy.linear(1, 1, features="bias", std="fixed", sigma=0.5)


@pytest.fixture
def cartpole():
    return make_env("cartpole")


@pytest.fixture
def cartpole_mlp(cartpole):
    return GaussianPolicy.for_env(cartpole, "mlp", hidden=(8,), std="learned")


def se_close(mean, se, target, k=4.0):
    """``|mean - target| <= k * se`` componentwise."""
    mean, se = np.asarray(mean, dtype=float), np.asarray(se, dtype=float)
    return bool(np.all(np.abs(mean - target) <= k * se))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, title: str, ok: bool, detail: str = "") -> str:
    line = f"criterion {number:<3} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
