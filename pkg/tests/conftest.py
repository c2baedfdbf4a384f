import math

import numpy as np
import pytest

from swarmdiff.metric_space import LatencyView
from swarmdiff.scheduler import PriorityMatrix

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        # a criterion passes only if every parametrisation passes
        previous = _criteria.get(number, (title, "PASS"))[1]
        status = "PASS" if report.passed and previous == "PASS" else "FAIL"
        _criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")


def random_instance(rng: np.random.Generator):
    """A random priority matrix and latency view for one owner.

    About one instance in five carries deliberate ties (repeated latencies and
    probabilities) so that the tie-break order is exercised.
    """
    n = int(rng.integers(2, 21))
    K = int(rng.integers(1, 11))
    owner = int(rng.integers(n))
    step = int(rng.integers(0, 30))
    tied = rng.random() < 0.2
    if tied:
        delta = rng.choice([0.02, 0.05, 0.1], size=n)
        P = rng.choice([0.1, 0.3, 0.9], size=(n, K))
        measured = np.full(n, max(step - 3, 0))
    else:
        delta = rng.uniform(0.005, 0.4, n)
        P = np.exp(rng.uniform(math.log(1e-6), 0.0, (n, K)))
        measured = rng.integers(0, step + 1, n)
    active = rng.random((n, K)) < rng.uniform(0.0, 1.0)
    active[owner] = False
    P = np.where(active, P, 1.0)
    view = LatencyView(owner, delta, measured)
    c = float(rng.uniform(0.05, 2.0))
    return PriorityMatrix(owner, P, active), view, step, c


def brute_force_argmax(matrix, view, step, c):
    """Exhaustive search with the documented tie-break.

    Highest urgency, then larger latency, then smaller fragment, then smaller
    peer id. Returns ``(peer, fragment)`` or None.
    """
    best, best_key = None, None
    n, K = matrix.entries.shape
    for j in range(n):
        for k in range(K):
            if not matrix.active[j, k]:
                continue
            delta = float(view.delta[j])
            age = step - int(view.measured_at[j])
            chi = math.exp(-c * age * delta) / float(matrix.entries[j, k])
            key = (chi, delta, -k, -j)
            if best_key is None or key > best_key:
                best, best_key = (j, k), key
    return best


@pytest.fixture
def instances():
    rng = np.random.default_rng(20240501)
    return [random_instance(rng) for _ in range(1000)]


def gradient_check_instance(rng: np.random.Generator):
    """Worst relative error between analytic and central-difference gradients."""
    from swarmdiff.forecast.rnn import init_params, loss_and_grads

    T, B = int(rng.integers(2, 7)), int(rng.integers(1, 4))
    inputs, hidden, outputs = int(rng.integers(1, 5)), int(rng.integers(2, 6)), int(rng.integers(1, 4))
    params = init_params(inputs, hidden, outputs, int(rng.integers(2**31)))
    params = {k: v + rng.normal(0, 0.1, v.shape) for k, v in params.items()}
    X = rng.normal(size=(T, B, inputs))
    Y = rng.normal(size=(T, B, outputs))
    mask = rng.random((T, B, outputs)) < 0.8
    mask[0, 0, 0] = True
    h0 = rng.normal(0, 0.5, (B, hidden))
    _, grads, _ = loss_and_grads(params, X, Y, mask, h0)
    eps, worst = 1e-6, 0.0
    for name, value in params.items():
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            up = loss_and_grads(params, X, Y, mask, h0)[0]
            value[idx] = orig - eps
            down = loss_and_grads(params, X, Y, mask, h0)[0]
            value[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        scale = max(np.linalg.norm(numeric) + np.linalg.norm(grads[name]), 1e-8)
        worst = max(worst, float(np.linalg.norm(numeric - grads[name]) / scale))
    return worst
