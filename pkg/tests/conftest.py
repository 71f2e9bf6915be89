from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from graphon_cocluster.graphon import make_rng, random_step_graphon

settings.register_profile("repo", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return make_rng(12345)


def random_graphon(seed, rows=3, cols=4):
    return random_step_graphon(make_rng(seed), rows, cols)


@pytest.fixture
def graphon_factory():
    return random_graphon


def interval_overlaps(intervals, breaks):
    """(cell, length, label, interval index) for every interval/cell overlap; test-side helper."""
    out = []
    for p, (lo, hi, lab) in enumerate(intervals):
        for b in range(len(breaks) - 1):
            ov = min(hi, breaks[b + 1]) - max(lo, breaks[b])
            if ov > 0:
                out.append((b, ov, lab, p))
    return out


def random_intervals(gen: np.random.Generator, K: int, pieces: int = 7):
    cuts = np.sort(gen.random(pieces - 1))
    edges = np.concatenate([[0.0], cuts, [1.0]])
    labels = gen.integers(K, size=pieces)
    return [(float(edges[i]), float(edges[i + 1]), int(labels[i])) for i in range(pieces)]
