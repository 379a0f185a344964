import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jacobidet.model import build_magnetic, build_oscillator, sampled_problem
from jacobidet.spectral import spectrum

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

VERDICTS = []


@functools.lru_cache(maxsize=None)
def oscillator_spectrum(r: float, N: int):
    return spectrum(build_oscillator(r), N)


@functools.lru_cache(maxsize=None)
def magnetic_spectrum(r: float, N: int):
    return spectrum(build_magnetic(r), N)


def random_sampled(seed: int = 7, nt: int = 8, d: int = 2, m: int = 2):
    """Sampled problem with a non-constant negative-definite H."""
    rng = np.random.default_rng(seed)
    H = np.empty((nt, m, m))
    for i in range(nt):
        B = rng.normal(size=(m, m))
        H[i] = -(B @ B.T + (0.5 + i / nt) * np.eye(m))
    Y = rng.normal(size=(nt, d, m))
    X = rng.normal(size=(nt, d, m)) + np.eye(d, m)[None]
    return sampled_problem(H, Y, X, label=f"random(seed={seed})")


@pytest.fixture
def verdict():
    def record(criterion: int, text: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {text}"
        if detail:
            line += f" [{detail}]"
        VERDICTS.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
