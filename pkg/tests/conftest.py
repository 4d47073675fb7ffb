import numpy as np
import pytest

from likertmine.kernels import available_backends, get_backend
from likertmine.survey import HEADER, make_dataset
from likertmine.synth import GeneratorSpec, generate_survey


@pytest.fixture(params=available_backends())
def backend(request):
    """Each kernel backend built in this environment."""
    return get_backend(request.param)


@pytest.fixture(scope="session")
def synth600():
    return generate_survey(GeneratorSpec(n=600, seed=42))


@pytest.fixture(scope="session")
def synth3000():
    return generate_survey(GeneratorSpec(n=3000, seed=42))


def csv_text(rows, header=HEADER):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def minimal_profile():
    return [1] * 12


def constant_dataset(values):
    """One record per value, all 15 items equal to that value."""
    return make_dataset([[v] * 15 for v in values])


def rng(seed):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
