import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pageflat import synth
from pageflat.pipeline import PipelineConfig, flatten

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line; the assertion stays with the caller."""

    def _report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return _report


@pytest.fixture(scope="session")
def cylinder_run():
    """Default cylinder scene, rendered and flattened once per session."""
    scene, spec = synth.scene_from_dict({})
    truth = synth.render(scene, spec)
    result = flatten(truth.image, PipelineConfig(grid=(spec.M, spec.N)))
    return scene, spec, truth, result


@pytest.fixture(scope="session")
def book_run():
    scene, spec = synth.scene_from_dict(synth.BOOK_SCENE)
    truth = synth.render(scene, spec)
    result = flatten(truth.image, PipelineConfig(mode="book", grid=(spec.M, spec.N)))
    return scene, spec, truth, result


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
