import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def dense_screen():
    from guicrop.synth import ScreenSpec, generate_screen
    return generate_screen(ScreenSpec(density_profile="dense", seed=0))


@pytest.fixture(scope="session")
def clustered_screen():
    from guicrop.synth import ScreenSpec, generate_screen
    return generate_screen(ScreenSpec(density_profile="clustered", seed=0))


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    from guicrop.synth import ScreenSpec, write_screen
    root = tmp_path_factory.mktemp("corpus")
    for seed in range(3):
        write_screen(ScreenSpec(seed=seed, element_count=6), root, f"screen{seed}")
    return root
