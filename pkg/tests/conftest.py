import numpy as np
import pytest

from courtreg.court import build_layout
from courtreg.homography import Homography
from courtreg.synth import ViewSamplerConfig, sample_view_homography

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def layout():
    return build_layout()


@pytest.fixture(scope="session")
def view_cfg():
    return ViewSamplerConfig()


@pytest.fixture(scope="session")
def views(layout, view_cfg):
    rng = np.random.default_rng(1234)
    return [sample_view_homography(view_cfg, rng, layout) for _ in range(20)]


def random_homography(rng, scale=1.0, perspective=1e-4) -> Homography:
    """Generic well-conditioned homography near a similarity."""
    a = rng.uniform(0.5, 1.5) * scale
    th = rng.uniform(-np.pi, np.pi)
    h = np.array([[a * np.cos(th), -a * np.sin(th), rng.uniform(-200, 200)],
                  [a * np.sin(th), a * np.cos(th), rng.uniform(-200, 200)],
                  [rng.uniform(-perspective, perspective), rng.uniform(-perspective, perspective), 1.0]])
    h[:2, :2] += rng.normal(0, 0.1 * scale, (2, 2))
    return Homography(h)
