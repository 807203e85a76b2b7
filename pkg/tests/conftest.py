from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gmtraj.ingest import AgentTrack, Scene

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data" / "ethucy"


def linear_scene(n_agents: int = 20, length: int = 25, seed: int = 0, step: int = 10, name: str = "toy") -> Scene:
    """Agents walking straight lines at constant speed with staggered start frames."""
    rng = np.random.default_rng(seed)
    tracks = []
    for a in range(n_agents):
        start = int(rng.integers(0, 30)) * step
        p0 = rng.uniform(-5, 5, 2)
        v = rng.uniform(-0.5, 0.5, 2)
        frames = tuple(start + step * k for k in range(length))
        pts = p0 + v * np.arange(length)[:, None]
        tracks.append(AgentTrack(a, frames, pts))
    return Scene(name, tuple(tracks), frame_step=step)


@pytest.fixture
def toy_scene() -> Scene:
    return linear_scene()


@pytest.fixture(scope="session")
def data_dir() -> Path:
    if not DATA.is_dir():
        pytest.skip("ETH/UCY annotations not present (run scripts/fetch_ethucy.py)")
    return DATA


# criterion number -> (status, title, detail), filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {status:<4} {title}: {detail}")
