from pathlib import Path

import pytest

from vortex.core import NotssCategory, Role
from vortex.graphs import InteractionEdge, InteractionGraph

DATA = Path(__file__).parent / "data"

S, A, N = Role.SURGEON, Role.ANESTHESIOLOGIST, Role.NURSE
CT = NotssCategory.COMMUNICATION_TEAMWORK
SA = NotssCategory.SITUATIONAL_AWARENESS
DM = NotssCategory.DECISION_MAKING
LD = NotssCategory.LEADERSHIP


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def fixture_transcript():
    from vortex.transcript import load_transcript

    return load_transcript(DATA / "fixture_transcript")


def fig7_graph() -> InteractionGraph:
    """Five-edge team network; the first three edges carry the figure's timestamps."""
    return InteractionGraph.team([
        InteractionEdge(S, N, CT, 5653, "Surgeon calls the timeout"),
        InteractionEdge(N, S, SA, 5738, "Nurse confirms help is coming"),
        InteractionEdge(S, A, SA, 5829, "Surgeon flags the falling pressure"),
        InteractionEdge(A, N, DM, 5840, "Anesthesiologist asks for blood"),
        InteractionEdge(N, A, LD, 5850, "Nurse coordinates the runner"),
    ])


# acceptance verdicts, printed once at the end of the run
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
