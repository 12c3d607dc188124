import numpy as np
import pytest

from ncgcn.graph import build_csr


def random_graph(rng, n, p=0.3):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return build_csr(np.stack([iu[keep], ju[keep]], axis=1), n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool | None, detail: str) -> None:
    """ok=None marks a criterion skipped for lack of data."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
