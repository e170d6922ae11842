import os
from pathlib import Path

import pytest

from npdcat import Design, presets

HERE = Path(__file__).parent


def toenail_path():
    """Toenail CSV in the package layout (id,time,y,trt; time in weeks)."""
    env = os.environ.get("NPDCAT_TOENAIL_CSV")
    for p in (env, HERE / "data" / "toenail.csv"):
        if p and Path(p).is_file():
            return Path(p)
    return None


@pytest.fixture
def table1():
    return presets.TABLE1


@pytest.fixture
def design50():
    return Design.balanced(50, presets.STUDY_TIMES)


ACCEPTANCE_LINES: list[str] = []


def record(number: int, ok: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def study(request):
    from _study import grid_results
    cache = request.config.cache.mkdir("npdcat-study")
    return {"parameter": grid_results("parameter", cache),
            "structural": grid_results("structural", cache)}
