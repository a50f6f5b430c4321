import sys
from pathlib import Path

import pytest

from offloadkit.trace import PacketRecord, PacketTrace

DATA = Path(__file__).parent / "data"


def pkt(t, size=100, direction="outbound", src=("10.0.0.1", 1000), dst=("10.0.0.2", 80),
        transport="tcp"):
    return PacketRecord(t, direction, size, src[0], src[1], dst[0], dst[1], transport)


def trace_at(*times, size=100):
    return PacketTrace(tuple(pkt(t, size) for t in times))


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        status, title = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
