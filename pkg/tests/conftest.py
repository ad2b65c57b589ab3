import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from prednext.snn import EncoderConfig, LIFConfig, SpikingEncoder  # noqa: E402


@pytest.fixture
def tiny_encoder():
    torch.manual_seed(0)
    cfg = EncoderConfig(widths=[4, 8], blocks=[1, 1], feature_dim=8, stem_stride=1)
    return SpikingEncoder(cfg, LIFConfig()).double()


@pytest.fixture
def clip():
    g = torch.Generator().manual_seed(1)
    return torch.rand(3, 4, 3, 8, 8, generator=g, dtype=torch.float64) * 4


# One summary line per acceptance criterion, aggregated over its tests.
_criteria: dict[int, dict] = {}
# Measured numbers that tests want shown next to their criterion.
MEASURED: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = _criterion_of.get(report.nodeid)
    if crit is None:
        return
    n, title = crit
    entry = _criteria.setdefault(n, {"title": title, "passed": 0, "failed": 0, "skipped": 0})
    entry[report.outcome] += 1


_criterion_of: dict[str, tuple[int, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        status = "PASS" if e["failed"] == 0 and e["passed"] > 0 else ("FAIL" if e["failed"] else "SKIP")
        terminalreporter.write_line(f"criterion {n}: {status} ({e['passed']} passed, {e['failed']} failed) {e['title']}")
        for note in MEASURED.get(n, []):
            terminalreporter.write_line(f"    {note}")
