import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_PREFIX = "test_criterion_"


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "").split("::")[-1]
            if rep.when == "call" and name.startswith(ACCEPTANCE_PREFIX):
                num = int(name[len(ACCEPTANCE_PREFIX):].split("_")[0])
                lines.append((num, name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, name, verdict in sorted(lines):
            terminalreporter.write_line(f"criterion {num:>2}  {verdict}  {name}")
