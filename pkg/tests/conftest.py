"""Print one pass/fail line per acceptance criterion at the end of the run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or rep.when != "call" and outcome != "error":
                continue
            detail = dict(rep.user_properties).get("detail", "")
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append((int(m.group(1)), f"criterion {m.group(1)}: {status}  {detail}".rstrip()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
