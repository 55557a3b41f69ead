import pytest

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or "criterion" not in marker.kwargs:
        return
    if rep.when != "call" and rep.passed:
        return
    if hasattr(rep, "wasxfail"):
        status = "xfail" if rep.skipped else "fail"
    elif rep.skipped:
        status = "skip"
    else:
        status = "pass" if rep.passed else "fail"
    entry = _criteria.setdefault(marker.kwargs["criterion"], {"title": marker.kwargs.get("title", ""), "subs": {}})
    prev = entry["subs"].get(item.name)
    if prev is None or prev == "pass":
        entry["subs"][item.name] = status


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_criteria):
        entry = _criteria[crit]
        subs = entry["subs"]
        ok = all(s == "pass" for s in subs.values())
        line = f"{'PASS' if ok else 'FAIL'} criterion {crit:2d}: {entry['title']}"
        bad = [f"{name} ({s})" for name, s in subs.items() if s != "pass"]
        if bad:
            line += " | not passing: " + ", ".join(bad)
        tr.write_line(line)
