import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(results):
        parts = results[crit]
        ok = all(p[1] for p in parts)
        failed = [p[0] for p in parts if not p[1]]
        detail = "" if ok else f" (failed: {', '.join(failed)})"
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}{detail}")
        for part, pok, info in parts:
            terminalreporter.write_line(f"    {'ok  ' if pok else 'FAIL'} {part}: {info}")
