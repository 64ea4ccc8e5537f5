import contextlib

import pytest

_CRITERIA: list[tuple[str, str, str]] = []


class CriterionLog:
    """Records one PASS/FAIL/SKIP line per acceptance criterion."""

    @contextlib.contextmanager
    def check(self, name: str):
        detail = {}
        try:
            yield detail
        except pytest.skip.Exception as exc:
            _CRITERIA.append(("SKIP", name, str(exc)))
            print(f"SKIP  {name}: {exc}")
            raise
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _CRITERIA.append(("FAIL", name, msg))
            print(f"FAIL  {name}: {msg}")
            raise
        text = ", ".join(f"{k}={v}" for k, v in detail.items())
        _CRITERIA.append(("PASS", name, text))
        print(f"PASS  {name}: {text}")


@pytest.fixture
def criterion():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _CRITERIA:
        terminalreporter.write_line(f"{status:5} {name}: {detail}")
