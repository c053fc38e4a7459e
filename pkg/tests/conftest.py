import sys
from pathlib import Path

import pytest

from credinfer.graph import Article, CredLabel, Creator, Hsn, Subject

sys.path.insert(0, str(Path(__file__).parent))


def three_article_hsn():
    """Three articles, two creators, two subjects."""
    articles = {
        "n1": Article("n1", "Obamacare repeal will cut taxes for families", CredLabel.TRUE),
        "n2": Article("n2", "The gun ban plan takes every rifle", CredLabel.PANTS_ON_FIRE),
        "n3": Article("n3", "Tax credits help families with health costs", CredLabel.MOSTLY_TRUE),
    }
    creators = {
        "u1": Creator("u1", "senator from ohio"),
        "u2": Creator("u2", "radio host and blogger"),
    }
    subjects = {
        "s1": Subject("s1", "health care"),
        "s2": Subject("s2", "guns and taxes"),
    }
    authorship = {"n1": "u1", "n2": "u2", "n3": "u1"}
    links = {"n1": frozenset({"s1", "s2"}), "n2": frozenset({"s2"}), "n3": frozenset({"s1"})}
    return Hsn(articles, creators, subjects, authorship, links)


@pytest.fixture
def toy_hsn():
    return three_article_hsn()


# acceptance results, filled by tests/test_acceptance.py and echoed after the run
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}
ACCEPTANCE_TITLES: dict[int, str] = {}
_CRASHED: set[int] = set()


def pytest_runtest_logreport(report):
    if "test_criterion_" in report.nodeid and report.failed:
        _CRASHED.add(int(report.nodeid.split("test_criterion_")[1].split("_")[0]))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_TITLES):
        title = ACCEPTANCE_TITLES[n]
        if n in ACCEPTANCE:
            status, title, detail = ACCEPTANCE[n]
        elif n in _CRASHED:
            status, detail = "FAIL", "raised before reporting"
        else:
            status, detail = "NOT RUN", "deselected"
        terminalreporter.write_line(f"criterion {n} [{status}] {title}: {detail}")
