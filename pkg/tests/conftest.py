from pathlib import Path

import pytest

from repcite.ingest import load_graph, parse_entity_files, parse_ranking_file
from repcite.model import CitationEdge, InstitutionRecord, JournalRecord, WorkRecord, build_graph
from repcite.prestige import institution_prestige

DATA = Path(__file__).parent / "data"
FIVE = DATA / "five_journal"


@pytest.fixture
def five_dir():
    return FIVE


@pytest.fixture
def five_raw():
    return parse_entity_files(FIVE / "journals.jsonl", FIVE / "works.jsonl", FIVE / "edges.jsonl", FIVE / "institutions.jsonl")


@pytest.fixture
def five_graph():
    return load_graph(FIVE)


@pytest.fixture
def five_rankings():
    return sorted(FIVE.glob("rankings/*.csv"))


@pytest.fixture
def five_prestige(five_graph, five_rankings):
    return institution_prestige([parse_ranking_file(p) for p in five_rankings], [i.id for i in five_graph.institutions])


@pytest.fixture
def tiny_records():
    """Two in-set journals, one exogenous, three census works."""
    institutions = [InstitutionRecord("I1", "Alpha", "US"), InstitutionRecord("I2", "Beta", "FR")]
    journals = [
        JournalRecord("JA", "Journal A", True, 2),
        JournalRecord("JB", "Journal B", True, 1),
        JournalRecord("JX", "Outside", False, 0),
    ]
    works = [
        WorkRecord("W1", "JA", 2020, ("a1", "a2"), ("I1",)),
        WorkRecord("W2", "JA", 2020, ("a2",), ("I2",)),
        WorkRecord("W3", "JB", 2020, ("a3",), ()),
        WorkRecord("WX", "JX", 2021, ("x1",), ("I1", "I2")),
    ]
    edges = [CitationEdge("W2", "W1"), CitationEdge("W3", "W1"), CitationEdge("W1", "W3")]
    return institutions, journals, works, edges


@pytest.fixture
def tiny_graph(tiny_records):
    return build_graph(*tiny_records, census_year=2020)


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
