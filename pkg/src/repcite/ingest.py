"""Parsers for user-supplied ranking CSVs and entity JSON Lines files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .model import (
    ENTITY_FILES,
    CitationEdge,
    CitationGraph,
    InstitutionRecord,
    JournalRecord,
    WorkRecord,
    build_graph,
)


class ParseError(ValueError):
    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RankingSourceFile:
    source_name: str
    entries: tuple[tuple[int, str], ...]

    def __post_init__(self):
        seen = set()
        prev = 0
        for rank, iid in self.entries:
            if rank < 1:
                raise ValueError(f"{self.source_name}: rank must be positive, got {rank}")
            if rank <= prev:
                raise ValueError(f"{self.source_name}: ranks must be strictly increasing (rank {rank} after {prev})")
            if iid in seen:
                raise ValueError(f"{self.source_name}: duplicate institution {iid!r}")
            seen.add(iid)
            prev = rank

    def __len__(self) -> int:
        return len(self.entries)


def parse_ranking_file(path: str | Path, source_name: Optional[str] = None) -> RankingSourceFile:
    """Read a ``rank,institution_id`` CSV. Rows may appear in any order."""
    path = Path(path)
    rows: list[tuple[int, str]] = []
    seen: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(path, None, "empty ranking file")
        header = [h.strip() for h in header]
        if header[:2] != ["rank", "institution_id"]:
            raise ParseError(path, 1, f"expected header 'rank,institution_id', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError(path, lineno, "expected two columns")
            raw_rank, iid = row[0].strip(), row[1].strip()
            try:
                rank = int(raw_rank)
            except ValueError:
                raise ParseError(path, lineno, f"non-numeric rank {raw_rank!r}") from None
            if rank < 1:
                raise ParseError(path, lineno, f"rank must be positive, got {rank}")
            if not iid:
                raise ParseError(path, lineno, "empty institution_id")
            if iid in seen:
                raise ParseError(path, lineno, f"duplicate institution {iid!r} (first on line {seen[iid]})")
            seen[iid] = lineno
            rows.append((rank, iid))
    if not rows:
        raise ParseError(path, None, "ranking file has no entries")
    rows.sort()
    for (r0, _), (r1, iid) in zip(rows, rows[1:]):
        if r0 == r1:
            raise ParseError(path, seen[iid], f"tied rank {r1}")
    return RankingSourceFile(source_name or path.stem, tuple(rows))


def write_ranking_file(path: str | Path, source: RankingSourceFile) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "institution_id"])
        w.writerows(source.entries)


# -- entity files ------------------------------------------------------------

_REQUIRED = {
    "institutions": ("id", "name"),
    "journals": ("id", "title", "in_set"),
    "works": ("id", "journal_id", "year", "author_ids"),
    "edges": ("citing_work_id", "cited_work_id"),
}


def _opt_int(value: Any, field: str) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"field {field!r} must be an integer")
    return value


def _to_institution(d: dict) -> InstitutionRecord:
    return InstitutionRecord(str(d["id"]), str(d["name"]), d.get("country"))


def _to_journal(d: dict) -> JournalRecord:
    if not isinstance(d["in_set"], bool):
        raise ValueError("field 'in_set' must be a boolean")
    return JournalRecord(str(d["id"]), str(d["title"]), d["in_set"], _opt_int(d.get("census_paper_count", 0), "census_paper_count") or 0)


def _to_work(d: dict) -> WorkRecord:
    authors = d["author_ids"]
    if not isinstance(authors, list):
        raise ValueError("field 'author_ids' must be a list")
    insts = d.get("institution_ids") or []
    if not isinstance(insts, list):
        raise ValueError("field 'institution_ids' must be a list")
    year = _opt_int(d["year"], "year")
    return WorkRecord(
        str(d["id"]),
        str(d["journal_id"]),
        year,
        tuple(str(a) for a in authors),
        tuple(str(i) for i in insts),
        _opt_int(d.get("page_count"), "page_count"),
        _opt_int(d.get("reference_count"), "reference_count"),
    )


def _to_edge(d: dict) -> CitationEdge:
    return CitationEdge(str(d["citing_work_id"]), str(d["cited_work_id"]), _opt_int(d.get("f"), "f"))


_CONVERTERS = {
    "institutions": _to_institution,
    "journals": _to_journal,
    "works": _to_work,
    "edges": _to_edge,
}


def parse_jsonl(path: str | Path, kind: str) -> list:
    """Parse one entity file; unknown fields are ignored."""
    path = Path(path)
    convert = _CONVERTERS[kind]
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"malformed JSON: {exc.msg}") from None
            if not isinstance(d, dict):
                raise ParseError(path, lineno, "expected a JSON object")
            for name in _REQUIRED[kind]:
                if name not in d:
                    raise ParseError(path, lineno, f"missing required field {name!r}")
            try:
                out.append(convert(d))
            except (ValueError, TypeError) as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return out


def parse_entity_files(journals_path, works_path, edges_path, institutions_path) -> dict[str, list]:
    return {
        "institutions": parse_jsonl(institutions_path, "institutions"),
        "journals": parse_jsonl(journals_path, "journals"),
        "works": parse_jsonl(works_path, "works"),
        "edges": parse_jsonl(edges_path, "edges"),
    }


def load_graph(directory: str | Path, census_year: Optional[int] = None, exogenous_f: int = 0) -> CitationGraph:
    """Load a directory written by :func:`repcite.model.dump_graph`."""
    directory = Path(directory)
    meta = directory / "graph.json"
    if census_year is None and meta.exists():
        census_year = json.loads(meta.read_text(encoding="utf-8")).get("census_year")
    raw = parse_entity_files(*(directory / ENTITY_FILES[k] for k in ("journals", "works", "edges", "institutions")))
    return build_graph(raw["institutions"], raw["journals"], raw["works"], raw["edges"], census_year, exogenous_f)
