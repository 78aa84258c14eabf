"""In-memory citation universe: institutions, journals, works and citation edges.

The graph is validated once in :func:`build_graph` and never mutated afterwards.
Edges are deduplicated at work-pair granularity and stored sorted by
``(citing_work_id, cited_work_id)``; an edge's position in that order is its
edge id, which fixes the summation order used by the solver.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class GraphValidationError(ValueError):
    """Raised when raw records cannot be assembled into a consistent graph."""


class DanglingReferenceError(GraphValidationError):
    def __init__(self, kind: str, ref_id: str, where: str):
        self.kind = kind
        self.ref_id = ref_id
        super().__init__(f"dangling {kind} reference {ref_id!r} in {where}")


@dataclass(frozen=True)
class InstitutionRecord:
    id: str
    name: str
    country: Optional[str] = None


@dataclass(frozen=True)
class JournalRecord:
    id: str
    title: str
    in_set: bool
    census_paper_count: int = 0


@dataclass(frozen=True)
class WorkRecord:
    id: str
    journal_id: str
    year: int
    author_ids: tuple[str, ...]
    institution_ids: tuple[str, ...] = ()
    page_count: Optional[int] = None
    reference_count: Optional[int] = None


@dataclass(frozen=True)
class CitationEdge:
    citing_work_id: str
    cited_work_id: str
    f: Optional[int] = None


def _dedup(ids: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(ids))


@dataclass(frozen=True, eq=False)
class CitationGraph:
    """Frozen, indexed citation universe.

    ``census_year`` selects which works of in-set journals receive prestige
    flow; ``None`` means every work of an in-set journal is a census work.
    """

    institutions: tuple[InstitutionRecord, ...]
    journals: tuple[JournalRecord, ...]
    works: tuple[WorkRecord, ...]
    edges: tuple[CitationEdge, ...]
    census_year: Optional[int] = None
    _institution_by_id: dict = field(default_factory=dict, repr=False)
    _journal_by_id: dict = field(default_factory=dict, repr=False)
    _work_by_id: dict = field(default_factory=dict, repr=False)
    _incoming: dict = field(default_factory=dict, repr=False)
    _journal_census: dict = field(default_factory=dict, repr=False)
    _author_census: dict = field(default_factory=dict, repr=False)

    def __eq__(self, other):
        if not isinstance(other, CitationGraph):
            return NotImplemented
        return (
            self.census_year == other.census_year
            and self.institutions == other.institutions
            and self.journals == other.journals
            and self.works == other.works
            and self.edges == other.edges
        )

    __hash__ = None

    # -- lookups -----------------------------------------------------------
    def institution(self, institution_id: str) -> InstitutionRecord:
        return self._institution_by_id[institution_id]

    def journal(self, journal_id: str) -> JournalRecord:
        return self._journal_by_id[journal_id]

    def work(self, work_id: str) -> WorkRecord:
        return self._work_by_id[work_id]

    def has_institution(self, institution_id: str) -> bool:
        return institution_id in self._institution_by_id

    @property
    def in_set_journals(self) -> tuple[JournalRecord, ...]:
        return tuple(j for j in self.journals if j.in_set)

    def is_census_work(self, work: WorkRecord) -> bool:
        if not self._journal_by_id[work.journal_id].in_set:
            return False
        return self.census_year is None or work.year == self.census_year

    def census_works(self, journal_id: str) -> tuple[str, ...]:
        return self._journal_census.get(journal_id, ())

    def author_census_works(self, author_id: str) -> tuple[str, ...]:
        return self._author_census.get(author_id, ())

    @property
    def census_authors(self) -> tuple[str, ...]:
        return tuple(sorted(self._author_census))

    @property
    def authors(self) -> tuple[str, ...]:
        return tuple(sorted({a for w in self.works for a in w.author_ids}))

    def incoming_edges(self, work_id: str) -> tuple[int, ...]:
        """Edge ids citing ``work_id``, ascending."""
        return self._incoming.get(work_id, ())

    # -- array views used by the solver and scoring ------------------------
    @cached_property
    def work_index(self) -> dict[str, int]:
        return {w.id: i for i, w in enumerate(self.works)}

    @cached_property
    def journal_index(self) -> dict[str, int]:
        return {j.id: i for i, j in enumerate(self.journals)}

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(citing_idx, cited_idx, f)`` over works, in edge-id order."""
        wi = self.work_index
        citing = np.fromiter((wi[e.citing_work_id] for e in self.edges), dtype=np.int64, count=len(self.edges))
        cited = np.fromiter((wi[e.cited_work_id] for e in self.edges), dtype=np.int64, count=len(self.edges))
        f = np.fromiter((e.f for e in self.edges), dtype=np.int8, count=len(self.edges))
        return citing, cited, f

    @cached_property
    def census_mask(self) -> np.ndarray:
        return np.array([self.is_census_work(w) for w in self.works], dtype=bool)

    def __repr__(self) -> str:
        return (
            f"CitationGraph(institutions={len(self.institutions)}, journals={len(self.journals)}, "
            f"works={len(self.works)}, edges={len(self.edges)}, census_year={self.census_year})"
        )


def build_graph(
    institutions: Sequence[InstitutionRecord],
    journals: Sequence[JournalRecord],
    works: Sequence[WorkRecord],
    edges: Sequence[CitationEdge | tuple],
    census_year: Optional[int] = None,
    exogenous_f: int = 0,
) -> CitationGraph:
    """Validate raw records and assemble a :class:`CitationGraph`.

    Duplicate ``(citing, cited)`` pairs collapse to one edge. ``f`` is forced
    to 1 for citations from in-set journals; citations from exogenous
    journals keep an explicit ``f`` or fall back to ``exogenous_f``.
    """
    if exogenous_f not in (0, 1):
        raise GraphValidationError(f"exogenous_f must be 0 or 1, got {exogenous_f!r}")

    inst_by_id: dict[str, InstitutionRecord] = {}
    for inst in institutions:
        if inst.id in inst_by_id:
            raise GraphValidationError(f"duplicate institution id {inst.id!r}")
        if not inst.name:
            raise GraphValidationError(f"institution {inst.id!r} has an empty name")
        inst_by_id[inst.id] = inst

    journal_by_id: dict[str, JournalRecord] = {}
    for j in journals:
        if j.id in journal_by_id:
            raise GraphValidationError(f"duplicate journal id {j.id!r}")
        if j.census_paper_count < 0:
            raise GraphValidationError(f"journal {j.id!r} has negative census_paper_count")
        if j.in_set and j.census_paper_count == 0:
            raise GraphValidationError(f"in-set journal {j.id!r} has census_paper_count = 0")
        journal_by_id[j.id] = j

    work_by_id: dict[str, WorkRecord] = {}
    for w in works:
        if w.id in work_by_id:
            raise GraphValidationError(f"duplicate work id {w.id!r}")
        if w.journal_id not in journal_by_id:
            raise DanglingReferenceError("journal", w.journal_id, f"work {w.id!r}")
        authors = _dedup(w.author_ids)
        if not authors:
            raise GraphValidationError(f"work {w.id!r} has no authors")
        insts = _dedup(w.institution_ids)
        for iid in insts:
            if iid not in inst_by_id:
                raise DanglingReferenceError("institution", iid, f"work {w.id!r}")
        for name in ("page_count", "reference_count"):
            value = getattr(w, name)
            if value is not None and value < 0:
                raise GraphValidationError(f"work {w.id!r} has negative {name}")
        if authors != w.author_ids or insts != w.institution_ids:
            w = WorkRecord(w.id, w.journal_id, w.year, authors, insts, w.page_count, w.reference_count)
        work_by_id[w.id] = w

    pairs: dict[tuple[str, str], int] = {}
    for e in edges:
        if not isinstance(e, CitationEdge):
            e = CitationEdge(*e)
        for wid in (e.citing_work_id, e.cited_work_id):
            if wid not in work_by_id:
                raise DanglingReferenceError("work", wid, f"edge ({e.citing_work_id!r} -> {e.cited_work_id!r})")
        if e.citing_work_id == e.cited_work_id:
            raise GraphValidationError(f"self-citing edge ({e.citing_work_id!r} -> {e.cited_work_id!r})")
        citing_journal = journal_by_id[work_by_id[e.citing_work_id].journal_id]
        if citing_journal.in_set:
            f = 1
        elif e.f is None:
            f = exogenous_f
        else:
            if e.f not in (0, 1):
                raise GraphValidationError(f"edge f must be 0 or 1, got {e.f!r}")
            f = int(e.f)
        key = (e.citing_work_id, e.cited_work_id)
        pairs[key] = max(f, pairs.get(key, 0))

    inst_t = tuple(inst_by_id[k] for k in sorted(inst_by_id))
    journal_t = tuple(journal_by_id[k] for k in sorted(journal_by_id))
    work_t = tuple(work_by_id[k] for k in sorted(work_by_id))
    edge_t = tuple(CitationEdge(c, d, f) for (c, d), f in sorted(pairs.items()))

    graph = CitationGraph(inst_t, journal_t, work_t, edge_t, census_year)
    _index(graph)
    return graph


def _index(graph: CitationGraph) -> None:
    graph._institution_by_id.update((i.id, i) for i in graph.institutions)
    graph._journal_by_id.update((j.id, j) for j in graph.journals)
    graph._work_by_id.update((w.id, w) for w in graph.works)

    incoming: dict[str, list[int]] = defaultdict(list)
    for k, e in enumerate(graph.edges):
        incoming[e.cited_work_id].append(k)
    graph._incoming.update((wid, tuple(ks)) for wid, ks in incoming.items())

    journal_census: dict[str, list[str]] = defaultdict(list)
    author_census: dict[str, list[str]] = defaultdict(list)
    for w in graph.works:
        if graph.is_census_work(w):
            journal_census[w.journal_id].append(w.id)
            for a in w.author_ids:
                author_census[a].append(w.id)
    graph._journal_census.update((k, tuple(v)) for k, v in journal_census.items())
    graph._author_census.update((k, tuple(v)) for k, v in author_census.items())


def incoming_citations(graph: CitationGraph, journal_id: str) -> list[tuple[int, CitationEdge, WorkRecord]]:
    """All citations to census works of an in-set journal as ``(edge_id, edge, citing_work)``.

    Same-journal citations are included. Entries are in ascending edge id.
    """
    try:
        journal = graph.journal(journal_id)
    except KeyError:
        raise GraphValidationError(f"unknown journal id {journal_id!r}") from None
    if not journal.in_set:
        raise GraphValidationError(f"journal {journal_id!r} is exogenous")
    ids = sorted(k for wid in graph.census_works(journal_id) for k in graph.incoming_edges(wid))
    return [(k, graph.edges[k], graph.work(graph.edges[k].citing_work_id)) for k in ids]


# -- JSON Lines dump ---------------------------------------------------------

ENTITY_FILES = {
    "institutions": "institutions.jsonl",
    "journals": "journals.jsonl",
    "works": "works.jsonl",
    "edges": "edges.jsonl",
}


def record_to_dict(record) -> dict:
    d = asdict(record)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return d


def write_jsonl(path: Path, records: Iterable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=False))
            fh.write("\n")


def dump_graph(graph: CitationGraph, directory: str | Path) -> dict[str, Path]:
    """Write one JSON Lines file per entity kind, ordered by id."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for kind, fname in ENTITY_FILES.items():
        p = directory / fname
        write_jsonl(p, getattr(graph, kind))
        paths[kind] = p
    meta = directory / "graph.json"
    meta.write_text(json.dumps({"census_year": graph.census_year}) + "\n", encoding="utf-8")
    paths["meta"] = meta
    return paths
