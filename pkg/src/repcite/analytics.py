"""Rank correlation, two-sample tests, co-authorship components and summary tables."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx
import numpy as np
from scipy import stats

from .model import CitationGraph


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"paired samples must be 1-d and equal length, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("need at least two pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("Spearman correlation is undefined for a constant vector")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KSResult:
    """Two-sided two-sample Kolmogorov-Smirnov statistic with asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    p = float(stats.kstwobign.sf(en * d)) if d > 0 else 1.0
    return KSResult(d, min(1.0, max(0.0, p)))


# -- co-authorship -------------------------------------------------------------


@dataclass
class ComponentStats:
    members: tuple[str, ...]
    rc_mean: float = math.nan
    rc_sd: float = math.nan

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class CoauthorNetwork:
    vertices: tuple[str, ...]
    edge_weights: dict[tuple[str, str], int]
    components: list[ComponentStats] = field(default_factory=list)

    @property
    def coauthoring(self) -> tuple[str, ...]:
        return tuple(sorted({a for pair in self.edge_weights for a in pair}))


def coauthorship_components(
    graph: CitationGraph,
    sample: Iterable[str],
    rc: Optional[Mapping[str, float]] = None,
) -> CoauthorNetwork:
    """Co-authorship network induced on ``sample``; edge weight is the number of shared works.

    Components are sorted by size (descending), ties by their smallest member.
    When ``rc`` is supplied each component carries the mean and sample
    standard deviation of its members' scores (s.d. is 0 for singletons).
    """
    members = set(sample)
    if not members:
        raise ValueError("sample must be non-empty")
    weights: Counter = Counter()
    for w in graph.works:
        inside = sorted(a for a in w.author_ids if a in members)
        for pair in combinations(inside, 2):
            weights[pair] += 1

    g = nx.Graph()
    g.add_nodes_from(sorted(members))
    g.add_weighted_edges_from((a, b, n) for (a, b), n in sorted(weights.items()))
    comps = [tuple(sorted(c)) for c in nx.connected_components(g)]
    comps.sort(key=lambda c: (-len(c), c[0]))

    out = []
    for c in comps:
        cs = ComponentStats(c)
        if rc is not None:
            values = np.array([rc[a] for a in c], dtype=float)
            cs.rc_mean = float(values.mean())
            cs.rc_sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        out.append(cs)
    return CoauthorNetwork(tuple(sorted(members)), dict(sorted(weights.items())), out)


# -- summary and share tables --------------------------------------------------


@dataclass
class SampleSummary:
    label: str
    articles: int
    journals: int
    coauthors: int
    institutions: int
    mean_citations: float
    mean_authors: float
    mean_institutions: float
    mean_countries: float
    mean_pages: float
    mean_references: float
    mean_references_per_page: float
    country_excluded: int = 0

    def as_row(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SummaryTable:
    samples: dict[str, SampleSummary]
    journal_shares: dict[str, list[tuple[str, float]]]
    institution_shares: dict[str, list[tuple[str, float]]]
    country_shares: dict[str, list[tuple[str, float]]]


ALL = "all"


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def sample_works(graph: CitationGraph, authors: Iterable[str]) -> list:
    """Works with at least one author in ``authors``."""
    members = set(authors)
    return [w for w in graph.works if members.intersection(w.author_ids)]


def _ranked(counter: Counter, total: int, top: Optional[int]) -> list[tuple[str, float]]:
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    if top is not None:
        ranked = ranked[:top]
    return [(k, v / total) for k, v in ranked]


def summary_and_share_tables(
    graph: CitationGraph,
    samples: Mapping[str, Iterable[str]],
    top: Optional[int] = 10,
    include_all: bool = True,
) -> SummaryTable:
    """Per-sample totals, per-work means and ranked share lists.

    A work belongs to a sample when at least one of its authors does, so a
    work can count in several samples. Works whose institutions carry no
    country are left out of the country mean and counted in
    ``country_excluded``.
    """
    citations = Counter(e.cited_work_id for e in graph.edges)
    groups: dict[str, list] = {label: sample_works(graph, authors) for label, authors in samples.items()}
    if include_all:
        groups[ALL] = list(graph.works)

    summaries, jshare, ishare, cshare = {}, {}, {}, {}
    for label, works in groups.items():
        journals = Counter(w.journal_id for w in works)
        insts = Counter(i for w in works for i in set(w.institution_ids))
        countries: Counter = Counter()
        n_countries, excluded = [], 0
        for w in works:
            cs = {graph.institution(i).country for i in w.institution_ids} - {None, ""}
            if cs:
                n_countries.append(len(cs))
                countries.update(cs)
            else:
                excluded += 1
        pages = [w.page_count for w in works if w.page_count is not None]
        refs = [w.reference_count for w in works if w.reference_count is not None]
        rpp = [w.reference_count / w.page_count for w in works if w.reference_count is not None and w.page_count]
        summaries[label] = SampleSummary(
            label=label,
            articles=len(works),
            journals=len(journals),
            coauthors=len({a for w in works for a in w.author_ids}),
            institutions=len(insts),
            mean_citations=_mean([citations[w.id] for w in works]),
            mean_authors=_mean([len(w.author_ids) for w in works]),
            mean_institutions=_mean([len(w.institution_ids) for w in works]),
            mean_countries=_mean(n_countries),
            mean_pages=_mean(pages),
            mean_references=_mean(refs),
            mean_references_per_page=_mean(rpp),
            country_excluded=excluded,
        )
        n = max(len(works), 1)
        jshare[label] = _ranked(journals, n, top)
        ishare[label] = _ranked(insts, n, top)
        cshare[label] = _ranked(countries, n, top)
    return SummaryTable(summaries, jshare, ishare, cshare)


# -- CSV ----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_summary_csv(path: str | Path, table: SummaryTable) -> None:
    labels = list(table.samples)
    rows = [k for k in next(iter(table.samples.values())).as_row() if k != "label"] if labels else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", *labels])
        for key in rows:
            w.writerow([key, *(_fmt(getattr(table.samples[lab], key)) for lab in labels)])


def write_shares_csv(path: str | Path, shares: Mapping[str, list[tuple[str, float]]], key_name: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "rank", key_name, "share"])
        for label, ranked in shares.items():
            for r, (k, share) in enumerate(ranked, start=1):
                w.writerow([label, r, k, repr(share)])


def write_components_csv(path: str | Path, networks: Mapping[str, CoauthorNetwork]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "component", "size", "rc_mean", "rc_sd", "members"])
        for label, net in networks.items():
            for k, c in enumerate(net.components, start=1):
                w.writerow([label, k, c.size, _fmt(c.rc_mean), _fmt(c.rc_sd), " ".join(c.members)])


def pairwise_ks(groups: Mapping[str, Sequence[float]]) -> list[tuple[str, str, KSResult]]:
    out = []
    for (la, a), (lb, b) in combinations(sorted(groups.items()), 2):
        if len(a) and len(b):
            out.append((la, lb, ks_two_sample(a, b)))
    return out


def indicator_correlations(rc: Mapping[str, float], indicators: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    """Spearman correlation of journal rc scores against each indicator column."""
    out = {}
    for name, column in indicators.items():
        keys = sorted(k for k in column if k in rc and column[k] is not None and not math.isnan(column[k]))
        if len(keys) < 2:
            out[name] = math.nan
            continue
        try:
            out[name] = spearman([rc[k] for k in keys], [column[k] for k in keys])
        except ValueError:
            out[name] = math.nan
    return out


def group_by_label(values: Mapping[str, float], labels: Mapping[str, str]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = defaultdict(list)
    for k, v in sorted(values.items()):
        if k in labels:
            out[labels[k]].append(v)
    return dict(out)
