"""Per-author reputable-citation scores, attenuation flags and tier segmentation."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import CitationGraph, GraphValidationError
from .solver import ConvergedWeights


@dataclass(frozen=True)
class ScoringConfig:
    include_self_citations: bool = True


@dataclass(frozen=True)
class AuthorScore:
    author_id: str
    R_a: int
    L_a: int
    rc: float
    attenuated: bool = False

    @property
    def citations_per_paper(self) -> float:
        return self.L_a / self.R_a


def attenuation_flag(score: AuthorScore) -> bool:
    if score.R_a < 1:
        raise ValueError("attenuation is undefined for an author without census works")
    return score.L_a / score.R_a > score.rc


def _make(author_id: str, r: int, l: int, rc: float) -> AuthorScore:
    s = AuthorScore(author_id, r, l, rc)
    return AuthorScore(author_id, r, l, rc, attenuation_flag(s))


def author_rc(
    author_id: str,
    graph: CitationGraph,
    converged: ConvergedWeights,
    config: ScoringConfig = ScoringConfig(),
) -> AuthorScore:
    """Mean converged weight per census work over every citation to the author's works."""
    works = graph.author_census_works(author_id)
    if not works:
        raise GraphValidationError(f"author {author_id!r} has no census works")
    lookup = dict(zip(converged.edge_ids.tolist(), zip(converged.weights.tolist(), converged.f.tolist())))
    total = 0.0
    count = 0
    for wid in works:
        subtotal = 0.0
        for k in graph.incoming_edges(wid):
            if not config.include_self_citations:
                citing = graph.work(graph.edges[k].citing_work_id)
                if author_id in citing.author_ids:
                    continue
            w, f = lookup[k]
            subtotal += w
            count += int(f)
        total += subtotal
    return _make(author_id, len(works), count, total / len(works))


def score_authors(
    graph: CitationGraph,
    converged: ConvergedWeights,
    config: ScoringConfig = ScoringConfig(),
    authors: Optional[Iterable[str]] = None,
) -> list[AuthorScore]:
    """Score every census author (or the given subset), sorted by author id.

    Vectorised equivalent of calling :func:`author_rc` per author.
    """
    ids = sorted(set(authors)) if authors is not None else list(graph.census_authors)
    for a in ids:
        if not graph.author_census_works(a):
            raise GraphValidationError(f"author {a!r} has no census works")

    work_sum = np.zeros(len(graph.works))
    work_count = np.zeros(len(graph.works), dtype=np.int64)
    if len(converged.edge_ids):
        _, cited, _ = graph.edge_arrays
        tgt = cited[converged.edge_ids]
        work_sum = np.bincount(tgt, weights=converged.weights, minlength=len(graph.works))
        work_count = np.bincount(tgt, weights=converged.f, minlength=len(graph.works)).astype(np.int64)

    wi = graph.work_index
    out = []
    if config.include_self_citations:
        for a in ids:
            works = [wi[w] for w in graph.author_census_works(a)]
            total = 0.0
            for i in works:
                total += work_sum[i]
            out.append(_make(a, len(works), int(work_count[works].sum()), total / len(works)))
        return out
    return [author_rc(a, graph, converged, config) for a in ids]


# -- tiers ---------------------------------------------------------------------


@dataclass(frozen=True)
class TierAssignment:
    ordered: tuple[str, ...]
    tiers: dict[str, int]
    counts: dict[int, dict[str, int]]

    def tier_sizes(self) -> tuple[int, int, int]:
        c = Counter(self.tiers.values())
        return (c[1], c[2], c[3])


def tier_sizes(n: int, k: int = 3) -> list[int]:
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def segment_tiers(scores: Sequence[AuthorScore], labels: Optional[Mapping[str, str]] = None) -> TierAssignment:
    """Split authors sorted by descending rc (ties by id) into three contiguous tiers."""
    if len(scores) < 3:
        raise ValueError(f"need at least 3 authors to segment, got {len(scores)}")
    labels = labels or {}
    ordered = sorted(scores, key=lambda s: (-s.rc, s.author_id))
    tiers: dict[str, int] = {}
    counts: dict[int, dict[str, int]] = {1: {}, 2: {}, 3: {}}
    start = 0
    for t, size in enumerate(tier_sizes(len(ordered)), start=1):
        for s in ordered[start:start + size]:
            tiers[s.author_id] = t
            label = labels.get(s.author_id)
            if label is not None:
                counts[t][label] = counts[t].get(label, 0) + 1
        start += size
    for t in counts:
        counts[t] = dict(sorted(counts[t].items()))
    return TierAssignment(tuple(s.author_id for s in ordered), tiers, counts)


# -- CSV ------------------------------------------------------------------------

AUTHOR_FIELDS = ["author_id", "label", "R_a", "L_a", "citations_per_paper", "rc", "attenuated", "tier"]


def write_authors_csv(
    path: str | Path,
    scores: Sequence[AuthorScore],
    labels: Optional[Mapping[str, str]] = None,
    tiers: Optional[TierAssignment] = None,
) -> None:
    labels = labels or {}
    rows = sorted(scores, key=lambda s: (-s.rc, s.author_id)) if tiers else sorted(scores, key=lambda s: s.author_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUTHOR_FIELDS)
        for s in rows:
            w.writerow([
                s.author_id,
                labels.get(s.author_id, ""),
                s.R_a,
                s.L_a,
                repr(s.citations_per_paper),
                repr(float(s.rc)),
                "true" if s.attenuated else "false",
                tiers.tiers[s.author_id] if tiers else "",
            ])


def read_authors_csv(path: str | Path) -> tuple[list[AuthorScore], dict[str, str]]:
    scores, labels = [], {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            s = AuthorScore(row["author_id"], int(row["R_a"]), int(row["L_a"]), float(row["rc"]))
            scores.append(AuthorScore(s.author_id, s.R_a, s.L_a, s.rc, attenuation_flag(s)))
            if row.get("label"):
                labels[s.author_id] = row["label"]
    return scores, labels


def write_tier_counts_csv(path: str | Path, tiers: TierAssignment) -> None:
    labels = sorted({label for c in tiers.counts.values() for label in c})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tier", "size", *labels])
        sizes = tiers.tier_sizes()
        for t in (1, 2, 3):
            w.writerow([t, sizes[t - 1], *(tiers.counts[t].get(label, 0) for label in labels)])
