"""Institutional prestige from ranking deciles.

Each ranking source assigns its listed institutions a decile value in
``{1.0, 0.9, ..., 0.1}``; an institution's prestige is a floor of 1.0 plus the
sum of its decile values over all sources.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import RankingSourceFile

FLOOR = 1.0


def decile_of(rank: int, n: int) -> int:
    """1-based decile for position ``rank`` among ``n`` listed entries."""
    return -(-10 * rank // n)  # integer ceil(10 r / n)


def decile_value(rank: int, n: int) -> float:
    # round() keeps 1.0 - 0.1*k free of binary noise (0.7000000000000001 etc.)
    return round(1.0 - 0.1 * (decile_of(rank, n) - 1), 10)


def decile_values(source: RankingSourceFile) -> dict[str, float]:
    """Map each institution in ``source`` to its decile value.

    Listed ranks are used as positions. With gaps in the ranks the list is
    taken to span positions ``1..max_rank``, so ``n`` is the largest rank.
    """
    if not source.entries:
        raise ValueError(f"ranking source {source.source_name!r} is empty")
    n = source.entries[-1][0]
    return {iid: decile_value(rank, n) for rank, iid in source.entries}


@dataclass(frozen=True)
class PrestigeTable:
    scores: Mapping[str, float]
    source_count: int
    floor: float = FLOOR

    def __getitem__(self, institution_id: str) -> float:
        return self.scores.get(institution_id, self.floor)

    def get(self, institution_id: str) -> float:
        return self.scores.get(institution_id, self.floor)

    def __len__(self) -> int:
        return len(self.scores)

    def scaled(self, c: float) -> "PrestigeTable":
        """Every value (floor included) multiplied by ``c``."""
        if not c > 0:
            raise ValueError("scale factor must be positive")
        return PrestigeTable({k: v * c for k, v in self.scores.items()}, self.source_count, self.floor * c)

    @property
    def upper_bound(self) -> float:
        return self.floor * (1.0 + self.source_count)


def institution_prestige(sources: Sequence[RankingSourceFile], universe: Iterable[str]) -> PrestigeTable:
    """Aggregate decile values over ``sources`` for every institution in ``universe``.

    Institutions absent from every source score exactly 1.0.
    """
    if not sources:
        raise ValueError("at least one ranking source is required")
    universe = set(universe)
    totals = {iid: 0.0 for iid in universe}
    # Sum in a fixed source order so the table does not depend on argument order.
    for source in sorted(sources, key=lambda s: (s.source_name, s.entries)):
        for iid, value in decile_values(source).items():
            if iid not in universe:
                raise ValueError(f"ranking source {source.source_name!r} lists unknown institution {iid!r}")
            totals[iid] += value
    scores = {iid: round(FLOOR + t, 10) for iid, t in sorted(totals.items())}
    return PrestigeTable(scores, len(sources))


def write_prestige_csv(path: str | Path, table: PrestigeTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["institution_id", "prestige"])
        for iid in sorted(table.scores):
            w.writerow([iid, repr(float(table.scores[iid]))])


def read_prestige_csv(path: str | Path, source_count: int = 0) -> PrestigeTable:
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            value = float(row["prestige"])
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{path}: invalid prestige {row['prestige']!r} for {row['institution_id']!r}")
            scores[row["institution_id"]] = value
    return PrestigeTable(scores, source_count)
