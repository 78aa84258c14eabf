"""Seeded synthetic citation networks with planted honest elites and citation cartels.

Journals carry a latent quality. Works in better journals are more often hosted
by high-prestige institutions, and works from high-prestige institutions cite
better journals more strongly. Baseline citations follow preferential
attachment on running citation counts. Honest elites publish in the best
journals. Cartel members co-author many works in a few weak journals, hosted
at unranked institutions, and each cartel work collects ``cartel_citation_boost``
extra citations from other cartel works.

Every entity class draws from its own random stream, keyed by a fixed label,
so adding a stream never perturbs the others.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .ingest import RankingSourceFile, write_ranking_file
from .model import CitationEdge, InstitutionRecord, JournalRecord, WorkRecord, write_jsonl
from .scoring import AuthorScore, segment_tiers

ELITE = "elite"
CARTEL = "cartel"
BASELINE = "baseline"

_COUNTRIES = ("AU", "BR", "CA", "CH", "CN", "DE", "ES", "FR", "GB", "IN", "IR", "IT", "JP", "KR", "SA", "TR", "TW", "US")


class InfeasibleConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    journal_count: int = 200
    works_per_journal: int = 50
    author_pool: int = 8000
    institution_pool: int = 400
    prestige_profile: float = 0.2
    honest_elite_size: int = 30
    cartel_size: int = 30
    cartel_citation_boost: int = 20
    base_citation_rate: float = 6.0
    exogenous_journal_count: int = 20
    exogenous_works_per_journal: int = 25
    cartel_journal_count: int = 5
    cartel_works_per_member: int = 8
    cartel_authors_per_work: int = 3
    elite_works_per_member: int = 4
    ranking_sources: int = 7
    census_year: int = 2020

    def validate(self) -> None:
        counts = {k: v for k, v in asdict(self).items() if k not in ("seed", "prestige_profile", "base_citation_rate", "census_year")}
        for k, v in counts.items():
            if v < 0:
                raise InfeasibleConfig(f"{k} must be non-negative, got {v}")
        for k in ("journal_count", "works_per_journal", "author_pool", "institution_pool"):
            if getattr(self, k) < 1:
                raise InfeasibleConfig(f"{k} must be positive")
        if not 0 <= self.prestige_profile <= 1:
            raise InfeasibleConfig("prestige_profile must lie in [0, 1]")
        if self.base_citation_rate < 0:
            raise InfeasibleConfig("base_citation_rate must be non-negative")
        if self.cartel_size + self.honest_elite_size > self.author_pool:
            raise InfeasibleConfig(
                f"cartel_size + honest_elite_size = {self.cartel_size + self.honest_elite_size} exceeds author_pool = {self.author_pool}"
            )
        if not 0 <= self.seed < 2**64:
            raise InfeasibleConfig("seed must be a 64-bit unsigned integer")
        if self.cartel_size:
            if self.cartel_authors_per_work < 1 or self.cartel_authors_per_work > self.cartel_size:
                raise InfeasibleConfig("cartel_authors_per_work must lie in [1, cartel_size]")
            if self.cartel_journal_count < 1 or self.cartel_journal_count > self.journal_count:
                raise InfeasibleConfig("cartel_journal_count must lie in [1, journal_count]")
            if self._cartel_work_count() > self.cartel_journal_count * self.works_per_journal:
                raise InfeasibleConfig("cartel works do not fit in the cartel journals")
            if self.cartel_citation_boost > self._cartel_work_count() - 1:
                raise InfeasibleConfig("cartel_citation_boost exceeds the number of other cartel works")
        if self.honest_elite_size and self.elite_works_per_member > self._top_slots():
            raise InfeasibleConfig("elite works do not fit in the top journals")

    def _cartel_work_count(self) -> int:
        if not self.cartel_size:
            return 0
        return -(-self.cartel_size * self.cartel_works_per_member // self.cartel_authors_per_work)

    def _top_slots(self) -> int:
        return max(1, self.journal_count // 10) * self.works_per_journal


@dataclass
class SynthData:
    institutions: list[InstitutionRecord]
    journals: list[JournalRecord]
    works: list[WorkRecord]
    edges: list[CitationEdge]
    rankings: list[RankingSourceFile]
    census_year: int


@dataclass
class GroundTruth:
    labels: dict[str, str]
    cartel_journals: tuple[str, ...] = ()
    cartel_works: tuple[str, ...] = ()
    elite_works: tuple[str, ...] = ()

    def members(self, label: str) -> list[str]:
        return sorted(a for a, lab in self.labels.items() if lab == label)


def _stream(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(label.encode())]))


def _sample_targets(rng, cum: np.ndarray, k: int, exclude: int) -> list[int]:
    """``k`` distinct indices drawn proportionally to the weights behind ``cum``."""
    total = cum[-1]
    chosen: dict[int, None] = {}
    tries = 0
    while len(chosen) < k and tries < 20:
        draws = np.searchsorted(cum, rng.random(2 * (k - len(chosen)) + 2) * total, side="right")
        for d in draws.tolist():
            if d != exclude and d < len(cum):
                chosen.setdefault(d)
                if len(chosen) == k:
                    break
        tries += 1
    return list(chosen)


def generate_network(config: SynthConfig) -> tuple[SynthData, GroundTruth]:
    config.validate()
    seed = config.seed
    year = config.census_year

    # institutions: index order is latent quality order (0 = best)
    rng = _stream(seed, "institutions")
    n_inst = config.institution_pool
    n_high = int(round(config.prestige_profile * n_inst))
    inst_ids = [f"I{i:05d}" for i in range(n_inst)]
    institutions = [
        InstitutionRecord(iid, f"Institution {i}", _COUNTRIES[int(c)])
        for i, (iid, c) in enumerate(zip(inst_ids, rng.integers(0, len(_COUNTRIES), n_inst)))
    ]
    high_pool = np.arange(n_high) if n_high else np.arange(n_inst)
    # the bottom half of the institutions is never ranked by any source
    ranked_count = max(n_high, n_inst // 2)
    low_pool = np.arange(n_high, n_inst) if n_high < n_inst else np.arange(n_inst)
    unranked_pool = np.arange(ranked_count, n_inst) if ranked_count < n_inst else low_pool

    rng = _stream(seed, "rankings")
    rankings = []
    for s in range(config.ranking_sources):
        noisy = np.arange(ranked_count) + rng.normal(0, 0.1 * ranked_count, ranked_count)
        listed = int(rng.integers(max(1, ranked_count // 2), ranked_count + 1))
        order = np.argsort(noisy, kind="stable")[:listed]
        rankings.append(RankingSourceFile(f"source{s + 1}", tuple((r, inst_ids[i]) for r, i in enumerate(order, start=1))))

    # journals: J00000 is the best in-set journal
    rng = _stream(seed, "journals")
    n_j = config.journal_count
    quality = 1.0 - np.arange(n_j) / max(n_j - 1, 1)
    journals = [JournalRecord(f"J{j:05d}", f"Journal {j}", True, config.works_per_journal) for j in range(n_j)]
    journals += [JournalRecord(f"X{j:05d}", f"Exogenous journal {j}", False, 0) for j in range(config.exogenous_journal_count)]
    cartel_journals: list[int] = []
    if config.cartel_size:
        lower = np.arange(n_j // 2, n_j) if n_j >= 2 * config.cartel_journal_count else np.arange(n_j)
        cartel_journals = sorted(rng.choice(lower, size=config.cartel_journal_count, replace=False).tolist())
    n_top = max(1, n_j // 10)

    # census works, laid out journal by journal
    n_census = n_j * config.works_per_journal
    work_journal = np.repeat(np.arange(n_j), config.works_per_journal)
    slot_kind = np.zeros(n_census, dtype=np.int8)  # 0 baseline, 1 elite, 2 cartel

    rng = _stream(seed, "cartel")
    n_cartel_works = config._cartel_work_count()
    cartel_slots: list[int] = []
    cartel_ids = [f"C{a:04d}" for a in range(config.cartel_size)]
    if n_cartel_works:
        slots = np.concatenate([np.arange(j * config.works_per_journal, (j + 1) * config.works_per_journal) for j in cartel_journals])
        cartel_slots = sorted(rng.choice(slots, size=n_cartel_works, replace=False).tolist())
        slot_kind[cartel_slots] = 2

    rng_elite = _stream(seed, "elite")
    elite_ids = [f"E{a:04d}" for a in range(config.honest_elite_size)]
    elite_slots: list[int] = []
    n_elite_works = config.honest_elite_size * config.elite_works_per_member
    if n_elite_works:
        top_slots = np.arange(n_top * config.works_per_journal)
        top_slots = top_slots[slot_kind[top_slots] == 0]
        elite_slots = sorted(rng_elite.choice(top_slots, size=min(n_elite_works, len(top_slots)), replace=False).tolist())
        slot_kind[elite_slots] = 1

    rng_auth = _stream(seed, "authors")
    n_base_authors = config.author_pool - config.cartel_size - config.honest_elite_size
    base_ids = [f"A{a:05d}" for a in range(n_base_authors)]
    rng_aff = _stream(seed, "affiliations")

    def pick_institutions(q: float, k: int) -> tuple[str, ...]:
        p_high = 0.05 + 0.9 * q**2
        picks = []
        for _ in range(k):
            pool = high_pool if rng_aff.random() < p_high else low_pool
            picks.append(inst_ids[int(pool[rng_aff.integers(len(pool))])])
        return tuple(dict.fromkeys(picks))

    # author groups come from reshuffled rounds over the cartel, so members
    # share works with many partners and the cartel forms one connected cluster
    cartel_authors: dict[int, tuple[str, ...]] = {}
    queue: list[int] = []
    for slot in cartel_slots:
        group: list[int] = []
        while len(group) < config.cartel_authors_per_work:
            if not queue:
                queue = rng.permutation(config.cartel_size).tolist()
            m = queue.pop()
            if m not in group:
                group.append(m)
        cartel_authors[slot] = tuple(cartel_ids[m] for m in sorted(group))
    elite_authors = {slot: elite_ids[k % config.honest_elite_size] for k, slot in enumerate(elite_slots)} if elite_slots else {}

    census_ids = [f"W{i:06d}" for i in range(n_census)]
    works: list[WorkRecord] = []
    high_citer = np.zeros(n_census, dtype=bool)
    for i in range(n_census):
        q = float(quality[work_journal[i]])
        n_auth = int(rng_auth.integers(1, 5))
        n_aff = int(rng_aff.integers(1, 4))
        if slot_kind[i] == 2:
            authors = cartel_authors[i]
            insts = tuple(dict.fromkeys(inst_ids[int(unranked_pool[rng_aff.integers(len(unranked_pool))])] for _ in range(n_aff)))
        elif slot_kind[i] == 1:
            others = [base_ids[int(x)] for x in rng_auth.integers(0, n_base_authors, n_auth - 1)] if n_base_authors else []
            authors = tuple(dict.fromkeys([elite_authors[i], *others]))
            insts = tuple(dict.fromkeys(inst_ids[int(high_pool[rng_aff.integers(len(high_pool))])] for _ in range(n_aff)))
        else:
            if n_base_authors:
                authors = tuple(dict.fromkeys(base_ids[int(x)] for x in rng_auth.integers(0, n_base_authors, n_auth)))
            else:
                authors = (elite_ids + cartel_ids)[:1]
            insts = pick_institutions(q, n_aff)
        high_citer[i] = any(int(x[1:]) < n_high for x in insts)
        works.append(WorkRecord(census_ids[i], journals[work_journal[i]].id, year, authors, insts))

    rng_exo = _stream(seed, "exogenous")
    exo_works: list[WorkRecord] = []
    for j in range(config.exogenous_journal_count):
        for m in range(config.exogenous_works_per_journal):
            n_auth = int(rng_exo.integers(1, 5))
            authors = tuple(f"XA{int(x):05d}" for x in sorted(set(rng_exo.integers(0, 10 * max(1, config.exogenous_journal_count * config.exogenous_works_per_journal), n_auth).tolist())))
            insts = (inst_ids[int(rng_exo.integers(n_inst))],)
            exo_works.append(WorkRecord(f"Y{j:05d}{m:05d}", f"X{j:05d}", year + 1, authors, insts))

    # baseline citations: preferential attachment, refreshed per batch
    rng = _stream(seed, "citations")
    q_work = quality[work_journal]
    attract_low = 0.2 + q_work
    attract_high = (0.2 + q_work) * (1.0 + 4.0 * q_work**2)
    for a in (attract_low, attract_high):
        a[np.asarray(cartel_slots, dtype=np.int64)] *= 0.05
    counts = np.zeros(n_census)
    citers = [(i, bool(high_citer[i])) for i in range(n_census)]
    citers += [(n_census + k, False) for k in range(len(exo_works))]
    order = rng.permutation(len(citers))
    edges: set[tuple[int, int]] = set()
    batch = 256
    all_ids = census_ids + [w.id for w in exo_works]
    for start in range(0, len(order), batch):
        cum_low = np.cumsum((1.0 + counts) * attract_low)
        cum_high = np.cumsum((1.0 + counts) * attract_high)
        for idx in order[start:start + batch].tolist():
            citing, is_high = citers[idx]
            k = min(int(rng.poisson(config.base_citation_rate)), n_census - 1)
            if k == 0:
                continue
            for t in _sample_targets(rng, cum_high if is_high else cum_low, k, citing):
                edges.add((citing, t))
                counts[t] += 1

    # cartel citations: each cartel work is cited by `boost` other cartel works
    rng = _stream(seed, "cartel-citations")
    boost = config.cartel_citation_boost
    if n_cartel_works and boost:
        pool = np.asarray(cartel_slots)
        for target in cartel_slots:
            candidates = [int(c) for c in rng.permutation(pool) if c != target and (int(c), target) not in edges]
            if len(candidates) < boost:
                raise InfeasibleConfig("not enough cartel works to place the citation boost")
            for c in candidates[:boost]:
                edges.add((c, target))

    edge_list = [CitationEdge(all_ids[c], all_ids[t], None) for c, t in sorted(edges)]
    labels = {}
    census_authors = {a for w in works for a in w.author_ids}
    for a in sorted(census_authors):
        labels[a] = ELITE if a.startswith("E") else CARTEL if a.startswith("C") else BASELINE
    truth = GroundTruth(
        labels,
        tuple(journals[j].id for j in cartel_journals),
        tuple(census_ids[s] for s in cartel_slots),
        tuple(census_ids[s] for s in elite_slots),
    )
    data = SynthData(institutions, journals, works + exo_works, edge_list, rankings, year)
    return data, truth


def write_synth(directory: str | Path, data: SynthData, truth: GroundTruth) -> dict[str, Path]:
    """Write entity JSON Lines, ranking CSVs and the label file; returns the paths."""
    directory = Path(directory)
    (directory / "rankings").mkdir(parents=True, exist_ok=True)
    paths = {}
    for kind in ("institutions", "journals", "works", "edges"):
        p = directory / f"{kind}.jsonl"
        write_jsonl(p, sorted(getattr(data, kind), key=lambda r: getattr(r, "id", None) or (r.citing_work_id, r.cited_work_id)))
        paths[kind] = p
    for source in data.rankings:
        p = directory / "rankings" / f"{source.source_name}.csv"
        write_ranking_file(p, source)
        paths[f"ranking:{source.source_name}"] = p
    p = directory / "labels.csv"
    write_labels_csv(p, truth.labels)
    paths["labels"] = p
    meta = directory / "graph.json"
    meta.write_text(f'{{"census_year": {data.census_year}}}\n', encoding="utf-8")
    paths["meta"] = meta
    return paths


def write_labels_csv(path: str | Path, labels: Mapping[str, str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author_id", "label"])
        for a in sorted(labels):
            w.writerow([a, labels[a]])


def read_labels_csv(path: str | Path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["author_id"]: row["label"] for row in csv.DictReader(fh)}


# -- separation report ---------------------------------------------------------


@dataclass
class SeparationReport:
    tier_counts: dict[int, dict[str, int]]
    cartel_attenuated_fraction: float
    cartel_bottom_tier_fraction: float
    elite_top_tier_fraction: float
    cartel_top_raw_decile_fraction: float
    population: int = 0
    extra: dict = field(default_factory=dict)


def _fraction(hits: int, total: int) -> float:
    return hits / total if total else float("nan")


def ground_truth_separation(scores: Sequence[AuthorScore], truth: GroundTruth | Mapping[str, str]) -> SeparationReport:
    """Tier counts per planted label plus the screening fractions for cartel and elite members.

    Tiers are formed over every scored author. The raw-citation decile uses
    the total citation count ``L_a``.
    """
    labels = truth.labels if isinstance(truth, GroundTruth) else dict(truth)
    by_id = {s.author_id: s for s in scores}
    missing = sorted(a for a in labels if a not in by_id)
    if missing:
        raise ValueError(f"{len(missing)} labeled authors are unscored, e.g. {missing[0]!r}")
    tiers = segment_tiers(list(scores), labels)
    cartel = [a for a, lab in labels.items() if lab == CARTEL]
    elite = [a for a, lab in labels.items() if lab == ELITE]
    raw = np.array([s.L_a for s in scores], dtype=float)
    cutoff = np.quantile(raw, 0.9) if len(raw) else 0.0
    counts = {t: {lab: tiers.counts[t].get(lab, 0) for lab in (ELITE, CARTEL, BASELINE)} for t in (1, 2, 3)}
    return SeparationReport(
        tier_counts=counts,
        cartel_attenuated_fraction=_fraction(sum(by_id[a].attenuated for a in cartel), len(cartel)),
        cartel_bottom_tier_fraction=_fraction(sum(tiers.tiers[a] == 3 for a in cartel), len(cartel)),
        elite_top_tier_fraction=_fraction(sum(tiers.tiers[a] == 1 for a in elite), len(elite)),
        cartel_top_raw_decile_fraction=_fraction(sum(by_id[a].L_a >= cutoff for a in cartel), len(cartel)),
        population=len(scores),
    )
