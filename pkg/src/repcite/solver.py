"""Journal prestige by rescaled fixed-point iteration.

Each iteration weights every citation to a census work by the citing work's
institutional prestige times the citing journal's current score, sums the
weights per cited journal, divides by the journal's census paper count, and
maps the result affinely onto ``[scale_min, scale_max]``. Iteration stops
when the mean rescaled score moves by less than ``tolerance``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional

import numpy as np

from .model import CitationEdge, CitationGraph, GraphValidationError, incoming_citations
from .prestige import PrestigeTable

logger = logging.getLogger(__name__)

INCLUDE = "include"
EXCLUDE = "exclude"


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, final_delta: float, trace: list[float]):
        self.iterations = iterations
        self.final_delta = final_delta
        self.trace = trace
        super().__init__(f"no convergence after {iterations} iterations (final mean delta {final_delta:.3e})")


@dataclass(frozen=True)
class SolverConfig:
    use_institutional_prestige: bool = True
    exogenous_mode: str = EXCLUDE
    affiliation_combine: str = "mean"
    scale_min: float = 0.05
    scale_max: float = 10.0
    tolerance: float = 1e-4
    max_iterations: int = 1000

    def __post_init__(self):
        if self.exogenous_mode not in (INCLUDE, EXCLUDE):
            raise ValueError(f"exogenous_mode must be 'include' or 'exclude', got {self.exogenous_mode!r}")
        if self.affiliation_combine not in ("mean", "max"):
            raise ValueError(f"affiliation_combine must be 'mean' or 'max', got {self.affiliation_combine!r}")
        if not 0 < self.scale_min < self.scale_max:
            raise ValueError("require 0 < scale_min < scale_max")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    @property
    def exogenous_f(self) -> int:
        return 1 if self.exogenous_mode == INCLUDE else 0

    def to_keyvalue(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SolverConfig":
        kwargs = {}
        for name, f in cls.__dataclass_fields__.items():
            if name not in values:
                continue
            v = values[name]
            if f.type in ("bool", bool) and isinstance(v, str):
                low = v.strip().lower()
                if low not in ("true", "false"):
                    raise ValueError(f"{name} must be true or false, got {v!r}")
                v = low == "true"
            elif f.type in ("float", float):
                v = float(v)
            elif f.type in ("int", int):
                v = int(v)
            kwargs[name] = v
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def from_keyvalue_file(cls, path: str | Path) -> "SolverConfig":
        values = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            values[k.strip().replace("-", "_")] = v.strip()
        return cls.from_mapping(values)


@dataclass
class JournalScores:
    scores: dict[str, float]
    iteration_count: int
    trace: list[float]
    max_deltas: list[float] = field(default_factory=list)
    final_delta: float = math.nan

    def as_array(self, journal_ids) -> np.ndarray:
        return np.array([self.scores[j] for j in journal_ids])


@dataclass
class ConvergedWeights:
    """Converged weight of every citation to a census work.

    ``edge_ids`` index ``graph.edges``; ``f`` is the effective gate used.
    """

    edge_ids: np.ndarray
    weights: np.ndarray
    f: np.ndarray
    config: SolverConfig

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(w) for k, w in zip(self.edge_ids, self.weights)}

    def scaled(self, c: float) -> "ConvergedWeights":
        return ConvergedWeights(self.edge_ids, self.weights * c, self.f, self.config)


# -- scalar reference path -----------------------------------------------------


def effective_f(edge: CitationEdge, graph: CitationGraph, config: SolverConfig) -> int:
    citing_journal = graph.journal(graph.work(edge.citing_work_id).journal_id)
    return 1 if citing_journal.in_set else config.exogenous_f


def institution_factor(institution_ids, table: Optional[PrestigeTable], config: SolverConfig) -> float:
    if not config.use_institutional_prestige:
        return 1.0
    table = table or PrestigeTable({}, 0)
    if not institution_ids:
        return table.floor
    values = [table.get(i) for i in institution_ids]
    if config.affiliation_combine == "max":
        return max(values)
    return math.fsum(values) / len(values)


def citation_weight(
    edge: CitationEdge,
    graph: CitationGraph,
    prestige_table: Optional[PrestigeTable],
    journal_scores: Mapping[str, float],
    config: SolverConfig,
) -> float:
    cited_journal = graph.journal(graph.work(edge.cited_work_id).journal_id)
    if not cited_journal.in_set:
        raise GraphValidationError(f"cited journal {cited_journal.id!r} is exogenous")
    citing = graph.work(edge.citing_work_id)
    if graph.journal(citing.journal_id).in_set:
        w = institution_factor(citing.institution_ids, prestige_table, config) * journal_scores[citing.journal_id]
        return w
    return 1.0 * config.exogenous_f


def journal_update(
    journal_id: str,
    graph: CitationGraph,
    prestige_table: Optional[PrestigeTable],
    journal_scores: Mapping[str, float],
    config: SolverConfig,
) -> float:
    journal = graph.journal(journal_id)
    if journal.census_paper_count < 1:
        raise GraphValidationError(f"journal {journal_id!r} has no census papers")
    total = 0.0
    for _, edge, _ in incoming_citations(graph, journal_id):
        total += citation_weight(edge, graph, prestige_table, journal_scores, config)
    return total / journal.census_paper_count


def rescale(raw_scores, config: SolverConfig = SolverConfig()):
    """Affine map of raw scores onto ``[scale_min, scale_max]``.

    Accepts an array or a mapping and returns the same kind. Equal inputs
    map to the midpoint of the range.
    """
    if isinstance(raw_scores, Mapping):
        keys = list(raw_scores)
        out = rescale(np.array([raw_scores[k] for k in keys], dtype=float), config)
        return dict(zip(keys, out.tolist()))
    raw = np.asarray(raw_scores, dtype=float)
    if raw.size == 0:
        raise ValueError("cannot rescale an empty score vector")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw scores must be finite")
    if np.any(raw < 0):
        raise ValueError("raw scores must be non-negative")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.full_like(raw, (config.scale_min + config.scale_max) / 2)
    out = config.scale_min + (config.scale_max - config.scale_min) * ((raw - lo) / (hi - lo))
    out[raw == lo] = config.scale_min
    out[raw == hi] = config.scale_max
    return out


# -- vectorised production path -------------------------------------------------


@dataclass
class FlowSystem:
    """Arrays describing every citation that carries prestige into the journal set."""

    journal_ids: list[str]
    edge_ids: np.ndarray
    target: np.ndarray
    citing_journal: np.ndarray
    inst_factor: np.ndarray
    f: np.ndarray
    paper_counts: np.ndarray

    def weights(self, scores: np.ndarray) -> np.ndarray:
        in_set = self.citing_journal >= 0
        journal_term = np.where(in_set, scores[np.where(in_set, self.citing_journal, 0)], 1.0)
        return np.where(in_set, self.inst_factor * journal_term, 1.0) * self.f

    def update(self, scores: np.ndarray) -> np.ndarray:
        sums = np.bincount(self.target, weights=self.weights(scores), minlength=len(self.journal_ids))
        return sums / self.paper_counts


def flow_system(graph: CitationGraph, prestige_table: Optional[PrestigeTable], config: SolverConfig) -> FlowSystem:
    journals = graph.in_set_journals
    if not journals:
        raise GraphValidationError("graph has no in-set journals")
    journal_ids = [j.id for j in journals]
    jpos = {jid: k for k, jid in enumerate(journal_ids)}

    work_journal = np.array([jpos.get(w.journal_id, -1) for w in graph.works], dtype=np.int64)
    citing, cited, _ = graph.edge_arrays
    flowing = graph.census_mask[cited] if len(cited) else np.zeros(0, dtype=bool)
    edge_ids = np.nonzero(flowing)[0]
    citing = citing[edge_ids]
    citing_journal = work_journal[citing]

    cache: dict[int, float] = {}
    inst = np.empty(len(edge_ids))
    for k, wi in enumerate(citing.tolist()):
        v = cache.get(wi)
        if v is None:
            v = cache[wi] = institution_factor(graph.works[wi].institution_ids, prestige_table, config)
        inst[k] = v

    f = np.where(citing_journal >= 0, 1.0, float(config.exogenous_f))
    return FlowSystem(
        journal_ids=journal_ids,
        edge_ids=edge_ids,
        target=work_journal[cited[edge_ids]],
        citing_journal=citing_journal,
        inst_factor=inst,
        f=f,
        paper_counts=np.array([j.census_paper_count for j in journals], dtype=float),
    )


@dataclass
class IterationState:
    k: int
    raw: np.ndarray
    scores: np.ndarray
    mean_delta: float
    max_delta: float


def iterate(
    graph: CitationGraph,
    prestige_table: Optional[PrestigeTable] = None,
    config: SolverConfig = SolverConfig(),
    system: Optional[FlowSystem] = None,
) -> Iterator[IterationState]:
    """Yield the state after each update-then-rescale step, without stopping."""
    system = system or flow_system(graph, prestige_table, config)
    scores = np.ones(len(system.journal_ids))
    k = 0
    while True:
        k += 1
        raw = system.update(scores)
        new = rescale(raw, config)
        yield IterationState(
            k,
            raw,
            new,
            abs(float(new.mean()) - float(scores.mean())),
            float(np.max(np.abs(new - scores))),
        )
        scores = new


def solve(
    graph: CitationGraph,
    prestige_table: Optional[PrestigeTable] = None,
    config: SolverConfig = SolverConfig(),
) -> tuple[JournalScores, ConvergedWeights]:
    system = flow_system(graph, prestige_table, config)
    trace: list[float] = []
    max_deltas: list[float] = []
    for state in iterate(graph, prestige_table, config, system):
        trace.append(float(state.scores.mean()))
        max_deltas.append(state.max_delta)
        if state.mean_delta < config.tolerance:
            break
        if state.k >= config.max_iterations:
            raise ConvergenceError(state.k, state.mean_delta, trace)
    logger.info("converged after %d iterations (mean delta %.3e)", state.k, state.mean_delta)

    scores = JournalScores(
        dict(zip(system.journal_ids, state.scores.tolist())),
        state.k,
        trace,
        max_deltas,
        state.mean_delta,
    )
    weights = ConvergedWeights(system.edge_ids, system.weights(state.scores), system.f, config)
    return scores, weights


def converged_weights(
    graph: CitationGraph,
    prestige_table: Optional[PrestigeTable],
    scores: Mapping[str, float],
    config: SolverConfig = SolverConfig(),
) -> ConvergedWeights:
    """Citation weights evaluated at previously computed journal scores."""
    system = flow_system(graph, prestige_table, config)
    vec = np.array([scores[j] for j in system.journal_ids], dtype=float)
    return ConvergedWeights(system.edge_ids, system.weights(vec), system.f, config)
