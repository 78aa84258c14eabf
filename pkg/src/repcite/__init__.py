"""Reputable-citation scoring of journals and authors on citation graphs."""

from .model import (
    CitationEdge,
    CitationGraph,
    DanglingReferenceError,
    GraphValidationError,
    InstitutionRecord,
    JournalRecord,
    WorkRecord,
    build_graph,
    dump_graph,
    incoming_citations,
)
from .ingest import ParseError, RankingSourceFile, load_graph, parse_entity_files, parse_ranking_file
from .prestige import PrestigeTable, decile_values, institution_prestige
from .solver import ConvergedWeights, ConvergenceError, JournalScores, SolverConfig, rescale, solve
from .scoring import AuthorScore, ScoringConfig, TierAssignment, author_rc, score_authors, segment_tiers

__version__ = "0.1.0"
