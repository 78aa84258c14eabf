"""Batch command line: ingest, fetch, prestige, solve, score, segment, report, synth.

Every subcommand writes its CSV / JSON Lines outputs plus ``manifest.json``
into ``--out``. The manifest is written on failure too, tagged with the
stage that failed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from . import __version__
from .analytics import (
    coauthorship_components,
    group_by_label,
    indicator_correlations,
    pairwise_ks,
    summary_and_share_tables,
    write_components_csv,
    write_shares_csv,
    write_summary_csv,
)
from .ingest import parse_entity_files, parse_jsonl, parse_ranking_file
from .model import build_graph, dump_graph
from .openalex import BASE_URL_ENV, FetchSpec, OpenAlexClient, fetch_openalex_works
from .prestige import PrestigeTable, institution_prestige, read_prestige_csv, write_prestige_csv
from .scoring import (
    ScoringConfig,
    read_authors_csv,
    score_authors,
    segment_tiers,
    write_authors_csv,
    write_tier_counts_csv,
)
from .solver import EXCLUDE, INCLUDE, SolverConfig, converged_weights, solve
from .synth import SynthConfig, generate_network, read_labels_csv, write_synth

logger = logging.getLogger("repcite")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(message)


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    def __init__(self, command: str, out: Path, config: dict):
        self.out = out
        self.manifest = {
            "command": command,
            "tool_version": __version__,
            "started_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "config": config,
            "inputs": {},
            "outputs": {},
            "timings": {},
            "status": "running",
        }
        self.stage = "setup"

    def record_inputs(self, *paths):
        for p in paths:
            if p is None:
                continue
            p = Path(p)
            if not p.exists():
                raise StageError("inputs", f"missing input file {p}")
            self.manifest["inputs"][str(p)] = sha256(p)

    def record_output(self, path: Path):
        self.manifest["outputs"][str(Path(path).relative_to(self.out))] = sha256(path)

    @contextmanager
    def stage_timer(self, name: str):
        self.stage = name
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.manifest["timings"][name] = round(time.perf_counter() - t0, 6)

    def finish(self, error: Optional[BaseException] = None):
        if error is None:
            self.manifest["status"] = "ok"
        else:
            self.manifest["status"] = "error"
            self.manifest["error_stage"] = getattr(error, "stage", self.stage)
            self.manifest["error"] = str(error)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- argument helpers ------------------------------------------------------------


def _bool(value: str) -> bool:
    low = value.strip().lower()
    if low not in ("true", "false"):
        raise argparse.ArgumentTypeError("expected true or false")
    return low == "true"


def _add_graph_args(p):
    g = p.add_argument_group("graph inputs")
    g.add_argument("--data", type=Path, help="directory holding the four entity .jsonl files")
    g.add_argument("--journals", type=Path)
    g.add_argument("--works", type=Path)
    g.add_argument("--edges", type=Path)
    g.add_argument("--institutions", type=Path)
    g.add_argument("--census-year", type=int, default=None)


def _add_prestige_args(p):
    p.add_argument("--rankings", type=Path, nargs="+", default=[], metavar="CSV")
    p.add_argument("--prestige", type=Path, help="precomputed institution_id,prestige CSV")


def _add_solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--config", type=Path, help="key=value solver configuration file")
    g.add_argument("--use-institutional-prestige", type=_bool, metavar="{true,false}")
    g.add_argument("--exogenous", choices=[INCLUDE, EXCLUDE])
    g.add_argument("--affiliation-combine", choices=["mean", "max"])
    g.add_argument("--scale-min", type=float)
    g.add_argument("--scale-max", type=float)
    g.add_argument("--tolerance", type=float)
    g.add_argument("--max-iterations", type=int)


def _solver_config(args) -> SolverConfig:
    values = {}
    if args.config:
        values.update(SolverConfig.from_keyvalue_file(args.config).__dict__)
    overrides = {
        "use_institutional_prestige": args.use_institutional_prestige,
        "exogenous_mode": args.exogenous,
        "affiliation_combine": args.affiliation_combine,
        "scale_min": args.scale_min,
        "scale_max": args.scale_max,
        "tolerance": args.tolerance,
        "max_iterations": args.max_iterations,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**values)


def _graph_paths(args) -> list[Path]:
    if args.data:
        d = args.data
        defaults = {"journals": d / "journals.jsonl", "works": d / "works.jsonl", "edges": d / "edges.jsonl", "institutions": d / "institutions.jsonl"}
    else:
        defaults = {}
    paths = []
    for name in ("journals", "works", "edges", "institutions"):
        p = getattr(args, name) or defaults.get(name)
        if p is None:
            raise StageError("inputs", f"--{name} (or --data) is required")
        paths.append(p)
    return paths


def _load_graph(run: Run, args, exogenous_f: int = 0):
    paths = _graph_paths(args)
    run.record_inputs(*paths)
    census_year = args.census_year
    if census_year is None and args.data and (args.data / "graph.json").exists():
        census_year = json.loads((args.data / "graph.json").read_text(encoding="utf-8")).get("census_year")
    with run.stage_timer("ingest"):
        raw = parse_entity_files(*paths)
        graph = build_graph(raw["institutions"], raw["journals"], raw["works"], raw["edges"], census_year, exogenous_f)
    logger.info("loaded %r", graph)
    return graph


def _load_prestige(run: Run, args, graph, required: bool) -> Optional[PrestigeTable]:
    with run.stage_timer("prestige"):
        if args.prestige:
            run.record_inputs(args.prestige)
            return read_prestige_csv(args.prestige)
        if args.rankings:
            run.record_inputs(*args.rankings)
            sources = [parse_ranking_file(p) for p in args.rankings]
            return institution_prestige(sources, [i.id for i in graph.institutions])
    if required:
        logger.warning("no rankings or prestige table given; every institution scores 1.0")
    return None


def _write(run: Run, name: str) -> Path:
    run.out.mkdir(parents=True, exist_ok=True)
    return run.out / name


def _read_journal_scores(path: Path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["journal_id"]: float(row["rc_score"]) for row in csv.DictReader(fh)}


def _write_scores(run: Run, scores, cfg: SolverConfig):
    p = _write(run, "journal_scores.csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["journal_id", "rc_score", "iterations"])
        for jid in sorted(scores.scores):
            w.writerow([jid, repr(scores.scores[jid]), scores.iteration_count])
    run.record_output(p)
    p = _write(run, "trace.csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_score", "max_delta"])
        for k, (m, d) in enumerate(zip(scores.trace, scores.max_deltas), start=1):
            w.writerow([k, repr(m), repr(d)])
    run.record_output(p)
    p = _write(run, "solver.cfg")
    p.write_text(cfg.to_keyvalue(), encoding="utf-8")
    run.record_output(p)


def _warn_exogenous(graph, cfg: SolverConfig):
    if cfg.exogenous_mode == INCLUDE and all(j.in_set for j in graph.journals):
        logger.warning("exogenous citations are included but the graph has no exogenous journals")


# -- subcommands ------------------------------------------------------------------


def cmd_ingest(run: Run, args):
    graph = _load_graph(run, args)
    with run.stage_timer("write"):
        paths = dump_graph(graph, run.out)
        for p in paths.values():
            run.record_output(p)
    run.manifest["counts"] = {
        "institutions": len(graph.institutions),
        "journals": len(graph.journals),
        "works": len(graph.works),
        "edges": len(graph.edges),
    }


def cmd_fetch(run: Run, args):
    spec = FetchSpec(tuple(args.source_ids), args.census_year, args.cursor, args.rate_limit, args.per_page)
    client = OpenAlexClient(args.base_url, rate_limit=args.rate_limit, cache_dir=args.cache_dir)
    with run.stage_timer("fetch"):
        result = fetch_openalex_works(spec, client)
    with run.stage_timer("validate"):
        graph = build_graph(result.institutions, result.journals, result.works, result.edges, args.census_year)
    with run.stage_timer("write"):
        for p in dump_graph(graph, run.out).values():
            run.record_output(p)
    run.manifest["counts"] = {
        "works": len(graph.works),
        "edges": len(graph.edges),
        "malformed_skipped": result.malformed,
        "dropped_no_journal": result.dropped_no_journal,
        "requests": client.request_count,
    }


def cmd_prestige(run: Run, args):
    if not args.rankings:
        raise StageError("inputs", "--rankings is required")
    run.record_inputs(args.institutions, *args.rankings)
    with run.stage_timer("prestige"):
        universe = [i.id for i in parse_jsonl(args.institutions, "institutions")]
        table = institution_prestige([parse_ranking_file(p) for p in args.rankings], universe)
    p = _write(run, "prestige.csv")
    write_prestige_csv(p, table)
    run.record_output(p)


def cmd_solve(run: Run, args):
    cfg = _solver_config(args)
    run.manifest["config"]["solver"] = cfg.__dict__
    graph = _load_graph(run, args, cfg.exogenous_f)
    _warn_exogenous(graph, cfg)
    table = _load_prestige(run, args, graph, cfg.use_institutional_prestige)
    with run.stage_timer("solve"):
        scores, _ = solve(graph, table, cfg)
    _write_scores(run, scores, cfg)


def _scores_and_tiers(run: Run, args, graph, table, cfg):
    with run.stage_timer("solve"):
        if args.journal_scores:
            run.record_inputs(args.journal_scores)
            weights = converged_weights(graph, table, _read_journal_scores(args.journal_scores), cfg)
        else:
            scores, weights = solve(graph, table, cfg)
            _write_scores(run, scores, cfg)
    with run.stage_timer("score"):
        authors = score_authors(graph, weights, ScoringConfig(include_self_citations=not args.exclude_self_citations))
    return authors


def cmd_score(run: Run, args):
    cfg = _solver_config(args)
    run.manifest["config"]["solver"] = cfg.__dict__
    graph = _load_graph(run, args, cfg.exogenous_f)
    _warn_exogenous(graph, cfg)
    table = _load_prestige(run, args, graph, cfg.use_institutional_prestige)
    labels = _labels(run, args)
    authors = _scores_and_tiers(run, args, graph, table, cfg)
    tiers = segment_tiers(authors, labels) if len(authors) >= 3 else None
    p = _write(run, "authors.csv")
    write_authors_csv(p, authors, labels, tiers)
    run.record_output(p)
    if tiers:
        p = _write(run, "tier_counts.csv")
        write_tier_counts_csv(p, tiers)
        run.record_output(p)


def _labels(run: Run, args) -> dict[str, str]:
    if getattr(args, "labels", None):
        run.record_inputs(args.labels)
        return read_labels_csv(args.labels)
    return {}


def cmd_segment(run: Run, args):
    run.record_inputs(args.authors)
    with run.stage_timer("segment"):
        authors, labels = read_authors_csv(args.authors)
        labels.update(_labels(run, args))
        tiers = segment_tiers(authors, labels)
    p = _write(run, "tiers.csv")
    write_authors_csv(p, authors, labels, tiers)
    run.record_output(p)
    p = _write(run, "tier_counts.csv")
    write_tier_counts_csv(p, tiers)
    run.record_output(p)


def cmd_report(run: Run, args):
    graph = _load_graph(run, args)
    run.record_inputs(args.authors)
    authors, labels = read_authors_csv(args.authors)
    labels.update(_labels(run, args))
    rc = {s.author_id: s.rc for s in authors}
    samples: dict[str, set] = {}
    for a, lab in sorted(labels.items()):
        samples.setdefault(lab, set()).add(a)
    samples = dict(sorted(samples.items()))
    if args.samples:
        samples = {k: v for k, v in samples.items() if k in args.samples}

    with run.stage_timer("tables"):
        table = summary_and_share_tables(graph, samples, top=args.top)
    for name, writer in (
        ("summary.csv", lambda p: write_summary_csv(p, table)),
        ("journal_shares.csv", lambda p: write_shares_csv(p, table.journal_shares, "journal_id")),
        ("institution_shares.csv", lambda p: write_shares_csv(p, table.institution_shares, "institution_id")),
        ("country_shares.csv", lambda p: write_shares_csv(p, table.country_shares, "country")),
    ):
        p = _write(run, name)
        writer(p)
        run.record_output(p)

    with run.stage_timer("components"):
        networks = {lab: coauthorship_components(graph, members, {a: rc[a] for a in members if a in rc} if all(a in rc for a in members) else None) for lab, members in samples.items()}
    p = _write(run, "components.csv")
    write_components_csv(p, networks)
    run.record_output(p)

    with run.stage_timer("tests"):
        p = _write(run, "ks_tests.csv")
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "sample_a", "sample_b", "D", "p_value"])
            per_paper = {s.author_id: s.citations_per_paper for s in authors}
            for qname, values in (("rc", rc), ("citations_per_paper", per_paper)):
                groups = group_by_label(values, labels)
                if args.all_authors_baseline:
                    groups["all"] = [values[k] for k in sorted(values)]
                for la, lb, res in pairwise_ks(groups):
                    w.writerow([qname, la, lb, repr(res.statistic), repr(res.pvalue)])
        run.record_output(p)

    p = _write(run, "fig3_authors.csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author_id", "label", "citations", "rc"])
        for s in sorted(authors, key=lambda s: s.author_id):
            w.writerow([s.author_id, labels.get(s.author_id, ""), s.L_a, repr(float(s.rc))])
    run.record_output(p)

    if args.journal_scores:
        run.record_inputs(args.journal_scores)
        jscores = _read_journal_scores(args.journal_scores)
        indicators: dict[str, dict[str, float]] = {}
        if args.indicators:
            run.record_inputs(args.indicators)
            with open(args.indicators, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                cols = [c for c in reader.fieldnames or [] if c != "journal_id"]
                indicators = {c: {} for c in cols}
                for row in reader:
                    for c in cols:
                        indicators[c][row["journal_id"]] = float(row[c]) if row[c] not in ("", None) else math.nan
        p = _write(run, "fig1_journals.csv")
        cols = list(indicators)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["journal_id", "rc_score", *cols])
            for jid in sorted(jscores):
                vals = [indicators[c].get(jid, math.nan) for c in cols]
                w.writerow([jid, repr(jscores[jid]), *("" if math.isnan(v) else repr(v) for v in vals)])
        run.record_output(p)
        if cols:
            p = _write(run, "indicator_correlations.csv")
            with open(p, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["indicator", "spearman"])
                for c, v in indicator_correlations(jscores, indicators).items():
                    w.writerow([c, "" if math.isnan(v) else repr(v)])
            run.record_output(p)


def cmd_synth(run: Run, args):
    cfg = SynthConfig(
        seed=args.seed,
        journal_count=args.journal_count,
        works_per_journal=args.works_per_journal,
        author_pool=args.author_pool,
        institution_pool=args.institution_pool,
        prestige_profile=args.prestige_profile,
        honest_elite_size=args.elite_size,
        cartel_size=args.cartel_size,
        cartel_citation_boost=args.cartel_citation_boost,
        base_citation_rate=args.base_citation_rate,
    )
    run.manifest["config"]["synth"] = cfg.__dict__
    with run.stage_timer("generate"):
        data, truth = generate_network(cfg)
    with run.stage_timer("write"):
        for p in write_synth(run.out, data, truth).values():
            run.record_output(p)


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repcite", description="Reputable-citation scoring of journals and authors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "validate and normalise entity files")
    _add_graph_args(p)

    p = add("fetch", cmd_fetch, "pull census works and their citations from OpenAlex")
    p.add_argument("--source-ids", nargs="+", required=True, help="OpenAlex source ids of the journal set")
    p.add_argument("--census-year", type=int, required=True)
    p.add_argument("--rate-limit", type=float, default=5.0, help="requests per second")
    p.add_argument("--per-page", type=int, default=200)
    p.add_argument("--cursor", default="*")
    p.add_argument("--cache-dir", type=Path)
    p.add_argument("--base-url", default=None, help=f"API base URL (default ${BASE_URL_ENV} or the public API)")

    p = add("prestige", cmd_prestige, "institution prestige from ranking files")
    p.add_argument("--institutions", type=Path, required=True)
    p.add_argument("--rankings", type=Path, nargs="+", required=True, metavar="CSV")

    p = add("solve", cmd_solve, "converged journal scores")
    _add_graph_args(p)
    _add_prestige_args(p)
    _add_solver_args(p)

    p = add("score", cmd_score, "author scores, attenuation flags and tiers")
    _add_graph_args(p)
    _add_prestige_args(p)
    _add_solver_args(p)
    p.add_argument("--journal-scores", type=Path, help="reuse journal_scores.csv instead of solving")
    p.add_argument("--labels", type=Path, help="author_id,label CSV")
    p.add_argument("--exclude-self-citations", action="store_true")

    p = add("segment", cmd_segment, "three-tier segmentation of an authors CSV")
    p.add_argument("--authors", type=Path, required=True)
    p.add_argument("--labels", type=Path)

    p = add("report", cmd_report, "summary/share tables, components, KS tests and plot data")
    _add_graph_args(p)
    p.add_argument("--authors", type=Path, required=True)
    p.add_argument("--labels", type=Path)
    p.add_argument("--samples", nargs="+", help="restrict to these labels")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--journal-scores", type=Path)
    p.add_argument("--indicators", type=Path, help="journal_id plus one column per indicator")
    p.add_argument("--all-authors-baseline", action="store_true", help="also test each sample against all authors")

    p = add("synth", cmd_synth, "synthetic network with planted elites and cartels")
    d = SynthConfig()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--journal-count", type=int, default=d.journal_count)
    p.add_argument("--works-per-journal", type=int, default=d.works_per_journal)
    p.add_argument("--author-pool", type=int, default=d.author_pool)
    p.add_argument("--institution-pool", type=int, default=d.institution_pool)
    p.add_argument("--prestige-profile", type=float, default=d.prestige_profile)
    p.add_argument("--elite-size", type=int, default=d.honest_elite_size)
    p.add_argument("--cartel-size", type=int, default=d.cartel_size)
    p.add_argument("--cartel-citation-boost", type=int, default=d.cartel_citation_boost)
    p.add_argument("--base-citation-rate", type=float, default=d.base_citation_rate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    config = {k: (str(v) if isinstance(v, Path) else [str(x) for x in v] if isinstance(v, list) else v) for k, v in vars(args).items() if k != "func"}
    run = Run(args.command, args.out, config)
    try:
        args.func(run, args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a stage-tagged exit
        stage = getattr(exc, "stage", run.stage)
        run.finish(exc)
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        if args.verbose:
            logger.exception("stage %s failed", stage)
        return 1
    run.finish()
    return 0


if __name__ == "__main__":
    sys.exit(main())
