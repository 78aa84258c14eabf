"""Minimal OpenAlex works client with cursor paging, throttling and retry.

Only the fields needed for the citation model are read. Works are fetched in
two passes: census-year works of the requested sources, then every work that
cites one of them (in-set or not).
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import requests

from .model import CitationEdge, InstitutionRecord, JournalRecord, WorkRecord

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openalex.org"
BASE_URL_ENV = "REPCITE_OPENALEX_URL"
FILTER_CHUNK = 50


class FetchError(RuntimeError):
    pass


class MalformedRecord(ValueError):
    pass


def default_base_url() -> str:
    return os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL).rstrip("/")


@dataclass(frozen=True)
class FetchSpec:
    journal_external_ids: tuple[str, ...]
    census_year: int
    page_cursor: str = "*"
    rate_limit: float = 5.0
    per_page: int = 200
    include_citing: bool = True
    mailto: Optional[str] = None

    def __post_init__(self):
        if not self.journal_external_ids:
            raise ValueError("at least one journal id is required")
        this_year = _dt.date.today().year
        if not 1900 <= self.census_year <= this_year:
            raise ValueError(f"census_year must lie in [1900, {this_year}], got {self.census_year}")
        if not self.rate_limit > 0:
            raise ValueError("rate_limit must be positive")
        if not 1 <= self.per_page <= 200:
            raise ValueError("per_page must lie in [1, 200]")


class OpenAlexClient:
    """GET-only JSON client. Requests are serialised and spaced by ``1/rate_limit`` seconds."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        rate_limit: float = 5.0,
        max_retries: int = 5,
        backoff: float = 1.0,
        timeout: float = 30.0,
        cache_dir: Optional[str | Path] = None,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = (base_url or default_base_url()).rstrip("/")
        self.min_interval = 1.0 / rate_limit
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.session = session or requests.Session()
        self.sleep = sleep
        self._last = None
        self.request_count = 0

    def _throttle(self):
        if self._last is not None:
            wait = self.min_interval - (time.monotonic() - self._last)
            if wait > 0:
                self.sleep(wait)
        self._last = time.monotonic()

    def _cache_path(self, path: str, params: dict) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        key = json.dumps([self.base_url, path, sorted(params.items())])
        return self.cache_dir / (hashlib.sha256(key.encode()).hexdigest() + ".json")

    def get(self, path: str, params: dict) -> dict:
        cached = self._cache_path(path, params)
        if cached is not None and cached.exists():
            return json.loads(cached.read_text(encoding="utf-8"))
        url = f"{self.base_url}/{path.lstrip('/')}"
        attempt = 0
        while True:
            self._throttle()
            self.request_count += 1
            try:
                resp = self.session.get(url, params=params, timeout=self.timeout)
            except requests.RequestException as exc:
                error = f"transport error: {exc}"
                delay = self.backoff * 2**attempt
            else:
                if resp.status_code == 200:
                    try:
                        payload = resp.json()
                    except ValueError:
                        raise FetchError(f"non-JSON response from {url}") from None
                    if cached is not None:
                        cached.parent.mkdir(parents=True, exist_ok=True)
                        cached.write_text(json.dumps(payload), encoding="utf-8")
                    return payload
                if resp.status_code != 429 and resp.status_code < 500:
                    raise FetchError(f"HTTP {resp.status_code} from {url}")
                error = f"HTTP {resp.status_code}"
                delay = _retry_after(resp) or self.backoff * 2**attempt
            attempt += 1
            if attempt > self.max_retries:
                raise FetchError(f"giving up on {url} after {attempt} attempts ({error})")
            logger.warning("%s from %s, retrying in %.2fs", error, url, delay)
            self.sleep(delay)

    def iter_works(self, filter_expr: str, per_page: int = 200, cursor: str = "*", mailto: Optional[str] = None) -> Iterator[dict]:
        while cursor:
            params = {"filter": filter_expr, "per-page": per_page, "cursor": cursor}
            if mailto:
                params["mailto"] = mailto
            page = self.get("works", params)
            results = page.get("results")
            if not isinstance(results, list):
                raise FetchError("malformed page: missing results list")
            yield from results
            if not results:
                break
            cursor = (page.get("meta") or {}).get("next_cursor")


def _retry_after(resp) -> Optional[float]:
    value = resp.headers.get("Retry-After")
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


def short_id(value: Optional[str]) -> Optional[str]:
    if not value:
        return None
    return str(value).rstrip("/").rsplit("/", 1)[-1]


@dataclass
class MappedWork:
    work: WorkRecord
    source_name: str
    referenced: tuple[str, ...]
    institutions: list[InstitutionRecord]


def map_work(rec: dict) -> Optional[MappedWork]:
    """Map one OpenAlex work to model fields; ``None`` when it has no source."""
    if not isinstance(rec, dict):
        raise MalformedRecord("work is not an object")
    wid = short_id(rec.get("id"))
    year = rec.get("publication_year")
    if not wid or not isinstance(year, int):
        raise MalformedRecord(f"work {wid!r} lacks id or publication_year")
    source = ((rec.get("primary_location") or {}).get("source")) or {}
    sid = short_id(source.get("id"))
    if not sid:
        return None
    authors, insts = [], {}
    for a in rec.get("authorships") or []:
        aid = short_id((a.get("author") or {}).get("id"))
        if aid:
            authors.append(aid)
        for inst in a.get("institutions") or []:
            iid = short_id(inst.get("id"))
            if iid and iid not in insts:
                insts[iid] = InstitutionRecord(iid, inst.get("display_name") or iid, inst.get("country_code"))
    authors = list(dict.fromkeys(authors))
    if not authors:
        raise MalformedRecord(f"work {wid!r} has no identified authors")
    biblio = rec.get("biblio") or {}
    pages = None
    try:
        first, last = int(biblio.get("first_page")), int(biblio.get("last_page"))
        if last >= first:
            pages = last - first + 1
    except (TypeError, ValueError):
        pass
    referenced = tuple(r for r in (short_id(x) for x in rec.get("referenced_works") or []) if r)
    ref_count = len(referenced) if "referenced_works" in rec else rec.get("referenced_works_count")
    work = WorkRecord(wid, sid, year, tuple(authors), tuple(insts), pages, ref_count if isinstance(ref_count, int) else None)
    return MappedWork(work, source.get("display_name") or sid, referenced, list(insts.values()))


@dataclass
class FetchResult:
    institutions: list[InstitutionRecord]
    journals: list[JournalRecord]
    works: list[WorkRecord]
    edges: list[CitationEdge]
    malformed: int = 0
    dropped_no_journal: int = 0
    dropped_journals: list[str] = field(default_factory=list)

    def as_raw(self) -> dict[str, list]:
        return {"institutions": self.institutions, "journals": self.journals, "works": self.works, "edges": self.edges}


def _chunks(items: Sequence[str], n: int) -> Iterator[Sequence[str]]:
    for i in range(0, len(items), n):
        yield items[i:i + n]


def fetch_openalex_works(spec: FetchSpec, client: Optional[OpenAlexClient] = None, base_url: Optional[str] = None) -> FetchResult:
    client = client or OpenAlexClient(base_url, rate_limit=spec.rate_limit)
    in_set = list(dict.fromkeys(short_id(s) for s in spec.journal_external_ids))
    works: dict[str, WorkRecord] = {}
    institutions: dict[str, InstitutionRecord] = {}
    titles: dict[str, str] = {}
    malformed = dropped = 0

    def take(rec) -> Optional[MappedWork]:
        nonlocal malformed, dropped
        try:
            m = map_work(rec)
        except MalformedRecord as exc:
            malformed += 1
            logger.warning("skipping malformed record: %s", exc)
            return None
        if m is None:
            dropped += 1
            return None
        works.setdefault(m.work.id, m.work)
        titles.setdefault(m.work.journal_id, m.source_name)
        for inst in m.institutions:
            institutions.setdefault(inst.id, inst)
        return m

    census: set[str] = set()
    cursor = spec.page_cursor
    for chunk in _chunks(in_set, FILTER_CHUNK):
        flt = f"primary_location.source.id:{'|'.join(chunk)},publication_year:{spec.census_year}"
        for rec in client.iter_works(flt, spec.per_page, cursor, spec.mailto):
            m = take(rec)
            if m is not None and m.work.journal_id in chunk and m.work.year == spec.census_year:
                census.add(m.work.id)
        cursor = "*"

    edges: set[tuple[str, str]] = set()
    if spec.include_citing:
        for chunk in _chunks(sorted(census), FILTER_CHUNK):
            targets = set(chunk)
            flt = f"cites:{'|'.join(chunk)},from_publication_date:{spec.census_year}-01-01"
            for rec in client.iter_works(flt, spec.per_page, "*", spec.mailto):
                m = take(rec)
                if m is None:
                    continue
                for ref in m.referenced:
                    if ref in targets and ref != m.work.id:
                        edges.add((m.work.id, ref))

    counts: dict[str, int] = {}
    for wid in census:
        counts[works[wid].journal_id] = counts.get(works[wid].journal_id, 0) + 1
    journals = []
    empty = [j for j in in_set if counts.get(j, 0) == 0]
    for jid in sorted(set(titles) | set(in_set)):
        if jid in empty:
            continue
        is_in = jid in in_set
        journals.append(JournalRecord(jid, titles.get(jid, jid), is_in, counts.get(jid, 0) if is_in else 0))
    if empty:
        logger.warning("%d requested journals returned no census works and were left out", len(empty))
    keep_journals = {j.id for j in journals}
    # in-set journals with no census works are dropped, so their later works go too
    kept_works = [w for _, w in sorted(works.items()) if w.journal_id in keep_journals]
    kept_ids = {w.id for w in kept_works}
    return FetchResult(
        institutions=[institutions[k] for k in sorted(institutions)],
        journals=journals,
        works=kept_works,
        edges=[CitationEdge(c, d, None) for c, d in sorted(edges) if c in kept_ids and d in kept_ids],
        malformed=malformed,
        dropped_no_journal=dropped,
        dropped_journals=empty,
    )
