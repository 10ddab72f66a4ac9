"""Search-snippet pseudo-documents.

An organization's textual representation is the concatenation of the
snippets from its top search results, queried with the bare organization
name. Providers are pluggable: a live search-API adapter and a fixture
provider for tests share one contract, and neither fabricates snippets.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from orgclass.ingestion.cache import DiskCache
from orgclass.ingestion.net import PoliteFetcher

log = logging.getLogger(__name__)

API_KEY_ENV = "ORGCLASS_SEARCH_API_KEY"

DEFAULT_TOP_N = 10


@dataclass(frozen=True)
class SearchResult:
    rank: int
    url: str
    title: str
    snippet: str

    def to_dict(self) -> dict:
        return {"rank": self.rank, "url": self.url, "title": self.title, "snippet": self.snippet}

    @classmethod
    def from_dict(cls, row: dict) -> "SearchResult":
        return cls(rank=int(row["rank"]), url=row["url"], title=row["title"], snippet=row["snippet"])


class SearchProvider(Protocol):
    def search(self, query: str) -> list[SearchResult]: ...


@dataclass(frozen=True)
class PseudoDoc:
    org_id: str
    query: str
    retrieved_at: str
    results: tuple[SearchResult, ...]
    text: str
    usable: bool

    def to_dict(self) -> dict:
        return {
            "org_id": self.org_id,
            "query": self.query,
            "retrieved_at": self.retrieved_at,
            "results": [r.to_dict() for r in self.results],
            "text": self.text,
            "usable": self.usable,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "PseudoDoc":
        return cls(
            org_id=row["org_id"],
            query=row["query"],
            retrieved_at=row["retrieved_at"],
            results=tuple(SearchResult.from_dict(r) for r in row["results"]),
            text=row["text"],
            usable=bool(row["usable"]),
        )


def build_pseudodoc(
    org_name: str,
    provider: SearchProvider,
    top_n: int = DEFAULT_TOP_N,
    org_id: str | None = None,
    now: datetime | None = None,
) -> PseudoDoc:
    """Query the provider with the organization name and concatenate the
    snippets of the first top_n results, in rank order.

    Empty snippets are dropped; zero usable snippets is recorded as an
    unusable PseudoDoc rather than raised, since that is a property of the
    organization, not a failure of the pipeline.
    """
    if not org_name.strip():
        raise ValueError("organization name must be non-empty")
    results = tuple(provider.search(org_name)[:top_n])
    text = " ".join(r.snippet for r in results if r.snippet)
    stamp = (now or datetime.now(timezone.utc)).isoformat()
    return PseudoDoc(
        org_id=org_id if org_id is not None else org_name,
        query=org_name,
        retrieved_at=stamp,
        results=results,
        text=text,
        usable=bool(text),
    )


class FixtureSearchProvider:
    """Deterministic provider backed by a query→results mapping; the live
    API's stand-in for tests and offline replays. Issued queries are kept
    for assertions."""

    def __init__(self, fixtures: Mapping[str, Sequence[Mapping]] | str | Path):
        if isinstance(fixtures, (str, Path)):
            with open(fixtures, "r", encoding="utf-8") as fh:
                fixtures = json.load(fh)
        self._fixtures = dict(fixtures)
        self.queries: list[str] = []

    def search(self, query: str) -> list[SearchResult]:
        self.queries.append(query)
        rows = self._fixtures.get(query, [])
        return [
            SearchResult(
                rank=i + 1,
                url=row.get("link", row.get("url", "")),
                title=row.get("title", ""),
                snippet=row.get("snippet", ""),
            )
            for i, row in enumerate(rows)
        ]


class SearchApiProvider:
    """Adapter for a commercial search API returning JSON with an
    "organic_results" array of {title, link, snippet} objects.

    Responses are cached by query so a dataset build hits the API at most
    once per organization.
    """

    def __init__(
        self,
        fetcher: PoliteFetcher,
        cache: DiskCache,
        endpoint: str = "https://serpapi.com/search",
        api_key: str | None = None,
        extra_params: Mapping[str, str] | None = None,
    ):
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not api_key:
            raise ValueError(f"search API key missing; set {API_KEY_ENV} or pass api_key")
        self.fetcher = fetcher
        self.cache = cache
        self.endpoint = endpoint
        self.api_key = api_key
        self.extra_params = dict(extra_params or {})

    def search(self, query: str) -> list[SearchResult]:
        key = f"search:{self.endpoint}:{query}"
        data = self.cache.get(key)
        if data is None:
            params = {"q": query, "api_key": self.api_key, **self.extra_params}
            data = self.fetcher.get(self.endpoint, params=params)
            self.cache.put(key, data)
        payload = json.loads(data)
        results = []
        for i, row in enumerate(payload.get("organic_results", [])):
            results.append(
                SearchResult(
                    rank=i + 1,
                    url=row.get("link", ""),
                    title=row.get("title", ""),
                    snippet=row.get("snippet", ""),
                )
            )
        return results
