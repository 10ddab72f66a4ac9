"""Raw text acquisition: EDGAR company records and 10-K Item 1 extracts,
plus search-snippet pseudo-documents from a pluggable search provider."""
from orgclass.ingestion.cache import DiskCache
from orgclass.ingestion.net import (
    NotFoundError,
    PoliteFetcher,
    RateLimiter,
    TransportError,
    fetch_many,
)
from orgclass.ingestion.edgar import (
    CIK_INDEX_URL,
    CompanyRecord,
    EdgarClient,
    extract_item1,
    fetch_cik_index,
    fetch_company_record,
    latest_10k,
    parse_cik_index,
)
from orgclass.ingestion.search import (
    FixtureSearchProvider,
    PseudoDoc,
    SearchApiProvider,
    SearchResult,
    build_pseudodoc,
)

__all__ = [
    "DiskCache",
    "NotFoundError",
    "PoliteFetcher",
    "RateLimiter",
    "TransportError",
    "fetch_many",
    "CIK_INDEX_URL",
    "CompanyRecord",
    "EdgarClient",
    "extract_item1",
    "fetch_cik_index",
    "fetch_company_record",
    "latest_10k",
    "parse_cik_index",
    "FixtureSearchProvider",
    "PseudoDoc",
    "SearchApiProvider",
    "SearchResult",
    "build_pseudodoc",
]
