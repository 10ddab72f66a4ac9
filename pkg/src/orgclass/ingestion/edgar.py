"""EDGAR access: the CIK name index, per-company submission metadata, and
Item 1 extraction from 10-K filings.

Filings arrive as HTML of wildly varying quality, so Item 1 detection works
on markup-stripped, whitespace-normalized text with a last-occurrence
heuristic to skip tables of contents. A filing without a recognizable
Item 1 heading yields empty text; that is data, not an error, since a few
percent of real extracts are empty.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path

from orgclass.ingestion.cache import DiskCache
from orgclass.ingestion.net import PoliteFetcher

log = logging.getLogger(__name__)

CIK_INDEX_URL = "https://www.sec.gov/Archives/edgar/cik-lookup-data.txt"
SUBMISSIONS_URL = "https://data.sec.gov/submissions/CIK{cik:010d}.json"
DOCUMENT_URL = "https://www.sec.gov/Archives/edgar/data/{cik}/{accession}/{doc}"

_SIC_RE = re.compile(r"\d{4}")


@dataclass(frozen=True)
class Filing:
    form: str
    accession_number: str
    filing_date: str
    primary_document: str


@dataclass(frozen=True)
class CompanyRecord:
    cik: int
    name: str
    sic: str
    sic_description: str
    filing_text: str
    complete: bool

    def to_dict(self) -> dict:
        return {
            "cik": self.cik,
            "name": self.name,
            "sic": self.sic,
            "sic_description": self.sic_description,
            "filing_text": self.filing_text,
            "complete": self.complete,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "CompanyRecord":
        return cls(
            cik=int(row["cik"]),
            name=row["name"],
            sic=row["sic"],
            sic_description=row["sic_description"],
            filing_text=row["filing_text"],
            complete=bool(row["complete"]),
        )


# --------------------------------------------------------------------------
# CIK index
# --------------------------------------------------------------------------

def parse_cik_index(text: str) -> tuple[list[tuple[str, int]], int]:
    """Parse `NAME:CIK:` lines into (name, cik) pairs.

    Company names may themselves contain colons, so the line is split from
    the right. Malformed lines are skipped and counted rather than aborting
    a multi-hundred-thousand-line download.
    """
    entries: list[tuple[str, int]] = []
    skipped = 0
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.rsplit(":", 2)
        if len(parts) != 3 or parts[2] != "" or not parts[1].isdigit() or not parts[0]:
            skipped += 1
            continue
        entries.append((parts[0], int(parts[1])))
    if skipped:
        log.warning("cik index: skipped %d malformed lines", skipped)
    return entries, skipped


def fetch_cik_index(source: str | Path, fetcher: PoliteFetcher | None = None) -> list[tuple[str, int]]:
    """Load the CIK index from a URL or a local file."""
    if isinstance(source, Path) or not str(source).startswith(("http://", "https://")):
        text = Path(source).read_text(encoding="latin-1")
    else:
        if fetcher is None:
            raise ValueError("a fetcher is required for URL sources")
        text = fetcher.get(str(source)).decode("latin-1")
    entries, _ = parse_cik_index(text)
    if not entries:
        raise ValueError(f"no parseable entries in cik index {source}")
    return entries


# --------------------------------------------------------------------------
# Company records
# --------------------------------------------------------------------------

class EdgarClient:
    """Fetches EDGAR submission metadata and filing documents, cached."""

    def __init__(self, fetcher: PoliteFetcher, cache: DiskCache):
        self.fetcher = fetcher
        self.cache = cache

    def _get_cached(self, key: str, url: str) -> bytes:
        data = self.cache.get(key)
        if data is None:
            data = self.fetcher.get(url)
            self.cache.put(key, data)
        return data

    def get_submissions(self, cik: int) -> dict:
        url = SUBMISSIONS_URL.format(cik=int(cik))
        return json.loads(self._get_cached(f"submissions:{int(cik):010d}", url))

    def get_document(self, cik: int, accession_number: str, primary_document: str) -> bytes:
        url = DOCUMENT_URL.format(
            cik=int(cik),
            accession=accession_number.replace("-", ""),
            doc=primary_document,
        )
        return self._get_cached(url, url)


def latest_10k(submissions: dict) -> Filing | None:
    """Most recent 10-K from the submissions payload's parallel arrays."""
    recent = submissions.get("filings", {}).get("recent", {})
    forms = recent.get("form", [])
    accessions = recent.get("accessionNumber", [])
    dates = recent.get("filingDate", [])
    docs = recent.get("primaryDocument", [])
    best: Filing | None = None
    for form, accession, date, doc in zip(forms, accessions, dates, docs):
        if form != "10-K" or not accession or not doc:
            continue
        candidate = Filing(form=form, accession_number=accession, filing_date=date, primary_document=doc)
        if best is None or (candidate.filing_date, candidate.accession_number) > (
            best.filing_date,
            best.accession_number,
        ):
            best = candidate
    return best


def fetch_company_record(cik: int, edgar_client: EdgarClient) -> CompanyRecord:
    """Assemble one company's record: metadata plus Item 1 of its latest 10-K.

    The record is complete when name, SIC, SIC description, and a 10-K
    filing all exist; the extracted text may still be empty for a complete
    record, since some real filings defeat the heading heuristic.
    """
    sub = edgar_client.get_submissions(cik)
    name = (sub.get("name") or "").strip()
    sic = (sub.get("sic") or "").strip()
    if not _SIC_RE.fullmatch(sic):
        sic = ""
    sic_description = (sub.get("sicDescription") or "").strip()
    filing = latest_10k(sub)
    filing_text = ""
    if filing is not None:
        raw = edgar_client.get_document(int(sub.get("cik", cik)), filing.accession_number, filing.primary_document)
        filing_text = extract_item1(raw.decode("utf-8", errors="replace"))
    complete = bool(name and sic and sic_description and filing is not None)
    return CompanyRecord(
        cik=int(cik),
        name=name,
        sic=sic,
        sic_description=sic_description,
        filing_text=filing_text,
        complete=complete,
    )


# --------------------------------------------------------------------------
# Item 1 extraction
# --------------------------------------------------------------------------

class _TextExtractor(HTMLParser):
    """Collects text content, dropping script/style and inserting spaces at
    tag boundaries so adjacent cells/paragraphs don't fuse into one word."""

    _SKIP = {"script", "style"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1
        else:
            self.chunks.append(" ")

    def handle_endtag(self, tag):
        if tag in self._SKIP:
            if self._skip_depth:
                self._skip_depth -= 1
        else:
            self.chunks.append(" ")

    def handle_data(self, data):
        if not self._skip_depth:
            self.chunks.append(data)


def strip_markup(document: str) -> str:
    """Markup-free, whitespace-normalized text of an HTML-ish document."""
    parser = _TextExtractor()
    parser.feed(document)
    parser.close()
    return re.sub(r"\s+", " ", "".join(parser.chunks)).strip()


# "item 1" followed by anything alphanumeric is a different item (1A, 10..19).
_ITEM1_RE = re.compile(r"item\s*1(?![0-9a-z])\s*[.:;\-–—]*\s*(?:business\b)?\s*[.:;\-–—]*\s*", re.IGNORECASE)
_ITEM_NEXT_RE = re.compile(r"item\s*(?:1\s*a|2)(?![0-9a-z])", re.IGNORECASE)


def extract_item1(filing_document: str) -> str:
    """Plain text of the Item 1 section of a 10-K, or "" if not found.

    Filings usually mention "Item 1" twice, once in the table of contents
    and once as the body heading, so of the occurrences that are followed
    by an Item 1A / Item 2 boundary we take the last. The section runs to
    the first boundary after the heading, or to the end of the document.
    """
    text = strip_markup(filing_document)
    starts = list(_ITEM1_RE.finditer(text))
    if not starts:
        return ""
    chosen = None
    for match in starts:
        if _ITEM_NEXT_RE.search(text, match.end()):
            chosen = match
    if chosen is None:
        chosen = starts[-1]
    boundary = _ITEM_NEXT_RE.search(text, chosen.end())
    end = boundary.start() if boundary else len(text)
    return text[chosen.end():end].strip()
