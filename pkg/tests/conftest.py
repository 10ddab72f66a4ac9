"""Shared test plumbing: offline fakes for the network layer, a tiny
randomly-initialized transformer, and end-of-run acceptance reporting."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
EDGAR_FIXTURES = FIXTURES / "edgar"

# One line per acceptance criterion, printed in the terminal summary so the
# pass/fail status survives pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


@contextmanager
def criterion(num: int, name: str):
    try:
        yield
    except BaseException:
        ACCEPTANCE_LINES.append(f"criterion {num} ({name}): FAIL")
        print(f"criterion {num} ({name}): FAIL")
        raise
    ACCEPTANCE_LINES.append(f"criterion {num} ({name}): PASS")
    print(f"criterion {num} ({name}): PASS")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


class FakeResponse:
    def __init__(self, status_code: int, content: bytes):
        self.status_code = status_code
        self.content = content

    def raise_for_status(self):
        import requests

        if self.status_code >= 400:
            raise requests.HTTPError(f"status {self.status_code}")


class FakeSession:
    """Maps URL to (status, bytes); every request is recorded."""

    def __init__(self, routes: dict[str, tuple[int, bytes]]):
        self.routes = routes
        self.calls: list[str] = []

    def get(self, url, params=None, headers=None, timeout=None):
        self.calls.append(url)
        if url not in self.routes:
            return FakeResponse(404, b"")
        status, content = self.routes[url]
        return FakeResponse(status, content)


def edgar_routes() -> dict[str, tuple[int, bytes]]:
    """Recorded-response map for the three fixture companies."""
    sub = "https://data.sec.gov/submissions/CIK{:010d}.json"
    doc = "https://www.sec.gov/Archives/edgar/data/{}/{}/{}"
    routes = {}
    for cik in (1001, 1002, 1003):
        payload = (EDGAR_FIXTURES / f"CIK{cik:010d}.json").read_bytes()
        routes[sub.format(cik)] = (200, payload)
    routes[doc.format(1001, "000000100121000003", "apex10k_2021.htm")] = (
        200, (EDGAR_FIXTURES / "apex10k_2021.htm").read_bytes())
    routes[doc.format(1001, "000000100123000010", "apex10k_2023.htm")] = (
        200, (EDGAR_FIXTURES / "apex10k_2023.htm").read_bytes())
    routes[doc.format(1002, "000000100223000001", "bridgewater10k.htm")] = (
        200, (EDGAR_FIXTURES / "bridgewater10k.htm").read_bytes())
    return routes


@pytest.fixture
def edgar_client(tmp_path):
    from orgclass.ingestion import DiskCache, EdgarClient, PoliteFetcher, RateLimiter

    session = FakeSession(edgar_routes())
    fetcher = PoliteFetcher(
        user_agent="orgclass tests test@example.com",
        rate_limiter=RateLimiter(min_interval=0.0),
        session=session,
    )
    client = EdgarClient(fetcher, DiskCache(tmp_path / "cache", "edgar"))
    client.session = session  # expose for call-count assertions
    return client


def tiny_bert(extra_words=(), hidden_size=32, seed=0):
    """A one-layer randomly initialized BERT plus a word-level tokenizer,
    small enough to run in tests without any pretrained download."""
    torch = pytest.importorskip("torch")
    transformers = pytest.importorskip("transformers")
    tokenizers = pytest.importorskip("tokenizers")
    from tokenizers import Tokenizer, models, pre_tokenizers
    from tokenizers.processors import TemplateProcessing

    base = ["alpha", "beta", "gamma", "delta", "river", "bank", "crops",
            "solar", "widgets", "mills"]
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3}
    for word in list(base) + list(extra_words):
        if word not in vocab:
            vocab[word] = len(vocab)

    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    tok.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", 2), ("[SEP]", 3)],
    )
    tokenizer = transformers.PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="[PAD]", unk_token="[UNK]",
        cls_token="[CLS]", sep_token="[SEP]",
    )
    config = transformers.BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=64,
    )
    torch.manual_seed(seed)
    model = transformers.BertModel(config)
    model.eval()
    return model, tokenizer
