"""Polite HTTP plumbing: per-host rate limiting, bounded retries, and a
bounded worker pool for batch fetches."""
from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar
from urllib.parse import urlsplit

import requests

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class TransportError(RuntimeError):
    """An HTTP fetch failed after all retry attempts."""


class NotFoundError(TransportError):
    """The server reported the resource does not exist (no retries)."""


class RateLimiter:
    """Enforces a minimum interval between requests to the same host.

    The clock and sleep functions are injectable so tests can observe the
    schedule without waiting on wall time.
    """

    def __init__(
        self,
        min_interval: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if min_interval < 0:
            raise ValueError("min_interval must be >= 0")
        self.min_interval = min_interval
        self._clock = clock
        self._sleep = sleep
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, host: str) -> None:
        while True:
            with self._lock:
                now = self._clock()
                last = self._last.get(host)
                if last is None or now - last >= self.min_interval:
                    self._last[host] = now
                    return
                delay = self.min_interval - (now - last)
            self._sleep(delay)


class PoliteFetcher:
    """requests wrapper with retries, backoff, and a shared rate limit.

    EDGAR's fair-use policy requires a descriptive User-Agent, so an empty
    one is rejected outright rather than discovered via a 403 later.
    """

    def __init__(
        self,
        user_agent: str,
        rate_limiter: RateLimiter | None = None,
        session: requests.Session | None = None,
        max_retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not user_agent.strip():
            raise ValueError("a non-empty User-Agent is required")
        self.user_agent = user_agent
        self.rate_limiter = rate_limiter or RateLimiter()
        self.session = session or requests.Session()
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self._sleep = sleep

    def get(self, url: str, params: dict | None = None) -> bytes:
        host = urlsplit(url).netloc
        headers = {"User-Agent": self.user_agent}
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            self.rate_limiter.wait(host)
            try:
                resp = self.session.get(url, params=params, headers=headers, timeout=self.timeout)
                if resp.status_code == 404:
                    raise NotFoundError(f"not found: {url}")
                resp.raise_for_status()
                return resp.content
            except TransportError:
                raise
            except requests.RequestException as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    delay = self.backoff * (2 ** attempt)
                    log.warning("fetch failed (%s), retrying in %.1fs: %s", exc, delay, url)
                    self._sleep(delay)
        raise TransportError(f"failed after {self.max_retries} attempts: {url}") from last_error


def fetch_many(
    func: Callable[[T], R],
    items: Sequence[T],
    max_workers: int = 4,
) -> list[R]:
    """Apply func over items with bounded concurrency, preserving order."""
    if max_workers < 1:
        raise ValueError("max_workers must be >= 1")
    if not items:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(func, items))
