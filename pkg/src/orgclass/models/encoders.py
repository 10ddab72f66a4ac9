"""Text encoders behind both architectures.

Two implementations share one contract: encode a text (or a text pair) into
a fixed-length summary vector. The pretrained transformer is the real
model; the hashed n-gram encoder is a weightless, fully deterministic
stand-in that keeps training and CI runnable without GPU or downloads.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from hashlib import blake2b
from typing import Protocol, runtime_checkable

import numpy as np

KIND_TRANSFORMER = "pretrained_transformer"
KIND_BASELINE = "hashed_ngram_baseline"

_DEFAULT_HIDDEN = {KIND_TRANSFORMER: 768, KIND_BASELINE: 1024}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = KIND_BASELINE
    hidden_size: int | None = None
    max_tokens: int = 512
    model_name: str = "bert-base-uncased"
    use_bigrams: bool = True

    def __post_init__(self):
        if self.kind not in _DEFAULT_HIDDEN:
            raise ValueError(f"unknown encoder kind: {self.kind!r}")
        if self.hidden_size is None:
            object.__setattr__(self, "hidden_size", _DEFAULT_HIDDEN[self.kind])
        if self.hidden_size <= 0:
            raise ValueError("hidden_size must be positive")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hidden_size": self.hidden_size,
            "max_tokens": self.max_tokens,
            "model_name": self.model_name,
            "use_bigrams": self.use_bigrams,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "EncoderConfig":
        return cls(**row)


@runtime_checkable
class TextEncoder(Protocol):
    config: EncoderConfig

    @property
    def hidden_size(self) -> int: ...

    def encode(self, text: str) -> np.ndarray: ...

    def encode_pair(self, text_a: str, text_b: str) -> np.ndarray: ...


def _truncate_pair(tokens_a: list, tokens_b: list, limit: int) -> tuple[list, list]:
    """Trim the currently longer sequence one token at a time until the pair
    fits the budget; ties trim the first sequence."""
    len_a, len_b = len(tokens_a), len(tokens_b)
    while len_a + len_b > limit:
        if len_a >= len_b:
            len_a -= 1
        else:
            len_b -= 1
    return tokens_a[:len_a], tokens_b[:len_b]


class HashedNgramEncoder:
    """Signed feature hashing of word unigrams and bigrams, L2-normalized.

    Hashing uses a keyed-independent stable digest, not the builtin hash,
    which is salted per process and would break cross-run determinism.
    Pair encoding prefixes the two segments so "a b" as one text and
    ("a", "b") as a pair land in different buckets.
    """

    def __init__(self, config: EncoderConfig | None = None):
        self.config = config or EncoderConfig(kind=KIND_BASELINE)
        if self.config.kind != KIND_BASELINE:
            raise ValueError(f"config kind {self.config.kind!r} is not the baseline encoder")

    @property
    def hidden_size(self) -> int:
        return self.config.hidden_size

    def _tokens(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text.lower())

    def _features(self, tokens: list[str], prefix: str) -> list[str]:
        feats = [prefix + t for t in tokens]
        if self.config.use_bigrams:
            feats.extend(f"{prefix}{a} {b}" for a, b in zip(tokens, tokens[1:]))
        return feats

    def _accumulate(self, vec: np.ndarray, features: list[str]) -> None:
        h = self.hidden_size
        for feat in features:
            value = int.from_bytes(blake2b(feat.encode("utf-8"), digest_size=8).digest(), "big")
            sign = 1.0 if value & 1 else -1.0
            vec[(value >> 1) % h] += sign

    @staticmethod
    def _normalize(vec: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm else vec

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self.hidden_size, dtype=np.float64)
        tokens = self._tokens(text)[: self.config.max_tokens]
        self._accumulate(vec, self._features(tokens, ""))
        return self._normalize(vec)

    def encode_pair(self, text_a: str, text_b: str) -> np.ndarray:
        tokens_a, tokens_b = _truncate_pair(
            self._tokens(text_a), self._tokens(text_b), self.config.max_tokens
        )
        vec = np.zeros(self.hidden_size, dtype=np.float64)
        self._accumulate(vec, self._features(tokens_a, "a:"))
        self._accumulate(vec, self._features(tokens_b, "b:"))
        return self._normalize(vec)


class TransformerEncoder:
    """Pretrained masked-LM encoder; the summary vector is the first-token
    hidden state of the last layer.

    torch and transformers are imported lazily so the rest of the package
    works without them. A ready model/tokenizer pair can be injected, which
    tests use to run a tiny randomly-initialized encoder offline.
    """

    def __init__(
        self,
        config: EncoderConfig | None = None,
        model=None,
        tokenizer=None,
        device: str = "cpu",
    ):
        import torch  # noqa: F401  (fail early, clearly, if missing)
        from transformers import AutoModel, AutoTokenizer

        self.config = config or EncoderConfig(kind=KIND_TRANSFORMER)
        if self.config.kind != KIND_TRANSFORMER:
            raise ValueError(f"config kind {self.config.kind!r} is not the transformer encoder")
        self.tokenizer = tokenizer or AutoTokenizer.from_pretrained(self.config.model_name)
        self.model = model or AutoModel.from_pretrained(self.config.model_name)
        if self.model.config.hidden_size != self.config.hidden_size:
            raise ValueError(
                f"model hidden size {self.model.config.hidden_size} != configured {self.config.hidden_size}"
            )
        self.device = device
        self.model.to(device)
        self.model.eval()

    @property
    def hidden_size(self) -> int:
        return self.config.hidden_size

    def _summary(self, batch) -> np.ndarray:
        import torch

        batch = {k: v.to(self.device) for k, v in batch.items()}
        with torch.no_grad():
            out = self.model(**batch)
        return out.last_hidden_state[0, 0].cpu().numpy().astype(np.float64)

    def encode(self, text: str) -> np.ndarray:
        batch = self.tokenizer(
            text, truncation=True, max_length=self.config.max_tokens, return_tensors="pt"
        )
        return self._summary(batch)

    def encode_pair(self, text_a: str, text_b: str) -> np.ndarray:
        batch = self.tokenizer(
            text_a,
            text_b,
            truncation="longest_first",
            max_length=self.config.max_tokens,
            return_tensors="pt",
        )
        return self._summary(batch)


def make_encoder(config: EncoderConfig, weights_dir=None) -> TextEncoder:
    """Instantiate the encoder named by the config.

    weights_dir points at a fine-tuned transformer checkpoint saved next to
    a model artifact; when given, it overrides the pretrained name.
    """
    if config.kind == KIND_BASELINE:
        return HashedNgramEncoder(config)
    if weights_dir is not None:
        from transformers import AutoModel, AutoTokenizer

        return TransformerEncoder(
            config,
            model=AutoModel.from_pretrained(str(weights_dir)),
            tokenizer=AutoTokenizer.from_pretrained(str(weights_dir)),
        )
    return TransformerEncoder(config)
