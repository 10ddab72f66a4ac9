"""Classifier heads, decision rules, and model artifact serialization.

The first architecture scores all n labels in one linear layer over the
encoded organization text. The second scores each (organization text,
label description) pair independently with a shared encoder and a width-1
head, yielding one strength per label. Multi-label decisions threshold at
τ (boundary inclusive); single-label decisions take the argmax with ties
resolved to the smallest index.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from orgclass.datasets import Example, LabelSpace
from orgclass.models.encoders import EncoderConfig, TextEncoder, make_encoder
from orgclass.storage import canonical_json, read_json, sha256_hex, write_json

ARCH_ORGMODEL1 = "orgmodel1"
ARCH_ORGMODEL2 = "orgmodel2"
MODE_MULTILABEL = "multilabel"
MODE_SINGLELABEL = "singlelabel"

DEFAULT_THRESHOLD = 0.5


class ModelConfigError(ValueError):
    """Raised when a classifier's pieces disagree about shape or mode."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / np.sum(ez, axis=-1, keepdims=True)


@dataclass
class ClassifierState:
    architecture: str
    task_mode: str
    label_space: LabelSpace
    weights: np.ndarray
    bias: np.ndarray
    encoder_config: EncoderConfig
    threshold: float = DEFAULT_THRESHOLD
    description_style: str | None = None
    descriptions: tuple[str, ...] | None = None
    train_config: dict | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.architecture not in (ARCH_ORGMODEL1, ARCH_ORGMODEL2):
            raise ModelConfigError(f"unknown architecture: {self.architecture!r}")
        if self.task_mode not in (MODE_MULTILABEL, MODE_SINGLELABEL):
            raise ModelConfigError(f"unknown task mode: {self.task_mode!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ModelConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        head_width = self.label_space.n if self.architecture == ARCH_ORGMODEL1 else 1
        expected = (self.encoder_config.hidden_size, head_width)
        if self.weights.shape != expected or self.bias.shape != (head_width,):
            raise ModelConfigError(
                f"head shape {self.weights.shape}/{self.bias.shape} inconsistent with "
                f"hidden size {self.encoder_config.hidden_size} and {head_width} outputs"
            )
        if self.architecture == ARCH_ORGMODEL2:
            if self.descriptions is not None and len(self.descriptions) != self.label_space.n:
                raise ModelConfigError(
                    f"{len(self.descriptions)} descriptions for {self.label_space.n} labels"
                )


# --------------------------------------------------------------------------
# Scoring
# --------------------------------------------------------------------------

def orgmodel1_scores(text: str, state: ClassifierState, encoder: TextEncoder) -> np.ndarray:
    """Score all n labels at once: linear head over the encoded text, then
    element-wise sigmoid (multi-label) or softmax (single-label)."""
    if state.architecture != ARCH_ORGMODEL1:
        raise ModelConfigError(f"expected {ARCH_ORGMODEL1}, got {state.architecture}")
    if encoder.hidden_size != state.encoder_config.hidden_size:
        raise ModelConfigError(
            f"encoder hidden size {encoder.hidden_size} != head input {state.encoder_config.hidden_size}"
        )
    z = encoder.encode(text) @ state.weights + state.bias
    if state.task_mode == MODE_MULTILABEL:
        return sigmoid(z)
    return softmax(z)


def orgmodel2_strengths(
    org_text: str,
    descriptions: Sequence[str],
    state: ClassifierState,
    encoder: TextEncoder,
) -> np.ndarray:
    """One strength in [0, 1] per label: sigmoid of the pair head over the
    joint encoding of (organization text, description_j), in description
    order. The encoder is shared across all n pairs."""
    if state.architecture != ARCH_ORGMODEL2:
        raise ModelConfigError(f"expected {ARCH_ORGMODEL2}, got {state.architecture}")
    if len(descriptions) != state.label_space.n:
        raise ModelConfigError(
            f"{len(descriptions)} descriptions for {state.label_space.n} labels"
        )
    if encoder.hidden_size != state.encoder_config.hidden_size:
        raise ModelConfigError(
            f"encoder hidden size {encoder.hidden_size} != head input {state.encoder_config.hidden_size}"
        )
    strengths = np.empty(len(descriptions), dtype=np.float64)
    for j, desc in enumerate(descriptions):
        z = encoder.encode_pair(org_text, desc) @ state.weights + state.bias
        strengths[j] = sigmoid(z)[0]
    return strengths


# --------------------------------------------------------------------------
# Decision rules
# --------------------------------------------------------------------------

def predict_multilabel(scores: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> set[int]:
    """Indices whose score reaches the threshold; the boundary is included."""
    return {int(j) for j in np.flatnonzero(np.asarray(scores) >= threshold)}


def predict_singlelabel(scores: np.ndarray) -> int:
    """Argmax index; ties go to the smallest index."""
    return int(np.argmax(np.asarray(scores)))


@dataclass(frozen=True)
class Prediction:
    org_id: str
    scores: tuple[float, ...]
    labels: frozenset[str]

    def to_dict(self) -> dict:
        return {"org_id": self.org_id, "scores": list(self.scores), "labels": sorted(self.labels)}


def predict_example(
    example: Example,
    state: ClassifierState,
    encoder: TextEncoder,
    descriptions: Sequence[str] | None = None,
) -> Prediction:
    labels = state.label_space.labels
    if state.architecture == ARCH_ORGMODEL1:
        scores = orgmodel1_scores(example.text, state, encoder)
    else:
        descs = descriptions if descriptions is not None else state.descriptions
        if descs is None:
            raise ModelConfigError("pair scorer needs label descriptions")
        scores = orgmodel2_strengths(example.text, descs, state, encoder)
    if state.task_mode == MODE_MULTILABEL:
        picked = frozenset(labels[j] for j in predict_multilabel(scores, state.threshold))
    else:
        picked = frozenset({labels[predict_singlelabel(scores)]})
    return Prediction(org_id=example.org_id, scores=tuple(float(s) for s in scores), labels=picked)


def predict_dataset(
    examples: Iterable[Example],
    state: ClassifierState,
    encoder: TextEncoder,
    descriptions: Sequence[str] | None = None,
) -> list[Prediction]:
    return [predict_example(ex, state, encoder, descriptions) for ex in examples]


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def save_model(state: ClassifierState, out_dir: str | Path, encoder: TextEncoder | None = None) -> Path:
    """Write the model artifact: head weights, config, and, for a
    fine-tuned transformer, the encoder checkpoint alongside."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savez(out_dir / "head.npz", weights=state.weights, bias=state.bias)
    encoder_weights = None
    if encoder is not None and hasattr(encoder, "model"):
        encoder_dir = out_dir / "encoder"
        encoder.model.save_pretrained(encoder_dir)
        encoder.tokenizer.save_pretrained(encoder_dir)
        encoder_weights = "encoder"
    write_json(
        out_dir / "model.json",
        {
            "architecture": state.architecture,
            "task_mode": state.task_mode,
            "task": state.label_space.task,
            "labels": list(state.label_space.labels),
            "label_space_hash": sha256_hex(
                canonical_json(list(state.label_space.labels)).encode("utf-8")
            ),
            "threshold": state.threshold,
            "description_style": state.description_style,
            "descriptions": list(state.descriptions) if state.descriptions else None,
            "encoder": state.encoder_config.to_dict(),
            "encoder_weights": encoder_weights,
            "train_config": state.train_config,
            "seed": state.seed,
        },
    )
    return out_dir


def load_model(model_dir: str | Path, with_encoder: bool = True) -> tuple[ClassifierState, TextEncoder | None]:
    model_dir = Path(model_dir)
    meta = read_json(model_dir / "model.json")
    arrays = np.load(model_dir / "head.npz")
    encoder_config = EncoderConfig.from_dict(meta["encoder"])
    state = ClassifierState(
        architecture=meta["architecture"],
        task_mode=meta["task_mode"],
        label_space=LabelSpace(task=meta["task"], labels=tuple(meta["labels"])),
        weights=arrays["weights"],
        bias=arrays["bias"],
        encoder_config=encoder_config,
        threshold=meta["threshold"],
        description_style=meta.get("description_style"),
        descriptions=tuple(meta["descriptions"]) if meta.get("descriptions") else None,
        train_config=meta.get("train_config"),
        seed=meta.get("seed"),
    )
    encoder = None
    if with_encoder:
        weights_dir = model_dir / meta["encoder_weights"] if meta.get("encoder_weights") else None
        encoder = make_encoder(encoder_config, weights_dir=weights_dir)
    return state, encoder
