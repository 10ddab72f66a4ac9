"""Head training with analytic gradients.

With the hashed baseline encoder the features are fixed, so training the
linear head is plain mini-batch gradient descent in numpy with closed-form
gradients and a decoupled-weight-decay optimizer. The pretrained encoder
path instead fine-tunes encoder and head together under torch; it lives in
a separate module and is pulled in only when asked for.

Losses follow the task: multi-label heads train with binary cross-entropy
per dimension, single-label heads with cross-entropy over the softmax, and
the pair scorer always trains with binary cross-entropy over all n
(organization, description) pairs of each example, target 1 exactly at the
gold labels.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from orgclass.datasets import LabeledDataset, LabelSpace, TASK_SIC2, encode_targets
from orgclass.metrics import MacroF1Mode, evaluate
from orgclass.models.classifier import (
    ARCH_ORGMODEL1,
    ARCH_ORGMODEL2,
    MODE_MULTILABEL,
    MODE_SINGLELABEL,
    ClassifierState,
    ModelConfigError,
    predict_dataset,
    sigmoid,
    softmax,
)
from orgclass.models.encoders import KIND_TRANSFORMER, TextEncoder

log = logging.getLogger(__name__)

LOSS_CROSS_ENTROPY = "cross_entropy"
LOSS_BINARY_CROSS_ENTROPY = "binary_cross_entropy"

HEAD_INIT_STD = 0.02


class TrainingError(RuntimeError):
    """Raised when training cannot proceed or diverges."""


@dataclass(frozen=True)
class TrainConfig:
    loss: str
    epochs: int = 4
    batch_size: int = 16
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    seed: int | None = None
    early_stop_metric: str | None = None

    def __post_init__(self):
        if self.loss not in (LOSS_CROSS_ENTROPY, LOSS_BINARY_CROSS_ENTROPY):
            raise ValueError(f"unknown loss: {self.loss!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.early_stop_metric not in (None, "dev_macro_f1"):
            raise ValueError(f"unknown early-stop metric: {self.early_stop_metric!r}")

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "early_stop_metric": self.early_stop_metric,
        }


def task_mode_for(task: str) -> str:
    return MODE_SINGLELABEL if task == TASK_SIC2 else MODE_MULTILABEL


def validate_loss(architecture: str, task_mode: str, loss: str) -> None:
    """The loss is determined by architecture and task; reject mismatches."""
    if architecture == ARCH_ORGMODEL2:
        expected = LOSS_BINARY_CROSS_ENTROPY
    elif task_mode == MODE_MULTILABEL:
        expected = LOSS_BINARY_CROSS_ENTROPY
    else:
        expected = LOSS_CROSS_ENTROPY
    if loss != expected:
        raise ModelConfigError(
            f"{architecture}/{task_mode} trains with {expected}, not {loss}"
        )


class DecoupledAdam:
    """Adam with decoupled weight decay over a dict of named arrays."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in self.params.items():
            g = grads[name]
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * np.square(g)
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)


# --------------------------------------------------------------------------
# Losses (numerically stable, computed from logits)
# --------------------------------------------------------------------------

def _bce_loss_grad(Z: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean element-wise binary cross-entropy and dLoss/dZ."""
    loss = np.maximum(Z, 0.0) - Z * Y + np.log1p(np.exp(-np.abs(Z)))
    dZ = (sigmoid(Z) - Y) / Z.size
    return float(loss.mean()), dZ


def _ce_loss_grad(Z: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over softmax rows and dLoss/dZ."""
    shifted = Z - Z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(Z.shape[0])
    loss = float((logsumexp - shifted[rows, idx]).mean())
    dZ = softmax(Z)
    dZ[rows, idx] -= 1.0
    return loss, dZ / Z.shape[0]


# --------------------------------------------------------------------------
# Training entry point
# --------------------------------------------------------------------------

def train(
    architecture: str,
    dataset: LabeledDataset,
    label_space: LabelSpace,
    config: TrainConfig,
    encoder: TextEncoder,
    description_style: str | None = None,
    descriptions: Sequence[str] | None = None,
) -> tuple[ClassifierState, dict]:
    """Train a classifier head (and, for the transformer path, the encoder).

    Returns the trained state plus a log with one entry per epoch. The seed
    controls head initialization and batch order; a non-finite loss aborts
    with the epoch and batch in the message rather than training onward
    into garbage.
    """
    task_mode = task_mode_for(label_space.task)
    validate_loss(architecture, task_mode, config.loss)
    if config.seed is None:
        raise TrainingError("a seed is required for training")
    train_examples = dataset.split_examples("train")
    if not train_examples:
        raise TrainingError("empty train split")
    if architecture == ARCH_ORGMODEL2:
        if descriptions is None or len(descriptions) != label_space.n:
            raise TrainingError(
                f"pair training needs {label_space.n} label descriptions in label order"
            )

    if encoder.config.kind == KIND_TRANSFORMER:
        from orgclass.models.finetune import train_torch

        return train_torch(
            architecture, dataset, label_space, config, encoder, description_style, descriptions
        )

    rng = np.random.default_rng(config.seed)
    H = encoder.hidden_size
    n = label_space.n

    if architecture == ARCH_ORGMODEL1:
        X = np.stack([encoder.encode(ex.text) for ex in train_examples])
        if task_mode == MODE_MULTILABEL:
            Y = np.stack([encode_targets(ex, label_space) for ex in train_examples])
        else:
            Y = np.array([encode_targets(ex, label_space) for ex in train_examples], dtype=np.int64)
        head_width = n
    else:
        # One row per (example, description) pair, example-major, so the
        # pair block of example i is rows [i*n, (i+1)*n).
        X = np.stack(
            [
                encoder.encode_pair(ex.text, desc)
                for ex in train_examples
                for desc in descriptions
            ]
        )
        Y = np.stack(
            [
                np.array(
                    [1.0 if label in ex.labels else 0.0 for label in label_space.labels],
                    dtype=np.float64,
                )
                for ex in train_examples
            ]
        )
        head_width = 1

    W = rng.normal(0.0, HEAD_INIT_STD, size=(H, head_width))
    b = np.zeros(head_width, dtype=np.float64)
    opt = DecoupledAdam(
        {"W": W, "b": b}, lr=config.learning_rate, weight_decay=config.weight_decay
    )

    n_train = len(train_examples)
    dev_examples = dataset.split_examples("dev")
    if config.early_stop_metric == "dev_macro_f1" and not dev_examples:
        raise TrainingError("early stopping on dev macro-F1 requires a dev split")

    history: list[dict] = []
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        total = 0.0
        count = 0
        for start in range(0, n_train, config.batch_size):
            batch = order[start : start + config.batch_size]
            if architecture == ARCH_ORGMODEL1:
                Xb = X[batch]
                Z = Xb @ W + b
                if config.loss == LOSS_BINARY_CROSS_ENTROPY:
                    loss, dZ = _bce_loss_grad(Z, Y[batch])
                else:
                    loss, dZ = _ce_loss_grad(Z, Y[batch])
            else:
                pair_rows = np.concatenate([np.arange(i * n, (i + 1) * n) for i in batch])
                Xb = X[pair_rows]
                Z = Xb @ W + b
                loss, dZ = _bce_loss_grad(Z, Y[batch].reshape(-1, 1))
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {start // config.batch_size}"
                )
            opt.step({"W": Xb.T @ dZ, "b": dZ.sum(axis=0)})
            total += loss * len(batch)
            count += len(batch)
        entry = {"epoch": epoch, "loss": total / count}
        if config.early_stop_metric == "dev_macro_f1":
            entry["dev_macro_f1"] = _dev_macro_f1(
                architecture, task_mode, label_space, W, b, encoder,
                dev_examples, descriptions, description_style, config,
            )
            if best is None or entry["dev_macro_f1"] > best[0]:
                best = (entry["dev_macro_f1"], W.copy(), b.copy())
        history.append(entry)
        log.info("epoch %d: loss %.6f", epoch, entry["loss"])

    if best is not None:
        _, W, b = best

    state = ClassifierState(
        architecture=architecture,
        task_mode=task_mode,
        label_space=label_space,
        weights=W,
        bias=b,
        encoder_config=encoder.config,
        description_style=description_style,
        descriptions=tuple(descriptions) if descriptions is not None else None,
        train_config=config.to_dict(),
        seed=config.seed,
    )
    train_log = {
        "architecture": architecture,
        "task_mode": task_mode,
        "loss": config.loss,
        "n_train": n_train,
        "n_pairs": n_train * n if architecture == ARCH_ORGMODEL2 else None,
        "epochs": history,
    }
    return state, train_log


def _dev_macro_f1(
    architecture, task_mode, label_space, W, b, encoder,
    dev_examples, descriptions, description_style, config,
) -> float:
    state = ClassifierState(
        architecture=architecture,
        task_mode=task_mode,
        label_space=label_space,
        weights=W,
        bias=b,
        encoder_config=encoder.config,
        description_style=description_style,
        descriptions=tuple(descriptions) if descriptions is not None else None,
        train_config=config.to_dict(),
        seed=config.seed,
    )
    preds = predict_dataset(dev_examples, state, encoder, descriptions)
    report = evaluate(
        {ex.org_id: ex.labels for ex in dev_examples},
        {p.org_id: p.labels for p in preds},
        list(label_space.labels),
        MacroF1Mode.MEAN_OF_F1,
    )
    return report.macro[2]
