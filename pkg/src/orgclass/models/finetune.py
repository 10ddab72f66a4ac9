"""Joint encoder + head fine-tuning under torch.

Mirrors the numpy head-training semantics: same losses, same pair scheme,
same config fields. Everything runs through the transformer encoder's own
tokenizer and model so the trained weights stay inside the encoder object,
and the returned state carries the head in numpy form for the shared
inference path.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from orgclass.datasets import LabeledDataset, LabelSpace, encode_targets
from orgclass.models.classifier import ARCH_ORGMODEL1, ClassifierState

log = logging.getLogger(__name__)


def train_torch(
    architecture: str,
    dataset: LabeledDataset,
    label_space: LabelSpace,
    config,
    encoder,
    description_style: str | None = None,
    descriptions: Sequence[str] | None = None,
) -> tuple[ClassifierState, dict]:
    """Fine-tune the transformer encoder together with a fresh linear head."""
    import torch

    from orgclass.models.train import (
        LOSS_BINARY_CROSS_ENTROPY,
        TrainingError,
        task_mode_for,
    )

    task_mode = task_mode_for(label_space.task)
    train_examples = dataset.split_examples("train")

    torch.manual_seed(config.seed)
    device = getattr(encoder, "device", "cpu")
    model = encoder.model
    tokenizer = encoder.tokenizer
    hidden = encoder.hidden_size
    n = label_space.n
    head_width = n if architecture == ARCH_ORGMODEL1 else 1

    head = torch.nn.Linear(hidden, head_width).to(device)
    torch.nn.init.normal_(head.weight, std=0.02)
    torch.nn.init.zeros_(head.bias)

    params = list(model.parameters()) + list(head.parameters())
    opt = torch.optim.AdamW(params, lr=config.learning_rate, weight_decay=config.weight_decay)
    bce = torch.nn.BCEWithLogitsLoss()
    ce = torch.nn.CrossEntropyLoss()

    rng = np.random.default_rng(config.seed)
    n_train = len(train_examples)
    history: list[dict] = []

    model.train()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        total = 0.0
        count = 0
        for start in range(0, n_train, config.batch_size):
            batch = [train_examples[i] for i in order[start : start + config.batch_size]]
            opt.zero_grad()
            if architecture == ARCH_ORGMODEL1:
                enc = tokenizer(
                    [ex.text for ex in batch],
                    truncation=True,
                    max_length=encoder.config.max_tokens,
                    padding=True,
                    return_tensors="pt",
                ).to(device)
                summary = model(**enc).last_hidden_state[:, 0]
                logits = head(summary)
                if config.loss == LOSS_BINARY_CROSS_ENTROPY:
                    targets = torch.tensor(
                        np.stack([encode_targets(ex, label_space) for ex in batch]),
                        dtype=torch.float32,
                        device=device,
                    )
                    loss = bce(logits, targets)
                else:
                    targets = torch.tensor(
                        [encode_targets(ex, label_space) for ex in batch],
                        dtype=torch.long,
                        device=device,
                    )
                    loss = ce(logits, targets)
            else:
                pairs_a = [ex.text for ex in batch for _ in descriptions]
                pairs_b = [desc for _ in batch for desc in descriptions]
                enc = tokenizer(
                    pairs_a,
                    pairs_b,
                    truncation="longest_first",
                    max_length=encoder.config.max_tokens,
                    padding=True,
                    return_tensors="pt",
                ).to(device)
                summary = model(**enc).last_hidden_state[:, 0]
                logits = head(summary).reshape(-1)
                targets = torch.tensor(
                    [
                        1.0 if label in ex.labels else 0.0
                        for ex in batch
                        for label in label_space.labels
                    ],
                    dtype=torch.float32,
                    device=device,
                )
                loss = bce(logits, targets)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss.item()} at epoch {epoch}, batch {start // config.batch_size}"
                )
            loss.backward()
            opt.step()
            total += loss.item() * len(batch)
            count += len(batch)
        history.append({"epoch": epoch, "loss": total / count})
        log.info("epoch %d: loss %.6f", epoch, history[-1]["loss"])
    model.eval()

    state = ClassifierState(
        architecture=architecture,
        task_mode=task_mode,
        label_space=label_space,
        weights=head.weight.detach().cpu().numpy().T.astype(np.float64),
        bias=head.bias.detach().cpu().numpy().astype(np.float64),
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
        "n_pairs": n_train * n if architecture != ARCH_ORGMODEL1 else None,
        "epochs": history,
    }
    return state, train_log
