"""Per-class and aggregate classification metrics.

Gold and predicted labels are sets per example, so single-label tasks are
just the singleton-set case. Precision, recall, and F1 follow the usual
count definitions with a zero-denominator convention of 0.0. Macro F1 is
ambiguous in the wild (mean of per-class F1 vs harmonic mean of macro P and
macro R), so both are supported and the report records which one it used.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Collection, Iterable, Mapping, Sequence


class MetricsError(ValueError):
    """Raised for malformed evaluation inputs."""


@dataclass(frozen=True)
class ConfusionCounts:
    class_label: str
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class ClassMetrics:
    class_label: str
    precision: float
    recall: float
    f1: float


class MacroF1Mode(str, Enum):
    MEAN_OF_F1 = "mean_of_f1"
    HMEAN_OF_MACRO_PR = "hmean_of_macro_pr"


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0.0 if either is 0."""
    if precision <= 0.0 or recall <= 0.0:
        return 0.0
    return 2.0 / (1.0 / precision + 1.0 / recall)


def confusion_counts(
    golds: Sequence[Collection[str]],
    preds: Sequence[Collection[str]],
    class_label: str,
) -> ConfusionCounts:
    """TP/FP/FN for one class over parallel gold/predicted label sets."""
    if len(golds) != len(preds):
        raise MetricsError(f"{len(golds)} gold rows vs {len(preds)} prediction rows")
    tp = fp = fn = 0
    for gold, pred in zip(golds, preds):
        in_gold = class_label in gold
        in_pred = class_label in pred
        if in_gold and in_pred:
            tp += 1
        elif in_pred:
            fp += 1
        elif in_gold:
            fn += 1
    return ConfusionCounts(class_label=class_label, tp=tp, fp=fp, fn=fn)


def prf(counts: ConfusionCounts) -> ClassMetrics:
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return ClassMetrics(class_label=counts.class_label, precision=p, recall=r, f1=f1_score(p, r))


def micro_average(all_counts: Sequence[ConfusionCounts]) -> tuple[float, float, float]:
    """Pool counts across classes, then apply the per-class formulas."""
    if not all_counts:
        raise MetricsError("micro average of zero classes")
    tp = sum(c.tp for c in all_counts)
    fp = sum(c.fp for c in all_counts)
    fn = sum(c.fn for c in all_counts)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, f1_score(p, r)


def macro_average(
    per_class: Sequence[ClassMetrics],
    mode: MacroF1Mode | str = MacroF1Mode.MEAN_OF_F1,
) -> tuple[float, float, float]:
    """Unweighted means of per-class precision and recall; F1 per mode."""
    if not per_class:
        raise MetricsError("macro average of zero classes")
    mode = MacroF1Mode(mode)
    p = sum(m.precision for m in per_class) / len(per_class)
    r = sum(m.recall for m in per_class) / len(per_class)
    if mode is MacroF1Mode.MEAN_OF_F1:
        f1 = sum(m.f1 for m in per_class) / len(per_class)
    else:
        f1 = f1_score(p, r)
    return p, r, f1


@dataclass(frozen=True)
class MetricsReport:
    per_class_counts: list[ConfusionCounts]
    per_class: list[ClassMetrics]
    micro: tuple[float, float, float]
    macro: tuple[float, float, float]
    macro_f1_mode: MacroF1Mode

    def to_dict(self) -> dict:
        rows = []
        for counts, m in zip(self.per_class_counts, self.per_class):
            rows.append(
                {
                    "label": m.class_label,
                    "tp": counts.tp,
                    "fp": counts.fp,
                    "fn": counts.fn,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                }
            )
        return {
            "per_class": rows,
            "micro": {"precision": self.micro[0], "recall": self.micro[1], "f1": self.micro[2]},
            "macro": {"precision": self.macro[0], "recall": self.macro[1], "f1": self.macro[2]},
            "macro_f1_mode": self.macro_f1_mode.value,
        }

    def render_text(self) -> str:
        rows = {m.class_label: (m.precision, m.recall, m.f1) for m in self.per_class}
        rows["Micro Avg"] = self.micro
        rows["Macro Avg"] = self.macro
        return render_aggregate_rows(rows) + f"macro_f1_mode: {self.macro_f1_mode.value}\n"


def render_aggregate_rows(rows: Mapping[str, tuple[float, float, float]]) -> str:
    """Aligned text table of (precision, recall, f1) triples as percentages.

    Values are fractions in [0, 1]; rendering multiplies by 100 and keeps
    one decimal place, the same shape the result tables use.
    """
    width = max((len(name) for name in rows), default=5)
    width = max(width, len("Class"))
    lines = [f"{'Class':<{width}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}"]
    for name, (p, r, f1) in rows.items():
        lines.append(f"{name:<{width}}  {_pct(p):>9}  {_pct(r):>9}  {_pct(f1):>9}")
    return "\n".join(lines) + "\n"


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def evaluate(
    golds: Mapping[str, Collection[str]],
    preds: Mapping[str, Collection[str]],
    label_space: Sequence[str],
    macro_f1_mode: MacroF1Mode | str = MacroF1Mode.MEAN_OF_F1,
) -> MetricsReport:
    """Score predictions against golds, keyed by org id.

    Predictions must cover the gold set exactly; anything missing or extra
    is reported by id. Per-class rows come out in label-space order.
    """
    missing = sorted(set(golds) - set(preds))
    extra = sorted(set(preds) - set(golds))
    if missing or extra:
        raise MetricsError(
            f"prediction ids do not match gold ids (missing: {missing[:5]}, extra: {extra[:5]})"
        )
    order = sorted(golds)
    gold_rows = [golds[org_id] for org_id in order]
    pred_rows = [preds[org_id] for org_id in order]
    counts = [confusion_counts(gold_rows, pred_rows, label) for label in label_space]
    per_class = [prf(c) for c in counts]
    mode = MacroF1Mode(macro_f1_mode)
    return MetricsReport(
        per_class_counts=counts,
        per_class=per_class,
        micro=micro_average(counts),
        macro=macro_average(per_class, mode),
        macro_f1_mode=mode,
    )
