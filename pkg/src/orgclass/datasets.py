"""Dataset construction for the two classification tasks.

The environmental-issue dataset is multi-label: component issues map onto
integrated issues, the top-k integrated issues by organization count become
the label space, and each kept organization carries its in-space labels and
search-snippet text. The industry-code dataset is single-label: complete
company records grouped by 2-digit code prefix, classes below a membership
floor dropped, and a fixed-size sample drawn per class under a seed.

Builds are deterministic end to end: given the same raw inputs and seed,
the serialized dataset is byte-identical.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Collection, Iterable, Mapping, Sequence

import numpy as np

from orgclass.ingestion.edgar import CompanyRecord
from orgclass.ingestion.search import PseudoDoc
from orgclass.storage import canonical_json, read_json, read_jsonl, sha256_hex, write_json, write_jsonl
from orgclass.taxonomy import IssueTaxonomy, code_prefix, integrated_labels_for, select_top_issues

log = logging.getLogger(__name__)

TASK_ISSUES = "issues"
TASK_SIC2 = "sic2"

SPLITS = ("train", "dev", "test")


class DatasetError(ValueError):
    """Raised for inconsistent dataset construction inputs."""


@dataclass(frozen=True)
class Example:
    org_id: str
    text: str
    labels: frozenset[str]
    split: str = ""


@dataclass(frozen=True)
class LabelSpace:
    task: str
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DatasetError(f"label {label!r} not in the {self.task} label space") from None


@dataclass(frozen=True)
class LabeledDataset:
    label_space: LabelSpace
    examples: tuple[Example, ...]
    provenance: dict

    def split_examples(self, split: str) -> list[Example]:
        return [ex for ex in self.examples if ex.split == split]


# --------------------------------------------------------------------------
# Environmental issues task
# --------------------------------------------------------------------------

def build_env_dataset(
    ppod_orgs: Mapping[str, Collection[str]],
    tax: IssueTaxonomy,
    pseudodocs: Mapping[str, PseudoDoc] | Iterable[PseudoDoc],
    k: int = 15,
) -> LabeledDataset:
    """Multi-label dataset over the k most common integrated issues.

    ppod_orgs maps org id to its component issue names. The label space is
    selected over all labeled orgs, before any text filtering, so text
    coverage cannot shift which issues make the cut. Orgs without an
    in-space label or without a usable pseudo-document are dropped, and
    both organization counts end up in the provenance.
    """
    if not isinstance(pseudodocs, Mapping):
        pseudodocs = {doc.org_id: doc for doc in pseudodocs}

    org_integrated = {
        org_id: integrated_labels_for(components, tax)
        for org_id, components in ppod_orgs.items()
    }
    top = select_top_issues(org_integrated, k)
    space = LabelSpace(task=TASK_ISSUES, labels=tuple(top))
    in_space = set(top)

    examples = []
    no_label = no_text = 0
    for org_id in sorted(org_integrated):
        labels = org_integrated[org_id] & in_space
        if not labels:
            no_label += 1
            continue
        doc = pseudodocs.get(org_id)
        if doc is None or not doc.usable:
            no_text += 1
            continue
        examples.append(Example(org_id=org_id, text=doc.text, labels=frozenset(labels)))
    if no_text:
        log.info("issues dataset: dropped %d labeled orgs without usable text", no_text)

    provenance = {
        "task": TASK_ISSUES,
        "k": k,
        "orgs_labeled": len(org_integrated),
        "orgs_with_in_space_label": len(org_integrated) - no_label,
        "orgs_kept": len(examples),
        "dropped_no_in_space_label": no_label,
        "dropped_no_usable_text": no_text,
    }
    return LabeledDataset(label_space=space, examples=tuple(examples), provenance=provenance)


# --------------------------------------------------------------------------
# Industry code task
# --------------------------------------------------------------------------

def build_sic_dataset(
    companies: Sequence[CompanyRecord],
    per_class: int = 200,
    min_class: int = 200,
    seed: int | None = None,
    texts: Mapping[str, str] | None = None,
) -> LabeledDataset:
    """Single-label dataset over 2-digit code classes, balanced by sampling.

    Only complete records with non-empty text are eligible; the filter runs
    before grouping so class membership is counted over usable examples.
    By default the text is the company's filing extract; passing ``texts``
    (org id → text) swaps in another source, e.g. search snippets, without
    changing the sampling frame semantics.

    Classes with at least min_class eligible members are kept and exactly
    per_class members are drawn from each, uniformly without replacement
    under the seed.
    """
    if seed is None:
        raise DatasetError("a seed is required for class sampling")

    def text_of(rec: CompanyRecord) -> str:
        if texts is not None:
            return texts.get(str(rec.cik), "")
        return rec.filing_text

    eligible = [rec for rec in companies if rec.complete and text_of(rec)]
    groups: dict[str, list[CompanyRecord]] = {}
    for rec in eligible:
        groups.setdefault(code_prefix(rec.sic, 2), []).append(rec)

    kept = sorted(code for code, members in groups.items() if len(members) >= min_class)
    if not kept:
        raise DatasetError(f"no class reaches min_class={min_class}")
    short = [code for code in kept if len(groups[code]) < per_class]
    if short:
        raise DatasetError(f"classes below per_class={per_class} after filtering: {short}")

    rng = np.random.default_rng(seed)
    examples = []
    for code in kept:
        members = sorted(groups[code], key=lambda rec: str(rec.cik))
        idx = rng.choice(len(members), size=per_class, replace=False)
        idx.sort()
        for i in idx:
            rec = members[i]
            examples.append(
                Example(org_id=str(rec.cik), text=text_of(rec), labels=frozenset({code}))
            )

    provenance = {
        "task": TASK_SIC2,
        "per_class": per_class,
        "min_class": min_class,
        "seed": seed,
        "text_source": "override" if texts is not None else "filing",
        "n_companies": len(companies),
        "n_eligible": len(eligible),
        "classes_kept": kept,
    }
    space = LabelSpace(task=TASK_SIC2, labels=tuple(kept))
    return LabeledDataset(label_space=space, examples=tuple(examples), provenance=provenance)


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------

def split_dataset(
    ds: LabeledDataset,
    sizes: tuple[int, int, int],
    seed: int | None = None,
) -> LabeledDataset:
    """Assign train/dev/test splits of the given sizes.

    Multi-label datasets get a uniform permutation with contiguous
    assignment. Single-label datasets are stratified: each split's size is
    apportioned across classes by largest remainder (extra slots go to the
    earliest classes in label order), so per-class counts differ by at most
    one between classes and are exactly equal whenever the arithmetic
    divides.
    """
    if seed is None:
        raise DatasetError("a seed is required for splitting")
    if len(sizes) != len(SPLITS):
        raise DatasetError(f"expected {len(SPLITS)} split sizes, got {len(sizes)}")
    total = sum(sizes)
    if total != len(ds.examples):
        raise DatasetError(f"split sizes sum to {total} but dataset has {len(ds.examples)} examples")
    if any(s < 0 for s in sizes):
        raise DatasetError(f"negative split size in {sizes}")

    rng = np.random.default_rng(seed)
    if ds.label_space.task == TASK_SIC2:
        assignment = _stratified_assignment(ds, sizes, rng)
    else:
        assignment = {}
        perm = rng.permutation(len(ds.examples))
        bounds = np.cumsum((0,) + tuple(sizes))
        for split, lo, hi in zip(SPLITS, bounds[:-1], bounds[1:]):
            for i in perm[lo:hi]:
                assignment[int(i)] = split

    examples = tuple(
        replace(ex, split=assignment[i]) for i, ex in enumerate(ds.examples)
    )
    provenance = dict(ds.provenance)
    provenance["split_sizes"] = list(sizes)
    provenance["split_seed"] = seed
    return LabeledDataset(label_space=ds.label_space, examples=examples, provenance=provenance)


def _apportion(n: int, remaining: list[int]) -> list[int]:
    """Split n slots across buckets proportionally to remaining capacity,
    by largest fractional remainder, never exceeding a bucket's capacity."""
    if n == 0:
        return [0] * len(remaining)
    total = sum(remaining)
    ideals = [n * r / total for r in remaining]
    quota = [min(int(x), cap) for x, cap in zip(ideals, remaining)]
    left = n - sum(quota)
    order = sorted(range(len(remaining)), key=lambda s: (-(ideals[s] - int(ideals[s])), s))
    while left > 0:
        for s in order:
            if left == 0:
                break
            if quota[s] < remaining[s]:
                quota[s] += 1
                left -= 1
    return quota


def _stratified_assignment(
    ds: LabeledDataset,
    sizes: tuple[int, int, int],
    rng: np.random.Generator,
) -> dict[int, str]:
    """Per-class split quotas, then a seeded shuffle within each class and
    contiguous assignment.

    Classes are processed in label order and each class's examples are
    apportioned against the splits' remaining capacity, so the split totals
    come out exact and per-class counts stay within one of each other.
    """
    by_class: dict[str, list[int]] = {label: [] for label in ds.label_space.labels}
    for i, ex in enumerate(ds.examples):
        (label,) = ex.labels
        by_class[label].append(i)

    remaining = list(sizes)
    assignment: dict[int, str] = {}
    for label in ds.label_space.labels:
        quota = _apportion(len(by_class[label]), remaining)
        members = np.array(by_class[label], dtype=np.int64)
        members = members[rng.permutation(len(members))]
        start = 0
        for s, split in enumerate(SPLITS):
            for i in members[start:start + quota[s]]:
                assignment[int(i)] = split
            start += quota[s]
            remaining[s] -= quota[s]
    return assignment


# --------------------------------------------------------------------------
# Target encoding
# --------------------------------------------------------------------------

def encode_targets(example: Example, label_space: LabelSpace) -> np.ndarray | int:
    """Multi-hot vector for multi-label tasks; class index for single-label."""
    for label in example.labels:
        if label not in label_space.labels:
            raise DatasetError(f"label {label!r} not in the {label_space.task} label space")
    if label_space.task == TASK_SIC2:
        if len(example.labels) != 1:
            raise DatasetError(f"single-label task but example {example.org_id!r} has {len(example.labels)} labels")
        (label,) = example.labels
        return label_space.index(label)
    target = np.zeros(label_space.n, dtype=np.float64)
    for label in example.labels:
        target[label_space.index(label)] = 1.0
    return target


def decode_targets(target: np.ndarray | int, label_space: LabelSpace) -> frozenset[str]:
    if isinstance(target, (int, np.integer)):
        return frozenset({label_space.labels[int(target)]})
    return frozenset(
        label_space.labels[j] for j in range(label_space.n) if target[j] >= 0.5
    )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def save_dataset(ds: LabeledDataset, out_dir: str | Path) -> tuple[Path, Path]:
    """Write dataset.jsonl plus its labelspace.json sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / "dataset.jsonl"
    space_path = out_dir / "labelspace.json"
    rows = (
        {"org_id": ex.org_id, "text": ex.text, "labels": sorted(ex.labels), "split": ex.split}
        for ex in ds.examples
    )
    write_jsonl(data_path, rows)
    write_json(
        space_path,
        {
            "task": ds.label_space.task,
            "labels": list(ds.label_space.labels),
            "n": ds.label_space.n,
            "seed": ds.provenance.get("seed", ds.provenance.get("split_seed")),
            "provenance": ds.provenance,
            "provenance_hash": sha256_hex(canonical_json(ds.provenance).encode("utf-8")),
        },
    )
    return data_path, space_path


def load_dataset(out_dir: str | Path) -> LabeledDataset:
    out_dir = Path(out_dir)
    side = read_json(out_dir / "labelspace.json")
    space = LabelSpace(task=side["task"], labels=tuple(side["labels"]))
    examples = tuple(
        Example(
            org_id=row["org_id"],
            text=row["text"],
            labels=frozenset(row["labels"]),
            split=row["split"],
        )
        for row in read_jsonl(out_dir / "dataset.jsonl")
    )
    return LabeledDataset(label_space=space, examples=examples, provenance=side.get("provenance", {}))
