"""Acceptance gate: one test per release criterion.

Each test wraps its assertions in the shared `criterion` reporter so the
run prints an explicit PASS/FAIL line per criterion in the terminal
summary, independent of pytest's own tally.
"""
import json
import random
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from conftest import FIXTURES, FakeSession, criterion, edgar_routes
from orgclass.cli import main
from orgclass.datasets import (
    Example,
    LabeledDataset,
    LabelSpace,
    build_sic_dataset,
    save_dataset,
    split_dataset,
)
from orgclass.ingestion import (
    CompanyRecord,
    DiskCache,
    EdgarClient,
    FixtureSearchProvider,
    PoliteFetcher,
    RateLimiter,
    build_pseudodoc,
    fetch_company_record,
)
from orgclass.metrics import MacroF1Mode, evaluate, f1_score, render_aggregate_rows
from orgclass.models import (
    ClassifierState,
    EncoderConfig,
    HashedNgramEncoder,
    TrainConfig,
    orgmodel1_scores,
    orgmodel2_strengths,
    predict_dataset,
    predict_multilabel,
    train,
)
from orgclass.models.train import _bce_loss_grad, _ce_loss_grad


# --------------------------------------------------------------------------
# 1. Metrics oracle equivalence
# --------------------------------------------------------------------------

def reference_metrics(golds, preds, labels, mode):
    """Straight-line re-implementation of the evaluation arithmetic."""
    per_class = []
    pooled_tp = pooled_fp = pooled_fn = 0

    def div(a, b):
        return a / b if b else 0.0

    def harm(p, r):
        if p <= 0.0 or r <= 0.0:
            return 0.0
        return 2.0 / (1.0 / p + 1.0 / r)

    for label in labels:
        tp = fp = fn = 0
        for org_id in golds:
            in_gold = label in golds[org_id]
            in_pred = label in preds[org_id]
            if in_gold and in_pred:
                tp += 1
            elif in_pred:
                fp += 1
            elif in_gold:
                fn += 1
        p = div(tp, tp + fp)
        r = div(tp, tp + fn)
        per_class.append((p, r, harm(p, r)))
        pooled_tp += tp
        pooled_fp += fp
        pooled_fn += fn

    micro_p = div(pooled_tp, pooled_tp + pooled_fp)
    micro_r = div(pooled_tp, pooled_tp + pooled_fn)
    micro = (micro_p, micro_r, harm(micro_p, micro_r))
    macro_p = sum(m[0] for m in per_class) / len(per_class)
    macro_r = sum(m[1] for m in per_class) / len(per_class)
    if mode == "mean_of_f1":
        macro_f1 = sum(m[2] for m in per_class) / len(per_class)
    else:
        macro_f1 = harm(macro_p, macro_r)
    return per_class, micro, (macro_p, macro_r, macro_f1)


def test_criterion_1_metrics_match_oracle():
    with criterion(1, "metrics oracle equivalence"):
        rng = random.Random(12345)
        started = time.monotonic()
        for trial in range(1000):
            n_classes = rng.randint(1, 5)
            labels = [f"C{j}" for j in range(n_classes)]
            n_examples = rng.randint(1, 50)
            golds = {}
            preds = {}
            for i in range(n_examples):
                golds[f"e{i}"] = {l for l in labels if rng.random() < 0.4}
                preds[f"e{i}"] = {l for l in labels if rng.random() < 0.4}
            mode = rng.choice(["mean_of_f1", "hmean_of_macro_pr"])

            report = evaluate(golds, preds, labels, mode)
            ref_class, ref_micro, ref_macro = reference_metrics(golds, preds, labels, mode)

            for m, (p, r, f1) in zip(report.per_class, ref_class):
                assert (m.precision, m.recall, m.f1) == (p, r, f1)
            assert report.micro == ref_micro
            assert report.macro == ref_macro
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"1000 oracle comparisons took {elapsed:.1f}s"


# --------------------------------------------------------------------------
# 2. Published per-class table is internally consistent
# --------------------------------------------------------------------------

# Per-class F1 columns of the 27-class comparison table, as printed.
TENK_F1 = [
    62.9, 67.1, 65.8, 68.8, 65.6, 41.2, 15.2, 32.1, 51.9, 62.2, 62.1, 74.4,
    20.6, 18.1, 81.6, 44.2, 82.8, 70.5, 81.3, 69.3, 66.1, 50.0, 70.4, 27.3,
    51.9, 72.0, 35.1,
]
GOOGLE_F1 = [
    81.4, 83.4, 83.3, 73.1, 73.6, 59.2, 45.3, 46.9, 71.1, 66.6, 72.2, 79.1,
    53.8, 44.4, 84.7, 63.3, 91.3, 87.4, 80.0, 91.0, 70.0, 52.1, 84.5, 32.3,
    69.4, 83.0, 57.1,
]
# Printed macro rows, as (precision, recall) percentages.
GOOGLE_MACRO_PR = (69.9, 70.0)
TENK_MACRO_PR = (57.4, 56.4)


def test_criterion_2_published_table_consistency():
    with criterion(2, "published macro rows consistent with per-class F1"):
        assert len(GOOGLE_F1) == 27 and len(TENK_F1) == 27

        assert sum(GOOGLE_F1) / 27 == pytest.approx(69.6, abs=0.05)
        p, r = GOOGLE_MACRO_PR
        assert 100 * f1_score(p / 100, r / 100) == pytest.approx(69.95, abs=0.05)

        assert sum(TENK_F1) / 27 == pytest.approx(55.94, abs=0.05)
        p, r = TENK_MACRO_PR
        assert 100 * f1_score(p / 100, r / 100) == pytest.approx(56.90, abs=0.05)

        # The two aggregations disagree, so a report must say which one it
        # used.
        golds = {"a": {"X"}, "b": {"Y"}}
        preds = {"a": {"X"}, "b": {"X"}}
        for mode in MacroF1Mode:
            report = evaluate(golds, preds, ["X", "Y"], mode)
            assert report.to_dict()["macro_f1_mode"] == mode.value


# --------------------------------------------------------------------------
# 3. Renderer reproduces the published aggregate rows
# --------------------------------------------------------------------------

AGGREGATE_ROWS = {
    "OrgModel-1": (69.9, 70.0, 69.9),
    "Short": (47.0, 49.9, 46.1),
    "Tree": (73.6, 73.6, 73.4),
    "Long": (73.6, 73.5, 73.1),
}


def test_criterion_3_renderer_reproduces_published_rows():
    with criterion(3, "aggregate renderer matches published rows at 1 d.p."):
        fractions = {
            name: tuple(v / 100 for v in triple)
            for name, triple in AGGREGATE_ROWS.items()
        }
        text = render_aggregate_rows(fractions)
        got = {}
        for line in text.splitlines()[1:]:
            parts = line.split()
            got[" ".join(parts[:-3])] = tuple(parts[-3:])
        for name, (p, r, f1) in AGGREGATE_ROWS.items():
            assert got[name] == (f"{p:.1f}", f"{r:.1f}", f"{f1:.1f}")


# --------------------------------------------------------------------------
# 4. Class filtering, balanced sampling, proportional splits
# --------------------------------------------------------------------------

def synthetic_companies():
    sizes = [150, 155, 160, 165, 170, 175, 180, 185, 190, 195, 198, 199,
             200, 205, 210, 215, 220, 230, 240, 250, 260, 270, 280, 290,
             300, 310, 320, 340, 370, 400]
    codes = [str(c) for c in range(10, 40)]
    companies = []
    cik = 10_000
    for code, size in zip(codes, sizes):
        for _ in range(size):
            companies.append(CompanyRecord(
                cik=cik, name=f"Firm {cik}", sic=code + "99",
                sic_description="", filing_text=f"business of firm {cik}",
                complete=True,
            ))
            cik += 1
    big_enough = [c for c, s in zip(codes, sizes) if s >= 200]
    return companies, big_enough


def test_criterion_4_dataset_construction(tmp_path):
    with criterion(4, "class floor, balanced sampling, proportional splits"):
        companies, big_enough = synthetic_companies()
        assert len(big_enough) == 18

        def build():
            ds = build_sic_dataset(companies, per_class=200, min_class=200, seed=42)
            # 18 classes x 200 = 3600 examples; the published 5400 split
            # (2700, 900, 1800) scales by 2/3 to (1800, 600, 1200).
            return split_dataset(ds, (1800, 600, 1200), seed=42)

        ds = build()
        assert list(ds.label_space.labels) == big_enough
        per_class = {}
        for ex in ds.examples:
            (label,) = ex.labels
            per_class[label] = per_class.get(label, 0) + 1
        assert all(count == 200 for count in per_class.values())
        assert len(ds.examples) == 3600

        split_counts = {}
        for ex in ds.examples:
            split_counts[ex.split] = split_counts.get(ex.split, 0) + 1
        assert split_counts == {"train": 1800, "dev": 600, "test": 1200}

        save_dataset(build(), tmp_path / "a")
        save_dataset(build(), tmp_path / "b")
        for name in ("dataset.jsonl", "labelspace.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# --------------------------------------------------------------------------
# 5. Output shapes and decision boundaries
# --------------------------------------------------------------------------

def test_criterion_5_shapes_and_threshold():
    with criterion(5, "score shapes, inclusive threshold, pair counts"):
        labels = tuple(f"L{j:02d}" for j in range(15))
        space = LabelSpace(task="issues", labels=labels)
        enc_cfg = EncoderConfig(kind="hashed_ngram_baseline", hidden_size=32)
        encoder = HashedNgramEncoder(enc_cfg)

        flat = ClassifierState(
            architecture="orgmodel1", task_mode="multilabel", label_space=space,
            weights=np.zeros((32, 15)), bias=np.zeros(15), encoder_config=enc_cfg,
        )
        scores = orgmodel1_scores("community river cleanup", flat, encoder)
        assert scores.shape == (15,)
        # A zero head puts every sigmoid score exactly on the 0.5 boundary,
        # which the threshold rule includes.
        assert predict_multilabel(scores, threshold=0.5) == set(range(15))
        assert predict_multilabel(np.array([0.5 - 1e-12]), threshold=0.5) == set()

        pair = ClassifierState(
            architecture="orgmodel2", task_mode="multilabel", label_space=space,
            weights=np.ones((32, 1)), bias=np.array([0.0]), encoder_config=enc_cfg,
        )
        descriptions = tuple(f"description of topic {j}" for j in range(15))
        strengths = orgmodel2_strengths("community river cleanup", descriptions, pair, encoder)
        assert strengths.shape == (15,)
        assert ((strengths >= 0.0) & (strengths <= 1.0)).all()

        examples = tuple(
            Example(org_id=f"o{i}", text=f"org text {i}",
                    labels=frozenset({labels[i % 15]}), split="train")
            for i in range(4)
        )
        ds = LabeledDataset(label_space=space, examples=examples, provenance={})
        cfg = TrainConfig(loss="binary_cross_entropy", epochs=1, batch_size=2,
                          learning_rate=0.01, seed=0)
        _, log = train("orgmodel2", ds, space, cfg, encoder,
                       description_style="short", descriptions=descriptions)
        assert log["n_pairs"] == 4 * 15


# --------------------------------------------------------------------------
# 6. Analytic gradients match finite differences
# --------------------------------------------------------------------------

def test_criterion_6_gradient_check():
    with criterion(6, "head gradients match central differences"):
        encoder = HashedNgramEncoder(EncoderConfig(kind="hashed_ngram_baseline", hidden_size=32))
        rng = np.random.default_rng(0)
        words = ["river", "solar", "waste", "farm", "mill", "bank", "air", "soil"]

        def random_X(n_rows):
            texts = [
                " ".join(rng.choice(words, size=5)) + f" t{i}" for i in range(n_rows)
            ]
            return np.stack([encoder.encode(t) for t in texts])

        eps = 1e-6
        for trial in range(20):
            B = int(rng.integers(2, 7))
            C = int(rng.integers(2, 5))
            X = random_X(B)
            W = rng.normal(0.0, 0.5, size=(32, C))
            b = rng.normal(0.0, 0.5, size=C)
            use_bce = trial % 2 == 0
            if use_bce:
                Y = rng.integers(0, 2, size=(B, C)).astype(np.float64)
                loss_grad = lambda Z: _bce_loss_grad(Z, Y)
            else:
                idx = rng.integers(0, C, size=B)
                loss_grad = lambda Z: _ce_loss_grad(Z, idx)

            _, dZ = loss_grad(X @ W + b)
            dW = X.T @ dZ
            db = dZ.sum(axis=0)

            def loss_at(Wv, bv):
                return loss_grad(X @ Wv + bv)[0]

            def check(analytic, numeric):
                denom = max(abs(analytic), abs(numeric), 1e-8)
                assert abs(analytic - numeric) / denom < 1e-4

            for i in range(32):
                for j in range(C):
                    up, down = W.copy(), W.copy()
                    up[i, j] += eps
                    down[i, j] -= eps
                    check(dW[i, j], (loss_at(up, b) - loss_at(down, b)) / (2 * eps))
            for j in range(C):
                up, down = b.copy(), b.copy()
                up[j] += eps
                down[j] -= eps
                check(db[j], (loss_at(W, up) - loss_at(W, down)) / (2 * eps))


# --------------------------------------------------------------------------
# 7. Toy corpus trains to high held-out macro-F1
# --------------------------------------------------------------------------

def toy_corpus(task: str, labels: tuple[str, ...]) -> LabeledDataset:
    """10 classes x 40 documents with disjoint per-class vocabularies."""
    rng = np.random.default_rng(7)
    examples = []
    i = 0
    for c, label in enumerate(labels):
        vocab = [f"c{c}w{j}" for j in range(8)]
        for _ in range(40):
            text = " ".join(rng.choice(vocab, size=6)) + f" d{i}"
            examples.append(Example(org_id=f"o{i}", text=text, labels=frozenset({label})))
            i += 1
    space = LabelSpace(task=task, labels=labels)
    ds = LabeledDataset(label_space=space, examples=tuple(examples), provenance={})
    return split_dataset(ds, (300, 0, 100), seed=1)


def test_criterion_7_toy_training():
    with criterion(7, "toy corpus reaches macro-F1 >= 0.95"):
        started = time.monotonic()
        encoder = HashedNgramEncoder(EncoderConfig(kind="hashed_ngram_baseline", hidden_size=512))

        ds = toy_corpus("issues", tuple(f"K{c}" for c in range(10)))
        cfg = TrainConfig(loss="binary_cross_entropy", epochs=20, batch_size=16,
                          learning_rate=0.1, seed=0)
        state, log = train("orgmodel1", ds, ds.label_space, cfg, encoder)
        bce_losses = [e["loss"] for e in log["epochs"]]
        assert bce_losses[4] < bce_losses[0]

        test_examples = ds.split_examples("test")
        assert len(test_examples) == 100
        preds = predict_dataset(test_examples, state, encoder)
        report = evaluate(
            {ex.org_id: ex.labels for ex in test_examples},
            {p.org_id: p.labels for p in preds},
            list(ds.label_space.labels),
            MacroF1Mode.MEAN_OF_F1,
        )
        assert report.macro[2] >= 0.95

        sic_ds = toy_corpus("sic2", tuple(str(c) for c in range(10, 20)))
        ce_cfg = TrainConfig(loss="cross_entropy", epochs=5, batch_size=16,
                             learning_rate=0.1, seed=0)
        _, ce_log = train("orgmodel1", sic_ds, sic_ds.label_space, ce_cfg, encoder)
        ce_losses = [e["loss"] for e in ce_log["epochs"]]
        assert ce_losses[4] < ce_losses[0]

        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"toy training took {elapsed:.1f}s"


# --------------------------------------------------------------------------
# 8. Recorded ingestion fixtures parse to golden snapshots
# --------------------------------------------------------------------------

def test_criterion_8_ingestion_fixtures(tmp_path):
    with criterion(8, "recorded filings and snippets parse to golden outputs"):
        session = FakeSession(edgar_routes())
        fetcher = PoliteFetcher(
            user_agent="orgclass tests test@example.com",
            rate_limiter=RateLimiter(min_interval=0.0),
            session=session,
        )
        client = EdgarClient(fetcher, DiskCache(tmp_path / "cache", "edgar"))

        golden = {
            rec["cik"]: rec
            for rec in json.loads((FIXTURES / "edgar" / "golden_records.json").read_text())
        }
        records = {cik: fetch_company_record(cik, client) for cik in (1001, 1002, 1003)}
        for cik, record in records.items():
            assert record.to_dict() == golden[cik]

        # The business-section heading appears twice in the 2023 filing,
        # once in the table of contents; only the body occurrence counts.
        body = records[1001].filing_text
        assert body.startswith("Apex Widget Works designs")
        assert "Item 1" not in body
        assert "Risk Factors" not in body

        # A filing with no recognizable business section: kept, but with
        # empty text, so dataset eligibility later drops it.
        assert records[1002].complete
        assert records[1002].filing_text == ""

        provider = FixtureSearchProvider(FIXTURES / "search_results.json")
        doc = build_pseudodoc("Apex Widget Works Inc", provider, top_n=10)
        expected = " ".join(
            f"snippet {r} about precision widgets" for r in range(1, 11) if r != 4
        )
        assert doc.text == expected
        assert doc.usable

        ghost = build_pseudodoc("Ghostly Nonprofit", provider, top_n=10)
        assert ghost.text == "" and not ghost.usable


# --------------------------------------------------------------------------
# 9. Replay determinism through the command-line pipeline
# --------------------------------------------------------------------------

def test_criterion_9_replay_determinism(tmp_path):
    with criterion(9, "replayed stages produce byte-identical artifacts"):
        fixture = {
            f"Org {i}": [{"title": "t", "link": f"https://example.com/{i}",
                          "snippet": f"w{i % 3}a w{i % 3}b org {i}"}]
            for i in range(9)
        }
        fixture_path = tmp_path / "search.json"
        fixture_path.write_text(json.dumps(fixture))
        orgs_path = tmp_path / "orgs.jsonl"
        orgs_path.write_text("".join(
            json.dumps({"org_id": f"o{i}", "name": f"Org {i}",
                        "issues": [["Rivers", "Smog", "Landfills"][i % 3]]}) + "\n"
            for i in range(9)
        ))
        tax_path = tmp_path / "issues.json"
        tax_path.write_text(json.dumps({
            "integrated": [{"name": n, "description": n.lower()}
                           for n in ("Water", "Air", "Waste")],
            "components": [{"name": c, "parents": [p]} for c, p in
                           [("Rivers", "Water"), ("Smog", "Air"), ("Landfills", "Waste")]],
        }))

        config_path = tmp_path / "run.yaml"
        config_path.write_text(yaml.safe_dump({
            "task": "issues", "seed": 13,
            "cache_dir": str(tmp_path / "cache"),
            "issue_taxonomy": str(tax_path),
            "k": 3, "train_size": 6, "dev_size": 0, "test_size": 3,
            "hidden_size": 64, "epochs": 3, "batch_size": 4, "learning_rate": 0.1,
            "search_provider": "fixture", "search_fixture": str(fixture_path),
        }))

        snippets = tmp_path / "snippets"
        assert main(["fetch-snippets", "--config", str(config_path),
                     "--orgs", str(orgs_path), "--out", str(snippets)]) == 0

        def replay(out: Path) -> None:
            assert main(["build-dataset", "--config", str(config_path),
                         "--orgs", str(orgs_path),
                         "--pseudodocs", str(snippets / "pseudodocs.jsonl"),
                         "--out", str(out / "dataset")]) == 0
            assert main(["train", "--config", str(config_path),
                         "--dataset", str(out / "dataset"),
                         "--out", str(out / "model")]) == 0
            assert main(["predict", "--config", str(config_path),
                         "--model", str(out / "model"),
                         "--dataset", str(out / "dataset"), "--split", "test",
                         "--out", str(out / "predictions")]) == 0

        replay(tmp_path / "run1")
        replay(tmp_path / "run2")

        artifacts = [
            "dataset/dataset.jsonl",
            "dataset/labelspace.json",
            "model/head.npz",
            "model/model.json",
            "predictions/predictions.jsonl",
        ]
        for rel in artifacts:
            a = (tmp_path / "run1" / rel).read_bytes()
            b = (tmp_path / "run2" / rel).read_bytes()
            assert a == b, f"{rel} differs between replays"

        hashes = set()
        for run in ("run1", "run2"):
            for stage in ("dataset", "model", "predictions"):
                manifest = json.loads((tmp_path / run / stage / "run.json").read_text())
                hashes.add(manifest["config_hash"])
        assert len(hashes) == 1
