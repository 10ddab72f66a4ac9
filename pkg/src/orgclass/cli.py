"""Command-line pipeline driver.

Each subcommand runs one stage and communicates with the others only
through files, so any stage can be replayed from cached artifacts. Every
stage writes a run.json manifest recording the config hash, input file
hashes, seed, and timestamps.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import (
    PROVIDER_FIXTURE,
    STAGE_BUILD_DATASET,
    STAGE_EVALUATE,
    STAGE_FETCH_EDGAR,
    STAGE_FETCH_SNIPPETS,
    STAGE_PREDICT,
    STAGE_TRAIN,
    ConfigError,
    PipelineConfig,
    load_config,
)
from .datasets import (
    TASK_ISSUES,
    build_env_dataset,
    build_sic_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .ingestion import (
    CIK_INDEX_URL,
    CompanyRecord,
    DiskCache,
    EdgarClient,
    FixtureSearchProvider,
    PoliteFetcher,
    PseudoDoc,
    RateLimiter,
    SearchApiProvider,
    build_pseudodoc,
    fetch_cik_index,
    fetch_company_record,
    fetch_many,
)
from .metrics import MacroF1Mode, evaluate
from .models import (
    ARCH_ORGMODEL2,
    ModelConfigError,
    load_model,
    make_encoder,
    predict_dataset,
    save_model,
    train,
)
from .storage import (
    canonical_json,
    read_jsonl,
    sha256_hex,
    write_json,
    write_jsonl,
    write_run_manifest,
)
from .taxonomy import TaxonomyError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the contract here is 1.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="orgclass", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, help_: str, config_required: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=config_required, help="run config YAML")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--cache", help="override the cache directory")
        p.add_argument("--out", help="stage output directory")
        return p

    p = add(STAGE_FETCH_EDGAR, "download company records and 10-K Item 1 text")
    p.add_argument("--index", default=CIK_INDEX_URL, help="CIK index URL or local file")
    p.add_argument("--limit", type=int, help="stop after this many companies")

    p = add(STAGE_FETCH_SNIPPETS, "build search-snippet pseudo-documents")
    p.add_argument("--orgs", required=True, help="JSONL of organizations to query")

    p = add(STAGE_BUILD_DATASET, "assemble a labeled dataset with splits")
    p.add_argument("--orgs", help="issues task: JSONL of org ids and issue labels")
    p.add_argument("--pseudodocs", help="pseudodocs.jsonl from fetch-snippets")
    p.add_argument("--companies", help="sic2 task: companies.jsonl from fetch-edgar")

    p = add(STAGE_TRAIN, "train a classifier on a built dataset")
    p.add_argument("--dataset", required=True, help="directory from build-dataset")

    p = add(STAGE_PREDICT, "score a dataset split with a trained model")
    p.add_argument("--model", required=True, help="directory from train")
    p.add_argument("--dataset", required=True, help="directory from build-dataset")
    p.add_argument("--split", default="test", choices=["train", "dev", "test", "all"])

    p = add(STAGE_EVALUATE, "score predictions against gold labels", config_required=False)
    p.add_argument("--gold", required=True, help="JSONL with org_id and labels")
    p.add_argument("--pred", required=True, help="JSONL with org_id and labels")
    p.add_argument("--labelspace", help="labelspace.json fixing the class order")
    p.add_argument("--split", help="keep only gold rows with this split")
    p.add_argument(
        "--macro-f1-mode",
        choices=[m.value for m in MacroF1Mode],
        help="macro aggregation (default: config value or mean_of_f1)",
    )

    return parser


def _load_cfg(args: argparse.Namespace) -> PipelineConfig | None:
    if args.config is None:
        return None
    overrides = {"seed": args.seed, "cache_dir": args.cache}
    try:
        return load_config(args.config, overrides)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}")


def _out_dir(args: argparse.Namespace, cfg: PipelineConfig | None, stage_dir: str) -> Path:
    if args.out:
        return Path(args.out)
    base = cfg.out_dir if cfg is not None else "out"
    return Path(base) / stage_dir


def _fetcher(cfg: PipelineConfig) -> PoliteFetcher:
    limiter = RateLimiter(min_interval=1.0 / cfg.rate_limit_rps)
    return PoliteFetcher(user_agent=cfg.user_agent, rate_limiter=limiter)


def _manifest(
    out: Path,
    stage: str,
    cfg: PipelineConfig | None,
    inputs: dict,
    started: float,
    extra: dict | None = None,
    config_hash: str | None = None,
) -> None:
    if config_hash is None:
        config_hash = cfg.config_hash() if cfg is not None else ""
    seed = cfg.seed if cfg is not None else None
    write_run_manifest(out, stage, config_hash, inputs, seed, started, extra)


def cmd_fetch_edgar(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    cfg.require(STAGE_FETCH_EDGAR)
    started = time.time()
    out = _out_dir(args, cfg, "edgar")
    fetcher = _fetcher(cfg)
    client = EdgarClient(fetcher, DiskCache(cfg.cache_dir, "edgar"))

    entries = fetch_cik_index(args.index, fetcher)
    ciks = sorted({cik for _, cik in entries})
    if args.limit is not None:
        ciks = ciks[: args.limit]
    records = fetch_many(lambda cik: fetch_company_record(cik, client), ciks)
    write_jsonl(out / "companies.jsonl", (r.to_dict() for r in records))

    inputs = {"index": args.index} if Path(args.index).exists() else {}
    complete = sum(1 for r in records if r.complete)
    _manifest(out, STAGE_FETCH_EDGAR, cfg, inputs, started,
              extra={"companies": len(records), "complete": complete})
    print(f"wrote {len(records)} company records ({complete} complete) to {out}")
    return 0


def _org_entries(rows: list[dict]) -> list[tuple[str, str]]:
    """(org_id, name) pairs from a generic orgs file or companies.jsonl."""
    entries = []
    for row in rows:
        name = str(row.get("name", "")).strip()
        if not name:
            raise ValueError(f"org row without a name: {canonical_json(row)}")
        org_id = str(row.get("org_id") or row.get("cik") or name)
        entries.append((org_id, name))
    return entries


def cmd_fetch_snippets(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    cfg.require(STAGE_FETCH_SNIPPETS)
    started = time.time()
    out = _out_dir(args, cfg, "snippets")
    if cfg.search_provider == PROVIDER_FIXTURE:
        provider = FixtureSearchProvider(cfg.search_fixture)
    else:
        provider = SearchApiProvider(_fetcher(cfg), DiskCache(cfg.cache_dir, "search"))

    entries = _org_entries(read_jsonl(args.orgs))
    docs = [
        build_pseudodoc(name, provider, top_n=cfg.top_n, org_id=org_id)
        for org_id, name in entries
    ]
    write_jsonl(out / "pseudodocs.jsonl", (d.to_dict() for d in docs))

    inputs = {"orgs": args.orgs}
    if cfg.search_fixture:
        inputs["search_fixture"] = cfg.search_fixture
    usable = sum(1 for d in docs if d.usable)
    _manifest(out, STAGE_FETCH_SNIPPETS, cfg, inputs, started,
              extra={"pseudodocs": len(docs), "usable": usable})
    print(f"wrote {len(docs)} pseudo-documents ({usable} usable) to {out}")
    return 0


def cmd_build_dataset(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    cfg.require(STAGE_BUILD_DATASET)
    started = time.time()
    out = _out_dir(args, cfg, "dataset")
    inputs: dict = {}

    if cfg.task == TASK_ISSUES:
        if not args.orgs or not args.pseudodocs:
            raise ConfigError("issues task needs --orgs and --pseudodocs")
        from .taxonomy import load_issue_taxonomy_file

        tax = load_issue_taxonomy_file(cfg.issue_taxonomy)
        ppod_orgs = {
            str(row["org_id"]): row["issues"] for row in read_jsonl(args.orgs)
        }
        docs = [PseudoDoc.from_dict(row) for row in read_jsonl(args.pseudodocs)]
        ds = build_env_dataset(ppod_orgs, tax, docs, k=cfg.k)
        inputs = {
            "orgs": args.orgs,
            "pseudodocs": args.pseudodocs,
            "issue_taxonomy": cfg.issue_taxonomy,
        }
    else:
        if not args.companies:
            raise ConfigError("sic2 task needs --companies")
        companies = [CompanyRecord.from_dict(r) for r in read_jsonl(args.companies)]
        texts = None
        if args.pseudodocs:
            texts = {
                str(row["org_id"]): row["text"]
                for row in read_jsonl(args.pseudodocs)
                if row.get("usable")
            }
            inputs["pseudodocs"] = args.pseudodocs
        ds = build_sic_dataset(
            companies, per_class=cfg.per_class, min_class=cfg.min_class,
            seed=cfg.seed, texts=texts,
        )
        inputs["companies"] = args.companies

    ds = split_dataset(ds, cfg.split_sizes(), seed=cfg.seed)
    save_dataset(ds, out)
    _manifest(out, STAGE_BUILD_DATASET, cfg, inputs, started,
              extra={"examples": len(ds.examples), "classes": ds.label_space.n})
    print(f"wrote {len(ds.examples)} examples over {ds.label_space.n} classes to {out}")
    return 0


def _label_descriptions(cfg: PipelineConfig, labels: tuple[str, ...]) -> list[str]:
    from .taxonomy import (
        descriptions_for,
        load_issue_taxonomy_file,
        load_sic_hierarchy_file,
    )

    if cfg.task == TASK_ISSUES:
        source = load_issue_taxonomy_file(cfg.issue_taxonomy)
    else:
        source = load_sic_hierarchy_file(cfg.sic_taxonomy)
    return [d.text for d in descriptions_for(labels, cfg.description_style, source)]


def cmd_train(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    cfg.require(STAGE_TRAIN)
    started = time.time()
    out = _out_dir(args, cfg, "model")
    ds = load_dataset(args.dataset)
    if ds.label_space.task != cfg.task:
        raise ConfigError(
            f"dataset task {ds.label_space.task!r} does not match config task {cfg.task!r}"
        )

    encoder = make_encoder(cfg.encoder_config())
    style = None
    descriptions = None
    if cfg.architecture == ARCH_ORGMODEL2:
        style = cfg.description_style
        descriptions = _label_descriptions(cfg, ds.label_space.labels)

    state, log = train(
        cfg.architecture, ds, ds.label_space, cfg.train_config(), encoder,
        description_style=style, descriptions=descriptions,
    )
    save_model(state, out, encoder=encoder)
    write_json(out / "train_log.json", log)

    dataset_dir = Path(args.dataset)
    inputs = {
        "dataset": dataset_dir / "dataset.jsonl",
        "labelspace": dataset_dir / "labelspace.json",
    }
    _manifest(out, STAGE_TRAIN, cfg, inputs, started,
              extra={"final_loss": log["epochs"][-1]["loss"]})
    print(f"trained {cfg.architecture} for {len(log['epochs'])} epochs; model in {out}")
    return 0


def cmd_predict(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    started = time.time()
    out = _out_dir(args, cfg, "predictions")
    state, encoder = load_model(args.model)
    ds = load_dataset(args.dataset)
    examples = list(ds.examples) if args.split == "all" else ds.split_examples(args.split)
    preds = predict_dataset(examples, state, encoder)
    write_jsonl(out / "predictions.jsonl", (p.to_dict() for p in preds))

    dataset_dir = Path(args.dataset)
    inputs = {
        "dataset": dataset_dir / "dataset.jsonl",
        "model": Path(args.model) / "model.json",
    }
    _manifest(out, STAGE_PREDICT, cfg, inputs, started,
              extra={"predictions": len(preds), "split": args.split})
    print(f"wrote {len(preds)} predictions to {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace, cfg: PipelineConfig | None) -> int:
    started = time.time()
    out = _out_dir(args, cfg, "report")
    gold_rows = read_jsonl(args.gold)
    if args.split:
        gold_rows = [r for r in gold_rows if r.get("split") == args.split]
    golds = {str(r["org_id"]): r["labels"] for r in gold_rows}
    preds = {str(r["org_id"]): r["labels"] for r in read_jsonl(args.pred)}

    if args.labelspace:
        from .storage import read_json

        labels = read_json(args.labelspace)["labels"]
    else:
        labels = sorted({lab for labs in golds.values() for lab in labs}
                        | {lab for labs in preds.values() for lab in labs})

    mode = args.macro_f1_mode or (cfg.macro_f1_mode if cfg else MacroF1Mode.MEAN_OF_F1.value)
    report = evaluate(golds, preds, labels, mode)
    write_json(out / "report.json", report.to_dict())

    inputs = {"gold": args.gold, "pred": args.pred}
    if args.labelspace:
        inputs["labelspace"] = args.labelspace
    config_hash = None
    if cfg is None:
        config_hash = sha256_hex(canonical_json({"macro_f1_mode": mode}))
    _manifest(out, STAGE_EVALUATE, cfg, inputs, started,
              extra={"examples": len(golds)}, config_hash=config_hash)
    print(report.render_text(), end="")
    print(f"report written to {out / 'report.json'}")
    return 0


_COMMANDS = {
    STAGE_FETCH_EDGAR: cmd_fetch_edgar,
    STAGE_FETCH_SNIPPETS: cmd_fetch_snippets,
    STAGE_BUILD_DATASET: cmd_build_dataset,
    STAGE_TRAIN: cmd_train,
    STAGE_PREDICT: cmd_predict,
    STAGE_EVALUATE: cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a subcommand is required")
        cfg = _load_cfg(args)
        return _COMMANDS[args.command](args, cfg)
    except (_UsageError, ConfigError, ModelConfigError, TaxonomyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
