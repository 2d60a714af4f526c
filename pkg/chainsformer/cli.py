"""Command-line entry points."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import pandas as pd
import voluptuous as vol

from .config import RUN_KEYS, build_config, dump_config, load_config, setup_logging, train_config
from .const import (
    CONF_AFFINE_HIDDEN,
    CONF_BATCH_SIZE,
    CONF_CACHE_TOC,
    CONF_CHAIN_ENCODER,
    CONF_CHAIN_WEIGHTING,
    CONF_CURVATURE,
    CONF_ENCODER_DIM,
    CONF_EPOCHS,
    CONF_EPSILON,
    CONF_FILTER_DIM,
    CONF_FILTER_SPACE,
    CONF_GRAD_CLIP,
    CONF_HEADS,
    CONF_LAMBDA,
    CONF_LAYERS,
    CONF_LEARNING_RATE,
    CONF_LOGGER,
    CONF_LOSS,
    CONF_MAX_HOPS,
    CONF_NUMERICAL_AWARE,
    CONF_OUT,
    CONF_PATIENCE,
    CONF_PROJECTION,
    CONF_RELATIONAL_PATH,
    CONF_SAME_ATTRIBUTE_ONLY,
    CONF_SCORE_ORIENTATION,
    CONF_SEED,
    CONF_TEST_PATH,
    CONF_TOP_K,
    CONF_TRAIN_PATH,
    CONF_VALID_PATH,
    CONF_VALUE_ENCODING,
    CONF_WALKS,
    CHAIN_ENCODERS,
    CONFIG_FILE,
    FILTER_SPACES,
    LOGGER,
    LOSSES,
    PROJECTIONS,
    SCORE_ORIENTATIONS,
    STATS_FILE,
    VALUE_ENCODINGS,
)
from .coordinator import TrainingCoordinator, fit, load_model, load_run_dataset
from .engine.evaluation import (
    ABLATION_VARIANTS,
    ablation_run,
    evaluate,
    filter_analysis,
    train_mean_baseline,
)
from .engine.exceptions import ChainsFormerError, ConfigError
from .engine.filter import audit
from .engine.graph import DatasetSplit, Query, compute_attribute_stats, queries_from
from .engine.reasoner import top_chain_report
from .engine.synth import GenerativeRule, SynthSpec, generate
from .report import (
    comparison_frame,
    composition_frame,
    render_key_chains,
    render_metrics,
    render_table,
    render_trace,
    write_audits,
    write_json,
    write_json_list,
    write_metrics,
)

SPLITS = ("valid", "test")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def _dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--relational", dest=CONF_RELATIONAL_PATH, help="relational triples TSV")
    parser.add_argument("--train", dest=CONF_TRAIN_PATH, help="training numerical triples TSV")
    parser.add_argument("--valid", dest=CONF_VALID_PATH, help="validation numerical triples TSV")
    parser.add_argument("--test", dest=CONF_TEST_PATH, help="test numerical triples TSV")


def _model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", dest=CONF_EPOCHS, type=int)
    parser.add_argument("--lr", dest=CONF_LEARNING_RATE, type=float)
    parser.add_argument("--walks", dest=CONF_WALKS, type=int)
    parser.add_argument("--top-k", dest=CONF_TOP_K, type=int)
    parser.add_argument("--max-hops", dest=CONF_MAX_HOPS, type=int)
    parser.add_argument("--encoder-dim", dest=CONF_ENCODER_DIM, type=int)
    parser.add_argument("--filter-dim", dest=CONF_FILTER_DIM, type=int)
    parser.add_argument("--layers", dest=CONF_LAYERS, type=int)
    parser.add_argument("--heads", dest=CONF_HEADS, type=int)
    parser.add_argument("--affine-hidden", dest=CONF_AFFINE_HIDDEN, type=int)
    parser.add_argument("--lambda", dest=CONF_LAMBDA, type=float)
    parser.add_argument("--curvature", dest=CONF_CURVATURE, type=float)
    parser.add_argument("--projection", dest=CONF_PROJECTION, choices=PROJECTIONS)
    parser.add_argument("--loss", dest=CONF_LOSS, choices=LOSSES)
    parser.add_argument("--batch-size", dest=CONF_BATCH_SIZE, type=int)
    parser.add_argument("--patience", dest=CONF_PATIENCE, type=int)
    parser.add_argument("--epsilon", dest=CONF_EPSILON, type=float)
    parser.add_argument("--grad-clip", dest=CONF_GRAD_CLIP, type=float)
    parser.add_argument("--score-orientation", dest=CONF_SCORE_ORIENTATION, choices=SCORE_ORIENTATIONS)
    parser.add_argument("--filter-space", dest=CONF_FILTER_SPACE, choices=FILTER_SPACES)
    parser.add_argument("--chain-encoder", dest=CONF_CHAIN_ENCODER, choices=CHAIN_ENCODERS)
    parser.add_argument("--value-encoding", dest=CONF_VALUE_ENCODING, choices=VALUE_ENCODINGS)
    parser.add_argument("--cache-toc", dest=CONF_CACHE_TOC, action="store_const", const=True)
    parser.add_argument("--no-numerical-aware", dest=CONF_NUMERICAL_AWARE, action="store_const", const=False)
    parser.add_argument("--no-chain-weighting", dest=CONF_CHAIN_WEIGHTING, action="store_const", const=False)
    parser.add_argument("--same-attribute-only", dest=CONF_SAME_ATTRIBUTE_ONLY, action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainsformer", description="Chain-based numerical reasoning over KGs")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="intern a dataset and write its statistics")
    _common(ingest)
    _dataset_flags(ingest)

    train = commands.add_parser("train", help="train a model")
    _common(train)
    _dataset_flags(train)
    _model_flags(train)
    train.add_argument("--progress", action="store_true", help="show progress bars")

    for name, text in (("eval", "evaluate a checkpoint"), ("filter-analysis", "source-attribute composition")):
        sub = commands.add_parser(name, help=text)
        _common(sub)
        sub.add_argument("--checkpoint", required=True)
        sub.add_argument("--split", choices=SPLITS, default="test")
        if name == "eval":
            sub.add_argument("--baseline", action="store_true", help="also score the train-mean baseline")

    predict = commands.add_parser("predict", help="predict one (entity, attribute) value")
    _common(predict)
    predict.add_argument("--checkpoint", required=True)
    predict.add_argument("--entity", required=True)
    predict.add_argument("--attribute", required=True)

    explain = commands.add_parser("explain", help="rank key relation-attribute chains")
    _common(explain)
    explain.add_argument("--checkpoint", required=True)
    explain.add_argument("--split", choices=SPLITS, default="test")
    explain.add_argument("--attribute")
    explain.add_argument("--top", type=int, default=5)

    synth = commands.add_parser("synth", help="generate a synthetic graph with known rules")
    _common(synth)
    synth.add_argument("--entities", type=int, default=500)
    synth.add_argument("--distractors", type=int, default=10)
    synth.add_argument("--distractor-edges", type=int)
    synth.add_argument("--rule", action="append", help="e.g. 'target=2*source via r_a,r_b'")

    ablate = commands.add_parser("ablate", help="train the full model and its ablation variants")
    _common(ablate)
    _dataset_flags(ablate)
    _model_flags(ablate)
    ablate.add_argument("--variants", help="comma-separated variant keys (default: all)")
    ablate.add_argument("--split", choices=SPLITS, default="test")
    return parser


def _run_config(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {key: value for key, value in vars(args).items() if key in RUN_KEYS}
    return build_config(load_config(args.config), overrides)


def _out_dir(args: argparse.Namespace, conf: dict[str, Any], fallback: Path | None = None) -> Path:
    if args.out is not None:
        return Path(args.out)
    if fallback is not None:
        return fallback
    return Path(conf[CONF_OUT])


def _queries(split: DatasetSplit, name: str) -> list[Query]:
    queries = queries_from(split.get(name))
    if not queries:
        raise ConfigError(f"the {name} split has no queries")
    return queries


def cmd_ingest(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    kg, split = load_run_dataset(conf)
    out = _out_dir(args, conf)
    out.mkdir(parents=True, exist_ok=True)
    compute_attribute_stats(split.train, kg.attributes).write_report(out / STATS_FILE)
    vocabularies = {
        "entities": kg.entities.names,
        "relations": kg.relations.names[: kg.base_relation_count],
        "attributes": kg.attributes.names,
    }
    for kind, names in vocabularies.items():
        pd.DataFrame({"id": range(len(names)), "name": names}).to_csv(out / f"{kind}.tsv", sep="\t", index=False)
    paths = {}
    for name in ("train", "valid", "test"):
        paths[name] = out / f"{name}.tsv"
        rows = [(kg.entities.name(t.entity), kg.attributes.name(t.attribute), repr(t.value)) for t in split.get(name)]
        paths[name].write_text("".join("\t".join(row) + "\n" for row in rows), encoding="utf-8")
    conf = {
        **conf,
        CONF_TRAIN_PATH: str(paths["train"]),
        CONF_VALID_PATH: str(paths["valid"]),
        CONF_TEST_PATH: str(paths["test"]),
    }
    dump_config(conf, out / CONFIG_FILE)
    print(render_table(pd.DataFrame([kg.describe()])))


def cmd_train(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    kg, split = load_run_dataset(conf)
    out = _out_dir(args, conf)
    dump_config(conf, out / CONFIG_FILE)
    coordinator = TrainingCoordinator(kg, split, train_config(conf), conf, out, progress=args.progress)
    coordinator.train()
    LOGGER.info("Training stopped: %s", coordinator.stop_reason)
    if split.test:
        report = evaluate(coordinator.model, queries_from(split.test), name="test")
        write_metrics(report, out, "metrics_test")
        print(render_metrics(report), end="")


def cmd_eval(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    model, split, _ = load_model(args.checkpoint)
    out = _out_dir(args, conf, Path(args.checkpoint).parent)
    queries = _queries(split, args.split)
    report = evaluate(model, queries, name=args.split)
    write_metrics(report, out, f"metrics_{args.split}")
    print(render_metrics(report), end="")
    if args.baseline:
        baseline = train_mean_baseline(model.kg, model.stats, queries)
        write_metrics(baseline, out, f"baseline_{args.split}")
        print(render_table(comparison_frame({report.name: report, baseline.name: baseline})))


def cmd_predict(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    model, _, _ = load_model(args.checkpoint)
    query = Query(model.kg.entities.id(args.entity), model.kg.attributes.id(args.attribute))
    trace = model.predict([query])[0]
    write_json(trace, _out_dir(args, conf, Path(args.checkpoint).parent) / "trace.json")
    print(render_trace(trace), end="")


def cmd_explain(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    model, split, _ = load_model(args.checkpoint)
    queries = _queries(split, args.split)
    if args.attribute is not None:
        attribute = model.kg.attributes.id(args.attribute)
        queries = [q for q in queries if q.attribute == attribute]
    traces = model.predict(queries)
    chains = top_chain_report(traces, args.attribute)
    out = _out_dir(args, conf, Path(args.checkpoint).parent)
    write_json_list(chains, out / f"key_chains_{args.split}.json")
    print(render_key_chains(chains, args.top), end="")


def cmd_synth(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    settings = SynthSpec(
        entities=args.entities,
        distractor_relations=args.distractors,
        distractor_edges=args.distractor_edges,
        seed=conf[CONF_SEED],
        **({"rules": [GenerativeRule.parse(text) for text in args.rule]} if args.rule else {}),
    )
    out = _out_dir(args, conf)
    paths = generate(settings).write(out)
    dump_config(
        {
            **conf,
            CONF_RELATIONAL_PATH: str(paths["relational"]),
            CONF_TRAIN_PATH: str(paths["train"]),
            CONF_VALID_PATH: str(paths["valid"]),
            CONF_TEST_PATH: str(paths["test"]),
        },
        out / CONFIG_FILE,
    )
    print(f"Synthetic graph written to {out}")


def cmd_ablate(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    kg, split = load_run_dataset(conf)
    toggles = args.variants.split(",") if args.variants else [v.key for v in ABLATION_VARIANTS]
    reports = ablation_run(
        train_config(conf),
        [t.strip() for t in toggles if t.strip()],
        lambda config: fit(kg, split, config),
        _queries(split, args.split),
    )
    out = _out_dir(args, conf)
    out.mkdir(parents=True, exist_ok=True)
    frame = comparison_frame(reports)
    frame.to_csv(out / "ablation.csv", index=False)
    print(render_table(frame))


def cmd_filter_analysis(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    model, split, _ = load_model(args.checkpoint)
    queries = _queries(split, args.split)
    out = _out_dir(args, conf, Path(args.checkpoint).parent)
    out.mkdir(parents=True, exist_ok=True)
    frame = composition_frame(filter_analysis(model, queries))
    frame.to_csv(out / f"filter_analysis_{args.split}.csv", index=False)
    audits = []
    for query in queries:
        toc = model.retrieve(query)
        if not toc.empty:
            audits.append(audit(model.select(toc), model.kg))
    write_audits(audits, out / f"filter_audit_{args.split}.json")
    print(render_table(frame))


COMMANDS: dict[str, Callable[[argparse.Namespace, dict[str, Any]], None]] = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "explain": cmd_explain,
    "synth": cmd_synth,
    "ablate": cmd_ablate,
    "filter-analysis": cmd_filter_analysis,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        conf = _run_config(args)
        setup_logging(conf[CONF_LOGGER], args.verbose)
        COMMANDS[args.command](args, conf)
    except (ChainsFormerError, vol.Invalid, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0
