"""Command-line entry point: ``sponsorscope <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error. Every run writes a
``run_manifest.json`` next to its outputs. Logging goes to stderr at the
level named by ``TOOL_LOG`` (debug or info; warnings otherwise).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .analytics import AnalyticsError, write_report_csvs
from .classifiers import ContextualClassifier, ForestClassifier, TrainConfig, load_classifier, save_classifier
from .core import SponsorLabel, ValidationError
from .dataset import (
    BalanceError,
    LabeledSet,
    SplitError,
    build_examples,
    read_examples,
    read_split_manifest,
    save_json,
    split_train_test,
    undersample_balance,
    write_examples,
    write_split_manifest,
)
from .evaluation import EvaluationError, cross_validate, detect_hidden, evaluate, format_metrics_table
from .ingest import (
    ApiClient,
    CrawlConfig,
    CrawlConfigError,
    CrawlError,
    Dataset,
    IngestError,
    load_dataset,
    run_pipeline,
    save_dataset,
    serve_fixture_api,
)
from .labeling import assign_tier, label_posts
from .synth import SynthConfig, generate_corpus, read_manifest

log = logging.getLogger("sponsorscope")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def derive_seed(master: int, stage: str) -> int:
    """Stable 32-bit seed for one pipeline stage."""
    digest = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _config_hash(args) -> str:
    skip = {"func", "out", "input", "train", "test", "model_file", "split", "manifest", "metrics", "api"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def _write_run_manifest(args, out_dir, inputs, outputs, started):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": args.command,
        "config_hash": _config_hash(args),
        "seed": args.seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "duration_s": round(time.monotonic() - started, 3),
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _read_json_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read --config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"--config {path} is not valid JSON: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"--config {path} must hold a JSON object")
    return cfg


def _load_labeled(path) -> Dataset:
    ds = load_dataset(path)
    if any(p.sponsor_label is SponsorLabel.UNLABELED for p in ds.posts):
        ds = Dataset(ds.profiles, label_posts(ds.posts), ds.stories)
    return ds


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# subcommands -------------------------------------------------------------

def cmd_synth(args):
    cfg = _read_json_config(args.config)
    if args.posts is not None:
        cfg["n_posts"] = args.posts
    if args.hidden_fraction is not None:
        cfg["hidden_fraction"] = args.hidden_fraction
    cfg["seed"] = derive_seed(args.seed, "synth")
    try:
        config = SynthConfig.from_dict(cfg)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid synth config: {e}") from None
    corpus = generate_corpus(config)
    corpus.write(args.out)
    out = Path(args.out)
    return [], [out / n for n in ("profiles.jsonl", "posts.jsonl", "stories.jsonl", "manifest.jsonl")]


def cmd_serve(args):
    ds = load_dataset(args.input)
    server = serve_fixture_api(ds, args.bind)
    print(server.url, flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return [args.input], []


def cmd_crawl(args):
    tags = [t for t in args.hashtags.split(",") if t]
    try:
        crawl = CrawlConfig(tags, page_size=args.page_size)
    except CrawlConfigError as e:
        raise UsageError(str(e)) from None
    client = ApiClient(args.api)
    ds, skipped = run_pipeline(crawl, client, workers=args.workers)
    save_dataset(ds, args.out)
    for user in skipped:
        log.warning("user %s not found", user)
    out = Path(args.out)
    return [args.api], [out / n for n in ("profiles.jsonl", "posts.jsonl", "stories.jsonl")]


def cmd_label(args):
    ds = load_dataset(args.input)
    labeled = Dataset(ds.profiles, label_posts(ds.posts), ds.stories)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = out / "labels.csv"
        _write_rows(path, ["post_id", "username", "label"],
                    [(p.id, p.author, p.sponsor_label.value) for p in sorted(labeled.posts, key=lambda q: q.id)])
        return [args.input], [path]
    save_dataset(labeled, out)
    return [args.input], [out / n for n in ("profiles.jsonl", "posts.jsonl", "stories.jsonl")]


def cmd_tier(args):
    ds = load_dataset(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(u, p.follower_count, assign_tier(p).title) for u, p in sorted(ds.profiles.items())]
    if args.format == "csv":
        path = out / "tiers.csv"
        _write_rows(path, ["username", "follower_count", "tier"], rows)
    else:
        path = out / "tiers.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for u, n, t in rows:
                fh.write(json.dumps({"username": u, "follower_count": n, "tier": t}, separators=(",", ":")) + "\n")
    return [args.input], [path]


def cmd_analyze(args):
    ds = _load_labeled(args.input)
    summary = write_report_csvs(ds, args.out)
    path = Path(args.out) / "summary.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return [args.input], sorted(Path(args.out).glob("*.csv")) + [path]


def cmd_featurize(args):
    ds = _load_labeled(args.input)
    ls = build_examples(ds, scrub=not args.no_scrub)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "examples.jsonl"
    write_examples(ls, path)
    outputs = [path]
    if args.format == "csv":
        from .features import NUMERIC_FEATURES
        csv_path = out / "numeric.csv"
        _write_rows(csv_path, ["post_id", "label", *NUMERIC_FEATURES],
                    [(e.post_id, e.label, *map(repr, e.numeric)) for e in ls])
        outputs.append(csv_path)
    return [args.input], outputs


def cmd_split(args):
    ls = read_examples(args.input)
    balanced = undersample_balance(ls, derive_seed(args.seed, "balance"))
    train, test = split_train_test(balanced, args.test_fraction, derive_seed(args.seed, "split"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kept = set(balanced.ids)
    write_split_manifest(out / "split.json", train=train.ids, test=test.ids,
                         dropped=[i for i in ls.ids if i not in kept])
    write_examples(train, out / "train.jsonl")
    write_examples(test, out / "test.jsonl")
    return [args.input], [out / "split.json", out / "train.jsonl", out / "test.jsonl"]


_CONTEXTUAL_SETTINGS = ("vocab_size", "max_len", "embed_dim", "hidden", "dense1", "dense2")
_FOREST_SETTINGS = ("n_trees", "max_depth", "max_features", "bootstrap", "vocab_size", "max_len", "hash_bins")


def _make_unfitted(kind, cfg, seed, epochs=None):
    cfg = dict(cfg)
    if kind == "contextual":
        tc_names = {f.name for f in fields(TrainConfig)}
        allowed = tc_names | set(_CONTEXTUAL_SETTINGS)
        bad = sorted(set(cfg) - allowed)
        if bad:
            raise UsageError(f"unknown contextual settings: {bad}")
        tc = {k: cfg.pop(k) for k in list(cfg) if k in tc_names}
        tc["seed"] = seed
        if epochs is not None:
            tc["epochs"] = epochs
        try:
            return ContextualClassifier(TrainConfig(**tc), **cfg)
        except (TypeError, ValueError) as e:
            raise UsageError(f"invalid contextual settings: {e}") from None
    bad = sorted(set(cfg) - set(_FOREST_SETTINGS))
    if bad:
        raise UsageError(f"unknown forest settings: {bad}")
    return ForestClassifier(seed=seed, **cfg)


def _settings_of(clf) -> dict:
    d = clf.to_dict()
    cfg = {**d["config"], **d["settings"]}
    cfg.pop("seed", None)
    return cfg


def cmd_train(args):
    cfg = _read_json_config(args.config)
    clf = _make_unfitted(args.model, cfg, derive_seed(args.seed, f"train/{args.model}"), args.epochs)
    train = read_examples(args.train)
    n0, n1 = train.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("training data must contain both classes")
    log.info("training %s on %d examples", args.model, len(train))
    clf.fit(train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = [out / "model.json"]
    save_classifier(clf, outputs[0])
    if args.model == "contextual":
        path = out / "loss_trace.csv"
        _write_rows(path, ["epoch", "batch", "loss"], [(e, b, repr(v)) for e, b, v in clf.loss_trace])
        outputs.append(path)
    return [args.train], outputs


def cmd_eval(args):
    clf = load_classifier(args.model_file)
    test = read_examples(args.test)
    cm, metrics = evaluate(clf, test, args.threshold)
    result = {"model": clf.kind, "threshold": args.threshold, "n_test": len(test),
              "confusion": asdict(cm), "held_out": metrics.as_dict()}
    if args.folds:
        if not args.train:
            raise UsageError("--folds needs --train")
        train = read_examples(args.train)
        settings = _settings_of(clf)
        seed = derive_seed(args.seed, f"train/{clf.kind}")

        def fit(ls):
            return _make_unfitted(clf.kind, settings, seed).fit(ls)

        cv = cross_validate(fit, train, args.folds, derive_seed(args.seed, "cv"), args.threshold)
        result["cv"] = cv.as_dict()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result, fh, indent=1)
        fh.write("\n")
    rows = {f"{clf.kind} (held-out)": metrics}
    if "cv" in result:
        rows[f"{clf.kind} ({args.folds}-fold mean)"] = result["cv"]["mean"]
    (out / "metrics.txt").write_text(format_metrics_table(rows), encoding="utf-8")
    outputs = [out / "metrics.json", out / "metrics.txt"]
    if args.format == "csv":
        _write_rows(out / "metrics.csv", ["model", "accuracy", "precision", "recall", "f1"],
                    [(clf.kind, *metrics.as_dict().values())])
        outputs.append(out / "metrics.csv")
    inputs = [args.model_file, args.test] + ([args.train] if args.train else [])
    return inputs, outputs


def cmd_detect_hidden(args):
    clf = load_classifier(args.model_file)
    ls = read_examples(args.input)
    seen = set()
    if args.split:
        seen = set(read_split_manifest(args.split).get("train", []))
    undeclared = [e for e in ls if e.label == 0 and e.post_id not in seen]
    plants = None
    if args.manifest:
        plants = [pid for pid, s in read_manifest(args.manifest).items() if s == "hidden"]
    report = detect_hidden(clf, undeclared, args.threshold, plants)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "hidden.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.as_dict(), fh, indent=1)
        fh.write("\n")
    inputs = [args.model_file, args.input] + [p for p in (args.split, args.manifest) if p]
    return inputs, [out / "hidden.json"]


def cmd_report(args):
    rows = {}
    for path in args.metrics:
        try:
            with open(path, encoding="utf-8") as fh:
                m = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: not valid JSON: {e.msg}") from None
        name = m.get("model", Path(path).stem)
        rows[name] = m["held_out"]
        if "cv" in m:
            rows[f"{name} ({m['cv']['k']}-fold)"] = m["cv"]["mean"]
    table = format_metrics_table(rows)
    sys.stdout.write(table)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(table, encoding="utf-8")
    return list(args.metrics), [out / "report.txt"]


# parser ------------------------------------------------------------------

def _common(required_out=True):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    p.add_argument("--out", required=required_out, help="output directory")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="tabular output format where the subcommand has one (default jsonl)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sponsorscope", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="master seed for every stochastic stage")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="<subcommand>", parser_class=_Parser)

    def add(name, func, helptext, required_out=True):
        sp = sub.add_parser(name, help=helptext, description=helptext, parents=[_common(required_out)])
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic corpus with a ground-truth manifest")
    sp.add_argument("--config", help="JSON file of SynthConfig fields")
    sp.add_argument("--posts", type=int, help="total post count (overrides the per-account range)")
    sp.add_argument("--hidden-fraction", type=float, help="fraction of posts that are undisclosed sponsorships")

    sp = add("serve", cmd_serve, "serve a dataset directory over the fixture API", required_out=False)
    sp.add_argument("--input", required=True, help="dataset directory")
    sp.add_argument("--bind", default="127.0.0.1:8080", help="host:port to listen on")

    sp = add("crawl", cmd_crawl, "hashtag discovery plus timeline crawl against an API")
    sp.add_argument("--api", required=True, help="base URL of the API")
    sp.add_argument("--hashtags", required=True, help="comma-separated seed hashtags (at most 30)")
    sp.add_argument("--page-size", type=int, default=50)
    sp.add_argument("--workers", type=int, default=4)

    sp = add("label", cmd_label, "apply rule-based sponsor labels to posts")
    sp.add_argument("--input", required=True, help="dataset directory")

    sp = add("tier", cmd_tier, "assign each profile its follower tier")
    sp.add_argument("--input", required=True, help="dataset directory")

    sp = add("analyze", cmd_analyze, "engagement, latency, repeat-commenter and share CSVs")
    sp.add_argument("--input", required=True, help="dataset directory")

    sp = add("featurize", cmd_featurize, "build token and numeric examples from labeled posts")
    sp.add_argument("--input", required=True, help="dataset directory")
    sp.add_argument("--no-scrub", action="store_true", help="keep sponsor hashtags in the features")

    sp = add("split", cmd_split, "balance by under-sampling, then a stratified train/test split")
    sp.add_argument("--input", required=True, help="examples.jsonl")
    sp.add_argument("--test-fraction", type=float, default=0.2)

    sp = add("train", cmd_train, "fit a classifier on training examples")
    sp.add_argument("--model", choices=("forest", "contextual"), required=True)
    sp.add_argument("--train", "--input", dest="train", required=True, help="training examples JSONL")
    sp.add_argument("--config", help="JSON file of model settings")
    sp.add_argument("--epochs", type=int, help="contextual model epochs (overrides --config)")

    sp = add("eval", cmd_eval, "score a saved model on held-out examples, optionally with k-fold CV")
    sp.add_argument("--model-file", required=True, help="model.json written by train")
    sp.add_argument("--test", required=True, help="held-out examples JSONL")
    sp.add_argument("--train", help="training examples JSONL, needed for --folds")
    sp.add_argument("--folds", type=int, default=0, help="k for cross-validation on --train (0 = off)")
    sp.add_argument("--threshold", type=float, default=0.5)

    sp = add("detect-hidden", cmd_detect_hidden, "flag undeclared posts the model scores as sponsored")
    sp.add_argument("--model-file", required=True, help="model.json written by train")
    sp.add_argument("--input", required=True, help="examples.jsonl from featurize")
    sp.add_argument("--split", help="split.json; its training ids are excluded from the audit")
    sp.add_argument("--manifest", help="synthetic manifest.jsonl, to report recall against plants")
    sp.add_argument("--threshold", type=float, default=0.5)

    sp = add("report", cmd_report, "print a metrics table from one or more eval outputs")
    sp.add_argument("--metrics", nargs="+", required=True, help="metrics.json files")
    return parser


def _setup_logging():
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(os.environ.get("TOOL_LOG", "").lower(),
                                                              logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run_cli(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help, --version or a usage error
        return e.code if isinstance(e.code, int) else 1
    if not hasattr(args, "seed"):
        args.seed = 0
    started = time.monotonic()
    try:
        inputs, outputs = args.func(args)
        if args.out:
            _write_run_manifest(args, args.out, inputs, outputs, started)
    except UsageError as e:
        print(f"sponsorscope {args.command}: error: {e}", file=sys.stderr)
        return 1
    except (DataError, IngestError, ValidationError, AnalyticsError, BalanceError, SplitError, EvaluationError,
            CrawlError, FileNotFoundError, KeyError, ValueError) as e:
        print(f"sponsorscope {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
