"""Command-line pipeline: ingest, split, train, retrieve, generate, evaluate and sweep."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .ast2seq import Ast2Seq, Example, generate, load_model, save_model, train
from .config import PRESETS, load_config
from .errors import (CommitGenError, ConfigError, ConfigMismatch, DataError, EmptyContext,
                     MissingArtifact)
from .features import CommitFeatures, featurize
from .metrics import METRIC_NAMES, corpus_report, pooled_bleu, sentence_report
from .preprocess import (CommitRecord, Vocabulary, build_vocab, filter_commits, ingest,
                         split as split_records, write_jsonl)
from .ranker import GENERATED, RETRIEVED, ConvRanker, build_ranking_dataset, select, train_ranker
from .retrieval import TfIdfIndex, build_index
from .toydata import make_corpus

log = logging.getLogger("commitgen")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_MISSING = 0, 2, 3, 4
SPLITS = ("train", "valid", "test")


class Layout:
    """Artifact paths under one output directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.data = self.root / "data"
        self.commits = self.data / "commits.jsonl"
        self.features = self.data / "features.jsonl"
        self.ingest_report = self.data / "ingest_report.json"
        self.split = self.data / "split.json"
        self.gen = self.root / "gen"
        self.vocabs = self.gen / "vocabs.json"
        self.index_dir = self.root / "index"
        self.index = self.index_dir / "tfidf.json"
        self.rank = self.root / "rank"
        self.predict = self.root / "generate"
        self.predictions = self.predict / "predictions.jsonl"
        self.predict_manifest = self.predict / "manifest.json"
        self.eval = self.root / "eval"
        self.pathstats = self.root / "pathstats"


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def require(path, name):
    if not Path(path).exists():
        raise MissingArtifact(name, str(path))
    return Path(path)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path, name):
    return json.loads(require(path, name).read_text())


def read_jsonl(path, name):
    with open(require(path, name), encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl_rows(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def emit_table(header, rows, out=None):
    """Tab-delimited table on stdout."""
    writer = csv.writer(out or sys.stdout, delimiter="\t", lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


# ---------------------------------------------------------------- data prep

def _featurize_task(task):
    record, seed, max_paths, max_path_nodes = task
    try:
        return record.commit_id, featurize(record, seed, max_paths, max_path_nodes).to_json(), None
    except CommitGenError as exc:
        return record.commit_id, None, f"{type(exc).__name__}: {exc}"


def featurize_all(records, cfg, workers=1, max_paths=None):
    """commit_id -> (CommitFeatures or None, error text or None); order-independent."""
    cap = cfg.features.max_paths if max_paths is None else max_paths
    tasks = [(r, cfg.seed, cap, cfg.features.max_path_nodes) for r in records]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_featurize_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_featurize_task(t) for t in tasks]
    return {cid: (CommitFeatures.from_json(obj) if obj is not None else None, err)
            for cid, obj, err in results}


def load_records(layout):
    with open(require(layout.commits, "commits"), encoding="utf-8") as fh:
        return [CommitRecord(**json.loads(line)) for line in fh if line.strip()]


def load_features(layout):
    rows = read_jsonl(layout.features, "features")
    return {r["commit_id"]: CommitFeatures.from_json(r) for r in rows}


def load_split(layout):
    return read_json(layout.split, "split")


def split_features(features, split_ids, name):
    return [features[cid] for cid in split_ids[name] if cid in features]


def load_vocabs(layout):
    obj = read_json(layout.vocabs, "vocabularies")
    return {k: Vocabulary.from_json(v) for k, v in obj.items()}


def load_generator(layout):
    require(layout.gen / "ast2seq.manifest.json", "generator")
    vocabs = load_vocabs(layout)
    return load_model(layout.gen, vocabs), vocabs


def _every(n):
    def report(epoch, rep):
        if epoch == 1 or epoch % n == 0:
            log.info("epoch %d train %.4f valid %.4f", epoch, rep.train_loss[-1], rep.valid_loss[-1])
    return report


def fit_generator(cfg, train_feats, valid_feats):
    vocabs = build_vocab([f.message for f in train_feats], [f.contexts for f in train_feats],
                         cfg.features.min_freq)
    model = Ast2Seq(len(vocabs["subtoken"]), len(vocabs["target"]), cfg.model)
    report = train(model, [Example(f.contexts, f.message) for f in train_feats],
                   [Example(f.contexts, f.message) for f in valid_feats], vocabs,
                   on_epoch=_every(25))
    return model, vocabs, report


# ---------------------------------------------------------------- subcommands

def cmd_make_toy(args, cfg):
    records = make_corpus(args.n, seed=cfg.seed, extra_statements=args.extra_statements)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(records, out)
    print(f"wrote {len(records)} commits to {out}")


def cmd_ingest(args, cfg):
    layout = Layout(cfg.out_dir)
    source = args.input or cfg.dataset
    if not source:
        raise ConfigError("no dataset: pass --input or set 'dataset'")
    require(source, "dataset")
    records = ingest(source)
    feats = featurize_all(records, cfg, args.workers)

    def context_fn(rec):
        feat, err = feats[rec.commit_id]
        if feat is None:
            raise EmptyContext(err)

    counts = {}
    kept = filter_commits(records, context_fn, counts)
    layout.data.mkdir(parents=True, exist_ok=True)
    write_jsonl(kept, layout.commits)
    write_jsonl_rows(layout.features, [feats[r.commit_id][0].to_json() for r in kept])
    summary = {"input": len(records), "kept": len(kept), "dropped": counts,
               "commits_sha256": sha256_file(layout.commits),
               "features_sha256": sha256_file(layout.features)}
    write_json(layout.ingest_report, summary)
    cfg.write(layout.data)
    print(json.dumps({"input": len(records), "kept": len(kept), "dropped": counts}, sort_keys=True))


def cmd_split(args, cfg):
    layout = Layout(cfg.out_dir)
    records = load_records(layout)
    try:
        spec = cfg.split.spec(cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    parts = split_records(records, spec)
    ids = {name: [r.commit_id for r in parts[name]] for name in SPLITS}
    write_json(layout.split, ids)
    emit_table(["split", "commits"], [[name, len(ids[name])] for name in SPLITS])


def cmd_train_gen(args, cfg):
    from .plotting import loss_curves

    layout = Layout(cfg.out_dir)
    features, split_ids = load_features(layout), load_split(layout)
    model, vocabs, report = fit_generator(cfg, split_features(features, split_ids, "train"),
                                          split_features(features, split_ids, "valid"))
    manifest = save_model(model, vocabs, layout.gen, report)
    write_json(layout.vocabs, {k: v.to_json() for k, v in sorted(vocabs.items())})
    cfg.write(layout.gen)
    loss_curves(report.train_loss, report.valid_loss, layout.gen / "loss.png", "generator",
                report.best_epoch)
    emit_table(["epochs_run", "best_epoch", "best_valid_loss", "checkpoint_sha256"],
               [[report.epochs_run, report.best_epoch, f"{report.best_valid_loss:.6f}",
                 manifest["checkpoint_sha256"]]])


def cmd_retrieve(args, cfg):
    layout = Layout(cfg.out_dir)
    features, split_ids = load_features(layout), load_split(layout)
    train_feats = split_features(features, split_ids, "train")
    index = build_index([f.diff_tokens for f in train_feats], [f.message for f in train_feats],
                        [f.commit_id for f in train_feats])
    layout.index_dir.mkdir(parents=True, exist_ok=True)
    index.save(layout.index)
    rows = []
    for f in split_features(features, split_ids, args.split):
        hit = index.retrieve(f.diff_tokens)
        rows.append({"commit_id": f.commit_id, "msg_t": hit.message,
                     "source_commit": hit.commit_id, "cosine": hit.cosine})
    write_jsonl_rows(layout.index_dir / "retrieved.jsonl", rows)
    write_json(layout.index_dir / "manifest.json", {"index_sha256": sha256_file(layout.index),
                                                    "documents": index.n_docs})
    cfg.write(layout.index_dir)
    emit_table(["commit_id", "source_commit", "cosine", "msg_t"],
               [[r["commit_id"], r["source_commit"], f"{r['cosine']:.6f}", " ".join(r["msg_t"])]
                for r in rows])


def cmd_train_rank(args, cfg):
    from .plotting import loss_curves

    layout = Layout(cfg.out_dir)
    features, split_ids = load_features(layout), load_split(layout)
    model, vocabs = load_generator(layout)
    index = TfIdfIndex.load(require(layout.index, "index"))
    commits = [(f.commit_id, f.diff_tokens, f.message, f.contexts)
               for f in split_features(features, split_ids, "train")]
    counts = {}
    rows = build_ranking_dataset(commits, lambda ctx: generate(model, [ctx], vocabs)[0], index, counts)
    ranker, report = train_ranker(rows, cfg.ranker)
    ranker.save(layout.rank)
    write_jsonl_rows(layout.rank / "rows.jsonl",
                     [{"commit_id": r.commit_id, "source": r.source, "candidate": r.candidate,
                       "target": r.target} for r in rows])
    out = report.to_json()
    out["skipped"] = counts.get("skipped", 0)
    out["rows"] = len(rows)
    write_json(layout.rank / "report.json", out)
    cfg.write(layout.rank)
    loss_curves(report.train_loss, report.valid_loss, layout.rank / "loss.png", "ranker",
                report.best_epoch)
    emit_table(["rows", "skipped", "epochs_run", "best_epoch"],
               [[len(rows), out["skipped"], report.epochs_run, report.best_epoch]])


def _choose(f, msg_t, msg_g, ranker):
    # an empty generation cannot be scored; the retrieved message stands
    if not msg_g:
        s_t = ranker.score(f.diff_tokens, msg_t)
        return {"chosen": RETRIEVED, "score_t": s_t, "score_g": None, "message": list(msg_t)}
    pair = select(f.diff_tokens, msg_t, msg_g, ranker, f.commit_id)
    return {"chosen": pair.chosen, "score_t": pair.score_t, "score_g": pair.score_g,
            "message": pair.message}


def _artifact_hashes(layout):
    gen = read_json(layout.gen / "ast2seq.manifest.json", "generator")
    rank = read_json(require(layout.rank / "ranker.manifest.json", "ranker"), "ranker")
    require(layout.rank / "ranker.ckpt", "ranker")
    return {"generator_sha256": gen["checkpoint_sha256"], "vocab_sha256": gen["vocab_sha256"],
            "ranker_sha256": rank["checkpoint_sha256"],
            "index_sha256": sha256_file(require(layout.index, "index"))}


def cmd_generate(args, cfg):
    layout = Layout(cfg.out_dir)
    hashes = _artifact_hashes(layout)
    model, vocabs = load_generator(layout)
    ranker = ConvRanker.load(layout.rank)
    index = TfIdfIndex.load(layout.index)
    features, split_ids = load_features(layout), load_split(layout)
    rows = []
    for f in split_features(features, split_ids, args.split):
        msg_t = index.retrieve(f.diff_tokens).message
        msg_g = generate(model, [f.contexts], vocabs)[0]
        row = {"commit_id": f.commit_id, "msg_t": msg_t, "msg_g": msg_g}
        row.update(_choose(f, msg_t, msg_g, ranker))
        rows.append(row)
    write_jsonl_rows(layout.predictions, rows)
    write_json(layout.predict_manifest, dict(hashes, split=args.split,
                                             predictions_sha256=sha256_file(layout.predictions)))
    cfg.write(layout.predict)
    emit_table(["commit_id", "chosen", "score_t", "score_g", "message"],
               [[r["commit_id"], r["chosen"], _fmt(r["score_t"]), _fmt(r["score_g"]),
                 " ".join(r["message"])] for r in rows])


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def _verify_predictions(layout):
    manifest = read_json(layout.predict_manifest, "predictions")
    current = _artifact_hashes(layout)
    for key, value in current.items():
        if manifest.get(key) != value:
            raise ConfigMismatch(f"predictions were made with a different {key.replace('_sha256', '')}")
    vocabs = load_vocabs(layout)
    for kind, digest in current["vocab_sha256"].items():
        if kind not in vocabs or vocabs[kind].digest() != digest:
            raise ConfigMismatch(f"{kind} vocabulary does not match the generator checkpoint")
    if sha256_file(require(layout.predictions, "predictions")) != manifest["predictions_sha256"]:
        raise ConfigMismatch("predictions file changed after generation")
    return manifest


def system_report(pairs, bleu_mode):
    rep = corpus_report(pairs).as_dict()
    if bleu_mode == "corpus":
        for n in (1, 2, 3, 4):
            rep[f"bleu{n}"] = pooled_bleu(pairs, n)
    return rep


def evaluate_predictions(rows, references, bleu_mode="sentence_avg"):
    """Metric reports for each candidate source and the selected mixture."""
    if not rows:
        raise DataError("no predictions to evaluate")
    refs = [references[r["commit_id"]] for r in rows]
    systems = {}
    for name, key in (("retrieved", "msg_t"), ("generated", "msg_g"), ("hybrid", "message")):
        systems[name] = system_report(list(zip([r[key] for r in rows], refs)), bleu_mode)
    n_gen = sum(r["chosen"] == GENERATED for r in rows)
    mixture = {GENERATED: n_gen / len(rows), RETRIEVED: (len(rows) - n_gen) / len(rows)}
    return {"n": len(rows), "bleu_mode": bleu_mode, "systems": systems, "mixture": mixture}


def cmd_evaluate(args, cfg):
    from .plotting import metric_bars, mixture_pie

    layout = Layout(cfg.out_dir)
    manifest = _verify_predictions(layout)
    rows = read_jsonl(layout.predictions, "predictions")
    features = load_features(layout)
    references = {cid: f.message for cid, f in features.items()}
    report = evaluate_predictions(rows, references, cfg.eval.bleu_mode)
    report["split"] = manifest["split"]
    report["artifacts"] = {k: v for k, v in manifest.items() if k != "vocab_sha256"}
    write_json(layout.eval / "report.json", report)
    cfg.write(layout.eval)
    if args.csv:
        with open(layout.eval / "per_sample.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["commit_id", "chosen"] + list(METRIC_NAMES))
            for r in rows:
                s = sentence_report(r["message"], references[r["commit_id"]]).as_dict()
                writer.writerow([r["commit_id"], r["chosen"]] + [f"{s[k]:.6f}" for k in METRIC_NAMES])
    metric_bars({k: [v[m] for m in METRIC_NAMES] for k, v in report["systems"].items()},
                layout.eval / "metrics.png")
    mixture_pie(report["mixture"], layout.eval / "mixture.png")
    emit_table(["system"] + list(METRIC_NAMES),
               [[name] + [f"{vals[m]:.2f}" for m in METRIC_NAMES]
                for name, vals in report["systems"].items()])
    emit_table(["source", "proportion"],
               [[k, f"{v:.4f}"] for k, v in sorted(report["mixture"].items())])


PATHSTATS_HEADER = ["# Path", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "Meteor"]


def cmd_pathstats(args, cfg):
    from .plotting import pathstats_lines

    layout = Layout(cfg.out_dir)
    records = load_records(layout)
    split_ids = load_split(layout)
    caps = [int(c) for c in (args.caps or cfg.eval.path_caps)]
    if not caps or min(caps) < 1:
        raise ConfigError("path caps must be positive integers")
    table = []
    details = []
    for cap in caps:
        feats = featurize_all(records, cfg, args.workers, max_paths=cap)
        usable = {cid: f for cid, (f, _) in feats.items() if f is not None}
        train_f = split_features(usable, split_ids, "train")
        valid_f = split_features(usable, split_ids, "valid")
        test_f = split_features(usable, split_ids, "test")
        if not test_f:
            raise DataError("test split is empty")
        log.info("path cap %d: %d train commits", cap, len(train_f))
        model, vocabs, report = fit_generator(cfg, train_f, valid_f)
        generated = generate(model, [f.contexts for f in test_f], vocabs)
        metrics = system_report(list(zip(generated, [f.message for f in test_f])),
                                cfg.eval.bleu_mode)
        table.append([cap] + [metrics[m] for m in METRIC_NAMES])
        details.append({"cap": cap, "metrics": metrics, "best_epoch": report.best_epoch,
                        "mean_added_paths": _mean(f.contexts.p for f in test_f + train_f),
                        "mean_deleted_paths": _mean(f.contexts.k for f in test_f + train_f)})
    best = max(range(len(table)), key=lambda i: (table[i][4], -i))
    layout.pathstats.mkdir(parents=True, exist_ok=True)
    write_json(layout.pathstats / "table.json", {"header": PATHSTATS_HEADER, "best_cap": table[best][0],
                                                 "rows": details})
    cfg.write(layout.pathstats)
    rendered = [[f"{row[0]}*" if i == best else str(row[0])] + [f"{v:.2f}" for v in row[1:]]
                for i, row in enumerate(table)]
    with open(layout.pathstats / "table.tsv", "w", encoding="utf-8") as fh:
        emit_table(PATHSTATS_HEADER, rendered, fh)
    pathstats_lines(caps, [row[1:] for row in table], layout.pathstats / "pathstats.png")
    emit_table(PATHSTATS_HEADER, rendered)


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else 0.0


# ---------------------------------------------------------------- entry point

COMMANDS = {"make-toy": cmd_make_toy, "ingest": cmd_ingest, "split": cmd_split,
            "train-gen": cmd_train_gen, "train-rank": cmd_train_rank, "retrieve": cmd_retrieve,
            "generate": cmd_generate, "evaluate": cmd_evaluate, "pathstats": cmd_pathstats}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. model.epochs=50")
    common.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--workers", type=int, default=1, help="data-prep worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="commitgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("make-toy", parents=[common], help="write the synthetic toy corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--extra-statements", type=int, default=0,
                   help="added filler statements per commit (widens path sets)")
    p = sub.add_parser("ingest", parents=[common], help="filter and featurize a JSON-lines dataset")
    p.add_argument("--input")
    sub.add_parser("split", parents=[common], help="partition into train/valid/test")
    sub.add_parser("train-gen", parents=[common], help="train the generator")
    sub.add_parser("train-rank", parents=[common], help="train the ranker")
    for name, text in (("retrieve", "build the TF-IDF index and retrieve"),
                       ("generate", "generate, retrieve and select per commit")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--split", default="test", choices=SPLITS)
    p = sub.add_parser("evaluate", parents=[common], help="score predictions against references")
    p.add_argument("--csv", action="store_true", help="also write per-sample scores")
    p = sub.add_parser("pathstats", parents=[common], help="sweep the path cap")
    p.add_argument("--caps", type=int, nargs="+")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        overrides = list(args.set) + ([f"out_dir={json.dumps(args.out)}"] if args.out else [])
        cfg = load_config(args.config, overrides, args.preset)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
