"""Command-line entry point. One subcommand per process; every run leaves
a manifest next to its outputs recording the exact invocation, the full
config, the seed, and content hashes, so a finished run can be replayed
and byte-compared."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import diagnostics as diag
from . import evaluation as ev
from . import generation as gen
from .config import TrainConfig, parse_config, stream
from .errors import CpVaeError, UsageError
from .model import CpVaeModel, load_checkpoint, save_checkpoint
from .training import prepare_data, train


# ---------------------------------------------------------------------------
# plumbing

class _Parser(argparse.ArgumentParser):
    # argparse normally prints usage + message on two lines and exits; the
    # contract here is one diagnostic line and a clean nonzero return
    def error(self, message):
        raise UsageError(message)


@dataclass
class _Plan:
    """Everything a finished command wants written to disk. Outputs are
    (path, writer) pairs run only after all computation succeeded, so a
    failure never leaves partial files behind."""
    command: str
    cfg: TrainConfig
    seed: int
    inputs: dict = field(default_factory=dict)    # name -> Path
    outputs: list = field(default_factory=list)   # (Path, write fn)
    volatile: set = field(default_factory=set)    # paths left out of hashes


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError("missing %s: %s" % (what, p))
    return p


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _text_writer(text: str):
    def write(path: Path):
        path.write_text(text, encoding="utf-8")
    return write


def _json_writer(payload: dict):
    return _text_writer(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _n_threads() -> int:
    raw = os.environ.get("CPVAE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as e:
        raise UsageError("CPVAE_THREADS=%r is not an integer" % raw) from e
    return max(1, n)


def _labels_sibling(corpus_path: Path) -> Path:
    return corpus_path.with_suffix(".labels")


def _load_labeled(corpus_path: Path, what: str):
    labels = _require_file(_labels_sibling(corpus_path),
                           "label file for %s" % what)
    return data_mod.load_corpus(corpus_path, labels)


def _encode_corpus(vocab, sentences) -> tuple[np.ndarray, np.ndarray]:
    """Pad every sentence's content ids into one (N, T) block."""
    encoded = [vocab.encode(s) for s in sentences]
    lengths = np.array([len(s) for s in encoded], dtype=np.int64)
    if np.any(lengths == 0):
        raise UsageError("corpus contains an empty sentence")
    ids = np.zeros((len(encoded), int(lengths.max())), dtype=np.int64)
    for r, row in enumerate(encoded):
        ids[r, :len(row)] = row
    return ids, lengths


def _posterior_moments(model, reps, ids, lengths,
                       chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    mus, lvs = [], []
    for lo in range(0, len(lengths), chunk):
        hi = lo + chunk
        mu, lv = diag.posterior_params(
            model, None if reps is None else reps[lo:hi],
            ids[lo:hi], lengths[lo:hi])
        mus.append(mu)
        lvs.append(lv)
    return np.concatenate(mus, axis=0), np.concatenate(lvs, axis=0)


def _posterior_codes(model, reps, ids, lengths, chunk: int = 256) -> np.ndarray:
    return _posterior_moments(model, reps, ids, lengths, chunk)[0]


def _simplex_weights(model, reps, chunk: int = 256) -> np.ndarray:
    return np.concatenate([gen.encode_p(model, reps[lo:lo + chunk])
                           for lo in range(0, len(reps), chunk)], axis=0)


def _sentence_reps(cfg: TrainConfig, vocab, sentences) -> np.ndarray:
    _require_file(cfg.embeddings, "embedding file")
    emb = data_mod.load_embeddings(cfg.embeddings, vocab, cfg.embedding_dim,
                                   seed=cfg.seed)
    return np.stack([data_mod.sentence_representation(vocab.encode(s), emb)
                     for s in sentences])


def _load_model(args, want: str | None = None):
    path = _require_file(args.checkpoint, "checkpoint")
    model, vocab, extra = load_checkpoint(path)
    is_simplex = isinstance(model, CpVaeModel)
    if want == "cpvae" and not is_simplex:
        raise UsageError("%s needs a simplex-model checkpoint" % args.command)
    if want == "baseline" and is_simplex:
        raise UsageError("%s needs a baseline checkpoint" % args.command)
    return model, vocab, extra, path


def _effective_config(model_cfg: TrainConfig, args) -> TrainConfig:
    cfg = model_cfg
    if getattr(args, "config", None):
        cfg = parse_config(_require_file(args.config, "config file"),
                           base=cfg)
    return cfg


def _seed_of(args, cfg: TrainConfig) -> int:
    return cfg.seed if args.seed is None else int(args.seed)


def _parse_target_label(raw: str) -> int:
    names = {"negative": 0, "positive": 1}
    if raw in names:
        return names[raw]
    try:
        return int(raw)
    except ValueError as e:
        raise UsageError("target %r is neither a label name nor an integer"
                         % raw) from e


def _classifier_for(cfg: TrainConfig, vocab, seed: int):
    """Train the convolutional judge on the configured labeled corpus."""
    _require_file(cfg.train_corpus, "training corpus")
    _require_file(cfg.train_labels, "training labels")
    corpus = data_mod.load_corpus(cfg.train_corpus, cfg.train_labels)
    encoded = [vocab.encode(s) for s in corpus.sentences]
    clf = ev.CnnClassifier(vocab_size=len(vocab),
                           n_classes=len(set(corpus.labels)),
                           rng=stream(seed, "classifier-init"))
    held = clf.fit(encoded, corpus.labels,
                   rng=stream(seed, "classifier-batches"))
    return clf, held


# ---------------------------------------------------------------------------
# subcommands

def _cmd_train(args) -> _Plan:
    cfg = parse_config(args.config and _require_file(args.config, "config file"),
                       profile=args.profile)
    if args.seed is not None:
        cfg = parse_config(None, overrides={"seed": int(args.seed)}, base=cfg)
    _require_file(cfg.train_corpus, "training corpus")
    out = Path(args.output or "model.ckpt")
    corpus, vocab, _, reps = prepare_data(cfg)
    result = train(cfg, corpus=corpus, vocab=vocab, reps=reps)

    def write_ckpt(path: Path):
        save_checkpoint(path, result.model, result.vocab,
                        extra={"best_epoch": result.best_epoch,
                               "seed": cfg.seed})

    plan = _Plan("train", cfg, cfg.seed,
                 inputs={"config": Path(args.config)} if args.config else {})
    plan.inputs["corpus"] = Path(cfg.train_corpus)
    plan.outputs = [
        (out, write_ckpt),
        (Path(str(out) + ".log.csv"), _text_writer(result.log.to_csv())),
        (Path(str(out) + ".timings.csv"),
         _text_writer(result.log.timings_csv())),
    ]
    # wall-clock timings legitimately differ between byte-identical runs
    plan.volatile = {str(out) + ".timings.csv"}
    return plan


def _cmd_identify_basis(args) -> _Plan:
    model, vocab, _, ckpt = _load_model(args, want="cpvae")
    cfg = _effective_config(model.cfg, args)
    seed = _seed_of(args, cfg)
    corpus_path = _require_file(args.input or cfg.train_corpus, "corpus")
    corpus = _load_labeled(corpus_path, "basis identification")
    reps = _sentence_reps(cfg, vocab, corpus.sentences)
    assignment = gen.identify_basis(model, reps, np.asarray(corpus.labels),
                                    n_per_class=cfg.n_per_class,
                                    rng=stream(seed, "basis"))
    out = Path(args.output or "basis.json")
    plan = _Plan("identify-basis", cfg, seed,
                 inputs={"checkpoint": ckpt, "corpus": corpus_path})
    plan.outputs = [(out, _json_writer(assignment.to_json_dict()))]
    return plan


def _cmd_transfer(args) -> _Plan:
    model, vocab, _, ckpt = _load_model(args, want="cpvae")
    cfg = _effective_config(model.cfg, args)
    seed = _seed_of(args, cfg)
    beam = int(args.beam) if args.beam is not None else cfg.beam_size
    if args.target is None:
        raise UsageError("transfer needs --target")
    target_label = _parse_target_label(args.target)

    corpus_path = _require_file(args.input or cfg.test_corpus, "input corpus")
    inputs = data_mod.load_corpus(corpus_path)
    _require_file(cfg.train_corpus, "training corpus")
    _require_file(cfg.train_labels, "training labels")
    train_corpus = data_mod.load_corpus(cfg.train_corpus, cfg.train_labels)
    train_reps = _sentence_reps(cfg, vocab, train_corpus.sentences)
    assignment = gen.identify_basis(model, train_reps,
                                    np.asarray(train_corpus.labels),
                                    n_per_class=cfg.n_per_class,
                                    rng=stream(seed, "basis"))
    if target_label not in assignment.by_label:
        raise UsageError("target label %d not among the identified classes %s"
                         % (target_label, sorted(assignment.by_label)))
    vertex = assignment.by_label[target_label]

    transferred_ids = []
    for sent in inputs.sentences:
        ids = vocab.encode(sent)
        transferred_ids.append(gen.style_transfer(
            model, ids, vertex, beam_size=beam, max_len=cfg.max_decode_len))
    transferred_tokens = [vocab.decode(ids) for ids in transferred_ids]

    rows = ["%s\t%s" % (" ".join(src), " ".join(dst))
            for src, dst in zip(inputs.sentences, transferred_tokens)]
    tsv = "\n".join(rows) + "\n"

    clf, _ = _classifier_for(cfg, vocab, seed)
    pred = clf.classify([vocab.encode(t) for t in transferred_tokens])
    accuracy = float(np.mean(pred == target_label) * 100.0)
    bleu = ev.corpus_bleu(transferred_tokens,
                          [list(s) for s in inputs.sentences])
    share = {int(c): float(np.mean(pred == c)) for c in sorted(set(pred))}
    report = ev.MetricReport(accuracy=accuracy, bleu=bleu, per_class=share,
                             fingerprint=_sha256(ckpt))

    out = Path(args.output or "transfer.tsv")
    plan = _Plan("transfer", cfg, seed,
                 inputs={"checkpoint": ckpt, "corpus": corpus_path})
    plan.outputs = [
        (out, _text_writer(tsv)),
        (Path(str(out) + ".report.json"), _json_writer(report.to_json_dict())),
        (Path(str(out) + ".report.csv"), _text_writer(report.csv_row())),
    ]
    return plan


def _cmd_generate(args) -> _Plan:
    model, vocab, _, ckpt = _load_model(args, want="cpvae")
    cfg = _effective_config(model.cfg, args)
    seed = _seed_of(args, cfg)
    beam = int(args.beam) if args.beam is not None else cfg.beam_size
    rng = stream(seed, "generate")
    basis = model.basis.values
    lines = []
    for k in range(basis.shape[1]):
        for _ in range(cfg.generate_count):
            z2 = rng.normal(size=(1, cfg.z2_dim))
            ids = gen.decode_latent(model, basis[:, k][None, :], z2,
                                    beam, cfg.max_decode_len)
            lines.append("%d\t%s" % (k, " ".join(vocab.decode(ids))))
    out = Path(args.output or "generated.tsv")
    plan = _Plan("generate", cfg, seed, inputs={"checkpoint": ckpt})
    plan.outputs = [(out, _text_writer("\n".join(lines) + "\n"))]
    return plan


def _cmd_transition(args) -> _Plan:
    model, vocab, _, ckpt = _load_model(args, want="cpvae")
    cfg = _effective_config(model.cfg, args)
    seed = _seed_of(args, cfg)
    if args.target is None:
        raise UsageError("transition needs --target A,B (two basis indices)")
    parts = args.target.split(",")
    if len(parts) != 2:
        raise UsageError("--target must be two comma-separated basis indices")
    try:
        basis_a, basis_b = int(parts[0]), int(parts[1])
    except ValueError as e:
        raise UsageError("--target must be two comma-separated basis indices") from e
    switch = int(args.switch_step) if args.switch_step is not None \
        else cfg.max_decode_len // 2
    rng = stream(seed, "transition")
    lines = []
    for _ in range(cfg.generate_count):
        z2 = rng.normal(size=(1, cfg.z2_dim))
        ids = gen.topic_transition_generate(model, basis_a, basis_b, switch,
                                            z2, cfg.max_decode_len)
        lines.append(" ".join(vocab.decode(ids)))
    out = Path(args.output or "transition.txt")
    plan = _Plan("transition", cfg, seed, inputs={"checkpoint": ckpt})
    plan.outputs = [(out, _text_writer("\n".join(lines) + "\n"))]
    return plan


def _cmd_diagnose(args) -> _Plan:
    model, vocab, _, ckpt = _load_model(args)
    cfg = _effective_config(model.cfg, args)
    seed = _seed_of(args, cfg)
    is_simplex = isinstance(model, CpVaeModel)
    strategy = args.strategy or ("vertex" if is_simplex else "extremum")
    if strategy == "vertex" and not is_simplex:
        raise UsageError("vertex strategy needs a simplex-model checkpoint")
    if strategy != "vertex" and is_simplex:
        raise UsageError("strategy %r applies to baseline checkpoints" % strategy)

    corpus_path = _require_file(args.input or cfg.train_corpus, "corpus")
    needs_labels = not is_simplex
    corpus = _load_labeled(corpus_path, "dimension search") if needs_labels \
        else data_mod.load_corpus(corpus_path)
    ids, lengths = _encode_corpus(vocab, corpus.sentences)
    reps = _sentence_reps(cfg, vocab, corpus.sentences) if is_simplex else None
    codes, logvars = _posterior_moments(model, reps, ids, lengths)

    n = len(lengths)
    mix = diag.fit_aggregated_posterior(model, reps, ids, lengths,
                                        m=min(cfg.mixture_size, n),
                                        rng=stream(seed, "mixture"))

    extra: dict = {"strategy": strategy, "n": n}
    if is_simplex:
        p = _simplex_weights(model, reps)
        after = model.basis.values[:, np.argmax(p, axis=1)].T
        if p.shape[1] == 3:
            extra["coverage_fraction"] = diag.coverage_fraction(p)
    else:
        target_label = _parse_target_label(args.target or "positive")
        dim, acc, orient = gen.baseline_identify_dim(
            codes, np.asarray(corpus.labels))
        stats = gen.CodeStats.from_posterior(codes, logvars,
                                             stream(seed, "stats"))
        sign = orient if target_label == 1 else -orient
        after = np.stack([gen.baseline_manipulate(c, dim, strategy, stats, sign)
                          for c in codes])
        extra.update({"dim": dim, "dim_accuracy": acc,
                      "orientation": orient, "target_sign": sign})

    report = diag.nll_shift_report(mix, codes, after,
                                   n_threads=_n_threads())
    payload = dict(extra)
    payload["shift"] = report.to_json_dict()

    pts = codes
    if len(pts) > cfg.mapper_points:
        pick = np.sort(stream(seed, "mapper").choice(
            len(pts), size=cfg.mapper_points, replace=False))
        pts = pts[pick]
    graphs = diag.mapper_sweep(pts, cfg.mapper_sweep_values(),
                               cfg.mapper_overlap, cfg.dbscan_eps,
                               cfg.dbscan_min_samples)
    payload["components"] = {
        str(k): diag.connected_components(g)[0] for k, g in graphs.items()}

    out = Path(args.output or "diagnostics")
    plan = _Plan("diagnose", cfg, seed,
                 inputs={"checkpoint": ckpt, "corpus": corpus_path})
    plan.outputs = [
        (Path(str(out) + ".nll.json"), _json_writer(payload)),
        (Path(str(out) + ".nll.csv"), _text_writer(report.histogram_csv())),
        (Path(str(out) + ".mapper.json"),
         lambda path, g=graphs: diag.write_mapper_json(str(path), g)),
    ]
    if is_simplex:
        plan.outputs.append((Path(str(out) + ".simplex.csv"),
                             _text_writer(diag.coverage_csv(p))))
    return plan


def _cmd_eval(args) -> _Plan:
    model, vocab, _, ckpt = _load_model(args)
    cfg = _effective_config(model.cfg, args)
    seed = _seed_of(args, cfg)
    out = Path(args.output or "eval.json")
    plan = _Plan("eval", cfg, seed, inputs={"checkpoint": ckpt})

    if cfg.eval_mode == "transfer":
        tsv_path = _require_file(args.input, "transfer TSV") if args.input \
            else None
        if tsv_path is None:
            raise UsageError("eval in transfer mode needs --input (a TSV)")
        if args.target is None:
            raise UsageError("eval in transfer mode needs --target")
        target_label = _parse_target_label(args.target)
        sources, transfers = [], []
        for lineno, line in enumerate(
                tsv_path.read_text(encoding="utf-8").splitlines(), start=1):
            cells = line.split("\t")
            if len(cells) != 2:
                raise UsageError("%s line %d: expected 2 tab-separated columns"
                                 % (tsv_path, lineno))
            sources.append(cells[0].split())
            transfers.append(cells[1].split())
        if not sources:
            raise UsageError("%s is empty" % tsv_path)
        clf, _ = _classifier_for(cfg, vocab, seed)
        pred = clf.classify([vocab.encode(t) for t in transfers])
        accuracy = float(np.mean(pred == target_label) * 100.0)
        bleu = ev.corpus_bleu(transfers, sources)
        share = {int(c): float(np.mean(pred == c)) for c in sorted(set(pred))}
        report = ev.MetricReport(accuracy=accuracy, bleu=bleu,
                                 per_class=share, fingerprint=_sha256(ckpt))
        plan.inputs["tsv"] = tsv_path
        plan.outputs = [
            (out, _json_writer(report.to_json_dict())),
            (Path(str(out) + ".csv"), _text_writer(report.csv_row())),
        ]
        return plan

    if cfg.eval_mode == "cluster":
        corpus_path = _require_file(args.input or cfg.test_corpus, "corpus")
        corpus = _load_labeled(corpus_path, "cluster scoring")
        ids, lengths = _encode_corpus(vocab, corpus.sentences)
        reps = _sentence_reps(cfg, vocab, corpus.sentences) \
            if isinstance(model, CpVaeModel) else None
        codes = _posterior_codes(model, reps, ids, lengths)
        gold = np.asarray(corpus.labels)
        k = cfg.cluster_k or len(set(corpus.labels))
        labels, _, history = ev.kmeans(codes, k, rng=stream(seed, "kmeans"))
        scores = ev.cluster_metrics(labels, gold)
        payload = {"k": k, "objective": history[-1],
                   "cluster": scores.to_json_dict()}
        plan.inputs["corpus"] = corpus_path
        plan.outputs = [(out, _json_writer(payload))]
        return plan

    raise UsageError("unknown eval_mode %r" % cfg.eval_mode)


_HANDLERS = {
    "train": _cmd_train,
    "transfer": _cmd_transfer,
    "generate": _cmd_generate,
    "transition": _cmd_transition,
    "diagnose": _cmd_diagnose,
    "eval": _cmd_eval,
    "identify-basis": _cmd_identify_basis,
}


# ---------------------------------------------------------------------------
# parser and dispatch

def _build_parser() -> _Parser:
    parser = _Parser(prog="cpvae", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    flags = {
        "--config": dict(help="key=value config file"),
        "--profile": dict(choices=("yelp", "amazon", "agnews", "toy"),
                          help="named hyperparameter profile"),
        "--checkpoint": dict(help="model checkpoint path"),
        "--input": dict(help="input corpus or TSV"),
        "--output": dict(help="primary output path"),
        "--seed": dict(type=int, help="root seed override"),
        "--strategy": dict(choices=("sigma", "two-sigma", "extremum",
                                    "vertex"), help="manipulation strategy"),
        "--target": dict(help="target label, or A,B basis pair"),
        "--switch-step": dict(type=int, dest="switch_step",
                              help="token index where the topic switches"),
        "--beam": dict(type=int, help="beam width override"),
    }
    wants = {
        "train": ("--config", "--profile", "--seed", "--output"),
        "transfer": ("--checkpoint", "--config", "--input", "--output",
                     "--seed", "--target", "--beam"),
        "generate": ("--checkpoint", "--config", "--output", "--seed",
                     "--beam"),
        "transition": ("--checkpoint", "--config", "--output", "--seed",
                       "--target", "--switch-step"),
        "diagnose": ("--checkpoint", "--config", "--input", "--output",
                     "--seed", "--strategy", "--target"),
        "eval": ("--checkpoint", "--config", "--input", "--output",
                 "--seed", "--target"),
        "identify-basis": ("--checkpoint", "--config", "--input",
                           "--output", "--seed"),
    }
    for name, flag_names in wants.items():
        p = sub.add_parser(name)
        for f in flag_names:
            p.add_argument(f, **flags[f])
    return parser


def _commit(plan: _Plan, argv) -> None:
    written: list[Path] = []
    try:
        hashes = {}
        for path, write in plan.outputs:
            path.parent.mkdir(parents=True, exist_ok=True)
            write(path)
            written.append(path)
            if str(path) not in plan.volatile:
                hashes[path.name] = _sha256(path)
        manifest = {
            "command": plan.command,
            "argv": list(argv),
            "config": {k: v for k, v in vars(plan.cfg).items()},
            "seed": plan.seed,
            "inputs": {name: {"path": str(p), "sha256": _sha256(p)}
                       for name, p in plan.inputs.items()},
            "outputs": hashes,
        }
        primary = plan.outputs[0][0]
        mpath = Path(str(primary) + ".manifest.json")
        _json_writer(manifest)(mpath)
    except BaseException:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        raise


def dispatch(argv) -> int:
    """Parse argv, run the one subcommand, write outputs plus manifest.
    Nonzero exit and a single stderr line on any failure; partial outputs
    are removed."""
    try:
        args = _build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write("cpvae: %s\n" % e)
        return 2
    except SystemExit as e:       # --help
        return int(e.code or 0)
    try:
        plan = _HANDLERS[args.command](args)
        _commit(plan, argv)
        return 0
    except CpVaeError as e:
        sys.stderr.write("cpvae: %s\n" % str(e).replace("\n", " "))
        return 1
    except OSError as e:
        sys.stderr.write("cpvae: %s\n" % e)
        return 1


def rerun(manifest_path: str | Path) -> int:
    """Replay the invocation recorded in a manifest; the outputs come back
    byte-identical. Inputs are hash-checked first, since replaying against
    drifted inputs would silently produce different bytes."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    for name, entry in manifest.get("inputs", {}).items():
        p = _require_file(entry["path"], "recorded input %r" % name)
        if _sha256(p) != entry["sha256"]:
            raise UsageError("input %r (%s) changed since the manifest was "
                             "written" % (name, p))
    return dispatch(manifest["argv"])


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
