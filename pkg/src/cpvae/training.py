"""Optimization loop: Adam on the encoding side, SGD on the decoder,
gradient clipping, patience-based stopping on reconstruction, KL annealing,
the aggressive-encoder baseline regime, and CSV train logs."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import data as data_mod
from .config import TrainConfig, stream
from .errors import DivergenceError, UsageError
from .model import BaselineVae, CpVaeModel, save_checkpoint


@dataclass
class TrainLog:
    """Per-epoch loss components. Wall time is tracked for humans but kept
    out of the deterministic CSV so identical runs emit identical bytes."""
    columns = ("epoch", "recon", "kl1", "kl2", "reg", "s_rec")
    rows: list[dict] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)

    def append(self, epoch: int, parts: dict, wall: float):
        row = {"epoch": epoch}
        row["recon"] = parts.get("recon", 0.0)
        row["kl1"] = parts.get("kl1", parts.get("kl", 0.0))
        row["kl2"] = parts.get("kl2", 0.0)
        row["reg"] = parts.get("reg", 0.0)
        row["s_rec"] = parts.get("s_rec", 0.0)
        self.rows.append(row)
        self.wall_times.append(wall)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([row["epoch"]] + ["%.10e" % row[c] for c in self.columns[1:]])
        return buf.getvalue()

    def timings_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("epoch", "wall_time_s"))
        for i, w in enumerate(self.wall_times):
            writer.writerow((i, "%.3f" % w))
        return buf.getvalue()


@dataclass
class TrainResult:
    model: object
    log: TrainLog
    best_epoch: int
    best_state: dict  # name -> array snapshot at the best epoch
    vocab: object
    reps: np.ndarray


def _snapshot(model) -> dict:
    return {n: t.values.copy() for n, t in model.named_parameters().items()}


def _restore(model, state: dict):
    for n, t in model.named_parameters().items():
        t.values = state[n].copy()
        t.grad = np.zeros_like(t.values)


def should_stop(recon_history: list[float], patience: int) -> bool:
    """True once the latest `patience` epochs all failed to beat the best
    reconstruction seen before them."""
    if len(recon_history) <= patience:
        return False
    best_idx = int(np.argmin(recon_history))
    return len(recon_history) - 1 - best_idx >= patience


def _check_finite(value: float, parts: dict, batch) -> None:
    if np.isfinite(value):
        return
    lengths = batch.lengths
    raise DivergenceError(
        "loss is not finite (%r); components %s; batch size %d, lengths min %d max %d"
        % (value, {k: round(v, 3) for k, v in parts.items()},
           lengths.shape[0], int(lengths.min()), int(lengths.max())))


def prepare_data(cfg: TrainConfig):
    """Load corpus, vocab, pretrained vectors, and per-sentence mean
    representations as configured."""
    corpus = data_mod.load_corpus(cfg.train_corpus,
                                  cfg.train_labels or None)
    vocab = data_mod.build_vocabulary(
        corpus, max_size=cfg.vocab_max_size or None,
        min_count=cfg.vocab_min_count)
    emb = data_mod.load_embeddings(cfg.embeddings, vocab, cfg.embedding_dim,
                                   seed=cfg.seed)
    reps = np.stack([data_mod.sentence_representation(vocab.encode(s), emb)
                     for s in corpus.sentences])
    return corpus, vocab, emb, reps


def train(cfg: TrainConfig, corpus=None, vocab=None, reps=None,
          checkpoint_path: str | Path | None = None, model=None) -> TrainResult:
    """Run the configured regime and return the best-reconstruction model.

    Data may be passed in (tests) or loaded from the config paths; a
    pre-built ``model`` continues training instead of a fresh init. When
    ``checkpoint_path`` is set the best snapshot is saved there.
    """
    cfg.validate()
    if corpus is None:
        corpus, vocab, _, reps = prepare_data(cfg)
    if len(corpus) == 0:
        raise UsageError("empty corpus")

    if model is None:
        init_rng = stream(cfg.seed, "init")
        if cfg.mode == "beta_vae_baseline":
            model = BaselineVae(cfg, len(vocab), init_rng)
        else:
            model = CpVaeModel(cfg, len(vocab), init_rng)

    enc_opt = ad.Adam(model.encoder_parameters(), lr=cfg.lr_encoder)
    dec_opt = ad.SGD(model.decoder_parameters(), lr=cfg.lr_decoder)
    shuffle_rng = stream(cfg.seed, "shuffle")
    noise_rng = stream(cfg.seed, "noise")
    neg_rng = stream(cfg.seed, "negatives")

    log = TrainLog()
    best = (float("inf"), -1, None)  # recon, epoch, snapshot
    recon_history: list[float] = []
    m = cfg.n_negatives

    for epoch in range(cfg.max_epochs):
        t0 = time.monotonic()
        sums: dict[str, float] = {}
        n_batches = 0
        beta2 = cfg.kl_weight(epoch)
        for batch in data_mod.batch_iterator(corpus, vocab, cfg.batch_size,
                                             rng=shuffle_rng):
            if cfg.mode == "beta_vae_baseline":
                if cfg.aggressive_steps > 0:
                    aggressive_encoder_phase(model, batch, enc_opt, noise_rng,
                                             cfg.aggressive_steps,
                                             beta=cfg.baseline_beta)
                parts = _joint_step(model, batch, None, None, enc_opt, dec_opt,
                                    cfg, noise_rng, beta2=None)
            else:
                b = batch.enc_ids.shape[0]
                neg_idx = neg_rng.integers(0, len(corpus), size=b * m)
                parts = _joint_step(model, batch, reps[batch.indices],
                                    reps[neg_idx], enc_opt, dec_opt, cfg,
                                    noise_rng, beta2=beta2)
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v
            n_batches += 1
        means = {k: v / n_batches for k, v in sums.items()}
        log.append(epoch, means, time.monotonic() - t0)

        recon = means["recon"]
        recon_history.append(recon)
        if recon < best[0]:
            best = (recon, epoch, _snapshot(model))
        if should_stop(recon_history, cfg.patience):
            break

    if best[2] is not None:
        _restore(model, best[2])
    result = TrainResult(model=model, log=log, best_epoch=best[1],
                         best_state=best[2] or _snapshot(model),
                         vocab=vocab, reps=reps)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, vocab,
                        extra={"best_epoch": best[1], "seed": cfg.seed})
    return result


def _joint_step(model, batch, batch_reps, neg_reps, enc_opt, dec_opt,
                cfg: TrainConfig, noise_rng, beta2) -> dict:
    enc_opt.zero_grad()
    dec_opt.zero_grad()
    with ad.Tape() as tape:
        if isinstance(model, BaselineVae):
            total, parts, _ = model.total_loss(batch, training=True,
                                               noise_rng=noise_rng)
        else:
            total, parts, _ = model.total_loss(batch, batch_reps, neg_reps,
                                               beta2=beta2, training=True,
                                               noise_rng=noise_rng)
    _check_finite(float(total.values), parts, batch)
    tape.backward(total)
    ad.clip_global_norm(model.parameters(), cfg.grad_clip)
    enc_opt.step()
    dec_opt.step()
    return parts


def aggressive_encoder_phase(model: BaselineVae, batch, enc_opt, noise_rng,
                             n_inner: int, beta: float):
    """Encoder-only updates with the decoder frozen, run before the joint
    step to keep the approximate posterior from lagging."""
    if n_inner < 1:
        raise UsageError("aggressive phase needs n_inner >= 1")
    for _ in range(n_inner):
        enc_opt.zero_grad()
        with ad.Tape() as tape:
            total, parts, _ = model.total_loss(batch, beta=beta, training=True,
                                               noise_rng=noise_rng)
        _check_finite(float(total.values), parts, batch)
        tape.backward(total)
        ad.clip_global_norm(model.encoder_parameters(), 5.0)
        enc_opt.step()
