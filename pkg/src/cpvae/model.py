"""The sequence VAE with a split latent: a structured code whose posterior
mean is confined to a learned probability simplex, and a free code from a
recurrent encoder. Also the unconstrained single-latent baseline, every
loss term, and the versioned checkpoint format.

Shapes follow the convention: batch rows first, E stored as (z1_dim, K)
with basis vectors in columns, simplex weights p of length K.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import TrainConfig
from .errors import CheckpointError, UsageError

LOGVAR_MIN, LOGVAR_MAX = -20.0, 20.0

CHECKPOINT_MAGIC = b"SVCK"
CHECKPOINT_VERSION = 1


def _linear(rng, n_in, n_out):
    bound = 1.0 / np.sqrt(n_in)
    return (Tensor(rng.uniform(-bound, bound, (n_in, n_out)), requires_grad=True),
            Tensor(np.zeros(n_out), requires_grad=True))


@dataclass
class LatentBundle:
    """Everything the two encoders produce for one batch."""
    h: Tensor        # raw structured code (B, N1)
    p: Tensor        # simplex weights (B, K)
    mu1: Tensor      # constrained mean (B, N1)
    logvar1: Tensor  # (B, N1)
    mu2: Tensor      # (B, N2)
    logvar2: Tensor  # (B, N2)
    z1: Tensor | None = None
    z2: Tensor | None = None


def sample_latent(mu: Tensor, logvar: Tensor, noise: np.ndarray) -> Tensor:
    """Reparameterized draw z = mu + exp(logvar/2) * noise."""
    if mu.shape != logvar.shape or mu.shape != noise.shape:
        raise UsageError("sample_latent shape mismatch: %r %r %r"
                         % (mu.shape, logvar.shape, noise.shape))
    std = ad.exp(logvar * 0.5)
    return mu + std * Tensor(noise)


def kl_gaussian(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, diag exp(logvar)) || N(0, I)) summed over dims and batch:
    0.5 * sum_j (mu_j^2 + sigma_j^2 - log sigma_j^2 - 1)."""
    if mu.shape != logvar.shape:
        raise UsageError("kl_gaussian shape mismatch: %r vs %r" % (mu.shape, logvar.shape))
    one = Tensor(np.ones_like(mu.values))
    return ad.sum_(mu * mu + ad.exp(logvar) - logvar - one) * 0.5


def reg_loss(basis: Tensor, alpha: float) -> Tensor:
    """Frobenius norm of (E^T E - alpha*I); zero exactly when the basis
    columns are orthogonal with squared norm alpha."""
    gram = ad.matmul(ad.transpose(basis), basis)
    k = basis.values.shape[1]
    delta = gram - Tensor(alpha * np.eye(k))
    return ad.sqrt(ad.sum_(delta * delta))


def s_rec_loss(h: Tensor, mu1: Tensor, negatives: Tensor, n_negatives: int) -> Tensor:
    """Hinge pulling each raw code toward its own simplex mean and away
    from other sentences' means: mean over batch of
    (1/m) * sum_i max(0, 1 - h.mu1 + h.mu1_neg_i).

    ``negatives`` holds the m negative means per batch row, stacked as
    (B*m, N1) in row-major (row b's negatives are contiguous).
    """
    if n_negatives < 1:
        raise UsageError("need at least one negative sample")
    b = h.values.shape[0]
    if negatives.values.shape[0] != b * n_negatives:
        raise UsageError("expected %d negative rows, got %d"
                         % (b * n_negatives, negatives.values.shape[0]))
    pos = ad.sum_(h * mu1, axis=1)                      # (B,)
    rep = np.repeat(np.arange(b), n_negatives)
    h_rep = ad.embedding(h, rep)                        # (B*m, N1)
    pos_rep = ad.embedding(ad.reshape(pos, (b, 1)), rep)  # (B*m, 1)
    neg = ad.sum_(h_rep * negatives, axis=1)            # (B*m,)
    margin = Tensor(np.ones(b * n_negatives)) - ad.reshape(pos_rep, (b * n_negatives,)) + neg
    hinge = ad.maximum(margin, Tensor(np.zeros(b * n_negatives)))
    return ad.sum_(hinge) * (1.0 / (b * n_negatives))


def orthogonalize_basis(basis_values: np.ndarray, alpha: float) -> np.ndarray:
    """Closest-in-spirit rescaling E <- E (E^T E)^{-1/2} sqrt(alpha), after
    which E^T E = alpha*I to machine precision. Requires full column rank."""
    gram = basis_values.T @ basis_values
    w, v = np.linalg.eigh(gram)
    if np.any(w <= 1e-12):
        raise UsageError("basis is column-rank-deficient; cannot orthogonalize")
    inv_sqrt = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
    return basis_values @ inv_sqrt * np.sqrt(alpha)


def _encode_lstm(embed: Tensor, weights: ad.LstmWeights, ids: np.ndarray,
                 lengths: np.ndarray) -> Tensor:
    """Run the recurrent encoder over padded ids, freezing each row's state
    once its true length is passed; returns the final hidden state."""
    b, t = ids.shape
    if t == 0 or np.any(lengths < 1):
        raise UsageError("encoder needs non-empty sequences")
    hd = weights.hidden_dim
    h = Tensor(np.zeros((b, hd)))
    c = Tensor(np.zeros((b, hd)))
    for step in range(t):
        x = ad.embedding(embed, ids[:, step])
        h_new, c_new = ad.lstm_step(x, h, c, weights)
        alive = (lengths > step).astype(np.float64)[:, None]
        keep = Tensor(alive)
        gone = Tensor(1.0 - alive)
        h = keep * h_new + gone * h
        c = keep * c_new + gone * c
    return h


class CpVaeModel:
    """Split-latent sequence VAE with a simplex-constrained structured mean."""

    def __init__(self, cfg: TrainConfig, vocab_size: int, rng: np.random.Generator):
        if cfg.n_basis > cfg.z1_dim:
            raise UsageError("need n_basis <= z1_dim, got %d > %d"
                             % (cfg.n_basis, cfg.z1_dim))
        self.cfg = cfg
        self.vocab_size = vocab_size
        d, n1, k, n2 = cfg.embedding_dim, cfg.z1_dim, cfg.n_basis, cfg.z2_dim

        # structured route: sentence rep -> tanh hidden -> (h, logvar1)
        self.w_mlp, self.b_mlp = _linear(rng, d, cfg.mlp_hidden)
        self.w_h, self.b_h = _linear(rng, cfg.mlp_hidden, n1)
        self.w_lv1, self.b_lv1 = _linear(rng, cfg.mlp_hidden, n1)
        # simplex mapping: p = softmax(W h + b), mu1 = E p
        self.w_simplex, self.b_simplex = _linear(rng, n1, k)
        # column norms start at basis_init_scale * sqrt(alpha); below 1 the
        # regularizer has real work to do growing and separating the columns
        raw = rng.normal(size=(n1, k))
        raw *= cfg.basis_init_scale * np.sqrt(cfg.alpha) \
            / np.linalg.norm(raw, axis=0, keepdims=True)
        self.basis = Tensor(raw, requires_grad=True)

        # unstructured route: token LSTM -> (mu2, logvar2)
        self.enc_embed = Tensor(rng.normal(0.0, 0.1, (vocab_size, cfg.enc_emb_dim)),
                                requires_grad=True)
        self.enc_lstm = ad.init_lstm(cfg.enc_emb_dim, cfg.enc_hidden, rng)
        self.w_mu2, self.b_mu2 = _linear(rng, cfg.enc_hidden, n2)
        self.w_lv2, self.b_lv2 = _linear(rng, cfg.enc_hidden, n2)

        # decoder
        z_dim = n1 + n2
        self.dec_embed = Tensor(rng.normal(0.0, 0.1, (vocab_size, cfg.dec_emb_dim)),
                                requires_grad=True)
        self.w_init, self.b_init = _linear(rng, z_dim, 2 * cfg.dec_hidden)
        self.dec_lstm = ad.init_lstm(cfg.dec_emb_dim + z_dim, cfg.dec_hidden, rng)
        self.w_out, self.b_out = _linear(rng, cfg.dec_hidden, vocab_size)

    # -- parameter bookkeeping ------------------------------------------
    def named_parameters(self) -> dict[str, Tensor]:
        out = {
            "w_mlp": self.w_mlp, "b_mlp": self.b_mlp,
            "w_h": self.w_h, "b_h": self.b_h,
            "w_lv1": self.w_lv1, "b_lv1": self.b_lv1,
            "w_simplex": self.w_simplex, "b_simplex": self.b_simplex,
            "basis": self.basis,
            "enc_embed": self.enc_embed,
            "enc_w_x": self.enc_lstm.w_x, "enc_w_h": self.enc_lstm.w_h,
            "enc_b": self.enc_lstm.b,
            "w_mu2": self.w_mu2, "b_mu2": self.b_mu2,
            "w_lv2": self.w_lv2, "b_lv2": self.b_lv2,
            "dec_embed": self.dec_embed,
            "w_init": self.w_init, "b_init": self.b_init,
            "dec_w_x": self.dec_lstm.w_x, "dec_w_h": self.dec_lstm.w_h,
            "dec_b": self.dec_lstm.b,
            "w_out": self.w_out, "b_out": self.b_out,
        }
        return out

    def encoder_parameters(self) -> list[Tensor]:
        names = ["w_mlp", "b_mlp", "w_h", "b_h", "w_lv1", "b_lv1",
                 "w_simplex", "b_simplex", "basis", "enc_embed",
                 "enc_w_x", "enc_w_h", "enc_b", "w_mu2", "b_mu2",
                 "w_lv2", "b_lv2"]
        params = self.named_parameters()
        return [params[n] for n in names]

    def decoder_parameters(self) -> list[Tensor]:
        names = ["dec_embed", "w_init", "b_init", "dec_w_x", "dec_w_h",
                 "dec_b", "w_out", "b_out"]
        params = self.named_parameters()
        return [params[n] for n in names]

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    # -- encoders --------------------------------------------------------
    def encode_structured(self, rep: np.ndarray | Tensor) -> tuple[Tensor, Tensor]:
        """Sentence representations (B, d) -> raw code h (B, N1) and its
        clamped log-variance head."""
        rep_t = rep if isinstance(rep, Tensor) else Tensor(np.atleast_2d(rep))
        if rep_t.values.shape[1] != self.w_mlp.values.shape[0]:
            raise UsageError("representation width %d != configured %d"
                             % (rep_t.values.shape[1], self.w_mlp.values.shape[0]))
        hidden = ad.tanh(ad.matmul(rep_t, self.w_mlp) + self.b_mlp)
        h = ad.matmul(hidden, self.w_h) + self.b_h
        logvar1 = ad.clip(ad.matmul(hidden, self.w_lv1) + self.b_lv1,
                          LOGVAR_MIN, LOGVAR_MAX)
        return h, logvar1

    def map_to_simplex(self, h: Tensor) -> tuple[Tensor, Tensor]:
        """p = softmax(W h + b); mu1 = E p (rows: mu1 = p @ E^T)."""
        p = ad.softmax(ad.matmul(h, self.w_simplex) + self.b_simplex, axis=1)
        mu1 = ad.matmul(p, ad.transpose(self.basis))
        return p, mu1

    def encode_unstructured(self, ids: np.ndarray, lengths: np.ndarray) -> tuple[Tensor, Tensor]:
        h = _encode_lstm(self.enc_embed, self.enc_lstm, ids, lengths)
        mu2 = ad.matmul(h, self.w_mu2) + self.b_mu2
        logvar2 = ad.clip(ad.matmul(h, self.w_lv2) + self.b_lv2,
                          LOGVAR_MIN, LOGVAR_MAX)
        return mu2, logvar2

    def encode(self, reps: np.ndarray, ids: np.ndarray, lengths: np.ndarray) -> LatentBundle:
        h, logvar1 = self.encode_structured(reps)
        p, mu1 = self.map_to_simplex(h)
        mu2, logvar2 = self.encode_unstructured(ids, lengths)
        return LatentBundle(h=h, p=p, mu1=mu1, logvar1=logvar1,
                            mu2=mu2, logvar2=logvar2)

    # -- decoder ----------------------------------------------------------
    def init_decoder_state(self, z: Tensor) -> tuple[Tensor, Tensor]:
        both = ad.tanh(ad.matmul(z, self.w_init) + self.b_init)
        hd = self.cfg.dec_hidden
        return ad.narrow(both, 1, 0, hd), ad.narrow(both, 1, hd, hd)

    def reconstruction_nll(self, z: Tensor, dec_in: np.ndarray,
                           dec_target: np.ndarray, mask: np.ndarray,
                           training: bool = False,
                           rng: np.random.Generator | None = None) -> Tensor:
        """Teacher-forced NLL summed over tokens and batch rows. The latent
        seeds the initial state and rides along with every step's input;
        dropout runs after the input embedding and the recurrent cell in
        training mode only."""
        b, t = dec_in.shape
        h, c = self.init_decoder_state(z)
        total = None
        p_drop = self.cfg.dropout if training else 0.0
        for step in range(t):
            emb = ad.embedding(self.dec_embed, dec_in[:, step])
            emb = ad.dropout(emb, p_drop, rng=rng, training=training)
            x = ad.concat([emb, z], axis=1)
            h, c = ad.lstm_step(x, h, c, self.dec_lstm)
            out = ad.dropout(h, p_drop, rng=rng, training=training)
            logits = ad.matmul(out, self.w_out) + self.b_out
            step_nll = ad.cross_entropy_logits(logits, dec_target[:, step], mask[:, step])
            total = step_nll if total is None else total + step_nll
        return total

    def decoder_step(self, token_ids: np.ndarray, state: tuple, z_values: np.ndarray):
        """Single tape-free decode step: ids (B,) -> (log-probs (B, V), state')."""
        h, c = state
        emb = self.dec_embed.values[token_ids]
        x = Tensor(np.concatenate([emb, z_values], axis=1))
        h_new, c_new = ad.lstm_step(x, Tensor(h) if not isinstance(h, Tensor) else h,
                                    Tensor(c) if not isinstance(c, Tensor) else c,
                                    self.dec_lstm)
        logits = (h_new.values @ self.w_out.values) + self.b_out.values
        logp = logits - ad.log_sum_exp(logits, axis=1)[:, None]
        return logp, (h_new.values, c_new.values)

    # -- losses -----------------------------------------------------------
    def total_loss(self, batch, reps: np.ndarray, neg_reps: np.ndarray,
                   beta2: float | None = None, training: bool = True,
                   noise_rng: np.random.Generator | None = None,
                   noise: tuple | None = None):
        """Full objective averaged per batch row, plus a breakdown dict.

        ``neg_reps`` holds m negative-sample sentence representations per
        batch row, stacked (B*m, d); they are re-encoded with current
        parameters. ``noise`` optionally fixes the two reparameterization
        draws (used by gradient checks); otherwise ``noise_rng`` draws them.
        """
        cfg = self.cfg
        bundle = self.encode(reps, batch.enc_ids, batch.lengths)
        b = reps.shape[0]
        if noise is None:
            if noise_rng is None:
                raise UsageError("total_loss needs noise or noise_rng")
            noise = (noise_rng.standard_normal(bundle.mu1.values.shape),
                     noise_rng.standard_normal(bundle.mu2.values.shape))
        bundle.z1 = sample_latent(bundle.mu1, bundle.logvar1, noise[0])
        bundle.z2 = sample_latent(bundle.mu2, bundle.logvar2, noise[1])
        z = ad.concat([bundle.z1, bundle.z2], axis=1)
        recon = self.reconstruction_nll(z, batch.dec_in, batch.dec_target,
                                        batch.target_mask, training=training,
                                        rng=noise_rng)
        kl1 = kl_gaussian(bundle.mu1, bundle.logvar1)
        kl2 = kl_gaussian(bundle.mu2, bundle.logvar2)
        reg = reg_loss(self.basis, cfg.alpha)
        if cfg.s_rec_weight != 0.0:
            h_neg, _ = self.encode_structured(neg_reps)
            _, mu1_neg = self.map_to_simplex(h_neg)
            srec = s_rec_loss(bundle.h, bundle.mu1, mu1_neg, cfg.n_negatives)
        else:
            srec = Tensor(0.0)
        b2 = cfg.beta2 if beta2 is None else beta2
        inv_b = 1.0 / b
        total = (recon + kl1 * cfg.beta1 + kl2 * b2) * inv_b \
            + reg * cfg.reg_weight + srec * cfg.s_rec_weight
        breakdown = {
            "recon": float(recon.values) * inv_b,
            "kl1": float(kl1.values) * inv_b,
            "kl2": float(kl2.values) * inv_b,
            "reg": float(reg.values),
            "s_rec": float(srec.values),
        }
        return total, breakdown, bundle


class BaselineVae:
    """Single-latent sequence VAE (no simplex machinery), latent dim 80 at
    paper scale; the identity stands in for the simplex mapping."""

    def __init__(self, cfg: TrainConfig, vocab_size: int, rng: np.random.Generator):
        self.cfg = cfg
        self.vocab_size = vocab_size
        nz = cfg.baseline_latent_dim
        self.enc_embed = Tensor(rng.normal(0.0, 0.1, (vocab_size, cfg.enc_emb_dim)),
                                requires_grad=True)
        self.enc_lstm = ad.init_lstm(cfg.enc_emb_dim, cfg.enc_hidden, rng)
        self.w_mu, self.b_mu = _linear(rng, cfg.enc_hidden, nz)
        self.w_lv, self.b_lv = _linear(rng, cfg.enc_hidden, nz)
        self.dec_embed = Tensor(rng.normal(0.0, 0.1, (vocab_size, cfg.dec_emb_dim)),
                                requires_grad=True)
        self.w_init, self.b_init = _linear(rng, nz, 2 * cfg.dec_hidden)
        self.dec_lstm = ad.init_lstm(cfg.dec_emb_dim + nz, cfg.dec_hidden, rng)
        self.w_out, self.b_out = _linear(rng, cfg.dec_hidden, vocab_size)

    def named_parameters(self) -> dict[str, Tensor]:
        return {
            "enc_embed": self.enc_embed,
            "enc_w_x": self.enc_lstm.w_x, "enc_w_h": self.enc_lstm.w_h,
            "enc_b": self.enc_lstm.b,
            "w_mu": self.w_mu, "b_mu": self.b_mu,
            "w_lv": self.w_lv, "b_lv": self.b_lv,
            "dec_embed": self.dec_embed,
            "w_init": self.w_init, "b_init": self.b_init,
            "dec_w_x": self.dec_lstm.w_x, "dec_w_h": self.dec_lstm.w_h,
            "dec_b": self.dec_lstm.b,
            "w_out": self.w_out, "b_out": self.b_out,
        }

    def encoder_parameters(self) -> list[Tensor]:
        params = self.named_parameters()
        return [params[n] for n in ["enc_embed", "enc_w_x", "enc_w_h", "enc_b",
                                    "w_mu", "b_mu", "w_lv", "b_lv"]]

    def decoder_parameters(self) -> list[Tensor]:
        params = self.named_parameters()
        return [params[n] for n in ["dec_embed", "w_init", "b_init",
                                    "dec_w_x", "dec_w_h", "dec_b",
                                    "w_out", "b_out"]]

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def encode(self, ids: np.ndarray, lengths: np.ndarray) -> tuple[Tensor, Tensor]:
        h = _encode_lstm(self.enc_embed, self.enc_lstm, ids, lengths)
        mu = ad.matmul(h, self.w_mu) + self.b_mu
        logvar = ad.clip(ad.matmul(h, self.w_lv) + self.b_lv,
                         LOGVAR_MIN, LOGVAR_MAX)
        return mu, logvar

    def init_decoder_state(self, z: Tensor) -> tuple[Tensor, Tensor]:
        both = ad.tanh(ad.matmul(z, self.w_init) + self.b_init)
        hd = self.cfg.dec_hidden
        return ad.narrow(both, 1, 0, hd), ad.narrow(both, 1, hd, hd)

    reconstruction_nll = CpVaeModel.reconstruction_nll
    decoder_step = CpVaeModel.decoder_step

    def total_loss(self, batch, beta: float | None = None, training: bool = True,
                   noise_rng: np.random.Generator | None = None,
                   noise: np.ndarray | None = None):
        """Reconstruction + beta * KL, averaged per batch row. The breakdown
        carries exactly those two terms."""
        mu, logvar = self.encode(batch.enc_ids, batch.lengths)
        if noise is None:
            if noise_rng is None:
                raise UsageError("total_loss needs noise or noise_rng")
            noise = noise_rng.standard_normal(mu.values.shape)
        z = sample_latent(mu, logvar, noise)
        recon = self.reconstruction_nll(z, batch.dec_in, batch.dec_target,
                                        batch.target_mask, training=training,
                                        rng=noise_rng)
        kl = kl_gaussian(mu, logvar)
        b_weight = self.cfg.baseline_beta if beta is None else beta
        inv_b = 1.0 / batch.enc_ids.shape[0]
        total = (recon + kl * b_weight) * inv_b
        breakdown = {"recon": float(recon.values) * inv_b,
                     "kl": float(kl.values) * inv_b}
        return total, breakdown, (mu, logvar)


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path: str | Path, model, vocab, extra: dict | None = None):
    """Binary checkpoint: magic, version, JSON header (config, vocab, param
    manifest), then the parameter arrays as little-endian float64."""
    params = model.named_parameters()
    manifest = [{"name": n, "shape": list(t.values.shape)} for n, t in params.items()]
    header = {
        "version": CHECKPOINT_VERSION,
        "kind": "baseline" if isinstance(model, BaselineVae) else "cpvae",
        "config": {k: v for k, v in vars(model.cfg).items()},
        "vocab": model_vocab_tokens(vocab),
        "vocab_sha256": vocab.sha256(),
        "params": manifest,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for entry in manifest:
            arr = np.ascontiguousarray(params[entry["name"]].values, dtype="<f8")
            fh.write(arr.tobytes())


def model_vocab_tokens(vocab) -> list[str]:
    return list(vocab.itos)


def load_checkpoint(path: str | Path):
    """Rebuild (model, vocab, extra) from a checkpoint, validating every
    declared shape against the instantiated model."""
    from .data import Vocabulary
    from collections import Counter

    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("%s: bad magic, not a checkpoint" % path)
    (hlen,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError("%s: corrupt header: %s" % (path, e)) from e
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError("%s: unsupported version %r" % (path, header.get("version")))

    vocab = Vocabulary(Counter())
    vocab.itos = list(header["vocab"])
    vocab.stoi = {tok: i for i, tok in enumerate(vocab.itos)}
    if vocab.sha256() != header["vocab_sha256"]:
        raise CheckpointError("%s: vocab hash mismatch" % path)

    cfg = TrainConfig(**header["config"])
    rng = np.random.default_rng(0)
    model = (BaselineVae if header["kind"] == "baseline" else CpVaeModel)(
        cfg, len(vocab.itos), rng)
    params = model.named_parameters()
    offset = 8 + hlen
    for entry in header["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in params:
            raise CheckpointError("%s: unknown parameter %r" % (path, name))
        if params[name].values.shape != shape:
            raise CheckpointError("%s: shape mismatch for %r: file %r vs model %r"
                                  % (path, name, shape, params[name].values.shape))
        n = int(np.prod(shape)) if shape else 1
        end = offset + 8 * n
        if end > len(raw):
            raise CheckpointError("%s: truncated parameter data at %r" % (path, name))
        params[name].values = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        params[name].grad = np.zeros_like(params[name].values)
        offset = end
    if offset != len(raw):
        raise CheckpointError("%s: %d trailing bytes" % (path, len(raw) - offset))
    return model, vocab, header.get("extra", {})
