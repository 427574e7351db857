"""Training configuration, dataset profiles, the flat key=value config
parser, and named RNG streams derived from one root seed."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, UsageError


def stream(root_seed: int, name: str) -> np.random.Generator:
    """Named generator derived from the root seed; same (seed, name) pair
    always yields the same stream, distinct names decorrelate."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    salt = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([root_seed, salt]))


@dataclass
class TrainConfig:
    dataset: str = "toy"
    mode: str = "cpvae"  # cpvae | beta_vae_baseline

    # latent geometry
    n_basis: int = 3          # K
    alpha: float = 10.0
    z1_dim: int = 8           # N1
    z2_dim: int = 16          # N2
    baseline_latent_dim: int = 80
    basis_init_scale: float = 1.0  # column norm at init, in units of sqrt(alpha)

    # network widths
    mlp_hidden: int = 64
    enc_emb_dim: int = 32
    enc_hidden: int = 64
    dec_emb_dim: int = 32
    dec_hidden: int = 64

    # objective weights
    beta1: float = 0.2
    beta2: float = 0.35
    baseline_beta: float = 0.35
    anneal_start: float = 0.0   # 0 disables annealing of the z2 weight
    anneal_end: float = 0.0
    anneal_epochs: int = 0
    reg_weight: float = 1.0     # ablation switch for the basis regularizer
    s_rec_weight: float = 1.0   # ablation switch for the hinge term
    n_negatives: int = 10       # m

    # optimization
    batch_size: int = 32
    lr_encoder: float = 0.001
    lr_decoder: float = 1.0
    grad_clip: float = 5.0
    max_epochs: int = 12
    patience: int = 3
    aggressive_steps: int = 0
    dropout: float = 0.5
    seed: int = 0

    # data
    train_corpus: str = ""
    train_labels: str = ""
    dev_corpus: str = ""
    dev_labels: str = ""
    test_corpus: str = ""
    test_labels: str = ""
    embeddings: str = ""
    embedding_dim: int = 32
    vocab_max_size: int = 0     # 0 = unlimited
    vocab_min_count: int = 1

    # decoding / protocol knobs
    beam_size: int = 5
    max_decode_len: int = 30
    n_per_class: int = 10
    mixture_size: int = 10000
    mapper_points: int = 5000
    dbscan_eps: float = 0.1
    dbscan_min_samples: int = 3
    mapper_overlap: float = 0.25
    mapper_sweep: str = "5,10,20"
    eval_mode: str = "transfer"  # transfer | cluster
    cluster_k: int = 0           # 0 = number of classes
    generate_count: int = 10

    def kl_weight(self, epoch: int) -> float:
        """Weight on the z2 KL term at a given epoch (linear annealing)."""
        if self.anneal_epochs <= 0:
            return self.beta2
        if epoch < 0:
            raise UsageError("epoch must be >= 0")
        t = min(epoch / self.anneal_epochs, 1.0)
        return self.anneal_start + t * (self.anneal_end - self.anneal_start)

    def mapper_sweep_values(self) -> list[int]:
        return [int(x) for x in self.mapper_sweep.split(",") if x.strip()]

    def validate(self):
        if self.n_basis > self.z1_dim:
            raise UsageError("n_basis %d exceeds z1_dim %d" % (self.n_basis, self.z1_dim))
        if self.lr_encoder <= 0 or self.lr_decoder <= 0:
            raise UsageError("learning rates must be > 0")
        if self.patience < 1:
            raise UsageError("patience must be >= 1")
        if self.mode not in ("cpvae", "beta_vae_baseline"):
            raise UsageError("unknown mode %r" % self.mode)
        return self


# Per-dataset defaults. The three real-data profiles carry the published
# hyperparameters; toy is a desk-scale profile for tests and demos.
PROFILES: dict[str, dict] = {
    "yelp": dict(
        dataset="yelp", n_basis=3, alpha=100.0, z1_dim=16, z2_dim=64,
        mlp_hidden=1024, enc_emb_dim=256, enc_hidden=1024,
        dec_emb_dim=128, dec_hidden=1024, beta1=0.2, beta2=0.35,
        embedding_dim=300, batch_size=32, max_epochs=40,
    ),
    "amazon": dict(
        dataset="amazon", n_basis=3, alpha=100.0, z1_dim=16, z2_dim=64,
        mlp_hidden=1024, enc_emb_dim=256, enc_hidden=1024,
        dec_emb_dim=128, dec_hidden=1024, beta1=0.2, beta2=0.35,
        embedding_dim=300, batch_size=32, max_epochs=40,
    ),
    "agnews": dict(
        dataset="agnews", n_basis=10, alpha=10.0, z1_dim=32, z2_dim=96,
        mlp_hidden=1024, enc_emb_dim=512, enc_hidden=1024,
        dec_emb_dim=512, dec_hidden=1024, beta1=0.2,
        anneal_start=0.1, anneal_end=1.0, anneal_epochs=10,
        embedding_dim=300, batch_size=32, max_epochs=40,
    ),
    "toy": dict(
        dataset="toy", n_basis=3, alpha=2.0, z1_dim=8, z2_dim=16,
        mlp_hidden=64, enc_emb_dim=32, enc_hidden=64,
        dec_emb_dim=32, dec_hidden=64, beta1=0.1, beta2=0.35,
        anneal_start=0.05, anneal_end=0.35, anneal_epochs=6,
        embedding_dim=32, batch_size=32, max_epochs=10, patience=3,
        lr_encoder=0.002, mixture_size=2000, mapper_points=2000,
        aggressive_steps=2, max_decode_len=16, basis_init_scale=0.05,
        baseline_latent_dim=16,
    ),
}

_FIELDS = {f.name: f for f in fields(TrainConfig)}


def profile_config(name: str) -> TrainConfig:
    if name not in PROFILES:
        raise UsageError("unknown profile %r (have %s)"
                         % (name, ", ".join(sorted(PROFILES))))
    return replace(TrainConfig(), **PROFILES[name])


def _coerce(key: str, raw: str):
    ftype = _FIELDS[key].type
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
    except ValueError as e:
        raise ParseError("config key %s: %s" % (key, e)) from e
    return raw


def parse_config(path: str | Path | None, profile: str | None = None,
                 overrides: dict | None = None,
                 base: TrainConfig | None = None) -> TrainConfig:
    """Build a TrainConfig from profile defaults, then a key=value file,
    then explicit overrides (highest precedence). Unknown keys are errors
    that name the key. An empty or missing-path file yields pure defaults.
    A ``base`` config (e.g. one read back from a checkpoint) replaces the
    profile/default starting point.
    """
    if profile is not None and profile not in PROFILES:
        raise UsageError("unknown profile %r (have %s)"
                         % (profile, ", ".join(sorted(PROFILES))))
    if base is not None:
        cfg = replace(base, **(PROFILES[profile] if profile else {}))
    else:
        cfg = profile_config(profile) if profile else TrainConfig()
    updates: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("%s line %d: expected key=value, got %r"
                                 % (path, lineno, line))
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _FIELDS:
                raise ParseError("%s line %d: unknown config key %r"
                                 % (path, lineno, key))
            updates[key] = _coerce(key, raw.strip())
    for key, val in (overrides or {}).items():
        if key not in _FIELDS:
            raise ParseError("unknown config key %r" % key)
        updates[key] = val if not isinstance(val, str) else _coerce(key, val)
    return replace(cfg, **updates).validate()
