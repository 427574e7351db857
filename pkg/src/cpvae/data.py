"""Corpus loading, vocabulary construction, pretrained word vectors, and
padded batch assembly for the sequence models."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError, ParseError, UsageError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<s>", "</s>", "<unk>")


class Vocabulary:
    """Token/id mapping with four reserved ids: <pad>=0 <s>=1 </s>=2 <unk>=3.

    Tokens are ranked by (count desc, token asc) so construction is
    deterministic regardless of input order. ``max_size``, when given,
    counts the reserved entries too.
    """

    def __init__(self, counts: Counter, max_size: int | None = None,
                 min_count: int = 1):
        if max_size is not None and max_size < len(RESERVED):
            raise UsageError("max_size %d cannot hold the %d reserved tokens"
                             % (max_size, len(RESERVED)))
        self.itos: list[str] = list(RESERVED)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        budget = None if max_size is None else max_size - len(RESERVED)
        for token, count in ranked:
            if token in RESERVED or count < min_count:
                continue
            if budget is not None and len(self.itos) - len(RESERVED) >= budget:
                break
            self.itos.append(token)
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def sha256(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for tok in self.itos:
            h.update(tok.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


@dataclass
class Corpus:
    sentences: list[list[str]]  # tokenized, no sentinels
    labels: list[int] | None = None

    def __len__(self):
        return len(self.sentences)


def tokenize(line: str) -> list[str]:
    return line.strip().split()


def load_corpus(path: str | Path, labels_path: str | Path | None = None) -> Corpus:
    """Read one whitespace-tokenized sentence per line; optional label file
    has one integer per line, aligned by index."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IngestionError("cannot read corpus %s: %s" % (path, e)) from e
    sentences = [tokenize(ln) for ln in raw.splitlines() if ln.strip()]
    if not sentences:
        raise IngestionError("corpus %s has no non-blank lines" % path)
    labels = None
    if labels_path is not None:
        lab_raw = Path(labels_path).read_text(encoding="utf-8")
        try:
            labels = [int(ln.strip()) for ln in lab_raw.splitlines() if ln.strip()]
        except ValueError as e:
            raise ParseError("labels file %s: %s" % (labels_path, e)) from e
        if len(labels) != len(sentences):
            raise IngestionError(
                "labels count %d does not match sentence count %d"
                % (len(labels), len(sentences)))
    return Corpus(sentences, labels)


def build_vocabulary(corpus: Corpus, max_size: int | None = None,
                     min_count: int = 1) -> Vocabulary:
    counts = Counter(tok for sent in corpus.sentences for tok in sent)
    return Vocabulary(counts, max_size=max_size, min_count=min_count)


def load_embeddings(path: str | Path, vocab: Vocabulary, dim: int,
                    seed: int = 0) -> np.ndarray:
    """Load whitespace text vectors ("token v1 .. vd" per line) for every
    vocab entry. Out-of-file tokens get N(0, 0.01^2) rows from a seeded
    generator; <pad> stays all-zero. Returns (len(vocab), dim) float64.
    """
    path = Path(path)
    table: dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ParseError(
                    "%s line %d: expected %d fields, got %d"
                    % (path, lineno, dim + 1, len(parts)))
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as e:
                raise ParseError("%s line %d: %s" % (path, lineno, e)) from e
            table[parts[0]] = vec
    rng = np.random.default_rng(seed)
    out = np.zeros((len(vocab), dim), dtype=np.float64)
    for i, tok in enumerate(vocab.itos):
        if i == PAD:
            continue
        if tok in table:
            out[i] = table[tok]
        else:
            out[i] = rng.normal(0.0, 0.01, size=dim)
    return out


def sentence_representation(ids: list[int], embeddings: np.ndarray) -> np.ndarray:
    """Mean of embedding rows over content ids. Reserved ids other than
    <unk> are dropped first; a sentence with nothing left is an error."""
    content = [i for i in ids if i == UNK or i >= len(RESERVED)]
    if not content:
        raise UsageError("sentence has no content tokens after filtering")
    return embeddings[content].mean(axis=0)


@dataclass
class Batch:
    enc_ids: np.ndarray      # (B, T) padded content ids, no sentinels
    lengths: np.ndarray      # (B,) true content lengths
    dec_in: np.ndarray       # (B, T+1) <s> + ids, padded
    dec_target: np.ndarray   # (B, T+1) ids + </s>, padded
    target_mask: np.ndarray  # (B, T+1) 1.0 where dec_target is real
    indices: np.ndarray      # (B,) positions into the source corpus


def make_batch(encoded: list[list[int]], indices: list[int]) -> Batch:
    b = len(encoded)
    if b == 0:
        raise UsageError("cannot build an empty batch")
    lengths = np.array([len(s) for s in encoded], dtype=np.int64)
    if np.any(lengths == 0):
        raise UsageError("batch contains an empty sentence")
    t = int(lengths.max())
    enc_ids = np.full((b, t), PAD, dtype=np.int64)
    dec_in = np.full((b, t + 1), PAD, dtype=np.int64)
    dec_target = np.full((b, t + 1), PAD, dtype=np.int64)
    mask = np.zeros((b, t + 1), dtype=np.float64)
    for r, ids in enumerate(encoded):
        n = len(ids)
        enc_ids[r, :n] = ids
        dec_in[r, 0] = BOS
        dec_in[r, 1:n + 1] = ids
        dec_target[r, :n] = ids
        dec_target[r, n] = EOS
        mask[r, :n + 1] = 1.0
    return Batch(enc_ids, lengths, dec_in, dec_target, mask,
                 np.asarray(indices, dtype=np.int64))


def batch_iterator(corpus: Corpus, vocab: Vocabulary, batch_size: int,
                   rng: np.random.Generator | None = None):
    """Yield Batches covering the corpus once; shuffled when rng is given."""
    if batch_size < 1:
        raise UsageError("batch_size must be >= 1")
    order = np.arange(len(corpus))
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        encoded = [vocab.encode(corpus.sentences[i]) for i in chunk]
        yield make_batch(encoded, list(chunk))
