"""Automatic metrics: corpus BLEU, a small convolutional sentence
classifier for transfer accuracy, purity-style clustering scores, and a
k-means baseline for the unsupervised clustering comparison.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import autodiff as ad
from .autodiff import Tensor
from .errors import UsageError


# ---------------------------------------------------------------------------
# bleu

def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(candidates, references) -> float:
    """Corpus-level BLEU-4, uniform weights, standard brevity penalty, no
    smoothing. Orders with no candidate n-grams anywhere in the corpus are
    skipped rather than scored zero, so very short corpora still compare
    equal to themselves; any present-but-unmatched order zeroes the score.
    """
    if len(candidates) == 0:
        raise UsageError("bleu needs at least one candidate")
    if len(candidates) != len(references):
        raise UsageError("candidates and references must align")
    clipped = [0] * 4
    totals = [0] * 4
    c_len = 0
    r_len = 0
    for cand, ref in zip(candidates, references):
        cand = list(cand)
        ref = list(ref)
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, 5):
            counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            totals[n - 1] += sum(counts.values())
            clipped[n - 1] += sum(min(c, ref_counts[g])
                                  for g, c in counts.items())
    if c_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(4):
        if totals[n] == 0:
            continue
        if clipped[n] == 0:
            return 0.0
        log_sum += 0.25 * np.log(clipped[n] / totals[n])
    bp = 1.0 if c_len >= r_len else float(np.exp(1.0 - r_len / c_len))
    return float(100.0 * bp * np.exp(log_sum))


def sentence_bleu_smoothed(candidate, reference) -> float:
    """Sentence-level BLEU-4 with add-one smoothing on orders above 1, for
    inspecting individual transfers without corpus pooling."""
    candidate = list(candidate)
    reference = list(reference)
    if len(candidate) == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        counts = _ngrams(candidate, n)
        ref_counts = _ngrams(reference, n)
        total = sum(counts.values())
        hit = sum(min(c, ref_counts[g]) for g, c in counts.items())
        if n == 1:
            if hit == 0:
                return 0.0
            log_sum += 0.25 * np.log(hit / total)
        else:
            log_sum += 0.25 * np.log((hit + 1.0) / (total + 1.0))
    bp = 1.0 if len(candidate) >= len(reference) else \
        float(np.exp(1.0 - len(reference) / len(candidate)))
    return float(100.0 * bp * np.exp(log_sum))


# ---------------------------------------------------------------------------
# convolutional sentence classifier

def _pad_ids(sentences, min_len: int, pad: int = 0) -> np.ndarray:
    width = max(min_len, max((len(s) for s in sentences), default=min_len))
    out = np.full((len(sentences), width), pad, dtype=np.int64)
    for i, s in enumerate(sentences):
        out[i, :len(s)] = s
    return out


class CnnClassifier:
    """Token embeddings, parallel convolutions of widths 3/4/5 with max
    pooling over time, and a linear head. Trained with Adam on its own;
    inference is deterministic."""

    def __init__(self, vocab_size: int, n_classes: int, emb_dim: int = 32,
                 n_filters: int = 16, widths=(3, 4, 5),
                 rng: np.random.Generator | None = None):
        if n_classes < 2:
            raise UsageError("classifier needs at least two classes")
        rng = rng or np.random.default_rng(0)
        self.widths = tuple(widths)
        self.n_classes = n_classes
        self.embed = Tensor(rng.normal(0.0, 0.1, (vocab_size, emb_dim)),
                            requires_grad=True)
        self.filters = []
        for w in self.widths:
            bound = 1.0 / np.sqrt(w * emb_dim)
            self.filters.append((
                Tensor(rng.uniform(-bound, bound, (w * emb_dim, n_filters)),
                       requires_grad=True),
                Tensor(np.zeros(n_filters), requires_grad=True)))
        bound = 1.0 / np.sqrt(len(self.widths) * n_filters)
        self.w_head = Tensor(rng.uniform(-bound, bound,
                                         (len(self.widths) * n_filters,
                                          n_classes)), requires_grad=True)
        self.b_head = Tensor(np.zeros(n_classes), requires_grad=True)
        self.labels_: list | None = None

    def parameters(self) -> list:
        out = [self.embed, self.w_head, self.b_head]
        for w, b in self.filters:
            out.extend([w, b])
        return out

    def logits(self, ids: np.ndarray) -> Tensor:
        b, t = ids.shape
        emb_dim = self.embed.values.shape[1]
        pooled = []
        for (w_f, b_f), w in zip(self.filters, self.widths):
            n_win = t - w + 1
            windows = np.stack([ids[:, i:i + w] for i in range(n_win)], axis=1)
            emb = ad.embedding(self.embed, windows.reshape(-1, w))
            flat = ad.reshape(emb, (b * n_win, w * emb_dim))
            act = ad.relu(ad.matmul(flat, w_f) + b_f)
            act = ad.reshape(act, (b, n_win, act.values.shape[1]))
            pooled.append(ad.max_(act, axis=1))
        feats = ad.concat(pooled, axis=1)
        return ad.matmul(feats, self.w_head) + self.b_head

    def fit(self, sentences, labels, epochs: int = 8, batch_size: int = 32,
            lr: float = 1e-3, holdout: float = 0.1,
            rng: np.random.Generator | None = None) -> float:
        """Train on a shuffled split, return held-out accuracy."""
        labels = np.asarray(labels)
        classes = sorted(set(int(v) for v in labels))
        if len(classes) < 2:
            raise UsageError("training labels contain a single class")
        self.labels_ = classes
        to_idx = {c: i for i, c in enumerate(classes)}
        y = np.array([to_idx[int(v)] for v in labels])
        ids = _pad_ids(sentences, min_len=max(self.widths))
        rng = rng or np.random.default_rng(0)
        order = rng.permutation(len(ids))
        n_held = max(1, int(len(ids) * holdout))
        held, train = order[:n_held], order[n_held:]
        if len(set(y[train].tolist())) < 2:
            raise UsageError("training split lost a class; need more data")
        opt = ad.Adam(self.parameters(), lr=lr)
        for _ in range(epochs):
            perm = train[rng.permutation(len(train))]
            for lo in range(0, len(perm), batch_size):
                idx = perm[lo:lo + batch_size]
                opt.zero_grad()
                with ad.Tape() as tape:
                    out = self.logits(ids[idx])
                    loss = ad.cross_entropy_logits(out, y[idx])
                tape.backward(loss)
                opt.step()
        pred = self._predict_indices(ids[held])
        return float(np.mean(pred == y[held]) * 100.0)

    def _predict_indices(self, ids: np.ndarray) -> np.ndarray:
        out = self.logits(ids)
        return np.argmax(out.values, axis=1)

    def classify(self, sentences) -> np.ndarray:
        if self.labels_ is None:
            raise UsageError("classifier is not trained")
        ids = _pad_ids(sentences, min_len=max(self.widths))
        idx = self._predict_indices(ids)
        return np.array([self.labels_[i] for i in idx])


def transfer_accuracy(classifier, sentences, target_labels) -> float:
    """Percent of sentences the classifier reads as their target label."""
    pred = classifier.classify(sentences)
    target = np.asarray(target_labels)
    if len(pred) != len(target):
        raise UsageError("sentences and target labels must align")
    return float(np.mean(pred == target) * 100.0)


# ---------------------------------------------------------------------------
# clustering metrics

@dataclass
class ClusterEval:
    mapping: dict                 # cluster id -> gold topic
    per_topic: dict               # topic -> (precision, recall, f1)
    macro_f1: float = field(default=0.0)

    def to_json_dict(self) -> dict:
        return {
            "mapping": {str(k): int(v) for k, v in self.mapping.items()},
            "per_topic": {str(t): {"precision": p, "recall": r, "f1": f}
                          for t, (p, r, f) in self.per_topic.items()},
            "macro_f1": self.macro_f1,
        }


def cluster_metrics(assignments, gold, method: str = "majority") -> ClusterEval:
    assignments = np.asarray(assignments)
    gold = np.asarray(gold)
    if assignments.shape != gold.shape:
        raise UsageError("assignments and gold labels must align")
    clusters = sorted(set(int(c) for c in assignments))
    topics = sorted(set(int(t) for t in gold))
    counts = {c: Counter(int(g) for g in gold[assignments == c])
              for c in clusters}
    if method == "majority":
        mapping = {c: min(counts[c].items(), key=lambda kv: (-kv[1], kv[0]))[0]
                   for c in clusters}
    elif method == "hungarian":
        # one-to-one on the overlap matrix; spare clusters fall back to
        # their majority topic
        mat = np.zeros((len(clusters), len(topics)))
        for i, c in enumerate(clusters):
            for j, t in enumerate(topics):
                mat[i, j] = counts[c][t]
        rows, cols = linear_sum_assignment(-mat)
        mapping = {clusters[i]: topics[j] for i, j in zip(rows, cols)}
        for c in clusters:
            if c not in mapping:
                mapping[c] = min(counts[c].items(),
                                 key=lambda kv: (-kv[1], kv[0]))[0]
    else:
        raise UsageError("unknown mapping method %r" % (method,))
    per_topic = {}
    f1s = []
    for t in topics:
        member_clusters = [c for c in clusters if mapping[c] == t]
        assigned = np.isin(assignments, member_clusters)
        n_assigned = int(assigned.sum())
        correct = int(np.sum(assigned & (gold == t)))
        n_gold = int(np.sum(gold == t))
        p = correct / n_assigned if n_assigned else 0.0
        r = correct / n_gold
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        per_topic[t] = (p, r, f)
        f1s.append(f)
    return ClusterEval(mapping, per_topic, macro_f1=float(np.mean(f1s)))


# ---------------------------------------------------------------------------
# k-means

def _plusplus_init(points: np.ndarray, k: int,
                   rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = [points[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min([np.sum((points - c) ** 2, axis=1) for c in centroids],
                    axis=0)
        total = d2.sum()
        if total <= 0.0:
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centroids.append(points[pick])
    return np.array(centroids)


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int = 300, tol: float = 1e-6,
           init: np.ndarray | None = None):
    """Lloyd iterations from k-means++ seeds. Returns (labels, centroids,
    per-iteration objective values); the objective is the within-cluster
    sum of squared distances measured right after each assignment."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = len(points)
    if k < 1:
        raise UsageError("k must be >= 1")
    if k > n:
        raise UsageError("k=%d exceeds the %d points" % (k, n))
    if not np.all(np.isfinite(points)):
        raise UsageError("points must be finite")
    centroids = _plusplus_init(points, k, rng) if init is None \
        else np.array(init, dtype=np.float64)
    history = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.stack([np.sum((points - c) ** 2, axis=1) for c in centroids],
                      axis=1)
        labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), labels].sum()))
        new_centroids = centroids.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
            else:
                # revive an empty cluster at the worst-served point
                worst = int(np.argmax(d2[np.arange(n), labels]))
                new_centroids[j] = points[worst]
        move = np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1)).max()
        centroids = new_centroids
        if move < tol:
            break
    d2 = np.stack([np.sum((points - c) ** 2, axis=1) for c in centroids],
                  axis=1)
    labels = np.argmin(d2, axis=1)
    history.append(float(d2[np.arange(n), labels].sum()))
    return labels, centroids, history


# ---------------------------------------------------------------------------
# report plumbing

@dataclass
class MetricReport:
    accuracy: float
    bleu: float
    per_class: dict
    fingerprint: str

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 100.0:
            raise UsageError("accuracy must lie in [0, 100]")
        if not 0.0 <= self.bleu <= 100.0:
            raise UsageError("bleu must lie in [0, 100]")

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "bleu": self.bleu,
            "per_class": {str(k): v for k, v in self.per_class.items()},
            "fingerprint": self.fingerprint,
        }

    def csv_row(self) -> str:
        return "ac,bl\n%.4f,%.4f\n" % (self.accuracy, self.bleu)
