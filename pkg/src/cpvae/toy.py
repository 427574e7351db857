"""Desk-scale sentiment corpus for tests and demos.

Sentences come from templates whose only polarity-bearing slot is an
adjective or verb; each draw emits a positive and a negative twin sharing
the same skeleton and nouns, so content is identically distributed across
labels and transfers can preserve most n-grams. The companion embedding
file plants a sentiment direction so mean-pooled sentence representations
are linearly separable by label.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

NOUNS = [
    "food", "pizza", "burger", "coffee", "service", "staff", "place",
    "room", "salad", "dessert", "soup", "bread", "steak", "pasta",
    "waiter", "menu", "bar", "patio", "brunch", "chicken",
]

POS_ADJ = ["great", "amazing", "delicious", "friendly", "wonderful",
           "fantastic", "excellent", "lovely", "perfect", "tasty"]
NEG_ADJ = ["terrible", "awful", "bland", "rude", "horrible",
           "disgusting", "stale", "dirty", "dreadful", "soggy"]
POS_VERB = ["loved", "enjoyed", "adored"]
NEG_VERB = ["hated", "regretted", "despised"]

# slots: N and M draw nouns, A draws an adjective, V draws a verb
TEMPLATES = [
    "the N at this place was A",
    "i thought the N was really A",
    "my friends all said the N was A",
    "honestly the N was A every single time",
    "the N and the M were both A",
    "overall the N here seemed A to everyone",
    "we V the N at this place",
    "the N was A for the price we paid",
    "everyone agreed that the N was A",
    "the N they brought out was simply A",
]

# drawn with small probability so sentence length and shape have real
# outliers instead of a tight band
RARE_TEMPLATES = [
    "A N",
    "to be honest i have to say the N and also the M and everything "
    "else we tried that day was A and we V it all",
]


def _fill(template: str, label: int, rng: np.random.Generator) -> list[str]:
    out = []
    noun = str(rng.choice(NOUNS))
    for slot in template.split():
        if slot == "N":
            out.append(noun)
        elif slot == "M":
            other = str(rng.choice([n for n in NOUNS if n != noun]))
            out.append(other)
        elif slot == "A":
            pool = POS_ADJ if label == 1 else NEG_ADJ
            out.append(str(rng.choice(pool)))
        elif slot == "V":
            pool = POS_VERB if label == 1 else NEG_VERB
            out.append(str(rng.choice(pool)))
        else:
            out.append(slot)
    return out


def make_sentences(n: int, rng: np.random.Generator,
                   rare_frac: float = 0.02) -> tuple[list[list[str]], list[int]]:
    """n sentences in positive/negative twin pairs (n rounded up to even)."""
    sentences, labels = [], []
    for _ in range((n + 1) // 2):
        if rng.random() < rare_frac:
            t = RARE_TEMPLATES[int(rng.integers(len(RARE_TEMPLATES)))]
        else:
            t = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        # twins share the skeleton state: refill with the same sub-rng
        state = rng.integers(2 ** 32)
        sentences.append(_fill(t, 1, np.random.default_rng(state)))
        labels.append(1)
        sentences.append(_fill(t, 0, np.random.default_rng(state)))
        labels.append(0)
    return sentences[:n], labels[:n]


def all_tokens() -> list[str]:
    seen = {}
    for t in TEMPLATES + RARE_TEMPLATES:
        for tok in t.split():
            if tok not in ("N", "M", "A", "V"):
                seen[tok] = True
    for pool in (NOUNS, POS_ADJ, NEG_ADJ, POS_VERB, NEG_VERB):
        for tok in pool:
            seen[tok] = True
    return sorted(seen)


def write_embeddings(path: Path, dim: int, rng: np.random.Generator,
                     polarity_scale: float = 3.0):
    """Random vectors with a planted unit direction added (positive words)
    or subtracted (negative words). The base scale keeps non-polar
    variation well below the polarity separation in mean-pooled space,
    so sentiment is the dominant factor of the representations."""
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    with path.open("w", encoding="utf-8") as fh:
        for tok in all_tokens():
            vec = rng.normal(0.0, 0.12, size=dim)
            if tok in POS_ADJ or tok in POS_VERB:
                vec = vec + polarity_scale * direction
            elif tok in NEG_ADJ or tok in NEG_VERB:
                vec = vec - polarity_scale * direction
            fh.write(tok + " " + " ".join("%.6f" % x for x in vec) + "\n")


def build_toy_dataset(out_dir: str | Path, n_train: int = 2000, n_dev: int = 300,
                      n_test: int = 300, seed: int = 0, emb_dim: int = 32) -> dict:
    """Write train/dev/test corpora with labels plus the embedding file;
    returns the path of every artifact."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {}
    for split, n in (("train", n_train), ("dev", n_dev), ("test", n_test)):
        sentences, labels = make_sentences(n, rng)
        corpus_path = out / f"{split}.txt"
        labels_path = out / f"{split}.labels"
        corpus_path.write_text(
            "".join(" ".join(s) + "\n" for s in sentences), encoding="utf-8")
        labels_path.write_text("".join("%d\n" % l for l in labels), encoding="utf-8")
        paths[split] = corpus_path
        paths[split + "_labels"] = labels_path
    emb_path = out / "embeddings.txt"
    write_embeddings(emb_path, emb_dim, rng)
    paths["embeddings"] = emb_path

    cfg_path = out / "toy.cfg"
    cfg_path.write_text(
        "".join("%s=%s\n" % kv for kv in [
            ("train_corpus", out / "train.txt"),
            ("train_labels", out / "train.labels"),
            ("dev_corpus", out / "dev.txt"),
            ("dev_labels", out / "dev.labels"),
            ("test_corpus", out / "test.txt"),
            ("test_labels", out / "test.labels"),
            ("embeddings", emb_path),
            ("embedding_dim", emb_dim),
        ]), encoding="utf-8")
    paths["config"] = cfg_path
    return paths


def main(argv=None):
    parser = argparse.ArgumentParser(description="generate the toy sentiment dataset")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--train", type=int, default=2000)
    parser.add_argument("--dev", type=int, default=300)
    parser.add_argument("--test", type=int, default=300)
    parser.add_argument("--dim", type=int, default=32)
    args = parser.parse_args(argv)
    paths = build_toy_dataset(args.out_dir, args.train, args.dev, args.test,
                              args.seed, args.dim)
    for k, v in paths.items():
        print(k, v)


if __name__ == "__main__":
    main()
