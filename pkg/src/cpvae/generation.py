"""Decoding and manipulation: beam search, basis identification from a few
labeled examples, style transfer through the structured code, baseline
latent-dimension surgery, and mid-sentence topic transitions.

All functions operate on frozen models; no gradient tape is ever recorded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from .autodiff import Tensor
from .errors import UsageError

BOS, EOS = data_mod.BOS, data_mod.EOS


@dataclass
class Hypothesis:
    ids: tuple
    logp: float
    state: object
    finished: bool = False

    def sort_key(self):
        # best first: higher log-prob, then shorter, then lexicographic ids
        return (-self.logp, len(self.ids), self.ids)


def _beam(step_fn, init_state, beam_size: int, max_len: int) -> Hypothesis:
    live = [Hypothesis((), 0.0, init_state)]
    finished: list[Hypothesis] = []
    for _ in range(max_len):
        candidates: list[Hypothesis] = []
        for hyp in live:
            prev = hyp.ids[-1] if hyp.ids else BOS
            logprobs, state = step_fn(prev, hyp.state)
            order = np.argsort(-logprobs, kind="stable")[:beam_size]
            for tok in order:
                tok = int(tok)
                score = hyp.logp + float(logprobs[tok])
                if tok == EOS:
                    finished.append(Hypothesis(hyp.ids, score, state, True))
                else:
                    candidates.append(Hypothesis(hyp.ids + (tok,), score, state))
        if not candidates:
            # every live hypothesis just ended in the end token
            live = []
            break
        candidates.sort(key=Hypothesis.sort_key)
        live = candidates[:beam_size]
    # hypotheses still alive after max_len steps count as finished where
    # they stand; consumed ones must not reappear with their old scores
    pool = finished + [Hypothesis(h.ids, h.logp, h.state, True) for h in live]
    return min(pool, key=Hypothesis.sort_key)


def beam_search(step_fn, init_state, beam_size: int, max_len: int) -> list[int]:
    """Highest-scoring sequence under ``step_fn``.

    ``step_fn(prev_token, state) -> (log-prob vector, new state)`` fully
    defines the model. A hypothesis finishes by emitting the end token
    (whose log-prob counts toward its score but which is not part of the
    output) or by reaching ``max_len`` emitted tokens. Scores are plain
    sums of token log-probs; ties break toward shorter, then
    lexicographically smaller sequences. Each hypothesis expands only its
    ``beam_size`` best continuations, which loses nothing relative to full
    expansion and makes beam_size=1 exactly greedy.

    Pruning alone cannot promise the winner beats the greedy sequence
    (the greedy prefix can be evicted by prefixes that later decay), so a
    greedy pass is scored alongside and the better of the two is returned.
    """
    if beam_size < 1:
        raise UsageError("beam_size must be >= 1")
    best = _beam(step_fn, init_state, beam_size, max_len)
    if beam_size > 1:
        greedy = _beam(step_fn, init_state, 1, max_len)
        best = min((best, greedy), key=Hypothesis.sort_key)
    return list(best.ids)


def model_step_fn(model, z: np.ndarray):
    """Adapt a frozen model to the beam interface for one latent row."""
    z = np.atleast_2d(z)
    h0, c0 = model.init_decoder_state(Tensor(z))
    init_state = (h0.values, c0.values)

    def step(prev_token: int, state):
        logp, new_state = model.decoder_step(np.array([prev_token]), state, z)
        return logp[0], new_state

    return step, init_state


def decode_latent(model, z1: np.ndarray, z2: np.ndarray, beam_size: int,
                  max_len: int) -> list[int]:
    """Beam-decode a sentence from a structured/unstructured code pair."""
    z = np.concatenate([np.atleast_2d(z1), np.atleast_2d(z2)], axis=1)
    step, init_state = model_step_fn(model, z)
    return beam_search(step, init_state, beam_size, max_len)


def greedy_decode(model, z: np.ndarray, max_len: int) -> list[int]:
    step, init_state = model_step_fn(model, z)
    return beam_search(step, init_state, 1, max_len)


# ---------------------------------------------------------------------------
# basis identification and transfer

@dataclass
class BasisAssignment:
    """Label -> basis index map; in the binary case v_p and v_n name the
    vertices claimed by the positive and negative class."""
    by_label: dict

    @property
    def v_p(self) -> int:
        return self.by_label[1]

    @property
    def v_n(self) -> int:
        return self.by_label[0]

    def to_json_dict(self) -> dict:
        out = {"assignment": {str(k): int(v) for k, v in self.by_label.items()}}
        if set(self.by_label) == {0, 1}:
            out["v_p"] = int(self.by_label[1])
            out["v_n"] = int(self.by_label[0])
        return out


def identify_basis(model, reps: np.ndarray, labels: np.ndarray,
                   n_per_class: int = 10,
                   rng: np.random.Generator | None = None) -> BasisAssignment:
    """Average the simplex weights of n sampled sentences per class and
    assign each class its argmax basis index. Classes are processed in
    ascending label order; on a collision the later class takes its highest
    index not already claimed (in the binary case the positive class falls
    back to its second-highest weight)."""
    labels = np.asarray(labels)
    classes = sorted(set(int(c) for c in labels))
    if len(classes) < 2:
        raise UsageError("need at least two classes to identify a basis")
    taken: dict[int, int] = {}
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if idx.size < n_per_class:
            raise UsageError("class %d has %d samples, need %d"
                             % (cls, idx.size, n_per_class))
        if rng is not None:
            pick = rng.choice(idx, size=n_per_class, replace=False)
        else:
            pick = idx[:n_per_class]
        avg = encode_p(model, reps[pick]).mean(axis=0)
        for cand in np.argsort(-avg, kind="stable"):
            if int(cand) not in taken.values():
                taken[cls] = int(cand)
                break
        else:
            raise UsageError("more classes than basis vectors")
    return BasisAssignment(taken)


def style_transfer(model, sentence_ids: list[int], target_basis: int,
                   beam_size: int = 5, max_len: int = 30) -> list[int]:
    """Decode with the structured code pinned to a basis vertex and the
    free code at the sentence's posterior mean."""
    k = model.basis.values.shape[1]
    if not 0 <= target_basis < k:
        raise UsageError("basis index %d out of range [0, %d)" % (target_basis, k))
    mu2, _ = model.encode_unstructured(np.array([sentence_ids]),
                                       np.array([len(sentence_ids)]))
    z1 = model.basis.values[:, target_basis][None, :]
    return decode_latent(model, z1, mu2.values, beam_size, max_len)


def encode_p(model, reps: np.ndarray) -> np.ndarray:
    h, _ = model.encode_structured(reps)
    p, _ = model.map_to_simplex(h)
    return p.values


def encode_mu1(model, reps: np.ndarray) -> np.ndarray:
    h, _ = model.encode_structured(reps)
    _, mu1 = model.map_to_simplex(h)
    return mu1.values


# ---------------------------------------------------------------------------
# baseline latent surgery

@dataclass
class CodeStats:
    """Per-dimension statistics of training codes used by manipulation."""
    mean: np.ndarray
    sigma: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def from_codes(cls, codes: np.ndarray) -> "CodeStats":
        return cls(mean=codes.mean(axis=0), sigma=codes.std(axis=0),
                   minimum=codes.min(axis=0), maximum=codes.max(axis=0))

    @classmethod
    def from_posterior(cls, mu: np.ndarray, logvar: np.ndarray,
                       rng: np.random.Generator) -> "CodeStats":
        """Statistics of the aggregated posterior, estimated from one latent
        sample per sentence. Posterior means alone understate the spread on
        dimensions the model keeps noisy, and their min/max hug the data
        clusters; sampling restores both."""
        return cls.from_codes(mu + np.exp(0.5 * logvar)
                              * rng.standard_normal(mu.shape))


def baseline_identify_dim(codes: np.ndarray, labels: np.ndarray,
                          train_mean: np.ndarray | None = None):
    """Best single dimension for a sign classifier on mean-centered codes.

    Returns (dim, accuracy, orientation); orientation +1 means positive
    centered values vote for the higher label."""
    labels = np.asarray(labels)
    if len(set(labels.tolist())) < 2:
        raise UsageError("labels contain a single class")
    center = codes.mean(axis=0) if train_mean is None else train_mean
    centered = codes - center
    target = (labels == labels.max()).astype(np.float64)
    best_acc, best_dim, best_orient = -1.0, -1, 0
    for d in range(codes.shape[1]):
        pred = (centered[:, d] > 0).astype(np.float64)
        acc = float(np.mean(pred == target))
        for acc_o, orient in ((acc, 1), (1.0 - acc, -1)):
            if acc_o > best_acc:
                best_acc, best_dim, best_orient = acc_o, d, orient
    return best_dim, best_acc, best_orient


STRATEGIES = ("sigma", "two-sigma", "extremum")


def baseline_manipulate(code: np.ndarray, dim: int, strategy: str,
                        stats: CodeStats, target_sign: int) -> np.ndarray:
    """Move one dimension of a copy of ``code`` toward the target class:
    sigma / two-sigma shift it by one or two standard deviations, extremum
    jumps to the training minimum or maximum. Every other entry is
    bitwise untouched."""
    if target_sign not in (1, -1):
        raise UsageError("target_sign must be +1 or -1")
    out = code.copy()
    if strategy == "sigma":
        out[dim] = out[dim] + target_sign * stats.sigma[dim]
    elif strategy == "two-sigma":
        out[dim] = out[dim] + 2.0 * target_sign * stats.sigma[dim]
    elif strategy == "extremum":
        out[dim] = stats.maximum[dim] if target_sign > 0 else stats.minimum[dim]
    else:
        raise UsageError("unknown strategy %r (have %s)"
                         % (strategy, ", ".join(STRATEGIES)))
    return out


# ---------------------------------------------------------------------------
# topic transition

def topic_transition_generate(model, basis_a: int, basis_b: int,
                              switch_step: int, z2: np.ndarray,
                              max_len: int) -> list[int]:
    """Greedy decode with the structured code starting at vertex a and
    switching to vertex b after ``switch_step`` emitted tokens; the
    recurrent state rides straight through the switch."""
    if not 0 < switch_step < max_len:
        raise UsageError("need 0 < switch_step < max_len")
    basis = model.basis.values
    k = basis.shape[1]
    if not (0 <= basis_a < k and 0 <= basis_b < k):
        raise UsageError("basis index out of range")
    z2 = np.atleast_2d(z2)

    def z_for(step: int) -> np.ndarray:
        vertex = basis_a if step < switch_step else basis_b
        z1 = basis[:, vertex][None, :]
        return np.concatenate([z1, z2], axis=1)

    h0, c0 = model.init_decoder_state(Tensor(z_for(0)))
    state = (h0.values, c0.values)
    out: list[int] = []
    prev = BOS
    for step in range(max_len):
        logp, state = model.decoder_step(np.array([prev]), state, z_for(step))
        nxt = int(np.argmax(logp[0]))
        if nxt == EOS:
            break
        out.append(nxt)
        prev = nxt
    return out
