"""Instruments for probing where latent codes actually live: a mixture
model of the aggregated posterior with NLL scoring, manipulation shift
reports, density clustering, the mapper construction, connectedness
counting, and simplex coverage export.

Everything here is a pure function over numpy arrays; heavy NLL scoring
can fan out over threads (numpy releases the GIL in the kernels).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# aggregated posterior as a big uniform-weight gaussian mixture

@dataclass
class GaussianMixture:
    """Uniform-weight diagonal-covariance mixture; one row per component."""
    means: np.ndarray      # (M, d)
    variances: np.ndarray  # (M, d)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if self.means.shape != self.variances.shape:
            raise UsageError("mixture means and variances must align")
        if not np.all(self.variances > 0.0):
            raise UsageError("mixture variances must be positive")

    @property
    def size(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def posterior_params(model, reps: np.ndarray | None, ids: np.ndarray,
                     lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (mean, log-variance) of the code the diagnostics watch:
    the structured code when the model has one, the whole code otherwise."""
    if hasattr(model, "map_to_simplex"):
        h, logvar1 = model.encode_structured(reps)
        _, mu1 = model.map_to_simplex(h)
        return mu1.values, logvar1.values
    mu, logvar = model.encode(ids, lengths)
    return mu.values, logvar.values


def fit_aggregated_posterior(model, reps: np.ndarray | None, ids: np.ndarray,
                             lengths: np.ndarray, m: int,
                             rng: np.random.Generator) -> GaussianMixture:
    """Mixture with one gaussian per subsampled training sentence, centered
    at that sentence's posterior."""
    n = len(lengths)
    if m < 1:
        raise UsageError("mixture size must be >= 1")
    if m > n:
        raise UsageError("mixture size %d exceeds corpus size %d" % (m, n))
    pick = np.sort(rng.choice(n, size=m, replace=False))
    mu, logvar = posterior_params(model,
                                  None if reps is None else reps[pick],
                                  ids[pick], lengths[pick])
    return GaussianMixture(mu, np.exp(logvar))


def _log_densities(mix: GaussianMixture, codes: np.ndarray) -> np.ndarray:
    # (n, M) log N(code_i; mu_j, diag var_j), then log-mean-exp over j
    diff = codes[:, None, :] - mix.means[None, :, :]
    quad = np.sum(diff * diff / mix.variances[None, :, :], axis=2)
    logdet = np.sum(np.log(mix.variances), axis=1)
    logcomp = -0.5 * (quad + logdet[None, :] + mix.dim * LOG_2PI)
    peak = logcomp.max(axis=1)
    lse = peak + np.log(np.sum(np.exp(logcomp - peak[:, None]), axis=1))
    return lse - np.log(mix.size)


def mixture_nll(mix: GaussianMixture, code: np.ndarray) -> float:
    """Negative log density of one code under the mixture, computed in log
    space so even million-component mixtures cannot underflow."""
    code = np.asarray(code, dtype=np.float64)
    if code.ndim != 1 or code.shape[0] != mix.dim:
        raise UsageError("code dim %s does not match mixture dim %d"
                         % (code.shape, mix.dim))
    return float(-_log_densities(mix, code[None, :])[0])


def mixture_nll_many(mix: GaussianMixture, codes: np.ndarray,
                     n_threads: int = 1, chunk: int = 256) -> np.ndarray:
    """NLL per code row; chunked, optionally scored on a thread pool.
    Results are identical for any thread count."""
    codes = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    if codes.shape[1] != mix.dim:
        raise UsageError("code dim %d does not match mixture dim %d"
                         % (codes.shape[1], mix.dim))
    pieces = [codes[i:i + chunk] for i in range(0, len(codes), chunk)]
    if n_threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            outs = list(pool.map(lambda c: _log_densities(mix, c), pieces))
    else:
        outs = [_log_densities(mix, c) for c in pieces]
    return -np.concatenate(outs) if outs else np.zeros(0)


@dataclass
class NllShiftReport:
    nll_before: np.ndarray
    nll_after: np.ndarray
    bin_edges: np.ndarray
    counts_before: np.ndarray
    counts_after: np.ndarray
    median_before: float
    median_after: float
    median_shift: float
    mean_shift: float

    def to_json_dict(self) -> dict:
        return {
            "n": int(len(self.nll_before)),
            "median_before": self.median_before,
            "median_after": self.median_after,
            "median_shift": self.median_shift,
            "mean_shift": self.mean_shift,
        }

    def histogram_csv(self) -> str:
        lines = ["bin_left,bin_right,count_before,count_after"]
        for i in range(len(self.counts_before)):
            lines.append("%.10e,%.10e,%d,%d" % (
                self.bin_edges[i], self.bin_edges[i + 1],
                self.counts_before[i], self.counts_after[i]))
        return "\n".join(lines) + "\n"


def nll_shift_report(mix: GaussianMixture, codes_before: np.ndarray,
                     codes_after: np.ndarray, n_bins: int = 30,
                     n_threads: int = 1) -> NllShiftReport:
    """Paired NLLs under the mixture before and after a manipulation, with
    a shared-range histogram. The shift is the median of per-sample
    differences."""
    codes_before = np.atleast_2d(codes_before)
    codes_after = np.atleast_2d(codes_after)
    if codes_before.shape != codes_after.shape:
        raise UsageError("before/after code arrays must align")
    before = mixture_nll_many(mix, codes_before, n_threads)
    after = mixture_nll_many(mix, codes_after, n_threads)
    lo = float(min(before.min(), after.min()))
    hi = float(max(before.max(), after.max()))
    if hi <= lo:
        hi = lo + 1.0
    counts_b, edges = np.histogram(before, bins=n_bins, range=(lo, hi))
    counts_a, _ = np.histogram(after, bins=n_bins, range=(lo, hi))
    return NllShiftReport(
        nll_before=before, nll_after=after, bin_edges=edges,
        counts_before=counts_b, counts_after=counts_a,
        median_before=float(np.median(before)),
        median_after=float(np.median(after)),
        median_shift=float(np.median(after - before)),
        mean_shift=float(np.mean(after - before)))


# ---------------------------------------------------------------------------
# density clustering
#
# core points have >= min_samples neighbors within eps (self included);
# cores within eps of each other share a cluster; a non-core point joins
# the cluster of its nearest core neighbor (ties fall to the core with
# lexicographically smaller coordinates, which keeps the labeling
# invariant to point order) or becomes noise at label -1.

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _pairwise_sq(points: np.ndarray, targets: np.ndarray | None = None,
                 chunk: int = 1024):
    # accumulate squared distances one coordinate at a time: same rounding
    # as an elementwise route, without rank-3 temporaries
    if targets is None:
        targets = points
    for i in range(0, len(points), chunk):
        rows = points[i:i + chunk]
        block = np.zeros((rows.shape[0], targets.shape[0]))
        for d in range(points.shape[1]):
            diff = rows[:, d][:, None] - targets[:, d][None, :]
            block += diff * diff
        yield i, block


def dbscan(points: np.ndarray, eps: float = 0.1,
           min_samples: int = 3) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if eps <= 0 or min_samples < 1:
        raise UsageError("need eps > 0 and min_samples >= 1")
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    eps_sq = eps * eps
    counts = np.zeros(n, dtype=np.int64)
    for i, dist_sq in _pairwise_sq(points):
        counts[i:i + dist_sq.shape[0]] = np.sum(dist_sq <= eps_sq, axis=1)
    core = counts >= min_samples
    core_idx = np.flatnonzero(core)
    labels = np.full(n, -1, dtype=np.int64)
    if core_idx.size == 0:
        return labels
    # order cores by coordinates so argmin tie-breaks cannot depend on the
    # order the points arrived in
    lex = np.lexsort(points[core_idx].T[::-1])
    core_sorted = core_idx[lex]
    core_pts = points[core_sorted]
    pos_in_sorted = np.full(n, -1, dtype=np.int64)
    pos_in_sorted[core_sorted] = np.arange(core_sorted.size)
    uf = _UnionFind(core_sorted.size)
    nearest = np.full(n, -1, dtype=np.int64)  # position in core_sorted
    for i, block in _pairwise_sq(points, core_pts):
        near = block <= eps_sq
        rows = np.flatnonzero(near.any(axis=1))
        masked = np.where(near, block, np.inf)
        nearest[i + rows] = np.argmin(masked[rows], axis=1)
        sub = np.flatnonzero(core[i:i + block.shape[0]])
        for r, c in np.argwhere(near[sub]):
            a = int(pos_in_sorted[i + sub[int(r)]])
            if a < int(c):
                uf.union(a, int(c))
    roots = np.array([uf.find(k) for k in range(core_sorted.size)])
    reached = nearest >= 0
    labels[reached] = roots[nearest[reached]]
    labels[core_sorted] = roots  # a core always belongs to its own cluster
    # renumber clusters by first appearance
    remap: dict[int, int] = {}
    for p in range(n):
        if labels[p] >= 0:
            if labels[p] not in remap:
                remap[labels[p]] = len(remap)
            labels[p] = remap[labels[p]]
    return labels


# ---------------------------------------------------------------------------
# mapper

@dataclass
class MapperNode:
    interval: int
    cluster: int
    members: tuple


@dataclass
class MapperGraph:
    nodes: list
    edges: list
    params: dict

    def to_json_dict(self) -> dict:
        return {
            "params": self.params,
            "nodes": [{"id": i, "interval": n.interval, "cluster": n.cluster,
                       "size": len(n.members),
                       "members": [int(m) for m in n.members]}
                      for i, n in enumerate(self.nodes)],
            "edges": [[int(a), int(b)] for a, b in self.edges],
        }


def mapper(points: np.ndarray, n_intervals: int, overlap: float,
           eps: float = 0.1, min_samples: int = 3) -> MapperGraph:
    """Cover the lens f(z)=sum_j z_j with overlapping intervals, cluster
    each pre-image, link clusters that share points.

    With n intervals of length L overlapping by a fraction g of L the
    cover spans the lens range when L = range / (1 + (n-1)(1-g)); the
    intervals are taken closed so the extreme points belong somewhere.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(points) == 0:
        raise UsageError("mapper needs at least one point")
    if n_intervals < 1 or not 0.0 <= overlap < 1.0:
        raise UsageError("need n_intervals >= 1 and 0 <= overlap < 1")
    lens = points.sum(axis=1)
    lo, hi = float(lens.min()), float(lens.max())
    span = hi - lo
    if span == 0.0:
        span = 1e-12
    length = span / (1.0 + (n_intervals - 1) * (1.0 - overlap))
    stride = length * (1.0 - overlap)
    nodes: list[MapperNode] = []
    for i in range(n_intervals):
        start = lo + i * stride
        inside = np.flatnonzero((lens >= start) & (lens <= start + length))
        if inside.size == 0:
            continue
        labels = dbscan(points[inside], eps, min_samples)
        for cluster in range(labels.max() + 1):
            members = tuple(int(g) for g in inside[labels == cluster])
            nodes.append(MapperNode(i, cluster, members))
    edges = []
    sets = [set(n.members) for n in nodes]
    for a in range(len(nodes)):
        for b in range(a + 1, len(nodes)):
            if sets[a] & sets[b]:
                edges.append((a, b))
    return MapperGraph(nodes, edges, {
        "n_intervals": n_intervals, "overlap": overlap,
        "eps": eps, "min_samples": min_samples})


def mapper_sweep(points: np.ndarray, interval_counts, overlap: float,
                 eps: float = 0.1, min_samples: int = 3) -> dict:
    return {int(n): mapper(points, int(n), overlap, eps, min_samples)
            for n in interval_counts}


def connected_components(graph: MapperGraph) -> tuple[int, list]:
    """Component count and per-node component ids, numbered by first node."""
    n = len(graph.nodes)
    uf = _UnionFind(n)
    for a, b in graph.edges:
        uf.union(int(a), int(b))
    remap: dict[int, int] = {}
    comp = []
    for k in range(n):
        root = uf.find(k)
        if root not in remap:
            remap[root] = len(remap)
        comp.append(remap[root])
    return len(remap), comp


# ---------------------------------------------------------------------------
# simplex coverage

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])


def barycentric_xy(p: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if p.shape[1] != 3:
        raise UsageError("plane coordinates need exactly 3 weights, got %d"
                         % p.shape[1])
    return p @ TRIANGLE


def coverage_csv(p: np.ndarray) -> str:
    """CSV of simplex weights, with triangle (x, y) appended when K=3."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    k = p.shape[1]
    cols = ["p_%d" % j for j in range(k)]
    rows = p
    if k == 3:
        cols += ["x", "y"]
        rows = np.concatenate([p, barycentric_xy(p)], axis=1)
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join("%.10e" % v for v in row))
    return "\n".join(lines) + "\n"


def grid_cell(p: np.ndarray, denom: int = 4) -> tuple:
    """Snap a 3-weight vector to the nearest integer composition of
    ``denom`` by largest-remainder rounding; ties go to the lowest index."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,):
        raise UsageError("grid cells are defined for 3 weights")
    scaled = p * denom
    base = np.floor(scaled).astype(np.int64)
    short = denom - int(base.sum())
    remainder = scaled - base
    order = sorted(range(3), key=lambda j: (-remainder[j], j))
    for j in order[:short]:
        base[j] += 1
    return tuple(int(v) for v in base)


def coverage_fraction(p: np.ndarray, denom: int = 4) -> float:
    """Fraction of the (denom+1)(denom+2)/2 grid cells holding >= 1 row."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    cells = {grid_cell(row, denom) for row in p}
    total = (denom + 1) * (denom + 2) // 2
    return len(cells) / total


def write_mapper_json(path: str, graphs: dict):
    payload = {str(n): g.to_json_dict() for n, g in sorted(graphs.items())}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
