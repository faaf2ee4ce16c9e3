"""Undirected variable graphs: Laplacian and spectral utilities, random
block-structured generators, and graph estimation from a correlation matrix.

Graphs are simple 0/1 graphs (optionally with self-loops). The Laplacian is
the unnormalised L = D - A, assembled in integer arithmetic so that row sums
are exactly zero. Dense spectral routines are verification oracles and are
capped at DENSE_LIMIT vertices; the fitting path never needs them.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionTooLarge,
    InvalidProbability,
    InvalidQuantile,
    NotACorrelation,
)

# Largest p for which dense eigendecomposition is allowed.
DENSE_LIMIT = 2048

# Eigenvalues at or below this are counted as zero (connected components).
ZERO_EIGENVALUE_TOL = 1e-9


class Graph:
    """Undirected graph on p vertices stored as sorted adjacency lists.

    Invariants enforced at construction: symmetry, no duplicate neighbors,
    and no self-loops unless allow_self_loops is set. degree(i) counts a
    self-loop once.
    """

    def __init__(self, p, edges=(), allow_self_loops=False):
        if p < 1:
            raise ValueError(f"vertex count must be >= 1, got {p}")
        self.p = int(p)
        self.allow_self_loops = bool(allow_self_loops)
        sets = [set() for _ in range(self.p)]
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"edge ({i}, {j}) outside vertex range [0, {self.p})")
            if i == j:
                if not self.allow_self_loops:
                    raise ValueError(f"self-loop at vertex {i} but allow_self_loops is false")
                sets[i].add(i)
            else:
                sets[i].add(j)
                sets[j].add(i)
        self._neighbors = [np.array(sorted(s), dtype=np.int32) for s in sets]
        self._degrees = np.array([len(s) for s in sets], dtype=np.int64)
        self._flat = None
        self._offsets = None

    @classmethod
    def from_neighbor_lists(cls, lists, allow_self_loops=False):
        g = cls(len(lists), allow_self_loops=allow_self_loops)
        sets = [set(int(v) for v in lst) for lst in lists]
        for i, s in enumerate(sets):
            for j in s:
                if not 0 <= j < g.p:
                    raise ValueError(f"neighbor {j} of vertex {i} out of range")
                if j == i and not allow_self_loops:
                    raise ValueError(f"self-loop at vertex {i} but allow_self_loops is false")
                if j != i and i not in sets[j]:
                    raise ValueError(f"adjacency not symmetric: {j} in N({i}) but {i} not in N({j})")
        g._neighbors = [np.array(sorted(s), dtype=np.int32) for s in sets]
        g._degrees = np.array([len(s) for s in sets], dtype=np.int64)
        return g

    def neighbors(self, i):
        return self._neighbors[i]

    @property
    def degrees(self):
        return self._degrees

    @property
    def max_degree(self):
        return int(self._degrees.max()) if self.p else 0

    @property
    def edge_count(self):
        loops = sum(1 for i in range(self.p) if (self._neighbors[i] == i).any())
        return (int(self._degrees.sum()) - loops) // 2 + loops

    def edges(self):
        """Yield each edge once as (i, j) with i <= j."""
        for i in range(self.p):
            for j in self._neighbors[i]:
                if j >= i:
                    yield i, int(j)

    def adjacency(self):
        """Dense 0/1 adjacency matrix (int64)."""
        A = np.zeros((self.p, self.p), dtype=np.int64)
        for i in range(self.p):
            A[i, self._neighbors[i]] = 1
        return A

    def flat_adjacency(self):
        """CSR-style (flat neighbor array, offsets) for vectorized walks."""
        if self._flat is None:
            self._offsets = np.zeros(self.p + 1, dtype=np.int64)
            np.cumsum(self._degrees, out=self._offsets[1:])
            self._flat = (np.concatenate(self._neighbors)
                          if self._degrees.sum() else np.zeros(0, dtype=np.int32))
        return self._flat, self._offsets

    def __repr__(self):
        return f"Graph(p={self.p}, edges={self.edge_count})"


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Dense eigendecomposition of the unnormalised Laplacian.

    eigenvalues are nondecreasing; eigenvectors are orthonormal columns;
    zero_multiplicity counts eigenvalues at or below zero_tol and equals the
    number of connected components.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    zero_multiplicity: int
    zero_tol: float = ZERO_EIGENVALUE_TOL

    @property
    def spectral_gap(self):
        """Smallest eigenvalue exceeding the zero tolerance."""
        positive = self.eigenvalues[self.eigenvalues > self.zero_tol]
        if positive.size == 0:
            raise ValueError("graph has no nonzero Laplacian eigenvalue")
        return float(positive[0])


def laplacian(g: Graph) -> np.ndarray:
    """Unnormalised Laplacian L = D - A with exactly-zero row sums."""
    A = g.adjacency()
    L = np.diag(g.degrees) - A
    return L.astype(np.float64)


def spectral_decompose(g: Graph, limit: int = DENSE_LIMIT) -> LaplacianSpectrum:
    """Dense eigendecomposition oracle; raises DimensionTooLarge above limit."""
    if g.p > limit:
        raise DimensionTooLarge(f"p={g.p} exceeds dense-oracle limit {limit}")
    vals, vecs = np.linalg.eigh(laplacian(g))
    zero_mult = int(np.count_nonzero(vals <= ZERO_EIGENVALUE_TOL))
    return LaplacianSpectrum(vals, vecs, zero_mult)


def connected_components(g: Graph):
    """Union-find component labelling, independent of any spectral routine.

    Returns (count, labels) with labels in [0, count).
    """
    parent = list(range(g.p))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in g.edges():
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    roots = {}
    labels = np.empty(g.p, dtype=np.int64)
    for v in range(g.p):
        r = find(v)
        labels[v] = roots.setdefault(r, len(roots))
    return len(roots), labels


def estimate_graph(corr: np.ndarray, alpha: float) -> Graph:
    """Threshold absolute off-diagonal correlations at their alpha-quantile.

    The threshold is the nearest-rank quantile of {|corr_ij| : i < j}; an
    edge (i, j) is present iff |corr_ij| exceeds it strictly.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidQuantile(f"alpha must be in (0, 1), got {alpha}")
    corr = np.asarray(corr, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise NotACorrelation(f"expected a square matrix, got shape {corr.shape}")
    p = corr.shape[0]
    if not np.isfinite(corr).all():
        raise NotACorrelation("matrix contains non-finite entries")
    if np.abs(np.diag(corr) - 1.0).max() > 1e-8:
        raise NotACorrelation("diagonal entries must equal 1 within 1e-8")
    if np.abs(corr - corr.T).max() > 1e-8:
        raise NotACorrelation("matrix must be symmetric")
    if np.abs(corr).max() > 1.0 + 1e-12:
        raise NotACorrelation("entries must satisfy |corr_ij| <= 1")
    iu, ju = np.triu_indices(p, k=1)
    if iu.size == 0:
        return Graph(p)
    vals = np.sort(np.abs(corr[iu, ju]))
    rank = int(np.ceil(alpha * vals.size))  # nearest-rank, 1-based
    theta = vals[rank - 1]
    keep = np.abs(corr[iu, ju]) > theta
    return Graph(p, edges=zip(iu[keep], ju[keep]))


def _block_labels(sizes):
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"block sizes must be positive, got {sizes}")
    return np.repeat(np.arange(len(sizes)), sizes), sum(sizes)


def _sample_blocks(sizes, within, between, self_loops, seed):
    labels, p = _block_labels(sizes)
    within = np.asarray(within, dtype=np.float64)
    probs = np.where(labels[:, None] == labels[None, :], within[labels][:, None], between)
    rng = np.random.default_rng(seed)
    u = rng.random((p, p))
    iu, ju = np.triu_indices(p, k=0 if self_loops else 1)
    hit = u[iu, ju] < probs[iu, ju]
    edges = [(int(i), int(j)) for i, j in zip(iu[hit], ju[hit])]
    return Graph(p, edges=edges, allow_self_loops=self_loops)


def sample_block_graph(sizes, a: float, b: float, self_loops: bool = False,
                       seed: int = 0) -> Graph:
    """Stochastic block model: Bernoulli(a) within blocks, Bernoulli(b) across."""
    if not (0.0 <= b <= 1.0 and 0.0 <= a <= 1.0):
        raise InvalidProbability(f"probabilities must lie in [0, 1], got a={a}, b={b}")
    if b > a:
        raise InvalidProbability(f"need b <= a, got a={a}, b={b}")
    return _sample_blocks(sizes, [a] * len(list(sizes)), b, self_loops, seed)


def sample_clustered_network(sizes, xi, self_loops: bool = True, seed: int = 0) -> Graph:
    """Disjoint dense components: block i is Erdos-Renyi with probability xi_i.

    This is the fully-disconnected (b = 0) clustered model; self-loops are
    allowed by default, matching the component-wise dense random graph model.
    """
    sizes = list(sizes)
    xi_seq = [float(xi)] * len(sizes) if np.isscalar(xi) else [float(x) for x in xi]
    if len(xi_seq) != len(sizes):
        raise ValueError("xi must be scalar or one probability per block")
    if any(not 0.0 <= x <= 1.0 for x in xi_seq):
        raise InvalidProbability(f"probabilities must lie in [0, 1], got {xi_seq}")
    return _sample_blocks(sizes, xi_seq, 0.0, self_loops, seed)


def complete_graph(p: int) -> Graph:
    return Graph(p, edges=[(i, j) for i in range(p) for j in range(i + 1, p)])


def path_graph(p: int) -> Graph:
    return Graph(p, edges=[(i, i + 1) for i in range(p - 1)])


def disjoint_union(*graphs) -> Graph:
    """Relabelled disjoint union of graphs, blocks in argument order."""
    edges = []
    offset = 0
    loops = any(g.allow_self_loops for g in graphs)
    for g in graphs:
        edges.extend((i + offset, j + offset) for i, j in g.edges())
        offset += g.p
    return Graph(offset, edges=edges, allow_self_loops=loops)


def figure_graph() -> Graph:
    """Three vertices: one edge {0, 1} plus the isolated vertex 2."""
    return Graph(3, edges=[(0, 1)])


def group_clique_graph(sizes) -> Graph:
    """Disjoint union of complete graphs, one clique per group."""
    return disjoint_union(*(complete_graph(int(s)) for s in sizes))


def write_graph(g: Graph, path):
    """Edge-list text format: header 'p <count>' then 0-based 'i j' lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"p {g.p}\n")
        for i, j in g.edges():
            fh.write(f"{i} {j}\n")


def read_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "p":
            raise ValueError(f"{path}: expected header 'p <count>'")
        p = int(header[1])
        edges = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
    loops = any(i == j for i, j in edges)
    return Graph(p, edges=edges, allow_self_loops=loops)


def read_correlation_csv(path) -> np.ndarray:
    """Dense p x p correlation matrix from a headerless CSV."""
    mat = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if mat.shape[0] != mat.shape[1]:
        raise NotACorrelation(f"{path}: expected a square matrix, got {mat.shape}")
    return mat
