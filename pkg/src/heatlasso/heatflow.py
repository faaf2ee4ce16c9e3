"""Monte Carlo simulation of the continuous-time random walk whose generator
is the unnormalised Laplacian, plus an exact dense semigroup oracle.

Each walk holds at a vertex v for an Exponential(deg(v)) time, then jumps to
a uniformly random neighbor; a degree-0 vertex holds forever. The terminal
vertices of B walks per start vertex are stored once and reused to estimate
smoothed vectors by sample averages throughout an optimization run.

Randomness is counter-based: every draw is a pure hash of
(seed, walk index, step counter), so the terminals table is bit-identical
for a given (graph, t, B, seed) no matter how the walks are scheduled.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, LengthMismatch
from .graphs import DENSE_LIMIT, Graph, spectral_decompose

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = float(2.0 ** -53)


def _mix(x):
    # SplitMix64 finalizer; full-period 64-bit mixing.
    x = x + _GOLDEN
    x = (x ^ (x >> _U64(30))) * _MIX1
    x = (x ^ (x >> _U64(27))) * _MIX2
    return x ^ (x >> _U64(31))


def _uniforms(seed, walk_ids, draw):
    """Uniforms in (0, 1], one per walk, for the draw-th variate of each walk."""
    with np.errstate(over="ignore"):
        h = _mix(_mix(_mix(_U64(seed & 0xFFFFFFFFFFFFFFFF)) ^ walk_ids) ^ _U64(draw))
    return ((h >> _U64(11)).astype(np.float64) + 1.0) * _INV53


@dataclass(frozen=True)
class HeatFlowMatrix:
    """Terminal vertices of B simulated walks per start vertex at time t.

    terminals[i, j] is where the j-th walk started at vertex i sits at time
    t; step_counts[i, j] is the number of jumps it took (None for matrices
    loaded from disk, where counts are not stored).
    """

    terminals: np.ndarray
    t: float
    B: int
    seed: int
    step_counts: np.ndarray | None

    @property
    def p(self):
        return self.terminals.shape[0]

    @property
    def total_steps(self):
        return int(self.step_counts.sum()) if self.step_counts is not None else 0


def simulate_heat_flow(g: Graph, t: float, B: int, seed: int = 0,
                       unit_rate_holds: bool = False) -> HeatFlowMatrix:
    """Run B walks from every vertex until time t, all in vectorized lockstep.

    unit_rate_holds reproduces the Exponential(1) holding times of the naive
    walk (generator -(I - D^{-1}A)) for comparison only; the default
    Exponential(deg) holding matches the e^{-tL} semigroup and is what every
    fidelity test enforces.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    p = g.p
    n_walks = p * B
    terminals = np.repeat(np.arange(p, dtype=np.int32), B)
    steps = np.zeros(n_walks, dtype=np.int32)
    if t > 0:
        deg = g.degrees
        flat, offsets = g.flat_adjacency()
        remaining = np.full(n_walks, float(t))
        walk_ids = np.arange(n_walks, dtype=np.uint64)
        active = deg[terminals] > 0
        draw = 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = terminals[idx]
            u = _uniforms(seed, walk_ids[idx], 2 * draw)
            rate = 1.0 if unit_rate_holds else deg[cur].astype(np.float64)
            hold = -np.log(u) / rate
            alive = hold < remaining[idx]
            if alive.any():
                jidx = idx[alive]
                cur_j = terminals[jidx]
                u2 = _uniforms(seed, walk_ids[jidx], 2 * draw + 1)
                dj = deg[cur_j]
                choice = np.minimum((u2 * dj).astype(np.int64), dj - 1)
                terminals[jidx] = flat[offsets[cur_j] + choice]
                remaining[jidx] -= hold[alive]
                steps[jidx] += 1
            active[idx[~alive]] = False
            draw += 1
    return HeatFlowMatrix(
        terminals=terminals.reshape(p, B),
        t=float(t),
        B=int(B),
        seed=int(seed),
        step_counts=steps.reshape(p, B),
    )


def heatflow_apply(H: HeatFlowMatrix, f, S=None) -> np.ndarray:
    """Estimate the smoothed vector (e^{-tL} f) at the indices S.

    Returns the per-vertex average of f over walk terminals; an unbiased
    estimator with Monte Carlo error O(range(f)/sqrt(B)).
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (H.p,):
        raise LengthMismatch(f"f has shape {f.shape}, expected ({H.p},)")
    if S is None:
        return f[H.terminals].mean(axis=1)
    S = np.asarray(S, dtype=np.int64)
    if S.size == 0 or S.min() < 0 or S.max() >= H.p:
        raise IndexOutOfRange(f"S must be a nonempty subset of [0, {H.p})")
    return f[H.terminals[S]].mean(axis=1)


def exact_heat_kernel(g: Graph, t: float, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense e^{-tL} via eigendecomposition; symmetric, rows sum to 1."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.eye(g.p)
    spec = spectral_decompose(g, limit=limit)
    weights = np.exp(-t * np.maximum(spec.eigenvalues, 0.0))
    K = (spec.eigenvectors * weights) @ spec.eigenvectors.T
    return (K + K.T) / 2.0


_MAGIC = b"HFM1"


def save_heatflow(H: HeatFlowMatrix, path):
    """Binary format: magic 'HFM1', little-endian u64 p, u64 B, f64 t,
    i64 seed, then terminals row-major as i32."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQdq", H.p, H.B, H.t, H.seed))
        fh.write(np.ascontiguousarray(H.terminals, dtype="<i4").tobytes())


def load_heatflow(path) -> HeatFlowMatrix:
    """Load a stored matrix; step counts are not serialized and come back None."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
        p, B, t, seed = struct.unpack("<QQdq", fh.read(32))
        raw = fh.read(4 * p * B)
        if len(raw) != 4 * p * B:
            raise ValueError(f"{path}: truncated terminals table")
        terminals = np.frombuffer(raw, dtype="<i4").reshape(p, B).astype(np.int32)
    return HeatFlowMatrix(terminals=terminals, t=t, B=int(B), seed=int(seed),
                          step_counts=None)
