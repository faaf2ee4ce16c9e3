"""Synthetic random designs with latent group structure: block
equi-correlation Gaussians, Gaussian free fields on a graph, and
block-model covariances, plus signal and response generation.
"""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NotPositiveDefinite
from .graphs import Graph, laplacian, spectral_decompose
from .penalty import GroupStructure

DESIGN_KINDS = ("block_equicorr", "gff", "sbm_cov")

# One scheme per group: ("uniform", lo, hi) or ("zero",). The default for
# four groups is signal on groups 1 and 3, silence on 2 and 4.
DEFAULT_K4_SCHEME = (("uniform", 0.5, 0.7), ("zero",),
                     ("uniform", -0.7, -0.5), ("zero",))


@dataclass(frozen=True)
class DesignSpec:
    """Declarative description of one synthetic dataset."""

    kind: str
    sizes: tuple
    n: int
    noise_sigma: float
    seed: int = 0
    rhos: tuple | None = None        # block_equicorr: one rho per group
    theta: float | None = None       # gff: mass added to the Laplacian
    a: float | None = None           # sbm_cov: within-block covariance
    b: float | None = None           # sbm_cov: between-block covariance
    beta_scheme: tuple | None = None  # None -> DEFAULT_K4_SCHEME when k == 4

    @property
    def p(self):
        return int(sum(self.sizes))

    @property
    def k(self):
        return len(self.sizes)

    def scheme(self):
        if self.beta_scheme is not None:
            return self.beta_scheme
        if self.k == 4:
            return DEFAULT_K4_SCHEME
        raise ValueError("beta_scheme must be given explicitly unless k == 4")


def equicorrelation(d, rho):
    """(1 - rho) I + rho 11^T of order d; positive-definite for
    rho in (-1/(d-1), 1)."""
    lo = -1.0 / (d - 1) if d > 1 else -np.inf
    if not lo < rho < 1.0:
        raise NotPositiveDefinite(
            f"rho={rho} outside ({lo:.4g}, 1) for block size {d}")
    return (1.0 - rho) * np.eye(d) + rho * np.ones((d, d))


def make_covariance(spec: DesignSpec, g: Graph | None = None) -> np.ndarray:
    """Population covariance of the design: block-diagonal equicorrelation,
    the GFF covariance (L + theta I)^{-1}, or the block-model I + P."""
    p = spec.p
    if spec.kind == "block_equicorr":
        if spec.rhos is None or len(spec.rhos) != spec.k:
            raise NotPositiveDefinite("block_equicorr needs one rho per group")
        sigma = np.zeros((p, p))
        start = 0
        for d, rho in zip(spec.sizes, spec.rhos):
            sigma[start:start + d, start:start + d] = equicorrelation(int(d), rho)
            start += d
        return sigma
    if spec.kind == "gff":
        if g is None:
            raise ValueError("gff design needs the underlying graph")
        if spec.theta is None or spec.theta <= 0:
            raise NotPositiveDefinite(f"mass must be > 0, got {spec.theta}")
        if g.p != p:
            raise ValueError(f"graph has {g.p} vertices, design has p={p}")
        sigma = np.linalg.inv(laplacian(g) + spec.theta * np.eye(p))
        return (sigma + sigma.T) / 2.0
    if spec.kind == "sbm_cov":
        a, b = spec.a, spec.b
        if a is None or b is None or not (0.0 <= b <= a <= 1.0):
            raise NotPositiveDefinite(f"need 0 <= b <= a <= 1, got a={a}, b={b}")
        labels = np.repeat(np.arange(spec.k), spec.sizes)
        P = np.where(labels[:, None] == labels[None, :], a, b)
        np.fill_diagonal(P, 0.0)  # within-block diagonal of P is zero
        return np.eye(p) + P
    raise ValueError(f"unknown design kind {spec.kind!r}")


def default_gff_mass(g: Graph, k: int) -> float:
    """The (k + 1)-th smallest Laplacian eigenvalue, the canonical mass for
    a graph with k groups; must come out positive."""
    spec = spectral_decompose(g)
    if k + 1 > g.p:
        raise ValueError(f"graph has only {g.p} eigenvalues, need index {k}")
    theta = float(spec.eigenvalues[k])
    if theta <= 0:
        raise NotPositiveDefinite(
            f"eigenvalue {k} is {theta:.3g}; mass must be > 0")
    return theta


def _covariance_root(sigma):
    # Symmetric square root via eigendecomposition; stable for the
    # near-singular equicorrelation blocks with rho close to 1.
    vals, vecs = np.linalg.eigh(sigma)
    if vals.min() < -1e-10:
        raise NotPositiveDefinite(f"covariance has eigenvalue {vals.min():.3g}")
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


def draw_beta(spec: DesignSpec, rng) -> np.ndarray:
    beta = np.zeros(spec.p)
    start = 0
    for size, scheme in zip(spec.sizes, spec.scheme()):
        size = int(size)
        if scheme[0] == "uniform":
            lo, hi = float(scheme[1]), float(scheme[2])
            beta[start:start + size] = rng.uniform(lo, hi, size=size)
        elif scheme[0] != "zero":
            raise ValueError(f"unknown beta scheme {scheme!r}")
        start += size
    return beta


def sample_design_and_response(spec: DesignSpec, g: Graph | None = None):
    """Draw (X, y, beta_star, groups) for the spec, deterministically per seed.

    Rows of X are i.i.d. N(0, Sigma) through the symmetric square root of
    Sigma; y = X beta_star + noise_sigma * standard normal noise. Draw order
    is beta_star, then X, then noise.
    """
    sigma = make_covariance(spec, g)
    root = _covariance_root(sigma)
    rng = np.random.default_rng(spec.seed)
    beta_star = draw_beta(spec, rng)
    X = rng.standard_normal((spec.n, spec.p)) @ root
    y = X @ beta_star + spec.noise_sigma * rng.standard_normal(spec.n)
    return X, y, beta_star, GroupStructure.from_sizes(spec.sizes)


def write_dataset_csv(path, X, y):
    """First column y, then x1..xp, with a header row."""
    X = np.asarray(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(X.shape[1])])
        for yi, row in zip(y, X):
            writer.writerow([repr(float(yi))] + [repr(float(v)) for v in row])


def write_dataset_sidecar(path, spec: DesignSpec, beta_star, groups: GroupStructure):
    """Companion JSON recording the generating spec and the ground truth."""
    payload = {
        "spec": asdict(spec),
        "seed": spec.seed,
        "beta_star": [float(v) for v in beta_star],
        "groups": [int(v) for v in groups.assignment],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
