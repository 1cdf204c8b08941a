"""Locality-regularized neighbor embedding: exact KNN over stored
component vectors, a distance-weighted ridge solve for the embedding
weights, and residual reconstruction.

Weights minimize ||q - N^T w||^2 + lam ||d .* w||^2 where N holds the K
neighbor rows and d their distances to q; dissimilar neighbors are
penalized harder. There is no sum-to-one constraint.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"MNCE"
_VERSION = 1
_JITTER = 1e-10


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborQueryResult:
    indices: np.ndarray  # ascending by distance, ties by lower index
    dists: np.ndarray


@dataclass(frozen=True)
class TrainingIndex:
    """Paired (feature, residual) rows for one facial component.

    features[i] is the flattened intermediate-HR component of training
    image i; residuals[i] the corresponding HR-minus-intermediate vector.
    Stored float32 so disk round-trips are lossless.
    """

    component: str
    features: np.ndarray   # (N, D) float32
    residuals: np.ndarray  # (N, D) float32

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.float32)
        r = np.ascontiguousarray(self.residuals, dtype=np.float32)
        if f.ndim != 2 or f.shape != r.shape:
            raise EmbeddingError("features/residuals must be matching (N, D)")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "residuals", r)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def knn(index: TrainingIndex, q: np.ndarray, k: int,
        exclude: int | None = None) -> NeighborQueryResult:
    """Exact K nearest rows by Euclidean distance (stable tie-break)."""
    q = np.asarray(q, dtype=np.float64)
    if index.n == 0:
        raise EmbeddingError("empty index")
    if q.shape != (index.dim,):
        raise EmbeddingError(f"query dim {q.shape} != ({index.dim},)")
    avail = index.n - (1 if exclude is not None else 0)
    if not (1 <= k <= avail):
        raise EmbeddingError(f"k={k} out of range for {avail} candidates")
    diff = index.features.astype(np.float64) - q
    d2 = np.einsum("nd,nd->n", diff, diff)
    if exclude is not None:
        d2[exclude] = np.inf
    order = np.argsort(d2, kind="stable")[:k]
    return NeighborQueryResult(indices=order,
                               dists=np.sqrt(np.maximum(d2[order], 0.0)))


def locality_adaptor(q: np.ndarray, neighbors: np.ndarray) -> np.ndarray:
    """Per-neighbor Euclidean distance to the query."""
    q = np.asarray(q, dtype=np.float64)
    nb = np.asarray(neighbors, dtype=np.float64)
    return np.linalg.norm(nb - q, axis=1)


def solve_weights(q: np.ndarray, neighbors: np.ndarray, d: np.ndarray,
                  lambda_emb: float) -> np.ndarray:
    """Closed-form weights for the distance-penalized reconstruction.

    Solves (N N^T + lam diag(d^2) + eps tr(N N^T)/K I) w = N q with a
    fixed eps jitter so the system stays nonsingular at lam = 0.
    """
    q = np.asarray(q, dtype=np.float64)
    nb = np.asarray(neighbors, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if nb.ndim != 2 or nb.shape[0] < 1:
        raise EmbeddingError("need at least one neighbor")
    if lambda_emb < 0:
        raise EmbeddingError("lambda_emb must be >= 0")
    if not (np.isfinite(q).all() and np.isfinite(nb).all()
            and np.isfinite(d).all()):
        raise EmbeddingError("non-finite inputs")
    k = nb.shape[0]
    gram = nb @ nb.T
    a = gram + np.diag(lambda_emb * d * d)
    a[np.diag_indices_from(a)] += _JITTER * np.trace(gram) / k
    b = nb @ q
    try:
        w = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(a, b, rcond=None)[0]
    return w


def embed_component(index: TrainingIndex, q: np.ndarray, k: int,
                    lambda_emb: float,
                    exclude: int | None = None) -> np.ndarray:
    """Residual-compensate one component vector against the index."""
    res = knn(index, q, k, exclude=exclude)
    nb = index.features[res.indices].astype(np.float64)
    w = solve_weights(q, nb, res.dists, lambda_emb)
    return np.asarray(q, dtype=np.float64) + \
        index.residuals[res.indices].astype(np.float64).T @ w


def save_index(index: TrainingIndex, path) -> None:
    """Binary format: "MNCE", u32 version, u32 N, u32 D, then f32 feature
    rows followed by f32 residual rows, all little-endian."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, index.n, index.dim))
        fh.write(index.features.astype("<f4").tobytes())
        fh.write(index.residuals.astype("<f4").tobytes())


def load_index(path, component: str = "") -> TrainingIndex:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != _MAGIC:
        raise EmbeddingError(f"corrupt index file {path}: bad magic")
    version, n, dim = struct.unpack("<III", blob[4:16])
    if version != _VERSION:
        raise EmbeddingError(f"unsupported index version {version} in {path}")
    need = 16 + 2 * 4 * n * dim
    if len(blob) != need:
        raise EmbeddingError(
            f"corrupt index file {path}: {len(blob)} bytes, expected {need}")
    flat = np.frombuffer(blob, dtype="<f4", offset=16)
    feats = flat[:n * dim].reshape(n, dim)
    resid = flat[n * dim:].reshape(n, dim)
    return TrainingIndex(component=component, features=feats, residuals=resid)
