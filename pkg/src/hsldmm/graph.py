"""Patch similarity graph: exact kNN, self-tuning Gaussian weights, and the
shift-summed matrix shared by every spectral band."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .patch import PatchGeometry, shift_permutation

__all__ = [
    "NeighborTable",
    "knn_exact",
    "local_scale",
    "build_bar_w",
    "assemble_wtilde",
    "graph_triples",
]


@dataclass(frozen=True)
class NeighborTable:
    """k nearest neighbors per row: the row itself first (distance 0), the
    rest ordered by squared distance, ties broken by smaller index."""

    indices: np.ndarray
    sq_dists: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        d2 = np.ascontiguousarray(self.sq_dists, dtype=np.float64)
        if idx.shape != d2.shape or idx.ndim != 2:
            raise ValueError("indices and sq_dists must share a 2-d shape")
        idx.setflags(write=False)
        d2.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "sq_dists", d2)

    @property
    def n_rows(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def _smallest_k(D: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per row: indices and values of the k smallest entries of D, ordered by
    (value, index). Assumes the caller already planted unique sentinels where
    a row must win outright."""
    nb, N = D.shape
    if k < N:
        cand = np.argpartition(D, k - 1, axis=1)[:, :k]
        cand.sort(axis=1)  # index-ascending so a stable value sort breaks ties by index
        vals = np.take_along_axis(D, cand, axis=1)
        order = np.argsort(vals, axis=1, kind="stable")
        sel = np.take_along_axis(cand, order, axis=1)
        selv = np.take_along_axis(vals, order, axis=1)
        # ties straddling the selection boundary need an exact per-row pass
        boundary = selv[:, -1][:, None]
        bad = np.nonzero((D <= boundary).sum(axis=1) > k)[0]
        for r in bad:
            full = np.argsort(D[r], kind="stable")[:k]
            sel[r] = full
            selv[r] = D[r][full]
    else:
        order = np.argsort(D, axis=1, kind="stable")
        sel = order[:, :k]
        selv = np.take_along_axis(D, sel, axis=1)
    return sel, selv


def knn_exact(
    patches: np.ndarray,
    k: int,
    *,
    block_rows: int = 2048,
    direct_limit: int = 2048,
) -> NeighborTable:
    """Exact k nearest neighbors under squared Euclidean distance.

    Blocked exhaustive search; deterministic for fixed input regardless of
    ``block_rows``. Below ``direct_limit`` points the distances come from the
    plain elementwise difference form; above it a Gram-based form is used
    (same neighbor sets, cheaper at scale). The query point itself is always
    the first neighbor.
    """
    P = np.ascontiguousarray(patches, dtype=np.float64)
    if P.ndim != 2:
        raise ValueError(f"patch matrix must be 2-d, got shape {P.shape}")
    N = P.shape[0]
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= {N}, got k={k}")
    use_gram = N > direct_limit
    if use_gram:
        sq_norms = np.einsum("ij,ij->i", P, P)
    idx_out = np.empty((N, k), dtype=np.int64)
    d2_out = np.empty((N, k), dtype=np.float64)
    for start in range(0, N, block_rows):
        stop = min(start + block_rows, N)
        if use_gram:
            D = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * (P[start:stop] @ P.T)
            np.maximum(D, 0.0, out=D)
        else:
            D = ((P[start:stop, None, :] - P[None, :, :]) ** 2).sum(axis=2)
        rows = np.arange(stop - start)
        D[rows, np.arange(start, stop)] = -1.0  # self sentinel: ranked first
        sel, selv = _smallest_k(D, k)
        selv[:, 0] = 0.0  # self distance is exactly zero
        idx_out[start:stop] = sel
        d2_out[start:stop] = selv
    return NeighborTable(indices=idx_out, sq_dists=d2_out)


def local_scale(table: NeighborTable, r_sigma: int) -> np.ndarray:
    """Self-tuning scale per row: distance to the r_sigma-th nearest neighbor
    (the row itself counts as rank 1).

    A zero scale falls back to the smallest positive neighbor distance in
    the row, or to 1 if every neighbor coincides with the row.
    """
    if not 2 <= r_sigma <= table.k:
        raise ValueError(f"need 2 <= r_sigma <= k={table.k}, got {r_sigma}")
    sigma = np.sqrt(table.sq_dists[:, r_sigma - 1])
    for r in np.nonzero(sigma == 0.0)[0]:
        pos = table.sq_dists[r][table.sq_dists[r] > 0.0]
        sigma[r] = math.sqrt(pos.min()) if pos.size else 1.0
    return sigma


def build_bar_w(patches: np.ndarray, table: NeighborTable, sigma: np.ndarray) -> sp.csr_matrix:
    """Gaussian similarity over the kNN pairs: exp(-d2(x,y) / (sigma_x * sigma_y)).

    Exactly k entries per row, self weight 1, not symmetrized (the kNN
    truncation is directional and the downstream system is non-symmetric by
    construction).
    """
    N, k = table.indices.shape
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (N,):
        raise ValueError(f"sigma must have shape ({N},), got {sigma.shape}")
    denom = sigma[:, None] * sigma[table.indices]
    w = np.exp(-table.sq_dists / denom)
    # keep the k-per-row structure even if exp underflows
    np.maximum(w, np.finfo(np.float64).tiny, out=w)
    rows = np.repeat(np.arange(N, dtype=np.int64), k)
    g = sp.csr_matrix((w.reshape(-1), (rows, table.indices.reshape(-1))), shape=(N, N))
    g.sort_indices()
    return g


def assemble_wtilde(bar_w: sp.csr_matrix, geom: PatchGeometry) -> sp.csr_matrix:
    """Sum the similarity matrix over all window shifts.

    wtilde(x, y) = sum_i bar_w(x shifted by 1-i, y shifted by 1-i) for
    i in [1, d_s]; this single matrix is what every spectral band shares.
    """
    N = geom.n_pixels
    if bar_w.shape != (N, N):
        raise ValueError(f"bar_w must be {N} x {N}, got {bar_w.shape}")
    acc = None
    ones = np.ones(N)
    for i in range(1, geom.d_s + 1):
        perm = shift_permutation(geom, 1 - i)
        P = sp.csr_matrix((ones, (np.arange(N), perm)), shape=(N, N))
        term = P @ bar_w @ P.T
        acc = term if acc is None else acc + term
    acc = acc.tocsr()
    acc.sum_duplicates()
    acc.sort_indices()
    return acc


def graph_triples(g: sp.spmatrix) -> str:
    """Debug dump: one 'row col weight' line per stored entry, sorted."""
    coo = g.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{int(coo.row[i])} {int(coo.col[i])} {float(coo.data[i])!r}" for i in order]
    return "\n".join(lines) + ("\n" if lines else "")
