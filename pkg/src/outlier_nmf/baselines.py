"""
Reference outlier scorers: k-nearest-neighbor distance and truncated SVD.

Both take a term-document matrix with documents on the columns and return
one score per document, larger meaning more outlying.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .evaluation import auc
from .sparse_core import column_sq_norms

METRICS = ("euclidean", "cosine")
SVD_MODES = ("residual", "subspace_energy")
DENSE_SVD_LIMIT = 64


@dataclass(frozen=True)
class BaselineConfig:
    k: int = 5
    metric: str = "euclidean"
    rank: int = 10
    svd_power_iters: int = 4
    svd_oversample: int = 8
    svd_score_mode: str = "residual"
    seed: int = 0


def _blocks(n, size):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _prepare(A, metric):
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    A = sp.csc_matrix(A, dtype=np.float64)
    sq = column_sq_norms(A)
    if metric == "cosine":
        norms = np.sqrt(sq)
        inv = np.zeros_like(norms)
        inv[norms > 0] = 1.0 / norms[norms > 0]
        A = A @ sp.diags(inv)
        sq = column_sq_norms(A)
    return A, sq


def neighbor_distances(A, k_max, metric="euclidean", threads=1, block_size=512):
    """Sorted distances from every document to its ``k_max`` nearest others.

    Returns
    -------
    ndarray, shape (n_docs, k_max)
        Row ``i`` holds the distances to the 1st..k_max-th nearest other
        document in ascending order.
    """
    n = A.shape[1]
    if not 1 <= k_max < n:
        raise ValueError(f"k must satisfy 1 <= k < n_docs={n}, got {k_max}")
    X, sq = _prepare(A, metric)
    XT = X.T.tocsr()

    def run(bounds):
        lo, hi = bounds
        G = np.asarray((XT[lo:hi] @ X).todense())
        if metric == "euclidean":
            D = sq[lo:hi, None] + sq[None, :] - 2.0 * G
            np.maximum(D, 0.0, out=D)
            np.sqrt(D, out=D)
        else:
            # a zero document is treated as orthogonal to everything
            D = np.clip(1.0 - G, 0.0, 2.0)
        D[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        part = np.partition(D, k_max - 1, axis=1)[:, :k_max]
        return np.sort(part, axis=1)

    return np.vstack(_map(run, _blocks(n, block_size), threads))


def knn_scores(A, k, metric="euclidean", threads=1):
    """Distance from each document to its k-th nearest other document."""
    return neighbor_distances(A, k, metric, threads)[:, k - 1].copy()


def knn_sweep(A, k_values, labels, metric="euclidean", threads=1):
    """Pick the neighbor count with the best AUC against ground truth.

    This deliberately favors the baseline: real use has no labels to tune on.
    Ties go to the smallest ``k``.

    Returns
    -------
    best_k : int
    best_auc : float
    table : list of (k, auc)
    """
    ks = sorted({int(k) for k in k_values})
    if not ks:
        raise ValueError("empty k range")
    dist = neighbor_distances(A, ks[-1], metric, threads)
    table = [(k, auc(dist[:, k - 1], labels)) for k in ks]
    best_k, best_auc = table[0]
    for k, a in table[1:]:
        if a > best_auc:
            best_k, best_auc = k, a
    return best_k, best_auc, table


def truncated_svd(A, rank, power_iters=4, oversample=8, seed=0):
    """Rank-``rank`` SVD ``U, s, Vt`` of ``A``.

    Small problems (``min(m, n) <= 64``) use a dense LAPACK SVD; larger ones
    use a randomized range finder with subspace (power) iterations.
    Singular vector signs are fixed so the largest-magnitude entry of each
    right singular vector is positive.
    """
    m, n = A.shape
    if not 1 <= rank <= min(m, n):
        raise ValueError(f"rank {rank} exceeds matrix dimensions {A.shape}")
    if min(m, n) <= DENSE_SVD_LIMIT:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        U, s, Vt = np.linalg.svd(dense, full_matrices=False)
    else:
        rng = np.random.default_rng(seed)
        ell = min(rank + oversample, min(m, n))
        Q, _ = np.linalg.qr(np.asarray(A @ rng.standard_normal((n, ell))))
        for _ in range(power_iters):
            P, _ = np.linalg.qr(np.asarray(A.T @ Q))
            Q, _ = np.linalg.qr(np.asarray(A @ P))
        B = np.asarray((A.T @ Q).T)
        Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
        U = Q @ Ub
    U, s, Vt = U[:, :rank], s[:rank], Vt[:rank]
    flip = np.sign(Vt[np.arange(rank), np.argmax(np.abs(Vt), axis=1)])
    flip[flip == 0] = 1.0
    return U * flip, s, Vt * flip[:, None]


def svd_scores(A, rank, mode="residual", power_iters=4, oversample=8, seed=0,
               block_size=1024):
    """Truncated-SVD outlier scores.

    ``mode='subspace_energy'`` is the Euclidean norm of column ``i`` of
    ``sqrt(S_r) V^T``; it grows with how much of the document the top
    subspace captures. ``mode='residual'`` is ``||a_i - A_r e_i||``, the part
    of the document the rank-``r`` approximation misses.
    """
    if mode not in SVD_MODES:
        raise ValueError(f"unknown SVD score mode {mode!r}; choose from {SVD_MODES}")
    U, s, Vt = truncated_svd(A, rank, power_iters, oversample, seed)
    if mode == "subspace_energy":
        return np.sqrt(np.einsum("k,ki->i", s, Vt * Vt))
    SVt = s[:, None] * Vt
    n = A.shape[1]
    out = np.empty(n)
    Acsc = sp.csc_matrix(A) if sp.issparse(A) else A
    for lo, hi in _blocks(n, block_size):
        block = Acsc[:, lo:hi]
        block = block.toarray() if sp.issparse(block) else np.asarray(block, dtype=np.float64)
        R = block - U @ SVt[:, lo:hi]
        out[lo:hi] = np.sqrt(np.einsum("ij,ij->j", R, R))
    return out
