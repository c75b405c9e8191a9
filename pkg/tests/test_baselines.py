import numpy as np
import pytest

from outlier_nmf.baselines import knn_scores, knn_sweep, neighbor_distances, svd_scores, truncated_svd
from outlier_nmf.corpus_io import as_term_doc
from outlier_nmf.evaluation import auc

from conftest import random_sparse


def brute_knn(D, k, metric="euclidean"):
    n = D.shape[1]
    out = np.empty(n)
    for i in range(n):
        d = []
        for j in range(n):
            if i == j:
                continue
            if metric == "euclidean":
                d.append(np.linalg.norm(D[:, i] - D[:, j]))
            else:
                ni, nj = np.linalg.norm(D[:, i]), np.linalg.norm(D[:, j])
                cos = D[:, i] @ D[:, j] / (ni * nj) if ni > 0 and nj > 0 else 0.0
                d.append(1.0 - cos)
        out[i] = sorted(d)[k - 1]
    return out


def svd_oracle(D, r):
    """Truncated SVD from the eigendecomposition of D^T D."""
    evals, V = np.linalg.eigh(D.T @ D)
    idx = np.argsort(evals)[::-1][:r]
    s = np.sqrt(np.maximum(evals[idx], 0))
    Vt = V[:, idx].T
    energy = np.sqrt((s[:, None] * Vt ** 2).sum(0))
    U = D @ Vt.T / s
    residual = np.linalg.norm(D - U @ (s[:, None] * Vt), axis=0)
    return energy, residual


def test_identical_columns_zero():
    A = as_term_doc(np.tile([[1.0], [2.0], [0.0]], (1, 3)))
    np.testing.assert_array_equal(knn_scores(A, 1), np.zeros(3))


def test_distant_column_is_max():
    base = np.array([5.0, 5.0, 0.0, 0.0])
    D = np.stack([base, base + [1, 0, 0, 0], base + [0, 1, 0, 0], base, [0, 0, 9, 9]], axis=1)
    s = knn_scores(as_term_doc(D), 1)
    assert np.argmax(s) == 4 and np.sum(s == s.max()) == 1


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
@pytest.mark.parametrize("seed", range(3))
def test_knn_brute_force(seed, metric):
    rng = np.random.default_rng(seed)
    A = random_sparse(7, 6, 0.4, rng)
    for k in (1, 2, 5):
        np.testing.assert_allclose(knn_scores(A, k, metric), brute_knn(A.toarray(), k, metric),
                                   atol=1e-9)


def test_knn_blocks_and_threads_agree(rng):
    A = random_sparse(30, 50, 0.2, rng)
    ref = neighbor_distances(A, 6)
    np.testing.assert_array_equal(neighbor_distances(A, 6, threads=3, block_size=7), ref)


def test_knn_k_range():
    A = as_term_doc(np.eye(3))
    for k in (0, 3):
        with pytest.raises(ValueError):
            knn_scores(A, k)


def test_knn_column_permutation(rng):
    A = random_sparse(12, 10, 0.4, rng)
    perm = rng.permutation(10)
    np.testing.assert_allclose(knn_scores(A[:, perm], 3), knn_scores(A, 3)[perm], atol=1e-12)


def planted(rng, n_reg=20):
    D = np.zeros((20, n_reg + 1))
    D[:10, :n_reg] = rng.integers(1, 4, (10, n_reg))
    D[10:, n_reg] = rng.integers(1, 4, 10)
    return as_term_doc(D), np.r_[np.zeros(n_reg, int), 1]


def test_knn_sweep(rng):
    A, y = planted(rng)
    k, a, table = knn_sweep(A, [1], y)
    assert k == 1 and a == auc(knn_scores(A, 1), y)
    k, a, table = knn_sweep(A, range(1, 8), y)
    assert len(table) == 7
    assert all(a >= t for _, t in table)
    with pytest.raises(ValueError):
        knn_sweep(A, [], y)


def test_knn_sweep_tie_goes_to_smallest_k():
    A = as_term_doc(np.tile([[1.0], [2.0]], (1, 6)))
    k, a, _ = knn_sweep(A, [3, 1, 2], [0, 1, 0, 0, 1, 0])
    assert k == 1 and a == 0.5


def test_svd_exact_rank(rng):
    A = as_term_doc(rng.uniform(size=(15, 2)) @ rng.uniform(size=(2, 12)))
    assert np.all(svd_scores(A, 2) <= 1e-8)


def test_svd_planted_orthogonal_column(rng):
    w, h = rng.uniform(1, 2, 10), rng.uniform(1, 2, 9)
    D = np.zeros((20, 10))
    D[:10, :9] = np.outer(w, h)
    D[10:, 9] = rng.uniform(0.5, 1, 10)
    s = svd_scores(as_term_doc(D), 1)
    assert np.argmax(s) == 9


@pytest.mark.parametrize("seed", range(3))
def test_svd_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    A = as_term_doc(rng.uniform(size=(8, 6)))
    energy, residual = svd_oracle(A.toarray(), 3)
    np.testing.assert_allclose(svd_scores(A, 3, mode="subspace_energy"), energy, atol=1e-6)
    np.testing.assert_allclose(svd_scores(A, 3, mode="residual"), residual, atol=1e-6)


def test_randomized_path_matches_oracle_and_is_seed_independent():
    rng = np.random.default_rng(5)
    # clear spectral gap so the randomized range finder is accurate
    A = as_term_doc(rng.uniform(size=(120, 4)) @ rng.uniform(size=(4, 90)) * 10
                    + rng.uniform(size=(120, 90)) * 0.01)
    energy, residual = svd_oracle(A.toarray(), 4)
    a = svd_scores(A, 4, seed=1)
    b = svd_scores(A, 4, seed=2)
    np.testing.assert_allclose(a, b, atol=1e-6)
    np.testing.assert_allclose(a, residual, atol=1e-6)
    np.testing.assert_allclose(svd_scores(A, 4, mode="subspace_energy", seed=3), energy, rtol=1e-6)


def test_svd_rank_too_large():
    with pytest.raises(ValueError):
        truncated_svd(as_term_doc(np.eye(3)), 4)
    with pytest.raises(ValueError):
        svd_scores(as_term_doc(np.eye(3)), 2, mode="bogus")


# sqrt(S_r) V^T grows with the square root of the scale factor
@pytest.mark.parametrize("scorer, power", [
    (lambda A: knn_scores(A, 2), 1.0),
    (lambda A: knn_scores(A, 3), 1.0),
    (lambda A: svd_scores(A, 2), 1.0),
    (lambda A: svd_scores(A, 2, mode="subspace_energy"), 0.5),
])
def test_scaling_scales_scores(scorer, power, rng):
    A = random_sparse(15, 12, 0.3, rng)
    y = np.r_[np.zeros(9, int), np.ones(3, int)]
    s1, s2 = scorer(A), scorer(as_term_doc(A * 2.5))
    np.testing.assert_allclose(s2, 2.5 ** power * s1, rtol=1e-9, atol=1e-12)
    assert auc(s1, y) == pytest.approx(auc(s2, y), abs=1e-12)
