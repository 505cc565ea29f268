import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imbbench.neighbors import NeighborIndex, build_index, euclidean, knn_query


def brute_knn(points, queries, k, exclude=None):
    """Reference: full distance table, ties by lower index."""
    out_i, out_d = [], []
    for qi, q in enumerate(queries):
        d = np.sqrt(((points - q) ** 2).sum(axis=1))
        cand = [j for j in range(len(points)) if exclude is None or exclude[qi] != j]
        cand.sort(key=lambda j: (d[j], j))
        out_i.append(cand[:k])
        out_d.append([d[j] for j in cand[:k]])
    return np.array(out_i), np.array(out_d)


def test_single_point():
    idx = build_index([[1.0, 2.0]])
    assert len(idx) == 1
    assert knn_query(idx, [1.0, 2.0], 1) == [(0, 0.0)]


def test_empty_rejected():
    with pytest.raises(ValueError):
        build_index(np.empty((0, 2)))


def test_1d_self_excluded():
    idx = build_index(np.array([[0.0], [1.0], [2.0], [10.0]]))
    assert [i for i, _ in knn_query(idx, [0.0], 2, self_index=0)] == [1, 2]


def test_duplicate_retrievable():
    idx = build_index(np.array([[3.0], [3.0], [0.0]]))
    res = knn_query(idx, [3.0], 2)
    assert [i for i, _ in res] == [0, 1]
    assert all(d == 0.0 for _, d in res)
    # Self-exclusion is by identity, so the twin still counts.
    assert knn_query(idx, [3.0], 1, self_index=0) == [(1, 0.0)]


def test_tie_lower_index_first():
    idx = build_index(np.array([[1.0], [-1.0]]))
    assert [i for i, _ in knn_query(idx, [0.0], 2)] == [0, 1]
    idx = build_index(np.array([[-1.0], [1.0]]))
    assert [i for i, _ in knn_query(idx, [0.0], 1)] == [0]


def test_k_too_large_names_k_and_m():
    idx = build_index(np.zeros((3, 2)))
    with pytest.raises(ValueError, match=r"k=3.*m=3"):
        idx.query(np.zeros((1, 2)), 3, exclude=[0])


def test_euclidean():
    assert euclidean([0, 0], [3, 4]) == 5.0


@pytest.mark.parametrize("algorithm", ["brute", "kd_tree"])
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 500), d=st.integers(1, 8),
       grid=st.booleans())
def test_matches_oracle(algorithm, seed, n, d, grid):
    rng = np.random.default_rng(seed)
    # Integer grids create plenty of exact distance ties.
    P = rng.integers(0, 4, (n, d)).astype(float) if grid else rng.standard_normal((n, d))
    k = int(rng.integers(1, min(n - 1, 12) + 1))
    index = NeighborIndex(P, algorithm=algorithm)
    qs = rng.choice(n, size=min(n, 25), replace=False)
    idx, dist = index.query(P[qs], k, exclude=qs)
    ref_i, ref_d = brute_knn(P, P[qs], k, exclude=qs)
    np.testing.assert_array_equal(idx, ref_i)
    np.testing.assert_allclose(dist, ref_d, rtol=0, atol=1e-12)
    assert (np.diff(dist, axis=1) >= 0).all()


def test_large_auto_uses_tree_and_agrees():
    rng = np.random.default_rng(0)
    P = np.round(rng.standard_normal((3000, 3)), 1)
    tree = NeighborIndex(P)
    assert tree.algorithm == "kd_tree"
    brute = NeighborIndex(P, algorithm="brute")
    a = tree.query_self(6)
    b = brute.query_self(6)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)


def test_distances_match_recomputed():
    rng = np.random.default_rng(4)
    P = rng.standard_normal((200, 4))
    idx, dist = NeighborIndex(P).query_self(5)
    recomputed = np.linalg.norm(P[idx] - P[:, None, :], axis=2)
    np.testing.assert_allclose(dist, recomputed, atol=1e-12)
