import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from ise_lab.clustering import NOISE, compute_centroids, dbscan, dbscan_labels
from ise_lab.errors import DegenerateInputError

from oracles import oracle_dbscan, same_partition


def _blob(rng, centre, n, spread):
    return centre + spread * rng.normal(size=(n, len(centre)))


def test_two_orthogonal_blobs():
    rng = np.random.default_rng(0)
    x = np.vstack([_blob(rng, [1, 0, 0], 10, 0.01), _blob(rng, [0, 1, 0], 10, 0.01)])
    st_ = dbscan(x, eps=0.1, min_points=4)
    assert st_.n_clusters == 2
    assert st_.n_noise == 0
    assert len(set(st_.labels[:10])) == 1 and len(set(st_.labels[10:])) == 1


def test_isolated_point_is_noise():
    rng = np.random.default_rng(1)
    x = np.vstack([_blob(rng, [1, 0, 0], 10, 0.01), [[0, 0, 1]]])
    labels = dbscan_labels(x, eps=0.1, min_points=4)
    assert labels[-1] == NOISE
    assert np.all(labels[:-1] == 0)


def test_first_discovery_numbering():
    rng = np.random.default_rng(2)
    a, b = _blob(rng, [1, 0], 5, 0.001), _blob(rng, [0, 1], 5, 0.001)
    x = np.vstack([b[:1], a, b[1:]])
    labels = dbscan_labels(x, eps=0.05, min_points=3)
    assert labels[0] == 0  # sample 0 belongs to the b blob, discovered first
    assert np.all(labels[1:6] == 1)


def test_border_joins_lowest_id_core_neighbour():
    # two dense arcs and a border point within reach of both; its lowest-id
    # core neighbour lies in the cluster discovered second
    ang = np.deg2rad
    pts = [ang(a) for a in (0, 1, 2, 3)] + [ang(a) for a in (20, 21, 22, 23)]
    x = np.array([[np.cos(a), np.sin(a)] for a in pts])
    # reorder so the second arc has lower ids than the first arc's nearest core
    border = np.array([[np.cos(ang(11.5)), np.sin(ang(11.5))]])
    x = np.vstack([x[[0, 1, 2]], x[4:], x[[3]], border])
    eps = 1 - np.cos(ang(8.6))
    labels = dbscan_labels(x, eps=eps, min_points=4)
    assert labels.tolist() == oracle_dbscan(x, eps, 4)
    assert labels[0] != labels[3]
    # id 3 (20 deg arc, cluster 1) precedes id 7 (3 deg, cluster 0)
    assert labels[-1] == labels[3] == 1


def test_hand_instance_matches_oracle():
    rng = np.random.default_rng(30)
    x = np.vstack([_blob(rng, rng.normal(size=4), 10, 0.15) for _ in range(3)])
    labels = dbscan_labels(x, eps=0.05, min_points=4)
    assert same_partition(labels.tolist(), oracle_dbscan(x, 0.05, 4))


def test_empty_table_raises():
    with pytest.raises(DegenerateInputError):
        dbscan(np.zeros((0, 3)))


def test_bad_parameters_raise():
    with pytest.raises(DegenerateInputError):
        dbscan(np.eye(3), eps=0.0)
    with pytest.raises(DegenerateInputError):
        dbscan(np.eye(3), min_points=0)


def test_all_identical_points_one_cluster():
    labels = dbscan_labels(np.tile([0.3, 0.4], (6, 1)), eps=0.1, min_points=4)
    assert np.all(labels == 0)


@pytest.mark.parametrize(
    "members, expected",
    [
        ([(1, 0), (1, 0)], (1, 0)),
        ([(1, 0), (0, 1)], (2 ** -0.5, 2 ** -0.5)),
        ([(2, 0), (0, 4), (2, 2)], (0.5547001962252291, 0.8320502943378437)),
    ],
)
def test_centroid_examples(members, expected):
    c = compute_centroids(np.array(members, float), np.zeros(len(members), int))
    np.testing.assert_allclose(c[0], expected, atol=1e-12)


def test_centroids_skip_noise():
    x = np.array([[1, 0], [1, 0], [0, 1]], float)
    c = compute_centroids(x, np.array([0, 0, NOISE]))
    np.testing.assert_allclose(c, [[1, 0]])


def test_centroids_need_members():
    with pytest.raises(DegenerateInputError):
        compute_centroids(np.eye(2), np.array([NOISE, NOISE]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    centres = rng.normal(size=(4, 8))
    x = np.vstack([_blob(rng, c, 12, 0.05) for c in centres])
    perm = rng.permutation(len(x))
    a = dbscan_labels(x, 0.1, 4)
    b = dbscan_labels(x[perm], 0.1, 4)
    assert adjusted_rand_score(a[perm], b) == 1.0


def test_scale_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(80, 4))
    np.testing.assert_array_equal(dbscan_labels(x, 0.1, 4), dbscan_labels(3.0 * x, 0.1, 4))


def test_same_cluster_pairs_density_connected():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(120, 3))
    eps, mp = 0.08, 4
    labels = dbscan_labels(x, eps, mp)
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    adj = (1 - xn @ xn.T) <= eps
    core = adj.sum(1) >= mp
    for c in set(labels) - {NOISE}:
        members = np.flatnonzero(labels == c)
        cores = [m for m in members if core[m]]
        # every core member reaches every other through core-core hops
        seen, frontier = {cores[0]}, [cores[0]]
        while frontier:
            p = frontier.pop()
            for q in np.flatnonzero(adj[p] & core):
                if q not in seen:
                    seen.add(q)
                    frontier.append(q)
        assert set(cores) <= seen
        for m in members:
            assert core[m] or any(adj[m, q] for q in cores)
