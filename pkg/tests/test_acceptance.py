"""Numbered acceptance criteria.

Criteria 1-5 need the full Online Retail ledger as CSV (see
``scripts/fetch_uci.py``); point ``RETAIL_CSV`` at it. Without the file they
are reported as BLOCKED. Criteria 6-8 are self-contained.
"""

import json
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from conftest import RETAIL_CSV
from helpers import brute_k_distance, exhaustive_wcss, partition
from retailseg.cluster import ClusterFeature, dbscan_fit, gmm_fit, kmeans_fit, linkage_tree, LINKAGES
from retailseg.config import load_config
from retailseg.dataio import CleanConfig, aggregate_invoices, clean, parse_transactions
from retailseg.evaluation import silhouette, k_distance
from retailseg.features import Segment, compute_rfm, score_customers, segment_distribution
from retailseg.numeric import covariance_matrix, eigen_symmetric, pca_fit_transform
from retailseg.pipeline import run_pipeline

CONFIGS = Path(__file__).parents[1] / "configs"
SEARCH_CONFIGS = ["default.yaml", "customer_rfm.yaml", "customer_scores.yaml", "customer_recency_monetary.yaml"]


def c(n):
    return pytest.mark.criterion(n)


# -- shared real-data fixtures ------------------------------------------------


@pytest.fixture(scope="session")
def ledger():
    if not Path(RETAIL_CSV).is_file():
        pytest.skip(f"dataset not available: set RETAIL_CSV (looked for {RETAIL_CSV})")
    return parse_transactions(RETAIL_CSV)


@pytest.fixture(scope="session")
def cleaned(ledger):
    return clean(ledger)[0]


@pytest.fixture(scope="session")
def customers(cleaned):
    return {x.customer_id: x for x in score_customers(compute_rfm(cleaned))}


# -- 1. cleaning counts ------------------------------------------------------


@c(1)
def test_cleaning_counts(ledger):
    rows, rep = clean(ledger, CleanConfig(deduplicate=False))
    assert rep.rows_in == 541_909
    assert rep.rows_after_null_drop == 406_829
    assert rep.negatives_removed == 8_905
    assert rep.rows_after_dedup == 397_924
    _, with_dedup = clean(ledger)
    print(f"dedup enabled: {with_dedup.duplicates_removed} duplicates removed, final {with_dedup.rows_after_dedup}")


@c(1)
def test_reference_invoices(cleaned):
    totals = {s.invoice_no: s for s in aggregate_invoices(cleaned)}
    assert totals["536365"].line_count == 7
    assert totals["536365"].invoice_total_2dp == Decimal("139.12")
    assert totals["536369"].line_count == 1
    assert totals["536369"].invoice_total_2dp == Decimal("17.85")


# -- 2. RFM values -----------------------------------------------------------

TABLE = {
    "12346": (325, 1, Decimal("77183.60")),
    "12347": (1, 182, Decimal("4310.00")),
    "12348": (74, 31, Decimal("1797.24")),
    "12349": (18, 73, Decimal("1757.55")),
    "12350": (309, 17, Decimal("334.40")),
}


@c(2)
@pytest.mark.parametrize("cid", sorted(TABLE))
def test_rfm_values(customers, cid):
    got = customers[cid]
    assert (got.recency, got.frequency, got.monetary) == TABLE[cid]


# -- 3. segment shares -------------------------------------------------------

SHARES = {Segment.LOST: 31, Segment.LOW: 30, Segment.MEDIUM: 21, Segment.HIGH: 10, Segment.TOP: 8}


@c(3)
def test_segment_shares(customers):
    dist = segment_distribution(x.segment for x in customers.values())
    print({s.value: round(p, 2) for s, p in dist.items()})
    for seg, target in SHARES.items():
        assert abs(dist[seg] - target) <= 2, (seg, dist[seg])


# -- 4 and 5. pipeline on the full data --------------------------------------


@pytest.fixture(scope="session")
def full_runs(ledger, tmp_path_factory):
    runs = {}
    for name in SEARCH_CONFIGS:
        out = tmp_path_factory.mktemp(name.removesuffix(".yaml"))
        cfg = load_config(CONFIGS / name, {"input": RETAIL_CSV, "output_dir": str(out),
                                           "stages": ["clean", "rfm", "elbow", "cluster"]})
        runs[name] = run_pipeline(cfg)
    return runs


@c(4)
def test_elbow_picks_three(full_runs):
    m = full_runs["default.yaml"]
    report = json.loads((m.root / "report.json").read_text())
    print("elbow inertias", report["elbow"]["inertias"])
    assert report["elbow"]["chosen_k"] == 3


BANDS = {
    "kmeans": lambda s: abs(s - 0.64) <= 0.06,
    "birch": lambda s: abs(s - 0.64) <= 0.05,
    "agglo": lambda s: abs(s - 0.64) <= 0.05,
    "dbscan": lambda s: abs(s - 0.62) <= 0.05,
    "gmm": lambda s: s >= 0.75,
}


@c(5)
def test_silhouette_bands(full_runs):
    passing = []
    for name, m in full_runs.items():
        scores = {a: m.metrics.get(f"silhouette_{a}") for a in BANDS}
        ok = {a: s is not None and BANDS[a](s) for a, s in scores.items()}
        print(name, {a: (None if s is None else round(s, 3)) for a, s in scores.items()}, ok)
        if all(ok.values()):
            passing.append(name)
            m.notes.append(f"this configuration ({name}) meets all five silhouette bands")
            m.write()
    assert passing, "no committed feature configuration meets all five silhouette bands"


# -- 6. property suites ------------------------------------------------------


@c(6)
def test_kmeans_monotone_and_exhaustive_optimum():
    rng = np.random.default_rng(60)
    for trial in range(12):
        n = int(rng.integers(4, 11))
        k = 2 if trial % 2 else 3
        X = rng.normal(size=(n, 2)) * rng.uniform(0.5, 5)
        best = np.inf
        for seed in range(50):
            model, res = kmeans_fit(X, k, seed=seed)
            hist = res.diagnostics["inertia_history"]
            assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(hist, hist[1:]))
            best = min(best, model.inertia)
        assert best == pytest.approx(exhaustive_wcss(X, k), rel=1e-10, abs=1e-12)


@c(6)
def test_gmm_likelihood_monotone_and_responsibilities():
    rng = np.random.default_rng(61)
    for trial in range(20):
        X = np.vstack([rng.normal(rng.uniform(-4, 4, 2), rng.uniform(0.2, 2), size=(40, 2)) for _ in range(3)])
        model, res = gmm_fit(X, int(rng.integers(1, 5)), seed=trial, tol=0.0, max_iter=100)
        hist = res.diagnostics["log_likelihood_history"]
        assert all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))
        assert np.max(np.abs(model.responsibilities.sum(axis=1) - 1)) <= 1e-10


@c(6)
def test_dbscan_permutation_invariance():
    rng = np.random.default_rng(62)
    X = np.vstack([rng.normal(cen, 0.35, size=(60, 2)) for cen in [(0, 0), (3, 0), (0, 3)]] +
                  [rng.uniform(-3, 6, size=(30, 2))])
    base = dbscan_fit(X, eps=0.4, min_samples=5)
    core = np.array([len(nb) for nb in _neigh(X, 0.4)]) >= 5
    core_part = partition(np.where(core, base.labels, -1))
    noise = set(np.flatnonzero(base.labels == -1).tolist())
    for _ in range(20):
        perm = rng.permutation(len(X))
        res = dbscan_fit(X[perm], eps=0.4, min_samples=5)
        back = np.empty_like(res.labels)
        back[perm] = res.labels
        assert partition(np.where(core, back, -1)) == core_part
        assert set(np.flatnonzero(back == -1).tolist()) == noise


def _neigh(X, eps):
    d = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
    return [np.flatnonzero(r <= eps) for r in d]


@c(6)
def test_cf_additivity_exact():
    rng = np.random.default_rng(63)
    # integer coordinates keep every sum exactly representable
    pts = rng.integers(-1000, 1000, size=(1001, 3)).astype(float)
    acc = ClusterFeature.of_point(pts[0])
    for i in range(1, 1001):
        nxt = ClusterFeature.of_point(pts[i])
        merged = acc + nxt
        assert merged.n == acc.n + nxt.n
        assert np.array_equal(merged.ls, acc.ls + nxt.ls)
        assert merged.ss == acc.ss + nxt.ss
        assert merged == nxt + acc
        acc = merged
    assert acc == ClusterFeature.of_points(pts)
    assert acc.radius_sq >= -1e-10


@c(6)
def test_agglomerative_monotone_all_linkages():
    rng = np.random.default_rng(64)
    for _ in range(100):
        X = rng.normal(size=(int(rng.integers(2, 40)), int(rng.integers(1, 4))))
        for method in LINKAGES:
            h = [m.distance for m in linkage_tree(X, method)[0]]
            assert all(b >= a - 1e-12 * max(1.0, a) for a, b in zip(h, h[1:])), method


@c(6)
def test_silhouette_bounds_relabel_scale():
    rng = np.random.default_rng(65)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        X = rng.normal(size=(n, 2))
        labels = rng.integers(0, 4, size=n)
        if len(set(labels.tolist())) < 2:
            labels[0], labels[1] = 0, 1
        base = silhouette(X, labels).per_point
        assert np.all((base >= -1) & (base <= 1))
        perm = rng.permutation(4)
        np.testing.assert_allclose(silhouette(X, perm[labels]).per_point, base, atol=1e-12)
        factor = float(rng.uniform(1e-3, 1e3))
        np.testing.assert_allclose(silhouette(X * factor, labels).per_point, base, atol=1e-10)


@c(6)
def test_eigen_residual_and_pca_trace():
    rng = np.random.default_rng(66)
    for _ in range(100):
        d = int(rng.integers(1, 7))
        B = rng.normal(size=(d, d)) * rng.uniform(1e-3, 1e3)
        C = B + B.T
        vals, V = eigen_symmetric(C)
        norm = np.linalg.norm(C)
        for i in range(d):
            assert np.linalg.norm(C @ V[:, i] - vals[i] * V[:, i]) < 1e-8 * norm
        X = rng.normal(size=(50, d)) @ rng.normal(size=(d, d))
        model, _ = pca_fit_transform(X, d)
        tr = np.trace(covariance_matrix(X))
        assert abs(model.eigenvalues.sum() - tr) <= 1e-10 * max(1.0, tr)


# -- 7. oracle equivalences --------------------------------------------------


@c(7)
def test_silhouette_hand_example():
    rep = silhouette(np.array([[0.0], [1.0], [10.0], [11.0]]), [0, 0, 1, 1])
    assert abs(rep.mean_score - 0.8997) <= 1e-4


@c(7)
def test_covariance_hand_example():
    assert covariance_matrix(np.array([[1, 2], [3, 6], [5, 10]], dtype=float)).tolist() == [[4.0, 8.0], [8.0, 16.0]]


@c(7)
def test_k_distance_brute_force_50():
    rng = np.random.default_rng(70)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        X = rng.normal(size=(n, int(rng.integers(1, 4))))
        k = int(rng.integers(1, n))
        np.testing.assert_allclose(k_distance(X, k), brute_k_distance(X, k), rtol=0, atol=1e-12)


# -- 8. determinism ----------------------------------------------------------


@c(8)
def test_byte_identical_reruns(tmp_path, fixture_csv):
    outs = []
    for name in ("first", "second"):
        cfg = load_config(CONFIGS / "default.yaml", {"input": str(fixture_csv), "output_dir": str(tmp_path / name),
                                                     "seed": 7})
        outs.append(run_pipeline(cfg).root)
    files = ["report.json"] + [f"labels_{a}.csv" for a in ("kmeans", "gmm", "dbscan", "birch", "agglo")]
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
