"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Every tolerance is pinned here; the oracles are written independently
of the library code paths they check.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from supclust import (
    BudgetSchedule,
    Clustering,
    EmbeddingSet,
    ImbalanceProfile,
    LabeledPool,
    StrategyConfig,
    SupClust,
    TypiClust,
    cluster_weights,
    kmeans,
    loss_and_gradient,
    make_blobs,
    make_strategy,
    run_al_loop,
    select_target_clusters,
    sup_score,
    typicality,
)
from supclust.cli import main as cli_main
from supclust.strategies import STRATEGY_KINDS, UNCERTAINTY_KINDS


def report(num: int, name: str, ok: bool, detail: str = ""):
    line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}  {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


# The shared benchmark for criteria 7 and 8: 10-class blobs with a 50-fold
# head-to-tail imbalance and moderate overlap (cluster_std = 0.35 x spread).
BENCH_PROFILE = ImbalanceProfile(num_classes=10, max_per_class=300, imbalance_factor=50)
BENCH_DIM = 8
BENCH_SPREAD = 1.0
BENCH_STD = 0.35 * BENCH_SPREAD
BENCH_DATA_SEED = 7


def benchmark_data():
    return make_blobs(
        BENCH_PROFILE, dim=BENCH_DIM, center_spread=BENCH_SPREAD, cluster_std=BENCH_STD,
        seed=BENCH_DATA_SEED,
    )


def accuracy_curves(data, kind, n_seeds):
    schedule = BudgetSchedule.tiny(10, 5)
    rows = []
    for seed in range(n_seeds):
        record = run_al_loop(data, StrategyConfig(kind=kind), schedule, seed=seed)
        rows.append([step.test_accuracy for step in record.steps])
    return np.array(rows)


def test_criterion_1_softmax_weight_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst_rel, worst_sum = 0.0, 0.0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        d = int(rng.integers(1, 65))
        centers = rng.normal(size=(n, d))
        source = int(rng.integers(n))
        for t in (0.1, 1.0, 10.0):
            got = cluster_weights(centers, source, t)
            raw = {
                j: math.exp(-float(np.linalg.norm(centers[source] - centers[j])) / t)
                for j in range(n) if j != source
            }
            total = sum(raw.values())
            for j, value in raw.items():
                expected = value / total
                rel = abs(got.weights[j] - expected) / expected
                worst_rel = max(worst_rel, rel)
            worst_sum = max(worst_sum, abs(sum(got.weights.values()) - 1.0))
    elapsed = time.perf_counter() - start
    ok = worst_rel <= 1e-9 and worst_sum <= 1e-9 and elapsed < 5.0
    report(1, "softmax cluster weights match term-by-term oracle", ok,
           f"max rel err {worst_rel:.2e}, max |sum-1| {worst_sum:.2e}, {elapsed:.1f}s")


def test_criterion_2_typicality_and_sup_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(2002)
    worst_typ, worst_sup = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(20, 501))
        d = int(rng.integers(1, 17))
        X = rng.normal(size=(n, d))
        k = int(rng.integers(1, min(n - 1, 30) + 1))

        # oracle: full distance matrix, sort each row, average the k smallest
        full = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
        np.fill_diagonal(full, np.inf)
        expected_typ = 1.0 / np.sort(full, axis=1)[:, :k].mean(axis=1)
        got_typ = typicality(X, list(range(n)), list(range(n)), k=k).values
        worst_typ = max(worst_typ, float(np.abs(got_typ - expected_typ).max()
                                         / np.abs(expected_typ).max()))
        rel_typ = np.abs(got_typ / expected_typ - 1.0).max()
        worst_typ = max(worst_typ, float(rel_typ))

        # oracle: explicit softmax weights and weighted sum, term by term
        n_clusters = int(rng.integers(2, 9))
        centers = rng.normal(scale=2.0, size=(n_clusters, d))
        source = int(rng.integers(n_clusters))
        others = [j for j in range(n_clusters) if j != source]
        raw = {j: math.exp(-float(np.linalg.norm(centers[source] - centers[j]))) for j in others}
        total = sum(raw.values())
        weighted = np.zeros(n)
        for j in others:
            weighted += (raw[j] / total) * np.sqrt(((X - centers[j]) ** 2).sum(-1))
        expected_sup = 1.0 / weighted
        w = cluster_weights(centers, source, 1.0)
        got_sup = sup_score(X, list(range(n)), centers, source, w).values
        worst_sup = max(worst_sup, float(np.abs(got_sup / expected_sup - 1.0).max()))
    elapsed = time.perf_counter() - start
    ok = worst_typ <= 1e-9 and worst_sup <= 1e-9 and elapsed < 30.0
    report(2, "typicality and SUP match brute-force oracles", ok,
           f"typ rel {worst_typ:.2e}, sup rel {worst_sup:.2e}, {elapsed:.1f}s")


def test_criterion_3_kmeans_fixed_point():
    rng = np.random.default_rng(3003)
    ok = True
    detail = ""
    for case in range(50):
        n = int(rng.integers(30, 201))
        d = int(rng.integers(2, 9))
        n_clusters = int(rng.integers(2, min(13, n)))
        X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
        result = kmeans(X, n_clusters, seed=case, tol=1e-12)

        dists = np.sqrt(((X[:, None, :] - result.centers[None, :, :]) ** 2).sum(-1))
        assigned = dists[np.arange(n), result.assignment]
        nearest_ok = bool((assigned <= dists.min(axis=1) + 1e-12).all())

        means_ok = all(
            np.abs(result.centers[i] - X[result.assignment == i].mean(axis=0)).max() <= 1e-9
            for i in range(n_clusters)
        )
        hist = np.array(result.objective_history)
        monotone_ok = bool((np.diff(hist) <= 1e-9).all())
        if not (nearest_ok and means_ok and monotone_ok):
            ok = False
            detail = f"case {case}: nearest={nearest_ok} means={means_ok} monotone={monotone_ok}"
            break
    report(3, "k-means reaches a fixed point with mean centers", ok, detail)


def test_criterion_4_target_cluster_selection_exhaustive():
    def oracle(sizes, covered, budget):
        order = sorted(range(len(sizes)), key=lambda i: (-sizes[i], i))
        clean = [i for i in order if i not in covered]
        rest = [i for i in order if i in covered]
        return (clean + rest)[:budget]

    rng = np.random.default_rng(4004)
    checked = 0
    ok = True
    detail = ""
    for n_clusters in range(1, 9):
        profiles = [
            rng.integers(1, 12, size=n_clusters),
            np.full(n_clusters, 3),  # all sizes tied
        ]
        for sizes in profiles:
            assignment = np.repeat(np.arange(n_clusters), sizes)
            centers = np.arange(n_clusters, dtype=np.float64)[:, None]
            clustering = Clustering(assignment=assignment, centers=centers, sizes=sizes)
            firsts = {i: int(np.flatnonzero(assignment == i)[0]) for i in range(n_clusters)}
            for pattern in range(2 ** n_clusters):
                covered = {i for i in range(n_clusters) if pattern >> i & 1}
                pool = [firsts[i] for i in covered]
                for budget in range(1, n_clusters + 1):
                    got = select_target_clusters(clustering, pool, budget)
                    expected = oracle(list(sizes), covered, budget)
                    checked += 1
                    if got != expected:
                        ok = False
                        detail = f"sizes={list(sizes)} covered={covered} b={budget}: {got} != {expected}"
                        break
    report(4, "target-cluster selection matches the exclusion rule exactly", ok,
           detail or f"{checked} exhaustive cases")


def test_criterion_5_query_contract_fuzz():
    rng = np.random.default_rng(5005)
    ok = True
    detail = ""
    for case in range(1000):
        kind = STRATEGY_KINDS[case % len(STRATEGY_KINDS)]
        n = int(rng.integers(10, 61))
        d = int(rng.integers(2, 7))
        X = rng.normal(size=(n, d))
        data = EmbeddingSet(X)
        pool_size = int(rng.integers(0, n - 1))
        pool = LabeledPool(rng.choice(n, size=pool_size, replace=False))
        budget = int(rng.integers(1, n - pool_size + 1))
        seed = int(rng.integers(2 ** 32))
        config = StrategyConfig(kind=kind, seed=seed, typicality_k=int(rng.integers(1, 6)))

        proba = None
        if kind in UNCERTAINTY_KINDS:
            classes = int(rng.integers(2, 6))
            proba = rng.dirichlet(np.ones(classes), size=n)

        first = make_strategy(config).select(data, pool, budget, proba=proba)
        second = make_strategy(config).select(data, pool, budget, proba=proba)

        selected = first.selected
        contract = (
            selected.size == budget
            and np.unique(selected).size == budget
            and not set(int(i) for i in selected) & pool.indices
        )
        identical = np.array_equal(selected, second.selected) and (
            first.per_sample_trace == second.per_sample_trace
        )
        if not (contract and identical):
            ok = False
            detail = f"case {case} kind={kind} n={n} pool={pool_size} b={budget}"
            break
    report(5, "1000-case query contract and bitwise reproducibility fuzz", ok, detail)


def test_criterion_6_boundary_proximity_trend():
    start = time.perf_counter()
    rng = np.random.default_rng(6006)
    corners = np.array([[0.0, 0.0], [12.0, 0.0], [0.0, 12.0], [12.0, 12.0]])
    X = np.concatenate([c + rng.normal(0.0, 1.0, size=(250, 2)) for c in corners])
    data = EmbeddingSet(X)

    def mean_foreign_distance(selected, clustering):
        values = []
        for idx in selected:
            own = clustering.assignment[idx]
            foreign = [j for j in range(clustering.n_clusters) if j != own]
            values.append(min(np.linalg.norm(X[idx] - clustering.centers[j]) for j in foreign))
        return float(np.mean(values))

    wins = 0
    for seed in range(10):
        clustering = kmeans(data, 4, seed=seed)
        sup_sel = SupClust(temperature=1.0, seed=seed).select(data, LabeledPool(), 4).selected
        typ_sel = TypiClust(seed=seed).select(data, LabeledPool(), 4).selected
        if mean_foreign_distance(sup_sel, clustering) < mean_foreign_distance(typ_sel, clustering):
            wins += 1
    elapsed = time.perf_counter() - start
    ok = wins >= 9 and elapsed < 10.0
    report(6, "selections sit closer to foreign cluster centers than typiclust-rp", ok,
           f"{wins}/10 seeds, {elapsed:.1f}s")


def test_criterion_7_imbalanced_gain_over_random():
    start = time.perf_counter()
    data = benchmark_data()
    sup = accuracy_curves(data, "supclust", 10).mean(axis=0)
    rnd = accuracy_curves(data, "random", 10).mean(axis=0)
    diff = sup - rnd
    late_failures = int((diff[2:5] < 0).sum())
    elapsed = time.perf_counter() - start
    ok = late_failures <= 1 and diff.mean() >= 0 and elapsed < 180.0
    report(7, "imbalanced blobs: supclust >= random in the tiny regime", ok,
           f"per-step diff {np.round(diff, 4).tolist()}, mean {diff.mean():.4f}, {elapsed:.0f}s")


def test_criterion_8_ablation_ordering():
    start = time.perf_counter()
    data = benchmark_data()
    allowance = 0.005
    full = accuracy_curves(data, "supclust", 20)[:, -1].mean()
    no_sup = accuracy_curves(data, "supclust_no_sup", 20)[:, -1].mean()
    no_typ = accuracy_curves(data, "supclust_no_typicality", 20)[:, -1].mean()
    elapsed = time.perf_counter() - start
    ok = (full >= no_sup - allowance) and (full >= no_typ - allowance) and elapsed < 360.0
    report(8, "both components earn their keep at the final step", ok,
           f"full {full:.4f} vs no-sup {no_sup:.4f} / no-typicality {no_typ:.4f}, {elapsed:.0f}s")


def test_criterion_9_probe_gradient_check():
    rng = np.random.default_rng(9009)
    worst = 0.0
    for _ in range(5):
        X = rng.normal(size=(10, 4))
        y = np.concatenate([np.array([0, 1, 2]), rng.integers(3, size=7)])
        W = rng.normal(scale=0.5, size=(3, 4))
        b = rng.normal(scale=0.5, size=3)
        _, grad_w, grad_b = loss_and_gradient(W, b, X, y, l2=1e-4, num_classes=3)

        eps = 1e-6

        def loss_at(Wv, bv):
            return loss_and_gradient(Wv, bv, X, y, 1e-4, 3)[0]

        for flat_index in range(W.size):
            i, j = divmod(flat_index, W.shape[1])
            up, down = W.copy(), W.copy()
            up[i, j] += eps
            down[i, j] -= eps
            fd = (loss_at(up, b) - loss_at(down, b)) / (2 * eps)
            worst = max(worst, abs(grad_w[i, j] - fd) / max(abs(fd), 1e-8))
        for i in range(3):
            up, down = b.copy(), b.copy()
            up[i] += eps
            down[i] -= eps
            fd = (loss_at(W, up) - loss_at(W, down)) / (2 * eps)
            worst = max(worst, abs(grad_b[i] - fd) / max(abs(fd), 1e-8))

    from supclust import LinearProbe

    probe = LinearProbe(epochs=30).fit(rng.normal(size=(12, 4)), rng.integers(3, size=12), num_classes=3)
    proba = probe.predict_proba(rng.normal(size=(40, 4)))
    rows_ok = bool(np.abs(proba.sum(axis=1) - 1.0).max() <= 1e-9)

    ok = worst <= 1e-5 and rows_ok
    report(9, "analytic gradients match central differences; proba rows sum to 1", ok,
           f"max rel grad err {worst:.2e}")


def test_criterion_10_end_to_end_reproducibility(tmp_path, monkeypatch):
    monkeypatch.setenv("SUPCLUST_THREADS", "2")
    runner = CliRunner()
    dataset = tmp_path / "bench.supc"
    gen = runner.invoke(cli_main, [
        "gen-data", "--classes", "4", "--max-per-class", "40", "--imbalance", "4",
        "--dim", "4", "--cluster-std", "0.25", "--seed", "7", "-o", str(dataset),
    ])
    assert gen.exit_code == 0, gen.output

    outputs = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        result = runner.invoke(cli_main, [
            "simulate", str(dataset), "--strategies", "supclust,random",
            "--regime", "tiny", "--steps", "2", "--seeds", "2",
            "--probe-epochs", "60", "-o", str(out),
        ])
        assert result.exit_code == 0, result.output
        outputs.append((out / "summary.csv").read_bytes())

    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    report(10, "repeated simulate runs produce byte-identical summary.csv", ok,
           f"{len(outputs[0])} bytes")
