import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from sievecast import (
    ConfigError,
    DataMatrix,
    PartitionPlan,
    PartitionRunResult,
    ScreenConfig,
    config_context,
    first_stage_run,
    integrate,
    make_partition,
    two_stage_screen,
)
from sievecast.twostage import ADMISSION_LEVEL

NORMAL = ScreenConfig(threshold="normal")


def fake_run(selected):
    sel = np.array(sorted(selected), dtype=np.intp)
    return PartitionRunResult(1, sel, sel[:0], [], "no_new_predictors", 1)


def test_partition_worked_example():
    plan = make_partition(68_000, 200, 0.03, np.random.default_rng(0))
    assert plan.k == 2
    assert sorted(len(g) for g in plan.groups) == [34_000, 34_000]


def test_partition_single_group():
    plan = make_partition(500, 30, 0.03, np.random.default_rng(0))
    assert plan.k == 1
    np.testing.assert_array_equal(plan.groups[0], np.arange(500))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20_000), st.integers(3, 60), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_partition_invariants(p, n, delta, seed):
    plan = make_partition(p, n, delta, np.random.default_rng(seed))
    allidx = np.concatenate(plan.groups)
    np.testing.assert_array_equal(np.sort(allidx), np.arange(p))
    sizes = [len(g) for g in plan.groups]
    assert max(sizes) - min(sizes) <= 1
    assert max(sizes) <= n ** (2 - delta)
    assert plan.max_group_size == -(-p // plan.k)


def test_partition_rejects_bad_delta():
    with pytest.raises(ConfigError):
        make_partition(10, 10, 2.5, np.random.default_rng(0))


def test_first_stage_all_empty():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((50, 120))
    y = rng.standard_normal(50)
    plan = PartitionPlan([np.arange(i, 120, 4) for i in range(4)])
    run = first_stage_run(y, A, plan, ScreenConfig(threshold="normal", alpha=0.01), rng)
    assert run.selected.size == 0
    assert len(run.rounds) == 1
    assert run.stop_reason == "no_new_predictors"


def test_planted_signal_group_wins():
    rng = np.random.default_rng(2)
    n, p = 80, 200
    A = rng.standard_normal((n, p))
    groups = [np.arange(g * 50, (g + 1) * 50) for g in range(4)]
    beta = np.zeros(p)
    beta[[105, 110, 120]] = [1.5, -1.2, 1.0]
    y = A @ beta + 0.5 * rng.standard_normal(n)
    plan = PartitionPlan(groups)
    run = first_stage_run(y, A, plan, NORMAL, rng)
    assert run.rounds[0].winner == 2
    # brute force: refit each group's first-round hits and compare adjusted R^2
    adj = []
    for g in groups:
        hits = oracles.db_sis(y, A, g, 0.5)
        adj.append(oracles.adj_r2(y, A[:, hits]))
    assert int(np.argmax(adj)) == 2
    assert run.rounds[0].winning_adj_r2 == pytest.approx(max(adj), abs=1e-10)
    assert run.rounds[0].selection_sizes == [len(oracles.db_sis(y, A, g, 0.5)) for g in groups]


def test_first_stage_invariants():
    rng = np.random.default_rng(3)
    n, p = 60, 900
    A = rng.standard_normal((n, p))
    y = A[:, :6] @ rng.uniform(0.5, 1.5, 6) + rng.standard_normal(n)
    plan = make_partition(p, n, 0.5, rng)
    assert plan.k > 1
    run = first_stage_run(y, A, plan, ScreenConfig(threshold="normal", delta=0.5), rng)
    assert set(run.kernel.tolist()) <= set(run.selected.tolist())
    sizes = [r.kernel_size for r in run.rounds]
    assert len(sizes) > 1
    # every round the run continued past enlarged the kernel
    prev = [0] + sizes
    assert all(sizes[i] > prev[i] for i in range(len(sizes) - 1))
    adj = [r.winning_adj_r2 for r in run.rounds[:-1]]
    assert all(b > a for a, b in zip(adj, adj[1:]))
    assert len(run.rounds) <= n


def test_first_stage_rounds_match_reference():
    rng = np.random.default_rng(4)
    n, p = 70, 300
    A = rng.standard_normal((n, p))
    y = A[:, [3, 77, 150, 222]] @ [1.0, 1.2, -0.8, 1.1] + 0.7 * rng.standard_normal(n)
    groups = [np.arange(0, 100), np.arange(100, 200), np.arange(200, 300)]
    run = first_stage_run(y, A, PartitionPlan(groups), NORMAL, rng)

    # literal re-implementation of the round loop
    kernel, selected, resp = [], set(), y
    for rnd in run.rounds:
        cands = []
        for g in groups:
            pool = [j for j in g if j not in kernel]
            hits = oracles.db_sis(resp, A, pool, 0.5) if pool else []
            selected |= set(hits)
            cands.append((oracles.adj_r2(y, A[:, sorted(kernel + hits)]), hits))
        win = int(np.argmax([c[0] for c in cands]))
        assert rnd.winner == win
        assert rnd.winning_adj_r2 == pytest.approx(cands[win][0], abs=1e-9)
        kernel = sorted(kernel + cands[win][1])
        assert rnd.kernel_size == len(kernel)
        resp = oracles.ols_residuals(y, A[:, kernel])
    assert run.selected.tolist() == sorted(selected)
    assert run.kernel.tolist() == kernel


def test_integrate_counting_example():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((40, 4))
    y = A[:, 1] + A[:, 2] + A[:, 3] + 0.1 * rng.standard_normal(40)
    res = integrate([fake_run({1, 2}), fake_run({1, 3}), fake_run({1, 2})], y, A)
    assert res.psi_counts == {1: 3, 2: 2, 3: 1}
    assert res.admitted_by_level[3].tolist() == [1]
    assert 3 not in res.final
    assert set(res.admitted_by_level) == {3, 2}
    assert set(res.final.tolist()) == {1, 2}


def test_integrate_identical_runs():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    res = integrate([fake_run({2, 5, 7}), fake_run({2, 5, 7})], y, A)
    assert res.final.tolist() == [2, 5, 7]
    assert list(res.admitted_by_level) == [2]


def test_integrate_requires_two_runs():
    with pytest.raises(ConfigError):
        integrate([fake_run({1})], np.arange(5.0), np.eye(5))


def reference_integrate(runs, y, A):
    T = len(runs)
    counts = {}
    for r in runs:
        for j in r:
            counts[j] = counts.get(j, 0) + 1
    final = sorted(j for j, c in counts.items() if c == T)
    resid = oracles.ols_residuals(y, A[:, final]) if final else y - y.mean()
    for level in range(T - 1, 1, -1):
        pool = sorted(j for j, c in counts.items() if c == level)
        if not pool:
            continue
        adm = [j for j in pool if stats.linregress(A[:, j], resid).pvalue < ADMISSION_LEVEL]
        final = sorted(final + adm)
        resid = oracles.ols_residuals(y, A[:, final]) if final else y - y.mean()
    return final


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_integrate_matches_reference(seed, T):
    rng = np.random.default_rng(seed)
    n, p = 60, 25
    A = rng.standard_normal((n, p))
    y = A[:, :5].sum(axis=1) + rng.standard_normal(n)
    runs = [set(rng.choice(p, size=rng.integers(0, 10), replace=False).tolist()) | {0}
            for _ in range(T)]
    res = integrate([fake_run(r) for r in runs], y, A)
    assert res.final.tolist() == reference_integrate(runs, y, A)
    counts = res.psi_counts
    assert all(counts[j] >= 2 for j in res.final)
    assert set(res.admitted_by_level[T].tolist()) <= set(res.final.tolist())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(range(5)))
def test_integrate_order_invariant(seed, order):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((50, 30))
    y = A[:, :4].sum(axis=1) + rng.standard_normal(50)
    runs = [fake_run(set(rng.choice(30, size=8, replace=False).tolist())) for _ in range(5)]
    a = integrate(runs, y, A)
    b = integrate([runs[i] for i in order], y, A)
    assert a.final.tolist() == b.final.tolist()
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_integrate_budget_truncation():
    rng = np.random.default_rng(7)
    n = 8
    A = rng.standard_normal((n, 20))
    y = rng.standard_normal(n)
    res = integrate([fake_run(range(10)), fake_run(range(10))], y, A)
    assert res.final.size == n - 2


def test_two_stage_k1_reduction():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((50, 200))
    y = A[:, :3].sum(axis=1) + rng.standard_normal(50)
    with pytest.warns(UserWarning):
        res = two_stage_screen(y, A, ScreenConfig(threshold="normal", T=2), rng)
    assert all(r.k == 1 for r in res.runs)
    assert all(len(r.rounds[0].selection_sizes) == 1 for r in res.runs)
    # both runs see the same single group, so they agree and integration is their common set
    assert res.runs[0].selected.tolist() == res.runs[1].selected.tolist()
    assert res.selected.tolist() == res.runs[0].selected.tolist()


def test_two_stage_deterministic_and_worker_free():
    rng = np.random.default_rng(9)
    n, p = 40, 4000
    A = rng.standard_normal((n, p))
    y = A[:, :5].sum(axis=1) + rng.standard_normal(n)
    X = DataMatrix(A)
    cfg = ScreenConfig(T=4, bootstrap_reps=60, seed=1)
    with config_context(n_jobs=1):
        a = json.dumps(two_stage_screen(y, X, cfg).to_dict())
    with config_context(n_jobs=4):
        b = json.dumps(two_stage_screen(y, X, cfg).to_dict())
    assert a == b
    assert json.loads(a)["runs"][0]["k"] == 3


def test_two_stage_requires_T2():
    with pytest.raises(ConfigError):
        two_stage_screen(np.arange(10.0), np.eye(10), ScreenConfig(T=1))
