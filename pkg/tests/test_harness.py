import math

import numpy as np
import pytest

from dtclust.harness import Design, run_design, run_replication, summarize, worker_count
from dtclust.tuning import TuneGrid

SMALL_GRID = TuneGrid(ranks=(2,), sparsity=(0.5, 1.0), lambdas=(0.0, 0.1))


def test_replication_deterministic():
    des = Design("3d", N=12, d=8, mu=1.5)
    a = run_replication(des, 0, base_seed=3, grid=SMALL_GRID)
    b = run_replication(des, 0, base_seed=3, grid=SMALL_GRID)
    assert a.seed == 3
    assert (a.recovery_error, a.clustering_error, a.s, a.lam) == \
        (b.recovery_error, b.clustering_error, b.s, b.lam)


def test_gap_selected_k():
    des = Design("3d", N=20, d=8, mu=2.0)
    r = run_replication(des, 0, grid=SMALL_GRID, K=None, k_max=6, gap_b=10)
    assert 1 <= r.K <= 6


def test_parallel_matches_serial():
    des = Design("2d", N=12, d=8, mu=2.0)
    serial = run_design(des, 3, base_seed=1, workers=1, grid=SMALL_GRID)
    parallel = run_design(des, 3, base_seed=1, workers=2, grid=SMALL_GRID)
    assert [r.rep for r in parallel] == [0, 1, 2]
    for a, b in zip(serial, parallel):
        assert a.recovery_error == b.recovery_error
        assert a.clustering_error == b.clustering_error


def test_summarize():
    des = Design("2d", N=12, d=8, mu=2.0)
    res = run_design(des, 2, workers=1, grid=SMALL_GRID)
    s = summarize(res)
    vals = [r.recovery_error for r in res]
    assert s["recovery_error"] == pytest.approx(np.mean(vals))
    assert s["recovery_error_se"] == pytest.approx(np.std(vals, ddof=1) / math.sqrt(2))
    assert math.isnan(summarize(res[:1])["recovery_error_se"])
    assert set(res[0].as_row()) >= {"rep", "seed", "recovery_error", "clustering_error", "seconds"}


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DTNS_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.delenv("DTNS_THREADS")
    assert worker_count() >= 1


def test_unknown_design():
    with pytest.raises(ValueError):
        Design("4d").generate(0)
