"""Acceptance criteria 1-10, each reporting one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines print even without ``-s``.
Criteria 7 and 8 are full simulations and take several minutes on one core.
"""
import math
import time

import numpy as np
import pytest
from scipy.stats import binomtest

from feelsched import fl, records
from feelsched.dataio import make_shards, shard_partition
from feelsched.diversity import LabelDistribution, gini_simpson, label_distribution
from feelsched.fl import Dataset, GlobalModel, LocalUpdate
from feelsched.instances import random_instance
from feelsched.radio import DeviceRadioState, RadioParams, achievable_rate
from feelsched.scheduler import Device, InfeasibleScheduleError, SchedulerConfig, brute_force_oracle, schedule_das, solve_sub2
from feelsched.simulator import DataConfig, SimConfig, load_data, run_experiment

# closed-form constants for the standalone oracles below
B, N0, S = 1e6, 1e-13, 1e5


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, seconds, budget=None):
        within = budget is None or seconds < budget
        status = "PASS" if ok and within else "FAIL"
        limit = f" (budget {budget:g} s)" if budget else ""
        with capsys.disabled():
            print(f"\ncriterion {n}: {status}  {detail}  [{seconds:.1f} s{limit}]")
        assert ok, detail
        assert within, f"runtime {seconds:.1f} s over budget {budget} s"

    return emit


def test_criterion_1_gini_simpson(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 50))
        p = rng.dirichlet(np.ones(m))
        p = p / math.fsum(p)
        ref = 1.0 - math.fsum(x * x for x in p)
        worst = max(worst, abs(gini_simpson(LabelDistribution(tuple(float(x) for x in p), m)) - ref))
    uniform_exact = all(
        gini_simpson(label_distribution(np.repeat(np.arange(m), 7), m)) == 1.0 - 1.0 / m for m in range(1, 200)
    )
    ok = worst <= 1e-12 and uniform_exact
    report(1, ok, f"max error {worst:.2e} over 1000 draws, uniform exact: {uniform_exact}", time.perf_counter() - t0, 1)


def test_criterion_2_rate_model(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    grid = np.linspace(0.01, 1.0, 100)
    ok, zero_exact = True, True
    for _ in range(100):
        params = RadioParams(bandwidth_hz=10 ** rng.uniform(5, 7), noise_psd=10 ** rng.uniform(-14, -12))
        st = DeviceRadioState((0.0, 0.0), 1.0, 10 ** rng.uniform(-10, -6), rng.uniform(1, 5), 2e9, 20.0)
        r = np.array([achievable_rate(a, params, st) for a in grid])
        tol = 1e-9 * r.max()
        ok &= bool(np.all(np.diff(r) > -tol))
        mid = 0.5 * (r[:-2] + r[2:])  # concave on a uniform grid: r[i] >= mean of neighbours
        ok &= bool(np.all(r[1:-1] >= mid - tol))
        zero_exact &= achievable_rate(0.0, params, st) == 0.0
    report(2, ok and zero_exact, f"monotone+concave on 100 draws: {ok}, rate(0) == 0: {zero_exact}", time.perf_counter() - t0, 1)


# ---------------------------------------------------------------- criterion 3 oracle

def _tables(g, P, t, ticks):
    a = np.arange(1, ticks) / ticks
    snr = g * P / (B * N0)
    up = S / (a[None, :] * B * np.log2(1 + snr[:, None] / a[None, :]))
    return t[:, None] + up, P[:, None] * up


def _grid_small(comp, en, rho, ticks):
    n = comp.shape[0]
    idx = np.meshgrid(*[np.arange(1, ticks) for _ in range(n - 1)], indexing="ij")
    head = np.stack([i.ravel() for i in idx])
    last = ticks - head.sum(axis=0)
    ok = last >= 1
    cols = np.vstack([head[:, ok], last[ok]]) - 1
    rows = np.arange(n)[:, None]
    return float((rho * comp[rows, cols].max(axis=0) + (1 - rho) * en[rows, cols].sum(axis=0)).min())


def _grid_four(comp, en, rho, ticks, best=np.inf):
    # exhaustive over (a1, a2, a3) with a4 the remainder; a row of a2 values is skipped
    # only when even the largest possible a3 and a4 cannot beat the incumbent
    k_all = np.arange(1, ticks)
    for i in range(1, ticks - 2):
        J = np.arange(1, ticks - i - 1)
        r = ticks - i - J
        M = np.maximum(comp[0, i - 1], comp[1, J - 1])
        E = en[0, i - 1] + en[1, J - 1]
        lb = rho * np.maximum(M, np.maximum(comp[2, r - 2], comp[3, r - 2])) + (1 - rho) * (E + en[2, r - 2] + en[3, r - 2])
        keep = lb < best
        if not keep.any():
            continue
        M, E, r = M[keep][:, None], E[keep][:, None], r[keep]
        K = k_all[None, : r.max() - 1]
        L = r[:, None] - K
        ok = L >= 1
        L = np.where(ok, L, 1)
        T = np.maximum(np.maximum(M, comp[2, K - 1]), comp[3, L - 1])
        obj = rho * T + (1 - rho) * (E + en[2, K - 1] + en[3, L - 1])
        best = min(best, float(obj[ok].min()))
    return best


def grid_oracle(g, P, t, rho, ticks=1000):
    """Minimum of rho*T + (1-rho)*sum(E) over the simplex grid with step 1/ticks."""
    comp, en = _tables(g, P, t, ticks)
    if len(g) < 4:
        return _grid_small(comp, en, rho, ticks)
    coarse = ticks // 100  # the 1e-2 grid is a subset of the fine grid and seeds the incumbent
    best = _grid_four(comp[:, coarse - 1 :: coarse], en[:, coarse - 1 :: coarse], rho, 100)
    return _grid_four(comp, en, rho, ticks, best)


def test_criterion_3_sub2_optimality(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, failures = 0.0, 0
    params = RadioParams()
    for n in range(50):
        size = 2 + n % 3
        g, P, t = 10 ** rng.uniform(-9, -6, size), rng.uniform(1, 5, size), rng.uniform(0, 0.25, size)
        rho = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
        ours = solve_sub2([Device(k, g[k], P[k], t[k]) for k in range(size)], params, rho).objective
        ratio = ours / grid_oracle(g, P, t, rho)
        worst = max(worst, ratio)
        failures += ratio > 1.01
    report(3, failures == 0, f"worst objective/grid ratio {worst:.6f} over 50 instances (limit 1.01)", time.perf_counter() - t0, 120)


def test_criterion_4_joint_gap(report):
    t0 = time.perf_counter()
    gaps, seed = [], 0
    while len(gaps) < 25:
        N = 1 + len(gaps) % 2
        inst = random_instance(8, np.random.default_rng(1000 + seed), min_devices=N)
        seed += 1
        try:
            best = brute_force_oracle(inst.devices, inst.index, inst.params, inst.config)
        except InfeasibleScheduleError:
            continue
        das = schedule_das(inst.devices, inst.index, inst.params, inst.config)
        gaps.append(max(best.objective - das.objective, 0.0) / abs(best.objective))
    worst = max(gaps)
    report(4, worst <= 0.05, f"worst relative gap {worst:.4f}, mean {np.mean(gaps):.4f} over 25 instances", time.perf_counter() - t0, 300)


def _numeric_grad(params, dims, X, y, h=1e-5):
    g = np.zeros_like(params)
    for i in range(params.size):
        p = params.copy()
        p[i] += h
        up, _ = fl.loss_and_grad(p, dims, X, y)
        p[i] -= 2 * h
        down, _ = fl.loss_and_grad(p, dims, X, y)
        g[i] = (up - down) / (2 * h)
    return g


def test_criterion_5_gradients(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        dims = (int(rng.integers(2, 6)), int(rng.integers(2, 8)), int(rng.integers(2, 5)))
        X, y = rng.uniform(0, 1, (6, dims[0])), rng.integers(0, dims[2], 6)
        params = fl.init_model(dims, seed).params + rng.normal(0, 0.05, fl.param_count(dims))
        _, grad = fl.loss_and_grad(params, dims, X, y)
        num = _numeric_grad(params, dims, X, y)
        rel = np.abs(grad - num) / np.maximum(np.maximum(np.abs(grad), np.abs(num)), 1e-6)
        worst = max(worst, float(rel.max()))
    report(5, worst < 1e-4, f"max relative gradient error {worst:.2e} on 10 instances", time.perf_counter() - t0, 10)


def test_criterion_6_fedavg(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    base = GlobalModel((4, 3, 2), np.zeros(23))
    w, w1, w2 = rng.normal(size=(3, 23))
    same = fl.fedavg_aggregate(base, [LocalUpdate(k, w, n, 0.0) for k, n in enumerate([5, 1, 9])]).params
    blend = fl.fedavg_aggregate(base, [LocalUpdate(0, w1, 1, 0.0), LocalUpdate(1, w2, 3, 0.0)]).params
    e1 = float(np.max(np.abs(same - w)))
    e2 = float(np.max(np.abs(blend - (0.25 * w1 + 0.75 * w2))))
    report(6, e1 <= 1e-12 and e2 <= 1e-12, f"identity error {e1:.1e}, 1:3 blend error {e2:.1e}", time.perf_counter() - t0)


@pytest.fixture(scope="module")
def dataset():
    return load_data(DataConfig())


@pytest.mark.slow
def test_criterion_7_das_beats_random(report, dataset):
    t0 = time.perf_counter()
    seeds = range(12)
    sc = SchedulerConfig(max_devices=7)
    wins = losses = 0
    das_acc, rnd_acc = [], []
    for seed in seeds:
        a = run_experiment(SimConfig(scheduler="das", rounds=15, scheduler_config=sc, seed=seed), dataset).final_accuracy
        b = run_experiment(SimConfig(scheduler="random", rounds=15, scheduler_config=sc, seed=seed), dataset).final_accuracy
        das_acc.append(a)
        rnd_acc.append(b)
        wins += a > b
        losses += a < b
    p = binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue if wins + losses else 1.0
    detail = (
        f"DAS wins {wins}/{len(seeds)} seeds, sign test p = {p:.4f}; "
        f"mean final accuracy DAS {np.mean(das_acc):.4f} vs random {np.mean(rnd_acc):.4f}"
    )
    report(7, p < 0.05 and np.mean(das_acc) > np.mean(rnd_acc), detail, time.perf_counter() - t0, 900)


@pytest.mark.slow
def test_criterion_8_energy_vs_all(report, dataset):
    t0 = time.perf_counter()
    target = 0.6
    sc = SchedulerConfig(select_count=15)
    energy = {"das": 0.0, "random": 0.0, "all": 0.0}
    reached, fractions = True, []
    for seed in (0, 1):
        for name in energy:
            res = run_experiment(SimConfig(scheduler=name, rounds=60, target_accuracy=target, scheduler_config=sc, seed=seed), dataset)
            reached &= res.rounds_to_target is not None
            energy[name] += res.total_energy_j
            if name == "das":
                fractions.append(res.mean_selected_fraction)
    ratio = energy["das"] / energy["all"]
    ok = reached and ratio <= 0.5 and max(fractions) <= 0.25
    detail = (
        f"target {target} reached by all: {reached}; DAS/all energy {ratio:.4f} (limit 0.5); "
        f"DAS mean selected fraction {max(fractions):.3f} (limit 0.25)"
    )
    report(8, ok, detail, time.perf_counter() - t0, 1200)


def test_criterion_9_determinism(report, dataset, tmp_path):
    t0 = time.perf_counter()
    blobs = []
    for i in range(2):
        res = run_experiment(SimConfig(rounds=3, seed=42), dataset)
        records.write_rounds_csv(records.records(res), tmp_path / f"rounds{i}.csv")
        blobs.append((tmp_path / f"rounds{i}.csv").read_bytes())
    report(9, blobs[0] == blobs[1], f"rounds.csv identical across reruns: {blobs[0] == blobs[1]}", time.perf_counter() - t0)


def test_criterion_10_shards(report):
    t0 = time.perf_counter()
    labels = np.repeat(np.arange(10), 6000)
    ds = Dataset(np.zeros((labels.size, 1)), labels, 10)
    n_shards = make_shards(labels, 50).shape[0]
    disjoint = True
    for seed in range(100):
        part = shard_partition(ds, 50, (1, 30), 100, seed)
        idx = np.concatenate(part.device_indices)
        disjoint &= idx.size == np.unique(idx).size
    ok = n_shards == 1200 and disjoint
    report(10, ok, f"{n_shards} shards of 50; disjoint across 100 seeds: {disjoint}", time.perf_counter() - t0)
