"""Acceptance criteria, one test per criterion (sub-criteria split where they are
independent). Each test records a PASS/FAIL line, shown in the terminal summary.

Trained desk-scale models are shared across tests within a session. Set
CHAINSNN_CACHE=<dir> to keep their checkpoints between sessions, and
CHAINSNN_EXTENDED=1 to run the long unpredictable-window comparison.
"""

import itertools
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from chainsnn.analysis import attention_profiles, ablate_and_eval, center_of_mass, com_deviation
from chainsnn.chain import ChainTaskSpec, count_classes, enumerate_classes, sample_durations
from chainsnn.engine import (LayerSpec, Network, NetworkConfig, NeuronConfig, gradcheck,
                             gradcheck_config, simulate)
from chainsnn.experiments import build_dataset, cached_run
from chainsnn.tnorm import BNTTParams, bntt_forward, bntt_time_average
from chainsnn.train import no_order_baseline, no_order_baseline_exact

from conftest import ACCEPTANCE_LINES

CEILING = 10 / 27  # no-order ceiling for N = 3, L = 3
SEEDS = (0, 1, 2)


def record(cid: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {cid:<4} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# shared desk-scale runs -------------------------------------------------------

@pytest.fixture(scope="session")
def datasets():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = build_dataset(name)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def run(datasets):
    memo = {}
    cache_dir = os.environ.get("CHAINSNN_CACHE") or None

    def get(variant, seed=0, experiment="A"):
        key = (variant, seed, experiment)
        if key not in memo:
            memo[key] = cached_run(variant, datasets(experiment), seed, experiment, cache_dir)
        return memo[key]

    return get


# 1-5: exact and property criteria ---------------------------------------------

def test_c1_combinatorics():
    t0 = time.perf_counter()
    ok = count_classes(3, 4, True) == 81 and count_classes(3, 6, False) == 96
    for n in range(1, 6):
        for l in range(1, 7):
            for rep in (True, False):
                if n == 1 and l > 1 and not rep:
                    continue
                classes = enumerate_classes(n, l, rep)
                ok &= len(classes) == count_classes(n, l, rep)
                ok &= [c.class_id for c in classes] == list(range(len(classes)))
                ok &= [c.labels for c in classes] == sorted(c.labels for c in classes)
    dt = time.perf_counter() - t0
    record("C1", ok and dt < 1.0, f"81 / 96 classes, enumeration agrees for N<=5, L<=6 ({dt:.2f}s)")


def _brute_force_no_order(n, length):
    seqs = list(itertools.product(range(n), repeat=length))
    total = Fraction(0)
    for s in seqs:
        same = [q for q in seqs if sorted(q) == sorted(s)]
        total += Fraction(1, len(same))
    return total / len(seqs)


def test_c2a_no_order_oracle():
    t0 = time.perf_counter()
    bad = [(n, l) for n in range(1, 5) for l in range(1, 6)
           if no_order_baseline_exact(n, l) != _brute_force_no_order(n, l)]
    dt = time.perf_counter() - t0
    record("C2a", not bad and dt < 10.0,
           f"analytic == brute force for N<=4, L<=5 (mismatches {bad}, {dt:.2f}s)")


def test_c2b_no_order_reference_value():
    p = no_order_baseline(3, 4)
    record("C2b", round(p, 4) == 0.1605,
           f"no_order_baseline(3,4) = {p:.4f} ({no_order_baseline_exact(3, 4)}); reference value 0.1605")


def test_c3_duration_sampling():
    spec = ChainTaskSpec(3, 4, True, 0.5, 0.7, 60, seed=0)
    rng = np.random.default_rng(0)
    draws = np.array([sample_durations(spec, rng) for _ in range(10_000)])
    sums_ok = bool((draws.sum(1) == 60).all())
    range_ok = bool(draws.min() >= 13 and draws.max() <= 17)
    freqs = np.array([np.bincount(draws[:, g], minlength=18)[13:] / len(draws) for g in range(4)])
    marg_ok = bool(((freqs >= 0.1) & (freqs <= 0.4)).all())
    record("C3", sums_ok and range_ok and marg_ok,
           f"sum=60 {sums_ok}, bounds [13,17] {range_ok}, marginals in [{freqs.min():.3f}, {freqs.max():.3f}]")


def test_c4_neuron_dynamics():
    rng = np.random.default_rng(0)
    cfg = NeuronConfig("IF", reset="subtract")
    worst = 0.0
    for _ in range(1000):
        cur = rng.uniform(0, 2.5, size=rng.integers(1, 100))
        s, u = simulate(cur, cfg)
        worst = max(worst, abs(u[-1] + cfg.threshold * s.sum() - cur.sum()) / max(cur.sum(), 1.0))
    conservation = worst <= 8 * np.finfo(np.float64).eps * 100

    lif = NeuronConfig("LIF", leak=0.874, threshold=1e9)
    _, u = simulate(np.zeros(50), lif, u0=1.0)
    expected = np.cumprod(np.full(50, 0.874))
    decay = bool(np.array_equal(u, expected))

    burst = [3.5 * cfg.threshold] + [0.0] * 30
    s_sub, _ = simulate(burst, cfg)
    s_zero, _ = simulate(burst, NeuronConfig("IF", reset="zero"))
    post_sub, post_zero = int(s_sub[1:].sum()), int(s_zero[1:].sum())
    stagnation = post_sub >= 1 and post_zero == 0
    record("C4", conservation and decay and stagnation,
           f"conservation rel err {worst:.1e}, leak decay exact {decay}, "
           f"post-burst spikes sub={post_sub} zero={post_zero}")


def test_c5_gradcheck():
    t0 = time.perf_counter()
    cfg = NetworkConfig((20,), 5, [LayerSpec("dense", 64), LayerSpec("dense", 32)],
                        NeuronConfig("LIF", reset="subtract"), norm="none", T=8, seed=0)
    net = Network(gradcheck_config(cfg))
    rng = np.random.default_rng(0)
    x, y = rng.random((8, 8, 20)), rng.integers(0, 5, 8)
    res = gradcheck(net, x, y, n_probes=50, eps=1e-3, seed=0)
    dt = time.perf_counter() - t0
    record("C5", res.max_rel_error <= 1e-4 and len(res.bptt) == 50 and dt < 120,
           f"max rel error {res.max_rel_error:.2e} over 50 probes, {res.redrawn} redrawn ({dt:.1f}s)")


# 6-8, 10-11: desk-scale experiment A ------------------------------------------

@pytest.mark.experiment
def test_c6_order_blindness(run, datasets):
    net = run("ann-bn").net
    x, _ = datasets("A").split("test")
    x = x[:100]
    rng = np.random.default_rng(0)
    xp = np.stack([s[rng.permutation(len(s))] for s in x])
    a, b = net.predict_scores(x).astype(np.float64), net.predict_scores(xp).astype(np.float64)
    rel = (np.abs(a - b).max(1) / np.abs(a).max(1)).max()
    record("C6", rel <= 1e-5, f"ANN-BN max relative score change under time permutation {rel:.1e} (100 samples)")


@pytest.mark.experiment
def test_c7a_ann_bn_detects_but_not_order(run):
    acc = run("ann-bn").test.accuracy
    lo, hi = CEILING - 0.12, CEILING + 0.10
    record("C7a", lo <= acc <= hi, f"ANN-BN accuracy {acc:.3f} in [{lo:.3f}, {hi:.3f}]")


@pytest.mark.experiment
def test_c7b_snn_learns_order(run):
    acc = run("snn-bn").test.accuracy
    record("C7b", acc >= CEILING + 0.30, f"SNN (IF, zero, BN) accuracy {acc:.3f} >= {CEILING + 0.30:.3f}")


@pytest.mark.experiment
def test_c7c_ann_bntt_learns_order(run):
    acc = run("ann-bntt").test.accuracy
    record("C7c", acc >= CEILING + 0.40, f"ANN-BNTT accuracy {acc:.3f} >= {CEILING + 0.40:.3f}")


@pytest.mark.experiment
def test_c8_reset_study(run):
    sub = [run("if-sub", s).test for s in SEEDS]
    zero = [run("if-zero", s).test for s in SEEDS]
    r_sub = float(np.median([m.r_error for m in sub]))
    r_zero = float(np.median([m.r_error for m in zero]))
    a_sub = float(np.median([m.accuracy for m in sub]))
    a_zero = float(np.median([m.accuracy for m in zero]))
    gap_ok = r_sub - r_zero >= 0.15
    acc_ok = a_zero > a_sub
    record("C8", gap_ok and acc_ok,
           f"median R-error sub {r_sub:.3f} - zero {r_zero:.3f} = {r_sub - r_zero:+.3f} (need >= +0.15); "
           f"median accuracy zero {a_zero:.3f} > sub {a_sub:.3f}: {acc_ok}")


def test_c10a_bntt_statistics_and_averaging():
    rng = np.random.default_rng(0)
    T, C = 4, 6
    p = BNTTParams.init(C, T, dtype=np.float64)
    p.gamma[:] = rng.uniform(-2, 2, (T, C))
    p.beta[:] = rng.normal(size=(T, C))
    dmean = dstd = 0.0
    for t in range(T):
        out = bntt_forward(rng.normal(size=(256, C)), t, p)
        dmean = max(dmean, np.abs(out.mean(0) - p.beta[t]).max())
        dstd = max(dstd, np.abs(out.std(0) - np.abs(p.gamma[t])).max())
    avg = bntt_time_average(p, ["mean", "var", "gamma", "beta"])
    x = rng.normal(size=(8, C))
    outs = [bntt_forward(x, t, avg, "infer") for t in range(T)]
    same = all(np.array_equal(o, outs[0]) for o in outs)
    record("C10a", dmean <= 1e-5 and dstd <= 1e-4 and same,
           f"|mean-beta| {dmean:.1e}, |std-|gamma|| {dstd:.1e}, averaged outputs time-independent {same}")


@pytest.mark.experiment
def test_c10b_ablation_ordering(run, datasets):
    net = run("ann-bntt").net
    x, y = datasets("A").split("test")
    acc = {k: ablate_and_eval(net, k, x, y).accuracy
           for k in ("mean,var,gamma,beta", "beta", "")}
    full, beta, none = acc["mean,var,gamma,beta"], acc["beta"], acc[""]
    record("C10b", full >= beta >= none,
           f"ANN-BNTT ablation accuracy all {full:.3f} >= beta-only {beta:.3f} >= none {none:.3f}")


def test_c11a_center_of_mass():
    m_u, flag = center_of_mass(np.full(60, 0.3))
    x = np.zeros(24)
    x[6] = 1.7
    m_p, pflag = center_of_mass(x)
    record("C11a", m_u == 30.5 and flag and m_p == 7.0 and not pflag,
           f"uniform T=60 -> {m_u} (flag {flag}), point mass at t=7 -> {m_p}")


@pytest.mark.experiment
def test_c11b_trained_tw_attention(run, datasets):
    res = run("ann-tw")
    T = res.net.cfg.T
    dev = com_deviation(attention_profiles(res.net), T)
    frac = float((dev >= 0.15).mean())
    record("C11b", frac >= 0.25,
           f"TW layers with |m-(T+1)/2| >= 0.15T: {frac:.2f} (need >= 0.25); deviations/T {np.round(dev, 3).tolist()}")


# 9: unpredictable windows (extended) ------------------------------------------

@pytest.mark.experiment
@pytest.mark.extended
def test_c9_unpredictable_windows(run):
    def median_acc(variant, experiment):
        return float(np.median([run(variant, s, experiment).test.accuracy for s in SEEDS]))

    drop_ann = median_acc("ann-bntt", "A") - median_acc("ann-bntt", "B")
    drop_snn = median_acc("snn-bntt", "A") - median_acc("snn-bntt", "B")
    record("C9", drop_ann > drop_snn,
           f"accuracy drop A->B: ANN-BNTT {drop_ann:+.3f} > SNN-BNTT {drop_snn:+.3f}")
