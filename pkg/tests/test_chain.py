import itertools
import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainsnn.chain import (ChainError, ChainTaskSpec, HeterogeneousChainError,
                            InfeasibleDurationsError, build_chain, class_id_of, compute_initial_F,
                            count_classes, enumerate_classes, generate_dataset, load_dataset,
                            sample_durations)
from chainsnn.events import FrameSequence, StreamMeta
from chainsnn.synth import default_archetypes, synth_gesture


@pytest.mark.parametrize("n,l,rep,expected", [(3, 4, True, 81), (3, 6, False, 96),
                                              (1, 1, True, 1), (1, 1, False, 1)])
def test_count_classes(n, l, rep, expected):
    assert count_classes(n, l, rep) == expected


def test_no_valid_chains():
    with pytest.raises(ChainError, match="no valid chains"):
        count_classes(1, 3, False)


def test_enumerate_small_cases():
    assert [(c.class_id, list(c.labels)) for c in enumerate_classes(2, 2, True)] == \
        [(0, [0, 0]), (1, [0, 1]), (2, [1, 0]), (3, [1, 1])]
    assert [(c.class_id, list(c.labels)) for c in enumerate_classes(2, 2, False)] == \
        [(0, [0, 1]), (1, [1, 0])]
    assert len(enumerate_classes(3, 1, False)) == 3


@pytest.mark.parametrize("rep", [True, False])
def test_enumeration_matches_count_exhaustively(rep):
    for n in range(1, 6):
        for l in range(1, 7):
            if n == 1 and l > 1 and not rep:
                continue
            classes = enumerate_classes(n, l, rep)
            assert len(classes) == count_classes(n, l, rep)
            labels = [c.labels for c in classes]
            assert labels == sorted(labels)
            if not rep:
                assert all(a != b for s in labels for a, b in zip(s, s[1:]))
            assert all(class_id_of(c.labels, n, rep) == c.class_id for c in classes)


@pytest.mark.parametrize("args,expected", [((60, 4, 0.5, 0.7), 25.0),
                                           ((60, 6, 0.2, 1.0), 50 / 3)])
def test_compute_initial_F(args, expected):
    assert compute_initial_F(*args) == pytest.approx(expected)


def test_initial_frames_rounding():
    assert ChainTaskSpec(3, 6, False, 0.2, 1.0, 60).initial_frames == 17
    assert ChainTaskSpec(3, 4, True, 0.5, 0.7, 60).initial_frames == 25
    assert ChainTaskSpec(3, 4, True, 1.0, 1.0, 4 * 13).initial_frames == 13


def test_degenerate_interval():
    spec = ChainTaskSpec(3, 4, True, 1.0, 1.0, 4 * 13)
    assert sample_durations(spec, np.random.default_rng(0)) == [13] * 4


def test_duration_bounds_81p():
    spec = ChainTaskSpec(3, 4, True, 0.5, 0.7, 60)
    assert spec.duration_bounds == (13, 17)


def test_infeasible_names_the_side():
    rng = np.random.default_rng(0)
    with pytest.raises(InfeasibleDurationsError, match="lower bound"):
        sample_durations(ChainTaskSpec(2, 2, True, 0.7, 1.0, 3), rng)
    with pytest.raises(InfeasibleDurationsError, match="upper bound"):
        sample_durations(ChainTaskSpec(2, 2, True, 0.5, 0.95, 3), rng)


def test_durations_constraints_and_marginals():
    spec = ChainTaskSpec(3, 4, True, 0.5, 0.7, 60)
    rng = np.random.default_rng(0)
    draws = np.array([sample_durations(spec, rng) for _ in range(10_000)])
    assert (draws.sum(axis=1) == 60).all()
    assert draws.min() >= 13 and draws.max() <= 17
    for g in range(4):
        freq = np.bincount(draws[:, g], minlength=18)[13:18] / len(draws)
        assert (freq >= 0.1).all() and (freq <= 0.4).all()


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.floats(0.05, 1.0), st.floats(0.0, 1.0), st.integers(1, 80),
       st.integers(0, 2**32))
def test_durations_always_satisfy_bounds(L, a1, da, f_total, seed):
    a2 = min(1.0, a1 + da)
    if f_total < L:
        return
    try:
        spec = ChainTaskSpec(2, L, True, a1, a2, f_total)
    except ChainError:
        return
    lo, hi = spec.duration_bounds
    try:
        d = sample_durations(spec, np.random.default_rng(seed))
    except InfeasibleDurationsError:
        assert L * lo > f_total or f_total > L * hi or lo > hi
        return
    assert sum(d) == f_total and all(lo <= v <= hi for v in d)


def _clip(tag, T=4, user="u", lighting="l"):
    v = np.zeros((T, 2, 2, 2), np.float32)
    for t in range(T):
        v[t, 0, 0, 0] = tag * 10 + t
    return FrameSequence(v, {"user": user, "lighting": lighting, "label": tag})


def test_build_chain_hand_concatenation():
    A, B = _clip(1), _clip(2)
    out = build_chain([A, B], [2, 3])
    np.testing.assert_array_equal(out.values[:, 0, 0, 0], [10, 11, 20, 21, 22])
    assert out.meta["boundaries"] == [0, 2, 5]


def test_build_chain_identity():
    A = _clip(3)
    np.testing.assert_array_equal(build_chain([A], [4]).values, A.values)


def test_build_chain_conservation(rng):
    clips = [FrameSequence(rng.random((6, 2, 3, 3)), {"user": "a", "lighting": "b"}) for _ in range(3)]
    d = [2, 5, 4]
    out = build_chain(clips, d)
    assert out.values.sum() == pytest.approx(sum(c.values[:k].sum() for c, k in zip(clips, d)))


def test_build_chain_rejects_mixed_sources():
    with pytest.raises(HeterogeneousChainError, match="heterogeneous chain sources"):
        build_chain([_clip(1), _clip(2, user="other")], [2, 2])
    with pytest.raises(HeterogeneousChainError):
        build_chain([_clip(1), _clip(2, lighting="dark")], [2, 2])
    with pytest.raises(ChainError):
        build_chain([_clip(1), _clip(2)], [2, 5])


def _sources(users, lightings=("l0",), n=2, skip=()):
    out = []
    archs = default_archetypes(n)
    for u in users:
        for li in lightings:
            for g in range(n):
                if (u, li, g) in skip:
                    continue
                out.append(synth_gesture(archs[g], 60, 16, 16, hash((u, li, g)) % 1000,
                                         StreamMeta(u, li, g)))
    return out


def test_generate_dataset_counts(tmp_path):
    spec = ChainTaskSpec(2, 2, True, 0.5, 0.7, 8, seed=3)
    ds = generate_dataset(spec, _sources(["a", "b", "t"]), ["t"], out_dir=tmp_path)
    splits = Counter(s.split for s in ds.manifest.samples)
    assert len(ds.manifest.samples) == 12
    assert splits["test"] == 4
    assert splits["validation"] == 2  # ceil(0.2 * 8)
    assert splits["train"] == 6
    assert all(s.user == "t" for s in ds.manifest.samples if s.split == "test")
    assert all(s.user != "t" for s in ds.manifest.samples if s.split != "test")
    lo, hi = spec.duration_bounds
    for s in ds.manifest.samples:
        assert sum(s.durations) == 8 and all(lo <= d <= hi for d in s.durations)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert set(doc) == {"spec", "classes", "samples"}
    assert doc["classes"]["2"] == [1, 0]
    back = load_dataset(tmp_path)
    for a, b in zip(back.frames, ds.frames):
        np.testing.assert_array_equal(a, b)


def test_generate_dataset_is_byte_identical(tmp_path):
    spec = ChainTaskSpec(2, 2, True, 0.5, 0.7, 8, seed=5)
    src = _sources(["a", "b", "t"])
    generate_dataset(spec, src, ["t"], out_dir=tmp_path / "one")
    generate_dataset(spec, src, ["t"], out_dir=tmp_path / "two")
    assert (tmp_path / "one/manifest.json").read_bytes() == (tmp_path / "two/manifest.json").read_bytes()
    for f in (tmp_path / "one/frames").iterdir():
        assert f.read_bytes() == (tmp_path / "two/frames" / f.name).read_bytes()


def test_generate_dataset_skips_incomplete_groups(caplog):
    spec = ChainTaskSpec(2, 2, True, 0.5, 0.7, 8)
    ds = generate_dataset(spec, _sources(["a", "b", "t"], skip={("b", "l0", 1)}), ["t"])
    assert {s.user for s in ds.manifest.samples} == {"a", "t"}
    assert "missing gestures" in caplog.text


def test_generate_dataset_needs_test_users():
    with pytest.raises(ChainError, match="empty test user set"):
        generate_dataset(ChainTaskSpec(2, 2, True, 0.5, 0.7, 8), _sources(["a"]), [])


def test_multiplier_redraws_durations():
    spec = ChainTaskSpec(2, 2, True, 0.5, 0.7, 8, seed=1)
    ds = generate_dataset(spec, _sources(["a", "t"]), ["t"], multiplier=3)
    assert len(ds.manifest.samples) == 4 * 2 * 3


def test_validation_is_stratified():
    spec = ChainTaskSpec(2, 2, True, 0.5, 0.7, 8, seed=2)
    ds = generate_dataset(spec, _sources([f"u{i}" for i in range(5)] + ["t"]), ["t"])
    val = Counter(s.class_id for s in ds.manifest.samples if s.split == "validation")
    assert sum(val.values()) == 4 and set(val) == {0, 1, 2, 3}
