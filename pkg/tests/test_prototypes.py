"""Enrollment, cosine scoring, detection, and threshold calibration."""

import io
import math

import numpy as np
import pytest

from edgespot.errors import ParameterError, ShapeError, StoreError
from edgespot.prototypes import (
    Prototype,
    PrototypeStore,
    calibrate_threshold,
    detect,
    enroll,
    load_store,
    max_score,
    save_store,
    score,
)


def unit(i, dim=64, scale=1.0):
    v = np.zeros(dim, dtype=np.float32)
    v[i] = scale
    return v


class TestEnroll:
    def test_single_shot_is_identity(self, rng):
        e = rng.standard_normal(64).astype(np.float32)
        p = enroll("word", [e])
        np.testing.assert_allclose(p.vector, e, atol=1e-7)
        assert p.shots == 1

    def test_repeated_shot_is_identity(self, rng):
        e = rng.standard_normal(64).astype(np.float32)
        p = enroll("word", [e] * 5)
        np.testing.assert_allclose(p.vector, e, atol=1e-6)
        assert p.shots == 5

    def test_two_basis_vectors_average(self):
        p = enroll("word", [unit(0), unit(1)])
        want = np.zeros(64, dtype=np.float32)
        want[0] = want[1] = 0.5
        np.testing.assert_allclose(p.vector, want, atol=1e-7)

    def test_mean_is_linear_over_concatenation(self, rng):
        a = [rng.standard_normal(64).astype(np.float32) for _ in range(3)]
        b = [rng.standard_normal(64).astype(np.float32) for _ in range(5)]
        joint = enroll("w", a + b).vector
        split = (3 * enroll("w", a).vector + 5 * enroll("w", b).vector) / 8.0
        np.testing.assert_allclose(joint, split, atol=1e-6)

    def test_empty_and_mismatched_inputs_rejected(self, rng):
        with pytest.raises(ParameterError):
            enroll("word", [])
        with pytest.raises(ShapeError):
            enroll("word", [rng.standard_normal(64), rng.standard_normal(63)])
        with pytest.raises(ParameterError):
            enroll("", [unit(0)])
        with pytest.raises(ParameterError):
            enroll("two words", [unit(0)])


class TestScore:
    def test_self_similarity_is_one(self, rng):
        e = rng.standard_normal(64).astype(np.float32)
        assert score(e, Prototype("w", e, 1)) == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal_vectors_score_zero(self):
        assert score(unit(0), Prototype("w", unit(1), 1)) == pytest.approx(0.0, abs=1e-7)

    def test_hand_computed_angle(self):
        e = np.zeros(64, dtype=np.float32)
        e[0] = e[1] = 1.0
        got = score(e, Prototype("w", unit(0), 1))
        assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)

    def test_zero_norm_rejected(self):
        with pytest.raises(ParameterError):
            score(np.zeros(64, dtype=np.float32), Prototype("w", unit(0), 1))
        with pytest.raises(ParameterError):
            score(unit(0), Prototype("w", np.zeros(64, dtype=np.float32), 1))

    def test_scale_invariance(self, rng):
        e = rng.standard_normal(64).astype(np.float32)
        p = Prototype("w", rng.standard_normal(64).astype(np.float32), 1)
        base = score(e, p)
        for k in (1e-4, 0.5, 7.3, 1e4):
            assert score(k * e, p) == pytest.approx(base, abs=1e-5)


class TestDetect:
    def test_exact_match_is_accepted(self):
        store = PrototypeStore(threshold=0.5)
        store.add(Prototype("marvin", unit(3), 2))
        d = detect(unit(3), store)
        assert d.accepted and d.label == "marvin"
        assert d.score == pytest.approx(1.0, abs=1e-6)

    def test_threshold_above_cosine_ceiling_rejects_everything(self):
        store = PrototypeStore(threshold=1.5)
        store.add(Prototype("marvin", unit(3), 2))
        d = detect(unit(3), store)
        assert not d.accepted
        assert d.label == "marvin"  # argmax still reported

    def test_three_way_argmax(self):
        """Scores {0.2, 0.9, 0.4} against a 0.5 threshold pick the middle."""
        store = PrototypeStore(threshold=0.5)
        q = unit(0)
        for label, c in (("a", 0.2), ("b", 0.9), ("c", 0.4)):
            v = math.sqrt(max(0.0, 1.0 - c * c))
            proto = np.zeros(64, dtype=np.float32)
            proto[0], proto[1] = c, v  # cos(angle to q) = c by construction
            store.add(Prototype(label, proto, 1))
        d = detect(q, store)
        assert d.label == "b" and d.accepted
        assert d.score == pytest.approx(0.9, abs=1e-6)
        assert d.scores["a"] == pytest.approx(0.2, abs=1e-6)
        assert d.scores["c"] == pytest.approx(0.4, abs=1e-6)

    def test_best_score_equals_table_max(self, rng):
        for _ in range(50):
            store = PrototypeStore(threshold=0.0)
            for i in range(int(rng.integers(1, 8))):
                store.add(Prototype(f"w{i}",
                                    rng.standard_normal(64).astype(np.float32), 1))
            q = rng.standard_normal(64).astype(np.float32)
            d = detect(q, store)
            assert d.score == max(d.scores.values())
            assert max_score(q, store) == d.score

    def test_ties_break_to_smallest_label(self):
        store = PrototypeStore(threshold=0.0)
        store.add(Prototype("zeta", unit(0), 1))
        store.add(Prototype("alpha", unit(0), 1))
        assert detect(unit(0), store).label == "alpha"

    def test_decisions_are_scale_invariant(self, rng):
        store = PrototypeStore(threshold=0.3)
        for i in range(4):
            store.add(Prototype(f"w{i}", rng.standard_normal(64).astype(np.float32), 1))
        q = rng.standard_normal(64).astype(np.float32)
        base = detect(q, store)
        for k in (0.001, 42.0):
            d = detect(k * q, store)
            assert d.label == base.label and d.accepted == base.accepted
            assert d.score == pytest.approx(base.score, abs=1e-5)

    def test_raising_threshold_never_accepts_more(self, rng):
        protos = [Prototype(f"w{i}", rng.standard_normal(64).astype(np.float32), 1)
                  for i in range(5)]
        for _ in range(50):
            q = rng.standard_normal(64).astype(np.float32)
            lo, hi = sorted(rng.uniform(-1.0, 1.0, size=2))
            s_lo = PrototypeStore(threshold=lo)
            s_hi = PrototypeStore(threshold=hi)
            for p in protos:
                s_lo.add(p)
                s_hi.add(p)
            if detect(q, s_hi).accepted:
                assert detect(q, s_lo).accepted

    def test_empty_store_and_duplicates_rejected(self):
        store = PrototypeStore()
        with pytest.raises(StoreError):
            detect(unit(0), store)
        store.add(Prototype("w", unit(0), 1))
        with pytest.raises(StoreError):
            store.add(Prototype("w", unit(1), 1))

    def test_store_threshold_floor_validated(self):
        with pytest.raises(ParameterError):
            PrototypeStore(threshold=-1.5)
        with pytest.raises(ParameterError):
            PrototypeStore(metric="euclidean")


class TestCalibrateThreshold:
    def test_degenerate_single_value_steps_above_it(self):
        theta = calibrate_threshold([0.1] * 10, 0.01)
        assert theta > 0.1
        assert theta == np.nextafter(0.1, np.inf)

    def test_ten_point_grid_at_ten_percent(self):
        scores = [round(0.1 * i, 1) for i in range(1, 11)]
        assert calibrate_threshold(scores, 0.10) == pytest.approx(1.0)

    def test_ten_point_grid_at_fifty_percent(self):
        scores = [round(0.1 * i, 1) for i in range(1, 11)]
        assert calibrate_threshold(scores, 0.50) == pytest.approx(0.6)

    def test_quantile_definition_on_random_sets(self, rng):
        """theta admits at most n*far scores, and every smaller observed
        score admits strictly more."""
        for _ in range(300):
            n = int(rng.integers(1, 60))
            scores = np.round(rng.uniform(-1, 1, size=n), 2)
            far = float(rng.uniform(0.01, 0.99))
            theta = calibrate_threshold(scores, far)
            assert np.count_nonzero(scores >= theta) <= n * far
            below = scores[scores < theta]
            if below.size:
                s = below.max()
                assert np.count_nonzero(scores >= s) > math.floor(n * far)

    def test_order_invariance(self, rng):
        scores = list(rng.uniform(-1, 1, size=25))
        a = calibrate_threshold(scores, 0.2)
        b = calibrate_threshold(list(reversed(scores)), 0.2)
        assert a == b

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ParameterError):
            calibrate_threshold([], 0.1)
        with pytest.raises(ParameterError):
            calibrate_threshold([0.5], 0.0)
        with pytest.raises(ParameterError):
            calibrate_threshold([0.5], 1.0)
        with pytest.raises(ParameterError):
            calibrate_threshold([np.nan], 0.1)


class TestStorePersistence:
    def build_store(self, rng, n=4):
        store = PrototypeStore(threshold=0.37)
        for i in range(n):
            vecs = [rng.standard_normal(64).astype(np.float32) for _ in range(3)]
            store.add(enroll(f"word{i}", vecs))
        return store

    def test_round_trip_preserves_fields(self, rng, tmp_path):
        store = self.build_store(rng)
        path = tmp_path / "protos.txt"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.metric == store.metric
        assert loaded.threshold == pytest.approx(store.threshold, abs=1e-9)
        assert loaded.labels == store.labels
        for label in store.labels:
            a, b = store.prototypes[label], loaded.prototypes[label]
            assert a.shots == b.shots
            np.testing.assert_allclose(a.vector, b.vector, atol=1e-7)

    def test_round_trip_preserves_scores(self, rng):
        store = self.build_store(rng)
        buf = io.StringIO()
        save_store(store, buf)
        loaded = load_store(io.StringIO(buf.getvalue()))
        for _ in range(20):
            q = rng.standard_normal(64).astype(np.float32)
            assert max_score(q, loaded) == pytest.approx(max_score(q, store),
                                                         abs=1e-6)

    def test_bad_documents_are_named(self, rng):
        with pytest.raises(StoreError, match="header"):
            load_store(io.StringIO("not a store\n"))
        store = self.build_store(rng, n=2)
        buf = io.StringIO()
        save_store(store, buf)
        lines = buf.getvalue().splitlines()
        truncated = "\n".join(
            ln if not ln.startswith("proto word1") else " ".join(ln.split()[:30])
            for ln in lines
        )
        with pytest.raises(StoreError, match="word1"):
            load_store(io.StringIO(truncated))
        duped = "\n".join(lines + [lines[-1]])
        with pytest.raises(StoreError, match="duplicate"):
            load_store(io.StringIO(duped))

    def test_empty_store_refuses_to_save(self):
        with pytest.raises(StoreError):
            save_store(PrototypeStore(), io.StringIO())
