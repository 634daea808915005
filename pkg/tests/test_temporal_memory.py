import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htm_recog.errors import DimensionError, EmptyClassError, ParseError
from htm_recog.spatial_pooler import FeatureMap, read_spfm
from htm_recog.temporal_memory import (
    ClassMap,
    TmConfig,
    binarize,
    from_htmc_bytes,
    new_class_map,
    read_class_map,
    to_htmc_bytes,
    train_class,
    train_update,
    write_binary_class_map,
    write_class_map,
)

from oracles import clamped_fold


def fm(rows):
    return FeatureMap(np.array(rows, dtype=np.uint8))


class TestTmConfig:
    @pytest.mark.parametrize("kwargs", [{"delta": 0.0}, {"delta": 1.5}, {"sigma": -1}, {"init": 2}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TmConfig(**kwargs)


class TestNewClassMap:
    def test_uniform_fill(self):
        cmap = new_class_map(0, 2, 2, TmConfig(init=0.5))
        assert cmap.weights.tolist() == [[0.5, 0.5], [0.5, 0.5]]
        assert cmap.train_count == 0

    def test_zero_init(self):
        assert not new_class_map(0, 3, 2, TmConfig(init=0.0)).weights.any()

    def test_cell_count_of_120_by_160_map(self):
        cmap = new_class_map(0, 160, 120, TmConfig())
        assert cmap.weights.size == 19200
        assert 13 * cmap.weights.size == 13 * 19200

    def test_bad_dimensions(self):
        with pytest.raises(DimensionError):
            new_class_map(0, 0, 2, TmConfig())


class TestTrainUpdate:
    def test_increment(self):
        cfg = TmConfig(delta=0.01)
        out = train_update(new_class_map(0, 1, 1, cfg), fm([[1]]), cfg)
        assert out.weights[0, 0] == pytest.approx(0.51)
        assert out.train_count == 1

    def test_clamp_at_floor(self):
        cfg = TmConfig(delta=0.01, init=0.0)
        out = train_update(new_class_map(0, 1, 1, cfg), fm([[0]]), cfg)
        assert out.weights[0, 0] == 0.0

    def test_clamp_at_ceiling(self):
        cfg = TmConfig(delta=0.3, init=0.9)
        out = train_update(new_class_map(0, 1, 1, cfg), fm([[1]]), cfg)
        assert out.weights[0, 0] == 1.0

    def test_thirteen_increments(self):
        cfg = TmConfig(delta=0.01)
        cmap = new_class_map(0, 1, 1, cfg)
        for _ in range(13):
            cmap = train_update(cmap, fm([[1]]), cfg)
        want = clamped_fold(0.5, [1] * 13, 0.01)
        assert cmap.weights[0, 0] == want
        assert cmap.weights[0, 0] == pytest.approx(0.63, abs=1e-12)

    def test_input_map_untouched(self):
        cfg = TmConfig()
        cmap = new_class_map(0, 2, 1, cfg)
        train_update(cmap, fm([[1, 0]]), cfg)
        assert cmap.weights.tolist() == [[0.5, 0.5]] and cmap.train_count == 0

    def test_dimension_mismatch(self):
        cfg = TmConfig()
        with pytest.raises(DimensionError):
            train_update(new_class_map(0, 2, 2, cfg), fm([[1, 0, 1]]), cfg)


class TestBinarize:
    def test_straddle(self):
        b = binarize(ClassMap(3, np.array([[0.63, 0.37]])), TmConfig(sigma=0.5))
        assert b.bits.tolist() == [[1, 0]] and b.class_id == 3

    def test_exact_threshold_is_one(self):
        assert binarize(ClassMap(0, np.array([[0.5]])), TmConfig(sigma=0.5)).bits[0, 0] == 1

    def test_untrained_map_all_ones(self):
        cfg = TmConfig()
        assert binarize(new_class_map(0, 4, 4, cfg), cfg).bits.all()

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, w, bump, sigma):
        cfg = TmConfig(sigma=sigma)
        lo = binarize(ClassMap(0, np.array([[w]])), cfg).bits[0, 0]
        hi = binarize(ClassMap(0, np.array([[min(1.0, w + bump)]])), cfg).bits[0, 0]
        assert hi >= lo


class TestTrainClass:
    def test_single_image(self):
        cmap = train_class([fm([[1, 1], [1, 1]])], 0, TmConfig(delta=0.1, init=0.5))
        np.testing.assert_allclose(cmap.weights, 0.6)

    def test_empty(self):
        with pytest.raises(EmptyClassError):
            train_class([], 4, TmConfig())

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionError):
            train_class([fm([[1]]), fm([[1, 0]])], 0, TmConfig())

    def test_closed_form(self):
        rng = np.random.default_rng(0)
        z, delta, init = 9, 0.02, 0.5
        bits = rng.integers(0, 2, (z, 3, 4))
        cmap = train_class([fm(b) for b in bits], 0, TmConfig(delta=delta, init=init))
        ones = bits.sum(axis=0)
        np.testing.assert_allclose(cmap.weights, init + (2 * ones - z) * delta, atol=1e-12)
        assert cmap.train_count == z

    def test_thirteen_image_envelope(self):
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, (13, 8, 8))
        cmap = train_class([fm(b) for b in bits], 0, TmConfig(delta=0.01, init=0.5))
        assert cmap.weights.min() >= 0.37 - 1e-12
        assert cmap.weights.max() <= 0.63 + 1e-12

    def test_order_independent_away_from_bounds(self):
        rng = np.random.default_rng(2)
        maps = [fm(rng.integers(0, 2, (4, 4))) for _ in range(10)]
        cfg = TmConfig(delta=0.01)
        a = train_class(maps, 0, cfg).weights
        b = train_class(maps[::-1], 0, cfg).weights
        np.testing.assert_allclose(a, b, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=40),
           st.floats(0.001, 1.0), st.floats(0, 1))
    def test_clamped_and_matches_scalar_fold(self, seq, delta, init):
        cfg = TmConfig(delta=delta, init=init)
        cmap = train_class([fm([[b]]) for b in seq], 0, cfg)
        w = cmap.weights[0, 0]
        assert 0.0 <= w <= 1.0
        assert w == pytest.approx(clamped_fold(init, seq, delta), abs=1e-12)


class TestPersistence:
    def test_header_layout(self):
        cmap = ClassMap(7, np.array([[0.25, 0.5, 1.0]]), 13)
        data = to_htmc_bytes(cmap)
        assert len(data) == 24 + 3 * 8
        assert data[:4] == b"HTMC"
        fields = [int.from_bytes(data[i : i + 4], "little") for i in range(4, 24, 4)]
        assert fields == [1, 7, 3, 1, 13]
        assert np.frombuffer(data[24:], "<f8").tolist() == [0.25, 0.5, 1.0]

    def test_roundtrip(self, tmp_path):
        cmap = ClassMap(2, np.random.default_rng(0).random((5, 6)), 4)
        write_class_map(tmp_path / "c.htmc", cmap)
        back = read_class_map(tmp_path / "c.htmc")
        assert back.class_id == 2 and back.train_count == 4
        assert np.array_equal(back.weights, cmap.weights)

    def test_bad_payload(self):
        data = to_htmc_bytes(ClassMap(0, np.zeros((2, 2))))
        with pytest.raises(ParseError):
            from_htmc_bytes(data[:-8])
        with pytest.raises(ParseError):
            from_htmc_bytes(b"NOPE" + data[4:])

    def test_binary_export_uses_feature_format(self, tmp_path):
        b = binarize(ClassMap(0, np.array([[0.7, 0.2], [0.5, 0.1]])), TmConfig())
        write_binary_class_map(tmp_path / "b.spfm", b)
        assert read_spfm(tmp_path / "b.spfm").bits.tolist() == [[1, 0], [1, 0]]
