import numpy as np
import pytest

from amfusion.data import load_png, to_luminance
from amfusion.errors import ConfigError
from amfusion.synth import (
    FIELD_FLOOR,
    DegradationParams,
    apply_degradation,
    degradation_fields,
    infrared_proxy,
    random_scene,
    read_manifest,
    synthesize_pair,
    write_dataset,
)


def scene(seed=0, size=32):
    return random_scene(size, np.random.default_rng(seed))


class TestDegradationParams:
    def test_defaults_valid(self):
        DegradationParams()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lowlight_scale": 0.0},
            {"lowlight_scale": 1.5},
            {"num_glare": -1},
            {"glare_sigma": 0.0},
            {"glare_peak": 0.0},
            {"glare_peak": 1.5},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            DegradationParams(**kwargs)


class TestDegradationFields:
    def test_lowlight_range(self):
        params = DegradationParams(lowlight_scale=0.5, seed=3)
        lowlight, _, _ = degradation_fields(32, 32, params)
        assert lowlight.min() >= FIELD_FLOOR * 0.5 - 1e-9
        assert lowlight.max() <= 0.5 + 1e-9

    def test_deterministic(self):
        params = DegradationParams(seed=4)
        a = degradation_fields(32, 32, params)
        b = degradation_fields(32, 32, params)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_glare_centers_independent_of_peak(self):
        lo = DegradationParams(glare_peak=0.4, seed=5)
        hi = DegradationParams(glare_peak=0.9, seed=5)
        _, _, centers_lo = degradation_fields(32, 32, lo)
        _, _, centers_hi = degradation_fields(32, 32, hi)
        assert np.array_equal(centers_lo, centers_hi)

    def test_glare_monotone_in_peak(self):
        lo = DegradationParams(glare_peak=0.4, seed=6)
        hi = DegradationParams(glare_peak=0.9, seed=6)
        _, glare_lo, _ = degradation_fields(32, 32, lo)
        _, glare_hi, _ = degradation_fields(32, 32, hi)
        assert (glare_hi >= glare_lo - 1e-12).all()

    def test_glare_nonnegative_and_bounded(self):
        params = DegradationParams(num_glare=3, glare_peak=0.8, seed=7)
        _, glare, _ = degradation_fields(32, 32, params)
        assert glare.min() >= 0.0
        assert glare.max() <= 3 * 0.8 + 1e-9

    def test_zero_glare(self):
        params = DegradationParams(num_glare=0, seed=8)
        _, glare, centers = degradation_fields(32, 32, params)
        assert not glare.any() and centers.shape[0] == 0


class TestApplyDegradation:
    def test_identity_when_forced(self):
        base = scene(1)
        ones = np.ones((32, 32))
        zeros = np.zeros((32, 32))
        out = apply_degradation(base, ones, zeros)
        assert np.abs(out - base).max() < 1e-7

    def test_formula(self):
        base = scene(2)
        rng = np.random.default_rng(9)
        lowlight = 0.2 + 0.8 * rng.random((32, 32))
        glare = 0.5 * rng.random((32, 32))
        out = apply_degradation(base, lowlight, glare)
        want = np.clip(base * lowlight[:, :, None] + glare[:, :, None], 0.0, 1.0)
        assert np.abs(out - want).max() < 1e-12

    def test_glare_is_additive_before_clamp(self):
        base = scene(3)
        params = DegradationParams(num_glare=1, glare_peak=1.0, seed=10)
        lowlight, glare, _ = degradation_fields(32, 32, params)
        with_glare = apply_degradation(base, lowlight, glare)
        without = apply_degradation(base, lowlight, np.zeros_like(glare))
        assert (with_glare >= without - 1e-12).all()


class TestInfraredProxy:
    def test_range_and_shape(self):
        ir = infrared_proxy(scene(4))
        assert ir.shape == (32, 32, 1)
        assert ir.min() >= 0.0 and ir.max() <= 1.0

    def test_invariant_to_degradation_params(self):
        base = scene(5)
        pair_a, _ = synthesize_pair(base, DegradationParams(lowlight_scale=0.3, num_glare=3, seed=1))
        pair_b, _ = synthesize_pair(base, DegradationParams(lowlight_scale=0.9, num_glare=0, seed=2))
        assert np.array_equal(pair_a.infrared, pair_b.infrared)

    def test_monotone_in_luminance(self):
        base = scene(6)
        y = to_luminance(base)[:, :, 0].reshape(-1)
        ir = infrared_proxy(base)[:, :, 0].reshape(-1)
        order = np.argsort(y, kind="stable")
        diffs = np.diff(ir[order])
        assert (diffs >= -1e-7).all()

    def test_constant_scene_handled(self):
        flat = np.full((32, 32, 3), 0.5, dtype=np.float32)
        ir = infrared_proxy(flat)
        assert np.isfinite(ir).all()


class TestSynthesizePair:
    def test_shapes_and_id(self):
        pair, clean = synthesize_pair(scene(7), DegradationParams(seed=11), pair_id="p01")
        assert pair.visible.shape == (32, 32, 3)
        assert pair.infrared.shape == (32, 32, 1)
        assert pair.id == "p01"
        assert clean.shape == (32, 32, 3)

    def test_deterministic(self):
        base = scene(8)
        a, _ = synthesize_pair(base, DegradationParams(seed=12))
        b, _ = synthesize_pair(base, DegradationParams(seed=12))
        assert np.array_equal(a.visible, b.visible)
        assert np.array_equal(a.infrared, b.infrared)

    def test_saturated_glare_present(self):
        params = DegradationParams(
            lowlight_scale=0.5, num_glare=1, glare_sigma=6.0, glare_peak=1.0, seed=13
        )
        pair, _ = synthesize_pair(scene(9, size=64), params)
        assert pair.visible.max() > 0.95


class TestDatasetIO:
    def test_write_and_read_round_trip(self, tmp_path):
        ids = write_dataset(tmp_path, n=3, size=32, seed=0)
        assert len(ids) == 3
        assert read_manifest(tmp_path) == ids
        for pid in ids:
            for suffix in ("vis", "ir", "gt"):
                assert (tmp_path / f"{pid}_{suffix}.png").exists()

    def test_deterministic_bytes(self, tmp_path):
        write_dataset(tmp_path / "a", n=2, size=32, seed=5)
        write_dataset(tmp_path / "b", n=2, size=32, seed=5)
        for name in ("scene0000_vis.png", "scene0001_ir.png", "manifest.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_images_loadable_and_in_range(self, tmp_path):
        ids = write_dataset(tmp_path, n=1, size=32, seed=7)
        vis = load_png(tmp_path / f"{ids[0]}_vis.png")
        assert vis.shape == (32, 32, 3)
        assert vis.min() >= 0.0 and vis.max() <= 1.0

    def test_missing_manifest_empty(self, tmp_path):
        assert read_manifest(tmp_path) == []
