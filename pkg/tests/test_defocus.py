import numpy as np
import pytest
import scipy.ndimage as ndi

from focalstack.defocus import (
    OpticsParams,
    RefocusBundle,
    coc_diameter,
    coc_to_radius_px,
    export_refocus_bundle,
    hex_blur,
    hexagon_contains,
    hexagonal_kernel,
    layer_blur_radii,
    load_refocus_bundle,
    quantize_depth,
    synthetic_defocus,
)
from focalstack.focus import modified_laplacian
from focalstack.stack_io import DepthMap, FocalStack
from focalstack.synth import make_texture
from oracles import hex_blur_direct, hexagon_mask_shapely


@pytest.fixture
def optics():
    return OpticsParams(
        focal_length_mm=4.2,
        aperture_diameter_mm=1.5,
        focus_distance_mm=1000.0,
        pixel_pitch_um=1.5,
    )


class TestCocDiameter:
    def test_zero_at_focus_distance(self, optics):
        assert coc_diameter(optics, 1000.0) == 0.0

    def test_hand_computed_value(self, optics):
        c = coc_diameter(optics, 2000.0)
        assert np.isclose(c, 1.5 * 4.2 * 1000.0 / (2000.0 * 995.8), rtol=0, atol=1e-15)

    def test_far_limit(self, optics):
        # C -> d f / (l_n - f) as the object recedes.
        limit = 1.5 * 4.2 / 995.8
        assert np.isclose(coc_diameter(optics, 1e12), limit, rtol=1e-8)

    def test_monotone_each_side(self, optics):
        near = [coc_diameter(optics, d) for d in (900.0, 700.0, 500.0, 300.0)]
        far = [coc_diameter(optics, d) for d in (1100.0, 1500.0, 3000.0, 9000.0)]
        assert all(b > a for a, b in zip(near, near[1:]))
        assert all(b > a for a, b in zip(far, far[1:]))

    def test_rejects_nonpositive_distance(self, optics):
        with pytest.raises(ValueError):
            coc_diameter(optics, 0.0)

    def test_optics_validation(self):
        with pytest.raises(ValueError, match="focus distance"):
            OpticsParams(
                focal_length_mm=50.0,
                aperture_diameter_mm=10.0,
                focus_distance_mm=40.0,
                pixel_pitch_um=2.0,
            )

    def test_f_number_conversion(self):
        o = OpticsParams.from_dict(
            {"focal_length_mm": 4.2, "f_number": 2.8, "pixel_pitch_um": 1.5}
        )
        assert np.isclose(o.aperture_diameter_mm, 1.5)


class TestHexagonalKernel:
    def test_radius_zero_identity(self):
        assert np.array_equal(hexagonal_kernel(0), [[1.0]])

    @pytest.mark.parametrize("radius", [1, 2, 3.5, 5, 8])
    def test_normalized(self, radius):
        k = hexagonal_kernel(radius)
        assert abs(k.sum() - 1.0) < 1e-12
        assert k.min() >= 0.0

    def test_sixfold_symmetry_of_membership(self):
        rng = np.random.default_rng(0)
        radius = 4.0
        pts = rng.uniform(-5, 5, (500, 2))
        inside = hexagon_contains(pts[:, 0], pts[:, 1], radius)
        c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
        rot = pts @ np.array([[c, s], [-s, c]]).T
        inside_rot = hexagon_contains(rot[:, 0], rot[:, 1], radius)
        # Away from the boundary the membership is 60-degree invariant.
        h = np.sqrt(3) / 2 * radius
        margins = np.minimum.reduce(
            [
                np.abs(np.abs(pts[:, 1]) - h),
                np.abs(np.abs((np.sqrt(3) * pts[:, 0] + pts[:, 1]) / 2) - h),
                np.abs(np.abs((np.sqrt(3) * pts[:, 0] - pts[:, 1]) / 2) - h),
            ]
        )
        clear = margins > 1e-6
        assert np.array_equal(inside[clear], inside_rot[clear])

    def test_kernel_centrally_symmetric(self):
        for radius in (1, 2, 4, 6):
            k = hexagonal_kernel(radius)
            assert np.array_equal(k, k[::-1, ::-1])

    @pytest.mark.parametrize("radius", [1, 2, 3, 5])
    def test_support_matches_rasterization_oracle(self, radius):
        k = hexagonal_kernel(radius)
        half = (k.shape[0] - 1) // 2
        mask = hexagon_mask_shapely(radius, half)
        assert np.array_equal(k > 0, mask)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            hexagonal_kernel(-1.0)


class TestHexBlur:
    def test_zero_radius_copy(self):
        rng = np.random.default_rng(1)
        img = rng.random((12, 12))
        out = hex_blur(img, 0.0)
        assert np.array_equal(out, img)

    def test_integer_radius_matches_direct_convolution(self):
        rng = np.random.default_rng(2)
        img = rng.random((20, 20))
        out = hex_blur(img, 3)
        ref = ndi.convolve(img, hexagonal_kernel(3), mode="constant")
        assert np.allclose(out, ref, atol=1e-14)

    def test_fractional_radius_blends(self):
        rng = np.random.default_rng(3)
        img = rng.random((16, 16))
        out = hex_blur(img, 2.25)
        ref = hex_blur_direct(img, 2.25, hexagonal_kernel)
        assert np.allclose(out, ref, atol=1e-14)

    def test_continuity_near_integer(self):
        rng = np.random.default_rng(4)
        img = rng.random((16, 16))
        a = hex_blur(img, 2.999999)
        b = hex_blur(img, 3.0)
        assert np.abs(a - b).max() < 1e-4


def two_layer_bundle(size=96, seed=5):
    tex = make_texture(size, size, np.random.default_rng(seed))
    layers = np.ones((size, size), dtype=int)
    s0, s1 = int(0.3 * size), int(0.7 * size)
    layers[s0:s1, s0:s1] = 0  # front square
    optics = OpticsParams(
        focal_length_mm=25.0,
        aperture_diameter_mm=12.5,
        focus_distance_mm=700.0,
        pixel_pitch_um=30.0,
    )
    return RefocusBundle(
        all_in_focus=tex,
        layer_index=layers,
        layer_depths_mm=np.array([700.0, 2500.0]),
        optics=optics,
    )


class TestSyntheticDefocus:
    def test_constant_depth_at_focus_exact(self):
        b = two_layer_bundle()
        flat = RefocusBundle(
            all_in_focus=b.all_in_focus,
            layer_index=np.ones_like(b.layer_index),
            layer_depths_mm=b.layer_depths_mm,
            optics=b.optics,
        )
        out = synthetic_defocus(flat, 1, 1.0)
        assert np.array_equal(out, flat.all_in_focus)

    def test_zero_aperture_exact(self):
        b = two_layer_bundle()
        out = synthetic_defocus(b, 0, 0.0)
        assert np.array_equal(out, b.all_in_focus)

    def test_background_matches_convolution_oracle(self):
        b = two_layer_bundle()
        radii = layer_blur_radii(b, 0, 1.0)
        assert radii[0] == 0.0 and radii[1] > 1.0
        out = synthetic_defocus(b, 0, 1.0)
        ref = hex_blur_direct(b.all_in_focus, radii[1], hexagonal_kernel)
        margin = int(np.ceil(radii[1])) + 2
        bg = b.layer_index == 1
        inner = ndi.binary_erosion(bg, iterations=margin)
        inner[:margin] = inner[-margin:] = False
        inner[:, :margin] = inner[:, -margin:] = False
        assert inner.any()
        assert np.abs(out - ref)[inner].max() <= 1e-6

    def test_mean_intensity_preserved(self):
        b = two_layer_bundle()
        out = synthetic_defocus(b, 0, 1.0)
        inner = (slice(10, -10), slice(10, -10))
        assert abs(out[inner].mean() - b.all_in_focus[inner].mean()) < 0.01 * b.all_in_focus[
            inner
        ].mean()

    def test_focus_layer_stays_sharpest(self):
        b = two_layer_bundle()
        for focus in (0, 1):
            out = synthetic_defocus(b, focus, 1.0)
            ml = modified_laplacian(out, 1)
            erode = lambda m: ndi.binary_erosion(m, iterations=8)
            sharp_focus = ml[erode(b.layer_index == focus)].mean()
            sharp_other = ml[erode(b.layer_index == 1 - focus)].mean()
            assert sharp_focus >= sharp_other

    def test_out_of_range_focus_layer(self):
        b = two_layer_bundle()
        with pytest.raises(ValueError, match="out of range"):
            synthetic_defocus(b, 5, 1.0)

    def test_rgb_image(self):
        b = two_layer_bundle()
        rgb = np.stack([b.all_in_focus] * 3, axis=2)
        brgb = RefocusBundle(
            all_in_focus=rgb,
            layer_index=b.layer_index,
            layer_depths_mm=b.layer_depths_mm,
            optics=b.optics,
        )
        out = synthetic_defocus(brgb, 0, 1.0)
        assert out.shape == rgb.shape
        mono = synthetic_defocus(b, 0, 1.0)
        for ch in range(3):
            assert np.allclose(out[:, :, ch], mono, atol=1e-12)


class TestQuantizeDepth:
    def test_identity_when_layers_equal_frames(self):
        vals = np.array([[0.0, 1.0], [2.0, 3.0]])
        idx, centers = quantize_depth(vals, num_frames=4, num_layers=4)
        assert np.array_equal(idx, vals.astype(int))
        assert np.allclose(centers, [0.0, 1.0, 2.0, 3.0])

    def test_constant_depth_single_layer(self):
        vals = np.full((5, 5), 1.7)
        idx, _ = quantize_depth(vals, num_frames=12, num_layers=6)
        assert len(np.unique(idx)) == 1

    def test_range_clipped(self):
        vals = np.array([[-1.0, 99.0]])
        idx, _ = quantize_depth(vals, num_frames=12, num_layers=5)
        assert idx.min() >= 0 and idx.max() <= 4


class TestBundleExport:
    def test_round_trip(self, tmp_path, optics):
        rng = np.random.default_rng(6)
        aif = rng.random((24, 24, 3))
        depth = DepthMap(values=rng.uniform(0, 4, (24, 24)))
        frames = [np.zeros((24, 24, 3))] * 5
        stack = FocalStack(
            frames=frames, focal_distances_mm=np.array([300.0, 500.0, 900.0, 1600.0, 3000.0])
        )
        bundle = export_refocus_bundle(aif, depth, stack, optics, 5, str(tmp_path))
        again = load_refocus_bundle(str(tmp_path))
        assert np.array_equal(again.layer_index, bundle.layer_index)
        assert np.allclose(again.layer_depths_mm, bundle.layer_depths_mm)
        assert again.optics == optics
        assert np.abs(again.all_in_focus - np.clip(aif, 0, 1)).max() <= 0.5 / 255 + 1e-9

    def test_layer_depths_equal_focal_distances_at_identity(self, tmp_path, optics):
        rng = np.random.default_rng(7)
        aif = rng.random((12, 12))
        depth = DepthMap(values=rng.uniform(0, 2, (12, 12)))
        dists = np.array([400.0, 1000.0, 2500.0])
        stack = FocalStack(frames=[np.zeros((12, 12))] * 3, focal_distances_mm=dists)
        bundle = export_refocus_bundle(aif, depth, stack, optics, 3, str(tmp_path))
        assert np.allclose(bundle.layer_depths_mm, dists)

    def test_constant_depth_single_value(self, tmp_path, optics):
        aif = np.zeros((10, 10))
        depth = DepthMap(values=np.full((10, 10), 2.0))
        stack = FocalStack(
            frames=[aif] * 4, focal_distances_mm=np.array([300.0, 600.0, 1200.0, 2400.0])
        )
        for layers in (2, 5, 9):
            out = tmp_path / f"L{layers}"
            bundle = export_refocus_bundle(aif, depth, stack, optics, layers, str(out))
            assert len(np.unique(bundle.layer_index)) == 1

    def test_version_mismatch_rejected(self, tmp_path, optics):
        import json

        rng = np.random.default_rng(8)
        aif = rng.random((8, 8))
        depth = DepthMap(values=np.zeros((8, 8)))
        stack = FocalStack(frames=[aif] * 2, focal_distances_mm=np.array([300.0, 600.0]))
        export_refocus_bundle(aif, depth, stack, optics, 2, str(tmp_path))
        meta = json.loads((tmp_path / "meta.json").read_text())
        meta["bundle_version"] = 99
        (tmp_path / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(ValueError, match="unsupported bundle version"):
            load_refocus_bundle(str(tmp_path))
