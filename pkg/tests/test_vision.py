import colorsys
import json
import math
from collections import deque

import numpy as np
import pytest
from scipy import ndimage

from armsort.errors import InvalidArgument
from armsort.reference import DETECTION_TABLE
from armsort.vision import (Calibration, CalibrationMode, Color, ColorRules, ImageReadError,
                            RasterImage, classify_pixel, color_masks, connected_components,
                            detect_objects, fit_affine, hsv_array, load_scene, median_filter_3x3,
                            project, read_image, render_scene, rgb_to_hsv, save_scene, unproject,
                            write_image)
from scenes import synthetic_scene


def table_pixels():
    return np.array([(r[2], r[3]) for r in DETECTION_TABLE])


def table_worlds():
    return np.array([(r[4], r[5]) for r in DETECTION_TABLE])


def bfs_components(mask):
    """4-connected components by breadth-first search: list of (area, (x, y))."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    out = []
    for y0 in range(h):
        for x0 in range(w):
            if mask[y0, x0] and not seen[y0, x0]:
                seen[y0, x0] = True
                q, pts = deque([(y0, x0)]), []
                while q:
                    y, x = q.popleft()
                    pts.append((y, x))
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        v, u = y + dy, x + dx
                        if 0 <= v < h and 0 <= u < w and mask[v, u] and not seen[v, u]:
                            seen[v, u] = True
                            q.append((v, u))
                p = np.array(pts, dtype=float)
                out.append((len(pts), (p[:, 1].mean(), p[:, 0].mean())))
    return out


class TestHsv:
    @pytest.mark.parametrize("rgb, hsv", [((255, 0, 0), (0, 1, 1)), ((0, 0, 255), (240, 1, 1)),
                                          ((128, 128, 128), (0, 0, 128 / 255)),
                                          ((0, 255, 0), (120, 1, 1)), ((0, 0, 0), (0, 0, 0))])
    def test_examples(self, rgb, hsv):
        assert rgb_to_hsv(*rgb) == pytest.approx(hsv, abs=1e-12)

    def test_against_colorsys(self, rng):
        px = rng.integers(0, 256, size=(2000, 3))
        arr = hsv_array(px)
        for (r, g, b), got in zip(px, arr):
            h, s, v = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
            assert got == pytest.approx((h * 360 % 360, s, v), abs=1e-9)
            assert rgb_to_hsv(r, g, b) == pytest.approx(tuple(got), abs=1e-9)

    def test_hue_range(self, rng):
        h = hsv_array(rng.integers(0, 256, size=(5000, 3)))[:, 0]
        assert h.min() >= 0 and h.max() < 360


class TestClassify:
    @pytest.mark.parametrize("hsv, color", [((10, 0.5, 0.5), Color.RED), ((100, 0.5, 0.5), Color.BLUE),
                                            ((125, 0.5, 0.5), None), ((300, 0.5, 0.5), Color.RED),
                                            ((145, 0.5, 0.5), Color.GREEN), ((20, 0.5, 0.5), Color.RED),
                                            ((10, 0.05, 0.5), None), ((10, 0.5, 0.05), None),
                                            ((240, 1, 1), None)])
    def test_examples(self, hsv, color):
        assert classify_pixel(hsv) is color

    def test_masks_agree_with_pixelwise_rule(self, rng):
        img = RasterImage(rng.integers(0, 256, size=(30, 40, 3)))
        masks = color_masks(img)
        hsv = hsv_array(img.pixels)
        for y in range(30):
            for x in range(40):
                c = classify_pixel(tuple(hsv[y, x]))
                for color, m in masks.items():
                    assert m[y, x] == (color is c)

    def test_bad_band(self):
        with pytest.raises(InvalidArgument):
            ColorRules(hue_bands={Color.RED: ((20.0, 10.0),)})


class TestMedian:
    def test_all_ones(self):
        assert median_filter_3x3(np.ones((5, 7), bool)).all()

    def test_isolated_pixel_cleared(self):
        m = np.zeros((5, 5), bool)
        m[2, 2] = True
        assert not median_filter_3x3(m).any()

    def test_solid_block_preserved(self):
        assert median_filter_3x3(np.ones((3, 3), bool)).all()

    def test_block_in_image_corner_keeps_border_corners(self):
        m = np.zeros((6, 6), bool)
        m[:3, :3] = True
        out = median_filter_3x3(m)
        assert out[0, 0] and out[0, 2] and out[2, 0]
        assert not out[2, 2]

    def test_against_scipy(self, rng):
        for _ in range(50):
            m = rng.random((int(rng.integers(1, 30)), int(rng.integers(1, 30)))) < rng.random()
            ref = ndimage.median_filter(m.astype(np.uint8), size=3, mode="nearest").astype(bool)
            np.testing.assert_array_equal(median_filter_3x3(m), ref)

    def test_idempotent_on_discs(self, rng):
        yy, xx = np.mgrid[0:120, 0:120]
        for _ in range(100):
            r = rng.uniform(7, 25)
            cx, cy = rng.uniform(r + 5, 115 - r, 2)
            once = median_filter_3x3((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r)
            np.testing.assert_array_equal(median_filter_3x3(once), once)


class TestComponents:
    def test_99_rejected_100_kept(self):
        m = np.zeros((40, 40), bool)
        m[2:11, 2:13] = True
        assert connected_components(m) == []
        m[20:30, 20:30] = True
        [(area, c)] = connected_components(m)
        assert area == 100 and c == pytest.approx((24.5, 24.5))

    def test_square_at_origin(self):
        m = np.zeros((20, 20), bool)
        m[:10, :10] = True
        assert connected_components(m) == [(100, (4.5, 4.5))]

    def test_diagonal_blobs_are_separate(self):
        m = np.zeros((30, 30), bool)
        m[:10, :10] = True
        m[10:20, 10:20] = True
        assert [a for a, _ in connected_components(m)] == [100, 100]

    def test_min_size_validation(self):
        with pytest.raises(InvalidArgument):
            connected_components(np.zeros((3, 3), bool), 0)

    def test_against_bfs(self, rng):
        for _ in range(30):
            m = rng.random((25, 35)) < rng.uniform(0.2, 0.7)
            got = sorted(connected_components(m, 1))
            ref = sorted(bfs_components(m))
            assert len(got) == len(ref)
            for (a, c), (b, d) in zip(got, ref):
                assert a == b and c == pytest.approx(d, abs=1e-9)


class TestDetect:
    def test_single_red_disc(self):
        objs = detect_objects(render_scene([(Color.RED, 152, 149)], radius=20))
        assert len(objs) == 1 and objs[0].color is Color.RED
        assert math.dist(objs[0].centroid_px, (152, 149)) <= 0.5
        assert objs[0].area >= 100

    def test_blank(self):
        assert detect_objects(RasterImage.blank()) == []

    def test_reference_layout(self):
        discs = [(Color(c), xp, yp) for _, c, xp, yp, _, _ in DETECTION_TABLE]
        objs = detect_objects(render_scene(discs))
        assert [o.label for o in objs] == [r[0].replace("M", "R").replace("H", "G") for r in DETECTION_TABLE]
        for o, row in zip(objs, DETECTION_TABLE):
            assert o.color is Color(row[1])
            assert math.dist(o.centroid_px, row[2:4]) <= 0.5
            assert math.dist(o.world, row[4:6]) <= 0.05

    def test_synthetic_scenes(self):
        for seed in range(10):
            img, discs = synthetic_scene(np.random.default_rng(seed))
            objs = detect_objects(img)
            assert len(objs) == len(discs)
            for color, cx, cy, _, _ in discs:
                best = min(objs, key=lambda o: math.dist(o.centroid_px, (cx, cy)))
                assert best.color is color and math.dist(best.centroid_px, (cx, cy)) <= 0.5

    def test_order_is_color_then_x(self, rng):
        img, _ = synthetic_scene(rng, 12)
        objs = detect_objects(img)
        keys = [(o.color.rank, o.centroid_px[0]) for o in objs]
        assert keys == sorted(keys)


class TestProjection:
    def test_paper_linear_centre(self):
        assert project((320, 240), Calibration.paper_linear()) == (25.0, 18.75)

    def test_affine_rows(self):
        cal = Calibration(scale=(0.0625, 0.0625), offset=(-0.5025, 44.0))
        assert project((152.20, 148.73), cal) == pytest.approx((-10.99, 49.70), abs=0.01)
        assert project((321.66, 271.90), cal) == pytest.approx((-0.40, 42.01), abs=0.01)

    def test_fit_to_table(self):
        cal = fit_affine(table_pixels(), table_worlds())
        assert cal.mode is CalibrationMode.AFFINE and cal.flip_y
        res = np.array([project(p, cal) for p in table_pixels()]) - table_worlds()
        assert np.abs(res).max() < 0.05
        assert cal.scale == pytest.approx((0.0625, 0.0625), abs=1e-4)

    def test_default_is_the_table_fit(self):
        fitted = fit_affine(table_pixels(), table_worlds())
        assert Calibration().scale == pytest.approx(fitted.scale, abs=1e-6)
        assert Calibration().offset == pytest.approx(fitted.offset, abs=1e-5)

    @pytest.mark.parametrize("cal", [Calibration(), Calibration.paper_linear(),
                                     Calibration(scale=(0.1, -0.07), offset=(3, -2), flip_y=False)])
    def test_round_trip(self, cal, rng):
        for p in rng.uniform(-100, 800, size=(200, 2)):
            assert unproject(project(p, cal), cal) == pytest.approx(tuple(p), abs=1e-9)

    def test_zero_scale_rejected(self):
        with pytest.raises(InvalidArgument):
            Calibration(scale=(0.0, 0.1))


class TestIo:
    @pytest.mark.parametrize("suffix", [".ppm", ".png"])
    def test_image_round_trip(self, tmp_path, rng, suffix):
        img = RasterImage(rng.integers(0, 256, size=(12, 17, 3)))
        write_image(img, tmp_path / f"x{suffix}")
        np.testing.assert_array_equal(read_image(tmp_path / f"x{suffix}").pixels, img.pixels)

    def test_ppm_is_binary_p6(self, tmp_path):
        write_image(RasterImage.blank(4, 3), tmp_path / "x.ppm")
        assert (tmp_path / "x.ppm").read_bytes().startswith(b"P6")

    def test_corrupt_image(self, tmp_path):
        (tmp_path / "bad.ppm").write_bytes(b"P6\n garbage")
        with pytest.raises(ImageReadError):
            read_image(tmp_path / "bad.ppm")

    def test_scene_round_trip(self, tmp_path):
        objs = load_scene_from_table(tmp_path)
        save_scene(objs, tmp_path / "again.json")
        assert load_scene(tmp_path / "again.json") == objs

    def test_scene_by_world_coordinates(self, tmp_path):
        (tmp_path / "s.json").write_text('[{"color": "blue", "x_cm": 1.5, "y_cm": 44}]')
        [o] = load_scene(tmp_path / "s.json")
        assert o.color is Color.BLUE and o.world == (1.5, 44.0) and o.label == "B1"

    def test_malformed_scene(self, tmp_path):
        (tmp_path / "s.json").write_text('[{"colour": "blue"}]')
        with pytest.raises(ImageReadError):
            load_scene(tmp_path / "s.json")


def load_scene_from_table(tmp_path):
    rows = [{"label": r[0], "color": r[1], "x_px": r[2], "y_px": r[3]} for r in DETECTION_TABLE]
    (tmp_path / "table.json").write_text(json.dumps({"objects": rows}))
    objs = load_scene(tmp_path / "table.json")
    assert len(objs) == 12 and objs[0].label == "M1"
    return objs
