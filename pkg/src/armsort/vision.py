"""HSV colour segmentation, blob extraction and pixel-to-table projection."""
from __future__ import annotations

import colorsys
import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import ArmsortError, InvalidArgument

IMAGE_SIZE = (640, 480)
MIN_COMPONENT_SIZE = 100


class ImageReadError(ArmsortError, OSError):
    pass


class Color(str, enum.Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"

    @property
    def rank(self) -> int:
        return _COLOR_ORDER.index(self)

    @property
    def initial(self) -> str:
        return self.value[0].upper()


_COLOR_ORDER = (Color.RED, Color.GREEN, Color.BLUE)


@dataclass
class RasterImage:
    """8-bit RGB image stored row-major as an (height, width, 3) array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise InvalidArgument(f"expected (h, w, 3) pixels, got shape {px.shape}")
        self.pixels = px.astype(np.uint8, copy=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width=IMAGE_SIZE[0], height=IMAGE_SIZE[1], fill=(200, 200, 200)) -> RasterImage:
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = fill
        return cls(px)


@dataclass(frozen=True)
class ColorRules:
    hue_bands: Mapping[Color, tuple[tuple[float, float], ...]] = field(default_factory=lambda: {
        Color.RED: ((0.0, 20.0), (280.0, 360.0)),
        Color.GREEN: ((130.0, 160.0),),
        Color.BLUE: ((90.0, 120.0),),
    })
    s_min: float = 0.1
    v_min: float = 0.1

    def __post_init__(self):
        for color, bands in self.hue_bands.items():
            for lo, hi in bands:
                if not 0.0 <= lo <= hi <= 360.0:
                    raise InvalidArgument(f"bad hue band ({lo}, {hi}) for {color}")


@dataclass(frozen=True)
class DetectedObject:
    color: Color
    centroid_px: tuple[float, float] | None
    area: int | None
    world: tuple[float, float]
    label: str = ""


class CalibrationMode(str, enum.Enum):
    PAPER_LINEAR = "paper-linear"
    AFFINE = "affine"


@dataclass(frozen=True)
class Calibration:
    """Pixel to table mapping.

    paper-linear: ``x = (w_o / w_m) * x_m``, ``y = (h_o / h_m) * y_m``.
    affine: ``x = s_x (x_m - w_m / 2) + c_x``, ``y = -s_y (y_m - h_m / 2) + c_y``
    (the sign on y is dropped when ``flip_y`` is false).
    """

    mode: CalibrationMode = CalibrationMode.AFFINE
    image_size: tuple[int, int] = IMAGE_SIZE
    field_size: tuple[float, float] = (50.0, 37.5)
    scale: tuple[float, float] = (0.0625037, 0.0625092)
    offset: tuple[float, float] = (-0.499197, 43.999213)
    flip_y: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", CalibrationMode(self.mode))
        if self.mode is CalibrationMode.PAPER_LINEAR:
            if 0.0 in self.field_size:
                raise InvalidArgument("field size must be nonzero")
        elif 0.0 in self.scale:
            raise InvalidArgument("calibration scale must be nonzero")

    @classmethod
    def paper_linear(cls, field_size=(50.0, 37.5), image_size=IMAGE_SIZE) -> Calibration:
        return cls(CalibrationMode.PAPER_LINEAR, tuple(image_size), tuple(field_size))


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone HSV; hue in degrees [0, 360), zero for greys."""
    h, s, v = hsv_array(np.array([[r, g, b]], dtype=float))[0]
    return float(h), float(s), float(v)


def hsv_array(rgb) -> np.ndarray:
    """Vectorised hexcone conversion of an (..., 3) array of 8-bit RGB values."""
    c = np.asarray(rgb, dtype=float) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = c.max(axis=-1)
    mn = c.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(mx == r, ((g - b) / safe) % 6.0,
                 np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = np.where(delta > 0, 60.0 * h, 0.0) % 360.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


def classify_pixel(hsv, rules: ColorRules = ColorRules()) -> Color | None:
    h, s, v = hsv
    if s < rules.s_min or v < rules.v_min:
        return None
    for color in _COLOR_ORDER:
        for lo, hi in rules.hue_bands.get(color, ()):
            if lo <= h <= hi:
                return color
    return None


def color_masks(img: RasterImage, rules: ColorRules = ColorRules()) -> dict[Color, np.ndarray]:
    """One boolean mask per colour class; a pixel joins the first class that matches."""
    hsv = hsv_array(img.pixels)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    free = (s >= rules.s_min) & (v >= rules.v_min)
    masks = {}
    for color in _COLOR_ORDER:
        m = np.zeros(h.shape, dtype=bool)
        for lo, hi in rules.hue_bands.get(color, ()):
            m |= (h >= lo) & (h <= hi)
        m &= free
        free &= ~m
        masks[color] = m
    return masks


def median_filter_3x3(mask) -> np.ndarray:
    """Binary 3x3 median with edge-replicated borders (majority of nine)."""
    m = np.asarray(mask).astype(np.uint8)
    p = np.pad(m, 1, mode="edge")
    h, w = m.shape
    total = sum(p[i:i + h, j:j + w].astype(np.int16) for i in range(3) for j in range(3))
    return total >= 5


def connected_components(mask, min_size: int = MIN_COMPONENT_SIZE) -> list[tuple[int, tuple[float, float]]]:
    """4-connected blobs as (area, (x, y) centroid) in raster-scan order of first pixel."""
    if min_size < 1:
        raise InvalidArgument("min_size must be >= 1")
    m = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(m)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    area = ndimage.sum_labels(m, labels, idx)
    rows, cols = np.indices(m.shape)
    sx = ndimage.sum_labels(cols, labels, idx)
    sy = ndimage.sum_labels(rows, labels, idx)
    return [(int(a), (float(x / a), float(y / a)))
            for a, x, y in zip(area, sx, sy) if a >= min_size]


def project(pixel, cal: Calibration = Calibration()) -> tuple[float, float]:
    xm, ym = (float(v) for v in pixel)
    wm, hm = cal.image_size
    if cal.mode is CalibrationMode.PAPER_LINEAR:
        return cal.field_size[0] / wm * xm, cal.field_size[1] / hm * ym
    sy = -cal.scale[1] if cal.flip_y else cal.scale[1]
    return (cal.scale[0] * (xm - wm / 2) + cal.offset[0],
            sy * (ym - hm / 2) + cal.offset[1])


def unproject(world, cal: Calibration = Calibration()) -> tuple[float, float]:
    xo, yo = (float(v) for v in world)
    wm, hm = cal.image_size
    if cal.mode is CalibrationMode.PAPER_LINEAR:
        return xo * wm / cal.field_size[0], yo * hm / cal.field_size[1]
    sy = -cal.scale[1] if cal.flip_y else cal.scale[1]
    return (xo - cal.offset[0]) / cal.scale[0] + wm / 2, (yo - cal.offset[1]) / sy + hm / 2


def fit_affine(pixels, worlds, image_size=IMAGE_SIZE, flip_y: bool = True) -> Calibration:
    """Per-axis least-squares fit of the centred affine model."""
    px = np.asarray(pixels, dtype=float)
    wo = np.asarray(worlds, dtype=float)
    if px.shape != wo.shape or px.ndim != 2 or px.shape[1] != 2 or len(px) < 2:
        raise InvalidArgument("need at least two (pixel, world) pairs")
    centred = px - np.array(image_size, dtype=float) / 2
    scale, offset = [], []
    for axis in range(2):
        a = np.column_stack([centred[:, axis], np.ones(len(px))])
        (slope, icpt), *_ = np.linalg.lstsq(a, wo[:, axis], rcond=None)
        if axis == 1 and flip_y:
            slope = -slope
        scale.append(float(slope))
        offset.append(float(icpt))
    return Calibration(CalibrationMode.AFFINE, tuple(image_size), scale=tuple(scale),
                       offset=tuple(offset), flip_y=flip_y)


def detect_objects(img: RasterImage, rules: ColorRules = ColorRules(),
                   cal: Calibration = Calibration(),
                   min_size: int = MIN_COMPONENT_SIZE) -> list[DetectedObject]:
    """Classify, median-filter, extract blobs and project their centroids.

    Output is ordered by colour (red, green, blue), then x, then y.
    """
    found = []
    for color, mask in color_masks(img, rules).items():
        for area, c in connected_components(median_filter_3x3(mask), min_size):
            found.append(DetectedObject(color, c, area, project(c, cal)))
    return label_objects(found)


def _order_key(obj: DetectedObject):
    pos = obj.centroid_px if obj.centroid_px is not None else obj.world
    return obj.color.rank, pos[0], pos[1]


def label_objects(objects: Sequence[DetectedObject]) -> list[DetectedObject]:
    ordered = sorted(objects, key=_order_key)
    counts: dict[Color, int] = {}
    out = []
    for obj in ordered:
        counts[obj.color] = counts.get(obj.color, 0) + 1
        label = obj.label or f"{obj.color.initial}{counts[obj.color]}"
        out.append(DetectedObject(obj.color, obj.centroid_px, obj.area, obj.world, label))
    return out


# Hues chosen inside the default bands.
RENDER_HUES = {Color.RED: 0.0, Color.GREEN: 145.0, Color.BLUE: 105.0}


def render_scene(objects, radius: float = 16.0, size=IMAGE_SIZE,
                 background=(200, 200, 200)) -> RasterImage:
    """Draw filled discs; ``objects`` holds (color, x_px, y_px) triples."""
    img = RasterImage.blank(size[0], size[1], background)
    yy, xx = np.mgrid[0:size[1], 0:size[0]]
    for color, cx, cy in objects:
        color = Color(color)
        rgb = colorsys.hsv_to_rgb(RENDER_HUES[color] / 360.0, 0.85, 0.85)
        disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
        img.pixels[disc] = [round(255 * c) for c in rgb]
    return img


def read_image(path) -> RasterImage:
    try:
        with Image.open(path) as im:
            return RasterImage(np.asarray(im.convert("RGB")))
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageReadError(f"cannot decode image {path}: {exc}") from exc


def write_image(img: RasterImage, path) -> None:
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".ppm", ".pnm", "") else None
    Image.fromarray(img.pixels, "RGB").save(path, format=fmt)


def load_scene(path, cal: Calibration = Calibration()) -> list[DetectedObject]:
    """Read a JSON scene listing objects by pixel (x_px, y_px) or table (x_cm, y_cm) position."""
    try:
        data = json.loads(Path(path).read_text())
        entries = data["objects"] if isinstance(data, dict) else data
        objs = []
        for e in entries:
            color = Color(e["color"])
            if "x_px" in e:
                px = (float(e["x_px"]), float(e["y_px"]))
                objs.append(DetectedObject(color, px, None, project(px, cal), e.get("label", "")))
            else:
                objs.append(DetectedObject(color, None, None, (float(e["x_cm"]), float(e["y_cm"])),
                                           e.get("label", "")))
    except (OSError, UnicodeDecodeError) as exc:
        raise ImageReadError(f"cannot read scene {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ImageReadError(f"malformed scene {path}: {exc}") from exc
    return label_objects(objs)


def save_scene(objects: Sequence[DetectedObject], path) -> None:
    rows = []
    for o in objects:
        row = {"label": o.label, "color": o.color.value}
        if o.centroid_px is not None:
            row.update(x_px=o.centroid_px[0], y_px=o.centroid_px[1])
        else:
            row.update(x_cm=o.world[0], y_cm=o.world[1])
        rows.append(row)
    Path(path).write_text(json.dumps({"objects": rows}, indent=2) + "\n")


def write_detections_csv(objects: Sequence[DetectedObject], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["no", "object", "color", "x_px", "y_px", "x_cm", "y_cm", "area"])
        for i, o in enumerate(objects, 1):
            px = o.centroid_px or (float("nan"), float("nan"))
            w.writerow([i, o.label, o.color.value, f"{px[0]:.4f}", f"{px[1]:.4f}",
                        f"{o.world[0]:.4f}", f"{o.world[1]:.4f}", "" if o.area is None else o.area])
