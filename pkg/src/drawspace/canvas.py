"""Deterministic raster canvas for drawing annotations on images.

All drawing is pure: operations take a RasterImage and return a new one,
never mutating pixels in place. Rendering uses integer pixel stamping with
no anti-aliasing, so the same inputs produce byte-identical outputs on any
platform. Text comes from the embedded bitmap font, not system fonts.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ._font import draw_text, text_size


class DrawingError(Exception):
    """Base class for canvas failures."""


class InvalidDimensionError(DrawingError):
    """Canvas dimensions are zero or negative."""


class DegenerateGeometryError(DrawingError):
    """Geometry paints nothing visible: collapsed, non-finite, or fully off-canvas."""


class InsufficientPointsError(DrawingError):
    """Polyline has fewer than 2 points."""


class DecodeError(DrawingError):
    """Byte stream is not a decodable image."""


# Saturated, visually distinct annotation colors. Label text picks from the
# same table so a label keeps one color across every image it appears on.
PALETTE: tuple[tuple[int, int, int, int], ...] = (
    (230, 57, 70, 255),    # red
    (29, 120, 216, 255),   # blue
    (46, 160, 67, 255),    # green
    (255, 140, 0, 255),    # orange
    (156, 39, 176, 255),   # purple
    (0, 172, 193, 255),    # teal
    (216, 27, 96, 255),    # magenta
    (121, 85, 72, 255),    # brown
    (57, 73, 171, 255),    # indigo
    (104, 159, 56, 255),   # olive
)


def label_color(label: str) -> tuple[int, int, int, int]:
    """Stable color for a label, keyed by md5 so it never depends on hash seeding."""
    digest = hashlib.md5(label.encode("utf-8")).digest()
    return PALETTE[digest[0] % len(PALETTE)]


@dataclass(frozen=True)
class RasterImage:
    """Immutable RGBA image. `pixels` is (height, width, 4) uint8, read-only."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 4 or px.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 4) uint8 array, got {px.shape} {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        px.flags.writeable = False

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def pixel_hash(self) -> str:
        """sha256 over dimensions and raw pixel bytes."""
        h = hashlib.sha256()
        h.update(f"{self.height}x{self.width}".encode())
        h.update(self.pixels.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class BBoxGeometry:
    """Axis-aligned box given by two corner points, any corner order."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(np.isfinite(v) for v in vals):
            raise DegenerateGeometryError(f"box coordinates must be finite, got {vals}")


@dataclass(frozen=True)
class PolylineGeometry:
    """Open polyline through two or more vertices."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise InsufficientPointsError(
                f"polyline needs at least 2 points, got {len(self.points)}"
            )
        for pt in self.points:
            if not (np.isfinite(pt[0]) and np.isfinite(pt[1])):
                raise DegenerateGeometryError(f"polyline point must be finite, got {pt}")


@dataclass(frozen=True)
class DrawStyle:
    stroke_width: int = 3
    label_scale: int = 2
    show_label: bool = True
    color: tuple[int, int, int, int] | None = None  # None = derive from label


def new_canvas(width: int, height: int, color=(255, 255, 255, 255)) -> RasterImage:
    if width < 1 or height < 1:
        raise InvalidDimensionError(f"canvas must be at least 1x1, got {width}x{height}")
    buf = np.empty((height, width, 4), dtype=np.uint8)
    buf[:, :] = np.asarray(color, dtype=np.uint8)
    return RasterImage(buf)


def image_from_array(arr: np.ndarray) -> RasterImage:
    """Wrap an array as a RasterImage, promoting RGB/grayscale to RGBA."""
    a = np.asarray(arr)
    if a.ndim == 2:
        a = np.stack([a, a, a], axis=-1)
    if a.ndim == 3 and a.shape[2] == 3:
        alpha = np.full(a.shape[:2] + (1,), 255, dtype=a.dtype)
        a = np.concatenate([a, alpha], axis=-1)
    return RasterImage(np.ascontiguousarray(a, dtype=np.uint8))


def _resolve_color(style: DrawStyle, label: str) -> np.ndarray:
    color = style.color if style.color is not None else label_color(label)
    return np.asarray(color, dtype=np.uint8)


def _stamp_label(buf: np.ndarray, x: int, y: int, label: str, color, scale: int) -> None:
    # Place text just above the anchor; fall back to below if clipped off the top.
    tw, th = text_size(label, scale)
    ty = y - th - 2
    if ty < 0:
        ty = y + 2
    tx = max(0, min(x, buf.shape[1] - tw))
    draw_text(buf, tx, ty, label, color, scale)


def draw_bbox(image: RasterImage, geom: BBoxGeometry, label: str,
              style: DrawStyle = DrawStyle()) -> RasterImage:
    """Stroke a rectangle outline, clamped to the canvas.

    Boxes partially off-canvas are clipped; a box entirely outside the canvas
    raises DegenerateGeometryError. Strokes grow inward from the box edges so
    the outline never spills past the clamped rectangle.
    """
    w, h = image.width, image.height
    x1, x2 = sorted((geom.x1, geom.x2))
    y1, y2 = sorted((geom.y1, geom.y2))
    if x1 == x2 or y1 == y2:
        raise DegenerateGeometryError(
            f"box ({geom.x1}, {geom.y1}, {geom.x2}, {geom.y2}) has zero area"
        )
    if x2 < 0 or y2 < 0 or x1 > w - 1 or y1 > h - 1:
        raise DegenerateGeometryError(
            f"box ({geom.x1}, {geom.y1}, {geom.x2}, {geom.y2}) lies outside {w}x{h} canvas"
        )
    xi1 = int(round(max(0.0, x1)))
    yi1 = int(round(max(0.0, y1)))
    xi2 = int(round(min(float(w - 1), x2)))
    yi2 = int(round(min(float(h - 1), y2)))
    if xi2 < xi1 or yi2 < yi1:
        raise DegenerateGeometryError("box collapses to nothing after clamping")

    color = _resolve_color(style, label)
    buf = image.pixels.copy()
    t = max(1, int(style.stroke_width))
    # Inward strokes: edge bands of thickness t, capped at the box size.
    ty_band = min(t, yi2 - yi1 + 1)
    tx_band = min(t, xi2 - xi1 + 1)
    buf[yi1:yi1 + ty_band, xi1:xi2 + 1] = color
    buf[yi2 - ty_band + 1:yi2 + 1, xi1:xi2 + 1] = color
    buf[yi1:yi2 + 1, xi1:xi1 + tx_band] = color
    buf[yi1:yi2 + 1, xi2 - tx_band + 1:xi2 + 1] = color
    if style.show_label and label:
        _stamp_label(buf, xi1, yi1, label, color, style.label_scale)
    return RasterImage(buf)


def _brush_offsets(width: int) -> np.ndarray:
    # Square brush centered on the sampled point; even widths bias up-left.
    lo = -(width // 2)
    return np.arange(lo, lo + width)


def draw_polyline(image: RasterImage, geom: PolylineGeometry, label: str,
                  style: DrawStyle = DrawStyle()) -> RasterImage:
    """Stroke an open polyline with a square brush.

    Pixels off the canvas are dropped. If no pixel of the whole polyline lands
    on the canvas, raises DegenerateGeometryError.
    """
    w, h = image.width, image.height
    color = _resolve_color(style, label)
    brush = _brush_offsets(max(1, int(style.stroke_width)))

    xs_all = []
    ys_all = []
    pts = geom.points
    for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
        # DDA: sample one point per unit of the dominant axis span.
        n = max(1, int(np.ceil(max(abs(bx - ax), abs(by - ay)))))
        ts = np.linspace(0.0, 1.0, n + 1)
        xs_all.append(np.round(ax + ts * (bx - ax)).astype(np.int64))
        ys_all.append(np.round(ay + ts * (by - ay)).astype(np.int64))
    cx = np.concatenate(xs_all)
    cy = np.concatenate(ys_all)

    # Expand each sample by the brush footprint.
    px = (cx[:, None, None] + brush[None, :, None]).ravel()
    py = (cy[:, None, None] + brush[None, None, :]).ravel()
    keep = (px >= 0) & (px < w) & (py >= 0) & (py < h)
    px, py = px[keep], py[keep]
    if px.size == 0:
        raise DegenerateGeometryError(
            f"polyline with {len(pts)} points lies outside the {w}x{h} canvas"
        )

    buf = image.pixels.copy()
    buf[py, px] = color
    if style.show_label and label:
        _stamp_label(buf, int(px.min()), int(py.min()), label, color, style.label_scale)
    return RasterImage(buf)


def encode_png(image: RasterImage) -> bytes:
    bio = io.BytesIO()
    Image.fromarray(image.pixels, mode="RGBA").save(bio, format="PNG", optimize=False)
    return bio.getvalue()


def decode_png(data: bytes) -> RasterImage:
    try:
        with Image.open(io.BytesIO(data)) as im:
            return image_from_array(np.array(im.convert("RGBA")))
    except Exception as exc:
        raise DecodeError(f"cannot decode image bytes: {exc}") from None
