"""
==================
Drawing Operations
==================

Annotate images with labeled bounding boxes and polylines, then round-trip
the result through PNG. Every function is pure: the input image is never
modified, each call returns a fresh image.
"""
from pathlib import Path

from drawspace import (
    BBoxGeometry,
    DrawStyle,
    PolylineGeometry,
    decode_png,
    draw_bbox,
    draw_polyline,
    encode_png,
    new_canvas,
)

out_dir = Path("demo-output")
out_dir.mkdir(exist_ok=True)

# A blank white canvas.
base = new_canvas(320, 240)
print(f"canvas: {base.width}x{base.height}, hash {base.pixel_hash()[:12]}...")

# Box the region a hypothetical question asks about. The label is rendered
# above the box and picks a stable color from the label text itself.
boxed = draw_bbox(base, BBoxGeometry(40, 30, 180, 150), "the desk")
print(f"after box: base unchanged ({base.pixel_hash()[:12]}...), "
      f"new image {boxed.pixel_hash()[:12]}...")

# Trace a path across the same image; drawing on an output works the same
# way because outputs are ordinary images.
path = PolylineGeometry(((40, 200), (120, 160), (200, 190), (290, 60)))
traced = draw_polyline(boxed, path, "route to the door")

# Styles control stroke width and label rendering.
thick = draw_polyline(boxed, path, "route to the door",
                      DrawStyle(stroke_width=7, show_label=False))

for name, img in [("boxed", boxed), ("traced", traced), ("thick", thick)]:
    png = encode_png(img)
    (out_dir / f"{name}.png").write_bytes(png)
    again = decode_png(png)
    assert again.pixel_hash() == img.pixel_hash()
    print(f"{name}: {len(png)} PNG bytes, decode round-trips pixel-identically")

print(f"wrote demo images to {out_dir}/")
