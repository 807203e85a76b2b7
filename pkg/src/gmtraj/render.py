"""Per-sample figure: a background grid with observed, true, preliminary and refined tracks drawn over it."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .gmap import GridSpec, colorize, save_png

__all__ = ["TRACK_COLORS", "to_pixels", "render_sample"]

TRACK_COLORS = {
    "observed": (80, 160, 255),
    "truth": (60, 220, 60),
    "preliminary": (255, 255, 255),
    "refined": (255, 0, 255),
}


def to_pixels(points, spec: GridSpec, cell_px: int) -> list[tuple[float, float]]:
    """World points to image (column, row) pixel centres; x runs down the rows."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    rows = (p[:, 0] - spec.origin[0]) / spec.resolution * cell_px
    cols = (p[:, 1] - spec.origin[1]) / spec.resolution * cell_px
    return list(zip(cols.tolist(), rows.tolist()))


def render_sample(
    path,
    background: np.ndarray,
    spec: GridSpec,
    tracks: dict[str, np.ndarray],
    cell_px: int = 4,
    meta: dict[str, str] | None = None,
) -> Path:
    """Draw each named track of ``tracks`` as a polyline on the colorized ``background``.

    ``background`` lives on ``spec``'s grid (a guidance map or an energy
    field). Unknown track names are drawn in gray.
    """
    from PIL import Image, ImageDraw

    img = colorize(background, cell_px, "heat")
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    canvas = Image.fromarray(img)
    draw = ImageDraw.Draw(canvas)
    for name, pts in tracks.items():
        if pts is None or len(pts) == 0:
            continue
        color = TRACK_COLORS.get(name, (160, 160, 160))
        px = to_pixels(pts, spec, cell_px)
        if len(px) > 1:
            draw.line(px, fill=color, width=max(1, cell_px // 2))
        for c, r in px:
            draw.ellipse([c - 1.5, r - 1.5, c + 1.5, r + 1.5], fill=color)
    return save_png(canvas, path, meta)
