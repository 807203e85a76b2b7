"""Guidance-map rasterization, agent-centred crops and heat-map rendering.

Grid convention: world ``x`` runs along rows and ``y`` along columns, and
cell ``(r, c)`` covers ``[origin + (r, c) * res, origin + (r + 1, c + 1) * res)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Scene, TrajPoint

__all__ = [
    "GridSpec",
    "GuidanceMap",
    "LocalMap",
    "world_to_grid",
    "grid_for_scene",
    "rasterize",
    "extract_local",
    "normalize_patch",
    "colorize",
    "save_png",
    "render_map",
    "dump_csv",
]


@dataclass(frozen=True)
class GridSpec:
    origin: TrajPoint
    resolution: float
    height: int
    width: int

    def __post_init__(self):
        if self.resolution <= 0 or self.height < 1 or self.width < 1:
            raise ValueError(f"invalid grid spec {self}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class GuidanceMap:
    spec: GridSpec
    counts: np.ndarray  # (H, W) int64
    dropped: int = 0  # positions that fell outside the grid


@dataclass(frozen=True)
class LocalMap:
    agent_id: int
    patch: np.ndarray  # (S, S) counts
    center_cell: tuple[int, int]


def world_to_grid(p, spec: GridSpec) -> tuple[int, int, bool]:
    """Return ``(row, col, in_bounds)`` for world point ``p``."""
    r = math.floor((p[0] - spec.origin[0]) / spec.resolution)
    c = math.floor((p[1] - spec.origin[1]) / spec.resolution)
    return r, c, (0 <= r < spec.height and 0 <= c < spec.width)


def _cells(points: np.ndarray, spec: GridSpec) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.floor((pts - np.asarray(spec.origin)) / spec.resolution).astype(np.int64)


def grid_for_scene(scene: Scene, resolution: float = 0.25, pad: float = 4.0) -> GridSpec:
    """Grid covering the scene bounds with ``pad`` meters of margin on every side."""
    lo, hi = scene.bounds
    origin = TrajPoint(lo.x - pad, lo.y - pad)
    h = int(math.floor((hi.x + pad - origin.x) / resolution)) + 1
    w = int(math.floor((hi.y + pad - origin.y) / resolution)) + 1
    return GridSpec(origin, resolution, h, w)


def rasterize(window, spec: GridSpec) -> GuidanceMap:
    """Count recorded positions per cell. ``window`` is a RecordWindow, point array or None."""
    positions = getattr(window, "positions", window)
    counts = np.zeros(spec.shape, dtype=np.int64)
    if positions is None or len(positions) == 0:
        return GuidanceMap(spec, counts, 0)
    cells = _cells(positions, spec)
    ok = (cells[:, 0] >= 0) & (cells[:, 0] < spec.height) & (cells[:, 1] >= 0) & (cells[:, 1] < spec.width)
    flat = cells[ok, 0] * spec.width + cells[ok, 1]
    counts = np.bincount(flat, minlength=spec.height * spec.width).reshape(spec.shape).astype(np.int64)
    return GuidanceMap(spec, counts, int((~ok).sum()))


def extract_local(gmap: GuidanceMap, agent_last_pos, l: float = 4.0, agent_id: int = -1) -> LocalMap:
    """Square crop of side ``2l`` meters centred on the agent's cell, zero-padded."""
    if l <= 0:
        raise ValueError("l must be positive")
    spec = gmap.spec
    side = int(round(2 * l / spec.resolution))
    half = side // 2
    r, c, _ = world_to_grid(agent_last_pos, spec)
    r0, c0 = r - half, c - half
    patch = np.zeros((side, side), dtype=gmap.counts.dtype)
    rs, re_ = max(r0, 0), min(r0 + side, spec.height)
    cs, ce = max(c0, 0), min(c0 + side, spec.width)
    if rs < re_ and cs < ce:
        patch[rs - r0:re_ - r0, cs - c0:ce - c0] = gmap.counts[rs:re_, cs:ce]
    return LocalMap(agent_id, patch, (r, c))


def normalize_patch(patch: np.ndarray) -> np.ndarray:
    """Scale a count patch (or a stack of them) into [0, 1] by its own maximum."""
    p = np.asarray(patch, dtype=np.float64)
    if p.ndim == 2:
        return p / max(1.0, float(p.max()))
    peak = p.max(axis=(-2, -1), initial=0.0)
    return p / np.maximum(1.0, peak)[..., None, None]


# ---------------------------------------------------------------------------


def _grid_of(obj) -> np.ndarray:
    for attr in ("counts", "patch", "values"):
        if hasattr(obj, attr):
            return np.asarray(getattr(obj, attr), dtype=np.float64)
    return np.asarray(obj, dtype=np.float64)


def _heat_lut() -> np.ndarray:
    # black -> red -> yellow -> white, 256 entries
    t = np.linspace(0.0, 1.0, 256)
    r = np.clip(3 * t, 0, 1)
    g = np.clip(3 * t - 1, 0, 1)
    b = np.clip(3 * t - 2, 0, 1)
    return (np.stack([r, g, b], axis=1) * 255).round().astype(np.uint8)


def colorize(grid: np.ndarray, cell_px: int = 4, colormap: str = "heat") -> np.ndarray:
    """RGB (or gray) uint8 image with one ``cell_px`` block per grid cell.

    Values are shifted to start at zero and divided by their maximum, so
    signed fields (energies) render too. Rows of the grid map to image rows.
    """
    grid = np.asarray(grid, dtype=np.float64)
    lo = min(0.0, float(grid.min())) if grid.size else 0.0
    shifted = grid - lo
    peak = float(shifted.max()) if shifted.size else 0.0
    norm = shifted / peak if peak > 0 else np.zeros_like(shifted)
    levels = np.round(norm * 255).astype(np.uint8)
    if colormap == "gray":
        img = levels
    elif colormap == "heat":
        img = _heat_lut()[levels]
    else:
        raise ValueError(f"unknown colormap {colormap!r}")
    return np.repeat(np.repeat(img, cell_px, axis=0), cell_px, axis=1)


def save_png(img, path, meta: dict[str, str] | None = None) -> Path:
    """Write an image array or PIL image; ``meta`` goes into PNG text chunks."""
    from PIL import Image
    from PIL.PngImagePlugin import PngInfo

    info = PngInfo()
    for k, v in sorted((meta or {}).items()):
        info.add_text(k, str(v))
    if isinstance(img, np.ndarray):
        img = Image.fromarray(img)
    path = Path(path)
    try:
        img.save(path, format="PNG", optimize=False, pnginfo=info)
    except OSError as exc:
        raise OSError(f"cannot write render to {path}: {exc}") from exc
    return path


def render_map(obj, path, cell_px: int = 4, colormap: str = "heat", meta: dict[str, str] | None = None) -> Path:
    """Render a guidance map, local patch, energy field or bare array to PNG."""
    return save_png(colorize(_grid_of(obj), cell_px, colormap), path, meta)


def dump_csv(obj, path) -> None:
    np.savetxt(path, _grid_of(obj), delimiter=",", fmt="%.10g")
