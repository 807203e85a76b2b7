"""Glue from parsed scenes to model-ready arrays: samples, record windows, local maps."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gmap import GridSpec, GuidanceMap, extract_local, grid_for_scene, rasterize
from .ingest import HorizonConfig, Scene, TrajectorySample, build_samples
from .recwin import SavedWindow, WindowConfig, saved_windows, window_indices

__all__ = ["MapConfig", "SceneData", "prepare_scene", "prepare_scenes", "stack_samples", "concat_scene_data"]


@dataclass(frozen=True)
class MapConfig:
    resolution: float = 0.25
    half_side: float = 4.0  # l, meters


@dataclass
class SceneData:
    scene: Scene
    samples: list[TrajectorySample]
    grid: GridSpec
    windows: list[SavedWindow]
    maps: list[GuidanceMap]
    window_index: list[int | None]  # per sample
    patches: np.ndarray = field(repr=False)  # (N, S, S) raw counts

    @property
    def observed(self) -> np.ndarray:
        return stack_samples(self.samples)[0]

    @property
    def future(self) -> np.ndarray:
        return stack_samples(self.samples)[1]

    def patches_for_map(self, map_index: int | None) -> np.ndarray:
        """Local crops of every sample taken from one fixed complete map (or zeros)."""
        side = self.patches.shape[1]
        out = np.zeros((len(self.samples), side, side), dtype=np.int64)
        if map_index is None:
            return out
        gm = self.maps[map_index]
        half = side * self.grid.resolution / 2
        for k, s in enumerate(self.samples):
            out[k] = extract_local(gm, s.last_observed, half, s.agent_id).patch
        return out


def stack_samples(samples: Sequence[TrajectorySample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        return np.zeros((0, 0, 2)), np.zeros((0, 0, 2))
    return np.stack([s.observed for s in samples]), np.stack([s.ground_truth for s in samples])


def prepare_scene(
    scene: Scene,
    horizon: HorizonConfig = HorizonConfig(),
    window_config: WindowConfig = WindowConfig(),
    map_config: MapConfig = MapConfig(),
    stride: int = 1,
) -> SceneData:
    samples = build_samples(scene, horizon, stride)
    grid = grid_for_scene(scene, map_config.resolution, map_config.half_side)
    windows = saved_windows(scene, window_config)
    maps = [rasterize(w.window, grid) for w in windows]
    idx = window_indices(windows, [s.t1 for s in samples])
    side = int(round(2 * map_config.half_side / map_config.resolution))
    patches = np.zeros((len(samples), side, side), dtype=np.int64)
    for k, (s, wi) in enumerate(zip(samples, idx)):
        if wi is not None:
            patches[k] = extract_local(maps[wi], s.last_observed, map_config.half_side, s.agent_id).patch
    return SceneData(scene, samples, grid, windows, maps, idx, patches)


def prepare_scenes(scenes: Sequence[Scene], **kwargs) -> list[SceneData]:
    return [prepare_scene(sc, **kwargs) for sc in scenes]


def concat_scene_data(items: Sequence[SceneData]) -> tuple[list[TrajectorySample], np.ndarray]:
    samples = [s for d in items for s in d.samples]
    if not items:
        return samples, np.zeros((0, 32, 32), dtype=np.int64)
    return samples, np.concatenate([d.patches for d in items])
