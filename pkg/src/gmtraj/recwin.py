"""Adaptive record-period selection for guidance maps.

A single forward pass over frames accumulates detections into an open
window. The window is saved once it holds ``n_max`` positions, or once it
spans ``t_max`` frames while holding at least ``n_min`` positions; a window
that reaches ``t_max`` frames with fewer than ``n_min`` positions is
discarded. Discarding never touches the last saved window.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ingest import Scene

__all__ = [
    "WindowConfig",
    "RecordWindow",
    "SavedWindow",
    "RecordWindowSelector",
    "select_record_window",
    "saved_windows",
    "window_indices",
    "windows_for_dataset",
]


@dataclass(frozen=True)
class WindowConfig:
    t_max: int = 150
    n_min: int = 50
    n_max: int = 1000

    def __post_init__(self):
        if self.t_max < 1 or not (0 <= self.n_min <= self.n_max):
            raise ValueError(f"invalid window config {self}")


@dataclass(frozen=True)
class RecordWindow:
    frames: tuple[int, ...]
    positions: np.ndarray = field(repr=False)  # (n, 2)

    def __eq__(self, other):
        if not isinstance(other, RecordWindow):
            return NotImplemented
        return self.frames == other.frames and np.array_equal(self.positions, other.positions)

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True)
class SavedWindow:
    saved_at: int  # frame id at which the window closed
    window: RecordWindow


class RecordWindowSelector:
    """Stateful accumulator; feed frames in time order with :meth:`push`."""

    def __init__(self, config: WindowConfig):
        self.config = config
        self._frames: list[int] = []
        self._positions: list[np.ndarray] = []
        self._count = 0
        self.last_saved: RecordWindow | None = None

    def push(self, frame_id: int, positions) -> RecordWindow | None:
        """Add one frame's detections; returns the window if this frame saved one."""
        pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        self._frames.append(frame_id)
        self._positions.append(pts)
        self._count += len(pts)
        cfg = self.config
        length = len(self._frames)
        if self._count >= cfg.n_max or (length >= cfg.t_max and self._count >= cfg.n_min):
            saved = RecordWindow(tuple(self._frames), np.concatenate(self._positions))
            self.last_saved = saved
            self._reset()
            return saved
        if length >= cfg.t_max:
            self._reset()
        return None

    def _reset(self) -> None:
        self._frames = []
        self._positions = []
        self._count = 0


def select_record_window(detections: Sequence, config: WindowConfig, t_p: int) -> RecordWindow | None:
    """Run the selection over frames ``1..t_p``.

    ``detections[f - 1]`` holds the positions seen at frame ``f``. Returns the
    most recently saved window, or None if no window was ever saved.
    """
    if t_p > len(detections):
        raise ValueError(f"t_p={t_p} exceeds the {len(detections)} frames provided")
    sel = RecordWindowSelector(config)
    for f in range(1, t_p + 1):
        sel.push(f, detections[f - 1])
    return sel.last_saved


def saved_windows(scene: Scene, config: WindowConfig) -> list[SavedWindow]:
    """Every window saved while sweeping the scene's full frame range."""
    dets = scene.detections()
    sel = RecordWindowSelector(config)
    out = []
    empty = np.zeros((0, 2))
    for f in scene.frame_range():
        w = sel.push(int(f), dets.get(int(f), empty))
        if w is not None:
            out.append(SavedWindow(int(f), w))
    return out


def window_indices(saved: Sequence[SavedWindow], prediction_starts: Sequence[int]) -> list[int | None]:
    """Index into ``saved`` of the latest window closed strictly before each start frame.

    Windows closing at or after a prediction start would leak future frames
    into the map, so they are never chosen. ``None`` marks a start with no
    preceding window.
    """
    times = [s.saved_at for s in saved]
    out = []
    for t1 in prediction_starts:
        k = bisect.bisect_left(times, t1) - 1
        out.append(k if k >= 0 else None)
    return out


def windows_for_dataset(
    scene: Scene, config: WindowConfig, prediction_starts: Sequence[int]
) -> list[tuple[int, RecordWindow | None]]:
    """Pair each prediction start frame with the record window it should use."""
    saved = saved_windows(scene, config)
    idx = window_indices(saved, prediction_starts)
    return [(int(t1), saved[k].window if k is not None else None) for t1, k in zip(prediction_starts, idx)]
