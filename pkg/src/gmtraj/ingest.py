"""Annotation parsing, fixed-horizon sample cutting and leave-one-out splits.

Annotation files hold one detection per row, ``frame_id agent_id x y`` with
world coordinates in meters, separated by whitespace or commas.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "IngestError",
    "TrajPoint",
    "AgentTrack",
    "Scene",
    "HorizonConfig",
    "TrajectorySample",
    "parse_annotations",
    "write_annotations",
    "load_scene_dir",
    "build_samples",
    "split_leave_one_out",
    "write_manifest",
    "read_manifest",
    "BENCHMARK_SCENES",
]

BENCHMARK_SCENES = ("eth", "hotel", "zara1", "zara2", "univ")

_SPLIT = re.compile(r"[,\s]+")


class IngestError(ValueError):
    pass


class TrajPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class AgentTrack:
    agent_id: int
    frames: tuple[int, ...]
    points: np.ndarray  # (n, 2)

    def __post_init__(self):
        f = np.asarray(self.frames)
        if len(f) != len(self.points):
            raise IngestError(f"agent {self.agent_id}: {len(f)} frames but {len(self.points)} points")
        if len(f) > 1 and np.any(np.diff(f) <= 0):
            raise IngestError(f"agent {self.agent_id}: frame ids must be strictly increasing")
        if not np.all(np.isfinite(self.points)):
            raise IngestError(f"agent {self.agent_id}: non-finite coordinates")

    def __eq__(self, other):
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and self.frames == other.frames
            and np.array_equal(self.points, other.points)
        )

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class Scene:
    name: str
    tracks: tuple[AgentTrack, ...]
    frame_interval_s: float = 0.4
    frame_step: int = 1
    bounds: tuple[TrajPoint, TrajPoint] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.frame_interval_s <= 0:
            raise IngestError("frame_interval_s must be positive")
        if self.frame_step < 1:
            raise IngestError("frame_step must be >= 1")
        if self.bounds is None:
            pts = np.concatenate([t.points for t in self.tracks]) if self.tracks else np.zeros((1, 2))
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            object.__setattr__(self, "bounds", (TrajPoint(float(lo[0]), float(lo[1])), TrajPoint(float(hi[0]), float(hi[1]))))

    @property
    def agent_ids(self) -> list[int]:
        return [t.agent_id for t in self.tracks]

    def frame_range(self) -> np.ndarray:
        """Every frame id from first to last annotation, including empty frames."""
        first = min(t.frames[0] for t in self.tracks)
        last = max(t.frames[-1] for t in self.tracks)
        return np.arange(first, last + 1, self.frame_step)

    def detections(self) -> dict[int, np.ndarray]:
        """Positions per annotated frame, ordered by agent id within a frame."""
        rows: dict[int, list] = {}
        for t in sorted(self.tracks, key=lambda t: t.agent_id):
            for f, p in zip(t.frames, t.points):
                rows.setdefault(f, []).append(p)
        return {f: np.asarray(v) for f, v in rows.items()}


@dataclass(frozen=True)
class HorizonConfig:
    t_obs: int = 8
    t_pred: int = 12

    def __post_init__(self):
        if self.t_obs < 2 or self.t_pred < 1:
            raise IngestError(f"invalid horizon t_obs={self.t_obs}, t_pred={self.t_pred}")

    @property
    def total(self) -> int:
        return self.t_obs + self.t_pred


@dataclass(frozen=True)
class TrajectorySample:
    scene: str
    agent_id: int
    t0: int
    t1: int  # first predicted frame
    observed: np.ndarray  # (t_obs, 2)
    ground_truth: np.ndarray  # (t_pred, 2)
    neighbor_ids: tuple[int, ...] = ()

    @property
    def last_observed(self) -> np.ndarray:
        return self.observed[-1]

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.scene, self.t0, self.agent_id)

    def __eq__(self, other):
        if not isinstance(other, TrajectorySample):
            return NotImplemented
        return (
            (self.scene, self.agent_id, self.t0, self.t1, self.neighbor_ids)
            == (other.scene, other.agent_id, other.t0, other.t1, other.neighbor_ids)
            and np.array_equal(self.observed, other.observed)
            and np.array_equal(self.ground_truth, other.ground_truth)
        )

    __hash__ = None  # mutable array payload


# ---------------------------------------------------------------------------


def _infer_step(frames: np.ndarray) -> int:
    uniq = np.unique(frames)
    if len(uniq) < 2:
        return 1
    return int(np.min(np.diff(uniq)))


def parse_annotations(path, name: str | None = None, frame_interval_s: float = 0.4, frame_step: int | None = None) -> Scene:
    """Read a ``frame_id agent_id x y`` file into a :class:`Scene`.

    ``frame_step`` is the frame-id increment between consecutive annotated
    frames; it is inferred as the smallest gap between distinct frame ids
    when not given.
    """
    path = Path(path)
    records = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p for p in _SPLIT.split(text) if p]
            if len(parts) != 4:
                raise IngestError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                fv, av, x, y = (float(p) for p in parts)
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-numeric field in {text!r}") from None
            if not (fv.is_integer() and av.is_integer()):
                raise IngestError(f"{path}:{lineno}: frame and agent ids must be integers")
            if not (math.isfinite(x) and math.isfinite(y)):
                raise IngestError(f"{path}:{lineno}: non-finite coordinate")
            key = (int(fv), int(av))
            if key in seen:
                raise IngestError(f"{path}:{lineno}: duplicate record for frame {key[0]}, agent {key[1]}")
            seen.add(key)
            records.append((key[0], key[1], x, y))
    if not records:
        raise IngestError(f"{path}: no records")

    frames = np.array([r[0] for r in records], dtype=np.int64)
    agents = np.array([r[1] for r in records], dtype=np.int64)
    xy = np.array([(r[2], r[3]) for r in records], dtype=np.float64)
    tracks = []
    for aid in np.unique(agents):
        sel = np.flatnonzero(agents == aid)
        order = sel[np.argsort(frames[sel], kind="stable")]
        tracks.append(AgentTrack(int(aid), tuple(int(f) for f in frames[order]), xy[order]))
    step = frame_step if frame_step is not None else _infer_step(frames)
    return Scene(name or path.stem, tuple(tracks), frame_interval_s=frame_interval_s, frame_step=step)


def write_annotations(scene: Scene, path) -> None:
    """Serialize ``scene`` in frame-row order; ``repr`` floats keep the round trip exact."""
    rows = []
    for t in scene.tracks:
        for f, p in zip(t.frames, t.points):
            rows.append((f, t.agent_id, p[0], p[1]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w") as fh:
        for f, a, x, y in rows:
            fh.write(f"{f}\t{a}\t{float(x)!r}\t{float(y)!r}\n")


def load_scene_dir(root, names: Sequence[str] = BENCHMARK_SCENES, frame_interval_s: float = 0.4) -> list[Scene]:
    """Load ``root/<name>/*.txt`` for each scene name; one Scene per file."""
    root = Path(root)
    scenes = []
    for name in names:
        files = sorted((root / name).glob("*.txt"))
        if not files:
            raise IngestError(f"no annotation files for scene {name!r} under {root}")
        for f in files:
            scenes.append(parse_annotations(f, name=name, frame_interval_s=frame_interval_s))
    return scenes


# ---------------------------------------------------------------------------


def build_samples(scene: Scene, horizon: HorizonConfig = HorizonConfig(), stride: int = 1) -> list[TrajectorySample]:
    """Cut every fully annotated ``t_obs + t_pred`` window out of each track.

    Windows start every ``stride`` frame steps along the scene's frame grid;
    a window is kept only if the agent is annotated at every one of its
    frames. Output is ordered by window start, then agent id.
    """
    if stride < 1:
        raise IngestError("stride must be >= 1")
    step = scene.frame_step
    total = horizon.total
    presence: dict[int, set[int]] = {}
    for t in scene.tracks:
        for f in t.frames:
            presence.setdefault(f, set()).add(t.agent_id)

    base = scene.frame_range()[0]
    found = []
    for t in scene.tracks:
        frames = np.asarray(t.frames)
        if len(frames) < total:
            continue
        consecutive = np.diff(frames) == step
        for i in range(len(frames) - total + 1):
            if (frames[i] - base) % (stride * step):
                continue
            if not consecutive[i:i + total - 1].all():
                continue
            found.append((int(frames[i]), t.agent_id, t, i))

    found.sort(key=lambda r: (r[0], r[1]))
    samples = []
    for t0, aid, track, i in found:
        window = range(t0, t0 + total * step, step)
        neighbors = set()
        for f in window:
            neighbors |= presence.get(f, set())
        neighbors.discard(aid)
        pts = track.points[i:i + total]
        samples.append(
            TrajectorySample(
                scene=scene.name,
                agent_id=aid,
                t0=t0,
                t1=t0 + horizon.t_obs * step,
                observed=pts[: horizon.t_obs].copy(),
                ground_truth=pts[horizon.t_obs:].copy(),
                neighbor_ids=tuple(sorted(neighbors)),
            )
        )
    return samples


def split_leave_one_out(samples_by_scene: dict[str, list] | Iterable[Scene], held_out: str, horizon: HorizonConfig = HorizonConfig(), stride: int = 1):
    """Partition samples into (train, test) with ``held_out`` as the test scene.

    Accepts either a mapping scene name -> samples, or Scene objects (several
    scenes may share a name, e.g. the two univ recordings).
    """
    if isinstance(samples_by_scene, dict):
        groups = samples_by_scene
    else:
        groups = {}
        for sc in samples_by_scene:
            groups.setdefault(sc.name, []).extend(build_samples(sc, horizon, stride))
    if held_out not in groups:
        raise IngestError(f"unknown scene {held_out!r}; available: {sorted(groups)}")
    train = [s for name, ss in groups.items() if name != held_out for s in ss]
    return train, list(groups[held_out])


# ---------------------------------------------------------------------------


def write_manifest(samples: Sequence[TrajectorySample], path) -> None:
    """One JSON object per sample, in list order."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "scene": s.scene,
                        "agent_id": s.agent_id,
                        "t0": s.t0,
                        "t1": s.t1,
                        "observed": s.observed.tolist(),
                        "ground_truth": s.ground_truth.tolist(),
                        "neighbor_ids": list(s.neighbor_ids),
                    }
                )
                + "\n"
            )


def read_manifest(path) -> list[TrajectorySample]:
    out = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(
                TrajectorySample(
                    scene=d["scene"],
                    agent_id=d["agent_id"],
                    t0=d["t0"],
                    t1=d["t1"],
                    observed=np.asarray(d["observed"], dtype=np.float64),
                    ground_truth=np.asarray(d["ground_truth"], dtype=np.float64),
                    neighbor_ids=tuple(d["neighbor_ids"]),
                )
            )
    return out
