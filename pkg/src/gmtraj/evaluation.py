"""Displacement metrics, the linear baseline, leave-one-out benchmarking and map-swap experiments."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .gmap import normalize_patch
from .model import BGMNetwork, TrainResult, to_agent_frame, train_network
from .pipeline import SceneData, stack_samples
from .social import SocialParams, refine_group

log = logging.getLogger(__name__)

__all__ = [
    "VARIANTS",
    "ade",
    "fde",
    "linear_baseline",
    "SampleError",
    "MetricReport",
    "build_report",
    "preliminary",
    "refine_scene",
    "predict_variants",
    "train_fold",
    "BenchmarkResult",
    "run_benchmark",
    "DynamicMapResult",
    "dynamic_map_experiment",
]

VARIANTS = ("full", "no_social", "no_context")


def ade(prediction, truth) -> float:
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: prediction {p.shape} vs truth {t.shape}")
    if len(p) == 0:
        raise ValueError("empty trajectories")
    return float(np.mean(np.sqrt(np.sum((p - t) ** 2, axis=-1))))


def fde(prediction, truth) -> float:
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: prediction {p.shape} vs truth {t.shape}")
    if len(p) == 0:
        raise ValueError("empty trajectories")
    return float(np.sqrt(np.sum((p[-1] - t[-1]) ** 2)))


def linear_baseline(observed, t_pred: int = 12) -> np.ndarray:
    """Per-coordinate least-squares line through the observation, extrapolated ``t_pred`` steps.

    Accepts one track ``(t_obs, 2)`` or a batch ``(N, t_obs, 2)``.
    """
    obs = np.asarray(observed, dtype=np.float64)
    single = obs.ndim == 2
    if single:
        obs = obs[None]
    n, t_obs, _ = obs.shape
    if t_obs < 2:
        raise ValueError("linear baseline needs at least two observed points")
    A = np.stack([np.ones(t_obs), np.arange(t_obs, dtype=np.float64)], axis=1)
    coef, *_ = np.linalg.lstsq(A, obs.transpose(1, 0, 2).reshape(t_obs, -1), rcond=None)
    tq = np.arange(t_obs, t_obs + t_pred, dtype=np.float64)
    out = (np.stack([np.ones(t_pred), tq], axis=1) @ coef).reshape(t_pred, n, 2).transpose(1, 0, 2)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class SampleError:
    scene: str
    agent_id: int
    t0: int
    ade: float
    fde: float


@dataclass
class MetricReport:
    variant: str
    per_scene: dict[str, dict[str, float]]  # name -> {"ade", "fde", "n"}
    average: dict[str, float]  # unweighted over scenes
    weighted: dict[str, float]  # over samples
    fingerprint: str
    samples: list[SampleError] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "per_scene": self.per_scene,
            "average": self.average,
            "weighted": self.weighted,
            "fingerprint": self.fingerprint,
        }

    def table(self) -> str:
        lines = [f"[{self.variant}]  (config {self.fingerprint[:12]})", f"{'scene':<10}{'ADE':>8}{'FDE':>8}{'n':>8}"]
        for name, m in self.per_scene.items():
            lines.append(f"{name:<10}{m['ade']:>8.3f}{m['fde']:>8.3f}{int(m['n']):>8d}")
        lines.append(f"{'average':<10}{self.average['ade']:>8.3f}{self.average['fde']:>8.3f}")
        lines.append(f"{'weighted':<10}{self.weighted['ade']:>8.3f}{self.weighted['fde']:>8.3f}")
        return "\n".join(lines)

    def write(self, out_dir, stem: str | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or f"report_{self.variant}"
        jpath = out_dir / f"{stem}.json"
        jpath.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        cpath = out_dir / f"{stem}_samples.csv"
        with open(cpath, "w", newline="") as fh:
            fh.write(f"# fingerprint={self.fingerprint}\n")
            w = csv.writer(fh)
            w.writerow(["scene", "agent_id", "t0", "ade", "fde"])
            for s in self.samples:
                w.writerow([s.scene, s.agent_id, s.t0, repr(s.ade), repr(s.fde)])
        (out_dir / f"{stem}.txt").write_text(self.table() + "\n")
        return jpath, cpath

    @staticmethod
    def read_samples(path) -> list[SampleError]:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        return [
            SampleError(r["scene"], int(r["agent_id"]), int(r["t0"]), float(r["ade"]), float(r["fde"]))
            for r in csv.DictReader(lines)
        ]


def build_report(variant: str, samples: Sequence[SampleError], fingerprint: str, scene_order: Sequence[str] | None = None) -> MetricReport:
    names = list(scene_order) if scene_order else sorted({s.scene for s in samples})
    per_scene = {}
    for name in names:
        rows = [s for s in samples if s.scene == name]
        if not rows:
            continue
        per_scene[name] = {
            "ade": float(np.mean([s.ade for s in rows])),
            "fde": float(np.mean([s.fde for s in rows])),
            "n": len(rows),
        }
    average = {
        "ade": float(np.mean([m["ade"] for m in per_scene.values()])) if per_scene else float("nan"),
        "fde": float(np.mean([m["fde"] for m in per_scene.values()])) if per_scene else float("nan"),
    }
    weighted = {
        "ade": float(np.mean([s.ade for s in samples])) if samples else float("nan"),
        "fde": float(np.mean([s.fde for s in samples])) if samples else float("nan"),
    }
    return MetricReport(variant, per_scene, average, weighted, fingerprint, list(samples))


def _errors(data: SceneData, pred: np.ndarray) -> list[SampleError]:
    _, fut = stack_samples(data.samples)
    d = np.sqrt(np.sum((pred - fut) ** 2, axis=-1))
    return [
        SampleError(s.scene, s.agent_id, s.t0, float(d[k].mean()), float(d[k, -1]))
        for k, s in enumerate(data.samples)
    ]


# ---------------------------------------------------------------------------
# prediction


def preliminary(net: BGMNetwork, data: SceneData, use_context: bool = True, patches: np.ndarray | None = None) -> np.ndarray:
    """World-frame decoder output for every sample of ``data``."""
    if not data.samples:
        return np.zeros((0, net.config.t_pred, 2))
    obs, _ = stack_samples(data.samples)
    rel, anchor = to_agent_frame(obs)
    p = normalize_patch(data.patches if patches is None else patches)
    return net.predict_offsets(rel, p, use_context=use_context) + anchor


def refine_scene(data: SceneData, prelim: np.ndarray, params: SocialParams, subset: Sequence[int] | None = None) -> np.ndarray:
    """Social refinement within each group of samples sharing a prediction start.

    With ``subset``, ``prelim`` holds predictions for exactly those sample
    indices (in that order) and neighbours are drawn from the subset only.
    """
    idx = np.arange(len(data.samples)) if subset is None else np.asarray(subset)
    obs, _ = stack_samples(data.samples)
    out = prelim.copy()
    groups: dict[int, list[int]] = {}
    for pos, k in enumerate(idx):
        groups.setdefault(data.samples[k].t1, []).append(pos)
    for members in groups.values():
        rows = idx[members]
        ids = [data.samples[k].agent_id for k in rows]
        refined, _ = refine_group(prelim[members], obs[rows], ids, params)
        out[members] = refined
    return out


def predict_variants(net: BGMNetwork, data: SceneData, social: SocialParams, variants: Sequence[str] = VARIANTS) -> dict[str, np.ndarray]:
    out = {}
    with_ctx = preliminary(net, data, use_context=True)
    if "no_social" in variants:
        out["no_social"] = with_ctx
    if "full" in variants:
        out["full"] = refine_scene(data, with_ctx, social)
    if "no_context" in variants:
        out["no_context"] = refine_scene(data, preliminary(net, data, use_context=False), social)
    return out


def train_fold(train_data: Sequence[SceneData], network_config, train_config, callback=None) -> TrainResult:
    samples = [s for d in train_data for s in d.samples]
    obs, fut = stack_samples(samples)
    patches = normalize_patch(np.concatenate([d.patches for d in train_data])) if train_config.use_context else None
    return train_network(obs, fut, patches, network_config, train_config, callback)


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchmarkResult:
    reports: dict[str, MetricReport]
    linear: MetricReport
    loss_curves: dict[str, list[float]] = field(default_factory=dict)

    def summary(self) -> str:
        parts = [r.table() for r in self.reports.values()]
        parts.append(self.linear.table())
        return "\n\n".join(parts)

    def write(self, out_dir) -> None:
        for r in self.reports.values():
            r.write(out_dir)
        self.linear.write(out_dir)
        Path(out_dir, "summary.txt").write_text(self.summary() + "\n")


def run_benchmark(
    data_by_scene: dict[str, list[SceneData]],
    network_config,
    train_config,
    social: SocialParams,
    fingerprint: str,
    networks: dict[str, BGMNetwork] | None = None,
    train_missing: bool = True,
    on_trained: Callable[[str, TrainResult], None] | None = None,
    variants: Sequence[str] = VARIANTS,
) -> BenchmarkResult:
    """Leave-one-out loop: for each scene, train (or reuse) a network on the others and test on it."""
    networks = dict(networks or {})
    names = list(data_by_scene)
    errors: dict[str, list[SampleError]] = {v: [] for v in variants}
    lin_errors: list[SampleError] = []
    curves = {}
    for held in names:
        if not data_by_scene[held]:
            raise ValueError(f"missing scene data for {held!r}")
        net = networks.get(held)
        if net is None:
            if not train_missing:
                raise ValueError(f"no checkpoint for held-out scene {held!r}")
            train_data = [d for n in names if n != held for d in data_by_scene[n]]
            log.info("training fold %s on %d samples", held, sum(len(d.samples) for d in train_data))
            res = train_fold(train_data, network_config, train_config)
            net = res.network
            curves[held] = res.losses
            if on_trained is not None:
                on_trained(held, res)
        for data in data_by_scene[held]:
            preds = predict_variants(net, data, social, variants)
            for v in variants:
                errors[v].extend(_errors(data, preds[v]))
            obs, _ = stack_samples(data.samples)
            lin_errors.extend(_errors(data, linear_baseline(obs, network_config.t_pred)))
    reports = {v: build_report(v, errors[v], fingerprint, names) for v in variants}
    return BenchmarkResult(reports, build_report("linear", lin_errors, fingerprint, names), curves)


# ---------------------------------------------------------------------------
# record-period swap experiment


@dataclass
class DynamicMapResult:
    scene: str
    window_ids: list[int]  # indices into the scene's saved windows
    periods: list[tuple[int, int]]  # first/last frame of each record period
    test_sizes: list[int]
    ade: np.ndarray  # (3, 3): row = test set, column = map
    fde: np.ndarray

    @property
    def diagonal_best(self) -> list[bool]:
        """Per column: does the matching test set give the smallest ADE in that column?"""
        return [bool(self.ade[j, j] <= self.ade[:, j].min()) for j in range(self.ade.shape[1])]

    @property
    def row_diagonal_best(self) -> list[bool]:
        """Per test set: is its own map the best of the three?"""
        return [bool(self.ade[i, i] <= self.ade[i].min()) for i in range(self.ade.shape[0])]

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "window_ids": self.window_ids,
            "periods": [list(p) for p in self.periods],
            "test_sizes": self.test_sizes,
            "ade": self.ade.tolist(),
            "fde": self.fde.tolist(),
            "diagonal_best_per_column": self.diagonal_best,
            "diagonal_best_per_row": self.row_diagonal_best,
        }

    def table(self) -> str:
        head = "test set " + "".join(f"{'M(T_' + c + ')':>16}" for c in "abc"[: len(self.window_ids)])
        rows = [head]
        for i, c in enumerate("abc"[: len(self.window_ids)]):
            cells = "".join(f"{self.ade[i, j]:>9.3f}/{self.fde[i, j]:<6.3f}" for j in range(len(self.window_ids)))
            rows.append(f"X_{c:<7}" + cells)
        rows.append(f"diagonal best per column: {self.diagonal_best}")
        return "\n".join(rows)


def _eligible_windows(data: SceneData, min_samples: int) -> list[int]:
    counts: dict[int, int] = {}
    for wi in data.window_index:
        if wi is not None:
            counts[wi] = counts.get(wi, 0) + 1
    return [w for w in sorted(counts) if counts[w] >= min_samples]


def dynamic_map_experiment(
    net: BGMNetwork,
    data_list: Sequence[SceneData],
    social: SocialParams | None,
    min_samples: int = 20,
    window_ids: Sequence[int] | None = None,
) -> DynamicMapResult:
    """Evaluate three record periods' test sets against each period's complete map.

    Test set ``X_x`` holds the samples whose own record window is ``T_x``.
    Without explicit ``window_ids`` the first, middle and last eligible
    windows of the first recording with three eligible windows are used.
    """
    chosen = None
    for data in data_list:
        elig = _eligible_windows(data, min_samples)
        if window_ids is not None:
            if all(w in elig for w in window_ids):
                chosen = (data, list(window_ids))
                break
        elif len(elig) >= 3:
            chosen = (data, [elig[0], elig[len(elig) // 2], elig[-1]])
            break
    if chosen is None:
        raise ValueError("insufficient record windows with enough test samples in the scene")
    data, wids = chosen
    _, fut = stack_samples(data.samples)
    m = len(wids)
    ade_m = np.zeros((m, m))
    fde_m = np.zeros((m, m))
    members = [[k for k, w in enumerate(data.window_index) if w == wi] for wi in wids]
    for j, wj in enumerate(wids):
        prelim = preliminary(net, data, True, data.patches_for_map(wj))
        for i, rows in enumerate(members):
            pred = refine_scene(data, prelim[rows], social, subset=rows) if social is not None else prelim[rows]
            d = np.sqrt(np.sum((pred - fut[rows]) ** 2, axis=-1))
            ade_m[i, j] = d.mean()
            fde_m[i, j] = d[:, -1].mean()
    sizes = [len(rows) for rows in members]
    periods = [(data.windows[w].window.frames[0], data.windows[w].window.frames[-1]) for w in wids]
    return DynamicMapResult(data.scene.name, wids, periods, sizes, ade_m, fde_m)
