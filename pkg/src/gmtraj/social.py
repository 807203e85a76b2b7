"""Social energy fields and the gradient-descent interaction predictor.

Each agent gets its own scalar field on a regular grid: cone-shaped wells
along its own preliminary path (destination), direction/speed-weighted
wells or hills around neighbours' paths (interplay), and small hills around
neighbours' points (etiquette). Refinement moves every predicted point down
the field's finite-difference gradient until the summed path energy settles.

Field grids store values at nodes: ``values[r, c]`` is the energy at
``origin + (r, c) * resolution`` (x along rows, y along columns).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gmap import GridSpec
from .ingest import TrajPoint

log = logging.getLogger(__name__)

__all__ = [
    "SocialParams",
    "EnergyField",
    "NeighborSet",
    "RefineResult",
    "kernel",
    "displacement",
    "direction_weight",
    "velocity_ratio",
    "field_spec_for",
    "build_energy_field",
    "discriminant",
    "energy_gradient",
    "refine",
    "refine_group",
]


@dataclass(frozen=True)
class SocialParams:
    lambda_d: float = 1.0
    lambda_i: float = 1.0
    lambda_s: float = 0.2
    r_d: float = 2.0
    r_i: float = 1.5
    r_s: float = 0.1
    theta: float = 0.001
    epsilon: float = 1e-6
    k_max: int = 10
    resolution: float = 0.1
    v_cap: float = 10.0

    def __post_init__(self):
        if min(self.r_d, self.r_i, self.r_s) <= 0:
            raise ValueError("energy radii must be positive")
        if self.theta <= 0 or self.k_max < 1 or self.resolution <= 0:
            raise ValueError(f"invalid social params {self}")

    @property
    def max_radius(self) -> float:
        return max(self.r_d, self.r_i, self.r_s)


@dataclass(frozen=True)
class EnergyField:
    owner: int
    spec: GridSpec
    values: np.ndarray  # (H, W)
    e_d: np.ndarray
    e_i: np.ndarray
    e_s: np.ndarray

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.spec.origin[0] + np.arange(self.spec.height) * self.spec.resolution
        ys = self.spec.origin[1] + np.arange(self.spec.width) * self.spec.resolution
        return xs, ys


@dataclass(frozen=True)
class NeighborSet:
    """Other agents sharing the prediction period with the owner."""

    ids: tuple[int, ...]
    predictions: tuple[np.ndarray, ...]  # each (t_pred, 2)
    displacements: tuple[np.ndarray, ...]  # first minus last observed point

    @classmethod
    def from_arrays(cls, ids, predictions, observed, owner: int | None = None) -> "NeighborSet":
        keep = [k for k, a in enumerate(ids) if a != owner]
        return cls(
            tuple(int(ids[k]) for k in keep),
            tuple(np.asarray(predictions[k], dtype=np.float64) for k in keep),
            tuple(displacement(observed[k]) for k in keep),
        )

    def __len__(self):
        return len(self.ids)


@dataclass
class RefineResult:
    points: np.ndarray
    k: int  # number of updates applied
    history: list[float] = field(default_factory=list)  # D before and after each update


# ---------------------------------------------------------------------------
# closed-form pieces


def kernel(p, p_o, r: float, a: float):
    """Cone of height ``a`` at ``p_o`` falling linearly to zero at distance ``r``."""
    d = np.linalg.norm(np.asarray(p, dtype=np.float64) - np.asarray(p_o, dtype=np.float64), axis=-1)
    return np.where(d <= r, a - (a / r) * d, 0.0)


def displacement(observed) -> np.ndarray:
    obs = np.asarray(observed, dtype=np.float64)
    return obs[0] - obs[-1]


def _dv_from_displacements(di: np.ndarray, dj: np.ndarray, v_cap: float) -> tuple[float, float]:
    ni, nj = float(np.linalg.norm(di)), float(np.linalg.norm(dj))
    d = 0.0 if ni == 0 or nj == 0 else float(np.clip(di @ dj / (ni * nj), -1.0, 1.0))
    if ni == 0:
        v = v_cap if nj > 0 else 0.0
    else:
        v = min(nj / ni, v_cap)
    return d, v


def direction_weight(obs_i, obs_j) -> float:
    """Cosine between the two agents' observed displacements; 0 if either stands still."""
    return _dv_from_displacements(displacement(obs_i), displacement(obs_j), np.inf)[0]


def velocity_ratio(obs_i, obs_j, v_cap: float = 10.0) -> float:
    """Speed of ``j`` relative to ``i``, clamped to ``[0, v_cap]``."""
    return _dv_from_displacements(displacement(obs_i), displacement(obs_j), v_cap)[1]


# ---------------------------------------------------------------------------
# grid construction


def field_spec_for(points: np.ndarray, params: SocialParams) -> GridSpec:
    """Node grid over the bounding box of ``points`` padded by the largest radius."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    pad = params.max_radius + params.resolution
    res = params.resolution
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    h = int(math.ceil((hi[0] - lo[0]) / res)) + 1
    w = int(math.ceil((hi[1] - lo[1]) / res)) + 1
    return GridSpec(TrajPoint(float(lo[0]), float(lo[1])), res, h, w)


def _stamp(grid: np.ndarray, spec: GridSpec, centers: np.ndarray, amps: np.ndarray, r: float) -> None:
    """Add ``amp * (1 - d / r)`` at every node within ``r`` of each center."""
    if len(centers) == 0:
        return
    res = spec.resolution
    origin = np.asarray(spec.origin)
    m = int(math.ceil(r / res)) + 1
    off = np.arange(-m, m + 1)
    base = np.floor((centers - origin) / res).astype(np.int64)  # (K, 2)
    rows = base[:, 0, None, None] + off[None, :, None]  # (K, S, 1)
    cols = base[:, 1, None, None] + off[None, None, :]  # (K, 1, S)
    rows, cols = np.broadcast_arrays(rows, cols)
    dx = origin[0] + rows * res - centers[:, 0, None, None]
    dy = origin[1] + cols * res - centers[:, 1, None, None]
    dist = np.sqrt(dx * dx + dy * dy)
    val = amps[:, None, None] * (1.0 - dist / r)
    ok = (dist <= r) & (rows >= 0) & (rows < spec.height) & (cols >= 0) & (cols < spec.width)
    flat = rows[ok] * spec.width + cols[ok]
    grid += np.bincount(flat, weights=val[ok], minlength=grid.size).reshape(grid.shape)


def build_energy_field(
    prediction,
    neighbors: NeighborSet | None,
    params: SocialParams = SocialParams(),
    spec: GridSpec | None = None,
    observed=None,
    owner: int = -1,
) -> EnergyField:
    """Energy field for one agent from its own and its neighbours' preliminary paths.

    ``observed`` (the owner's observed track) is needed whenever there are
    neighbours, to weight the interplay term by direction and speed.
    """
    own = np.asarray(prediction, dtype=np.float64).reshape(-1, 2)
    if len(own) == 0:
        raise ValueError("empty own prediction")
    neighbors = neighbors or NeighborSet((), (), ())
    if spec is None:
        spec = field_spec_for(np.concatenate([own, *neighbors.predictions]) if len(neighbors) else own, params)

    e_d = np.zeros(spec.shape)
    e_i = np.zeros(spec.shape)
    e_s = np.zeros(spec.shape)
    _stamp(e_d, spec, own, np.full(len(own), -1.0), params.r_d)
    if len(neighbors):
        if observed is None:
            raise ValueError("observed track of the owner is required when neighbours are present")
        di = displacement(observed)
        centers, weights = [], []
        for pred_j, dj in zip(neighbors.predictions, neighbors.displacements):
            d, v = _dv_from_displacements(di, dj, params.v_cap)
            centers.append(pred_j)
            weights.append(np.full(len(pred_j), d * v))
        centers = np.concatenate(centers)
        weights = np.concatenate(weights)
        _stamp(e_i, spec, centers, -weights, params.r_i)
        _stamp(e_s, spec, centers, np.ones(len(centers)), params.r_s)
    values = params.lambda_d * e_d + params.lambda_i * e_i + params.lambda_s * e_s
    return EnergyField(owner, spec, values, e_d, e_i, e_s)


# ---------------------------------------------------------------------------
# evaluation on the grid


def _bilinear(grid: np.ndarray, spec: GridSpec, points: np.ndarray) -> tuple[np.ndarray, int]:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    u = (pts[:, 0] - spec.origin[0]) / spec.resolution
    v = (pts[:, 1] - spec.origin[1]) / spec.resolution
    inside = (u >= 0) & (u <= spec.height - 1) & (v >= 0) & (v <= spec.width - 1)
    out = np.zeros(len(pts))
    if inside.any():
        uu, vv = u[inside], v[inside]
        r0 = np.minimum(np.floor(uu).astype(np.int64), spec.height - 2) if spec.height > 1 else np.zeros(len(uu), np.int64)
        c0 = np.minimum(np.floor(vv).astype(np.int64), spec.width - 2) if spec.width > 1 else np.zeros(len(vv), np.int64)
        fr, fc = uu - r0, vv - c0
        r1 = np.minimum(r0 + 1, spec.height - 1)
        c1 = np.minimum(c0 + 1, spec.width - 1)
        out[inside] = (
            grid[r0, c0] * (1 - fr) * (1 - fc)
            + grid[r1, c0] * fr * (1 - fc)
            + grid[r0, c1] * (1 - fr) * fc
            + grid[r1, c1] * fr * fc
        )
    return out, int((~inside).sum())


def sample_field(f: EnergyField, points) -> np.ndarray:
    vals, outside = _bilinear(f.values, f.spec, points)
    if outside:
        log.warning("%d point(s) outside the energy field of agent %s evaluated as 0", outside, f.owner)
    return vals


def discriminant(f: EnergyField, prediction) -> float:
    """Summed (bilinearly interpolated) energy along a path."""
    return float(sample_field(f, prediction).sum())


def _gradient_grids(f: EnergyField) -> tuple[np.ndarray, np.ndarray]:
    if min(f.values.shape) < 2:
        return np.zeros_like(f.values), np.zeros_like(f.values)
    gx, gy = np.gradient(f.values, f.spec.resolution)
    return gx, gy


def energy_gradient(f: EnergyField, points, _grids=None) -> np.ndarray:
    """Central-difference gradient of the field, interpolated at ``points``."""
    gx, gy = _grids if _grids is not None else _gradient_grids(f)
    ax, _ = _bilinear(gx, f.spec, points)
    ay, _ = _bilinear(gy, f.spec, points)
    return np.stack([ax, ay], axis=1)


def refine(prediction, f: EnergyField, params: SocialParams = SocialParams()) -> RefineResult:
    """Descend the field point by point until the path energy changes by at most epsilon.

    One update moves every point by ``-theta * grad E``. The loop stops after
    the first update whose change in path energy is within ``epsilon``, or
    after ``k_max`` updates, and returns the points after that update.
    """
    pts = np.asarray(prediction, dtype=np.float64).reshape(-1, 2).copy()
    grids = _gradient_grids(f)
    d_prev = discriminant(f, pts)
    history = [d_prev]
    k = 0
    for k in range(1, params.k_max + 1):
        pts = pts - params.theta * energy_gradient(f, pts, grids)
        d_now = discriminant(f, pts)
        history.append(d_now)
        if abs(d_now - d_prev) <= params.epsilon:
            break
        d_prev = d_now
    return RefineResult(pts, k, history)


def refine_group(
    predictions: np.ndarray,
    observed: np.ndarray,
    ids: Sequence[int],
    params: SocialParams = SocialParams(),
) -> tuple[np.ndarray, list[int]]:
    """Refine every agent of one prediction period against the others' preliminary paths.

    All fields are built from the unrefined predictions, so the result does
    not depend on the processing order.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    out = np.empty_like(predictions)
    ks = []
    for k, aid in enumerate(ids):
        others = [j for j in range(len(ids)) if j != k]
        nb = NeighborSet(
            tuple(int(ids[j]) for j in others),
            tuple(predictions[j] for j in others),
            tuple(displacement(observed[j]) for j in others),
        )
        fld = build_energy_field(predictions[k], nb, params, observed=observed[k], owner=int(aid))
        res = refine(predictions[k], fld, params)
        out[k] = res.points
        ks.append(res.k)
    return out, ks
