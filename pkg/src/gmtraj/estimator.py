"""scikit-learn compatible wrappers.

Trajectory estimators take ``X`` of shape ``(n_samples, t_obs, 2)`` (world
meters) and predict ``(n_samples, t_pred, 2)``. Local guidance maps travel
as a keyword argument because they are per-sample side inputs, not
features of ``X``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .evaluation import linear_baseline
from .gmap import normalize_patch
from .model import BGMNetwork, NetworkConfig, TrainConfig, to_agent_frame, train_network
from .social import SocialParams, refine_group

__all__ = [
    "check_trajectories",
    "check_maps",
    "BGMRegressor",
    "LinearTrajectoryRegressor",
    "SocialRefiner",
]


def check_trajectories(X, length: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a ``(n, T, 2)`` float array of finite points."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{name} must have shape (n_samples, n_steps, 2), got {arr.shape}")
    if length is not None and arr.shape[1] != length:
        raise ValueError(f"{name} must have {length} steps per trajectory, got {arr.shape[1]}")
    if len(arr) == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    return arr


def check_maps(maps, n: int, side: int) -> np.ndarray | None:
    if maps is None:
        return None
    arr = np.asarray(maps, dtype=np.float64)
    if arr.shape != (n, side, side):
        raise ValueError(f"maps must have shape ({n}, {side}, {side}), got {arr.shape}")
    if np.any(arr < 0):
        raise ValueError("maps hold counts and must be non-negative")
    return arr


def _ade_score(pred, y) -> float:
    return -float(np.mean(np.sqrt(np.sum((pred - y) ** 2, axis=-1))))


class BGMRegressor(BaseEstimator):
    """History encoder + context CNN + one-shot decoder trained on displacement loss.

    Parameters
    ----------
    t_obs, t_pred : int
        Observation and prediction horizons in frames.
    epochs, lr, batch_size, seed :
        Adam schedule. ``batch_size=None`` takes one full-dataset step per epoch.
    use_context : bool
        When False the context branch is replaced by a zero feature.
    scalar_scale_weights : bool
        Use one scalar per prefix length instead of a matrix.
    augment : bool
        Train on a random square-grid symmetry of every sample.
    """

    def __init__(
        self,
        t_obs: int = 8,
        t_pred: int = 12,
        embed: int = 64,
        hidden: int = 64,
        feature: int = 256,
        patch: int = 32,
        epochs: int = 500,
        lr: float = 0.01,
        batch_size: int | None = None,
        seed: int = 0,
        use_context: bool = True,
        scalar_scale_weights: bool = False,
        augment: bool = False,
    ):
        self.t_obs = t_obs
        self.t_pred = t_pred
        self.embed = embed
        self.hidden = hidden
        self.feature = feature
        self.patch = patch
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.use_context = use_context
        self.scalar_scale_weights = scalar_scale_weights
        self.augment = augment

    def _network_config(self) -> NetworkConfig:
        return NetworkConfig(
            t_obs=self.t_obs,
            t_pred=self.t_pred,
            embed=self.embed,
            hidden=self.hidden,
            feature=self.feature,
            patch=self.patch,
            scalar_scale_weights=self.scalar_scale_weights,
        )

    def fit(self, X, y, maps=None):
        X = check_trajectories(X, self.t_obs)
        y = check_trajectories(y, self.t_pred, name="y")
        if len(X) != len(y):
            raise ValueError(f"X and y hold {len(X)} and {len(y)} samples")
        maps = check_maps(maps, len(X), self.patch)
        patches = normalize_patch(maps) if (maps is not None and self.use_context) else None
        tc = TrainConfig(
            epochs=self.epochs, lr=self.lr, seed=self.seed, batch_size=self.batch_size,
            use_context=self.use_context, augment=self.augment,
        )
        result = train_network(X, y, patches, self._network_config(), tc)
        self.network_ = result.network
        self.loss_curve_ = result.losses
        return self

    @classmethod
    def from_network(cls, network: BGMNetwork, **params) -> "BGMRegressor":
        cfg = network.config
        est = cls(
            t_obs=cfg.t_obs, t_pred=cfg.t_pred, embed=cfg.embed, hidden=cfg.hidden, feature=cfg.feature,
            patch=cfg.patch, scalar_scale_weights=cfg.scalar_scale_weights, **params,
        )
        est.network_ = network
        est.loss_curve_ = []
        return est

    def predict(self, X, maps=None):
        check_is_fitted(self, "network_")
        X = check_trajectories(X, self.t_obs)
        maps = check_maps(maps, len(X), self.patch)
        rel, anchor = to_agent_frame(X)
        patches = normalize_patch(maps) if maps is not None else None
        return self.network_.predict_offsets(rel, patches, use_context=self.use_context) + anchor

    def score(self, X, y, maps=None) -> float:
        """Negative mean ADE (higher is better)."""
        return _ade_score(self.predict(X, maps), check_trajectories(y, self.t_pred, name="y"))


class LinearTrajectoryRegressor(BaseEstimator):
    """Least-squares line per coordinate, extrapolated; nothing to learn."""

    def __init__(self, t_pred: int = 12):
        self.t_pred = t_pred

    def fit(self, X, y=None):
        check_trajectories(X)
        self.fitted_ = True
        return self

    def predict(self, X):
        check_is_fitted(self, "fitted_")
        return linear_baseline(check_trajectories(X), self.t_pred)

    def score(self, X, y) -> float:
        return _ade_score(self.predict(X), check_trajectories(y, self.t_pred, name="y"))


class SocialRefiner(TransformerMixin, BaseEstimator):
    """Energy-field refinement of preliminary predictions.

    ``transform`` takes the preliminary predictions plus the observed tracks
    and a ``groups`` label per sample; samples sharing a label are each
    other's neighbours.
    """

    def __init__(
        self,
        lambda_d: float = 1.0,
        lambda_i: float = 1.0,
        lambda_s: float = 0.2,
        r_d: float = 2.0,
        r_i: float = 1.5,
        r_s: float = 0.1,
        theta: float = 0.001,
        epsilon: float = 1e-6,
        k_max: int = 10,
        resolution: float = 0.1,
        v_cap: float = 10.0,
    ):
        self.lambda_d = lambda_d
        self.lambda_i = lambda_i
        self.lambda_s = lambda_s
        self.r_d = r_d
        self.r_i = r_i
        self.r_s = r_s
        self.theta = theta
        self.epsilon = epsilon
        self.k_max = k_max
        self.resolution = resolution
        self.v_cap = v_cap

    def _params(self) -> SocialParams:
        return SocialParams(**self.get_params())

    def fit(self, X=None, y=None, **fit_params):
        self.params_ = self._params()
        return self

    def transform(self, X, observed=None, groups=None, agent_ids=None):
        check_is_fitted(self, "params_")
        X = check_trajectories(X, name="predictions")
        if observed is None:
            raise ValueError("observed tracks are required")
        observed = check_trajectories(observed, name="observed")
        if len(observed) != len(X):
            raise ValueError("predictions and observed tracks differ in length")
        groups = np.zeros(len(X), dtype=np.int64) if groups is None else np.asarray(groups)
        ids = np.arange(len(X)) if agent_ids is None else np.asarray(agent_ids)
        out = np.empty_like(X)
        self.orders_ = np.zeros(len(X), dtype=np.int64)
        for g in np.unique(groups):
            rows = np.flatnonzero(groups == g)
            refined, ks = refine_group(X[rows], observed[rows], ids[rows].tolist(), self.params_)
            out[rows] = refined
            self.orders_[rows] = ks
        return out
