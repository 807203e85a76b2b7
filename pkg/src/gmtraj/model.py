"""The trainable predictor: multi-scale history encoder, context CNN and one-shot decoder.

All trajectories enter in the agent frame (positions minus the last
observed point) and the decoder emits offsets from that point, so a
zero decoder predicts a standing agent.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import nn
from .nn import Conv2d, Linear, LSTMParams, Tensor

log = logging.getLogger(__name__)

__all__ = [
    "NetworkConfig",
    "TrainConfig",
    "TrainingDivergedError",
    "BGMNetwork",
    "to_agent_frame",
    "displacement_loss",
    "train_network",
    "TrainResult",
    "SYMMETRIES",
    "apply_symmetry",
]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    t_obs: int = 8
    t_pred: int = 12
    embed: int = 64
    hidden: int = 64
    feature: int = 256
    patch: int = 32
    conv_channels: tuple[int, int] = (8, 16)
    decoder_width: int = 64  # hidden units per predicted step
    scalar_scale_weights: bool = False

    def __post_init__(self):
        if self.patch % 4:
            raise ValueError("patch side must be divisible by 4 (two 2x2 poolings)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        if "conv_channels" in d:
            d["conv_channels"] = tuple(d["conv_channels"])
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    lr: float = 0.01
    seed: int = 0
    batch_size: int | None = None  # None: one full-dataset step per epoch
    chunk_size: int = 512  # forward/backward chunking for the full-batch mode
    use_context: bool = True
    augment: bool = False  # random grid symmetry (rotation by 90 degrees / mirror) per sample and step


# The eight symmetries of the square grid as (swap x/y, negate x, negate y),
# applied in that order. Grid rows follow x and columns follow y, so the
# same element acts on a local map by transpose and axis flips.
SYMMETRIES = tuple((sw, nx, ny) for sw in (False, True) for nx in (False, True) for ny in (False, True))


def apply_symmetry(points: np.ndarray, patches: np.ndarray | None, element) -> tuple[np.ndarray, np.ndarray | None]:
    """Transform ``(N, T, 2)`` agent-frame points and ``(N, S, S)`` patches by one grid symmetry."""
    swap, neg_x, neg_y = element
    pts = points[..., ::-1] if swap else points
    pts = pts * np.array([-1.0 if neg_x else 1.0, -1.0 if neg_y else 1.0])
    if patches is None:
        return pts, None
    q = np.swapaxes(patches, -1, -2) if swap else patches
    if neg_x:
        q = q[..., ::-1, :]
    if neg_y:
        q = q[..., :, ::-1]
    return pts, q


def _augment(rng, rel_obs, rel_fut, patches):
    choice = rng.integers(len(SYMMETRIES), size=len(rel_obs))
    obs, fut = rel_obs.copy(), rel_fut.copy()
    pat = None if patches is None else patches.copy()
    for e, element in enumerate(SYMMETRIES):
        rows = np.flatnonzero(choice == e)
        if len(rows) == 0 or e == 0:
            continue
        obs[rows], p = apply_symmetry(rel_obs[rows], None if patches is None else patches[rows], element)
        fut[rows], _ = apply_symmetry(rel_fut[rows], None, element)
        if pat is not None:
            pat[rows] = p
    return obs, fut, pat


def to_agent_frame(observed: np.ndarray, future: np.ndarray | None = None):
    """Shift ``(N, T, 2)`` arrays so each agent's last observed point is the origin."""
    anchor = observed[:, -1:, :]
    rel_obs = observed - anchor
    if future is None:
        return rel_obs, anchor
    return rel_obs, future - anchor, anchor


class BGMNetwork:
    """Parameter container plus forward computation.

    Parameters are created in a fixed order from one seeded generator, so a
    seed fully determines the initial network.
    """

    def __init__(self, config: NetworkConfig = NetworkConfig(), seed: int = 0):
        self.config = cfg = config
        rng = np.random.default_rng(seed)
        self.embedding = Linear.init(rng, 2, cfg.embed, "encoder.embedding")
        self.lstm = LSTMParams.init(rng, cfg.embed, cfg.hidden, "encoder.lstm")
        if cfg.scalar_scale_weights:
            self.scale_weights = [
                nn.parameter(np.full((1, 1), 1.0 / cfg.t_obs), f"encoder.scale.{t}") for t in range(cfg.t_obs)
            ]
        else:
            self.scale_weights = [
                nn.parameter(nn.xavier_uniform(rng, (cfg.hidden, cfg.hidden), cfg.hidden, cfg.hidden), f"encoder.scale.{t}")
                for t in range(cfg.t_obs)
            ]
        self.scale_bias = nn.parameter(np.zeros(cfg.hidden), "encoder.scale_bias")
        self.seq_mlp = Linear.init(rng, cfg.hidden, cfg.feature, "encoder.mlp")

        c1, c2 = cfg.conv_channels
        self.conv1 = Conv2d.init(rng, 1, c1, 3, "context.conv1")
        self.conv2 = Conv2d.init(rng, c1, c2, 3, "context.conv2")
        flat = c2 * (cfg.patch // 4) ** 2
        self.ctx_proj = Linear.init(rng, flat, cfg.feature, "context.proj")

        self.dec_hidden = Linear.init(rng, 2 * cfg.feature, cfg.t_pred * cfg.decoder_width, "decoder.hidden")
        self.dec_out = Linear.init(rng, cfg.t_pred * cfg.decoder_width, cfg.t_pred * 2, "decoder.out")

    # -- parameter access ---------------------------------------------------

    def groups(self) -> dict[str, list[Tensor]]:
        return {
            "encoder": self.embedding.parameters() + self.lstm.parameters() + self.scale_weights
            + [self.scale_bias] + self.seq_mlp.parameters(),
            "context": self.conv1.parameters() + self.conv2.parameters() + self.ctx_proj.parameters(),
            "decoder": self.dec_hidden.parameters() + self.dec_out.parameters(),
        }

    def parameters(self) -> list[Tensor]:
        return [p for ps in self.groups().values() for p in ps]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.parameters()}
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {value.shape} != model shape {p.shape}")
            p.data = value.copy()

    def save(self, path, meta: dict | None = None) -> None:
        info = {"network": self.config.to_dict()}
        info.update(meta or {})
        nn.save_tensors(path, self.state_dict(), info)

    @classmethod
    def load(cls, path, expect: NetworkConfig | None = None) -> tuple["BGMNetwork", dict]:
        tensors, meta = nn.load_tensors(path)
        cfg = NetworkConfig.from_dict(meta["network"])
        if expect is not None and cfg != expect:
            raise ValueError(f"checkpoint network {cfg} does not match configured {expect}")
        net = cls(cfg)
        net.load_state_dict(tensors)
        return net, meta

    # -- forward ------------------------------------------------------------

    def encode_history(self, rel_obs: np.ndarray) -> Tensor:
        """Sequence feature ``(N, feature)`` for agent-frame observations ``(N, t_obs, 2)``.

        The LSTM starts from a zero state for every prefix length, so the
        state reached after ``t`` steps of one pass over the full observation
        equals the final state of a separate run on the length-``t`` prefix.
        """
        cfg = self.config
        rel_obs = np.asarray(rel_obs, dtype=np.float64)
        if rel_obs.ndim != 3 or rel_obs.shape[1:] != (cfg.t_obs, 2):
            raise nn.ShapeError(f"encode_history: expected (N, {cfg.t_obs}, 2), got {rel_obs.shape}")
        n = rel_obs.shape[0]
        h = Tensor(np.zeros((n, cfg.hidden)))
        c = Tensor(np.zeros((n, cfg.hidden)))
        total = None
        for t in range(cfg.t_obs):
            x = self.embedding(Tensor(rel_obs[:, t, :]))
            h, c = nn.lstm_cell(x, (h, c), self.lstm)
            w = self.scale_weights[t]
            term = nn.mul(h, w) if cfg.scalar_scale_weights else nn.matmul(h, w)
            total = term if total is None else nn.add(total, term)
        f_s = nn.add(total, self.scale_bias)
        return nn.relu(self.seq_mlp(f_s))

    def encode_context(self, patches: np.ndarray) -> Tensor:
        """Context feature ``(N, feature)`` for normalized patches ``(N, S, S)``."""
        cfg = self.config
        patches = np.asarray(patches, dtype=np.float64)
        if patches.ndim != 3 or patches.shape[1:] != (cfg.patch, cfg.patch):
            raise nn.ShapeError(f"encode_context: expected (N, {cfg.patch}, {cfg.patch}), got {patches.shape}")
        x = Tensor(patches[:, None, :, :])
        x = nn.avg_pool_2d(nn.relu(self.conv1(x)))
        x = nn.avg_pool_2d(nn.relu(self.conv2(x)))
        return self.ctx_proj(nn.flatten(x))

    def decode(self, seq: Tensor, ctx: Tensor) -> Tensor:
        """Offsets ``(N, t_pred, 2)`` from the joint 512-d feature."""
        joint = nn.concat([seq, ctx], axis=1)
        hidden = nn.relu(self.dec_hidden(joint))
        out = self.dec_out(hidden)
        return nn.reshape(out, (out.shape[0], self.config.t_pred, 2))

    def forward(self, rel_obs: np.ndarray, patches: np.ndarray | None, use_context: bool = True) -> Tensor:
        seq = self.encode_history(rel_obs)
        if use_context and patches is not None:
            ctx = self.encode_context(patches)
        else:
            ctx = Tensor(np.zeros((seq.shape[0], self.config.feature)))
        return self.decode(seq, ctx)

    def predict_offsets(self, rel_obs, patches, use_context: bool = True, chunk: int = 1024) -> np.ndarray:
        outs = []
        for lo in range(0, len(rel_obs), chunk):
            p = None if patches is None else patches[lo:lo + chunk]
            outs.append(self.forward(rel_obs[lo:lo + chunk], p, use_context).data)
        if not outs:
            return np.zeros((0, self.config.t_pred, 2))
        return np.concatenate(outs)


def displacement_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Sum over agents and steps of the Euclidean point error (not squared)."""
    return nn.tensor_sum(nn.norm(nn.sub(pred, Tensor(target)), axis=-1))


@dataclass
class TrainResult:
    network: BGMNetwork
    losses: list[float] = field(default_factory=list)  # summed loss per epoch


def _chunked_grad(net, params, rel_obs, rel_fut, patches, use_context, chunk):
    total = 0.0
    grads = [np.zeros_like(p.data) for p in params]
    for lo in range(0, len(rel_obs), chunk):
        p = None if patches is None else patches[lo:lo + chunk]
        loss = displacement_loss(net.forward(rel_obs[lo:lo + chunk], p, use_context), rel_fut[lo:lo + chunk])
        for acc, g in zip(grads, nn.grad(loss, params)):
            acc += g
        total += float(loss.data)
    return total, grads


def train_network(
    observed: np.ndarray,
    future: np.ndarray,
    patches: np.ndarray | None,
    network_config: NetworkConfig = NetworkConfig(),
    train_config: TrainConfig = TrainConfig(),
    callback: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Fit the network with Adam on world-frame ``observed``/``future`` arrays.

    The gradient of each step is the summed loss gradient divided by the
    number of samples in the step. ``patches`` are normalized local maps, or
    None for a context-free model.
    """
    observed = np.asarray(observed, dtype=np.float64)
    future = np.asarray(future, dtype=np.float64)
    n = len(observed)
    if n == 0:
        raise ValueError("training set is empty")
    rel_obs, rel_fut, _ = to_agent_frame(observed, future)
    net = BGMNetwork(network_config, seed=train_config.seed)
    params = net.parameters()
    opt = nn.Adam(params, lr=train_config.lr)
    use_ctx = train_config.use_context and patches is not None
    shuffle_rng = np.random.default_rng(train_config.seed + 1)
    aug_rng = np.random.default_rng(train_config.seed + 2)
    result = TrainResult(net)
    for epoch in range(train_config.epochs):
        if train_config.batch_size is None or train_config.batch_size >= n:
            batches = [np.arange(n)]
        else:
            order = shuffle_rng.permutation(n)
            batches = [order[i:i + train_config.batch_size] for i in range(0, n, train_config.batch_size)]
        epoch_loss = 0.0
        for idx in batches:
            o, f, p = rel_obs[idx], rel_fut[idx], (patches[idx] if use_ctx else None)
            if train_config.augment:
                o, f, p = _augment(aug_rng, o, f, p)
            loss, grads = _chunked_grad(net, params, o, f, p, use_ctx, train_config.chunk_size)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergedError(
                    f"non-finite loss/gradient at epoch {epoch}; recent losses {result.losses[-5:]}"
                )
            inv = 1.0 / len(idx)
            opt.step([g * inv for g in grads])
            epoch_loss += loss
        result.losses.append(epoch_loss)
        if callback is not None:
            callback(epoch, epoch_loss)
        log.debug("epoch %d loss %.6f", epoch, epoch_loss)
    return result
