"""Attention-based spatio-temporal graph convolutional forecaster.

Tensors are laid out ``(batch, N, channels, T)``. Every block applies
temporal attention to its input, computes spatial attention from the
attended input, runs the attention-masked Chebyshev convolution followed by
a rectifier, convolves along time, and layer-normalizes the sum with a 1x1
projection of the block input. A final projection maps the last block to
``N x N_H`` forecasts.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .spectral import InvalidInputError
from .vmd import InvalidConfigError

DTYPE = torch.float64
CALENDAR_CHANNELS = ("time_of_day", "day_of_week")
VARIANTS = ("v1", "v2", "v3")


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_nodes: int
    in_channels: int
    window: int = 12
    horizon: int = 12
    blocks: int = 2
    cheb_order: int = 3
    channels: int = 16
    time_kernel: int = 3
    time_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("num_nodes", "in_channels", "window", "horizon", "blocks",
                     "cheb_order", "channels", "time_kernel", "time_stride"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1")
        if self.time_kernel > self.window:
            raise InvalidConfigError("time_kernel cannot exceed the window length")
        if self.time_kernel % 2 == 0:
            raise InvalidConfigError("time_kernel must be odd for same padding")

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# feature assembly


@dataclass
class FeatureTensor:
    data: np.ndarray  # (N, d, T)
    channel_map: list[str]

    @property
    def num_modes(self) -> int:
        return sum(1 for c in self.channel_map if c.startswith("mode_"))


def channel_names(num_modes: int, variant: str) -> list[str]:
    if variant not in VARIANTS:
        raise InvalidConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    names = [f"mode_{k + 1}" for k in range(num_modes)] + list(CALENDAR_CHANNELS)
    if variant == "v1":
        names.append("signal")
    elif variant == "v3":
        names.append("phi")
    return names


def calendar_features(timestamps) -> tuple[np.ndarray, np.ndarray]:
    """Time of day in ``[0, 1)`` and day of week scaled to ``[0, 1]``."""
    ts = list(timestamps)
    tod = np.array([(t.hour * 3600 + t.minute * 60 + t.second) / 86400.0 for t in ts])
    dow = np.array([t.weekday() / 6.0 for t in ts])
    return tod, dow


def assemble_features(modes, raw, phi, variant: str, timestamps, window=None) -> FeatureTensor:
    """Stack per-node channels into an ``N x d x T`` tensor.

    ``modes`` is ``(N, K, T)``; ``raw`` and ``phi`` are ``(N, T)``;
    ``timestamps`` has ``T`` entries shared by all nodes. ``window`` is an
    optional ``slice`` along time.
    """
    modes = np.asarray(modes, dtype=np.float64)
    if modes.ndim == 2:
        modes = modes[None]
    N, K, T = modes.shape
    names = channel_names(K, variant)
    tod, dow = calendar_features(timestamps)
    if tod.shape[0] != T:
        raise InvalidInputError("timestamps and modes disagree on length")
    parts = [modes, np.broadcast_to(tod, (N, 1, T)), np.broadcast_to(dow, (N, 1, T))]
    if variant == "v1":
        if raw is None:
            raise InvalidConfigError("variant v1 needs the raw signal")
        parts.append(np.asarray(raw, dtype=np.float64).reshape(N, 1, T))
    elif variant == "v3":
        if phi is None:
            raise InvalidConfigError("variant v3 needs the redemption signal")
        parts.append(np.asarray(phi, dtype=np.float64).reshape(N, 1, T))
    data = np.concatenate(parts, axis=1)
    if window is not None:
        data = data[..., window]
    return FeatureTensor(np.ascontiguousarray(data), names)


# ---------------------------------------------------------------------------
# block components


def _batched(X):
    if X.dim() == 3:
        return X.unsqueeze(0), True
    return X, False


def spatial_attention(X, W1, W2, W3, V_s, b_s):
    """Row-normalized node-to-node attention, shape ``(batch, N, N)``."""
    X, squeeze = _batched(X)
    if X.shape[1] != V_s.shape[0] or X.shape[2] != W3.shape[0] or X.shape[3] != W1.shape[0]:
        raise InvalidInputError(f"input shape {tuple(X.shape)} does not match spatial attention weights")
    lhs = torch.matmul(torch.matmul(X, W1), W2)           # (B, N, T)
    rhs = torch.einsum("c,bnct->bnt", W3, X)               # (B, N, T)
    score = torch.matmul(lhs, rhs.transpose(-1, -2))       # (B, N, N)
    S = torch.matmul(V_s, torch.sigmoid(score + b_s))
    out = torch.softmax(S, dim=-1)
    return out[0] if squeeze else out


def temporal_attention(X, U1, U2, U3, V_e, b_e):
    """Row-normalized step-to-step attention, shape ``(batch, T, T)``.

    ``U2`` is stored ``N x d``.
    """
    X, squeeze = _batched(X)
    if X.shape[1] != U1.shape[0] or X.shape[2] != U3.shape[0] or X.shape[3] != V_e.shape[0]:
        raise InvalidInputError(f"input shape {tuple(X.shape)} does not match temporal attention weights")
    lhs = torch.matmul(torch.einsum("bnct,n->btc", X, U1), U2.T)  # (B, T, N)
    rhs = torch.einsum("c,bnct->bnt", U3, X)                      # (B, N, T)
    E = torch.matmul(V_e, torch.sigmoid(torch.matmul(lhs, rhs) + b_e))
    out = torch.softmax(E, dim=-1)
    return out[0] if squeeze else out


def apply_temporal_attention(X, E):
    X, squeeze = _batched(X)
    if E.dim() == 2:
        E = E.unsqueeze(0)
    B, N, C, T = X.shape
    out = torch.matmul(X.reshape(B, N * C, T), E.transpose(-1, -2)).reshape(B, N, C, T)
    return out[0] if squeeze else out


def cheb_conv_attended(X, basis, S, theta):
    """``sum_m (T_m * S) X theta_m`` applied at every time step.

    ``basis`` is ``(M, N, N)``, ``S`` is ``(N, N)`` or ``(batch, N, N)`` and
    ``theta`` is ``(M, C_in, C_out)``. The result is linear in ``X``.
    """
    X, squeeze = _batched(X)
    if basis.shape[0] != theta.shape[0]:
        raise InvalidInputError(
            f"Chebyshev basis has order {basis.shape[0]} but theta has {theta.shape[0]}"
        )
    if S.dim() == 2:
        S = S.unsqueeze(0)
    masked = basis.unsqueeze(0) * S.unsqueeze(1)                  # (B, M, N, N)
    out = torch.einsum("bmij,bjct,mco->biot", masked, X, theta)
    return out[0] if squeeze else out


def conv_output_size(n: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (n + 2 * padding - kernel) // stride + 1


def time_convolution(H, kernel, bias=None, stride: int = 1, same: bool = True):
    """Convolve each node's channels along time.

    ``kernel`` is ``(C_out, C_in, 1, K_w)``. With ``same`` the time axis is
    zero-padded by ``K_w // 2`` on each side.
    """
    H, squeeze = _batched(H)
    kw = kernel.shape[-1]
    pad = kw // 2 if same else 0
    if kw > H.shape[-1] + 2 * pad:
        raise InvalidInputError(f"kernel width {kw} exceeds padded input length")
    out = F.conv2d(H.permute(0, 2, 1, 3), kernel, bias, stride=(1, stride), padding=(0, pad))
    out = out.permute(0, 2, 1, 3)
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# modules


def _uniform(rng: torch.Generator, shape, fan_in: int):
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return nn.Parameter((torch.rand(shape, generator=rng, dtype=DTYPE) * 2 - 1) * bound)


class StBlock(nn.Module):
    def __init__(self, num_nodes, in_channels, out_channels, window, cheb_order,
                 time_kernel=3, time_stride=1, rng=None):
        super().__init__()
        N, d, T, C, M = num_nodes, in_channels, window, out_channels, cheb_order
        rng = rng if rng is not None else torch.Generator().manual_seed(0)
        self.time_stride = time_stride
        self.W_1 = _uniform(rng, (T,), T)
        self.W_2 = _uniform(rng, (d, T), d)
        self.W_3 = _uniform(rng, (d,), d)
        self.V_s = _uniform(rng, (N, N), N)
        self.b_s = _uniform(rng, (N, N), N)
        self.U_1 = _uniform(rng, (N,), N)
        self.U_2 = _uniform(rng, (N, d), N)
        self.U_3 = _uniform(rng, (d,), d)
        self.V_e = _uniform(rng, (T, T), T)
        self.b_e = _uniform(rng, (T, T), T)
        self.theta = _uniform(rng, (M, d, C), M * d)
        self.time_kernel = _uniform(rng, (C, C, 1, time_kernel), C * time_kernel)
        self.time_bias = nn.Parameter(torch.zeros(C, dtype=DTYPE))
        self.residual_weight = _uniform(rng, (d, C), d)
        self.residual_bias = nn.Parameter(torch.zeros(C, dtype=DTYPE))
        self.ln_weight = nn.Parameter(torch.ones(C, dtype=DTYPE))
        self.ln_bias = nn.Parameter(torch.zeros(C, dtype=DTYPE))

    def residual(self, X):
        X = X[..., ::self.time_stride]
        return torch.einsum("bnct,co->bnot", X, self.residual_weight) \
            + self.residual_bias[None, None, :, None]

    def forward(self, X, basis):
        X, squeeze = _batched(X)
        E = temporal_attention(X, self.U_1, self.U_2, self.U_3, self.V_e, self.b_e)
        X_att = apply_temporal_attention(X, E)
        S = spatial_attention(X_att, self.W_1, self.W_2, self.W_3, self.V_s, self.b_s)
        G = torch.relu(cheb_conv_attended(X_att, basis, S, self.theta))
        H = time_convolution(G, self.time_kernel, self.time_bias, self.time_stride)
        Z = H + self.residual(X)
        out = F.layer_norm(Z.transpose(2, 3), (Z.shape[2],), self.ln_weight, self.ln_bias)
        out = out.transpose(2, 3)
        return out[0] if squeeze else out


class StModel(nn.Module):
    """Stacked ST blocks plus a per-node projection from ``C x T_w`` to ``N_H``."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        rng = torch.Generator().manual_seed(cfg.seed)
        blocks = []
        c_in, T = cfg.in_channels, cfg.window
        for _ in range(cfg.blocks):
            blocks.append(StBlock(cfg.num_nodes, c_in, cfg.channels, T,
                                  cfg.cheb_order, cfg.time_kernel, cfg.time_stride, rng))
            c_in = cfg.channels
            T = conv_output_size(T, cfg.time_kernel, cfg.time_stride, cfg.time_kernel // 2)
        self.blocks = nn.ModuleList(blocks)
        self.final_weight = _uniform(rng, (cfg.horizon, cfg.channels, T), cfg.channels * T)
        self.final_bias = nn.Parameter(torch.zeros(cfg.horizon, dtype=DTYPE))

    def forward(self, X, basis):
        X, squeeze = _batched(X)
        h = X
        for block in self.blocks:
            h = block(h, basis)
        out = torch.einsum("bnct,hct->bnh", h, self.final_weight) + self.final_bias
        return out[0] if squeeze else out


def basis_tensor(ops) -> torch.Tensor:
    return torch.as_tensor(np.stack(ops.cheb_basis), dtype=DTYPE)


def model_forward(model: StModel, window, basis) -> torch.Tensor:
    X = torch.as_tensor(window.data if isinstance(window, FeatureTensor) else window, dtype=DTYPE)
    if not isinstance(basis, torch.Tensor):
        basis = basis_tensor(basis)
    return model(X, basis)


def loss_value(pred, target, loss_kind: str = "mae"):
    if loss_kind == "mae":
        return torch.mean(torch.abs(pred - target))
    if loss_kind == "mse":
        return torch.mean((pred - target) ** 2)
    raise InvalidConfigError(f"unknown loss {loss_kind!r}")


def model_backward(model: StModel, window, basis, target, loss_kind: str = "mae"):
    """Loss and exact gradients for every named parameter.

    Returns ``(loss, {name: ndarray})``.
    """
    model.zero_grad(set_to_none=True)
    pred = model_forward(model, window, basis)
    loss = loss_value(pred, torch.as_tensor(target, dtype=DTYPE), loss_kind)
    if not torch.isfinite(loss):
        raise NonFiniteLossError(f"loss is not finite: {loss.item()}")
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad
        grads[name] = np.zeros(tuple(p.shape)) if g is None else g.detach().numpy().copy()
    return float(loss.item()), grads
