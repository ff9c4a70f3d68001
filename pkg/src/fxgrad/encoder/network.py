"""
Convolutional parameter encoder with hand-written forward and backward passes.

Layout: batch norm over mel bands -> conv blocks (3x3 'same' conv, ReLU,
2x2 max-pool) -> global average pool -> dense -> sigmoid. Features enter as
(batch, frames, bands) and are treated as one-channel images. Backward
returns gradients for every trainable tensor; no gradient flows to the audio.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field

from ..errors import ContractError

Mode = Literal["train", "eval"]

# head output is kept inside [THETA_EPS, 1 - THETA_EPS]
THETA_EPS = 1e-6


class EncoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    channels: Tuple[int, ...] = Field(default=(16, 32, 64), min_length=1)
    kernel: int = Field(default=3, ge=1, description="odd square kernel size")
    bn_momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    bn_eps: float = Field(default=1e-5, gt=0.0)


@dataclass
class EncoderWeights:
    cfg: EncoderConfig
    n_features: int
    n_outputs: int
    params: Dict[str, np.ndarray]
    buffers: Dict[str, np.ndarray]
    version: int = 0

    def copy(self) -> "EncoderWeights":
        return EncoderWeights(
            cfg=self.cfg,
            n_features=self.n_features,
            n_outputs=self.n_outputs,
            params={k: v.copy() for k, v in self.params.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
            version=self.version,
        )

    def n_weights(self) -> int:
        return int(sum(v.size for v in self.params.values()))


@dataclass
class ForwardCache:
    version: int
    mode: Mode
    xhat: np.ndarray
    inv_std: np.ndarray
    conv_inputs: List[np.ndarray] = field(default_factory=list)  # padded inputs
    relu_masks: List[np.ndarray] = field(default_factory=list)
    pool_args: List[Tuple[np.ndarray, Tuple[int, ...]]] = field(default_factory=list)
    pooled_shape: Tuple[int, ...] = ()
    gap: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None


def init_weights(cfg: EncoderConfig, n_features: int, n_outputs: int, rng: np.random.Generator) -> EncoderWeights:
    """Uniform weights scaled by fan-in; zero biases so the head starts at 0.5."""
    params: Dict[str, np.ndarray] = {
        "bn.gamma": np.ones(n_features),
        "bn.beta": np.zeros(n_features),
    }
    c_in = 1
    for i, c_out in enumerate(cfg.channels):
        fan_in = c_in * cfg.kernel * cfg.kernel
        lim = np.sqrt(6.0 / fan_in)
        params[f"conv{i}.weight"] = rng.uniform(-lim, lim, size=(c_out, c_in, cfg.kernel, cfg.kernel))
        params[f"conv{i}.bias"] = np.zeros(c_out)
        c_in = c_out
    lim = np.sqrt(6.0 / c_in)
    params["head.weight"] = rng.uniform(-lim, lim, size=(n_outputs, c_in))
    params["head.bias"] = np.zeros(n_outputs)
    buffers = {"bn.running_mean": np.zeros(n_features), "bn.running_var": np.ones(n_features)}
    return EncoderWeights(cfg=cfg, n_features=n_features, n_outputs=n_outputs, params=params, buffers=buffers)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _conv_forward(xp: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = w.shape[-1]
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (B, C, H, W, k, k)
    return np.einsum("bchwij,ocij->bohw", win, w, optimize=True) + b[None, :, None, None]


def _conv_backward(xp: np.ndarray, w: np.ndarray, dout: np.ndarray, pad: int, need_input: bool):
    k = w.shape[-1]
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    dw = np.einsum("bchwij,bohw->ocij", win, dout, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    if not need_input:
        return dw, db, None
    h, wd = dout.shape[2], dout.shape[3]
    dxp = np.zeros_like(xp)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + h, j:j + wd] += np.einsum("bohw,oc->bchw", dout, w[:, :, i, j], optimize=True)
    return dw, db, dxp[:, :, pad:pad + h, pad:pad + wd]


def _pool_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Tuple[int, ...]]:
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ContractError(f"feature map {h}x{w} too small to pool")
    blocks = x[:, :, :2 * h2, :2 * w2].reshape(b, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(b, c, h2, w2, 4)
    arg = flat.argmax(axis=-1)
    return np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0], arg, x.shape


def _pool_backward(dout: np.ndarray, arg: np.ndarray, in_shape: Tuple[int, ...]) -> np.ndarray:
    b, c, h, w = in_shape
    h2, w2 = dout.shape[2], dout.shape[3]
    flat = np.zeros((b, c, h2, w2, 4))
    np.put_along_axis(flat, arg[..., None], dout[..., None], axis=-1)
    blocks = flat.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, 2 * h2, 2 * w2)
    dx = np.zeros(in_shape)
    dx[:, :, :2 * h2, :2 * w2] = blocks
    return dx


def encoder_forward(w: EncoderWeights, feat: np.ndarray, mode: Mode = "train") -> Tuple[np.ndarray, ForwardCache]:
    """features (B, T, F) or (T, F) -> theta_hat (B, P) in (0, 1)."""
    x = np.asarray(feat, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != w.n_features:
        raise ContractError(f"expected features (B, T, {w.n_features}), got {np.shape(feat)}")
    cfg, p = w.cfg, w.params

    if mode == "train":
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
        n = x.shape[0] * x.shape[1]
        m = cfg.bn_momentum
        w.buffers["bn.running_mean"] = (1.0 - m) * w.buffers["bn.running_mean"] + m * mean
        unbiased = var * n / (n - 1) if n > 1 else var
        w.buffers["bn.running_var"] = (1.0 - m) * w.buffers["bn.running_var"] + m * unbiased
    else:
        mean, var = w.buffers["bn.running_mean"], w.buffers["bn.running_var"]
    inv_std = 1.0 / np.sqrt(var + cfg.bn_eps)
    xhat = (x - mean) * inv_std
    h = (p["bn.gamma"] * xhat + p["bn.beta"])[:, None, :, :]  # (B, 1, T, F)

    cache = ForwardCache(version=w.version, mode=mode, xhat=xhat, inv_std=inv_std)
    pad = cfg.kernel // 2
    for i in range(len(cfg.channels)):
        xp = np.pad(h, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        z = _conv_forward(xp, p[f"conv{i}.weight"], p[f"conv{i}.bias"])
        mask = z > 0.0
        h, arg, shape = _pool_forward(z * mask)
        cache.conv_inputs.append(xp)
        cache.relu_masks.append(mask)
        cache.pool_args.append((arg, shape))
    cache.pooled_shape = h.shape
    gap = h.mean(axis=(2, 3))
    theta = np.clip(sigmoid(gap @ p["head.weight"].T + p["head.bias"]), THETA_EPS, 1.0 - THETA_EPS)
    cache.gap, cache.theta = gap, theta
    return theta, cache


def encoder_backward(w: EncoderWeights, cache: ForwardCache, grad_theta: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of sum(theta_hat * grad_theta) for every tensor in ``w.params``."""
    if cache.version != w.version:
        raise ContractError(f"stale forward cache (weights v{cache.version}, now v{w.version})")
    g = np.asarray(grad_theta, dtype=np.float64).reshape(cache.theta.shape)
    p, cfg = w.params, w.cfg
    grads: Dict[str, np.ndarray] = {}

    dz = g * cache.theta * (1.0 - cache.theta)
    grads["head.weight"] = dz.T @ cache.gap
    grads["head.bias"] = dz.sum(axis=0)
    b, c, hh, ww = cache.pooled_shape
    dh = np.broadcast_to((dz @ p["head.weight"])[:, :, None, None] / (hh * ww), cache.pooled_shape)

    pad = cfg.kernel // 2
    for i in reversed(range(len(cfg.channels))):
        arg, shape = cache.pool_args[i]
        drelu = _pool_backward(np.ascontiguousarray(dh), arg, shape) * cache.relu_masks[i]
        dw_, db_, dh = _conv_backward(cache.conv_inputs[i], p[f"conv{i}.weight"], drelu, pad, need_input=True)
        grads[f"conv{i}.weight"] = dw_
        grads[f"conv{i}.bias"] = db_

    dbn = dh[:, 0]  # (B, T, F)
    grads["bn.gamma"] = (dbn * cache.xhat).sum(axis=(0, 1))
    grads["bn.beta"] = dbn.sum(axis=(0, 1))
    return {k: grads[k] for k in p}


def count_weights(cfg: EncoderConfig, n_features: int, n_outputs: int) -> int:
    total = 2 * n_features
    c_in = 1
    for c_out in cfg.channels:
        total += c_out * c_in * cfg.kernel * cfg.kernel + c_out
        c_in = c_out
    return total + n_outputs * c_in + n_outputs
