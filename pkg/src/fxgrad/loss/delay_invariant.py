"""
Delay- and polarity-invariant frame loss with its gradient w.r.t. the output.

Sign convention: ``tau > 0`` means the prediction lags the target, i.e.
``y_pred[n + tau] ~ y[n]``. The aligned region is ``y_pred[tau:]`` against
``y[:N - tau]`` for non-negative tau and ``y_pred[:N + tau]`` against
``y[-tau:]`` otherwise. tau and the polarity branch are constants for
differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal

from ..errors import ContractError


class LossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_time: float = Field(default=10.0, ge=0.0)
    alpha_freq: float = Field(default=1.0, ge=0.0)
    maxlag: int = Field(default=256, ge=0, description="largest |tau| searched, samples")
    eps_log: float = Field(default=1e-7, gt=0.0)
    n_fft: int = Field(default=1024, ge=2)


@dataclass(frozen=True)
class DelayAlignment:
    tau: int
    polarity: int
    length: int

    @property
    def pred_slice(self) -> slice:
        return slice(self.tau, self.tau + self.length) if self.tau >= 0 else slice(0, self.length)

    @property
    def target_slice(self) -> slice:
        return slice(0, self.length) if self.tau >= 0 else slice(-self.tau, -self.tau + self.length)


@dataclass
class LossBreakdown:
    l_time: float
    l_freq: float
    total: float
    alignment: DelayAlignment
    grad_output: np.ndarray
    spec_pred: np.ndarray
    spec_target: np.ndarray


def _pair(y_pred, y) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(y_pred, dtype=np.float64)
    t = np.asarray(y, dtype=np.float64)
    if p.ndim != 1 or p.shape != t.shape or p.size == 0:
        raise ContractError(f"loss frames must be equal-length 1-D arrays, got {p.shape} and {t.shape}")
    return p, t


def shift_frame(y, k: int) -> np.ndarray:
    """Delay by ``k`` samples (advance when negative), zero-filled."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    n = y.shape[0]
    if abs(k) >= n:
        return out
    if k >= 0:
        out[k:] = y[:n - k]
    else:
        out[:n + k] = y[-k:]
    return out


def estimate_delay(y_pred, y, maxlag: int) -> DelayAlignment:
    """Peak of the energy-normalized cross-correlation magnitude over |tau| <= maxlag.

    The score is |xcorr| divided by the energy of the overlapping segments,
    not the raw |xcorr|, so a zero-filled shift scores exactly 1 at its lag.
    Ties go to the smaller |tau|, then to the negative lag. Silent inputs give
    tau = 0 and polarity +1.
    """
    p, t = _pair(y_pred, y)
    n = p.shape[0]
    if not 0 <= maxlag < n / 2:
        raise ContractError(f"maxlag must lie in [0, {n / 2}), got {maxlag}")
    corr = signal.correlate(p, t, mode="full")
    lags = signal.correlation_lags(n, n, mode="full")
    keep = np.abs(lags) <= maxlag
    corr, lags = corr[keep], lags[keep]

    cp = np.concatenate([[0.0], np.cumsum(p * p)])
    ct = np.concatenate([[0.0], np.cumsum(t * t)])
    pos = lags >= 0
    e_pred = np.where(pos, cp[n] - cp[np.where(pos, lags, 0)], cp[np.where(pos, n, n + lags)])
    e_target = np.where(pos, ct[np.where(pos, n - lags, n)], ct[n] - ct[np.where(pos, 0, -lags)])
    denom = np.sqrt(e_pred * e_target)
    score = np.zeros_like(corr)
    np.divide(np.abs(corr), denom, out=score, where=denom > 0.0)

    if not np.any(score > 0.0):
        return DelayAlignment(tau=0, polarity=1, length=n)
    best = np.lexsort((lags, np.abs(lags), -score))[0]
    tau = int(lags[best])
    polarity = -1 if corr[best] < 0 else 1
    return DelayAlignment(tau=tau, polarity=polarity, length=n - abs(tau))


def align(y_pred, y, alignment: DelayAlignment) -> Tuple[np.ndarray, np.ndarray]:
    p, t = _pair(y_pred, y)
    return p[alignment.pred_slice], t[alignment.target_slice]


def time_loss(y_pred, y, alignment: DelayAlignment) -> Tuple[float, np.ndarray]:
    """min(mean|p - t|, mean|p + t|) on the aligned region; gradient is full-length."""
    p_full, _ = _pair(y_pred, y)
    p, t = align(y_pred, y, alignment)
    length = p.shape[0]
    diff, summ = p - t, p + t
    l_diff, l_sum = float(np.mean(np.abs(diff))), float(np.mean(np.abs(summ)))
    branch = summ if l_sum < l_diff else diff
    grad = np.zeros_like(p_full)
    grad[alignment.pred_slice] = np.sign(branch) / length
    return min(l_diff, l_sum), grad


def _window(length: int) -> np.ndarray:
    return signal.get_window("hann", length) if length > 1 else np.ones(1)


def spectral_terms(p, t, cfg: LossConfig) -> Tuple[float, float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Magnitude and log-magnitude RMS differences plus the complex spectra they came from."""
    length = p.shape[0]
    n_fft = max(cfg.n_fft, length)
    w = _window(length)
    xp = np.fft.rfft(w * p, n=n_fft)
    xt = np.fft.rfft(w * t, n=n_fft)
    mag_p, mag_t = np.abs(xp), np.abs(xt)
    mag_term = float(np.sqrt(np.mean((mag_p - mag_t) ** 2)))
    log_diff = np.log(np.maximum(mag_p, cfg.eps_log)) - np.log(np.maximum(mag_t, cfg.eps_log))
    log_term = float(np.sqrt(np.mean(log_diff ** 2)))
    return mag_term, log_term, xp, mag_p, mag_t, log_diff


def _freq_loss(p, t, cfg: LossConfig):
    p, t = _pair(p, t)
    length = p.shape[0]
    n_fft = max(cfg.n_fft, length)
    mag_term, log_term, xp, mag_p, mag_t, log_diff = spectral_terms(p, t, cfg)
    n_bins = mag_p.shape[0]

    g = np.zeros(n_bins)
    if mag_term > 0.0:
        g += (mag_p - mag_t) / (n_bins * mag_term)
    if log_term > 0.0:
        above = mag_p > cfg.eps_log
        g += np.where(above, log_diff / (n_bins * log_term * np.where(above, mag_p, 1.0)), 0.0)

    # d|X_k|/dz_n = Re(conj(X_k) e^{-i w_k n}) / |X_k|; zero where |X_k| vanishes
    nz = mag_p > 0.0
    a = np.zeros(n_bins, dtype=np.complex128)
    a[nz] = g[nz] * xp[nz] / mag_p[nz]
    full = np.zeros(n_fft, dtype=np.complex128)
    full[:n_bins] = a
    dz = np.real(np.fft.ifft(full)) * n_fft
    return mag_term + log_term, _window(length) * dz[:length], mag_p, mag_t


def freq_loss(p, t, cfg: LossConfig) -> Tuple[float, np.ndarray]:
    """Spectral loss of two aligned segments and its gradient w.r.t. ``p``."""
    l_freq, grad, _, _ = _freq_loss(p, t, cfg)
    return l_freq, grad


def total_loss(y_pred, y, cfg: LossConfig | None = None) -> LossBreakdown:
    cfg = cfg or LossConfig()
    p, t = _pair(y_pred, y)
    n = p.shape[0]
    maxlag = min(cfg.maxlag, (n - 1) // 2)
    alignment = estimate_delay(p, t, maxlag)
    l_time, g_time = time_loss(p, t, alignment)
    p_al, t_al = align(p, t, alignment)
    l_freq, g_freq_al, mag_p, mag_t = _freq_loss(p_al, t_al, cfg)
    g_freq = np.zeros(n)
    g_freq[alignment.pred_slice] = g_freq_al
    return LossBreakdown(
        l_time=l_time,
        l_freq=l_freq,
        total=cfg.alpha_time * l_time + cfg.alpha_freq * l_freq,
        alignment=alignment,
        grad_output=cfg.alpha_time * g_time + cfg.alpha_freq * g_freq,
        spec_pred=mag_p,
        spec_target=mag_t,
    )
