"""Modulation framing and low-order autoregressive fits on spectral tracks.

A modulation frame is a short window of consecutive per-bin spectral values.
Each frame gets a mean-removed, biased autocorrelation and a Levinson-Durbin
fit; the residual variance feeds the Kalman process noise downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REFLECTION_CLAMP = 0.998


@dataclass(frozen=True)
class ModulationFrame:
    samples: np.ndarray
    bin_index: int
    start_frame: int


@dataclass(frozen=True)
class ArModel:
    """Linear predictor x[t] ~ sum_i coeffs[i] * x[t-i-1] with residual power."""

    coeffs: np.ndarray
    residual_var: float

    def __post_init__(self):
        if self.residual_var < 0:
            raise ValueError("residual variance must be nonnegative")

    @property
    def order(self) -> int:
        return len(self.coeffs)


def build_modulation_frames(track, mod_len: int, mod_hop: int,
                            bin_index: int = 0) -> list[ModulationFrame]:
    """Chop a per-bin track into overlapping windows of ``mod_len`` frames."""
    track = np.asarray(track, dtype=np.float64)
    if len(track) < mod_len:
        raise ValueError("track too short for one modulation frame")
    if mod_hop < 1:
        raise ValueError("modulation hop must be positive")
    starts = range(0, len(track) - mod_len + 1, mod_hop)
    return [ModulationFrame(track[s:s + mod_len].copy(), bin_index, s)
            for s in starts]


def autocorrelation(frame, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r[0..max_lag] of the mean-removed frame."""
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the frame length")
    x = frame - frame.mean()
    full = np.correlate(x, x, mode="full")[n - 1:n + max_lag]
    return full / n


def levinson_durbin(acf, order: int, clamp: float = REFLECTION_CLAMP) -> ArModel:
    """Solve the Yule-Walker equations by the Levinson-Durbin recursion.

    Reflection coefficients with magnitude >= 1 are clamped to +-``clamp`` so
    the resulting predictor is always stable.
    """
    acf = np.asarray(acf, dtype=np.float64)
    if len(acf) < order + 1:
        raise ValueError("need order + 1 autocorrelation lags")
    if acf[0] <= 0:
        raise ValueError("degenerate autocorrelation: r[0] must be positive")
    a = np.zeros(order)
    err = float(acf[0])
    for i in range(1, order + 1):
        k = (acf[i] - np.dot(a[:i - 1], acf[i - 1:0:-1])) / err
        if abs(k) >= 1.0:
            k = np.copysign(clamp, k)
        new_a = a.copy()
        new_a[i - 1] = k
        new_a[:i - 1] = a[:i - 1] - k * a[:i - 1][::-1]
        a = new_a
        err *= (1.0 - k * k)
    return ArModel(a, max(err, 0.0))


def fit_ar(frame, order: int) -> tuple[ArModel, float]:
    """Fit an AR model to one modulation frame; returns (model, frame mean)."""
    frame = np.asarray(frame, dtype=np.float64)
    mu = float(frame.mean())
    r = autocorrelation(frame, order)
    if r[0] <= 1e-12:
        return ArModel(np.zeros(order), 0.0), mu
    return levinson_durbin(r, order), mu


def ar2_window_fits(tracks, mod_len: int, mod_hop: int, order: int = 2,
                    clamp: float = REFLECTION_CLAMP):
    """Vectorised low-order fits over sliding windows of a (T, K) track matrix.

    Returns ``(coeffs, resid, mu)`` with shapes (W, K, 2), (W, K) and (W, K),
    one row per modulation-window start.  Matches ``levinson_durbin`` on each
    window, including the reflection clamp; windows with (near-)zero variance
    get a zero predictor and zero residual.
    """
    if order not in (1, 2):
        raise ValueError("supported orders are 1 and 2")
    tracks = np.asarray(tracks, dtype=np.float64)
    if tracks.ndim == 1:
        tracks = tracks[:, None]
    t_len = tracks.shape[0]
    if t_len < mod_len:
        raise ValueError("track too short for one modulation frame")
    starts = np.arange(0, t_len - mod_len + 1, mod_hop)
    windows = np.stack([tracks[s:s + mod_len] for s in starts])  # (W, L, K)
    mu = windows.mean(axis=1)
    x = windows - mu[:, None, :]
    n = mod_len
    r0 = np.einsum("wlk,wlk->wk", x, x) / n
    r1 = np.einsum("wlk,wlk->wk", x[:, 1:], x[:, :-1]) / n

    def _clamp_reflection(k):
        return np.where(np.abs(k) >= 1.0, np.copysign(clamp, k), k)

    live = r0 > 1e-12
    r0s = np.where(live, r0, 1.0)
    k1 = _clamp_reflection(r1 / r0s)
    e1 = r0s * (1.0 - k1 * k1)
    if order == 1:
        a1, a2 = k1, np.zeros_like(k1)
        resid = np.maximum(e1, 0.0)
    else:
        r2 = np.einsum("wlk,wlk->wk", x[:, 2:], x[:, :-2]) / n
        k2 = _clamp_reflection((r2 - k1 * r1) / np.maximum(e1, 1e-300))
        a1 = k1 - k2 * k1
        a2 = k2
        resid = np.maximum(e1 * (1.0 - k2 * k2), 0.0)

    coeffs = np.stack([np.where(live, a1, 0.0), np.where(live, a2, 0.0)], axis=-1)
    resid = np.where(live, resid, 0.0)
    return coeffs, resid, mu
