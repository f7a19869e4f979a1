"""Synthetic room responses, late-reverberation suppression, and WPE.

The impulse-response generator draws an exponentially decaying noise tail
whose decay rate realises the requested T60, with a direct-path impulse
scaled to hit the requested direct-to-reverberant ratio.  Suppression comes
either from a Wiener-style gain fed by the late reverberant spectral
variance, or from per-bin long-term linear prediction (batch or block-wise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gainrules, stft

DIRECT_PATH_S = 0.002  # direct-path share of an impulse response
EARLY_LATE_S = 0.05    # default early/late reflection boundary

WPE_VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class RirParams:
    """Generative parameters for a synthetic room impulse response."""

    t60_s: float
    drr_db: float
    sample_rate_hz: int
    length_s: float
    seed: int = 0

    def __post_init__(self):
        if self.t60_s <= 0:
            raise ValueError("t60 must be positive")
        if self.length_s <= 0:
            raise ValueError("length must be positive")
        if self.length_s < self.t60_s / 2:
            raise ValueError("length must cover at least half the decay time")


@dataclass(frozen=True)
class WpeConfig:
    """Long-term linear prediction settings (delay, taps, iterations).

    ``psd_context`` smooths the per-cell variance estimate over neighbouring
    frames; raw per-cell powers make the weighted fit blow up on frames that
    happen to be tiny.
    """

    delay: int = 3
    taps: int = 40
    iterations: int = 3
    eps: float = 1e-8
    block_s: float | None = None
    psd_context: int = 2

    def __post_init__(self):
        if self.delay < 1:
            raise ValueError("prediction delay must be at least 1 frame")
        if self.taps < 0:
            raise ValueError("tap count must be nonnegative")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.eps <= 0:
            raise ValueError("regulariser must be positive")
        if self.block_s is not None and self.block_s <= 0:
            raise ValueError("block length must be positive")
        if self.psd_context < 0:
            raise ValueError("context must be nonnegative")


def decay_rate(t60_s: float) -> float:
    """Amplitude decay rate zeta with exp(-2*zeta*t60) = -60 dB."""
    return 3.0 * np.log(10.0) / t60_s


def synth_rir(params: RirParams) -> np.ndarray:
    """Draw a seeded noise-tail impulse response hitting the requested DRR.

    The direct path occupies the first sample; energies over the first
    ``DIRECT_PATH_S`` versus the remainder define the measured DRR.
    """
    fs = params.sample_rate_hz
    n = round(params.length_s * fs)
    zeta = decay_rate(params.t60_s)
    rng = np.random.default_rng(params.seed)
    h = np.zeros(n)
    t = np.arange(1, n) / fs
    h[1:] = rng.standard_normal(n - 1) * np.exp(-zeta * t)

    n_direct = round(DIRECT_PATH_S * fs)
    e_early_tail = float(np.sum(h[:n_direct] ** 2))
    e_late = float(np.sum(h[n_direct:] ** 2))
    target = 10.0 ** (params.drr_db / 10.0)
    direct_sq = target * e_late - e_early_tail
    if direct_sq <= 0:
        raise ValueError("requested DRR unreachable for this decay/length")
    h[0] = np.sqrt(direct_sq)
    return h / h[0]  # unit direct path keeps convolved levels sane


def lrsv_estimate(rev_power_track, t60_s: float, tl_s: float = EARLY_LATE_S,
                  frame_hop_s: float = 0.010) -> np.ndarray:
    """Late reverberant spectral variance: delayed, decayed observed power.

    Works on a per-bin track or a (T, K) matrix with time on the first axis.
    """
    power = np.asarray(rev_power_track, dtype=np.float64)
    if tl_s < frame_hop_s:
        raise ValueError("early/late boundary must be at least one hop")
    delay = round(tl_s / frame_hop_s)
    if delay >= power.shape[0]:
        raise ValueError("track too short for the early/late delay")
    factor = np.exp(-2.0 * decay_rate(t60_s) * tl_s)
    out = np.zeros_like(power)
    out[delay:] = factor * power[:power.shape[0] - delay]
    return out


def late_suppression_gain(noisy_power, lambda_late, lambda_noise,
                          g_min: float = 0.0):
    """Wiener-style gain removing late reverberation and noise together."""
    p = np.asarray(noisy_power, dtype=np.float64)
    g = (p - np.asarray(lambda_late) - np.asarray(lambda_noise))
    g = g / np.maximum(p, stft.POWER_FLOOR)
    return np.clip(g, g_min, 1.0)


def _delayed_taps(frames: np.ndarray, taps: int, delay: int) -> np.ndarray:
    """Stack delayed frames: out[k, j, t] = frames[t - delay - j, k]."""
    t_len, k_bins = frames.shape
    pad = np.concatenate([np.zeros((delay + taps - 1, k_bins),
                                   dtype=frames.dtype), frames])
    view = np.lib.stride_tricks.sliding_window_view(pad, taps, axis=0)
    # view[t] holds frames[t - delay - taps + 1 .. t - delay]; reverse to taps order
    tilde = view[:t_len, :, ::-1]
    return np.ascontiguousarray(np.transpose(tilde, (1, 2, 0)))


def _context_mean(power: np.ndarray, context: int) -> np.ndarray:
    """Mean of each row over a +-context window, edge windows shortened."""
    if context == 0:
        return power
    t_len = power.shape[-1]
    prefix = np.concatenate([np.zeros(power.shape[:-1] + (1,)),
                             np.cumsum(power, axis=-1)], axis=-1)
    hi = np.minimum(np.arange(t_len) + context + 1, t_len)
    lo = np.maximum(np.arange(t_len) - context, 0)
    return (prefix[..., hi] - prefix[..., lo]) / (hi - lo)


def _wpe_fit(yk: np.ndarray, tilde: np.ndarray, cfg: WpeConfig,
             cols: slice = slice(None)):
    """Iterated weighted fit on the selected frame range; returns (d, g)."""
    target = yk[:, cols]
    taps_sel = tilde[:, :, cols]
    d = target.copy()
    eye = np.eye(cfg.taps)
    g = np.zeros((yk.shape[0], cfg.taps), dtype=complex)
    for _ in range(cfg.iterations):
        lam = np.maximum(_context_mean(np.abs(d) ** 2, cfg.psd_context),
                         WPE_VAR_FLOOR)
        weighted = taps_sel / lam[:, None, :]
        R = weighted @ taps_sel.conj().transpose(0, 2, 1)
        p = np.einsum("kpt,kt->kp", weighted, target.conj())
        trace = np.einsum("kpp->k", R).real / cfg.taps
        ridge = cfg.eps * np.maximum(trace, WPE_VAR_FLOOR)
        g = np.linalg.solve(R + ridge[:, None, None] * eye, p[:, :, None])[:, :, 0]
        d = target - np.einsum("kp,kpt->kt", g.conj(), taps_sel)
    return d, g


def wpe_batch(spec: stft.Spectrogram, cfg: WpeConfig | None = None,
              return_filters: bool = False):
    """Weighted-prediction-error dereverberation over a whole utterance.

    Per bin, alternates a variance estimate from the current dereverberated
    signal with a regularised weighted least-squares fit of a complex
    prediction filter over delayed frames, then subtracts the prediction.
    """
    cfg = cfg or WpeConfig()
    y = spec.frames
    t_len = y.shape[0]
    if cfg.taps == 0:
        filt = np.zeros((y.shape[1], 0), dtype=complex)
        out = stft.Spectrogram(y.copy(), spec.frame_len_samples, spec.hop_samples,
                               spec.window_id, spec.sample_rate_hz)
        return (out, filt) if return_filters else out
    if t_len <= cfg.delay + cfg.taps:
        raise ValueError("utterance too short for WPE taps")
    tilde = _delayed_taps(y, cfg.taps, cfg.delay)       # (K, taps, T)
    yk = np.ascontiguousarray(y.T)                      # (K, T)
    d, g = _wpe_fit(yk, tilde, cfg)
    out = stft.Spectrogram(np.ascontiguousarray(d.T), spec.frame_len_samples,
                           spec.hop_samples, spec.window_id, spec.sample_rate_hz)
    return (out, g) if return_filters else out


def wpe_block(spec: stft.Spectrogram, cfg: WpeConfig) -> stft.Spectrogram:
    """Apply WPE over non-overlapping blocks of ``cfg.block_s`` seconds.

    Each block gets its own filter (no state carried across blocks) but the
    regression taps look back into the observed signal across boundaries.
    A trailing block too short for the tap structure is passed through.
    """
    if cfg.block_s is None:
        raise ValueError("block mode needs block_s")
    block = max(1, round(cfg.block_s / spec.hop_s))
    t_len = spec.n_frames
    if t_len <= block:
        return wpe_batch(spec, cfg)
    if cfg.taps == 0 or t_len <= cfg.delay + cfg.taps:
        return wpe_batch(spec, cfg)
    tilde = _delayed_taps(spec.frames, cfg.taps, cfg.delay)
    yk = np.ascontiguousarray(spec.frames.T)
    out = yk.copy()
    for start in range(0, t_len, block):
        stop = min(start + block, t_len)
        if stop - start <= cfg.delay + cfg.taps:
            continue  # trailing partial block passes through unmodified
        out[:, start:stop], _ = _wpe_fit(yk, tilde, cfg, slice(start, stop))
    return stft.Spectrogram(np.ascontiguousarray(out.T), spec.frame_len_samples,
                            spec.hop_samples, spec.window_id,
                            spec.sample_rate_hz)


def lrsv_gain_matrix(power, hop_s: float, t60_s: float,
                     tl_s: float = EARLY_LATE_S,
                     g_min_db: float = -25.0) -> np.ndarray:
    """Single-pass suppression gains for late reverberation plus noise."""
    power = np.asarray(power, dtype=np.float64)
    lam_late = lrsv_estimate(power, t60_s, tl_s, hop_s)
    lam_noise = gainrules.track_noise_psd_matrix(power, hop_s)
    g_min = 10.0 ** (g_min_db / 20.0)
    return late_suppression_gain(power, lam_late, lam_noise, g_min)


def enhance_utterance_lrsv(signal, sample_rate_hz: int, t60_s: float,
                           tl_s: float = EARLY_LATE_S,
                           frame_len: int | None = None,
                           hop: int | None = None,
                           g_min_db: float = -25.0) -> np.ndarray:
    """Analyze, apply the combined late-reverb/noise gain, resynthesize."""
    signal = np.asarray(signal, dtype=np.float64)
    if frame_len is None:
        frame_len = round(0.020 * sample_rate_hz)
    if hop is None:
        hop = frame_len // 2
    n_pad = -(len(signal) - frame_len) % hop
    padded = np.concatenate([signal, np.zeros(n_pad)])
    spec = stft.analyze(padded, frame_len, hop, "sqrt_hann", sample_rate_hz)
    power = np.abs(spec.frames) ** 2
    gains = lrsv_gain_matrix(power, hop / sample_rate_hz, t60_s, tl_s, g_min_db)
    out = stft.synthesize(stft.apply_gain(spec, gains))
    if len(out) < len(signal):
        out = np.concatenate([out, np.zeros(len(signal) - len(out))])
    return out[:len(signal)]
