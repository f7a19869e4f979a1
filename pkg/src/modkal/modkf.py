"""Modulation-domain Kalman filtering of per-bin spectral trajectories.

Each frequency bin carries a small Gaussian state over its recent spectral
values.  Prediction uses the fitted AR dynamics (plus an optional
across-frequency prediction from the neighbouring lower bin); the update is
either the linear amplitude-domain step or a sigma-point update under the
non-linear log-power observation model with the noise state marginalised.

The functions here are the per-state reference operations; whole-utterance
runs go through the fused loops in :mod:`modkal._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, armodel, gainrules, stft

LOG_FLUCT_VAR = np.pi ** 2 / 6.0  # log chi-square(2) spread of a noise periodogram

MODKF_VARIANTS = ("modkf_lin", "modkf_log", "modkf_3d")


@dataclass(frozen=True)
class KfState:
    """Gaussian state of one frequency bin: mean vector plus covariance."""

    mean: np.ndarray
    cov: np.ndarray
    domain: str = "log_power"

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or mean.shape[0] not in (2, 3):
            raise ValueError("state dimension must be 2 or 3")
        if cov.shape != (mean.shape[0],) * 2:
            raise ValueError("covariance shape must match the mean")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(0.5 * (cov + cov.T)).min() < -1e-10:
            raise ValueError("covariance must be positive semi-definite")
        if self.domain not in ("amplitude", "log_power"):
            raise ValueError(f"unknown state domain {self.domain!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class ObservationModel:
    """Phase-factor observation model; exactly one variant is active."""

    alpha: float = 0.0
    gamma_param: float | None = None
    obs_noise_var: float = 0.0
    variant: str = "alpha_form"

    def __post_init__(self):
        if self.variant not in ("alpha_form", "gamma_form"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not -1.0 <= self.alpha <= 1.0:
            raise ValueError("alpha out of range [-1, 1]")
        if self.variant == "gamma_form":
            if self.gamma_param is None or self.gamma_param <= 0:
                raise ValueError("gamma_param must be positive")
        if self.obs_noise_var < 0:
            raise ValueError("observation noise variance must be nonnegative")


@dataclass(frozen=True)
class NoiseState:
    """Per-bin Gaussian noise log-power level with random-walk drift."""

    mean_logpower: float
    var: float
    process_var_q: float = 0.0

    def __post_init__(self):
        if self.var < 0 or self.process_var_q < 0:
            raise ValueError("noise variances must be nonnegative")


def observation_fn(x, n, alpha: float):
    """Noisy log-power given speech and noise log-powers and a phase factor."""
    y = _kernels.obs_numpy(x, n, float(alpha), 0.0, False)
    if not np.all(np.isfinite(y)):
        raise ValueError("invalid phase configuration")
    return y if np.ndim(y) else float(y)


def observation_fn_gamma(x, n, gamma_param: float):
    """Smoothed-maximum form of the observation model, parametrised by gamma."""
    if gamma_param <= 0:
        raise ValueError("gamma_param must be positive")
    y = _kernels.obs_numpy(x, n, 0.0, float(gamma_param), True)
    return y if np.ndim(y) else float(y)


def kf_predict_inter(state: KfState, model: armodel.ArModel) -> KfState:
    """Advance the temporal state through the AR companion dynamics.

    Operates on mean-removed values; callers re-add any track offset.
    """
    d = state.dim
    if model.order > min(d, 2):
        raise ValueError("AR order exceeds the temporal state dimension")
    a = np.zeros(2)
    a[:model.order] = model.coeffs
    F = np.eye(d)
    F[0, 0], F[0, 1] = a[0], a[1]
    F[1, 0], F[1, 1] = 1.0, 0.0
    Q = np.zeros((d, d))
    Q[0, 0] = model.residual_var
    mean = F @ state.mean
    cov = F @ state.cov @ F.T + Q
    return replace(state, mean=mean, cov=0.5 * (cov + cov.T))


def kf_predict_intra(state: KfState, lower_bin_posterior_mean: float,
                     intra_coeff: float, intra_residual_var: float,
                     w_intra: float = 0.3, own_mean_offset: float = 0.0,
                     lower_mean_offset: float = 0.0) -> KfState:
    """Blend the temporal prediction with an across-frequency prediction.

    The third state component is refreshed with the lower bin's posterior
    residual scaled by ``intra_coeff``; the leading mean becomes the convex
    blend of the temporal and spectral predictions with weight ``w_intra``.
    """
    if state.dim != 3:
        raise ValueError("intra-frame prediction needs a 3-dimensional state")
    if not 0.0 <= w_intra <= 1.0:
        raise ValueError("w_intra must lie in [0, 1]")
    if intra_residual_var < 0:
        raise ValueError("intra residual variance must be nonnegative")
    if w_intra == 0.0:
        return state
    sp_res = intra_coeff * (lower_bin_posterior_mean - lower_mean_offset)
    sp_full = own_mean_offset + sp_res
    w = w_intra
    P = state.cov
    mean = state.mean.copy()
    mean[0] = (1.0 - w) * mean[0] + w * sp_full
    mean[2] = sp_res
    # correlated-errors upper bound: fusing a weak predictor cannot
    # shrink the stated uncertainty below either contributor's share
    cov = np.empty((3, 3))
    cov[0, 0] = ((1.0 - w) * np.sqrt(max(P[0, 0], 0.0))
                 + w * np.sqrt(intra_residual_var)) ** 2
    cov[0, 1] = cov[1, 0] = (1.0 - w) * P[0, 1]
    cov[0, 2] = cov[2, 0] = w * intra_residual_var
    cov[1, 1] = P[1, 1]
    cov[1, 2] = cov[2, 1] = 0.0
    cov[2, 2] = intra_residual_var
    return replace(state, mean=mean, cov=cov)


def kf_update_linear(state: KfState, y_amp: float, noise_amp_mean: float,
                     noise_amp_var: float) -> KfState:
    """Linear Gaussian update under amplitude additivity."""
    if state.domain != "amplitude":
        raise ValueError("linear update requires an amplitude-domain state")
    if noise_amp_var < 0:
        raise ValueError("noise variance must be nonnegative")
    P = state.cov
    p00 = P[0, 0]
    s = p00 + noise_amp_var
    if p00 <= 0.0 or not np.isfinite(s) or s <= 0.0:
        return state
    gain = P[:, 0] / s
    innov = y_amp - (state.mean[0] + noise_amp_mean)
    mean = state.mean + gain * innov
    cov = P - np.outer(gain, P[:, 0])
    return replace(state, mean=mean, cov=_psd_repair(cov))


def _psd_repair(cov: np.ndarray) -> np.ndarray:
    """Symmetrise and clamp negative eigenvalues to a tiny positive floor."""
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() >= 0.0:
        return cov
    vals = np.where(vals < 0.0, _kernels.PSD_EIG_FLOOR, vals)
    return (vecs * vals) @ vecs.T


def kf_update_logpower(state: KfState, y_lp: float, noise: NoiseState,
                       obs: ObservationModel) -> tuple[KfState, NoiseState]:
    """Sigma-point update of the joint (speech, noise) pair from one log-power.

    The unscented transform is relinearised a few times around the running
    posterior, which keeps the update accurate when the observation is far
    sharper than the prior.  Returns the refreshed speech state together with
    the noise posterior; their cross-correlation is used inside the update
    and then dropped.
    """
    if state.domain != "log_power":
        raise ValueError("log-power update requires a log-power state")
    P = state.cov
    p00 = float(P[0, 0])
    vn = noise.var
    m0 = float(state.mean[0])
    nm = noise.mean_logpower
    use_gamma = obs.variant == "gamma_form"
    ax, an, b, omega = (float(v[0]) for v in _kernels.joint_slr_numpy(
        np.array([m0]), np.array([p00]), np.array([nm]), np.array([vn]),
        np.array([y_lp]), obs.obs_noise_var, obs.alpha,
        obs.gamma_param or 0.0, use_gamma))
    s = ax * ax * p00 + an * an * vn + obs.obs_noise_var + omega
    if not np.isfinite(s) or s <= 0.0 or (ax == 0.0 and an == 0.0):
        return state, noise
    innov = y_lp - (ax * m0 + an * nm + b)
    gain = P[:, 0] * (ax / s)
    mean = state.mean + gain * innov
    cov = P - np.outer(gain, gain) * s
    new_state = replace(state, mean=mean, cov=_psd_repair(cov))
    gn = an * vn / s
    new_noise = replace(noise, mean_logpower=nm + gn * innov,
                        var=max(vn - gn * gn * s, 0.0))
    return new_state, new_noise


def noise_track_update(noise: NoiseState, y_lp: float,
                       speech_presence_prob: float,
                       obs_var: float = LOG_FLUCT_VAR) -> NoiseState:
    """Random-walk noise level tracking with a presence-masked update.

    The observation variance is inflated by ``1 / (1 - presence)``, so frames
    judged to hold speech barely move the estimate.
    """
    if not 0.0 <= speech_presence_prob <= 1.0:
        raise ValueError("presence probability must lie in [0, 1]")
    var = noise.var + noise.process_var_q
    r_eff = obs_var / max(1.0 - speech_presence_prob, 1e-6)
    gain = var / (var + r_eff) if var + r_eff > 0 else 0.0
    mean = noise.mean_logpower + gain * (y_lp - noise.mean_logpower)
    return replace(noise, mean_logpower=mean, var=(1.0 - gain) * var)


def speech_presence_prob(y_lp, noise_mean_logpower):
    """Logistic presence score: midpoint 3 nats above the noise level."""
    return 1.0 / (1.0 + np.exp(-2.0 * (np.asarray(y_lp) - noise_mean_logpower - 3.0)))


def gamma_moment_match(mean: float, var: float) -> tuple[float, float]:
    """Shape/scale of the Gamma distribution with the given mean and variance."""
    if mean <= 0 or var <= 0:
        raise ValueError("moment matching needs positive mean and variance")
    return mean * mean / var, var / mean


@dataclass(frozen=True)
class ModKfConfig:
    """Knobs for whole-track and whole-utterance Kalman runs."""

    mod_len: int = 16
    mod_hop: int = 4
    ar_order: int = 2
    alpha: float = 0.0
    gamma_param: float | None = None
    obs_noise_var: float = 0.5
    track_noise: bool = True
    noise_init_mean: float | None = None
    noise_init_var: float = 1.0
    noise_q: float = 1e-3
    noise_fluct_var: float = LOG_FLUCT_VAR
    w_intra: float = 0.3
    gain_floor_db: float = -25.0
    init_var: float = 1.0

    def __post_init__(self):
        if not -1.0 <= self.alpha <= 1.0:
            raise ValueError("alpha out of range [-1, 1]")
        if self.gamma_param is not None and self.gamma_param <= 0:
            raise ValueError("gamma_param must be positive")
        if self.ar_order not in (1, 2):
            raise ValueError("supported AR orders are 1 and 2")
        if self.mod_len < 2 * self.ar_order + 1:
            raise ValueError("modulation window too short for the AR order")
        if self.mod_hop < 1:
            raise ValueError("modulation hop must be positive")
        if not 0.0 <= self.w_intra <= 1.0:
            raise ValueError("w_intra must lie in [0, 1]")


def _window_index(n_frames: int, n_windows: int, mod_hop: int) -> np.ndarray:
    idx = np.arange(n_frames) // mod_hop
    return np.minimum(idx, n_windows - 1)


def _ar_fits(tracks, cfg: ModKfConfig):
    return armodel.ar2_window_fits(tracks, cfg.mod_len, cfg.mod_hop,
                                   order=cfg.ar_order)


def _intra_fits(tracks, mod_len: int, mod_hop: int):
    """Across-frequency AR(1) per modulation window on mean-removed values."""
    t_len = tracks.shape[0]
    starts = np.arange(0, t_len - mod_len + 1, mod_hop)
    b1 = np.empty(len(starts))
    iq = np.empty(len(starts))
    for w, s in enumerate(starts):
        win = tracks[s:s + mod_len]
        r = win - win.mean(axis=0)
        num = float(np.sum(r[:, 1:] * r[:, :-1]))
        den = float(np.sum(r[:, :-1] ** 2))
        b = num / den if den > 1e-12 else 0.0
        b = float(np.clip(b, -armodel.REFLECTION_CLAMP, armodel.REFLECTION_CLAMP))
        b1[w] = b
        iq[w] = float(np.mean((r[:, 1:] - b * r[:, :-1]) ** 2)) if r.shape[1] > 1 else 0.0
    return b1, iq


def enhance_track(noisy_lp_track, config: ModKfConfig | None = None,
                  ar_track=None, backend=None):
    """Causal per-bin tracking loop; returns posterior means and variances.

    AR coefficients refresh once per modulation window and are fitted on
    ``ar_track`` when given (a pre-cleaned trajectory), otherwise on the
    noisy track itself.
    """
    cfg = config or ModKfConfig()
    track = np.asarray(noisy_lp_track, dtype=np.float64)
    if track.ndim != 1:
        raise ValueError("track must be one-dimensional")
    if len(track) < cfg.mod_len:
        raise ValueError("track too short for one modulation frame")
    fit_on = track if ar_track is None else np.asarray(ar_track, dtype=np.float64)
    coeffs, resid, mu = _ar_fits(fit_on[:, None], cfg)
    widx = _window_index(len(track), coeffs.shape[0], cfg.mod_hop)
    nm0 = cfg.noise_init_mean
    if nm0 is None:
        nm0 = float(track[:min(len(track), 50)].min())
    xhat, pvar = _kernels.run_logpower_tracker(
        track[:, None], coeffs, resid, mu, widx,
        alpha=cfg.alpha,
        gamma=cfg.gamma_param or 0.0,
        use_gamma=cfg.gamma_param is not None,
        obs_noise_var=cfg.obs_noise_var,
        noise_mean0=nm0, noise_var0=cfg.noise_init_var,
        noise_q=cfg.noise_q, noise_fluct_var=cfg.noise_fluct_var,
        track_noise=cfg.track_noise, init_var=cfg.init_var, backend=backend)
    return xhat[:, 0], pvar[:, 0]


def _framing(signal, sample_rate_hz, frame_len, hop):
    if frame_len is None:
        frame_len = round(0.020 * sample_rate_hz)
    if hop is None:
        hop = frame_len // 2
    n_pad = -(len(signal) - frame_len) % hop
    padded = np.concatenate([signal, np.zeros(n_pad)])
    return stft.analyze(padded, frame_len, hop, "sqrt_hann", sample_rate_hz)


def enhance_utterance_modkf(signal, sample_rate_hz: int,
                            variant: str = "modkf_log",
                            config: ModKfConfig | None = None,
                            frame_len: int | None = None,
                            hop: int | None = None,
                            backend=None) -> np.ndarray:
    """Full modulation-Kalman enhancement of one utterance.

    ``modkf_log`` tracks log-powers through the non-linear observation model,
    ``modkf_lin`` tracks amplitudes with the linear update, and ``modkf_3d``
    adds the across-frequency prediction (falling back to ``modkf_log``
    arithmetic when the blend weight is zero).
    """
    if variant not in MODKF_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    cfg = config or ModKfConfig()
    signal = np.asarray(signal, dtype=np.float64)
    spec = _framing(signal, sample_rate_hz, frame_len, hop)
    power = np.abs(spec.frames) ** 2
    y_lp = np.log(np.maximum(power, stft.POWER_FLOOR))
    if power.shape[0] < cfg.mod_len:
        raise ValueError("track too short for one modulation frame")
    hop_s = spec.hop_samples / sample_rate_hz
    g_min = 10.0 ** (cfg.gain_floor_db / 20.0)

    base_gain = gainrules.baseline_gain_matrix(power, hop_s, "logmmse",
                                               g_min_db=cfg.gain_floor_db)
    nm0 = np.min(y_lp[:min(y_lp.shape[0], 50)], axis=0)

    if variant == "modkf_lin":
        amp = np.sqrt(power)
        pre_amp = base_gain * amp
        coeffs, resid, mu = _ar_fits(pre_amp, cfg)
        widx = _window_index(amp.shape[0], coeffs.shape[0], cfg.mod_hop)
        xhat, _ = _kernels.run_amplitude_tracker(
            amp, y_lp, coeffs, resid, mu, widx,
            noise_mean0=nm0, noise_var0=cfg.noise_init_var,
            noise_q=cfg.noise_q, noise_fluct_var=cfg.noise_fluct_var,
            track_noise=cfg.track_noise, init_var=cfg.init_var,
            backend=backend)
        gains = np.clip(xhat / np.maximum(amp, 1e-12), g_min, 1.0)
    else:
        pre_lp = np.log(np.maximum(base_gain * base_gain * power, stft.POWER_FLOOR))
        coeffs, resid, mu = _ar_fits(pre_lp, cfg)
        widx = _window_index(y_lp.shape[0], coeffs.shape[0], cfg.mod_hop)
        w_intra = cfg.w_intra if variant == "modkf_3d" else 0.0
        intra_b1 = intra_iq = None
        if w_intra > 0.0:
            intra_b1, intra_iq = _intra_fits(pre_lp, cfg.mod_len, cfg.mod_hop)
        xhat, _ = _kernels.run_logpower_tracker(
            y_lp, coeffs, resid, mu, widx,
            alpha=cfg.alpha,
            gamma=cfg.gamma_param or 0.0,
            use_gamma=cfg.gamma_param is not None,
            obs_noise_var=cfg.obs_noise_var,
            noise_mean0=nm0, noise_var0=cfg.noise_init_var,
            noise_q=cfg.noise_q, noise_fluct_var=cfg.noise_fluct_var,
            track_noise=cfg.track_noise, w_intra=w_intra,
            intra_coeff=intra_b1, intra_resid=intra_iq,
            init_var=cfg.init_var, backend=backend)
        gains = np.clip(np.exp(0.5 * (xhat - y_lp)), g_min, 1.0)

    out = stft.synthesize(stft.apply_gain(spec, gains))
    if len(out) < len(signal):
        out = np.concatenate([out, np.zeros(len(signal) - len(out))])
    return out[:len(signal)]
