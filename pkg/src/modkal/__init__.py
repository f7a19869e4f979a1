"""Single-channel speech enhancement toolkit.

Modulation-domain Kalman filtering (linear amplitude, non-linear log-power,
and a 3-state inter+intra-frame variant), classical spectral gain baselines,
late-reverberation suppression, WPE linear prediction, and a degradation and
metric harness for desk-scale validation.
"""

from .armodel import ArModel, ModulationFrame, autocorrelation, \
    build_modulation_frames, levinson_durbin
from .dereverb import RirParams, WpeConfig, late_suppression_gain, \
    lrsv_estimate, synth_rir, wpe_batch, wpe_block
from .evalkit import MetricReport, add_noise_at_snr, degrade, \
    iterative_phase_reconstruct, lsd, seg_snr, speechlike
from .gainrules import NoisePsd, SnrPair, dd_apriori_snr, logmmse_gain, \
    mmse_gain, noise_psd_track, spectral_subtract_gain
from .modkf import KfState, ModKfConfig, NoiseState, ObservationModel, \
    enhance_track, enhance_utterance_modkf, gamma_moment_match, \
    kf_predict_inter, kf_predict_intra, kf_update_linear, \
    kf_update_logpower, noise_track_update, observation_fn, \
    observation_fn_gamma
from .stft import MelMap, RealSpectrogram, Spectrogram, analyze, apply_gain, \
    band_gain_interpolate, mel_matrix, synthesize, to_domain

__version__ = "0.1.0"

__all__ = [
    "ArModel", "KfState", "MelMap", "MetricReport", "ModKfConfig",
    "ModulationFrame", "NoisePsd", "NoiseState", "ObservationModel",
    "RealSpectrogram", "RirParams", "SnrPair", "Spectrogram", "WpeConfig",
    "add_noise_at_snr", "analyze", "apply_gain", "autocorrelation",
    "band_gain_interpolate", "build_modulation_frames", "dd_apriori_snr",
    "degrade", "enhance_track", "enhance_utterance_modkf",
    "gamma_moment_match", "iterative_phase_reconstruct", "kf_predict_inter",
    "kf_predict_intra", "kf_update_linear", "kf_update_logpower",
    "late_suppression_gain", "levinson_durbin", "logmmse_gain", "lsd",
    "mel_matrix", "mmse_gain", "noise_psd_track", "noise_track_update",
    "observation_fn", "observation_fn_gamma", "seg_snr",
    "spectral_subtract_gain", "speechlike", "synth_rir", "synthesize",
    "to_domain", "wpe_batch", "wpe_block",
]
