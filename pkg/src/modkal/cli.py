"""Batch front-end: WAV I/O, configuration, and pipeline orchestration.

Usage: ``modkal <mode> [flags] <in> <out>`` with modes ``degrade``,
``enhance``, ``eval`` (in = reference, out = file under test) and
``pipeline`` (degrade, enhance, then evaluate against the clean input).
Flags override values from a ``key=value`` config file given via ``--config``
or the ``MODKAL_CONFIG`` environment variable.  Exit codes: 0 ok, 2 usage
errors, 3 runtime failures (partial outputs are removed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np
import scipy.io.wavfile

from . import dereverb, evalkit, gainrules, modkf, stft

METHODS = ("specsub", "mmse", "logmmse", "modkf_lin", "modkf_log", "modkf_3d")
DEREVS = ("none", "lrsv", "wpe", "wpe_block")
MODES = ("degrade", "enhance", "eval", "pipeline")
SAMPLE_RATES = (8000, 16000)

_FILE_KEYS = ("method", "derev", "snr", "t60", "drr", "alpha", "gamma", "seed",
              "frame_ms", "hop_ms", "noise", "rir", "save_rir", "ref",
              "metrics", "wpe_taps", "wpe_delay", "wpe_iters", "block_s")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str
    in_path: str
    out_path: str
    method: str | None
    derev: str
    snr_db: float | None
    t60_s: float | None
    drr_db: float
    alpha: float
    gamma_param: float | None
    seed: int | None
    frame_ms: float
    hop_ms: float
    noise_path: str | None
    rir_path: str | None
    save_rir_path: str | None
    ref_path: str | None
    metrics_path: str | None
    wpe_taps: int
    wpe_delay: int
    wpe_iters: int
    block_s: float

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="modkal",
        description="Single-channel speech enhancement toolkit")
    p.add_argument("mode", choices=MODES)
    p.add_argument("input", help="input WAV (reference WAV for eval)")
    p.add_argument("output", help="output WAV (WAV under test for eval)")
    p.add_argument("--config", help="key=value config file "
                                    "(default: $MODKAL_CONFIG)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--derev", choices=DEREVS)
    p.add_argument("--snr", type=float, help="segmental mixing SNR in dB "
                                             "(inf keeps the input clean)")
    p.add_argument("--t60", type=float, help="reverberation time in seconds")
    p.add_argument("--drr", type=float, help="direct-to-reverberant ratio, dB")
    p.add_argument("--alpha", type=float, help="phase factor in [-1, 1]")
    p.add_argument("--gamma", type=float, help="smoothed-max observation shape")
    p.add_argument("--seed", type=int, help="seed for every stochastic step")
    p.add_argument("--frame-ms", type=float, dest="frame_ms")
    p.add_argument("--hop-ms", type=float, dest="hop_ms")
    p.add_argument("--noise", help="noise WAV (default: seeded white noise)")
    p.add_argument("--rir", help="room impulse response WAV")
    p.add_argument("--save-rir", dest="save_rir",
                   help="write the synthesized impulse response here")
    p.add_argument("--ref", help="reference WAV for metrics after enhance")
    p.add_argument("--metrics", help="write JSON-lines metrics here "
                                     "instead of stdout")
    p.add_argument("--wpe-taps", type=int, dest="wpe_taps")
    p.add_argument("--wpe-delay", type=int, dest="wpe_delay")
    p.add_argument("--wpe-iters", type=int, dest="wpe_iters")
    p.add_argument("--block-s", type=float, dest="block_s")
    return p


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FILE_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _convert(key: str, value: str):
    if key in ("method", "derev", "noise", "rir", "save_rir", "ref",
               "metrics"):
        return value
    if key in ("seed", "wpe_taps", "wpe_delay", "wpe_iters"):
        return int(value)
    return float(value)


def parse_config(argv) -> RunConfig:
    """Resolve CLI flags over config-file values into a validated RunConfig."""
    args = _build_parser().parse_args(argv)
    config_path = args.config or os.environ.get("MODKAL_CONFIG")
    file_values = _read_config_file(config_path) if config_path else {}

    def pick(key, default=None):
        cli_val = getattr(args, key)
        if cli_val is not None:
            return cli_val
        if key in file_values:
            try:
                return _convert(key, file_values[key])
            except ValueError as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        return default

    method = pick("method")
    derev = pick("derev", "none")
    if derev not in DEREVS:
        raise UsageError(f"unknown derev {derev!r}")
    if method is not None and method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    alpha = pick("alpha", 0.0)
    if not -1.0 <= alpha <= 1.0:
        raise UsageError("alpha out of range [-1,1]")
    gamma = pick("gamma")
    if gamma is not None and gamma <= 0:
        raise UsageError("gamma must be positive")
    t60 = pick("t60")
    if t60 is not None and t60 <= 0:
        raise UsageError("t60 must be positive")
    frame_ms = pick("frame_ms", 20.0)
    hop_ms = pick("hop_ms", frame_ms / 2.0)
    if frame_ms <= 0 or hop_ms <= 0 or hop_ms > frame_ms:
        raise UsageError("need 0 < hop_ms <= frame_ms")
    seed = pick("seed")
    snr = pick("snr")

    mode = args.mode
    if mode in ("degrade", "pipeline"):
        if seed is None:
            raise UsageError(f"{mode} mode is stochastic: --seed is required")
        if snr is None and t60 is None and pick("rir") is None:
            raise UsageError("nothing to degrade: give --snr and/or "
                             "--t60/--rir")
    if mode in ("enhance", "pipeline"):
        if derev == "lrsv":
            if method is not None:
                raise UsageError("derev=lrsv is a single-pass gain; "
                                 "it cannot be combined with --method")
            if t60 is None:
                raise UsageError("derev=lrsv requires --t60")
        elif method is None:
            method = "logmmse"
        if derev in ("wpe", "wpe_block") and mode == "pipeline" and t60 is None \
                and pick("rir") is None and snr is None:
            raise UsageError("pipeline needs a degradation to undo")

    return RunConfig(
        mode=mode, in_path=args.input, out_path=args.output,
        method=method, derev=derev, snr_db=snr, t60_s=t60,
        drr_db=pick("drr", 0.0), alpha=alpha, gamma_param=gamma, seed=seed,
        frame_ms=frame_ms, hop_ms=hop_ms,
        noise_path=pick("noise"), rir_path=pick("rir"),
        save_rir_path=pick("save_rir"), ref_path=pick("ref"),
        metrics_path=pick("metrics"),
        wpe_taps=int(pick("wpe_taps", 40)), wpe_delay=int(pick("wpe_delay", 3)),
        wpe_iters=int(pick("wpe_iters", 3)), block_s=pick("block_s", 0.5))


def read_wav(path: str) -> tuple[np.ndarray, int]:
    """Read a mono PCM16 or IEEE float32 WAV as float64 samples in [-1, 1]."""
    try:
        fs, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot read WAV {path}: {exc}") from exc
    if data.ndim != 1:
        raise ValueError(f"{path}: mono required, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype}; "
                         "use PCM16 or float32")
    return samples, int(fs)


def write_wav(path: str, samples, sample_rate_hz: int) -> None:
    """Write float32 WAV; float keeps metric chains free of requantisation."""
    scipy.io.wavfile.write(path, sample_rate_hz,
                           np.asarray(samples, dtype=np.float32))


def _frame_geometry(cfg: RunConfig, fs: int) -> tuple[int, int]:
    frame_len = 2 * round(fs * cfg.frame_ms / 2000.0)
    hop = max(1, round(fs * cfg.hop_ms / 1000.0))
    return frame_len, min(hop, frame_len)


def _load_rir(cfg: RunConfig, fs: int) -> np.ndarray | None:
    if cfg.rir_path is not None:
        rir, rir_fs = read_wav(cfg.rir_path)
        if rir_fs != fs:
            raise ValueError("RIR sample rate does not match the input")
        return rir
    if cfg.t60_s is not None and cfg.mode in ("degrade", "pipeline"):
        params = dereverb.RirParams(cfg.t60_s, cfg.drr_db, fs,
                                    length_s=cfg.t60_s + 0.1, seed=cfg.seed)
        return dereverb.synth_rir(params)
    return None


def _degrade_signal(cfg: RunConfig, clean: np.ndarray, fs: int) -> np.ndarray:
    rir = _load_rir(cfg, fs)
    if cfg.save_rir_path is not None:
        if rir is None:
            raise ValueError("--save-rir needs a room response (give --t60)")
        write_wav(cfg.save_rir_path, rir, fs)
    noise = None
    if cfg.snr_db is not None:
        if cfg.noise_path is not None:
            noise, noise_fs = read_wav(cfg.noise_path)
            if noise_fs != fs:
                raise ValueError("noise sample rate does not match the input")
        else:
            n = len(clean) + (len(rir) - 1 if rir is not None else 0)
            noise = evalkit.white_noise(n, seed=cfg.seed)
    if rir is None and noise is None:
        raise ValueError("nothing to degrade")
    return evalkit.degrade(clean, rir=rir, noise=noise, snr_db=cfg.snr_db,
                           seed=cfg.seed if cfg.seed is not None else 0)


def _enhance_signal(cfg: RunConfig, signal: np.ndarray, fs: int) -> np.ndarray:
    frame_len, hop = _frame_geometry(cfg, fs)
    out = signal
    if cfg.derev == "lrsv":
        return dereverb.enhance_utterance_lrsv(out, fs, cfg.t60_s,
                                               frame_len=frame_len, hop=hop)
    if cfg.method in gainrules.BASELINE_METHODS:
        out = gainrules.enhance_utterance_baseline(out, fs, cfg.method,
                                                   frame_len=frame_len, hop=hop)
    elif cfg.method in modkf.MODKF_VARIANTS:
        mcfg = modkf.ModKfConfig(alpha=cfg.alpha, gamma_param=cfg.gamma_param)
        out = modkf.enhance_utterance_modkf(out, fs, cfg.method, mcfg,
                                            frame_len=frame_len, hop=hop)
    if cfg.derev in ("wpe", "wpe_block"):
        wcfg = dereverb.WpeConfig(delay=cfg.wpe_delay, taps=cfg.wpe_taps,
                                  iterations=cfg.wpe_iters,
                                  block_s=cfg.block_s if cfg.derev == "wpe_block"
                                  else None)
        n_pad = -(len(out) - frame_len) % hop
        padded = np.concatenate([out, np.zeros(n_pad)])
        spec = stft.analyze(padded, frame_len, hop, "sqrt_hann", fs)
        if cfg.derev == "wpe_block":
            spec = dereverb.wpe_block(spec, wcfg)
        else:
            spec = dereverb.wpe_batch(spec, wcfg)
        resyn = stft.synthesize(spec)
        if len(resyn) < len(out):
            resyn = np.concatenate([resyn, np.zeros(len(out) - len(resyn))])
        out = resyn[:len(out)]
    return out


def _metric_line(cfg: RunConfig, method: str, file: str, reference, test,
                 fs: int) -> str:
    n = min(len(reference), len(test))
    frame_len, hop = _frame_geometry(cfg, fs)
    report = evalkit.MetricReport(
        file=file, method=method,
        seg_snr_db=evalkit.seg_snr(reference[:n], test[:n], frame_len),
        lsd_db=evalkit.lsd_signals(reference[:n], test[:n], fs,
                                   frame_len=frame_len, hop=hop),
        config_hash=cfg.config_hash())
    return report.to_json_line()


def run_pipeline(cfg: RunConfig) -> int:
    """Execute one mode; returns the process exit code."""
    created: list[str] = []
    metric_lines: list[str] = []
    try:
        if cfg.mode == "eval":
            ref, fs = read_wav(cfg.in_path)
            if fs not in SAMPLE_RATES:
                raise ValueError(f"unsupported sample rate {fs}")
            test, test_fs = read_wav(cfg.out_path)
            if test_fs != fs:
                raise ValueError("sample rates differ between the files")
            metric_lines.append(_metric_line(cfg, "eval", cfg.out_path,
                                             ref, test, fs))
        else:
            signal, fs = read_wav(cfg.in_path)
            if fs not in SAMPLE_RATES:
                raise ValueError(f"unsupported sample rate {fs}")
            if cfg.mode == "degrade":
                out = _degrade_signal(cfg, signal, fs)
            elif cfg.mode == "enhance":
                out = _enhance_signal(cfg, signal, fs)
                if cfg.ref_path is not None:
                    ref, ref_fs = read_wav(cfg.ref_path)
                    if ref_fs != fs:
                        raise ValueError("reference sample rate differs")
                    method = cfg.method or cfg.derev
                    metric_lines.append(_metric_line(cfg, method, cfg.out_path,
                                                     ref, out, fs))
            else:  # pipeline
                degraded = _degrade_signal(cfg, signal, fs)
                enhanced = _enhance_signal(cfg, degraded, fs)
                out = enhanced
                metric_lines.append(_metric_line(cfg, "unprocessed",
                                                 cfg.out_path, signal,
                                                 degraded, fs))
                method = cfg.method or cfg.derev
                metric_lines.append(_metric_line(cfg, method, cfg.out_path,
                                                 signal, enhanced, fs))
            write_wav(cfg.out_path, out, fs)
            created.append(cfg.out_path)
        if cfg.metrics_path is not None and metric_lines:
            with open(cfg.metrics_path, "w") as fh:
                fh.write("\n".join(metric_lines) + "\n")
            created.append(cfg.metrics_path)
        elif metric_lines:
            for line in metric_lines:
                print(line)
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        for path in created:
            try:
                os.remove(path)
            except OSError:
                pass
        print(f"modkal: error: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"modkal: usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    return run_pipeline(cfg)


if __name__ == "__main__":
    sys.exit(main())
