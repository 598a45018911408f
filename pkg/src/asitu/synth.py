"""Synthetic situations for demos, tests and timing runs.

Each situation is a smooth random texture seen through a moving virtual
camera (still, pan, zoom-in and zoom-out phases), an accelerometer trace
with hand-shake bursts and two EEG channels with an alpha rhythm plus
movement artifacts during the bursts. Ratings are derived from the amount
of camera motion so evaluation has something to correlate with.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .ingest import write_pgm

PHASES = ("still", "pan", "zoom_in", "zoom_out")


@dataclass
class SynthConfig:
    n_situations: int = 3
    n_frames: int = 1000
    width: int = 320
    height: int = 240
    fps: float = 30.0
    accel_rate: float = 100.0
    eeg_rate: int = 250
    phase_frames: int = 90
    shakes: int = 3
    seed: int = 0


def _texture(rng, h, w, sigma=3.0) -> np.ndarray:
    tex = ndimage.gaussian_filter(rng.normal(size=(h, w)), sigma, mode="wrap")
    tex -= tex.min()
    return 255.0 * tex / max(tex.max(), 1e-12)


def camera_path(rng, n: int, phase_frames: int, motion: float):
    """Per-frame (scale, ty, tx) of the virtual camera and the phase label of each frame."""
    scale = np.ones(n)
    shift = np.zeros((n, 2))
    labels = []
    s, pos = 1.0, np.zeros(2)
    k = 0
    while k < n:
        kind = rng.choice(PHASES, p=[1 - motion, motion / 2, motion / 4, motion / 4])
        vel = rng.uniform(1.0, 4.0) * rng.choice([-1, 1], size=2)
        rate = rng.uniform(0.002, 0.006)
        for _ in range(min(phase_frames, n - k)):
            if kind == "pan":
                pos = pos + vel
            elif kind == "zoom_in":
                s = min(s * (1 + rate), 1.6)
            elif kind == "zoom_out":
                s = max(s / (1 + rate), 0.7)
            scale[k], shift[k] = s, pos
            labels.append(str(kind))
            k += 1
    return scale, shift, labels


def render_frames(tex: np.ndarray, scale, shift, h: int, w: int) -> np.ndarray:
    """Sample the (periodic) texture through each camera pose; nearest integer output."""
    th, tw = tex.shape
    out = np.empty((len(scale), h, w), dtype=np.uint8)
    center = np.array([h / 2.0, w / 2.0])
    for k, (s, p) in enumerate(zip(scale, shift)):
        mat = np.eye(2) / s
        offset = np.array([th / 2.0, tw / 2.0]) + p - mat @ center
        img = ndimage.affine_transform(tex, mat, offset=offset, output_shape=(h, w), order=1, mode="grid-wrap")
        out[k] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return out


def shake_windows(rng, duration: float, count: int, length=(1.0, 3.0)) -> list[tuple[float, float]]:
    out = []
    for _ in range(count):
        d = rng.uniform(*length)
        t0 = rng.uniform(0.5, max(0.6, duration - d - 0.5))
        out.append((float(t0), float(t0 + d)))
    return sorted(out)


def _in_windows(t, windows) -> np.ndarray:
    mask = np.zeros(len(t), dtype=bool)
    for a, b in windows:
        mask |= (t >= a) & (t <= b)
    return mask


def accel_trace(rng, duration: float, rate: float, windows) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(int(np.ceil(duration * rate)) + 1) / rate
    acc = np.zeros((len(t), 3))
    acc[:, 2] = 9.81
    acc += rng.normal(scale=0.05, size=acc.shape)
    on = _in_windows(t, windows)
    burst = 3.0 * np.sin(2 * np.pi * 7.0 * t)[:, None] * rng.uniform(0.5, 1.0, size=3)
    acc[on] += burst[on] + rng.normal(scale=1.0, size=(on.sum(), 3))
    return t, acc


def eeg_trace(rng, duration: float, rate: int, windows, alpha_amp: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(int(np.ceil(duration * rate)) + 1) / rate
    x = np.empty((2, len(t)))
    for c in range(2):
        phase = rng.uniform(0, 2 * np.pi)
        noise = ndimage.gaussian_filter1d(rng.normal(size=len(t)), 1.5) * 6.0
        x[c] = alpha_amp * np.sin(2 * np.pi * 10.0 * t + phase) + noise + rng.normal(scale=2.0, size=len(t))
    on = _in_windows(t, windows)
    art = 40.0 * np.sin(2 * np.pi * 3.0 * t) + rng.normal(scale=30.0, size=len(t))
    x[:, on] += art[on]
    return t, x


def _write_csv(path: Path, header: str, t, cols, fmt="%.6f") -> None:
    arr = np.column_stack([t, cols])
    np.savetxt(path, arr, delimiter=",", header=header, comments="", fmt=fmt)


def synthesize(out_dir, cfg: SynthConfig = SynthConfig()) -> Path:
    """Write ``data/<id>/...``, ``ratings.csv`` and ``config.json`` under ``out_dir``."""
    out = Path(out_dir)
    data = out / "data"
    data.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    duration = (cfg.n_frames - 1) / cfg.fps
    rows = []
    for i in range(cfg.n_situations):
        sid = f"s{i + 1:02d}"
        d = data / sid
        (d / "frames").mkdir(parents=True, exist_ok=True)
        motion = 0.2 + 0.6 * (i / max(1, cfg.n_situations - 1))
        tex = _texture(rng, 2 * cfg.height, 2 * cfg.width)
        scale, shift, labels = camera_path(rng, cfg.n_frames, cfg.phase_frames, motion)
        frames = render_frames(tex, scale, shift, cfg.height, cfg.width)
        for k, img in enumerate(frames):
            write_pgm(d / "frames" / f"frame_{k:05d}.pgm", img)
        ts = np.arange(cfg.n_frames) / cfg.fps
        (d / "frames" / "timestamps.txt").write_text("".join(f"{x:.6f}\n" for x in ts))

        windows = shake_windows(rng, duration, cfg.shakes)
        ta, acc = accel_trace(rng, duration, cfg.accel_rate, windows)
        _write_csv(d / "accel.csv", "t,ax,ay,az", ta, acc)
        alpha = 12.0 * (1.0 - motion) + 3.0
        te, x = eeg_trace(rng, duration, cfg.eeg_rate, windows, alpha)
        _write_csv(d / "eeg.csv", "t,f3,f4", te, x.T)

        moving = np.mean([lab != "still" for lab in labels])
        arousal = int(np.clip(np.rint(1 + 4 * moving + rng.normal(scale=0.5)), 0, 6))
        valence = int(np.clip(np.rint(2 * moving - 0.5 + rng.normal(scale=0.5)), -3, 3))
        rows.append(f"{sid},{valence},{arousal}\n")
    (out / "ratings.csv").write_text("situation_id,valence,arousal\n" + "".join(rows))
    (out / "config.json").write_text(json.dumps({"data_root": "data", "ratings": "ratings.csv"}, indent=1) + "\n")
    return out
