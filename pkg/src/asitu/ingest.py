"""Loading and aligning the raw streams of a situation.

Frames are binary PGM (P5) files, accelerometer and EEG are CSV files.
Everything is aligned on the frame timestamps by :func:`assemble_situation`.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, InsufficientDataError, OverlapError

DEFAULT_FPS = 30.0
DEFAULT_EEG_RATE = 250
ALIGN_TOL = 1e-6
MAX_GAP_S = 1.0
SIDECAR = "timestamps.txt"


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n, H, W) uint8
    timestamps: np.ndarray
    nominal_fps: float = DEFAULT_FPS

    def __post_init__(self):
        if self.frames.ndim != 3:
            raise DimensionError("frames must be a (n, H, W) stack")
        if len(self.frames) < 2:
            raise InsufficientDataError("a frame sequence needs at least 2 frames")
        if len(self.timestamps) != len(self.frames):
            raise DimensionError("one timestamp per frame required")
        if np.any(np.diff(self.timestamps) <= 0):
            raise FormatError("frame timestamps must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @property
    def dims(self) -> tuple[int, int]:
        """(W, H) in pixels."""
        return self.frames.shape[2], self.frames.shape[1]


@dataclass(frozen=True)
class AccelSeries:
    timestamps: np.ndarray
    samples: np.ndarray  # (n, 3) m/s^2

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] != 3:
            raise DimensionError("accelerometer samples must be (n, 3)")
        if len(self.timestamps) != len(self.samples):
            raise DimensionError("accelerometer timestamps and samples differ in length")
        if np.any(np.diff(self.timestamps) < 0):
            raise FormatError("accelerometer timestamps must be non-decreasing")

    def __len__(self):
        return len(self.timestamps)

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.samples, axis=1)


@dataclass(frozen=True)
class EegRecording:
    timestamps: np.ndarray
    channels: np.ndarray  # (2, n) microvolts, rows F3, F4
    sample_rate: float = DEFAULT_EEG_RATE
    filled: np.ndarray | None = None  # True where a sample was interpolated

    def __post_init__(self):
        if self.channels.ndim != 2 or self.channels.shape[1] != len(self.timestamps):
            raise DimensionError("EEG channels must be (n_channels, n_samples)")
        if self.sample_rate <= 0:
            raise FormatError("EEG sample rate must be positive")

    def __len__(self):
        return len(self.timestamps)

    @property
    def filled_mask(self) -> np.ndarray:
        if self.filled is None:
            return np.zeros(len(self.timestamps), dtype=bool)
        return self.filled


@dataclass(frozen=True)
class Situation:
    id: str
    frames: FrameSequence
    accel_at_frames: AccelSeries
    eeg: EegRecording
    meta: dict = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        ts = self.frames.timestamps
        return float(ts[-1] - ts[0])


# --------------------------------------------------------------------------
# PGM

def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM into a 2D uint8/uint16 array."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)").match(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: malformed PGM header")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    n = width * height * dtype.itemsize
    if len(data) - pos < n:
        raise FormatError(f"{path}: PGM pixel data truncated")
    img = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    img = img.reshape(height, width)
    if maxval >= 256:
        img = img.astype(np.uint16)
    return img


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise DimensionError("PGM images are 2D")
    img = np.clip(img, 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


# --------------------------------------------------------------------------
# loaders

def _frame_index(path: Path) -> int:
    digits = re.findall(r"\d+", path.stem)
    if not digits:
        raise FormatError(f"{path.name}: frame file name carries no index")
    return int(digits[-1])


def load_frames(dir_path, pattern: str = "frame_*.pgm", nominal_fps: float = DEFAULT_FPS) -> FrameSequence:
    """Load a directory of PGM frames, sorted by the index in their names.

    Timestamps come from a ``timestamps.txt`` sidecar when present, otherwise
    they are synthesized at ``nominal_fps`` starting from 0.
    """
    d = Path(dir_path)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory not found: {d}")
    paths = sorted(d.glob(pattern), key=_frame_index)
    if not paths:
        raise InsufficientDataError(f"no frames matching {pattern!r} in {d}")
    images = [read_pgm(p) for p in paths]
    shape = images[0].shape
    for p, img in zip(paths, images):
        if img.shape != shape:
            raise DimensionError(
                f"{p.name}: size {img.shape[1]}x{img.shape[0]} differs from {shape[1]}x{shape[0]}")
    sidecar = d / SIDECAR
    if sidecar.exists():
        ts = np.array([float(x) for x in sidecar.read_text().split()], dtype=np.float64)
        if len(ts) != len(images):
            raise FormatError(f"{sidecar}: {len(ts)} timestamps for {len(images)} frames")
    else:
        ts = np.arange(len(images), dtype=np.float64) / nominal_fps
    return FrameSequence(np.stack(images), ts, nominal_fps)


_COLUMNS = {"accel": ("t", "ax", "ay", "az"), "eeg": ("t", "f3", "f4")}


def load_csv_series(path, kind: str):
    """Parse an accelerometer (``t,ax,ay,az``) or EEG (``t,f3,f4``) CSV."""
    if kind not in _COLUMNS:
        raise ValueError(f"unknown series kind {kind!r}")
    want = _COLUMNS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        missing = [c for c in want if c not in header]
        if missing:
            raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [header.index(c) for c in want]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(row[i]) for i in cols])
            except (ValueError, IndexError):
                raise FormatError(f"{path}: non-numeric or missing cell in row {lineno}") from None
    if len(rows) < 2:
        raise InsufficientDataError(f"{path}: fewer than 2 data rows")
    arr = np.asarray(rows, dtype=np.float64)
    t = arr[:, 0]
    if kind == "accel":
        return AccelSeries(t, arr[:, 1:4])
    dt = np.diff(t)
    dt = dt[dt > 0]
    if len(dt) == 0:
        raise FormatError(f"{path}: EEG timestamps do not advance")
    rate = float(round(1.0 / np.median(dt)))
    return EegRecording(t, arr[:, 1:3].T.copy(), rate)


# --------------------------------------------------------------------------
# alignment

def _check_gaps(t: np.ndarray, what: str) -> None:
    """Abort on missing stretches longer than MAX_GAP_S.

    A gap is an interval that skips samples (longer than 1.5 nominal periods);
    a stream that is simply sampled slowly has no gaps.
    """
    if len(t) < 2:
        return
    dt = np.diff(t)
    gap = dt > 1.5 * np.median(dt)
    if np.any(gap & (dt > MAX_GAP_S + ALIGN_TOL)):
        raise InsufficientDataError(f"{what} has a gap longer than {MAX_GAP_S} s")


def resample_accel(accel: AccelSeries, times: np.ndarray) -> AccelSeries:
    t = accel.timestamps
    valid = np.all(np.isfinite(accel.samples), axis=1)
    t, s = t[valid], accel.samples[valid]
    if len(t) < 2:
        raise InsufficientDataError("fewer than 2 valid accelerometer samples")
    _check_gaps(t, "accelerometer stream")
    if times[0] < t[0] - MAX_GAP_S or times[-1] > t[-1] + MAX_GAP_S:
        raise InsufficientDataError("accelerometer misses more than 1 s at a situation edge")
    out = np.column_stack([np.interp(times, t, s[:, k]) for k in range(3)])
    return AccelSeries(times.copy(), out)


def align_eeg(eeg: EegRecording, t0: float, t1: float) -> EegRecording:
    """Trim EEG to [t0, t1] and put it on a regular grid, filling gaps linearly."""
    t = eeg.timestamps
    keep = (t >= t0 - ALIGN_TOL) & (t <= t1 + ALIGN_TOL)
    t = t[keep]
    x = eeg.channels[:, keep]
    prior_filled = eeg.filled_mask[keep]
    finite = np.all(np.isfinite(x), axis=0)
    tv, xv = t[finite], x[:, finite]
    if len(tv) < 2:
        raise InsufficientDataError("fewer than 2 valid EEG samples inside the frame range")
    _check_gaps(tv, "EEG stream")
    fs = eeg.sample_rate
    n = int(np.floor((tv[-1] - tv[0]) * fs + 0.5)) + 1
    grid = tv[0] + np.arange(n) / fs
    chans = np.vstack([np.interp(grid, tv, row) for row in xv])
    # a grid point is filled unless a valid original sample sits on it
    idx = np.clip(np.searchsorted(tv, grid), 0, len(tv) - 1)
    idx_lo = np.clip(idx - 1, 0, len(tv) - 1)
    near = np.minimum(np.abs(tv[idx] - grid), np.abs(tv[idx_lo] - grid))
    filled = near > ALIGN_TOL + 0.25 / fs
    if prior_filled.any():
        src = np.searchsorted(t, grid - ALIGN_TOL)
        src = np.clip(src, 0, len(t) - 1)
        filled |= prior_filled[src] & (np.abs(t[src] - grid) <= ALIGN_TOL)
    return EegRecording(grid, chans, fs, filled)


def assemble_situation(frames: FrameSequence, accel: AccelSeries, eeg: EegRecording,
                       situation_id: str = "situation") -> Situation:
    t0, t1 = float(frames.timestamps[0]), float(frames.timestamps[-1])
    for name, ts in (("accelerometer", accel.timestamps), ("EEG", eeg.timestamps)):
        if len(ts) == 0 or ts[-1] < t0 - ALIGN_TOL or ts[0] > t1 + ALIGN_TOL:
            raise OverlapError(f"{name} stream [{ts[0] if len(ts) else 'n/a'}, "
                               f"{ts[-1] if len(ts) else 'n/a'}] s does not overlap frames [{t0}, {t1}] s")
    accel_f = resample_accel(accel, frames.timestamps)
    eeg_a = align_eeg(eeg, t0, t1)
    return Situation(situation_id, frames, accel_f, eeg_a)

