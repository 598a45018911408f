"""EEG cleaning, motion gating and spectral features.

Pipeline: 2 Hz zero-phase high-pass, 1-s segments annotated with the mean
accelerometer gate, a gate threshold picked by maximizing the Bhattacharyya
distance between the low-gate and high-gate segment groups (five amplitude
statistics projected on two principal axes), then Welch band powers and
band-averaged bicoherence on the clean segments.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, get_window, sosfiltfilt

from .errors import InsufficientDataError
from .ingest import EegRecording

log = logging.getLogger(__name__)

BANDS: dict[str, tuple[int, int]] = {
    "theta": (4, 7),
    "alpha": (8, 13),
    "beta": (14, 29),
    "gamma": (30, 45),
}
CHANNELS = ("F3", "F4")
THETA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))
MIN_GROUP = 3
COV_RIDGE = 1e-6
MIN_BICOHERENCE_SEGMENTS = 8


@dataclass
class EegSegment:
    samples: np.ndarray  # (n_channels, sample_rate)
    start: float
    sample_rate: int
    g: float = 0.0
    clean: bool = True


@dataclass(frozen=True)
class SegmentStats:
    mean_power: float
    max_amplitude: float
    std: float
    kurtosis: float
    skewness: float
    degenerate: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_power, self.max_amplitude, self.std, self.kurtosis, self.skewness])


@dataclass
class GateResult:
    theta: float
    distances: dict[float, float]
    clean: np.ndarray
    warning: str | None = None


@dataclass
class Bicoherence:
    freqs: np.ndarray
    values: np.ma.MaskedArray  # [w1, w2], defined on w1 >= w2, w1 + w2 <= Nyquist

    def at(self, f1: float, f2: float) -> float:
        """Value at a frequency pair, in either order."""
        hi, lo = max(f1, f2), min(f1, f2)
        i = int(np.argmin(np.abs(self.freqs - hi)))
        j = int(np.argmin(np.abs(self.freqs - lo)))
        v = self.values[i, j]
        return float("nan") if v is np.ma.masked else float(v)


@dataclass
class EegFeatureSet:
    psd: dict[str, dict[str, float]] = field(default_factory=dict)  # channel -> band -> mean PSD
    bicoherence: dict[str, dict[tuple[str, str], float]] = field(default_factory=dict)
    n_clean: int = 0
    n_segments: int = 0
    warnings: list[str] = field(default_factory=list)


# --------------------------------------------------------------------------
# filtering and segmentation

def highpass(eeg: EegRecording, cutoff: float = 2.0, order: int = 4) -> EegRecording:
    """Zero-phase Butterworth high-pass (order ``order``, run forward and backward)."""
    fs = float(eeg.sample_rate)
    if cutoff <= 0 or cutoff >= fs / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {fs / 2}) Hz")
    sos = butter(order, cutoff, btype="highpass", fs=fs, output="sos")
    x = np.asarray(eeg.channels, dtype=np.float64)
    x = x - x.mean(axis=1, keepdims=True)
    padlen = min(x.shape[1] - 1, 3 * (2 * len(sos) + 1))
    y = sosfiltfilt(sos, x, axis=1, padlen=padlen)
    return EegRecording(eeg.timestamps, y, eeg.sample_rate, eeg.filled)


def segment(eeg: EegRecording, gate_t=None, gate_values=None) -> list[EegSegment]:
    """Consecutive 1-s windows; ``g`` is the mean gate over each window.

    The gate is given at its own timestamps (frame rate) and interpolated to
    the EEG samples. The trailing partial second is dropped.
    """
    fs = int(round(eeg.sample_rate))
    n = eeg.channels.shape[1]
    count = n // fs
    if count < 1:
        raise InsufficientDataError("EEG recording shorter than 1 s")
    if gate_values is None:
        g = np.zeros(n)
    else:
        g = np.interp(eeg.timestamps, np.asarray(gate_t, float), np.asarray(gate_values, float))
    out = []
    for k in range(count):
        sl = slice(k * fs, (k + 1) * fs)
        out.append(EegSegment(eeg.channels[:, sl].copy(), float(eeg.timestamps[k * fs]), fs,
                              float(np.mean(g[sl]))))
    return out


# --------------------------------------------------------------------------
# gating

def _channel_stats(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    mean_power = float(np.mean(x ** 2))
    max_amp = float(np.max(np.abs(x))) if len(x) else 0.0
    mu = x.mean()
    sd = float(x.std())
    if sd <= 1e-12 * max(1.0, abs(mu)):
        return np.array([mean_power, max_amp, sd, 3.0, 0.0]), True
    z = (x - mu) / sd
    return np.array([mean_power, max_amp, sd, float(np.mean(z ** 4)), float(np.mean(z ** 3))]), False


def segment_stats(seg: EegSegment, per_channel: bool = False):
    """Five amplitude statistics; kurtosis is non-excess (Gaussian -> 3).

    Channels are averaged into one 5-vector unless ``per_channel``, in which
    case a list with one :class:`SegmentStats` per channel is returned.
    """
    rows = [_channel_stats(ch) for ch in np.atleast_2d(seg.samples)]
    stats = [SegmentStats(*r, degenerate=d) for r, d in rows]
    if per_channel:
        return stats
    arr = np.mean([r for r, _ in rows], axis=0)
    return SegmentStats(*arr, degenerate=any(d for _, d in rows))


def feature_matrix(segments: list[EegSegment], per_channel: bool = False) -> np.ndarray:
    if per_channel:
        return np.array([np.concatenate([s.as_array() for s in segment_stats(seg, True)])
                         for seg in segments])
    return np.array([segment_stats(seg).as_array() for seg in segments])


def pca_project(features: np.ndarray, k: int = 2) -> np.ndarray:
    """Standardize columns and project on the top-``k`` principal axes."""
    F = np.asarray(features, dtype=np.float64)
    mu = F.mean(axis=0)
    sd = F.std(axis=0)
    Z = np.where(sd > 0, (F - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    C = np.cov(Z, rowvar=False) if len(Z) > 1 else np.zeros((F.shape[1], F.shape[1]))
    w, V = np.linalg.eigh(np.atleast_2d(C))
    order = np.argsort(w)[::-1][:k]
    P = V[:, order]
    # fix eigenvector signs so projections are reproducible
    signs = np.sign(P[np.argmax(np.abs(P), axis=0), np.arange(P.shape[1])])
    P = P * np.where(signs == 0, 1.0, signs)
    return Z @ P


def bhattacharyya(mu1, cov1, mu2, cov2) -> float:
    """Bhattacharyya distance between two multivariate Gaussians."""
    mu1, mu2 = np.atleast_1d(mu1).astype(float), np.atleast_1d(mu2).astype(float)
    c1, c2 = np.atleast_2d(cov1).astype(float), np.atleast_2d(cov2).astype(float)
    c = 0.5 * (c1 + c2)
    d = mu1 - mu2
    term1 = 0.125 * d @ np.linalg.solve(c, d)
    _, ld = np.linalg.slogdet(c)
    _, ld1 = np.linalg.slogdet(c1)
    _, ld2 = np.linalg.slogdet(c2)
    term2 = 0.5 * (ld - 0.5 * (ld1 + ld2))
    return float(term1 + term2)


def _fit_gaussian(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cov = np.cov(P, rowvar=False) + COV_RIDGE * np.eye(P.shape[1])
    return P.mean(axis=0), cov


def gate_threshold(segments: list[EegSegment], grid=THETA_GRID, per_channel: bool = False,
                   min_group: int = MIN_GROUP) -> GateResult:
    """Pick the gate threshold that best separates low-gate from high-gate segments.

    Each candidate threshold splits the segments into ``g < theta`` and
    ``g >= theta``; a threshold is evaluated only when both groups hold at
    least ``min_group`` segments. The winner maximizes the Bhattacharyya
    distance (first one on ties). Segments below it are marked clean in place.
    """
    if len(segments) < 10:
        raise InsufficientDataError(f"gating needs at least 10 segments, got {len(segments)}")
    g = np.array([s.g for s in segments])
    F = feature_matrix(segments, per_channel)
    warning = None
    distances: dict[float, float] = {}
    if np.all(np.ptp(F, axis=0) <= 1e-12 * np.maximum(1.0, np.abs(F).max(axis=0))):
        warning = "all segments share identical features; no separation possible"
    else:
        P = pca_project(F, 2)
        for theta in grid:
            lo, hi = g < theta, g >= theta
            if lo.sum() < min_group or hi.sum() < min_group:
                continue
            m1, c1 = _fit_gaussian(P[lo])
            m2, c2 = _fit_gaussian(P[hi])
            distances[theta] = bhattacharyya(m1, c1, m2, c2)
        if not distances:
            warning = "no threshold leaves both groups populated"
        elif max(distances.values()) <= 1e-12:
            warning = "groups indistinguishable at every threshold"
    if warning is not None:
        log.warning("gate threshold: %s; using 0.5", warning)
        theta_star = 0.5
    else:
        best = max(distances.values())
        theta_star = min(t for t, d in distances.items() if d == best)
    clean = g < theta_star
    for s, c in zip(segments, clean):
        s.clean = bool(c)
    return GateResult(theta_star, distances, clean, warning)


# --------------------------------------------------------------------------
# spectra

def _spectra(segments: list[EegSegment], channel: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    fs = segments[0].sample_rate
    n = segments[0].samples.shape[1]
    win = get_window("hann", n)
    x = np.array([s.samples[channel] for s in segments], dtype=np.float64)
    X = np.fft.rfft(x * win, axis=1)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    return freqs, X, win, fs


def welch_psd(segments: list[EegSegment], channel: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """One-sided PSD (units^2/Hz) averaged over Hann-windowed 1-s segments."""
    if not segments:
        raise InsufficientDataError("no clean segments for the PSD")
    freqs, X, win, fs = _spectra(segments, channel)
    n = len(win)
    pxx = np.abs(X) ** 2 / (fs * np.sum(win ** 2))
    pxx[:, 1:] *= 2.0
    if n % 2 == 0:
        pxx[:, -1] /= 2.0
    return freqs, pxx.mean(axis=0)


def band_power(freqs: np.ndarray, psd: np.ndarray, band) -> float:
    """Mean PSD over the bins of ``band`` (inclusive edges)."""
    lo, hi = BANDS[band] if isinstance(band, str) else band
    if lo < freqs[0] or hi > freqs[-1]:
        raise ValueError(f"band {lo}-{hi} Hz outside PSD support {freqs[0]}-{freqs[-1]} Hz")
    sel = (freqs >= lo - 1e-9) & (freqs <= hi + 1e-9)
    return float(np.mean(psd[sel]))


def bicoherence(segments: list[EegSegment], channel: int = 0, norm: str = "bounded") -> Bicoherence:
    """Segment-averaged bicoherence on the principal domain, 1 Hz resolution.

    ``norm="bounded"`` divides ``|sum X1 X2 X3*|`` by
    ``sqrt(sum|X1 X2|^2 * sum|X3|^2)``, which keeps every cell in [0, 1].
    ``norm="power"`` uses the product of the three averaged powers instead.
    Cells whose bins carry no power are masked.
    """
    if len(segments) < MIN_BICOHERENCE_SEGMENTS:
        raise InsufficientDataError(
            f"bicoherence needs at least {MIN_BICOHERENCE_SEGMENTS} segments, got {len(segments)}")
    freqs, X, _, _ = _spectra(segments, channel)
    nf = len(freqs)
    i, j = np.meshgrid(np.arange(nf), np.arange(nf), indexing="ij")
    domain = (j >= 1) & (i >= j) & (i + j <= nf - 1)
    I, J = i[domain], j[domain]
    K = I + J
    X1, X2, X3 = X[:, I], X[:, J], X[:, K]
    num = np.abs(np.sum(X1 * X2 * np.conj(X3), axis=0))
    P = np.abs(X) ** 2
    Pm = P.mean(axis=0)
    floor = 1e-24 * Pm.max() if Pm.max() > 0 else np.inf
    dead = (Pm[I] <= floor) | (Pm[J] <= floor) | (Pm[K] <= floor)
    if norm == "bounded":
        den = np.sqrt(np.sum(np.abs(X1 * X2) ** 2, axis=0) * np.sum(P[:, K], axis=0))
    elif norm == "power":
        num = num / len(segments)
        den = np.sqrt(Pm[I] * Pm[J] * Pm[K])
    else:
        raise ValueError(f"unknown normalization {norm!r}")
    vals = np.zeros(len(I))
    ok = ~dead & (den > 0)
    vals[ok] = num[ok] / den[ok]
    full = np.zeros((nf, nf))
    mask = np.ones((nf, nf), dtype=bool)
    full[I, J] = vals
    mask[I, J] = ~ok
    return Bicoherence(freqs, np.ma.MaskedArray(full, mask=mask))


def band_mean_bicoherence(bc: Bicoherence, q1, q2) -> float:
    """Mean over defined principal-domain cells with w1 in ``q1`` and w2 in ``q2``."""
    lo1, hi1 = BANDS[q1] if isinstance(q1, str) else q1
    lo2, hi2 = BANDS[q2] if isinstance(q2, str) else q2
    f = bc.freqs
    r1 = np.nonzero((f >= lo1) & (f <= hi1))[0]
    r2 = np.nonzero((f >= lo2) & (f <= hi2))[0]
    block = bc.values[np.ix_(r1, r2)]
    if block.count() == 0:
        raise ValueError(f"no defined bicoherence cells in {q1} x {q2}")
    return float(block.mean())


# --------------------------------------------------------------------------
# feature assembly

def eeg_features(clean: list[EegSegment], channels=CHANNELS, bic_norm: str = "bounded") -> EegFeatureSet:
    fs = EegFeatureSet(n_clean=len(clean))
    names = list(BANDS)
    for ci, ch in enumerate(channels):
        freqs, psd = welch_psd(clean, ci)
        fs.psd[ch] = {b: band_power(freqs, psd, b) for b in names}
        try:
            bc = bicoherence(clean, ci, bic_norm)
        except InsufficientDataError as exc:
            # too few clean seconds for a stable estimate: keep the PSD, skip bicoherence
            msg = f"{ch}: bicoherence skipped ({exc})"
            log.warning("%s", msg)
            fs.warnings.append(msg)
            fs.bicoherence[ch] = {}
            continue
        table = {}
        for q1 in names:
            for q2 in names:
                try:
                    table[(q1, q2)] = band_mean_bicoherence(bc, q1, q2)
                except ValueError:
                    # rectangle lies off the principal domain: bicoherence is symmetric
                    table[(q1, q2)] = band_mean_bicoherence(bc, q2, q1)
        fs.bicoherence[ch] = table
    return fs


def segment_band_powers(segments: list[EegSegment], channel: int = 0) -> dict[str, np.ndarray]:
    """Band power of every segment on its own (for time-resolved correlations)."""
    out = {b: np.zeros(len(segments)) for b in BANDS}
    for k, s in enumerate(segments):
        freqs, psd = welch_psd([s], channel)
        for b in BANDS:
            out[b][k] = band_power(freqs, psd, b)
    return out


def write_psd_csv(path, situation: str, feats: EegFeatureSet) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["situation", "channel", "band", "psd_mean"])
        for ch, bands in feats.psd.items():
            for b, v in bands.items():
                wr.writerow([situation, ch, b, f"{v:.9g}"])


def write_bicoherence_csv(path, situation: str, feats: EegFeatureSet) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["situation", "channel", "q1", "q2", "bicoherence_mean"])
        for ch, table in feats.bicoherence.items():
            for (q1, q2), v in table.items():
                wr.writerow([situation, ch, q1, q2, f"{v:.9g}"])


def write_gate_csv(path, segments: list[EegSegment]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["segment_start", "g", "clean"])
        for s in segments:
            wr.writerow([f"{s.start:.6f}", f"{s.g:.9g}", int(s.clean)])
