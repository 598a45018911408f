"""Contentment, arousal and valence series.

Component series of a whole batch of situations share one set of maxima and
one arousal normalization range, so labels from different situations are
comparable. :func:`label_batch` runs the two passes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError

EPS = 1e-9


@dataclass(frozen=True)
class AffectParams:
    lambda1: float = 0.5
    lambda2: float = 2.0
    lambda3: float = -1.0
    alpha1: float = 0.75
    nu1: float = 0.5
    smoothing_s: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.alpha1 <= 1.0 or not 0.0 <= self.nu1 <= 1.0:
            raise ValueError("alpha1 and nu1 must lie in [0, 1]")

    @property
    def alpha2(self) -> float:
        return 1.0 - self.alpha1

    @property
    def nu2(self) -> float:
        return 1.0 - self.nu1


@dataclass
class ComponentSeries:
    t: np.ndarray
    m: np.ndarray
    log_o: np.ndarray
    l: np.ndarray  # noqa: E741

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.m) == len(self.log_o) == len(self.l) == n):
            raise ValueError("component series lengths differ")

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class Maxima:
    m_max: float
    l_max: float
    log_o_max: float
    r_max: float = 1.0


@dataclass
class LabelSeries:
    t: np.ndarray
    V: np.ndarray
    A: np.ndarray

    def __len__(self):
        return len(self.t)


def contentment_component(t_elapsed, params: AffectParams = AffectParams()):
    """Dwell-time contentment ``lambda1 * log(t_elapsed + 1) + lambda3``.

    Equals ``lambda3`` on the first frame and grows logarithmically after.
    """
    t = np.asarray(t_elapsed, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("elapsed time must be non-negative")
    delta = t + params.lambda2 + 1.0
    out = params.lambda1 * np.log(delta - params.lambda2) + params.lambda3
    return float(out) if out.ndim == 0 else out


def window_frames(t: np.ndarray, seconds: float) -> int:
    if len(t) < 2 or seconds <= 0:
        return 1
    dt = float(np.median(np.diff(t)))
    return max(1, int(round(seconds / dt)))


def moving_average(x: np.ndarray, w: int) -> np.ndarray:
    """Moving average over ``w`` samples.

    Windows are centered where they fit; near the ends the window keeps its
    full length and slides inward instead of padding, so consecutive outputs
    never differ by more than ``(max(x) - min(x)) / w``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n == 0:
        return x.copy()
    w = int(max(1, min(w, n)))
    c = np.concatenate([[0.0], np.cumsum(x)])
    start = np.clip(np.arange(n) - (w - 1) // 2, 0, n - w)
    return (c[start + w] - c[start]) / w


def minmax(x: np.ndarray, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo = float(np.min(x)) if lo is None else lo
    hi = float(np.max(x)) if hi is None else hi
    if hi - lo <= 1e-12 * max(1.0, abs(hi), abs(lo)):
        return np.full_like(x, 0.5)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def arousal_raw(comp: ComponentSeries, params: AffectParams, maxima: Maxima) -> np.ndarray:
    return params.alpha1 * comp.m / maxima.m_max + params.alpha2 * comp.l / maxima.l_max


def arousal_smoothed(comp: ComponentSeries, params: AffectParams, maxima: Maxima) -> np.ndarray:
    if len(comp) == 0:
        raise InsufficientDataError("empty component series")
    if min(maxima.m_max, maxima.l_max) <= 0:
        raise ValueError("maxima must be positive")
    return moving_average(arousal_raw(comp, params, maxima), window_frames(comp.t, params.smoothing_s))


def arousal_series(comp: ComponentSeries, params: AffectParams, maxima: Maxima,
                   batch_range: tuple[float, float] | None = None) -> np.ndarray:
    """Smoothed arousal, min-max normalized over ``batch_range`` (default: this series)."""
    s = arousal_smoothed(comp, params, maxima)
    lo, hi = batch_range if batch_range is not None else (None, None)
    return minmax(s, lo, hi)


def range_dependence(l, A):
    """``sign(l) * A`` with sign(0) = 0."""
    out = np.sign(np.asarray(l, dtype=np.float64)) * np.asarray(A, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


def valence_series(r: np.ndarray, log_o: np.ndarray, params: AffectParams, maxima: Maxima,
                   t: np.ndarray | None = None) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    log_o = np.asarray(log_o, dtype=np.float64)
    if len(r) == 0:
        raise InsufficientDataError("empty series")
    if maxima.r_max <= 0:
        raise ValueError("maxima must be positive")
    # o / o_max evaluated in the log domain
    motiv = np.exp(np.minimum(log_o - maxima.log_o_max, 0.0))
    raw = params.nu1 * r / maxima.r_max + params.nu2 * motiv
    w = window_frames(t, params.smoothing_s) if t is not None else 1
    return np.clip(moving_average(raw, w), -1.0, 1.0)


def compute_maxima(batch: list[ComponentSeries], r_series: list[np.ndarray] | None = None,
                   eps: float = EPS) -> Maxima:
    if not batch:
        raise InsufficientDataError("empty batch")
    m_max = max(float(np.max(c.m)) for c in batch)
    l_max = max(float(np.max(np.abs(c.l))) for c in batch)
    log_o_max = max(float(np.max(c.log_o)) for c in batch)
    r_max = max(float(np.max(np.abs(r))) for r in r_series) if r_series else 1.0
    return Maxima(max(m_max, eps), max(l_max, eps), max(log_o_max, eps), max(r_max, eps))


def label_batch(batch: list[ComponentSeries], params: AffectParams = AffectParams(),
                eps: float = EPS) -> tuple[list[LabelSeries], Maxima]:
    """Arousal and valence for every situation of a normalization batch."""
    pre = compute_maxima(batch, eps=eps)
    smoothed = [arousal_smoothed(c, params, pre) for c in batch]
    lo = min(float(s.min()) for s in smoothed)
    hi = max(float(s.max()) for s in smoothed)
    arousal = [minmax(s, lo, hi) for s in smoothed]
    r_series = [range_dependence(c.l, a) for c, a in zip(batch, arousal)]
    maxima = compute_maxima(batch, r_series, eps=eps)
    labels = []
    for c, a, r in zip(batch, arousal, r_series):
        v = valence_series(r, c.log_o, params, maxima, c.t)
        labels.append(LabelSeries(c.t.copy(), v, a))
    return labels, maxima


def write_components_csv(path, comp: ComponentSeries, labels: LabelSeries) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "m", "log_o", "l", "A", "V"])
        for row in zip(comp.t, comp.m, comp.log_o, comp.l, labels.A, labels.V):
            wr.writerow([f"{v:.9g}" for v in row])


def read_components_csv(path) -> tuple[ComponentSeries, LabelSeries]:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    comp = ComponentSeries(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    return comp, LabelSeries(arr[:, 0], arr[:, 5], arr[:, 4])
