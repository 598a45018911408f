"""Affective curve: exact GP regression of arousal on valence.

The prior mean is a linear basis (intercept + slope) with flat-prior weights
estimated by generalized least squares; the residual is a zero-mean GP with a
squared-exponential kernel. Hyperparameters come from simple data heuristics,
or optionally from a small marginal-likelihood grid search.
"""
from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import AsituError, InsufficientDataError

DEFAULT_NOISE = 1e-2
MIN_LENGTH = 1e-3
MIN_SIGNAL = 1e-12


@dataclass(frozen=True)
class CurveConfig:
    noise_variance: float = DEFAULT_NOISE
    length_scale: float | None = None  # None: median pairwise |dV|
    signal_variance: float | None = None  # None: variance of the linear-fit residuals
    optimize: bool = False  # marginal-likelihood grid over length scale and noise


def se_kernel(x1: np.ndarray, x2: np.ndarray, signal_variance: float, length_scale: float) -> np.ndarray:
    d = np.subtract.outer(np.asarray(x1, float), np.asarray(x2, float))
    return signal_variance * np.exp(-0.5 * (d / length_scale) ** 2)


def _basis(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.column_stack([np.ones_like(x), x])


class AffectiveCurve:
    """Fitted GP posterior of arousal given valence. Immutable after fitting."""

    def __init__(self, v, a, signal_variance, length_scale, noise_variance, degenerate=False):
        self.v = np.asarray(v, dtype=np.float64)
        self.a = np.asarray(a, dtype=np.float64)
        self.signal_variance = float(signal_variance)
        self.length_scale = float(length_scale)
        self.noise_variance = float(noise_variance)
        self.degenerate = degenerate
        if degenerate:
            self.beta = np.array([float(np.mean(self.a)), 0.0])
            return
        K = se_kernel(self.v, self.v, self.signal_variance, self.length_scale)
        K[np.diag_indices_from(K)] += self.noise_variance
        self._chol = cho_factor(K, lower=True)
        H = _basis(self.v)
        KiH = cho_solve(self._chol, H)
        self._A = H.T @ KiH  # H^T K^-1 H
        self.beta = np.linalg.solve(self._A, KiH.T @ self.a)
        self._alpha = cho_solve(self._chol, self.a - H @ self.beta)

    @property
    def weights(self) -> np.ndarray:
        """Linear basis weights (intercept, slope)."""
        return self.beta

    def mean(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = _basis(x) @ self.beta
        if not self.degenerate:
            out = out + se_kernel(x, self.v, self.signal_variance, self.length_scale) @ self._alpha
        return out

    def mean_gradient(self, x) -> np.ndarray:
        """Analytic d(mean)/dV."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.full_like(x, self.beta[1])
        if not self.degenerate:
            Ks = se_kernel(x, self.v, self.signal_variance, self.length_scale)
            dK = -Ks * np.subtract.outer(x, self.v) / self.length_scale ** 2
            out = out + dK @ self._alpha
        return out

    def variance(self, x) -> np.ndarray:
        """Posterior variance of the latent curve (basis uncertainty included)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.degenerate:
            return np.zeros_like(x)
        Ks = se_kernel(self.v, x, self.signal_variance, self.length_scale)  # (n, m)
        KiKs = cho_solve(self._chol, Ks)
        var = self.signal_variance - np.einsum("nm,nm->m", Ks, KiKs)
        R = _basis(x).T - _basis(self.v).T @ KiKs  # (2, m)
        var = var + np.einsum("im,im->m", R, np.linalg.solve(self._A, R))
        return np.maximum(var, 0.0)

    def log_marginal_likelihood(self) -> float:
        if self.degenerate:
            return float("-inf")
        L = self._chol[0]
        n = len(self.v)
        H = _basis(self.v)
        r = self.a - H @ self.beta
        logdet_K = 2.0 * np.sum(np.log(np.diag(L)))
        _, logdet_A = np.linalg.slogdet(self._A)
        return float(-0.5 * r @ self._alpha - 0.5 * logdet_K - 0.5 * logdet_A
                     - 0.5 * (n - H.shape[1]) * np.log(2 * np.pi))


def _median_pairwise(v: np.ndarray) -> float:
    d = np.abs(np.subtract.outer(v, v))[np.triu_indices(len(v), 1)]
    return float(np.median(d)) if len(d) else 1.0


def fit_affective_curve(points, cfg: CurveConfig = CurveConfig()) -> AffectiveCurve:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise InsufficientDataError("an affective curve needs at least 2 points")
    v, a = pts[:, 0], pts[:, 1]
    if np.ptp(v) == 0:
        return AffectiveCurve(v, a, 0.0, 1.0, cfg.noise_variance, degenerate=True)

    ell = cfg.length_scale if cfg.length_scale is not None else max(_median_pairwise(v), MIN_LENGTH)
    if cfg.signal_variance is not None:
        sf2 = cfg.signal_variance
    else:
        coef, *_ = np.linalg.lstsq(_basis(v), a, rcond=None)
        sf2 = float(np.var(a - _basis(v) @ coef))
    sf2 = max(sf2, MIN_SIGNAL)

    if not cfg.optimize:
        return AffectiveCurve(v, a, sf2, ell, cfg.noise_variance)

    best, best_ll = None, -np.inf
    for ls in ell * np.logspace(-1, 1, 9):
        for nv in cfg.noise_variance * np.logspace(-2, 2, 5):
            try:
                c = AffectiveCurve(v, a, sf2, ls, nv)
            except np.linalg.LinAlgError:
                continue
            ll = c.log_marginal_likelihood()
            if ll > best_ll:
                best, best_ll = c, ll
    if best is None:
        raise AsituError("no grid point gave a positive-definite kernel")
    return best


def sample_curve(curve: AffectiveCurve, v_grid) -> list[tuple[float, float, float]]:
    if curve is None:
        raise AsituError("curve not fitted")
    g = np.asarray(v_grid, dtype=np.float64)
    if g.size == 0:
        return []
    mu = curve.mean(g)
    var = curve.variance(g)
    return [(float(x), float(m), float(s)) for x, m, s in zip(g, mu, var)]


# --------------------------------------------------------------------------
# SAM scale and discrete states

@dataclass(frozen=True)
class SamScalePair:
    v6: float
    a6: float


def to_sam_scale(V: float, A: float) -> SamScalePair:
    tol = 1e-9
    if not (-1 - tol <= V <= 1 + tol and -tol <= A <= 1 + tol):
        raise ValueError(f"(V={V}, A={A}) outside [-1,1] x [0,1]")
    return SamScalePair(3.0 * (V + 1.0), 6.0 * A)


def from_sam_scale(pair: SamScalePair) -> tuple[float, float]:
    return pair.v6 / 3.0 - 1.0, pair.a6 / 6.0


class AffectiveState(str, enum.Enum):
    LANV = "LANV"
    LAUV = "LAUV"
    LAPV = "LAPV"
    MANV = "MANV"
    MAUV = "MAUV"
    MAPV = "MAPV"
    HANV = "HANV"
    HAUV = "HAUV"
    HAPV = "HAPV"


@dataclass(frozen=True)
class StateThresholds:
    arousal: tuple[float, float] = (2.0, 4.0)
    valence: tuple[float, float] = (2.0, 4.0)

    def __post_init__(self):
        for lo, hi in (self.arousal, self.valence):
            if not 0.0 <= lo <= hi <= 6.0:
                raise ValueError("state thresholds must be ordered inside [0, 6]")


def bin_state(pair: SamScalePair, thresholds: StateThresholds = StateThresholds()) -> AffectiveState:
    """Tertile-style partition of the 0-6 plane; a boundary belongs to the upper bin."""
    def level(x, cuts, names):
        if x < cuts[0]:
            return names[0]
        if x < cuts[1]:
            return names[1]
        return names[2]

    a = level(pair.a6, thresholds.arousal, ("LA", "MA", "HA"))
    v = level(pair.v6, thresholds.valence, ("NV", "UV", "PV"))
    return AffectiveState(a + v)


# --------------------------------------------------------------------------
# files

def write_curve_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["v", "mean_a", "var_a"])
        for v, m, s in samples:
            wr.writerow([f"{v:.9g}", f"{m:.9g}", f"{s:.9g}"])


def state_summary(situation_id: str, t, V, A, thresholds: StateThresholds = StateThresholds()) -> dict:
    points = []
    hist = {s.value: 0 for s in AffectiveState}
    for ti, vi, ai in zip(t, V, A):
        p = to_sam_scale(float(vi), float(ai))
        st = bin_state(p, thresholds)
        hist[st.value] += 1
        points.append({"t": round(float(ti), 9), "v6": round(p.v6, 9), "a6": round(p.a6, 9), "state": st.value})
    return {"situation_id": situation_id, "points": points, "state_histogram": hist}


def write_state_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=False)
        fh.write("\n")

