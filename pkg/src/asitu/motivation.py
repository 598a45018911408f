"""Approach/withdrawal motivation from local affine flow inside the attended region.

A local flow window is modelled as ``e_p = u + chi (p - p0)`` and ``chi`` is
split into divergence, curl and two hyperbolic terms. The per-window ratio of
divergence to the remaining deformation is summed over the region; the sum is
the log of the motivation component.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import SingularFitError
from .flow import FlowField
from .saliency import AttentiveRegion

D1 = np.array([[1.0, 0.0], [0.0, 1.0]])
D2 = np.array([[0.0, -1.0], [1.0, 0.0]])
H1 = np.array([[1.0, 0.0], [0.0, -1.0]])
H2 = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class MotivationConfig:
    window: int = 3  # blocks per side
    stride: int = 1
    eps: float = 1e-6
    kappa: float = 10.0
    signed_denominator: bool = False  # raw d2+h1+h2 denominator, for comparison


@dataclass(frozen=True)
class FlowParams:
    u1: float
    u2: float
    d1: float
    d2: float
    h1: float
    h2: float
    residual: float = 0.0

    def as_tuple(self):
        return (self.u1, self.u2, self.d1, self.d2, self.h1, self.h2)


@dataclass
class MotivationResult:
    log_o: float
    ratios: np.ndarray
    region: AttentiveRegion | None = None
    windows: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))  # (bx, by) origins
    params: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))


def decompose(chi) -> tuple[float, float, float, float]:
    """(d1, d2, h1, h2) of ``chi = [[chi1, chi3], [chi2, chi4]]``.

    The curl term is ``chi2 - chi3``; this is the value that makes
    ``0.5 * (d1 D1 + d2 D2 + h1 H1 + h2 H2)`` reproduce ``chi``.
    """
    chi = np.asarray(chi, dtype=np.float64)
    c1, c3 = chi[0, 0], chi[0, 1]
    c2, c4 = chi[1, 0], chi[1, 1]
    return (float(c1 + c4), float(c2 - c3), float(c1 - c4), float(c2 + c3))


def reconstruct(d1: float, d2: float, h1: float, h2: float) -> np.ndarray:
    return 0.5 * (d1 * D1 + d2 * D2 + h1 * H1 + h2 * H2)


def _chi_to_params(coef_x: np.ndarray, coef_y: np.ndarray) -> np.ndarray:
    # coef_* rows are (u, d/dx, d/dy) of one velocity component
    u1, c1, c3 = coef_x[..., 0], coef_x[..., 1], coef_x[..., 2]
    u2, c2, c4 = coef_y[..., 0], coef_y[..., 1], coef_y[..., 2]
    return np.stack([u1, u2, c1 + c4, c2 - c3, c1 - c4, c2 + c3], axis=-1)


def _design(offsets: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(offsets)), offsets[:, 0], offsets[:, 1]])


def fit_affine_flow(flow: FlowField, window) -> FlowParams:
    """Least-squares affine fit over a block subgrid.

    ``window`` is ``(bx0, by0, bx1, by1)`` in block indices, inclusive; the
    expansion point is the mean of the window's block centers.
    """
    bx0, by0, bx1, by1 = window
    vec = flow.vectors[by0:by1 + 1, bx0:bx1 + 1].reshape(-1, 2)
    cen = flow.centers[by0:by1 + 1, bx0:bx1 + 1].reshape(-1, 2)
    if len(vec) == 0:
        raise SingularFitError("empty fitting window")
    offsets = cen - cen.mean(axis=0)
    X = _design(offsets)
    if np.linalg.matrix_rank(X) < 3:
        raise SingularFitError(f"block centers of window {tuple(window)} are collinear")
    coef, *_ = np.linalg.lstsq(X, vec, rcond=None)  # (3, 2)
    params = _chi_to_params(coef[:, 0], coef[:, 1])
    resid = vec - X @ coef
    return FlowParams(*(float(p) for p in params), residual=float(np.sqrt(np.mean(resid ** 2))))


def motivation_ratio(params: np.ndarray, cfg: MotivationConfig = MotivationConfig()) -> np.ndarray:
    """Per-window divergence ratio, clamped to [-kappa, kappa]. ``params`` rows are (u1,u2,d1,d2,h1,h2)."""
    p = np.asarray(params, dtype=np.float64)
    d1, d2, h1, h2 = p[..., 2], p[..., 3], p[..., 4], p[..., 5]
    if cfg.signed_denominator:
        den = d2 + h1 + h2
        den = np.where(np.abs(den) < cfg.eps, np.where(den < 0, -cfg.eps, cfg.eps), den)
    else:
        den = np.abs(d2) + np.abs(h1) + np.abs(h2) + cfg.eps
    return np.clip(d1 / den, -cfg.kappa, cfg.kappa)


def region_blocks(flow: FlowField, region: AttentiveRegion) -> tuple[int, int, int, int]:
    """Block index range ``(bx0, by0, bx1, by1)`` whose centers lie in the region bbox.

    A region that covers no block center snaps to the block containing its middle.
    """
    x0, y0, x1, y1 = region.bbox
    bx, by = flow.grid_dims
    bs = flow.block_size
    half = (bs - 1) / 2.0
    cx = np.arange(bx) * bs + half
    cy = np.arange(by) * bs + half
    ix = np.nonzero((cx >= x0) & (cx <= x1))[0]
    iy = np.nonzero((cy >= y0) & (cy <= y1))[0]
    if len(ix) == 0:
        ix = np.array([min(int(((x0 + x1) / 2) // bs), bx - 1)])
    if len(iy) == 0:
        iy = np.array([min(int(((y0 + y1) / 2) // bs), by - 1)])
    return int(ix[0]), int(iy[0]), int(ix[-1]), int(iy[-1])


def _grow(lo: int, hi: int, size: int, limit: int) -> tuple[int, int]:
    if hi - lo + 1 >= size or limit < size:
        return lo, hi
    mid = (lo + hi) // 2
    lo = max(0, min(mid - size // 2, limit - size))
    return lo, lo + size - 1


def motivation_component(flow: FlowField, region: AttentiveRegion,
                         cfg: MotivationConfig = MotivationConfig()) -> MotivationResult:
    bx0, by0, bx1, by1 = region_blocks(flow, region)
    win = cfg.window
    nx, ny = bx1 - bx0 + 1, by1 - by0 + 1

    if nx < win or ny < win:
        # too small for sliding windows: one fit over the whole region,
        # widened to one full window when the region alone is degenerate
        try:
            fp = fit_affine_flow(flow, (bx0, by0, bx1, by1))
            origin = (bx0, by0)
        except SingularFitError:
            gx, gy = flow.grid_dims
            bx0, bx1 = _grow(bx0, bx1, win, gx)
            by0, by1 = _grow(by0, by1, win, gy)
            fp = fit_affine_flow(flow, (bx0, by0, bx1, by1))
            origin = (bx0, by0)
        params = np.array([fp.as_tuple()])
        rho = motivation_ratio(params, cfg)
        return MotivationResult(float(rho.sum()), rho, region, np.array([origin]), params)

    vec = flow.vectors[by0:by1 + 1, bx0:bx1 + 1]
    bs = flow.block_size
    g = (np.arange(win) - (win - 1) / 2.0) * bs
    gx, gy = np.meshgrid(g, g)
    X = _design(np.column_stack([gx.ravel(), gy.ravel()]))
    pinv = np.linalg.pinv(X)  # (3, win*win), same for every window on a regular grid
    views = sliding_window_view(vec, (win, win), axis=(0, 1))[::cfg.stride, ::cfg.stride]
    # views: (wy, wx, 2, win, win)
    wy, wx = views.shape[:2]
    flat = views.reshape(wy, wx, 2, win * win)
    coef = np.einsum("kn,yxcn->yxck", pinv, flat)  # (wy, wx, 2, 3)
    params = _chi_to_params(coef[..., 0, :], coef[..., 1, :]).reshape(-1, 6)
    rho = motivation_ratio(params, cfg)
    oy, ox = np.meshgrid(np.arange(wy) * cfg.stride + by0, np.arange(wx) * cfg.stride + bx0, indexing="ij")
    windows = np.column_stack([ox.ravel(), oy.ravel()])
    log_o = float(np.sum(rho))
    return MotivationResult(log_o, rho, region, windows, params)


def write_motivation_csv(path, results: list[tuple[int, MotivationResult]]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame", "window_x", "window_y", "u1", "u2", "d1", "d2", "h1", "h2", "rho"])
        for frame, res in results:
            for (wx, wy), p, r in zip(res.windows, res.params, res.ratios):
                wr.writerow([frame, int(wx), int(wy), *(f"{v:.9g}" for v in p), f"{r:.9g}"])
