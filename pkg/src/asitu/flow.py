"""Block-matching optical flow, motion activity and the accelerometer gate."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.ndimage import gaussian_filter1d

from .errors import DimensionError

REFINE_RADIUS = 2
MIN_SUPPORT = 8


@dataclass(frozen=True)
class FlowConfig:
    block_size: int = 16
    search_radius: int = 7
    levels: int = 3
    refine_radius: int = REFINE_RADIUS

    def __post_init__(self):
        if self.block_size < 4:
            raise ValueError("block_size must be >= 4")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.search_radius < 1 or self.refine_radius < 1:
            raise ValueError("search radii must be >= 1")

    @property
    def max_displacement(self) -> int:
        return self.search_radius * 2 ** (self.levels - 1)


@dataclass(frozen=True)
class FlowField:
    vectors: np.ndarray  # (By, Bx, 2) as (vx, vy), px/frame
    block_size: int

    @property
    def grid_dims(self) -> tuple[int, int]:
        """(Bx, By)."""
        return self.vectors.shape[1], self.vectors.shape[0]

    @property
    def centers(self) -> np.ndarray:
        """Block centers in pixels, shape (By, Bx, 2) as (x, y)."""
        by, bx = self.vectors.shape[:2]
        half = (self.block_size - 1) / 2.0
        xs = np.arange(bx) * self.block_size + half
        ys = np.arange(by) * self.block_size + half
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.hypot(self.vectors[..., 0], self.vectors[..., 1])

    def __len__(self):
        return self.vectors.shape[0] * self.vectors.shape[1]


def _sum_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    # 2x2 sums keep every level integer so SAD costs compare exactly
    pyr = [img.astype(np.int64)]
    for _ in range(1, levels):
        p = pyr[-1]
        h, w = (p.shape[0] // 2) * 2, (p.shape[1] // 2) * 2
        p = p[:h, :w]
        pyr.append(p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2])
    return pyr


@njit(cache=True)
def _match_level(ia, ib, oy, ox, bsk, prior, scale, rad, zero_rad, bound, out):
    hk, wk = ia.shape
    nby, nbx = prior.shape[0], prior.shape[1]
    big = np.iinfo(np.int64).max
    for j in range(nby):
        for i in range(nbx):
            b_cost, b_mag, b_vx, b_vy = big, big, big, big
            for src in range(2):
                if src == 0:
                    cx0, cy0, r = prior[j, i, 0], prior[j, i, 1], rad
                else:
                    if zero_rad <= 0:
                        continue
                    cx0, cy0, r = 0, 0, zero_rad
                for dy in range(-r, r + 1):
                    for dx in range(-r, r + 1):
                        vx = cx0 + dx
                        vy = cy0 + dy
                        fx = vx * scale
                        fy = vy * scale
                        if abs(fx) > bound or abs(fy) > bound:
                            continue
                        cost = 0
                        for yy in range(bsk):
                            ya = min(max(oy[j] + yy, 0), hk - 1)
                            yb = min(max(oy[j] + yy + vy, 0), hk - 1)
                            for xx in range(bsk):
                                xa = min(max(ox[i] + xx, 0), wk - 1)
                                xb = min(max(ox[i] + xx + vx, 0), wk - 1)
                                cost += abs(ia[ya, xa] - ib[yb, xb])
                            if cost > b_cost:
                                break
                        if cost > b_cost:
                            continue
                        mag = fx * fx + fy * fy
                        if (cost < b_cost or mag < b_mag or (mag == b_mag and fx < b_vx)
                                or (mag == b_mag and fx == b_vx and fy < b_vy)):
                            b_cost, b_mag, b_vx, b_vy = cost, mag, fx, fy
            out[j, i, 0] = b_vx
            out[j, i, 1] = b_vy


def estimate_flow(frame_a: np.ndarray, frame_b: np.ndarray, cfg: FlowConfig = FlowConfig()) -> FlowField:
    """Dense block flow from ``frame_a`` to ``frame_b``.

    Coarse-to-fine: the coarsest level searches ``search_radius`` around zero,
    every finer level doubles the estimate and refines it within
    ``refine_radius`` (around both the propagated estimate and zero).
    Ties in SAD go to the smaller displacement, then to the
    lexicographically smaller (vx, vy).
    """
    a = np.asarray(frame_a)
    b = np.asarray(frame_b)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError(f"frame shapes differ: {a.shape} vs {b.shape}")
    bs = cfg.block_size
    h, w = a.shape
    if h < bs or w < bs:
        raise DimensionError(f"frame {w}x{h} smaller than one {bs}px block")
    nby, nbx = h // bs, w // bs
    pa = _sum_pyramid(a, cfg.levels)
    pb = _sum_pyramid(b, cfg.levels)

    disp = np.zeros((nby, nbx, 2), dtype=np.int64)  # full-resolution px
    for k in range(cfg.levels - 1, -1, -1):
        scale = 2 ** k
        # coarse levels keep a support of at least MIN_SUPPORT px around the block center
        bsk = max(bs // scale, min(bs, MIN_SUPPORT))
        oy = (np.arange(nby) * bs + bs // 2) // scale - bsk // 2
        ox = (np.arange(nbx) * bs + bs // 2) // scale - bsk // 2
        coarsest = k == cfg.levels - 1
        rad = cfg.search_radius if coarsest else cfg.refine_radius
        zero_rad = 0 if coarsest else cfg.refine_radius
        out = np.empty_like(disp)
        _match_level(pa[k], pb[k], oy, ox, bsk, disp // scale, scale, rad, zero_rad,
                     cfg.max_displacement, out)
        disp = out

    return FlowField(disp.astype(np.float64), bs)


def motion_activity(flow: FlowField, v_max_mag: float) -> float:
    """Mean vector magnitude over the grid, normalized by ``v_max_mag``."""
    if v_max_mag <= 0:
        raise ValueError("v_max_mag must be positive")
    n = len(flow)
    if n == 0:
        return 0.0
    value = float(flow.magnitudes.sum() / (n * v_max_mag))
    return min(value, 1.0)


def artifact_gate(accel_at_frames, sigma_s: float = 0.5) -> np.ndarray:
    """Per-frame device-motion gate in [0, 1] from accelerometer magnitudes.

    Deviation from the median magnitude, Gaussian smoothed (truncated at
    3 sigma), then min-max normalized over the situation.
    """
    t = np.asarray(accel_at_frames.timestamps, dtype=np.float64)
    mag = np.linalg.norm(np.asarray(accel_at_frames.samples, dtype=np.float64), axis=1)
    if len(mag) < 2:
        raise ValueError("artifact gate needs at least 2 samples")
    dev = np.abs(mag - np.median(mag))
    dt = np.median(np.diff(t))
    if sigma_s > 0 and dt > 0:
        dev = gaussian_filter1d(dev, sigma_s / dt, truncate=3.0)
    lo, hi = dev.min(), dev.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.zeros_like(dev)
    return (dev - lo) / (hi - lo)


def motion_component(m_bar, g):
    """Gate motion activity: ``(1 - g) * m_bar``. Works on scalars and arrays."""
    m_arr = np.asarray(m_bar, dtype=np.float64)
    g_arr = np.asarray(g, dtype=np.float64)
    tol = 1e-12
    if np.any((m_arr < -tol) | (m_arr > 1 + tol)):
        raise ValueError("m_bar must lie in [0, 1]")
    if np.any((g_arr < -tol) | (g_arr > 1 + tol)):
        raise ValueError("gate value must lie in [0, 1]")
    out = (1.0 - g_arr) * m_arr
    return float(out) if out.ndim == 0 else out


def write_flow_csv(path, flow: FlowField) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bx", "by", "vx", "vy"])
        by, bx = flow.vectors.shape[:2]
        for j in range(by):
            for i in range(bx):
                vx, vy = flow.vectors[j, i]
                wr.writerow([i, j, f"{vx:g}", f"{vy:g}"])


def read_flow_csv(path, block_size: int) -> FlowField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    bx = int(rows[:, 0].max()) + 1
    by = int(rows[:, 1].max()) + 1
    vec = np.zeros((by, bx, 2))
    vec[rows[:, 1].astype(int), rows[:, 0].astype(int)] = rows[:, 2:4]
    return FlowField(vec, block_size)
