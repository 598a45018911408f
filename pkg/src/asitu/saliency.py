"""Prime fixation area from saliency maps.

Saliency maps are produced elsewhere and handed in as PGM files; when a
frame has none, an isotropic center prior stands in.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionError
from .ingest import read_pgm

DEFAULT_THRESHOLD = 0.5
# 4-connectivity
_STRUCTURE = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class AttentiveRegion:
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    mask: np.ndarray
    fallback: bool = False

    @property
    def width(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def height(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1


def load_saliency(path, dims: tuple[int, int]) -> np.ndarray:
    """Read a PGM saliency map and scale it to [0, 1]. ``dims`` is (W, H)."""
    img = read_pgm(path)
    w, h = dims
    if img.shape != (h, w):
        raise DimensionError(f"{Path(path).name}: saliency map is {img.shape[1]}x{img.shape[0]}, "
                             f"frames are {w}x{h}")
    return img.astype(np.float64) / 255.0


def center_prior(dims: tuple[int, int], sigma_frac: float = 0.25) -> np.ndarray:
    w, h = dims
    if w < 8 or h < 8:
        raise DimensionError("center prior needs frames of at least 8x8")
    sigma = sigma_frac * min(w, h)
    x = np.arange(w) - (w - 1) / 2.0
    y = np.arange(h) - (h - 1) / 2.0
    gx = np.exp(-0.5 * (x / sigma) ** 2)
    gy = np.exp(-0.5 * (y / sigma) ** 2)
    m = np.outer(gy, gx)
    return m / m.max()


def binarize(smap: np.ndarray, t_h: float = DEFAULT_THRESHOLD) -> np.ndarray:
    if not 0.0 < t_h < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {t_h}")
    return (np.asarray(smap) >= t_h).astype(np.uint8)


def attentive_region(mask: np.ndarray) -> AttentiveRegion:
    """Tight bounding box of the largest 4-connected component.

    An empty mask yields the full frame, flagged as a fallback. Equal-sized
    components resolve to the one met first in raster order.
    """
    mask = np.asarray(mask).astype(bool)
    h, w = mask.shape
    labels, n = ndimage.label(mask, structure=_STRUCTURE)
    if n == 0:
        return AttentiveRegion((0, 0, w - 1, h - 1), np.ones_like(mask), fallback=True)
    sizes = np.bincount(labels.ravel())[1:]
    keep = int(np.argmax(sizes)) + 1
    comp = labels == keep
    ys, xs = np.nonzero(comp)
    bbox = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
    return AttentiveRegion(bbox, comp)


def saliency_for_frame(saliency_dir, index: int, dims: tuple[int, int],
                       sigma_frac: float = 0.25) -> tuple[np.ndarray, bool]:
    """Map for one frame: ``saliency_<index>.pgm`` if present, else the center prior.

    Returns the map and whether the prior was used.
    """
    if saliency_dir is not None:
        d = Path(saliency_dir)
        for name in (f"saliency_{index:04d}.pgm", f"saliency_{index}.pgm"):
            p = d / name
            if p.exists():
                return load_saliency(p, dims), False
    return center_prior(dims, sigma_frac), True
