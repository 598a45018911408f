"""Agreement between predicted labels and self-reports, plus correlation helpers."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .affect import LabelSeries
from .curve import SamScalePair, to_sam_scale
from .errors import FormatError, InsufficientDataError


@dataclass(frozen=True)
class RatingRecord:
    situation_id: str
    valence: float  # SAM -3..3
    arousal: float  # SAM 0..6

    def __post_init__(self):
        if not -3 <= self.valence <= 3 or not 0 <= self.arousal <= 6:
            raise ValueError(f"rating for {self.situation_id} out of range")

    def as_sam(self) -> SamScalePair:
        """Both dimensions on 0..6 (valence shifted by +3)."""
        return SamScalePair(self.valence + 3.0, self.arousal)


def load_ratings(path) -> list[RatingRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"situation_id", "valence", "arousal"}
        if reader.fieldnames is None or not need <= {f.strip() for f in reader.fieldnames}:
            raise FormatError(f"{path}: expected header situation_id,valence,arousal")
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): v for k, v in row.items()}
            try:
                out.append(RatingRecord(row["situation_id"].strip(), float(row["valence"]),
                                        float(row["arousal"])))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
    return out


def situation_label_summary(labels: LabelSeries) -> SamScalePair:
    """Temporal mean of the labels, on the 0-6 scale."""
    if len(labels) == 0:
        raise InsufficientDataError("empty label series")
    return to_sam_scale(float(np.mean(labels.V)), float(np.mean(labels.A)))


def rmse(pred, truth) -> dict[str, float]:
    """Per-dimension RMSE on the 0-6 scale.

    ``pred`` and ``truth`` are sequences of :class:`SamScalePair` or (v6, a6)
    rows. Normalized percentages are reported against both a 6-point and a
    7-point range.
    """
    p = _pairs(pred)
    t = _pairs(truth)
    if len(p) != len(t):
        raise ValueError(f"length mismatch: {len(p)} predictions, {len(t)} ratings")
    if len(p) == 0:
        raise InsufficientDataError("nothing to compare")
    err = np.sqrt(np.mean((p - t) ** 2, axis=0))
    out = {"valence": float(err[0]), "arousal": float(err[1])}
    for dim in ("valence", "arousal"):
        out[f"{dim}_pct_range6"] = 100.0 * (1.0 - out[dim] / 6.0)
        out[f"{dim}_pct_range7"] = 100.0 * (1.0 - out[dim] / 7.0)
    return out


def _pairs(rows) -> np.ndarray:
    rows = list(rows)
    if rows and isinstance(rows[0], SamScalePair):
        return np.array([[r.v6, r.a6] for r in rows], dtype=np.float64)
    return np.asarray(rows, dtype=np.float64).reshape(-1, 2)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("series lengths differ")
    if len(x) < 3:
        raise InsufficientDataError("correlation needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    # one square root keeps hand-checkable cases exact
    return float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def spearman(x, y) -> float:
    """Pearson correlation of mid-ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("series lengths differ")
    return pearson(rankdata(x), rankdata(y))
