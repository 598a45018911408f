"""Run configuration: one JSON file, every tunable with a default.

Example::

    {
      "data_root": "data",
      "ratings": "ratings.csv",
      "affect": {"lambda1": 0.5},
      "eeg": {"highpass_hz": 2.0}
    }

Relative paths resolve against the directory holding the config file.
Situations are either listed explicitly under ``"situations"`` or
discovered as sub-directories of ``"data_root"`` (each with ``frames/``,
``accel.csv`` and ``eeg.csv``, optionally ``saliency/``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import FormatError


@dataclass
class IngestSection:
    frame_pattern: str = "frame_*.pgm"
    nominal_fps: float = 30.0


@dataclass
class FlowSection:
    block_size: int = 16
    search_radius: int = 7
    levels: int = 3
    refine_radius: int = 2
    gate_sigma_s: float = 0.5
    v_max_mag: float | None = None  # None: search_radius * 2**(levels-1)


@dataclass
class SaliencySection:
    threshold: float = 0.5
    center_sigma_frac: float = 0.25


@dataclass
class MotivationSection:
    window: int = 3
    stride: int = 1
    eps: float = 1e-6
    kappa: float = 10.0
    signed_denominator: bool = False


@dataclass
class AffectSection:
    lambda1: float = 0.5
    lambda2: float = 2.0
    lambda3: float = -1.0
    alpha1: float = 0.75
    nu1: float = 0.5
    smoothing_s: float = 5.0
    maxima_eps: float = 1e-9
    batch_key: str | None = None  # situation field that splits normalization batches


@dataclass
class CurveSection:
    noise_variance: float = 1e-2
    length_scale: float | None = None
    signal_variance: float | None = None
    optimize: bool = False
    grid_points: int = 201
    max_points: int = 1000  # longer label series are subsampled evenly in time
    arousal_thresholds: tuple[float, float] = (2.0, 4.0)
    valence_thresholds: tuple[float, float] = (2.0, 4.0)


@dataclass
class EegSection:
    highpass_hz: float = 2.0
    filter_order: int = 4
    per_channel_gating: bool = False
    bicoherence_norm: str = "bounded"
    theta_grid: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 20))
    min_group: int = 3


@dataclass
class OutputSection:
    plots: bool = True
    flow_debug: bool = False
    motivation_debug: bool = False


@dataclass
class SituationSpec:
    id: str
    frames_dir: str
    accel_csv: str
    eeg_csv: str
    saliency_dir: str | None = None
    group: str | None = None


@dataclass
class PipelineConfig:
    situations: list[SituationSpec] = field(default_factory=list)
    data_root: str | None = None
    ratings: str | None = None
    workers: int = 1
    ingest: IngestSection = field(default_factory=IngestSection)
    flow: FlowSection = field(default_factory=FlowSection)
    saliency: SaliencySection = field(default_factory=SaliencySection)
    motivation: MotivationSection = field(default_factory=MotivationSection)
    affect: AffectSection = field(default_factory=AffectSection)
    curve: CurveSection = field(default_factory=CurveSection)
    eeg: EegSection = field(default_factory=EegSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: str = "."

    def resolve(self, p: str | None) -> Path | None:
        if p is None:
            return None
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


_SECTIONS = {
    "ingest": IngestSection, "flow": FlowSection, "saliency": SaliencySection,
    "motivation": MotivationSection, "affect": AffectSection, "curve": CurveSection,
    "eeg": EegSection, "output": OutputSection,
}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise FormatError(f"config section {where!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise FormatError(f"unknown key(s) in {where!r}: {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    return cls(**kw)


def config_from_dict(data: dict, base_dir: str | Path = ".") -> PipelineConfig:
    top = {f.name for f in fields(PipelineConfig)} - {"base_dir"}
    unknown = sorted(set(data) - top)
    if unknown:
        raise FormatError(f"unknown top-level config key(s): {', '.join(unknown)}")
    kw = {"base_dir": str(base_dir)}
    for name, cls in _SECTIONS.items():
        if name in data:
            kw[name] = _build(cls, data[name], name)
    for k in ("data_root", "ratings", "workers"):
        if k in data:
            kw[k] = data[k]
    kw["situations"] = [_build(SituationSpec, s, "situations") for s in data.get("situations", [])]
    return PipelineConfig(**kw)


def load_config(path) -> PipelineConfig:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: invalid JSON ({exc})") from None
    return config_from_dict(data, p.parent)


def discover_situations(cfg: PipelineConfig) -> list[SituationSpec]:
    """Explicit situations first, then sub-directories of ``data_root`` in name order."""
    specs = list(cfg.situations)
    if cfg.data_root is not None:
        root = cfg.resolve(cfg.data_root)
        if not root.is_dir():
            raise FileNotFoundError(f"data_root not found: {root}")
        for d in sorted(p for p in root.iterdir() if p.is_dir()):
            sal = d / "saliency"
            specs.append(SituationSpec(
                id=d.name, frames_dir=str(d / "frames"), accel_csv=str(d / "accel.csv"),
                eeg_csv=str(d / "eeg.csv"), saliency_dir=str(sal) if sal.is_dir() else None))
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise FormatError("situation ids must be unique")
    return specs
