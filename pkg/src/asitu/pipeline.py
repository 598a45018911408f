"""End-to-end orchestration: situations in, label/curve/EEG artifacts out.

Phase 1 runs per situation (optionally in worker processes): ingest, flow,
saliency, motivation, component series and EEG features. Phase 2 is the
batch barrier that fixes the normalization maxima and produces arousal and
valence. Phase 3 writes every artifact; phase 4 evaluates against ratings.
"""
from __future__ import annotations

import csv
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import affect, curve, eeg, flow, ingest, metrics, motivation, plots, saliency
from .config import PipelineConfig, SituationSpec, discover_situations
from .errors import AsituError, OverlapError

log = logging.getLogger(__name__)


class StageError(AsituError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure is reported with its stage
        log.debug("stage %s failed:\n%s", name, traceback.format_exc())
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


@dataclass
class SituationOutcome:
    id: str
    group: str | None = None
    components: affect.ComponentSeries | None = None
    gate: np.ndarray | None = None
    segments: list | None = None
    features: eeg.EegFeatureSet | None = None
    component_corr: list = field(default_factory=list)  # (channel, band, component, r)
    motivation_rows: list = field(default_factory=list)
    flows: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # (stage, message)


# --------------------------------------------------------------------------
# phase 1

def load_situation(spec: SituationSpec, cfg: PipelineConfig) -> ingest.Situation:
    frames = ingest.load_frames(cfg.resolve(spec.frames_dir), cfg.ingest.frame_pattern, cfg.ingest.nominal_fps)
    acc = ingest.load_csv_series(cfg.resolve(spec.accel_csv), "accel")
    rec = ingest.load_csv_series(cfg.resolve(spec.eeg_csv), "eeg")
    return ingest.assemble_situation(frames, acc, rec, spec.id)


def flow_config(cfg: PipelineConfig) -> flow.FlowConfig:
    f = cfg.flow
    return flow.FlowConfig(f.block_size, f.search_radius, f.levels, f.refine_radius)


def component_series(sit: ingest.Situation, cfg: PipelineConfig, saliency_dir=None,
                     outcome: SituationOutcome | None = None) -> tuple[affect.ComponentSeries, np.ndarray]:
    """Per-frame motion, log-motivation and contentment, plus the accelerometer gate.

    Flow between frames k-1 and k is attributed to frame k; the first frame
    repeats the values of the second.
    """
    fcfg = flow_config(cfg)
    v_max = cfg.flow.v_max_mag or fcfg.max_displacement
    mcfg = motivation.MotivationConfig(**vars(cfg.motivation))
    frames = sit.frames.frames
    n = len(frames)
    dims = sit.frames.dims
    m_bar = np.zeros(n)
    log_o = np.zeros(n)
    prior_region = None
    keep_debug = outcome is not None and (cfg.output.flow_debug or cfg.output.motivation_debug)
    for k in range(1, n):
        with stage("flow"):
            fl = flow.estimate_flow(frames[k - 1], frames[k], fcfg)
            m_bar[k] = flow.motion_activity(fl, v_max)
        with stage("saliency"):
            smap, used_prior = saliency.saliency_for_frame(saliency_dir, k - 1, dims,
                                                           cfg.saliency.center_sigma_frac)
            if used_prior and prior_region is not None:
                region = prior_region
            else:
                region = saliency.attentive_region(saliency.binarize(smap, cfg.saliency.threshold))
                if used_prior:
                    prior_region = region
        with stage("motivation"):
            res = motivation.motivation_component(fl, region, mcfg)
            log_o[k] = res.log_o
        if keep_debug:
            if cfg.output.flow_debug:
                outcome.flows.append((k, fl))
            if cfg.output.motivation_debug:
                outcome.motivation_rows.append((k, res))
    m_bar[0], log_o[0] = m_bar[1], log_o[1]

    with stage("flow"):
        gate = flow.artifact_gate(sit.accel_at_frames, cfg.flow.gate_sigma_s)
        m = flow.motion_component(np.clip(m_bar, 0.0, 1.0), gate)
    with stage("affect"):
        params = affect_params(cfg)
        t = sit.frames.timestamps
        l_series = affect.contentment_component(t - t[0], params)
    return affect.ComponentSeries(t.copy(), m, log_o, l_series), gate


def affect_params(cfg: PipelineConfig) -> affect.AffectParams:
    a = cfg.affect
    return affect.AffectParams(a.lambda1, a.lambda2, a.lambda3, a.alpha1, a.nu1, a.smoothing_s)


def eeg_stage(rec: ingest.EegRecording, gate_t, gate_values, cfg: PipelineConfig):
    e = cfg.eeg
    hp = eeg.highpass(rec, e.highpass_hz, e.filter_order)
    segs = eeg.segment(hp, gate_t, gate_values)
    eeg.gate_threshold(segs, e.theta_grid, e.per_channel_gating, e.min_group)
    clean = [s for s in segs if s.clean]
    feats = eeg.eeg_features(clean, bic_norm=e.bicoherence_norm)
    feats.n_segments = len(segs)
    return segs, feats


def component_band_correlations(comp: affect.ComponentSeries, clean: list) -> list:
    """Pearson r between per-segment component means and per-segment band power."""
    rows = []
    if len(clean) < 3:
        return rows
    means = {}
    for name in ("m", "log_o", "l"):
        series = getattr(comp, name)
        vals = []
        for s in clean:
            sel = (comp.t >= s.start) & (comp.t < s.start + 1.0)
            vals.append(float(np.mean(series[sel])) if sel.any() else np.nan)
        means[name] = np.array(vals)
    for ci, ch in enumerate(eeg.CHANNELS):
        powers = eeg.segment_band_powers(clean, ci)
        for band, pw in powers.items():
            for name, mv in means.items():
                ok = np.isfinite(mv)
                try:
                    r = metrics.pearson(mv[ok], pw[ok])
                except (ValueError, AsituError):
                    continue
                rows.append((ch, band, name, r))
    return rows


def process_situation(spec: SituationSpec, cfg: PipelineConfig) -> SituationOutcome:
    out = SituationOutcome(spec.id, spec.group)
    try:
        with stage("ingest"):
            sit = load_situation(spec, cfg)
        comp, gate = component_series(sit, cfg, cfg.resolve(spec.saliency_dir), out)
        out.components, out.gate = comp, gate
    except StageError as exc:
        out.errors.append((exc.stage, exc.message))
        return out
    try:
        with stage("eeg"):
            out.segments, out.features = eeg_stage(sit.eeg, sit.frames.timestamps, gate, cfg)
            out.component_corr = component_band_correlations(comp, [s for s in out.segments if s.clean])
    except StageError as exc:
        out.errors.append((exc.stage, exc.message))
    return out


# --------------------------------------------------------------------------
# writers

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_labels_csv(path, labels: affect.LabelSeries, thresholds: curve.StateThresholds) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "V", "A", "v6", "a6", "state"])
        for t, v, a in zip(labels.t, labels.V, labels.A):
            p = curve.to_sam_scale(float(v), float(a))
            wr.writerow([_fmt(t), _fmt(v), _fmt(a), _fmt(p.v6), _fmt(p.a6), curve.bin_state(p, thresholds).value])


def fit_labels_curve(labels: affect.LabelSeries, cfg: PipelineConfig):
    c = cfg.curve
    n = len(labels)
    idx = np.unique(np.linspace(0, n - 1, min(n, c.max_points)).round().astype(int))
    pts = np.column_stack([labels.V[idx], labels.A[idx]])
    fitted = curve.fit_affective_curve(pts, curve.CurveConfig(c.noise_variance, c.length_scale,
                                                              c.signal_variance, c.optimize))
    grid = np.linspace(-1.0, 1.0, c.grid_points)
    return fitted, curve.sample_curve(fitted, grid)


def write_situation(out_dir: Path, outcome: SituationOutcome, labels: affect.LabelSeries | None,
                    cfg: PipelineConfig) -> None:
    d = out_dir / outcome.id
    d.mkdir(parents=True, exist_ok=True)
    thresholds = curve.StateThresholds(tuple(cfg.curve.arousal_thresholds), tuple(cfg.curve.valence_thresholds))
    if labels is not None:
        affect.write_components_csv(d / "components.csv", outcome.components, labels)
        write_labels_csv(d / "labels.csv", labels, thresholds)
        try:
            with stage("curve"):
                fitted, samples = fit_labels_curve(labels, cfg)
                curve.write_curve_csv(d / "curve.csv", samples)
                summary = curve.state_summary(outcome.id, labels.t, labels.V, labels.A, thresholds)
                summary["curve_degenerate"] = bool(fitted.degenerate)
                curve.write_state_json(d / "states.json", summary)
            if cfg.output.plots:
                s = np.array(samples)
                (d / "va.svg").write_text(plots.va_plot(labels.V, labels.A, s[:, 0], s[:, 1], s[:, 2],
                                                        title=f"{outcome.id}: affective curve"))
                c = outcome.components
                (d / "components.svg").write_text(plots.traces_plot(
                    c.t, {"m": c.m, "l": c.l, "A": labels.A, "V": labels.V}, title=f"{outcome.id}: components"))
        except StageError as exc:
            outcome.errors.append((exc.stage, exc.message))
    if outcome.segments is not None:
        eeg.write_gate_csv(d / "eeg_gate.csv", outcome.segments)
    if outcome.features is not None:
        eeg.write_psd_csv(d / "eeg_psd.csv", outcome.id, outcome.features)
        eeg.write_bicoherence_csv(d / "eeg_bicoherence.csv", outcome.id, outcome.features)
    if outcome.features is not None or outcome.component_corr:
        with open(d / "component_band_corr.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["channel", "band", "component", "pearson"])
            for ch, band, name, r in outcome.component_corr:
                wr.writerow([ch, band, name, _fmt(r)])
    if cfg.output.flow_debug and outcome.flows:
        fd = d / "flow"
        fd.mkdir(exist_ok=True)
        for k, fl in outcome.flows:
            flow.write_flow_csv(fd / f"flow_{k:05d}.csv", fl)
    if cfg.output.motivation_debug and outcome.motivation_rows:
        motivation.write_motivation_csv(d / "motivation.csv", outcome.motivation_rows)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# driver

def _run_phase1(specs, cfg, workers):
    if workers <= 1 or len(specs) <= 1:
        return [process_situation(s, cfg) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(process_situation, specs, [cfg] * len(specs)))


def run_pipeline(cfg: PipelineConfig, out_dir, workers: int | None = None) -> int:
    """Run everything; returns the process exit status (0 when no situation failed)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = cfg.workers if workers is None else workers
    try:
        with stage("config"):
            specs = discover_situations(cfg)
            if not specs:
                raise AsituError("no situations configured")
    except StageError as exc:
        _write_json(out_dir / "run_summary.json", {"status": "failed", "errors": [
            {"situation": None, "stage": exc.stage, "message": exc.message}]})
        log.error("%s", exc)
        return 2

    outcomes = _run_phase1(specs, cfg, workers)

    # phase 2: normalization batches
    labels: dict[str, affect.LabelSeries] = {}
    groups: dict[str | None, list[SituationOutcome]] = {}
    for o in outcomes:
        if o.components is not None:
            key = o.group if cfg.affect.batch_key == "group" else None
            groups.setdefault(key, []).append(o)
    params = affect_params(cfg)
    maxima_report = {}
    for key, members in groups.items():
        try:
            with stage("affect"):
                series, mx = affect.label_batch([m.components for m in members], params, cfg.affect.maxima_eps)
        except StageError as exc:
            for m in members:
                m.errors.append((exc.stage, exc.message))
            continue
        maxima_report[str(key)] = {k: _round(v) for k, v in vars(mx).items()}
        for m, s in zip(members, series):
            labels[m.id] = s

    for o in outcomes:
        write_situation(out_dir, o, labels.get(o.id), cfg)

    report_errors = []
    if cfg.ratings is not None:
        try:
            with stage("evaluate"):
                report = evaluate_outputs(cfg, out_dir, [s.id for s in specs])
                _write_json(out_dir / "eval_report.json", report)
        except StageError as exc:
            report_errors.append({"situation": None, "stage": exc.stage, "message": exc.message})

    failed = [o for o in outcomes if o.errors]
    summary = {
        "status": "ok" if not failed and not report_errors else "failed",
        "situations": [{"id": o.id, "status": "failed" if o.errors else "ok",
                        "errors": [{"stage": s, "message": m} for s, m in o.errors],
                        "warnings": list(o.features.warnings) if o.features is not None else []}
                       for o in outcomes],
        "maxima": maxima_report,
        "errors": report_errors,
        "config": cfg.to_dict(),
    }
    _write_json(out_dir / "run_summary.json", summary)
    for o in failed:
        for s, m in o.errors:
            log.error("situation %s failed at stage %s: %s", o.id, s, m)
    return 1 if failed or report_errors else 0


def run_eeg_only(cfg: PipelineConfig, out_dir) -> int:
    """EEG features with the gate taken straight from the accelerometer stream."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    results = []
    for spec in discover_situations(cfg):
        o = SituationOutcome(spec.id, spec.group)
        try:
            with stage("ingest"):
                acc = ingest.load_csv_series(cfg.resolve(spec.accel_csv), "accel")
                rec = ingest.load_csv_series(cfg.resolve(spec.eeg_csv), "eeg")
                t0 = max(acc.timestamps[0], rec.timestamps[0])
                t1 = min(acc.timestamps[-1], rec.timestamps[-1])
                if t1 <= t0:
                    raise OverlapError("accelerometer and EEG do not overlap")
                rec = ingest.align_eeg(rec, t0, t1)
            with stage("flow"):
                gate = flow.artifact_gate(acc, cfg.flow.gate_sigma_s)
            with stage("eeg"):
                o.segments, o.features = eeg_stage(rec, acc.timestamps, gate, cfg)
        except StageError as exc:
            o.errors.append((exc.stage, exc.message))
            log.error("situation %s failed at stage %s: %s", o.id, exc.stage, exc.message)
            status = 1
        write_situation(out_dir, o, None, cfg)
        results.append({"id": o.id, "status": "failed" if o.errors else "ok",
                        "errors": [{"stage": s, "message": m} for s, m in o.errors]})
    _write_json(out_dir / "eeg_summary.json", {"situations": results})
    return status


# --------------------------------------------------------------------------
# evaluation

def _round(x: float) -> float:
    return float(f"{x:.9g}")


def _read_psd(path: Path) -> dict[tuple[str, str], float]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(row["channel"], row["band"])] = float(row["psd_mean"])
    return out


def evaluate_outputs(cfg: PipelineConfig, out_dir, ids: list[str] | None = None) -> dict:
    """Compare per-situation label means with ratings; correlate ratings and components with band power."""
    out_dir = Path(out_dir)
    if cfg.ratings is None:
        raise AsituError("no ratings file configured")
    ratings = {r.situation_id: r for r in metrics.load_ratings(cfg.resolve(cfg.ratings))}
    if ids is None:
        ids = sorted(p.name for p in out_dir.iterdir() if (p / "components.csv").exists())
    rows, pred, truth = [], [], []
    psd_by_id = {}
    for sid in ids:
        comp_path = out_dir / sid / "components.csv"
        if sid not in ratings or not comp_path.exists():
            continue
        _, lab = affect.read_components_csv(comp_path)
        p = metrics.situation_label_summary(lab)
        r = ratings[sid].as_sam()
        pred.append(p)
        truth.append(r)
        rows.append({"situation_id": sid, "pred_v6": _round(p.v6), "pred_a6": _round(p.a6),
                     "rating_v6": _round(r.v6), "rating_a6": _round(r.a6)})
        if (out_dir / sid / "eeg_psd.csv").exists():
            psd_by_id[sid] = _read_psd(out_dir / sid / "eeg_psd.csv")
    report: dict = {"n_rated": len(rows), "per_situation": rows}
    if rows:
        report["rmse"] = {k: _round(v) for k, v in metrics.rmse(pred, truth).items()}

    # ratings vs band power across situations (Spearman)
    rated = [sid for sid in (r["situation_id"] for r in rows) if sid in psd_by_id]
    table = {}
    if len(rated) >= 3:
        keys = sorted(psd_by_id[rated[0]])
        for dim in ("valence", "arousal"):
            y = [getattr(ratings[s], dim) for s in rated]
            for ch, band in keys:
                x = [psd_by_id[s][(ch, band)] for s in rated]
                try:
                    table[f"{dim}/{ch}/{band}"] = _round(metrics.spearman(y, x))
                except (ValueError, AsituError):
                    table[f"{dim}/{ch}/{band}"] = None
        report["rating_band_spearman"] = table
    else:
        report["rating_band_spearman"] = None
        report["rating_band_spearman_note"] = "needs at least 3 rated situations with EEG features"

    # components vs band power within situations (Pearson), averaged
    acc: dict[str, list[float]] = {}
    for sid in ids:
        path = out_dir / sid / "component_band_corr.csv"
        if not path.exists():
            continue
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                acc.setdefault(f"{row['component']}/{row['channel']}/{row['band']}", []).append(float(row["pearson"]))
    report["component_band_pearson_mean"] = {k: _round(float(np.mean(v))) for k, v in sorted(acc.items())}
    return report
