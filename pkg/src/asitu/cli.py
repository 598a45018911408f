"""Command line entry point: ``asitu {compute,eeg-features,evaluate,synth}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import AsituError
from .pipeline import evaluate_outputs, run_eeg_only, run_pipeline
from .synth import SynthConfig, synthesize

log = logging.getLogger("asitu")


def _load(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise AsituError("--workers must be >= 1")
        cfg.workers = args.workers
    return cfg


def cmd_compute(args) -> int:
    cfg = _load(args)
    return run_pipeline(cfg, args.out, cfg.workers)


def cmd_eeg(args) -> int:
    return run_eeg_only(_load(args), args.out)


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    report = evaluate_outputs(cfg, args.out)
    path = Path(args.out) / "eval_report.json"
    path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(json.dumps(report.get("rmse", {}), sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_situations=args.situations, n_frames=args.frames, width=args.width,
                      height=args.height, seed=args.seed)
    out = synthesize(args.out, cfg)
    print(out / "config.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asitu", description="Affective labels for recorded situations.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", required=True, help="output directory")
        if workers:
            sp.add_argument("--workers", type=int, default=None, help="worker processes (default: config)")
        sp.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the pipeline is deterministic")

    common(sub.add_parser("compute", help="components, labels, curves, states and EEG features"))
    common(sub.add_parser("eeg-features", help="EEG gating and spectral features only"), workers=False)
    common(sub.add_parser("evaluate", help="compare computed labels with ratings"), workers=False)

    sp = sub.add_parser("synth", help="write a synthetic data set and config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--situations", type=int, default=3)
    sp.add_argument("--frames", type=int, default=1000)
    sp.add_argument("--width", type=int, default=320)
    sp.add_argument("--height", type=int, default=240)
    return p


COMMANDS = {"compute": cmd_compute, "eeg-features": cmd_eeg, "evaluate": cmd_evaluate, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (AsituError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
