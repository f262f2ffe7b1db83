"""Command-line entry point: `bisp <verb> --config <file> [--set k=v ...]`.

Verbs: synth (render a dataset), train, eval (scores + ROC + curve images),
ablate (variant grid), viz (figures from saved dumps). Exit codes: 0 success,
1 usage/configuration error, 2 data error, 3 runtime failure. Progress goes
to standard error; results and tables to standard output and the output dir.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .config import ExperimentConfig, load_config
from .data import load_dataset, make_test_windows
from .errors import BispError, ConfigurationError, DataError
from .model import load_checkpoint
from .scoring import compute_auc, read_score_dump, write_roc_table, write_score_dump
from .synth import describe, generate
from .train import (
    collect_error_pairs,
    format_grid,
    format_sweep,
    run_ablation_grid,
    run_weight_sweep,
    score_from_errors,
    train,
)
from .viz import plot_error_triptych, plot_roc_curves, plot_score_curves, render_window

VERBS = ("synth", "train", "eval", "ablate", "viz")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; we reserve 2 for data errors."""

    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="bisp", description=__doc__.splitlines()[0])
    parser.add_argument("verb", choices=VERBS, help="command to run")
    parser.add_argument("--config", "-c", required=True, help="YAML experiment config")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="SECTION.KEY=VALUE", help="override a config value (repeatable)",
    )
    return parser


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def cmd_synth(cfg: ExperimentConfig) -> int:
    root = cfg.data_root()
    spec = cfg.synth_spec()
    _progress(f"rendering synthetic dataset into {root}")
    result = generate(spec, root)
    for seg in result.segments:
        _progress(f"  {seg.video_id}: {seg.mode} frames [{seg.start}, {seg.end})")
    print(describe(root))
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    out_dir = cfg.output_dir() / "train"
    result = train(cfg.train_config(), out_dir=out_dir, progress=_progress)
    final = result.history[-1]["total"] if result.history else float("nan")
    print(f"steps\t{result.steps}")
    print(f"final_loss\t{final:.6f}")
    print(f"checkpoint\t{result.checkpoint_path}")
    return 0


def cmd_eval(cfg: ExperimentConfig) -> int:
    checkpoint = cfg.eval_checkpoint()
    model, step, _ = load_checkpoint(checkpoint)
    _progress(f"loaded {checkpoint} (step {step}, variant {model.variant.name})")
    clips = load_dataset(cfg.data_root(), "test", cfg.image_size)
    scoring = cfg.scoring()
    batch_size = int(cfg.get("eval", "batch_size"))

    errors = collect_error_pairs(model, clips, batch_size, progress=_progress)
    series = score_from_errors(errors, scoring)

    out_dir = cfg.output_dir() / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    dump = write_score_dump(out_dir / "scores.tsv", series)
    _progress(f"score dump: {dump}")
    plot_score_curves(series, out_dir)

    if all(s.labels is not None for s in series):
        roc = compute_auc(series)
        plot_roc_curves([(model.variant.name, roc)], out_dir / "roc.png")
        write_roc_table(out_dir / "roc.tsv", roc)  # canonical two-column table
        print(f"auc\t{roc.auc:.6f}")
    else:
        warnings.warn("some test videos lack labels; AUC and ROC skipped")

    if bool(cfg.get("eval", "weight_sweep")):
        points = run_weight_sweep(errors, scoring)
        table = format_sweep(points)
        (out_dir / "weight_sweep.tsv").write_text(table)
        print(table, end="")
    return 0


def cmd_ablate(cfg: ExperimentConfig) -> int:
    out_dir = cfg.output_dir() / "ablation"
    rows = run_ablation_grid(cfg.train_config(), out_dir=out_dir, progress=_progress)
    table = format_grid(rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.tsv").write_text(table)
    print(table, end="")
    if rows and all(r.error is not None for r in rows):
        raise BispError("every grid cell failed; see the error column")
    return 0


def _default_dumps(cfg: ExperimentConfig) -> list[Path]:
    dumps = [Path(p) for p in cfg.get("viz", "dumps")]
    return dumps or [cfg.output_dir() / "eval" / "scores.tsv"]


def _peak_scored_frame(dump: Path) -> tuple[str, int]:
    series = read_score_dump(dump)
    best = None
    for s in series:
        i = int(s.scores.argmax())
        if best is None or s.scores[i] > best[2]:
            best = (s.video_id, int(s.frame_indices[i]), float(s.scores[i]))
    return best[0], best[1]


def cmd_viz(cfg: ExperimentConfig) -> int:
    mode = cfg.get("viz", "mode")
    out_dir = cfg.output_dir() / "viz"

    if mode == "scores":
        written = []
        for dump in _default_dumps(cfg):
            written += plot_score_curves(read_score_dump(dump), out_dir)
        for path in written:
            print(path)
        return 0

    if mode == "roc":
        curves = []
        for dump in _default_dumps(cfg):
            series = read_score_dump(dump)
            if any(s.labels is None for s in series):
                warnings.warn(f"{dump} has unlabeled videos; excluded from ROC")
                continue
            curves.append((dump.parent.name or dump.stem, compute_auc(series)))
        img, table = plot_roc_curves(curves, out_dir / "roc.png")
        print(img)
        print(table)
        return 0

    if mode == "errors":
        video_id = cfg.get("viz", "video")
        frame = cfg.get("viz", "frame")
        if video_id is None or frame is None:
            video_id, frame = _peak_scored_frame(_default_dumps(cfg)[0])
            _progress(f"picked peak-scored frame: {video_id}#{frame}")
        clips = [c for c in load_dataset(cfg.data_root(), "test", cfg.image_size)
                 if c.video_id == str(video_id)]
        if not clips:
            raise DataError(f"video '{video_id}' not found in test split")
        clip = clips[0]
        windows = make_test_windows(clip)
        if not windows:
            raise DataError(f"video '{video_id}' is too short for a test window")
        start = min(max(int(frame) - 3, 0), len(windows) - 1)
        window = windows[start]
        model, _, _ = load_checkpoint(cfg.eval_checkpoint())
        truth, pred, err = render_window(model, window, cfg.scoring())
        img, table = plot_error_triptych(
            truth, pred, err,
            out_dir / f"error_{clip.video_id}_{window.target_frame_index:06d}.png",
        )
        print(img)
        print(table)
        return 0

    raise ConfigurationError(f"unknown viz.mode '{mode}'; expected scores, roc, or errors")


_HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "viz": cmd_viz,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config, tuple(args.overrides))
        return _HANDLERS[args.verb](cfg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except BispError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps everything to exit codes
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
