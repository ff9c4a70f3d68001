"""
Command-line entry point: ``fxgrad {datagen,train,render,eval,gradcheck}``.

Every subcommand loads and validates the full run configuration before it
touches the filesystem. Exit codes: 0 success, 1 a check failed or training
diverged, 2 configuration or validation error, 3 I/O or parse error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from .audio.dataset import PairedDataset, assign_splits, generate_teacher_pairs, load_source_dir, write_dataset
from .audio.mfcc import mfcc_distance
from .audio.synth import synth_sources
from .audio.wav import AudioClip, wav_read, wav_write
from .config.run_config import RunConfig, available_presets, dump_run_config, load_run_config
from .config.settings import configure_logging
from .encoder.checkpoint import load_checkpoint
from .encoder.melspec import MelFrontendConfig
from .errors import ConfigError, ContractError, DomainError, TrainingAborted, WavParseError
from .fx.base import FrameConfig
from .fx.factory import EffectConfig, create_effect
from .grad.check import analytic_vjp_check
from .journal import Journal
from .train.progress import ProgressReporter
from .train.render import render
from .train.trainer import Trainer, training_meta

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
GRADCHECK_EFFECTS = ("gain", "soft_clip")
_GRADCHECK_STREAM = 0xC4


# ---- helpers -------------------------------------------------------------------
def _parse_sets(items: Sequence[str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", field="--set")
        out[key.strip()] = yaml.safe_load(value.strip()) if value.strip() else None
    return out


def _load(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> RunConfig:
    overrides: Dict[str, Any] = _parse_sets(args.set)
    overrides.update({"seed": args.seed, "workers": args.workers, "out_dir": args.out})
    overrides.update(extra or {})
    return load_run_config(args.config, preset=args.preset, overrides=overrides)


def _checkpoint_path(run: RunConfig, given: Optional[str]) -> Path:
    path = Path(given) if given else Path(run.out_dir) / "best.fxgw"
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}", field="checkpoint")
    return path


def _model_from_checkpoint(run: RunConfig, path: Path):
    """Weights plus the frame, mel and effect configs the checkpoint was trained with."""
    weights, meta = load_checkpoint(path)
    frame = FrameConfig.model_validate(meta["frame"]) if "frame" in meta else run.frame
    mel = MelFrontendConfig.model_validate(meta["mel"]) if "mel" in meta else run.mel
    effect = EffectConfig.model_validate(meta["effect"]) if "effect" in meta else run.effect
    P = create_effect(effect, frame, track=False).n_params
    if weights.n_outputs != P:
        raise ConfigError(f"checkpoint head has {weights.n_outputs} outputs, effect '{effect.id}' has {P}", field="checkpoint")
    return weights, frame, mel, effect


# ---- subcommands ---------------------------------------------------------------
def cmd_datagen(args: argparse.Namespace) -> int:
    run = _load(args)
    data = run.data
    if data.teacher is None:
        raise ConfigError("datagen needs a teacher effect", field="data.teacher")
    if data.sources is None and not data.source_dir:
        raise ConfigError("datagen needs synthetic sources or a source directory", field="data.sources")
    if data.source_dir:
        sources = load_source_dir(data.source_dir, run.frame.sample_rate, data.normalize_dbfs)
        if data.pairs:
            sources = sources[: data.pairs]
    else:
        sources = synth_sources(data.sources, run.seed, run.frame.sample_rate)
    pairs = generate_teacher_pairs(sources, data.teacher, run.seed, run.frame)
    splits = assign_splits(len(pairs), data.splits, run.seed)
    manifest = write_dataset(pairs, data.dir, data.teacher, splits, run.frame, codec=data.codec)
    counts = {s: splits.count(s) for s in ("train", "val", "test")}
    print(json.dumps({"manifest": str(manifest), "pairs": len(pairs), **counts}))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    extra = {"perturbation.estimator": args.estimator} if args.estimator else {}
    run = _load(args, extra)
    manifest = run.data.manifest_path()
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}", field="data.manifest")
    weights = None
    if args.resume:
        resume = Path(args.resume)
        if not resume.is_file():
            raise ConfigError(f"checkpoint not found: {resume}", field="resume")
        weights, meta = load_checkpoint(resume)
        logger.info("resuming from %s (epoch %s)", resume, meta.get("epoch"))
    dataset = PairedDataset.from_manifest(manifest, sample_rate=run.frame.sample_rate, align_maxlag=run.data.align_maxlag)
    train, val = dataset.split("train"), dataset.split("val")
    if not train:
        raise ConfigError("training split is empty", field="data.manifest")

    out = Path(run.out_dir)
    # raises on an encoder head that does not match the effect, before any output
    trainer = Trainer.from_run_config(run, weights=weights, reporter=ProgressReporter(run_id=run.task))
    dump_run_config(run, out / "run_config.yml")
    try:
        result = trainer.fit(train, val, out_dir=out, meta=training_meta(run))
    except TrainingAborted as exc:
        logger.error("training diverged: %s", exc)
        return EXIT_CHECK_FAILED
    print(json.dumps({
        "out_dir": str(out),
        "epochs": len(result.history),
        "best_epoch": result.best_epoch,
        "best_val": result.best_val,
        "stopped_early": result.stopped_early,
    }))
    return EXIT_OK


def _trajectory_rows(effect, thetas: np.ndarray, frame: FrameConfig) -> List[List[str]]:
    specs = effect.param_specs
    header = ["frame", "seconds"] + [f"{s.name} [{s.unit}]" if s.unit else s.name for s in specs]
    rows = [header]
    for i, theta in enumerate(thetas):
        phys = specs.denormalize(theta)
        seconds = i * frame.frame_size / frame.sample_rate
        rows.append([str(i), f"{seconds:.6f}", *(f"{phys[n]:.6g}" for n in specs.names)])
    return rows


def cmd_render(args: argparse.Namespace) -> int:
    extra = {"smoother.coefficient": args.smooth} if args.smooth is not None else {}
    run = _load(args, extra)
    ckpt = _checkpoint_path(run, args.checkpoint)
    src = Path(args.input)
    if not src.is_file():
        raise ConfigError(f"input not found: {src}", field="input")
    weights, frame, mel, effect = _model_from_checkpoint(run, ckpt)
    clip = wav_read(src)
    result = render(weights, clip.samples, effect, frame, mel, run.smoother, sample_rate=clip.sample_rate)

    out_wav = Path(args.output) if args.output else Path(run.out_dir) / f"{src.stem}_rendered.wav"
    wav_write(out_wav, AudioClip(samples=result.audio, sample_rate=frame.sample_rate, source_id=src.stem))
    out_csv = Path(args.trajectory) if args.trajectory else out_wav.with_suffix(".csv")
    fx = create_effect(effect, frame, track=False)
    with open(out_csv, "w", newline="") as fh:
        csv.writer(fh).writerows(_trajectory_rows(fx, result.thetas, frame))
    print(json.dumps({"audio": str(out_wav), "trajectory": str(out_csv), "frames": int(result.thetas.shape[0])}))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    run = _load(args)
    manifest = run.data.manifest_path()
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}", field="data.manifest")
    ckpt = _checkpoint_path(run, args.checkpoint)
    weights, frame, mel, effect = _model_from_checkpoint(run, ckpt)
    test = PairedDataset.from_manifest(manifest, split="test", sample_rate=frame.sample_rate).pairs
    if not test:
        raise ConfigError("test split is empty", field="data.manifest")

    rows = []
    for pair in test:
        out = render(weights, pair.input, effect, frame, mel, run.smoother).audio
        d_rendered = mfcc_distance(out, pair.target, run.mfcc, frame.sample_rate)
        d_baseline = mfcc_distance(pair.input, pair.target, run.mfcc, frame.sample_rate)
        rows.append((pair.clip_id, d_rendered, d_baseline))
    mean_r = float(np.mean([r[1] for r in rows]))
    mean_b = float(np.mean([r[2] for r in rows]))

    out_dir = Path(run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "eval.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["clip", "mfcc_rendered", "mfcc_baseline"])
        for clip_id, d_r, d_b in rows:
            w.writerow([clip_id, f"{d_r:.9g}", f"{d_b:.9g}"])
        w.writerow(["mean", f"{mean_r:.9g}", f"{mean_b:.9g}"])

    journal = Journal(title=f"Evaluation: {run.task}", stamp=False)
    journal.add("Model", f"checkpoint `{ckpt.name}`, effect `{effect.id}`, {weights.n_outputs} parameters")
    journal.add_table("Test clips", ["clip", "rendered vs target", "input vs target"], rows)
    journal.add("Summary", f"mean MFCC distance {mean_r:.6f} (baseline {mean_b:.6f}) over {len(rows)} clips")
    journal.save(str(out_dir), "eval_report.md")
    print(json.dumps({"clips": len(rows), "mfcc_rendered": mean_r, "mfcc_baseline": mean_b}))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    run = _load(args)
    frame = run.frame
    cfg = EffectConfig(id=args.effect)

    def factory():
        return create_effect(cfg, frame, track=False)

    P = factory().n_params
    rng = np.random.default_rng([run.seed, _GRADCHECK_STREAM])
    x = 0.5 * rng.standard_normal(frame.frame_size)
    theta = rng.uniform(0.25, 0.75, size=P)
    # v = x keeps every closed-form coordinate away from zero
    v = x.copy()
    result = analytic_vjp_check(factory, x, theta, v, epsilon=args.epsilon, n_seeds=args.seeds, seed=run.seed)
    for row in result.rows():
        print("\t".join(row))
    print(f"overall\t{'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


# ---- parser --------------------------------------------------------------------
def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or flat 'section.key = value' run config")
    common.add_argument("--preset", help=f"named preset ({', '.join(available_presets())})")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--workers", type=int, help="worker threads for batch slots")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted config override")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")

    ap = argparse.ArgumentParser(prog="fxgrad", description="Train neural controllers for black-box audio effects.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", parents=[common], help="synthesize teacher (input, target) pairs")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", parents=[common], help="train the parameter encoder")
    p.add_argument("--estimator", choices=["spsa", "fd"], help="gradient estimator")
    p.add_argument("--resume", help="checkpoint to start from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", parents=[common], help="process a WAV file with a trained encoder")
    p.add_argument("--checkpoint", help="defaults to <out>/best.fxgw")
    p.add_argument("--input", required=True, help="input WAV")
    p.add_argument("--output", help="output WAV")
    p.add_argument("--trajectory", help="parameter trajectory CSV")
    p.add_argument("--smooth", type=float, help="one-pole smoothing coefficient in [0, 1); 0 disables")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", parents=[common], help="MFCC distance on the test split")
    p.add_argument("--checkpoint", help="defaults to <out>/best.fxgw")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="compare FD, SPSA and closed-form gradients")
    p.add_argument("--effect", choices=GRADCHECK_EFFECTS, default="soft_clip")
    p.add_argument("--seeds", type=int, default=1000, help="SPSA draws to average")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except (ConfigError, ContractError, DomainError) as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (WavParseError, OSError) as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
