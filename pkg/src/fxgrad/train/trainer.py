"""
End-to-end training of the parameter encoder through a black-box effect.

One step: schedule a frame per slot -> log-mel features for the whole batch
-> encoder forward (batch-norm couples the batch) -> per slot, in parallel:
replica forward, delay-invariant loss on the nominal output, VJP of the loss
gradient through the perturbation tape -> mean over slots -> encoder
backward -> Adam. Slot results are reduced in slot order, so the worker count
never changes the numbers.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..encoder.checkpoint import save_checkpoint
from ..encoder.melspec import MelFrontendConfig, melspec
from ..encoder.network import EncoderConfig, EncoderWeights, encoder_backward, encoder_forward, init_weights
from ..errors import ConfigError, TrainingAborted
from ..fx import registry
from ..fx.base import FrameConfig, apply_trajectory
from ..fx.factory import EffectConfig, create_effect, effect_factory
from ..grad.estimators import estimate_forward, replica_pairs_for
from ..grad.perturbation import PerturbationConfig, slot_rng
from ..loss.delay_invariant import LossBreakdown, LossConfig, total_loss
from ..telemetry import trace
from .optim import Adam
from .progress import Phase, ProgressReporter, RunState
from .render import predict_thetas
from .schedule import BatchSlot, ClipPair, SlotBatch, build_slots, schedule_step, usable_clips

logger = logging.getLogger(__name__)

METRICS_FIELDS = ["epoch", "train_total", "train_l_time", "train_l_freq", "val_total", "aborted_steps"]
_INIT_STREAM = 0xE1


class TrainerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(default=16, ge=1, description="M, concurrent batch slots")
    lr: float = Field(default=1e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    max_epochs: int = Field(default=50, ge=1)
    steps_per_epoch: int = Field(default=250, ge=1)
    patience: int = Field(default=10, ge=1, description="epochs without improvement before stopping")
    heartbeat_every: int = Field(default=25, ge=1)
    val_max_frames: Optional[int] = Field(default=None, ge=1, description="frames per validation clip")


@dataclass
class StepSummary:
    total: float
    l_time: float
    l_freq: float
    aborted: bool = False
    swaps: int = 0
    grad_theta: Optional[np.ndarray] = None


@dataclass
class TrainingResult:
    best_weights: EncoderWeights
    final_weights: EncoderWeights
    best_epoch: int
    best_val: float
    history: List[Dict[str, Any]] = field(default_factory=list)
    stopped_early: bool = False


def _fmt(x: float) -> str:
    return f"{x:.12g}"


class Trainer:
    def __init__(
        self,
        effect: EffectConfig,
        frame: FrameConfig,
        mel: MelFrontendConfig,
        encoder: EncoderConfig,
        cfg: TrainerConfig,
        loss: LossConfig,
        perturbation: PerturbationConfig,
        seed: int = 0,
        workers: int = 1,
        weights: Optional[EncoderWeights] = None,
        reporter: Optional[ProgressReporter] = None,
    ):
        self.effect, self.frame, self.mel = effect, frame, mel
        self.cfg, self.loss_cfg, self.perturbation = cfg, loss, perturbation
        self.seed = int(seed)
        self.workers = max(1, int(workers))
        self.n_params = create_effect(effect, frame, track=False).n_params
        if weights is None:
            weights = init_weights(encoder, mel.n_mels, self.n_params, np.random.default_rng([self.seed, _INIT_STREAM]))
        if weights.n_outputs != self.n_params:
            raise ConfigError(
                f"encoder head has {weights.n_outputs} outputs but effect '{effect.id}' has {self.n_params} parameters",
                field="encoder",
            )
        if weights.n_features != mel.n_mels:
            raise ConfigError(f"encoder expects {weights.n_features} mel bands, front-end makes {mel.n_mels}", field="mel")
        self.weights = weights
        self.optimizer = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        self.reporter = reporter or ProgressReporter()
        self.slots: Optional[List[BatchSlot]] = None
        self.step_index = 0
        self._pool: Optional[ThreadPoolExecutor] = None

    @classmethod
    def from_run_config(cls, run, weights: Optional[EncoderWeights] = None, reporter: Optional[ProgressReporter] = None):
        return cls(
            effect=run.effect,
            frame=run.frame,
            mel=run.mel,
            encoder=run.encoder,
            cfg=run.trainer,
            loss=run.loss,
            perturbation=run.perturbation,
            seed=run.seed,
            workers=run.workers,
            weights=weights,
            reporter=reporter,
        )

    # ---- slots -----------------------------------------------------------------
    def ensure_slots(self) -> List[BatchSlot]:
        if self.slots is None:
            pairs = replica_pairs_for(self.perturbation, self.n_params)
            self.slots = build_slots(self.cfg.batch_size, effect_factory(self.effect, self.frame), pairs, self.seed)
            per_slot = len(self.slots[0].replicas)
            logger.info(
                "%d effect instances across %d slots (%s, P=%d, %d per slot); registry live=%d",
                per_slot * len(self.slots), len(self.slots), self.perturbation.estimator,
                self.n_params, per_slot, registry.live_count(),
            )
        return self.slots

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _map(self, fn, items):
        if self.workers == 1:
            return [fn(it) for it in items]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="fxgrad-slot")
        return list(self._pool.map(fn, items))

    # ---- one step ----------------------------------------------------------------
    def _slot_pass(self, item: Tuple[BatchSlot, SlotBatch, np.ndarray]) -> Tuple[LossBreakdown, np.ndarray]:
        slot, batch, theta = item
        rng = slot_rng(self.perturbation.rng_seed, slot.index, self.step_index)
        tape = estimate_forward(slot.replicas, batch.x, theta, self.perturbation, rng)
        breakdown = total_loss(tape.nominal, batch.y, self.loss_cfg)
        return breakdown, tape.vjp(breakdown.grad_output)

    @trace("train_step")
    def train_step(self, clips: Sequence[ClipPair]) -> StepSummary:
        slots = self.ensure_slots()
        batch = schedule_step(slots, clips, self.frame.frame_size, self.frame.context_size)
        feats = melspec(np.stack([b.context for b in batch]), self.mel, self.frame.sample_rate)
        theta, cache = encoder_forward(self.weights, feats, mode="train")

        results = self._map(self._slot_pass, list(zip(slots, batch, theta)))
        self.step_index += 1
        losses = [r[0] for r in results]
        grad_theta = np.stack([r[1] for r in results])
        summary = StepSummary(
            total=float(np.mean([l.total for l in losses])),
            l_time=float(np.mean([l.l_time for l in losses])),
            l_freq=float(np.mean([l.l_freq for l in losses])),
            swaps=sum(b.swapped for b in batch),
            grad_theta=grad_theta,
        )
        if not (math.isfinite(summary.total) and np.all(np.isfinite(grad_theta))):
            logger.warning("step %d aborted: non-finite loss %r", self.step_index, summary.total)
            summary.aborted = True
            return summary

        grads = encoder_backward(self.weights, cache, grad_theta / len(slots))
        self.optimizer.step(self.weights, grads)
        return summary

    # ---- validation ----------------------------------------------------------------
    @trace("validate")
    def validate(self, clips: Sequence[ClipPair], weights: Optional[EncoderWeights] = None) -> float:
        """Mean frame loss with eval-mode batch norm, raw theta_hat and fresh effects."""
        weights = weights or self.weights
        n = self.frame.frame_size
        totals: List[float] = []
        for clip in clips:
            n_frames = len(clip) // n
            if self.cfg.val_max_frames:
                n_frames = min(n_frames, self.cfg.val_max_frames)
            if n_frames == 0:
                continue
            x = clip.input[:n_frames * n]
            thetas = predict_thetas(weights, x, self.frame, self.mel)
            out = apply_trajectory(create_effect(self.effect, self.frame, track=False), x, thetas, n)
            for i in range(n_frames):
                sl = slice(i * n, (i + 1) * n)
                totals.append(total_loss(out[sl], clip.target[sl], self.loss_cfg).total)
        if not totals:
            raise ConfigError("validation split holds no full frame", field="data")
        return float(np.mean(totals))

    # ---- epochs --------------------------------------------------------------------
    def fit(
        self,
        train_clips: Sequence[ClipPair],
        val_clips: Sequence[ClipPair],
        out_dir: Optional[Path] = None,
        meta: Optional[Dict[str, Any]] = None,
    ) -> TrainingResult:
        train_clips = usable_clips(train_clips, self.frame.frame_size)
        if not val_clips:
            raise ConfigError("validation split is empty", field="data")
        out = Path(out_dir) if out_dir is not None else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        rep = self.reporter
        rep.start()
        history: List[Dict[str, Any]] = []
        timings: List[Tuple[int, float]] = []
        best_val, best_epoch, bad = math.inf, 0, 0
        best_weights = self.weights.copy()
        stopped_early = False
        try:
            self.ensure_slots()
            for epoch in range(1, self.cfg.max_epochs + 1):
                row, seconds = self._run_epoch(epoch, train_clips, val_clips)
                history.append(row)
                timings.append((epoch, seconds))
                if row["val_total"] < best_val:
                    best_val, best_epoch, bad = row["val_total"], epoch, 0
                    best_weights = self.weights.copy()
                    if out is not None:
                        save_checkpoint(out / "best.fxgw", best_weights, {**(meta or {}), "epoch": epoch, "val_total": best_val})
                else:
                    bad += 1
                rep.update(Phase.validating, 100, epoch=epoch, best_val=best_val,
                           message=f"val={row['val_total']:.6g} best={best_val:.6g}@{best_epoch}")
                if out is not None:
                    self._write_logs(out, history, timings)
                if bad >= self.cfg.patience:
                    stopped_early = True
                    logger.info("early stop after epoch %d (best %d, patience %d)", epoch, best_epoch, self.cfg.patience)
                    break
            if out is not None:
                save_checkpoint(out / "last.fxgw", self.weights, {**(meta or {}), "epoch": len(history)})
        except BaseException as exc:
            rep.finish(RunState.FAILED, exc)
            raise
        finally:
            self.close()
        rep.finish(RunState.STOPPED_EARLY if stopped_early else RunState.SUCCEEDED)
        logger.info("registry at end of training: %s", registry.snapshot())
        return TrainingResult(
            best_weights=best_weights,
            final_weights=self.weights,
            best_epoch=best_epoch,
            best_val=best_val,
            history=history,
            stopped_early=stopped_early,
        )

    def _run_epoch(self, epoch: int, train_clips, val_clips) -> Tuple[Dict[str, Any], float]:
        t0 = time.perf_counter()
        rep = self.reporter
        rep.update(Phase.training, 0, epoch=epoch)
        done: List[StepSummary] = []
        aborted = 0
        for s in range(1, self.cfg.steps_per_epoch + 1):
            summary = self.train_step(train_clips)
            if summary.aborted:
                aborted += 1
            else:
                done.append(summary)
            delta = {"steps": 1, "aborted_steps": int(summary.aborted), "frames": self.cfg.batch_size, "swaps": summary.swaps}
            if s % self.cfg.heartbeat_every == 0 or s == self.cfg.steps_per_epoch:
                rep.update(Phase.training, 100 * s // self.cfg.steps_per_epoch, epoch=epoch, metrics_delta=delta)
            else:
                rep.count(delta)
        if not done:
            raise TrainingAborted(f"every step of epoch {epoch} produced a non-finite loss")
        rep.update(Phase.validating, 0, epoch=epoch)
        val = self.validate(val_clips)
        row = {
            "epoch": epoch,
            "train_total": float(np.mean([d.total for d in done])),
            "train_l_time": float(np.mean([d.l_time for d in done])),
            "train_l_freq": float(np.mean([d.l_freq for d in done])),
            "val_total": val,
            "aborted_steps": aborted,
        }
        return row, time.perf_counter() - t0

    @staticmethod
    def _write_logs(out: Path, history: List[Dict[str, Any]], timings: List[Tuple[int, float]]) -> None:
        with open(out / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRICS_FIELDS)
            for row in history:
                w.writerow([row["epoch"], *(_fmt(row[k]) for k in METRICS_FIELDS[1:-1]), row["aborted_steps"]])
        with open(out / "timing.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "seconds"])
            for epoch, seconds in timings:
                w.writerow([epoch, f"{seconds:.3f}"])


def run_training(
    run,
    train_clips: Sequence[ClipPair],
    val_clips: Sequence[ClipPair],
    out_dir: Optional[Path] = None,
    weights: Optional[EncoderWeights] = None,
    reporter: Optional[ProgressReporter] = None,
) -> TrainingResult:
    """Train from a ``RunConfig``; checkpoints and logs go to ``out_dir`` when given."""
    trainer = Trainer.from_run_config(run, weights=weights, reporter=reporter)
    return trainer.fit(train_clips, val_clips, out_dir=out_dir, meta=training_meta(run))


def training_meta(run) -> Dict[str, Any]:
    """Checkpoint metadata that makes a checkpoint self-describing for rendering."""
    return {
        "frame": run.frame.model_dump(mode="json"),
        "mel": run.mel.model_dump(mode="json"),
        "effect": run.effect.model_dump(mode="json"),
        "seed": run.seed,
        "task": run.task,
    }
