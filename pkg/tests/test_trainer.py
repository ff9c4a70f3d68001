import csv
import math
from unittest.mock import patch

import numpy as np
import pytest

from conftest import RecordingFx
from fxgrad.audio.dataset import TeacherSpec, generate_teacher_pairs
from fxgrad.audio.synth import SourceSpec, synth_sources
from fxgrad.config import RunConfig
from fxgrad.encoder.melspec import MelFrontendConfig
from fxgrad.encoder.network import EncoderConfig, init_weights
from fxgrad.errors import ConfigError, ContractError, TrainingAborted
from fxgrad.fx.base import FrameConfig
from fxgrad.fx.factory import EffectConfig, effect_factory
from fxgrad.grad.perturbation import PerturbationConfig
from fxgrad.loss.delay_invariant import LossConfig
from fxgrad.train.optim import AdamState, adam_update
from fxgrad.train.progress import ProgressReporter, RunState
from fxgrad.train.render import SmootherConfig, predict_thetas, render, smooth_trajectory
from fxgrad.train.schedule import ClipPair, build_slots, context_window, schedule_step
from fxgrad.train.trainer import METRICS_FIELDS, StepSummary, Trainer, TrainerConfig, run_training

FRAME = FrameConfig(frame_size=256, context_size=1024, sample_rate=22050, block_size=64)
MEL = MelFrontendConfig(window=256, n_mels=16)
ENCODER = EncoderConfig(channels=(2, 2))


def _clips(rng, n=3, frames=8, gain=0.5):
    out = []
    for i in range(n):
        x = 0.5 * rng.standard_normal(frames * FRAME.frame_size)
        out.append(ClipPair(f"clip-{i}", x, gain * x))
    return out


def _trainer(workers=1, **cfg):
    base = dict(batch_size=3, lr=1e-3, max_epochs=2, steps_per_epoch=3, patience=5, val_max_frames=4)
    base.update(cfg)
    return Trainer(
        effect=EffectConfig(id="gain"),
        frame=FRAME,
        mel=MEL,
        encoder=ENCODER,
        cfg=TrainerConfig(**base),
        loss=LossConfig(maxlag=64),
        perturbation=PerturbationConfig(epsilon=0.01),
        seed=11,
        workers=workers,
    )


def test_context_window_centers_the_frame():
    """
    The context is centered on the frame and zero-filled outside the clip.
    """
    # 1. Arrange
    signal = np.arange(1.0, 2049.0)

    # 2. Act
    ctx = context_window(signal, offset=256, frame_size=256, context_size=1024)

    # 3. Assert
    assert np.all(ctx[:128] == 0.0)
    assert ctx[128] == 1.0
    assert ctx[128 + 384] == signal[384]  # frame center sits at the context center
    assert ctx[-1] == signal[895]


def test_slot_swaps_clip_and_resets_replicas(rng):
    """
    An exhausted slot draws a new clip and resets every replica first.
    """
    # 1. Arrange
    slots = build_slots(1, lambda: RecordingFx(block_size=64), n_pairs=1, seed=0)
    clips = [ClipPair("only", np.ones(512), np.ones(512))]
    slot = slots[0]

    # 2. Act
    first = schedule_step(slots, clips, 256, 1024)
    slot.replicas.nominal.process(first[0].x, [0.5])
    second = schedule_step(slots, clips, 256, 1024)
    slot.replicas.nominal.process(second[0].x, [0.5])
    third = schedule_step(slots, clips, 256, 1024)

    # 3. Assert
    assert first[0].swapped and not second[0].swapped and third[0].swapped
    assert [b[0].offset for b in (first, second, third)] == [0, 256, 0]
    assert slot.replicas.nominal.stream == []
    assert slot.swaps == 2


def test_schedule_requires_clips():
    slots = build_slots(1, lambda: RecordingFx(block_size=64), n_pairs=1, seed=0)
    with pytest.raises(ConfigError):
        schedule_step(slots, [], 256, 1024)


def test_adam_first_step_moves_by_learning_rate():
    """
    With bias correction the first step has magnitude lr in every coordinate.
    """
    # 1. Arrange
    w = {"a": np.array([1.0, -2.0, 0.5])}
    g = {"a": np.array([0.3, -4.0, 1e-3])}

    # 2. Act
    new_w, state = adam_update(w, g, AdamState(), t=1, lr=0.01, eps=1e-12)

    # 3. Assert
    assert new_w["a"] == pytest.approx(w["a"] - 0.01 * np.sign(g["a"]), rel=1e-6)
    assert state.m["a"] == pytest.approx(0.1 * g["a"])
    assert state.v["a"] == pytest.approx(0.001 * g["a"] ** 2)


def test_adam_second_step_uses_moments():
    w = {"a": np.array([0.0])}
    g1, g2 = {"a": np.array([1.0])}, {"a": np.array([2.0])}
    w1, s1 = adam_update(w, g1, AdamState(), 1, lr=0.1, eps=0.0)
    w2, _ = adam_update(w1, g2, s1, 2, lr=0.1, eps=0.0)
    m = 0.9 * 0.1 * 1.0 + 0.1 * 2.0
    v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0
    expected = w1["a"] - 0.1 * (m / (1 - 0.9 ** 2)) / math.sqrt(v / (1 - 0.999 ** 2))
    assert w2["a"] == pytest.approx(expected)


def test_smooth_trajectory_one_pole():
    out = smooth_trajectory(np.array([[0.0], [1.0], [1.0]]), 0.5)
    assert out[:, 0].tolist() == pytest.approx([0.0, 0.5, 0.75])
    assert np.array_equal(smooth_trajectory(np.array([[0.2], [0.8]]), 0.0), np.array([[0.2], [0.8]]))


def test_train_step_updates_weights(rng):
    """
    One step runs every slot and moves the encoder.
    """
    # 1. Arrange
    trainer = _trainer()
    before = trainer.weights.copy()

    # 2. Act
    summary = trainer.train_step(_clips(rng))

    # 3. Assert
    assert not summary.aborted
    assert summary.grad_theta.shape == (3, 1)
    assert summary.swaps == 3
    assert trainer.weights.version == before.version + 1
    assert not np.array_equal(trainer.weights.params["head.weight"], before.params["head.weight"])


def test_worker_count_does_not_change_results():
    """
    Same seed, same numbers, with one worker or three.
    """
    # 1. Arrange
    clips = _clips(np.random.default_rng(5))
    serial, parallel = _trainer(workers=1), _trainer(workers=3)

    # 2. Act
    for _ in range(3):
        a = serial.train_step(clips)
        b = parallel.train_step(clips)
    parallel.close()

    # 3. Assert
    assert a.total == b.total
    for name in serial.weights.params:
        assert np.array_equal(serial.weights.params[name], parallel.weights.params[name])


def test_fit_writes_metrics_and_checkpoints(rng, tmp_path):
    """
    A tiny run logs one metrics row per epoch and saves best and last weights.
    """
    # 1. Arrange
    seen = []
    trainer = _trainer()
    trainer.reporter = ProgressReporter(hook=seen.append)
    clips = _clips(rng)

    # 2. Act
    result = trainer.fit(clips[:2], clips[2:], out_dir=tmp_path, meta={"task": "unit"})

    # 3. Assert
    with open(tmp_path / "metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == METRICS_FIELDS
    assert [r[0] for r in rows[1:]] == ["1", "2"]
    assert all(math.isfinite(float(v)) for r in rows[1:] for v in r[1:5])
    assert (tmp_path / "best.fxgw").is_file()
    assert (tmp_path / "last.fxgw").is_file()
    assert (tmp_path / "timing.csv").is_file()
    assert result.best_epoch in (1, 2)
    assert seen[-1].status == RunState.SUCCEEDED
    assert seen[-1].metrics.steps == 2 * 3


def test_fit_stops_after_patience(rng):
    """
    Early stopping kicks in once validation stops improving.
    """
    # 1. Arrange
    trainer = _trainer(max_epochs=10, patience=1)
    clips = _clips(rng)

    # 2. Act
    with patch.object(Trainer, "validate", return_value=1.0):
        result = trainer.fit(clips[:2], clips[2:])

    # 3. Assert
    assert result.stopped_early
    assert len(result.history) == 2
    assert result.best_epoch == 1


def test_fit_aborts_when_every_step_is_non_finite(rng):
    """
    An epoch with no finite step fails the run.
    """
    # 1. Arrange
    seen = []
    trainer = _trainer()
    trainer.reporter = ProgressReporter(hook=seen.append)
    bad = StepSummary(total=float("nan"), l_time=float("nan"), l_freq=float("nan"), aborted=True)
    clips = _clips(rng)

    # 2. Act
    with patch.object(Trainer, "train_step", return_value=bad):
        with pytest.raises(TrainingAborted):
            trainer.fit(clips[:2], clips[2:])

    # 3. Assert
    assert seen[-1].status == RunState.FAILED
    assert seen[-1].error["type"] == "TrainingAborted"


def test_fit_requires_validation_clips(rng):
    with pytest.raises(ConfigError):
        _trainer().fit(_clips(rng), [])


def test_head_size_must_match_effect(rng):
    weights = init_weights(ENCODER, MEL.n_mels, 4, rng)
    with pytest.raises(ConfigError):
        Trainer(EffectConfig(id="gain"), FRAME, MEL, ENCODER, TrainerConfig(), LossConfig(), PerturbationConfig(),
                weights=weights)


def test_render_keeps_clip_length(rng):
    """
    Clips are padded to whole frames for processing and trimmed back.
    """
    # 1. Arrange
    weights = init_weights(ENCODER, MEL.n_mels, 1, rng)
    clip = rng.standard_normal(1000)

    # 2. Act
    result = render(weights, clip, EffectConfig(id="gain"), FRAME, MEL, SmootherConfig(coefficient=0.5))

    # 3. Assert
    assert result.audio.shape == (1000,)
    assert result.thetas.shape == (4, 1)
    assert result.raw_thetas.shape == (4, 1)
    assert np.all((result.thetas >= 0.0) & (result.thetas <= 1.0))


def test_render_rejects_sample_rate_mismatch(rng):
    weights = init_weights(ENCODER, MEL.n_mels, 1, rng)
    with pytest.raises(ContractError):
        render(weights, np.ones(512), EffectConfig(id="gain"), FRAME, MEL, sample_rate=44100)


def test_render_matches_training_stream(rng):
    """
    Rendering a clip produces the same audio as a training slot streaming it frame by frame.
    """
    # 1. Arrange
    effect = EffectConfig(id="multiband_compressor")
    weights = init_weights(ENCODER, MEL.n_mels, 21, rng)
    x = 0.5 * rng.standard_normal(4 * FRAME.frame_size)
    clips = [ClipPair("only", x, x)]
    slots = build_slots(1, effect_factory(effect, FRAME), n_pairs=1, seed=0)

    # 2. Act
    result = render(weights, x, effect, FRAME, MEL, SmootherConfig(coefficient=0.0))
    streamed = []
    for k in range(4):
        batch = schedule_step(slots, clips, FRAME.frame_size, FRAME.context_size)
        streamed.append(slots[0].replicas.nominal.process(batch[0].x, result.thetas[k]))

    # 3. Assert
    assert np.array_equal(result.thetas, np.clip(result.raw_thetas, 0.0, 1.0))
    assert np.array_equal(result.audio, np.concatenate(streamed))


def test_gain_teacher_loss_decreases(rng):
    """
    200 steps toward a 0.25x gain teacher cut the training loss by more than half.
    """
    # 1. Arrange
    trainer = _trainer(batch_size=4, lr=1e-2)
    clips = _clips(rng, n=4, gain=0.25)

    # 2. Act
    totals = [trainer.train_step(clips).total for _ in range(200)]

    # 3. Assert
    first, last = float(np.mean(totals[:10])), float(np.mean(totals[-10:]))
    assert last < 0.5 * first, (first, last)


def test_same_seed_gives_identical_metrics(rng, tmp_path):
    """
    Two full runs from one config write byte-identical metrics and weights.
    """
    # 1. Arrange
    run = RunConfig.model_validate({
        "seed": 11,
        "workers": 2,
        "frame": FRAME.model_dump(),
        "mel": MEL.model_dump(),
        "encoder": ENCODER.model_dump(),
        "effect": {"id": "gain"},
        "loss": {"maxlag": 64},
        "trainer": {"batch_size": 3, "lr": 0.001, "max_epochs": 2, "steps_per_epoch": 3, "val_max_frames": 4},
    })
    clips = _clips(rng)

    # 2. Act
    run_training(run, clips[:2], clips[2:], out_dir=tmp_path / "a")
    run_training(run.model_copy(update={"workers": 1}), clips[:2], clips[2:], out_dir=tmp_path / "b")

    # 3. Assert
    for name in ("metrics.csv", "best.fxgw", "last.fxgw"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


@pytest.mark.slow
def test_recovers_hidden_gain_from_generated_pairs():
    """
    Training on teacher-rendered tones drives theta_hat to the hidden gain.
    """
    # 1. Arrange
    sources = synth_sources(SourceSpec(kind="tones", count=6, duration_s=0.5), seed=3)
    teacher = TeacherSpec(effect=EffectConfig(id="gain"), hidden=[0.35])
    pairs = generate_teacher_pairs(sources, teacher, seed=3, frame=FRAME)
    clips = [ClipPair(p.pair_id, p.input.samples, p.target.samples) for p in pairs]
    trainer = _trainer(batch_size=4, lr=1e-2)

    # 2. Act
    for _ in range(600):
        trainer.train_step(clips[:5])
    thetas = predict_thetas(trainer.weights, clips[5].input, FRAME, MEL)

    # 3. Assert
    assert np.all(pairs[5].thetas == 0.35)
    assert float(np.median(thetas)) == pytest.approx(0.35, abs=0.05)
