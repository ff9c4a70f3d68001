import numpy as np
import pytest

from fxgrad.encoder.checkpoint import load_checkpoint, save_checkpoint
from fxgrad.encoder.melspec import MelFrontendConfig, mel_centers, mel_filterbank, melspec
from fxgrad.encoder.network import (
    THETA_EPS,
    EncoderConfig,
    count_weights,
    encoder_backward,
    encoder_forward,
    init_weights,
)
from fxgrad.errors import ContractError
from fxgrad.train.optim import Adam


@pytest.fixture
def tiny(rng):
    cfg = EncoderConfig(channels=(2, 3))
    return init_weights(cfg, n_features=8, n_outputs=2, rng=rng)


def test_mel_filterbank_shape_and_peaks():
    """
    Triangles are non-negative and peak near their mel centers.
    """
    # 1. Arrange
    sr, n_fft = 22050, 1024

    # 2. Act
    fb = mel_filterbank(16, n_fft, float(sr), 20.0, sr / 2.0)
    centers = mel_centers(16, sr, 20.0, sr / 2.0)

    # 3. Assert
    assert fb.shape == (16, n_fft // 2 + 1)
    assert np.all(fb >= 0.0)
    bin_hz = sr / n_fft
    peaks = np.argmax(fb, axis=1) * bin_hz
    assert np.all(np.abs(peaks[4:] - centers[4:]) <= bin_hz)


def test_melspec_frame_count():
    """
    A 40960-sample context with a 1024 window and 25% overlap gives 53 frames.
    """
    # 1. Arrange
    cfg = MelFrontendConfig()
    x = np.random.default_rng(0).standard_normal((2, 40960))

    # 2. Act
    feats = melspec(x, cfg, 22050)

    # 3. Assert
    assert cfg.hop == 768
    assert feats.shape == (2, 53, 128)
    assert np.all(np.isfinite(feats))


def test_melspec_of_silence_is_log_offset():
    cfg = MelFrontendConfig(n_mels=8)
    feats = melspec(np.zeros(4096), cfg, 22050)
    assert np.allclose(feats, np.log(cfg.log_offset))


def test_melspec_rejects_short_context():
    with pytest.raises(ContractError):
        melspec(np.zeros(100), MelFrontendConfig(), 22050)


def test_encoder_output_shape_and_range(tiny, rng):
    theta, _ = encoder_forward(tiny, rng.standard_normal((4, 16, 8)), mode="train")
    assert theta.shape == (4, 2)
    assert np.all((theta > 0.0) & (theta < 1.0))


def test_saturated_head_stays_inside_the_unit_interval(tiny, rng):
    """A head driven far into saturation still yields theta strictly inside (0, 1)."""
    # 1. Arrange
    x = rng.standard_normal((3, 16, 8))

    for bias in (1e3, -1e3):
        tiny.params["head.bias"][:] = bias

        # 2. Act
        theta, cache = encoder_forward(tiny, x, mode="eval")
        grads = encoder_backward(tiny, cache, np.ones_like(theta))

        # 3. Assert
        assert np.all(theta >= THETA_EPS)
        assert np.all(theta <= 1.0 - THETA_EPS)
        assert np.all(theta > 0.0) and np.all(theta < 1.0)
        assert np.all(np.abs(grads["head.bias"]) > 0.0)


def test_count_weights_matches_initialized_tensors(tiny):
    assert tiny.n_weights() == count_weights(tiny.cfg, 8, 2)


def test_eval_mode_uses_running_statistics(tiny, rng):
    """
    In eval mode one example does not depend on the rest of the batch.
    """
    # 1. Arrange
    feats = rng.standard_normal((3, 16, 8))

    # 2. Act
    batch, _ = encoder_forward(tiny, feats, mode="eval")
    single, _ = encoder_forward(tiny, feats[1], mode="eval")

    # 3. Assert
    assert np.allclose(batch[1], single[0])


def test_backward_matches_finite_differences(tiny, rng):
    """
    Every tensor's analytic gradient agrees with central differences.
    """
    # 1. Arrange
    feats = rng.standard_normal((3, 16, 8))
    g = rng.standard_normal((3, 2))
    h = 1e-6

    def objective():
        theta, _ = encoder_forward(tiny, feats, mode="train")
        return float(np.sum(theta * g))

    # 2. Act
    _, cache = encoder_forward(tiny, feats, mode="train")
    grads = encoder_backward(tiny, cache, g)

    # 3. Assert
    for name, tensor in tiny.params.items():
        numeric = np.zeros_like(tensor)
        flat, num_flat = tensor.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = objective()
            flat[i] = orig - h
            down = objective()
            flat[i] = orig
            num_flat[i] = (up - down) / (2 * h)
        err = np.linalg.norm(numeric - grads[name]) / max(np.linalg.norm(numeric) + np.linalg.norm(grads[name]), 1e-12)
        assert err < 1e-5, name


def test_backward_rejects_stale_cache(tiny, rng):
    """
    A cache made before an optimizer step cannot be used after it.
    """
    # 1. Arrange
    feats = rng.standard_normal((2, 16, 8))
    _, cache = encoder_forward(tiny, feats)
    grads = encoder_backward(tiny, cache, np.ones((2, 2)))
    Adam(lr=1e-3).step(tiny, grads)

    # 2. Act / 3. Assert
    with pytest.raises(ContractError):
        encoder_backward(tiny, cache, np.ones((2, 2)))


def test_checkpoint_round_trip(tiny, tmp_path):
    """
    Tensors come back at float32 precision with the metadata intact.
    """
    # 1. Arrange
    path = tmp_path / "best.fxgw"
    meta = {"epoch": 3, "effect": {"id": "gain"}}

    # 2. Act
    save_checkpoint(path, tiny, meta)
    loaded, loaded_meta = load_checkpoint(path)

    # 3. Assert
    assert loaded_meta == meta
    assert loaded.cfg == tiny.cfg
    assert (loaded.n_features, loaded.n_outputs) == (8, 2)
    for name, tensor in tiny.params.items():
        assert np.allclose(loaded.params[name], tensor, rtol=1e-6, atol=1e-7)
    assert set(loaded.buffers) == set(tiny.buffers)


def test_checkpoint_rejects_corruption(tiny, tmp_path):
    """
    Wrong magic, truncation and trailing bytes are all refused.
    """
    # 1. Arrange
    good = save_checkpoint(tmp_path / "w.fxgw", tiny).read_bytes()
    cases = {
        "magic.fxgw": b"XXXX" + good[4:],
        "short.fxgw": good[:-10],
        "long.fxgw": good + b"\x00\x00\x00\x00",
        "header.fxgw": good[:5],
    }

    # 2. Act / 3. Assert
    for name, blob in cases.items():
        path = tmp_path / name
        path.write_bytes(blob)
        with pytest.raises(ContractError):
            load_checkpoint(path)
