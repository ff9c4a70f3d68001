import numpy as np
import pytest

from fxgrad.errors import ContractError
from fxgrad.loss.delay_invariant import LossConfig, estimate_delay, freq_loss, shift_frame, total_loss


@pytest.fixture
def frame(rng):
    return rng.standard_normal(1024)


def test_shift_frame_delays_and_advances():
    y = np.arange(1.0, 6.0)
    assert shift_frame(y, 2).tolist() == [0.0, 0.0, 1.0, 2.0, 3.0]
    assert shift_frame(y, -2).tolist() == [3.0, 4.0, 5.0, 0.0, 0.0]
    assert shift_frame(y, 9).tolist() == [0.0] * 5


@pytest.mark.parametrize("k", [0, 1, 17, -33, 200])
def test_loss_is_zero_for_pure_delay(frame, k):
    """
    A delayed copy of the target costs nothing once aligned.
    """
    # 1. Arrange
    pred = shift_frame(frame, k)

    # 2. Act
    out = total_loss(pred, frame)

    # 3. Assert
    assert out.alignment.tau == k
    assert out.total == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_loss_is_zero_for_every_delay_and_polarity(seed):
    """
    Every shift within the search window, inverted or not, is found and costs nothing.
    """
    # 1. Arrange
    target = np.random.default_rng(seed).standard_normal(1024)
    cfg = LossConfig(maxlag=256)

    for k in range(-256, 257):
        for polarity in (1, -1):
            # 2. Act
            out = total_loss(polarity * shift_frame(target, k), target, cfg)

            # 3. Assert
            assert (out.alignment.tau, out.alignment.polarity) == (k, polarity)
            assert out.total == pytest.approx(0.0, abs=1e-9), (k, polarity)


def test_loss_is_polarity_invariant(frame):
    """
    An inverted copy is as good as the original.
    """
    out = total_loss(-frame, frame)
    assert out.alignment.polarity == -1
    assert out.l_time == pytest.approx(0.0, abs=1e-12)
    assert out.total == pytest.approx(0.0, abs=1e-9)


def test_delay_sign_follows_the_lagging_prediction(frame):
    """
    tau > 0 means the prediction lags the target.
    """
    assert estimate_delay(shift_frame(frame, 5), frame, 64).tau == 5
    assert estimate_delay(shift_frame(frame, -5), frame, 64).tau == -5


def test_silent_frames_align_at_zero():
    out = estimate_delay(np.zeros(256), np.zeros(256), 32)
    assert (out.tau, out.polarity, out.length) == (0, 1, 256)


def test_delay_outside_search_window_is_not_found(frame):
    """
    Lags beyond maxlag are never selected.
    """
    out = estimate_delay(shift_frame(frame, 100), frame, 32)
    assert abs(out.tau) <= 32


def test_maxlag_must_leave_half_a_frame(frame):
    with pytest.raises(ContractError):
        estimate_delay(frame, frame, 600)


def test_loss_rejects_mismatched_frames():
    with pytest.raises(ContractError):
        total_loss(np.zeros(64), np.zeros(32))


def test_gain_error_costs_more_than_none(frame):
    """
    Both terms grow with a level mismatch.
    """
    close = total_loss(0.9 * frame, frame)
    far = total_loss(0.5 * frame, frame)
    assert 0.0 < close.l_time < far.l_time
    assert 0.0 < close.l_freq < far.l_freq


def test_total_weights_the_two_terms(frame, rng):
    cfg = LossConfig(alpha_time=3.0, alpha_freq=0.5)
    out = total_loss(frame + 0.1 * rng.standard_normal(1024), frame, cfg)
    assert out.total == pytest.approx(3.0 * out.l_time + 0.5 * out.l_freq)


def test_output_gradient_matches_finite_differences(frame, rng):
    """
    The analytic dL/dy_pred agrees with a central difference along a random direction.
    """
    # 1. Arrange
    cfg = LossConfig()
    pred = frame + 0.3 * rng.standard_normal(1024)
    u = rng.standard_normal(1024)
    h = 1e-6

    # 2. Act
    analytic = float(np.dot(total_loss(pred, frame, cfg).grad_output, u))
    numeric = (total_loss(pred + h * u, frame, cfg).total - total_loss(pred - h * u, frame, cfg).total) / (2 * h)

    # 3. Assert
    assert analytic == pytest.approx(numeric, rel=1e-3)


def test_spectral_gradient_matches_finite_differences(rng):
    """
    Gradient of the magnitude plus log-magnitude term alone.
    """
    # 1. Arrange
    cfg = LossConfig()
    t = rng.standard_normal(512)
    p = t + 0.5 * rng.standard_normal(512)
    u = rng.standard_normal(512)
    h = 1e-6

    # 2. Act
    _, grad = freq_loss(p, t, cfg)
    numeric = (freq_loss(p + h * u, t, cfg)[0] - freq_loss(p - h * u, t, cfg)[0]) / (2 * h)

    # 3. Assert
    assert float(np.dot(grad, u)) == pytest.approx(numeric, rel=1e-4)
