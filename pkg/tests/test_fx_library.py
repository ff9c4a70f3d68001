import numpy as np
import pytest
from scipy import signal

from fxgrad.errors import DomainError
from fxgrad.fx.base import FrameConfig
from fxgrad.fx.crossover import CrossoverBank, order_splits
from fxgrad.fx.dynamics import EnvelopeState, coeff_exponential, compressor_static_gain, envelope_follow, gate_static_gain
from fxgrad.fx.eq import EQ_CENTERS, N_EQ_BANDS, peaking_sos
from fxgrad.fx.factory import EffectConfig, create_effect, mastering_chain_config


def test_compressor_static_curve_hard_knee():
    """
    Above threshold the output rises at 1/ratio; below it the gain is zero.
    """
    gains = compressor_static_gain(np.array([-40.0, -20.0, -10.0, 0.0]), threshold=-20.0, ratio=4.0, knee=0.0)
    assert gains.tolist() == pytest.approx([0.0, 0.0, -7.5, -15.0])


def test_compressor_soft_knee_is_continuous():
    """
    The quadratic knee meets both straight segments at its edges.
    """
    threshold, ratio, knee = -20.0, 4.0, 6.0
    lower, upper = threshold - knee / 2.0, threshold + knee / 2.0
    eps = 1e-9
    assert compressor_static_gain(lower + eps, threshold, ratio, knee) == pytest.approx(0.0, abs=1e-6)
    assert compressor_static_gain(upper, threshold, ratio, knee) == pytest.approx(
        (1.0 / ratio - 1.0) * (upper - threshold)
    )
    # knee gain at the threshold: slope * knee / 8
    assert compressor_static_gain(threshold, threshold, ratio, knee) == pytest.approx((1.0 / ratio - 1.0) * knee / 8.0)


def test_compressor_rejects_ratio_below_one():
    with pytest.raises(DomainError):
        compressor_static_gain(-10.0, -20.0, 0.5, 0.0)


def test_gate_static_curve():
    """
    Unity above threshold, downward expansion below, floored at the reduction.
    """
    gains = gate_static_gain(np.array([-10.0, -45.0, -90.0]), threshold=-40.0, ratio=3.0, reduction=-30.0)
    assert gains.tolist() == pytest.approx([0.0, -10.0, -30.0])


def test_limiter_bounds_peaks():
    """
    With an instant-attack detector nothing exceeds the threshold.
    """
    # 1. Arrange
    fx = create_effect(EffectConfig(id="limiter"), track=False)
    t = np.arange(4096) / 22050.0
    x = 0.9 * np.sin(2 * np.pi * 440.0 * t)
    theta = [0.9]  # -6 dBFS

    # 2. Act
    y = fx.process(x, theta)

    # 3. Assert
    assert np.max(np.abs(y)) <= 10.0 ** (-6.0 / 20.0) + 1e-9


def test_crossover_bands_sum_to_flat_magnitude():
    """
    The four LR4 bands sum to an allpass response.
    """
    # 1. Arrange
    bank = CrossoverBank(22050)
    bank.configure([200.0, 1000.0, 5000.0])
    impulse = np.zeros(8192)
    impulse[0] = 1.0

    # 2. Act
    summed = np.sum(bank.split(impulse), axis=0)
    mag = np.abs(np.fft.rfft(summed))

    # 3. Assert
    assert np.max(np.abs(20.0 * np.log10(mag[1:]))) < 0.1


def test_order_splits_sorts_and_separates():
    out = order_splits([5000.0, 200.0, 200.0], 22050)
    assert out == [200.0, 201.0, 5000.0]


def test_peaking_filter_at_zero_db_is_identity():
    """
    All-zero gains leave the EQ transparent.
    """
    # 1. Arrange
    fx = create_effect(EffectConfig(id="graphic_eq"), track=False)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(2048)
    theta = np.full(fx.n_params, 0.5)

    # 2. Act
    y = fx.process(x, theta)

    # 3. Assert
    assert np.max(np.abs(y - x)) < 1e-9


def test_peaking_filter_gain_at_center():
    """
    The cookbook peaking filter reaches its gain at fc.
    """
    sos = peaking_sos(1000.0, 6.0, 4.3, 22050)
    _, h = signal.sosfreqz(sos[np.newaxis, :], worN=[1000.0], fs=22050)
    assert 20.0 * np.log10(np.abs(h[0])) == pytest.approx(6.0, abs=1e-6)


def test_eq_centers_span_the_band():
    assert len(EQ_CENTERS) == N_EQ_BANDS
    assert EQ_CENTERS[0] == pytest.approx(40.0)
    assert EQ_CENTERS[-1] == pytest.approx(10240.0)


@pytest.mark.parametrize(
    "cfg, expected",
    [
        (EffectConfig(id="multiband_compressor"), 21),
        (EffectConfig(id="multiband_gate"), 17),
        (EffectConfig(id="graphic_eq"), 33),
        (EffectConfig(id="limiter"), 1),
        (mastering_chain_config(), 50),
    ],
)
def test_trainable_parameter_counts(cfg, expected):
    """
    P of every shipped effect, including the mastering chain.
    """
    assert create_effect(cfg, track=False).n_params == expected


def test_mastering_chain_compressor_has_sixteen_trainable_parameters():
    chain = create_effect(mastering_chain_config(), track=False)
    assert chain.children[0].n_params == 16
    assert chain.param_specs.names[0] == "multiband_compressor.threshold_1"
    assert chain.param_specs.names[-1] == "limiter.threshold"


def test_chain_applies_children_in_order(rng):
    """
    A chain equals its children applied one after the other.
    """
    # 1. Arrange
    cfg = EffectConfig(id="chain", children=[EffectConfig(id="gain"), EffectConfig(id="soft_clip")])
    chain = create_effect(cfg, track=False)
    gain = create_effect(EffectConfig(id="gain"), track=False)
    clip = create_effect(EffectConfig(id="soft_clip"), track=False)
    x = rng.standard_normal(512)

    # 2. Act
    y = chain.process(x, [0.5, 0.3, 0.7])
    expected = clip.process(gain.process(x, [0.5]), [0.3, 0.7])

    # 3. Assert
    assert np.array_equal(y, expected)


def test_compressor_with_unit_ratio_is_transparent(rng):
    """
    Ratio 1 and 0 dB makeup leave the multiband compressor a pure allpass.
    """
    # 1. Arrange
    frame = FrameConfig()
    fixed = {**{f"ratio_{b}": 1.0 for b in range(1, 5)}, **{f"makeup_{b}": 0.0 for b in range(1, 5)}}
    fixed.update(input_gain=0.0, output_gain=0.0)
    fx = create_effect(EffectConfig(id="multiband_compressor", fixed=fixed), frame, track=False)
    x = 0.5 * rng.standard_normal(2048)

    # 2. Act
    y = fx.process(x, rng.uniform(0.0, 1.0, size=fx.n_params))

    # 3. Assert
    assert np.sum(y * y) == pytest.approx(np.sum(x * x), rel=0.1)


def _tone(freq, n=22528, sr=22050):
    return np.sin(2.0 * np.pi * freq * np.arange(n) / sr)


def _level_db(y):
    tail = y[len(y) // 2:]
    return 10.0 * np.log10(np.mean(tail * tail))


def test_envelope_step_response_after_one_time_constant():
    """
    A 0 -> 1 step with a 10 ms attack reaches 1 - 1/e after 221 samples.
    """
    # 1. Arrange
    state = EnvelopeState()

    # 2. Act
    env = envelope_follow(state, np.ones(221), attack_ms=10.0, release_ms=100.0, sample_rate=22050)

    # 3. Assert
    assert env[-1] == pytest.approx(1.0 - np.exp(-1.0), abs=2e-3)
    assert env[-1] == pytest.approx(1.0 - coeff_exponential(10.0, 22050) ** 221, rel=1e-12)
    assert state.value == env[-1]
    assert np.all(np.diff(env) > 0.0)


def test_graphic_eq_band_boost_is_local():
    """
    +12 dB on one band lifts a tone at its center by 12 dB and one three octaves up by under 1 dB.
    """
    # 1. Arrange
    band = 10
    fc = float(EQ_CENTERS[band])
    theta = np.full(N_EQ_BANDS + 1, 0.5)
    theta[band] = 0.75  # +12 dB on a [-24, 24] dB range

    def gain_db(freq):
        fx = create_effect(EffectConfig(id="graphic_eq"), track=False)
        x = _tone(freq)
        return _level_db(fx.process(x, theta)) - _level_db(x)

    # 2. Act
    at_center, far_away = gain_db(fc), gain_db(8.0 * fc)

    # 3. Assert
    assert at_center == pytest.approx(12.0, abs=0.1)
    assert abs(far_away) < 1.0


def test_low_tone_stays_in_the_low_band():
    """
    A 100 Hz tone with splits at 200/1000/5000 Hz leaves under 1% of its energy in the upper bands.
    """
    # 1. Arrange
    bank = CrossoverBank(22050)
    bank.configure([200.0, 1000.0, 5000.0])

    # 2. Act
    bands = bank.split(_tone(100.0))

    # 3. Assert
    energy = [float(np.sum(b[len(b) // 2:] ** 2)) for b in bands]
    assert all(e < 0.01 * energy[0] for e in energy[1:]), energy
