"""Energy normalization, SNR accounting and AWGN determinism tests."""

import math

import numpy as np
import pytest

from deepctc import channel as ch


def test_normalize_unit_power_input_unchanged():
    assert np.allclose(ch.normalize_energy(np.array([1.0, 1.0, 1.0, 1.0])), [1, 1, 1, 1])


def test_normalize_scales_to_unit_average_power():
    out = ch.normalize_energy(np.array([3.0, 0.0, 0.0, 0.0]))
    assert np.allclose(out, [2.0, 0.0, 0.0, 0.0])


def test_normalize_rejects_degenerate():
    with pytest.raises(ch.DegenerateSignalError):
        ch.normalize_energy(np.array([0.0, 0.0]))


@pytest.mark.parametrize("seed", range(4))
def test_normalize_energy_invariant_and_scale_invariance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    x = rng.normal(size=n)
    out = ch.normalize_energy(x)
    assert abs(float(out @ out) - n) <= 1e-9 * n
    for c in (1e-6, 0.5, 3.0, 1e6):
        assert np.max(np.abs(ch.normalize_energy(c * x) - out)) <= 1e-12 * max(1.0, np.max(np.abs(out)))


def test_normalize_rows_matches_single():
    rng = np.random.default_rng(7)
    z = rng.normal(size=(5, 8))
    out, _ = ch.normalize_energy_rows(z)
    for k in range(5):
        assert np.allclose(out[k], ch.normalize_energy(z[k]))


def test_normalize_rows_backward_matches_finite_differences():
    rng = np.random.default_rng(11)
    z = rng.normal(size=(2, 6))
    w = rng.normal(size=(2, 6))  # loss = sum(w * normalize(z))
    out, cache = ch.normalize_energy_rows(z)
    analytic = ch.normalize_energy_rows_backward(w, cache)
    step = 1e-6
    for i in range(2):
        for j in range(6):
            z[i, j] += step
            up = float((ch.normalize_energy_rows(z)[0] * w).sum())
            z[i, j] -= 2 * step
            down = float((ch.normalize_energy_rows(z)[0] * w).sum())
            z[i, j] += step
            num = (up - down) / (2 * step)
            denom = max(abs(analytic[i, j]), abs(num), 1e-8)
            assert abs(analytic[i, j] - num) / denom <= 1e-6


def test_snr_zero_db_gives_unit_sigma():
    assert ch.snr_db_to_sigma(0.0) == 1.0


def test_snr_ten_db():
    assert ch.snr_db_to_sigma(10.0) ** 2 == pytest.approx(0.1, rel=1e-12)


def test_snr_three_db():
    assert ch.snr_db_to_sigma(3.0) ** 2 == pytest.approx(10 ** (-0.3), rel=1e-12)


@pytest.mark.parametrize("snr_db", [-17.3, -2.0, 0.0, 3.0, 8.0, 25.5])
def test_snr_round_trip(snr_db):
    assert ch.sigma_to_snr_db(ch.snr_db_to_sigma(snr_db)) == pytest.approx(snr_db, abs=1e-12)


def test_ebn0_conversion_round_trip():
    # 6 bits over 16 uses: SNR = Eb/N0 + 10 log10(2 * 6/16)
    snr = ch.ebn0_db_to_snr_db(5.0, bits=6, uses=16)
    assert snr == pytest.approx(5.0 + 10 * math.log10(0.75), abs=1e-12)
    assert ch.snr_db_to_ebn0_db(snr, bits=6, uses=16) == pytest.approx(5.0, abs=1e-12)


def test_awgn_sigma_zero_identity():
    rng = ch.substream(0, ch.STREAM_NOISE)
    x = np.array([1.0, -2.0, 3.0])
    out = ch.awgn_apply(x, 0.0, rng)
    assert np.array_equal(out, x)
    assert out is not x


def test_awgn_rejects_negative_sigma():
    with pytest.raises(ValueError):
        ch.awgn_apply(np.zeros(3), -1.0, ch.substream(0, 1))


def test_awgn_seeded_reproducibility():
    x = np.zeros(1000)
    a = ch.awgn_apply(x, 1.0, ch.substream(99, ch.STREAM_NOISE))
    b = ch.awgn_apply(x, 1.0, ch.substream(99, ch.STREAM_NOISE))
    c = ch.awgn_apply(x, 1.0, ch.substream(100, ch.STREAM_NOISE))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_awgn_sample_moments():
    # law-of-large-numbers bounds at 3 sigma for n = 1e6 draws
    n = 1_000_000
    noise = ch.awgn_apply(np.zeros(n), 1.0, ch.substream(4, ch.STREAM_NOISE))
    assert abs(noise.mean()) <= 0.005
    assert abs(noise.var() - 1.0) <= 0.01


def test_substreams_independent():
    a = ch.substream(1, 2).normal(size=8)
    b = ch.substream(1, 3).normal(size=8)
    assert not np.array_equal(a, b)


def test_channel_config_requires_finite_snr():
    with pytest.raises(ValueError):
        ch.ChannelConfig(snr_db=math.inf, seed=0)
    cfg = ch.ChannelConfig(snr_db=0.0, seed=0)
    assert cfg.sigma == 1.0
