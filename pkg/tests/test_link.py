import numpy as np
import pytest

from chanadapt.channels import ChannelImpulse, grid_to_impulse
from chanadapt.grids import GridConfig, PilotConfig, map_pilots
from chanadapt.link import (NoiseSpec, add_awgn, apply_channel,
                            freq_domain_oracle, ofdm_demodulate, ofdm_modulate)

GRID = GridConfig(num_subcarriers=64, num_symbols=14, scs_khz=30,
                  carrier_hz=3.4e9, cp_len=8)


def random_grid(rng, grid=GRID):
    shape = (grid.num_subcarriers, grid.num_symbols)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def impulse_from_taps(tap_dict, grid=GRID, m=None):
    taps = np.zeros((grid.num_subcarriers, m or grid.num_symbols), dtype=complex)
    for n, v in tap_dict.items():
        taps[n, :] = v
    return ChannelImpulse(taps=taps, sample_rate_hz=grid.sample_rate_hz)


class TestModulate:
    def test_delta_gives_constant(self):
        x = np.zeros((64, 14), dtype=complex)
        x[0, :] = 1.0
        wf = ofdm_modulate(x, GRID)
        assert wf.shape == (72, 14)
        np.testing.assert_allclose(wf, np.full((72, 14), 1 / 64), atol=1e-15)

    def test_cyclic_prefix_copies_tail(self):
        rng = np.random.default_rng(0)
        wf = ofdm_modulate(random_grid(rng), GRID)
        np.testing.assert_array_equal(wf[:8, :], wf[64:, :])

    def test_parseval(self):
        rng = np.random.default_rng(1)
        x = random_grid(rng)
        wf = ofdm_modulate(x, GRID)[8:, :]  # body without prefix
        lhs = np.sum(np.abs(wf) ** 2, axis=0)
        rhs = np.sum(np.abs(x) ** 2, axis=0) / 64
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ofdm_modulate(np.zeros((8, 3)), GRID)


class TestApplyChannel:
    def test_identity_channel(self):
        rng = np.random.default_rng(2)
        tx = ofdm_modulate(random_grid(rng), GRID)
        rx = apply_channel(tx, impulse_from_taps({0: 1.0}), GRID)
        np.testing.assert_array_equal(rx, tx)

    def test_pure_delay_shifts_and_scales(self):
        rng = np.random.default_rng(3)
        tx = ofdm_modulate(random_grid(rng), GRID)
        rx = apply_channel(tx, impulse_from_taps({2: 0.5}), GRID)
        np.testing.assert_allclose(rx[2:, 0], 0.5 * tx[:-2, 0], atol=1e-15)
        assert np.all(rx[:2, 0] == 0)  # nothing precedes the first symbol
        # the head of symbol 1 receives the tail of symbol 0
        np.testing.assert_allclose(rx[:2, 1], 0.5 * tx[-2:, 0], atol=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        h = impulse_from_taps({0: 0.7, 3: 0.2 - 0.1j})
        tx1 = ofdm_modulate(random_grid(rng), GRID)
        tx2 = ofdm_modulate(random_grid(rng), GRID)
        a, b = 1.3 - 0.2j, -0.4 + 2.2j
        lhs = apply_channel(a * tx1 + b * tx2, h, GRID)
        rhs = a * apply_channel(tx1, h, GRID) + b * apply_channel(tx2, h, GRID)
        err = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
        assert err < 1e-10

    def test_too_many_taps_rejected(self):
        taps = np.zeros((65, 14), dtype=complex)
        h = ChannelImpulse(taps=taps, sample_rate_hz=GRID.sample_rate_hz)
        tx = np.zeros((72, 14), dtype=complex)
        with pytest.raises(ValueError):
            apply_channel(tx, h, GRID)


class TestAwgn:
    def test_infinite_snr_is_identity(self):
        rng = np.random.default_rng(5)
        tx = ofdm_modulate(random_grid(rng), GRID)
        out = add_awgn(tx, NoiseSpec(snr_db=np.inf, seed=0), reference_power=1.0)
        np.testing.assert_array_equal(out, tx)

    def test_noise_power_calibrated(self):
        zeros = np.zeros((1000, 1000), dtype=complex)
        out = add_awgn(zeros, NoiseSpec(snr_db=3.0, seed=1), reference_power=2.0)
        sigma2 = 2.0 / 10 ** 0.3
        measured = np.mean(np.abs(out) ** 2)
        assert measured == pytest.approx(sigma2, rel=0.01)

    def test_deterministic_per_seed(self):
        tx = np.zeros((72, 14), dtype=complex)
        a = add_awgn(tx, NoiseSpec(snr_db=0.0, seed=7), 1.0)
        b = add_awgn(tx, NoiseSpec(snr_db=0.0, seed=7), 1.0)
        c = add_awgn(tx, NoiseSpec(snr_db=0.0, seed=8), 1.0)
        np.testing.assert_array_equal(a, b)
        assert np.any(a != c)

    def test_bad_reference_power(self):
        with pytest.raises(ValueError):
            add_awgn(np.zeros((72, 14)), NoiseSpec(snr_db=0.0, seed=0), 0.0)


class TestDemodulate:
    def test_round_trip(self):
        rng = np.random.default_rng(6)
        x = random_grid(rng)
        y = ofdm_demodulate(ofdm_modulate(x, GRID), GRID)
        err = np.linalg.norm(y - x) / np.linalg.norm(x)
        assert err < 1e-10

    def test_closed_form_delay_response(self):
        rng = np.random.default_rng(7)
        x = random_grid(rng)
        tx = ofdm_modulate(x, GRID)
        rx = apply_channel(tx, impulse_from_taps({2: 0.5}), GRID)
        y = ofdm_demodulate(rx, GRID)
        k = np.arange(64)
        expected = x * (0.5 * np.exp(-1j * 4 * np.pi * k / 64))[:, None]
        err = np.linalg.norm(y - expected) / np.linalg.norm(expected)
        assert err < 1e-9

    def test_zero_in_zero_out(self):
        y = ofdm_demodulate(np.zeros((72, 14), dtype=complex), GRID)
        assert np.all(y == 0)


class TestFreqDomainOracle:
    def test_identity_channel_returns_input(self):
        rng = np.random.default_rng(8)
        x = random_grid(rng)
        np.testing.assert_array_equal(freq_domain_oracle(x, np.ones_like(x)), x)

    def test_zero_input_returns_noise(self):
        rng = np.random.default_rng(9)
        w = random_grid(rng)
        y = freq_domain_oracle(np.zeros_like(w), np.ones_like(w), w)
        np.testing.assert_array_equal(y, w)

    def test_pipeline_matches_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            x = random_grid(rng)
            n_taps = int(rng.integers(1, 8))  # all delays < cp_len
            taps = np.zeros((64, 14), dtype=complex)
            idx = rng.choice(8, size=n_taps, replace=False)
            taps[idx, :] = (rng.normal(size=(n_taps, 1))
                            + 1j * rng.normal(size=(n_taps, 1)))
            h_imp = ChannelImpulse(taps=taps, sample_rate_hz=GRID.sample_rate_hz)
            h_grid = np.fft.fft(taps, axis=0)
            rx = apply_channel(ofdm_modulate(x, GRID), h_imp, GRID)
            y = ofdm_demodulate(rx, GRID)
            ref = freq_domain_oracle(x, h_grid)
            err = np.linalg.norm(y - ref) / np.linalg.norm(ref)
            assert err < 1e-9


class TestSnrCalibration:
    def test_per_re_snr_within_tolerance(self):
        # measured per-resource-element SNR of the demodulated grid should
        # track the requested value once the reference power is the mean
        # pilot-site power divided by the DFT length
        grid = GRID
        pilots = PilotConfig(dmrs_symbol_indices=(2, 11))
        x, positions = map_pilots(grid, pilots)
        ks = [p[0] for p in positions]
        ms = [p[1] for p in positions]
        rng = np.random.default_rng(11)
        h_grid = (rng.normal(size=(64, 1)) + 1j * rng.normal(size=(64, 1)))
        h_grid = np.tile(h_grid, (1, 14))
        h_imp = grid_to_impulse(h_grid, grid.sample_rate_hz)
        h_imp.taps[8:, :] = 0.0  # keep the spread inside the prefix
        h_grid = np.fft.fft(h_imp.taps, axis=0)
        tx = ofdm_modulate(x, grid)
        rx0 = apply_channel(tx, h_imp, grid)
        y0 = ofdm_demodulate(rx0, grid)
        p_pilot = np.mean(np.abs(y0[ks, ms]) ** 2)
        snr_db = 5.0
        noise_energy = 0.0
        signal_energy = 0.0
        for slot in range(200):
            rx = add_awgn(rx0, NoiseSpec(snr_db=snr_db, seed=slot),
                          reference_power=p_pilot / 64)
            y = ofdm_demodulate(rx, grid)
            noise_energy += np.mean(np.abs(y[ks, ms] - y0[ks, ms]) ** 2)
            signal_energy += p_pilot
        measured = 10 * np.log10(signal_energy / noise_energy)
        assert abs(measured - snr_db) < 0.2
