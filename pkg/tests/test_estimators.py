import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanadapt.errors import DegenerateInputError
from chanadapt.estimators import (EstimateGrid, linear_interpolate, ls_estimate,
                                  mean_nmse_db, minmax_denormalize,
                                  minmax_normalize, nmse, nmse_db)
from chanadapt.grids import GridConfig, PilotConfig, map_pilots
from chanadapt.link import NoiseSpec, add_awgn, freq_domain_oracle

GRID = GridConfig(num_subcarriers=64, num_symbols=14, scs_khz=30,
                  carrier_hz=3.4e9, cp_len=8)
PILOTS = PilotConfig(dmrs_symbol_indices=(2, 11))
X, POSITIONS = map_pilots(GRID, PILOTS)


def random_channel(rng):
    h = rng.normal(size=(64, 1)) + 1j * rng.normal(size=(64, 1))
    return np.tile(h, (1, 14))


class TestLsEstimate:
    def test_exact_at_pilots_noiseless(self):
        rng = np.random.default_rng(0)
        h = random_channel(rng)
        y = freq_domain_oracle(X, h)
        est = ls_estimate(y, X, POSITIONS)
        ks = [p[0] for p in POSITIONS]
        ms = [p[1] for p in POSITIONS]
        assert np.max(np.abs(est.values[ks, ms] - h[ks, ms])) < 1e-12
        mask = np.ones_like(h, dtype=bool)
        mask[ks, ms] = False
        assert np.all(est.values[mask] == 0)
        assert est.kind == "ls"

    def test_zero_observation_gives_zero(self):
        est = ls_estimate(np.zeros_like(X), X, POSITIONS)
        assert np.all(est.values == 0)

    def test_noise_variance_preserved(self):
        # with unit-modulus pilots the estimation error variance equals the
        # per-element noise variance
        rng = np.random.default_rng(1)
        h = random_channel(rng)
        sigma2 = 0.25
        errs = []
        ks = [p[0] for p in POSITIONS]
        ms = [p[1] for p in POSITIONS]
        for seed in range(200):
            w = add_awgn(np.zeros_like(X), NoiseSpec(snr_db=0.0, seed=seed),
                         reference_power=sigma2)
            y = freq_domain_oracle(X, h, w)
            est = ls_estimate(y, X, POSITIONS)
            errs.append(np.abs(est.values[ks, ms] - h[ks, ms]) ** 2)
        assert np.mean(errs) == pytest.approx(sigma2, rel=0.02)

    def test_zero_pilot_rejected(self):
        x = X.copy()
        x[POSITIONS[0][0], POSITIONS[0][1]] = 0.0
        with pytest.raises(ValueError):
            ls_estimate(np.ones_like(x), x, POSITIONS)


class TestLinearInterpolate:
    def test_affine_channel_reconstructed_exactly(self):
        k = np.arange(64)
        h = ((0.03 * k - 1.0) + 1j * (2.0 - 0.01 * k))[:, None] * np.ones((1, 14))
        y = freq_domain_oracle(X, h)
        li = linear_interpolate(ls_estimate(y, X, POSITIONS), POSITIONS)
        interior = li.values[: 62, :]  # edge extrapolation is nearest, not affine
        assert np.max(np.abs(interior - h[:62, :])) < 1e-12
        assert li.kind == "li"

    def test_flat_channel_exact_everywhere(self):
        h = np.full((64, 14), 0.7 - 0.2j)
        y = freq_domain_oracle(X, h)
        li = linear_interpolate(ls_estimate(y, X, POSITIONS), POSITIONS)
        assert np.max(np.abs(li.values - h)) < 1e-12

    def test_single_pilot_symbol_copies_across_time(self):
        pilots = PilotConfig(dmrs_symbol_indices=(3,))
        x, positions = map_pilots(GRID, pilots)
        rng = np.random.default_rng(2)
        h = random_channel(rng)
        y = freq_domain_oracle(x, h)
        li = linear_interpolate(ls_estimate(y, x, positions), positions)
        for m in range(14):
            np.testing.assert_array_equal(li.values[:, m], li.values[:, 3])

    def test_interpolation_stays_in_anchor_hull(self):
        rng = np.random.default_rng(3)
        h = random_channel(rng)
        y = freq_domain_oracle(X, h)
        ls = ls_estimate(y, X, POSITIONS)
        li = linear_interpolate(ls, POSITIONS)
        pilot_ks = np.array(sorted({p[0] for p in POSITIONS}))
        col = li.values[:, 2]
        anchors = ls.values[pilot_ks, 2]
        for k in range(63):
            left = anchors[min(k // 2, len(anchors) - 1)]
            right = anchors[min(k // 2 + 1, len(anchors) - 1)]
            lo, hi = min(left.real, right.real), max(left.real, right.real)
            assert lo - 1e-12 <= col[k].real <= hi + 1e-12

    def test_requires_ls_kind(self):
        bogus = EstimateGrid(values=np.zeros((64, 14), dtype=complex), kind="li")
        with pytest.raises(ValueError):
            linear_interpolate(bogus, POSITIONS)


class TestMinMax:
    def test_known_range(self):
        g = np.array([[0.0 + 1j, 2.0 + 0j]])  # pooled range [0, 2]
        n, state = minmax_normalize(g)
        assert state.min_val == 0.0 and state.max_val == 2.0
        np.testing.assert_allclose(n, np.array([[-1 + 0j, 1 - 1j]]), atol=1e-15)

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        g = rng.normal(size=(32, 14)) + 1j * rng.normal(size=(32, 14))
        n, state = minmax_normalize(g)
        back = minmax_denormalize(n, state)
        assert np.max(np.abs(back - g)) < 1e-12

    def test_extremes_hit_exactly(self):
        rng = np.random.default_rng(5)
        g = rng.normal(size=(16, 7)) + 1j * rng.normal(size=(16, 7))
        n, _ = minmax_normalize(g)
        pooled = np.concatenate([n.real.ravel(), n.imag.ravel()])
        assert pooled.min() == -1.0
        assert pooled.max() == 1.0

    def test_monotone_affine_preserves_argmax(self):
        rng = np.random.default_rng(6)
        g = rng.normal(size=(16, 7)) + 1j * rng.normal(size=(16, 7))
        n, _ = minmax_normalize(g)
        assert np.argmax(n.real) == np.argmax(g.real)
        assert np.argmin(n.imag) == np.argmin(g.imag)

    def test_constant_grid_rejected(self):
        with pytest.raises(DegenerateInputError):
            minmax_normalize(np.full((4, 4), 0.3 + 0.3j))

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_round_trip_property(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
        n, state = minmax_normalize(g)
        assert np.max(np.abs(minmax_denormalize(n, state) - g)) < 1e-12


class TestNmse:
    def test_perfect_estimate(self):
        h = np.ones((4, 4), dtype=complex)
        assert nmse(h, h) == 0.0

    def test_zero_estimate(self):
        rng = np.random.default_rng(7)
        h = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert nmse(np.zeros_like(h), h) == pytest.approx(1.0, rel=1e-12)

    def test_double_estimate(self):
        rng = np.random.default_rng(8)
        h = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert nmse(2 * h, h) == pytest.approx(1.0, rel=1e-12)

    def test_scale_law(self):
        rng = np.random.default_rng(9)
        h = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        for a in [0.5, 1.5, -2.0]:
            assert nmse(a * h, h) == pytest.approx(abs(a - 1) ** 2, rel=1e-12)

    def test_db_variant(self):
        rng = np.random.default_rng(10)
        h = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert nmse_db(2 * h, h) == pytest.approx(0.0, abs=1e-9)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            nmse(np.ones((2, 2)), np.zeros((2, 2)))

    def test_dataset_mean_in_db(self):
        assert mean_nmse_db([0.1, 0.1]) == pytest.approx(-10.0, abs=1e-9)
