import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cases import unit_cfg
from oracles import gamma_loop
from mimopc.errors import ConfigError, InputError
from mimopc.model import (
    DUMP_HEADER,
    FadingTensor,
    NetworkConfig,
    UserDrop,
    bs_grid,
    compute_gamma,
    config_from_mapping,
    drop_rows,
    dump_config,
    fading_from_drop,
    generate_drop,
    load_config,
    pathloss_db,
    wraparound_distance,
)

coord = st.floats(-2000, 3000, allow_nan=False)
point = st.tuples(coord, coord)


def brute_wraparound(p, q, side):
    return min(
        math.hypot(p[0] - q[0] - i * side, p[1] - q[1] - j * side)
        for i, j in itertools.product((-1, 0, 1), repeat=2)
    )


class TestWraparound:
    @pytest.mark.parametrize("q, expected", [
        ((0, 0), 0.0),
        ((900, 0), 100.0),
        ((600, 800), math.hypot(400, 200)),
    ])
    def test_examples(self, q, expected):
        assert wraparound_distance((0, 0), q, 1000) == pytest.approx(expected, abs=1e-9)

    @given(point, point)
    def test_symmetric(self, p, q):
        assert wraparound_distance(p, q, 1000.0) == pytest.approx(wraparound_distance(q, p, 1000.0), abs=1e-9)

    @given(st.tuples(st.floats(0, 999.9), st.floats(0, 999.9)), st.tuples(st.floats(0, 999.9), st.floats(0, 999.9)))
    def test_matches_nine_copies(self, p, q):
        d = wraparound_distance(p, q, 1000.0)
        assert d == pytest.approx(brute_wraparound(p, q, 1000.0), abs=1e-9)
        assert d <= 1000.0 * math.sqrt(2) / 2 + 1e-9

    def test_broadcasts(self):
        p = np.zeros((3, 2))
        q = np.array([[0, 0], [900, 0], [600, 800]])
        np.testing.assert_allclose(wraparound_distance(p, q, 1000), [0, 100, math.hypot(400, 200)])

    @pytest.mark.parametrize("bad", [(np.nan, 0), (0, np.inf)])
    def test_non_finite(self, bad):
        with pytest.raises(InputError):
            wraparound_distance((0, 0), bad, 1000)

    def test_bad_side(self):
        with pytest.raises(InputError):
            wraparound_distance((0, 0), (1, 1), 0)


class TestPathloss:
    cfg = NetworkConfig()

    @pytest.mark.parametrize("d, shadow, expected", [(1, 0, -35.0), (100, 0, -108.4), (100, 8, -100.4)])
    def test_examples(self, d, shadow, expected):
        assert pathloss_db(d, shadow, self.cfg) == pytest.approx(expected, abs=1e-12)

    @given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4), st.floats(-30, 30))
    def test_decreasing_in_distance(self, d1, d2, shadow):
        lo, hi = sorted((d1, d2))
        if hi < lo * (1 + 1e-9):
            return  # closer than the resolution of a dB value
        assert pathloss_db(lo, shadow, self.cfg) > pathloss_db(hi, shadow, self.cfg)

    @pytest.mark.parametrize("d", [0.0, -1.0])
    def test_non_positive_distance(self, d):
        with pytest.raises(InputError):
            pathloss_db(d, 0.0, self.cfg)


class TestDrop:
    def test_shape_and_positive(self):
        _, fading = generate_drop(NetworkConfig(), 3)
        assert fading.shape == (9, 9, 2)
        assert np.all(fading.beta > 0)

    def test_same_seed_same_tensor(self):
        cfg = NetworkConfig()
        a, fa = generate_drop(cfg, 11)
        b, fb = generate_drop(cfg, 11)
        assert fa.beta.tobytes() == fb.beta.tobytes()
        assert a.user_positions.tobytes() == b.user_positions.tobytes()

    def test_different_seeds_differ(self):
        cfg = NetworkConfig()
        assert not np.array_equal(generate_drop(cfg, 1)[1].beta, generate_drop(cfg, 2)[1].beta)

    @pytest.mark.parametrize("rng", ["pcg64", "philox", "sfc64"])
    def test_users_inside_own_square(self, rng):
        cfg = NetworkConfig(rng=rng)
        drop, _ = generate_drop(cfg, 5)
        half = cfg.area_side / 3 / 2
        off = drop.user_positions - drop.bs_positions[:, None, :]
        assert np.all(np.abs(off) <= half)
        assert np.all((drop.user_positions >= 0) & (drop.user_positions < cfg.area_side))

    def test_bs_grid_centres(self):
        np.testing.assert_allclose(bs_grid(NetworkConfig(num_cells=4, area_side=2.0)),
                                   [[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]])

    def test_not_square(self):
        with pytest.raises(ConfigError):
            generate_drop(NetworkConfig(num_cells=3), 0)

    def test_user_at_own_bs_gets_clamped_distance(self):
        cfg = NetworkConfig(num_cells=4, users_per_cell=1, shadow_std=0.0)
        bs = bs_grid(cfg)
        drop = UserDrop(bs, bs[:, None, :].copy(), np.zeros((4, 4, 1)), 0)
        beta = fading_from_drop(cfg, drop).beta
        expected = 10 ** ((-35 - 36.7 * math.log10(cfg.min_distance)) / 10)
        np.testing.assert_allclose(np.diagonal(beta[:, :, 0]), expected, rtol=1e-12)

    def test_strongest_association(self):
        cfg = NetworkConfig()
        for seed in range(5):
            beta = generate_drop(cfg, seed)[1].beta
            own = beta[np.arange(9), np.arange(9), :]
            assert np.all(own >= beta.max(axis=0))

    def test_iid_shadowing_without_association(self):
        cfg = NetworkConfig(association="none", shadow_std=8.0)
        shadows = np.concatenate([generate_drop(cfg, s)[0].shadow_db.ravel() for s in range(40)])
        assert abs(shadows.mean()) < 0.5
        assert shadows.std() == pytest.approx(8.0, rel=0.05)

    def test_dump_rows(self):
        cfg = NetworkConfig()
        drop, fading = generate_drop(cfg, 0)
        rows = list(drop_rows(cfg, drop, fading, compute_gamma(fading, cfg)))
        assert len(rows) == 9 * 9 * 2 and len(rows[0]) == len(DUMP_HEADER)


class TestGamma:
    def test_zero_beta(self):
        cfg = unit_cfg(L=2)
        beta = np.array([[[1.0], [0.0]], [[0.3], [1.0]]])
        assert compute_gamma(FadingTensor(beta), cfg).gamma[0, 1, 0] == 0.0

    def test_single_cell_half(self):
        cfg = unit_cfg(L=1)
        assert compute_gamma(FadingTensor(np.ones((1, 1, 1))), cfg).gamma[0, 0, 0] == pytest.approx(0.5)

    def test_two_copilot_cells_third(self):
        cfg = unit_cfg(L=2)
        assert compute_gamma(FadingTensor(np.ones((2, 2, 1))), cfg).gamma[0, 0, 0] == pytest.approx(1 / 3)

    def test_outside_reuse_set_zero(self):
        cfg = unit_cfg(L=2, pilot_reuse_sets=((0,), (1,)))
        g = compute_gamma(FadingTensor(np.ones((2, 2, 1))), cfg).gamma
        assert g[0, 1, 0] == 0.0 and g[0, 0, 0] == pytest.approx(0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.sampled_from([((0, 1, 2, 3),), ((0, 2), (1, 3)), ((0,), (1,), (2,), (3,))]))
    def test_matches_loop_and_bounded(self, seed, sets):
        rng = np.random.default_rng(seed)
        cfg = NetworkConfig(num_cells=4, users_per_cell=3, pilot_reuse_sets=sets)
        beta = 10 ** rng.uniform(-14, -8, size=(4, 4, 3))
        gamma = compute_gamma(FadingTensor(beta), cfg).gamma
        np.testing.assert_allclose(gamma, gamma_loop(beta, cfg.rho_ul, cfg.pilot_length, sets), rtol=1e-12)
        assert np.all(gamma >= 0) and np.all(gamma <= beta)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(1.0, 300.0), st.floats(1.0, 10.0))
    def test_own_cell_monotone_in_power(self, seed, p1, factor):
        rng = np.random.default_rng(seed)
        beta = FadingTensor(10 ** rng.uniform(-14, -8, size=(3, 3, 2)))
        sets = ((0,), (1,), (2,))
        lo = NetworkConfig(num_cells=3, ul_max_power=p1, pilot_reuse_sets=sets)
        hi = lo.replace(ul_max_power=p1 * factor)
        g_lo = np.diagonal(compute_gamma(beta, lo).gamma)
        g_hi = np.diagonal(compute_gamma(beta, hi).gamma)
        assert np.all(g_hi >= g_lo * (1 - 1e-12))

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            compute_gamma(FadingTensor(np.ones((2, 2, 1))), NetworkConfig())


class TestConfig:
    def test_defaults(self):
        cfg = NetworkConfig()
        assert cfg.pilot_length == 2
        assert cfg.prelog == pytest.approx(0.99)
        assert cfg.rho_ul == pytest.approx(200 / 10 ** (-9.4))
        assert cfg.rho_dl == pytest.approx(40e3 / 10 ** (-9.4))
        assert cfg.copilot_mask().all()

    @pytest.mark.parametrize("bad", [
        dict(num_cells=0), dict(users_per_cell=0), dict(antennas=0), dict(epsilon=0.0),
        dict(pilot_length=201), dict(area_side=-1.0), dict(ul_max_power=0.0), dict(dl_max_power=float("nan")),
        dict(pilot_reuse_sets=((0, 1),)), dict(rng="mt"), dict(association="nearest"), dict(shadow_std=-1.0),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            NetworkConfig(**bad)

    def test_replace_rederives_defaults(self):
        cfg = NetworkConfig().replace(users_per_cell=4, num_cells=4)
        assert cfg.pilot_length == 4 and cfg.pilot_reuse_sets == ((0, 1, 2, 3),)

    def test_replace_unknown(self):
        with pytest.raises(ConfigError, match="antenas"):
            NetworkConfig().replace(antenas=3)

    def test_mapping_unknown_key(self):
        with pytest.raises(ConfigError, match="antenas"):
            config_from_mapping({"antenas": "3"})

    def test_mapping_bad_value(self):
        with pytest.raises(ConfigError, match="antennas"):
            config_from_mapping({"antennas": "many"})

    def test_round_trip(self, tmp_path):
        cfg = NetworkConfig(num_cells=4, pilot_reuse_sets=((0, 3), (1, 2)), epsilon=0.01, rng="philox")
        path = tmp_path / "a.cfg"
        path.write_text(dump_config(cfg))
        assert load_config(path) == cfg

    def test_headerless_with_comments(self, tmp_path):
        path = tmp_path / "b.cfg"
        path.write_text("# tiny\nnum_cells = 1   # one cell\nusers_per_cell = 1\npilot_length = auto\n")
        cfg = load_config(path)
        assert (cfg.num_cells, cfg.users_per_cell, cfg.pilot_length) == (1, 1, 1)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("[network]\nnum_cells = 1\n[extra]\nx = 1\n")
        with pytest.raises(ConfigError, match="extra"):
            load_config(path)

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(ConfigError, match="nope.cfg"):
            load_config(tmp_path / "nope.cfg")

    def test_shipped_config_is_reference_scenario(self, default_cfg):
        assert default_cfg == NetworkConfig()
        assert (default_cfg.num_cells, default_cfg.users_per_cell, default_cfg.antennas) == (9, 2, 100)
        assert default_cfg.area_side == 1000 and default_cfg.bandwidth == 20e6 and default_cfg.coherence_block == 200
        assert default_cfg.shadow_std == 8 and default_cfg.noise_power == -94
        assert default_cfg.ul_max_power == 200 and default_cfg.dl_max_power == 40
        assert default_cfg.pilot_reuse_sets == (tuple(range(9)),)


def test_fading_tensor_validation():
    with pytest.raises(InputError):
        FadingTensor(np.ones((2, 3, 1)))
    with pytest.raises(InputError):
        FadingTensor(-np.ones((2, 2, 1)))
    f = FadingTensor(np.ones((2, 2, 1)))
    with pytest.raises(ValueError):
        f.beta[0, 0, 0] = 2.0
