import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmimo.config import resolve_config
from cfmimo.topology import (
    large_scale_fading,
    path_loss_db,
    place_network,
    wrap_distance,
    wrap_distance_matrix,
)

SIDE = 1000.0


def brute_wrap(p, q, side):
    """Minimum over the square and its eight shifted copies."""
    best = math.inf
    for dx in (-side, 0.0, side):
        for dy in (-side, 0.0, side):
            best = min(best, math.hypot(p[0] - q[0] - dx, p[1] - q[1] - dy))
    return best


coords = st.floats(min_value=0.0, max_value=SIDE, exclude_max=True)
points = st.tuples(coords, coords)


def test_wrap_distance_across_the_corner(backend):
    assert wrap_distance((10, 10), (990, 990), SIDE) == pytest.approx(math.hypot(20, 20))
    assert wrap_distance((10, 10), (990, 990), SIDE) == pytest.approx(28.284, abs=1e-3)


def test_wrap_distance_identity(backend):
    assert wrap_distance((123.4, 567.8), (123.4, 567.8), SIDE) == 0.0


def test_wrap_distance_rejects_points_outside():
    with pytest.raises(ValueError):
        wrap_distance((-1, 5), (5, 5), SIDE)
    with pytest.raises(ValueError):
        wrap_distance((5, 5), (5, SIDE), SIDE)


def test_wrap_matches_brute_force_on_random_pairs(backend):
    rng = np.random.default_rng(0)
    a = rng.uniform(0, SIDE, (100, 2))
    b = rng.uniform(0, SIDE, (100, 2))
    d = wrap_distance_matrix(a, b, SIDE)
    plain = np.linalg.norm(a[:, None] - b[None], axis=-1)
    assert np.all(d <= plain + 1e-9)
    assert np.all(d <= SIDE * math.sqrt(2) / 2 + 1e-9)
    for i in range(0, 100, 7):
        for j in range(0, 100, 11):
            assert d[i, j] == pytest.approx(brute_wrap(a[i], b[j], SIDE), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_wrap_symmetry(p, q):
    assert wrap_distance(p, q, SIDE) == pytest.approx(wrap_distance(q, p, SIDE), abs=1e-9)
    assert wrap_distance(p, q, SIDE) == pytest.approx(brute_wrap(p, q, SIDE), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(points, min_size=2, max_size=6), points)
def test_translation_invariance(pts, shift):
    pts = np.array(pts)
    moved = (pts + np.array(shift)) % SIDE
    moved[moved >= SIDE] = 0.0
    d0 = np.sort(wrap_distance_matrix(pts, pts, SIDE).ravel())
    d1 = np.sort(wrap_distance_matrix(moved, moved, SIDE).ravel())
    np.testing.assert_allclose(d0, d1, atol=1e-7)


def test_placement_support_and_determinism():
    cfg = resolve_config(overrides={"num_aps": 2, "num_users": 1})
    a = place_network(cfg, np.random.default_rng(3))
    b = place_network(cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(a.ap_positions, b.ap_positions)
    np.testing.assert_array_equal(a.user_positions, b.user_positions)
    for pos in (a.ap_positions, a.user_positions):
        assert np.all((pos >= 0) & (pos < SIDE))


def test_placement_is_uniform_on_average():
    cfg = resolve_config(overrides={"num_aps": 100, "num_users": 40})
    rng = np.random.default_rng(11)
    draws = 10_000
    means = np.array([place_network(cfg, rng).ap_positions[0] for _ in range(draws)])
    # one AP coordinate per draw: U(0, side) has std side / sqrt(12)
    se = SIDE / math.sqrt(12) / math.sqrt(draws)
    assert np.all(np.abs(means.mean(axis=0) - SIDE / 2) < 3 * se)


def test_path_loss_continuity_at_breakpoints():
    cfg = resolve_config()
    d0, d1 = cfg.pathloss_breakpoints
    L = cfg.pathloss_const_db
    # each branch evaluated at its boundary
    assert -L - 35 * math.log10(d1) == pytest.approx(-L - 15 * math.log10(d1) - 20 * math.log10(d1))
    assert path_loss_db(d1, cfg) == pytest.approx(-L - 35 * math.log10(d1))
    assert path_loss_db(d1 * (1 + 1e-12), cfg) == pytest.approx(path_loss_db(d1, cfg))
    assert path_loss_db(d0 * (1 + 1e-12), cfg) == pytest.approx(path_loss_db(d0, cfg))
    assert path_loss_db(d0 / 2, cfg) == path_loss_db(d0, cfg)


def test_path_loss_at_100m():
    cfg = resolve_config()
    assert path_loss_db(100.0, cfg) == pytest.approx(-cfg.pathloss_const_db - 35 * math.log10(100))
    # same thing as the km-referenced Hata form: -140.7 - 35 log10(0.1)
    assert path_loss_db(100.0, cfg) == pytest.approx(-140.715 + 35.0, abs=0.01)


def test_path_loss_floor_and_monotonicity():
    cfg = resolve_config()
    assert path_loss_db(0.0, cfg) == path_loss_db(1.0, cfg)
    d = np.linspace(cfg.pathloss_breakpoints[0], 2000, 5000)
    assert np.all(np.diff(path_loss_db(d, cfg)) <= 0)


def test_large_scale_fading_without_shadowing(rng):
    cfg = resolve_config(overrides={"shadow_sigma_db": 0.0})
    net = large_scale_fading(place_network(cfg, rng), cfg, rng)
    np.testing.assert_array_equal(net.beta, 10 ** (net.pathloss_db / 10))


def test_beta_combines_path_loss_and_shadowing(rng):
    cfg = resolve_config()
    net = large_scale_fading(place_network(cfg, rng), cfg, rng)
    assert net.beta.shape == (100, 40)
    assert np.all(net.beta > 0) and np.all(np.isfinite(net.beta))
    np.testing.assert_allclose(net.beta, 10 ** ((net.pathloss_db + net.shadow_db) / 10), rtol=1e-14)


def test_large_scale_fading_is_reproducible():
    cfg = resolve_config()
    nets = []
    for _ in range(2):
        r = np.random.default_rng(99)
        nets.append(large_scale_fading(place_network(cfg, r), cfg, r))
    np.testing.assert_array_equal(nets[0].beta, nets[1].beta)


def test_shadowing_spread():
    cfg = resolve_config(overrides={"num_aps": 400, "num_users": 250})
    rng = np.random.default_rng(5)
    net = large_scale_fading(place_network(cfg, rng), cfg, rng)
    sample = net.shadow_db.ravel()
    assert sample.size >= 1e5
    assert sample.std(ddof=1) == pytest.approx(cfg.shadow_sigma_db, rel=0.01)
