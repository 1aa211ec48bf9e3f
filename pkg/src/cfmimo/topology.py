"""Network geometry on a wrap-around square, path loss and shadowing."""

from dataclasses import dataclass

import numpy as np

from . import kernels

MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class NetworkRealization:
    """AP/user positions and the large-scale fading they induce.

    ``pathloss_db``, ``shadow_db`` and ``beta`` are M x K; ``beta`` is linear.
    The latter three are ``None`` for a placement that has not been through
    :func:`large_scale_fading` yet.
    """

    ap_positions: np.ndarray
    user_positions: np.ndarray
    area_side: float
    pathloss_db: np.ndarray | None = None
    shadow_db: np.ndarray | None = None
    beta: np.ndarray | None = None

    @property
    def num_aps(self):
        return self.ap_positions.shape[0]

    @property
    def num_users(self):
        return self.user_positions.shape[0]


def place_network(config, rng):
    """Drop M APs and K users uniformly at random in ``[0, area_side)^2``."""
    side = config.area_side
    aps = rng.uniform(0.0, side, size=(config.num_aps, 2))
    users = rng.uniform(0.0, side, size=(config.num_users, 2))
    # uniform() may return the upper bound after rounding
    aps[aps >= side] = 0.0
    users[users >= side] = 0.0
    return NetworkRealization(aps, users, float(side))


def _check_in_region(points, side):
    points = np.asarray(points, dtype=float)
    if np.any(points < 0) or np.any(points >= side):
        raise ValueError(f"points must lie in [0, {side})^2")
    return points


def wrap_distance(p, q, area_side):
    """Shortest distance between ``p`` and ``q`` over the original square and
    its eight neighbouring replicas."""
    p = _check_in_region(p, area_side)
    q = _check_in_region(q, area_side)
    return float(kernels.wrap_distances(p.reshape(1, 2), q.reshape(1, 2), area_side)[0, 0])


def wrap_distance_matrix(a, b, area_side):
    """M x K wrap-around distances between point sets ``a`` and ``b``."""
    a = _check_in_region(a, area_side)
    b = _check_in_region(b, area_side)
    return kernels.wrap_distances(a, b, area_side)


def path_loss_db(d, config):
    """Three-slope path loss in dB (negative numbers; larger is stronger).

    ``-L - 35 log10(d)`` beyond ``d1``, ``-L - 15 log10(d1) - 20 log10(d)``
    between ``d0`` and ``d1`` and flat below ``d0``.  Distances below 1 m are
    clamped.  Works elementwise on arrays.
    """
    d0, d1 = config.pathloss_breakpoints
    L = config.pathloss_const_db
    d = np.maximum(np.asarray(d, dtype=float), MIN_DISTANCE_M)
    far = -L - 35.0 * np.log10(d)
    mid = -L - 15.0 * np.log10(d1) - 20.0 * np.log10(d)
    near = -L - 15.0 * np.log10(d1) - 20.0 * np.log10(d0)
    out = np.where(d > d1, far, np.where(d > d0, mid, near))
    return out if out.ndim else float(out)


def large_scale_fading(positions, config, rng):
    """Attach path loss, i.i.d. log-normal shadowing and ``beta`` to a placement."""
    dist = wrap_distance_matrix(positions.ap_positions, positions.user_positions, config.area_side)
    pl = path_loss_db(dist, config)
    shadow = config.shadow_sigma_db * rng.standard_normal(pl.shape)
    beta = 10.0 ** ((pl + shadow) / 10.0)
    return NetworkRealization(
        positions.ap_positions,
        positions.user_positions,
        positions.area_side,
        pathloss_db=pl,
        shadow_db=shadow,
        beta=beta,
    )
