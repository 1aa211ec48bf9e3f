"""Monte Carlo evaluation of the SINR terms from raw channel draws.

Nothing here uses the closed-form term expressions; the effective gains
``a[k, j] = sum_m sqrt(coef_mj) g_mk w_mj`` are simulated directly, with
``w = conj(g_hat)/|g_hat|`` (normalized) or ``conj(g_hat)`` (conventional), so
the results serve as an independent check on :mod:`cfmimo.precoding`.

Randomness is keyed on ``(base_seed, snapshot, stream, block)`` through
:class:`numpy.random.SeedSequence` and per-block moment sums are reduced in
block order, so results do not depend on the number of workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .precoding import Scheme, assemble, full_power_coeffs, rate_closed_form, ui_term
from .topology import large_scale_fading, place_network
from .training import (
    MAG_FLOOR,
    assign_pilots_orthogonal,
    assign_pilots_random,
    build_pilot_book,
    complex_normal,
    draw_channel,
    estimation_stats,
)

# stream ids inside one snapshot
_GEOMETRY, _FADING = 0, 1


@dataclass(frozen=True)
class TrialPlan:
    """How many snapshots / fading draws to run and from which seed.

    ``mc_snapshots`` is the number of leading snapshots that also get a Monte
    Carlo evaluation (``None`` means all of them).  ``block_size`` fixes the
    fading-block partition and is part of the random-stream layout.
    """

    num_snapshots: int = 200
    num_fadings: int = 10_000
    base_seed: int = 0
    mc_snapshots: int | None = 0
    block_size: int = 500

    def __post_init__(self):
        if self.num_snapshots < 1 or self.num_fadings < 1 or self.block_size < 1:
            raise ValueError("num_snapshots, num_fadings and block_size must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be non-negative")

    def runs_mc(self, index):
        return self.mc_snapshots is None or index < self.mc_snapshots


def substream(base_seed, *key):
    return np.random.SeedSequence(base_seed, spawn_key=tuple(int(k) for k in key))


def ordered_map(fn, items, workers=1):
    """``map`` that may run on threads but always returns in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class Snapshot:
    """One network realization with its pilot plan and estimation statistics."""

    config: object
    network: object
    pilots: object
    stats: object

    @property
    def beta(self):
        return self.network.beta

    @property
    def gamma(self):
        return self.stats.gamma

    def allocation(self, scheme):
        return full_power_coeffs(self.stats.gamma, scheme)

    def closed_form(self, scheme):
        return rate_closed_form(
            self.beta, self.gamma, self.pilots.gram_sq, self.allocation(scheme), self.config.rho_d
        )


def make_snapshot(config, rng, forced_orthogonal=False):
    """Place the network, draw shadowing, assign pilots and compute the
    estimation statistics."""
    net = large_scale_fading(place_network(config, rng), config, rng)
    book = build_pilot_book(config.training_len)
    if forced_orthogonal:
        pilots = assign_pilots_orthogonal(config.num_users, book)
    else:
        pilots = assign_pilots_random(config.num_users, book, rng)
    stats = estimation_stats(net.beta, pilots, config.training_len, config.rho_up)
    return Snapshot(config, net, pilots, stats)


@dataclass(frozen=True)
class McEstimate:
    """Sample moments of the effective gains and the SINR terms built from them.

    ``mean_gain[k, j]`` and ``mean_power[k, j]`` are the sample means of
    ``a_kj`` and ``|a_kj|^2``.  ``ui`` has a zero diagonal.
    """

    scheme: Scheme
    num_fadings: int
    mean_gain: np.ndarray
    mean_power: np.ndarray
    ds_sq: np.ndarray
    bu: np.ndarray
    ui: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    ds_stderr: np.ndarray
    bu_stderr: np.ndarray
    ui_stderr: np.ndarray
    rate_stderr: np.ndarray

    @property
    def ui_total(self):
        return self.ui.sum(axis=1)


def precoder_weights(g_hat, alloc):
    """``sqrt(coef_mj) * w_mj`` for a batch of estimates."""
    root = np.sqrt(alloc.coeffs)
    if alloc.scheme is Scheme.NORMALIZED:
        mag = np.maximum(np.abs(g_hat), MAG_FLOOR)
        return root * (g_hat.conj() / mag)
    return root * g_hat.conj()


def _block_moments(snapshot, alloc, seed_seq, size):
    cfg = snapshot.config
    rng = np.random.default_rng(seed_seq)
    # same draw order as draw_channel + estimate_channel
    g = draw_channel(snapshot.beta, rng, size)
    noise = complex_normal(rng, (size, cfg.num_aps, cfg.training_len))
    return kernels.fading_moments(
        g, noise, snapshot.pilots.sequences, snapshot.stats.c, np.sqrt(alloc.coeffs),
        cfg.training_len * cfg.rho_up, alloc.scheme is Scheme.NORMALIZED, MAG_FLOOR,
    )


def _block_sizes(num_fadings, block_size):
    full, rest = divmod(num_fadings, block_size)
    return [block_size] * full + ([rest] if rest else [])


def accumulate_moments(snapshot, alloc, num_fadings, base_seed, snapshot_index=0,
                       block_size=500, workers=1):
    """Raw moment sums of the effective gains over ``num_fadings`` draws."""
    sizes = _block_sizes(num_fadings, block_size)

    def run(b):
        return _block_moments(snapshot, alloc, substream(base_seed, snapshot_index, _FADING, b), sizes[b])

    parts = ordered_map(run, range(len(sizes)), workers)
    total = [np.array(x, copy=True) for x in parts[0]]
    for part in parts[1:]:
        for acc, x in zip(total, part):
            acc += x
    return total


def estimate_from_moments(sums, num_fadings, rho_d, scheme):
    """Turn raw moment sums into DS/BU/UI/rate estimates with standard errors.

    DS uses the squared sample mean, BU the unbiased sample variance and UI
    the sample second moment; standard errors come from the delta method.
    """
    s1, s2, s4, s3d, sqd = sums
    n = num_fadings
    if n < 2:
        raise ValueError("need at least two fading draws to estimate a variance")
    mean = s1 / n
    power = s2 / n
    fourth = s4 / n

    mu = np.diagonal(mean).copy()
    p = np.diagonal(power).copy()
    q = sqd / n
    t = s3d / n
    f = np.diagonal(fourth).copy()
    mu2 = np.abs(mu) ** 2

    ds = rho_d * mu2
    var_re = (p + q.real) / 2 - mu.real**2
    var_im = (p - q.real) / 2 - mu.imag**2
    cov = q.imag / 2 - mu.real * mu.imag
    var_ds = 4 * (mu.real**2 * var_re + mu.imag**2 * var_im + 2 * mu.real * mu.imag * cov) / n
    ds_se = rho_d * np.sqrt(np.maximum(var_ds, 0.0))

    var_a = (s2.diagonal() - n * mu2) / (n - 1)
    bu = rho_d * var_a
    # E|a - mu|^4 from raw moments
    centered4 = (
        f
        + 2 * (mu2 * p + (q * mu.conj() ** 2).real)
        + mu2**2
        - 4 * (t * mu.conj()).real
        + 2 * mu2 * p
        - 4 * mu2**2
    )
    bu_se = rho_d * np.sqrt(np.maximum(centered4 - var_a**2, 0.0) / n)

    ui = rho_d * power
    ui_se = rho_d * np.sqrt(np.maximum(fourth - power**2, 0.0) / n)
    np.fill_diagonal(ui, 0.0)
    np.fill_diagonal(ui_se, 0.0)

    br = assemble(ds, bu, ui)
    den = bu + ui.sum(axis=1) + 1.0
    var_sinr = (ds_se / den) ** 2 + (ds / den**2) ** 2 * (bu_se**2 + (ui_se**2).sum(axis=1))
    rate_se = np.sqrt(var_sinr) / ((1 + br.sinr) * math.log(2))

    return McEstimate(
        scheme=Scheme(scheme),
        num_fadings=n,
        mean_gain=mean,
        mean_power=power,
        ds_sq=br.ds_sq,
        bu=br.bu,
        ui=br.ui,
        sinr=br.sinr,
        rate=br.rate,
        ds_stderr=ds_se,
        bu_stderr=bu_se,
        ui_stderr=ui_se,
        rate_stderr=rate_se,
    )


def mc_effective_gains(snapshot, alloc, num_fadings, base_seed=0, snapshot_index=0,
                       block_size=500, workers=1):
    """Monte Carlo DS/BU/UI and rate for ``snapshot`` under ``alloc``.

    Each fading draw simulates the channel, the pilot phase and the MMSE
    estimates, then forms the effective gains seen by every user.
    """
    if num_fadings < 2:
        raise ValueError("need at least two fading draws to estimate a variance")
    sums = accumulate_moments(snapshot, alloc, num_fadings, base_seed, snapshot_index,
                              block_size, workers)
    return estimate_from_moments(sums, num_fadings, snapshot.config.rho_d, alloc.scheme)


@dataclass(frozen=True)
class UiGap:
    """Per-pair actual (simulated) vs approximate (closed-form) interference.

    Entries are K x K with zero diagonals; ``shared`` marks pairs whose pilots
    overlap.
    """

    actual: np.ndarray
    approx: np.ndarray
    gap: np.ndarray
    stderr: np.ndarray
    shared: np.ndarray

    def pairs(self, shared_only=False):
        mask = ~np.eye(self.actual.shape[0], dtype=bool)
        if shared_only:
            mask &= self.shared
        return self.actual[mask], self.approx[mask], self.gap[mask]


def mc_ui_approximation_gap(snapshot, alloc, num_fadings=10_000, base_seed=0, snapshot_index=0,
                            estimate=None, block_size=500, workers=1):
    if alloc.scheme is not Scheme.NORMALIZED:
        raise ValueError("the interference approximation concerns the normalized scheme")
    if estimate is None:
        estimate = mc_effective_gains(snapshot, alloc, num_fadings, base_seed, snapshot_index,
                                      block_size, workers)
    approx = ui_term(alloc, snapshot.beta, snapshot.gamma, snapshot.pilots.gram_sq,
                     snapshot.config.rho_d)
    shared = snapshot.pilots.gram_sq > 0
    np.fill_diagonal(shared, False)
    return UiGap(estimate.ui, approx, np.abs(estimate.ui - approx), estimate.ui_stderr, shared)


def empirical_cdf(samples):
    """Sorted samples paired with ``i/N``; an N x 2 array."""
    x = np.sort(np.asarray(samples, dtype=float).ravel(), kind="stable")
    if x.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    return np.column_stack([x, np.arange(1, x.size + 1) / x.size])


@dataclass
class SnapshotResult:
    index: int
    snapshot: Snapshot
    closed: dict = field(default_factory=dict)
    allocs: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)


@dataclass
class TrialResults:
    config: object
    plan: TrialPlan
    snapshots: list

    def closed_samples(self, scheme, quantity="rate"):
        """Per-user samples of a closed-form quantity stacked over snapshots."""
        scheme = Scheme(scheme)
        return np.concatenate([_per_user(r.closed[scheme], quantity) for r in self.snapshots])

    def mc_samples(self, scheme, quantity="rate"):
        scheme = Scheme(scheme)
        return np.concatenate(
            [_per_user(r.mc[scheme], quantity) for r in self.snapshots if scheme in r.mc]
        )


def _per_user(result, quantity):
    if quantity == "ui":
        return result.ui_total
    return getattr(result, quantity)


def run_snapshot(config, plan, index, schemes, mc_schemes=(), forced_orthogonal=False,
                 block_workers=1):
    rng = np.random.default_rng(substream(plan.base_seed, index, _GEOMETRY))
    snap = make_snapshot(config, rng, forced_orthogonal)
    res = SnapshotResult(index, snap)
    for scheme in schemes:
        scheme = Scheme(scheme)
        alloc = snap.allocation(scheme)
        res.allocs[scheme] = alloc
        res.closed[scheme] = snap.closed_form(scheme)
    if plan.runs_mc(index):
        for scheme in mc_schemes:
            scheme = Scheme(scheme)
            alloc = res.allocs.get(scheme) or snap.allocation(scheme)
            res.mc[scheme] = mc_effective_gains(snap, alloc, plan.num_fadings, plan.base_seed,
                                                index, plan.block_size, block_workers)
    return res


def run_trials(config, plan, schemes=(Scheme.NORMALIZED, Scheme.CONVENTIONAL), mc_schemes=(),
               forced_orthogonal=False, workers=1):
    """Closed-form rates for every snapshot plus Monte Carlo estimates for the
    snapshots selected by ``plan.mc_snapshots``.

    Snapshots are independent work units, optionally spread over ``workers``
    threads; the output is identical for any worker count.
    """
    if not config.is_resolved:
        raise ValueError("config must be resolved (see resolve_config)")
    schemes = tuple(Scheme(s) for s in schemes)
    mc_schemes = tuple(Scheme(s) for s in mc_schemes)

    def run(i):
        return run_snapshot(config, plan, i, schemes, mc_schemes, forced_orthogonal)

    return TrialResults(config, plan, ordered_map(run, range(plan.num_snapshots), workers))

