"""Power coefficients and closed-form SINR terms for both conjugate precoders.

``normalized`` is the phase-only precoder ``conj(g_hat)/|g_hat|`` under a
short-term power constraint (coefficients ``eta``); ``conventional`` is the
plain ``conj(g_hat)`` precoder under a long-term constraint (coefficients
``mu``).  All term functions return normalized powers (noise variance 1).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

PI_4 = math.pi / 4
FOUR_PI = 4 / math.pi


class Scheme(str, Enum):
    NORMALIZED = "normalized"
    CONVENTIONAL = "conventional"


@dataclass(frozen=True)
class PowerAllocation:
    scheme: Scheme
    coeffs: np.ndarray

    def spent_power(self, gamma):
        """Per-(AP, user) share of the AP power budget."""
        if self.scheme is Scheme.NORMALIZED:
            return self.coeffs
        return self.coeffs * gamma

    def check(self, gamma, tol=1e-12):
        if np.any(self.coeffs < 0):
            raise ValueError("power coefficients must be non-negative")
        load = self.spent_power(gamma).sum(axis=1)
        if np.any(load > 1 + tol):
            raise ValueError(f"per-AP power constraint violated (max load {load.max()!r})")
        return self


@dataclass(frozen=True)
class RateBreakdown:
    """Per-user SINR terms.

    ``ui[k, j]`` is the interference user ``j``'s stream causes at user ``k``;
    the diagonal is zero.
    """

    ds_sq: np.ndarray
    bu: np.ndarray
    ui: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray

    @property
    def ui_total(self):
        return self.ui.sum(axis=1)

    def overhead_adjusted(self, tau_up, tau):
        return (1.0 - tau_up / tau) * self.rate


def full_power_coeffs(gamma, scheme):
    """Full-power coefficients giving both schemes the same per-user powers.

    normalized:   eta_mk = gamma_mk / sum_k' gamma_mk'
    conventional: mu_mk  = 1 / sum_k' gamma_mk'
    """
    scheme = Scheme(scheme)
    gamma = np.asarray(gamma, dtype=float)
    row = gamma.sum(axis=1, keepdims=True)
    if np.any(row <= 0):
        raise ValueError("every AP needs at least one positive gamma")
    if scheme is Scheme.NORMALIZED:
        coeffs = gamma / row
    else:
        coeffs = np.broadcast_to(1.0 / row, gamma.shape).copy()
    return PowerAllocation(scheme, coeffs)


def _require(alloc, scheme):
    scheme = Scheme(scheme) if scheme is not None else alloc.scheme
    if alloc.scheme is not scheme:
        raise ValueError(f"allocation is for {alloc.scheme.value}, not {scheme.value}")
    return scheme


def ds_term(alloc, gamma, rho_d, scheme=None):
    """|DS_k|^2 for every user."""
    scheme = _require(alloc, scheme)
    if scheme is Scheme.NORMALIZED:
        return rho_d * PI_4 * np.sqrt(alloc.coeffs * gamma).sum(axis=0) ** 2
    return rho_d * (np.sqrt(alloc.coeffs) * gamma).sum(axis=0) ** 2


def bu_term(alloc, beta, gamma, rho_d, scheme=None):
    """E{|BU_k|^2}: variance of the effective gain around its mean."""
    scheme = _require(alloc, scheme)
    if scheme is Scheme.NORMALIZED:
        return rho_d * (alloc.coeffs * (beta - PI_4 * gamma)).sum(axis=0)
    return rho_d * (alloc.coeffs * beta * gamma).sum(axis=0)


def _cross_sum(v):
    # sum_m sum_{n != m} v_m v_n over axis 0
    return v.sum(axis=0) ** 2 - (v * v).sum(axis=0)


def ui_term(alloc, beta, gamma, gram_sq, rho_d, scheme=None):
    """K x K matrix of E{|UI_kk'|^2} (zero diagonal).

    For the normalized scheme this is the first-order approximation of the
    coherent part; for the conventional scheme the expression is exact.
    """
    scheme = _require(alloc, scheme)
    coeffs = alloc.coeffs
    # ratio[m, k, j] = beta_mk / beta_mj
    ratio = beta[:, :, None] / beta[:, None, :]
    if scheme is Scheme.NORMALIZED:
        v = np.sqrt(coeffs * gamma)[:, None, :] * ratio
        coherent = FOUR_PI * gram_sq * _cross_sum(v)
        noncoherent = beta.T @ coeffs
    else:
        v = (np.sqrt(coeffs) * gamma)[:, None, :] * ratio
        coherent = gram_sq * v.sum(axis=0) ** 2
        noncoherent = beta.T @ (coeffs * gamma)
    ui = rho_d * (coherent + noncoherent)
    np.fill_diagonal(ui, 0.0)
    return ui


def assemble(ds_sq, bu, ui):
    """SINR and rate (bit/s/Hz) from the three term groups."""
    ui = np.array(ui, dtype=float, copy=True)
    np.fill_diagonal(ui, 0.0)
    sinr = ds_sq / (bu + ui.sum(axis=1) + 1.0)
    return RateBreakdown(ds_sq, bu, ui, sinr, np.log2(1.0 + sinr))


def rate_closed_form(beta, gamma, gram_sq, alloc, rho_d, scheme=None):
    scheme = _require(alloc, scheme)
    return assemble(
        ds_term(alloc, gamma, rho_d, scheme),
        bu_term(alloc, beta, gamma, rho_d, scheme),
        ui_term(alloc, beta, gamma, gram_sq, rho_d, scheme),
    )


def normalized_rate_denominator(beta, gamma, gram_sq, eta, rho_d):
    """SINR denominator of the normalized-scheme rate written in one piece,
    with the noncoherent sum running over every user and the desired user's
    coherent power subtracted back out.  Used as a cross-check on
    :func:`rate_closed_form`."""
    ratio = beta[:, :, None] / beta[:, None, :]
    v = np.sqrt(eta * gamma)[:, None, :] * ratio
    coherent = FOUR_PI * gram_sq * _cross_sum(v)
    np.fill_diagonal(coherent, 0.0)
    total_noncoherent = (beta * eta.sum(axis=1, keepdims=True)).sum(axis=0)
    self_term = PI_4 * (eta * gamma).sum(axis=0)
    return rho_d * coherent.sum(axis=1) + rho_d * total_noncoherent - rho_d * self_term + 1.0
