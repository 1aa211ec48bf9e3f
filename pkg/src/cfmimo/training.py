"""Uplink pilots and linear MMSE channel estimation."""

from dataclasses import dataclass

import numpy as np

# |g_hat| floor before dividing by it in the normalized precoder
MAG_FLOOR = 1e-30


def complex_normal(rng, shape):
    """i.i.d. CN(0, 1) samples."""
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    x = rng.standard_normal(shape + (2,))
    return x.view(np.complex128)[..., 0] * np.sqrt(0.5)


@dataclass(frozen=True)
class PilotPlan:
    """Pilot book (rows are unit-norm sequences), user -> pilot map and the
    K x K matrix of squared pilot overlaps ``|phi_k^H phi_k'|^2``."""

    book: np.ndarray
    assignment: np.ndarray
    gram_sq: np.ndarray

    @property
    def sequences(self):
        """K x tau_up matrix whose k-th row is user k's pilot."""
        return self.book[self.assignment]

    @property
    def tau_up(self):
        return self.book.shape[1]

    @property
    def num_users(self):
        return len(self.assignment)


@dataclass(frozen=True)
class EstimationStats:
    c: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class ChannelDraw:
    g: np.ndarray
    g_hat: np.ndarray

    @property
    def g_tilde(self):
        return self.g - self.g_hat


def build_pilot_book(tau_up, rng=None):
    """``tau_up`` orthonormal pilots of length ``tau_up``.

    The canonical basis is used unless ``rng`` is given, in which case the
    basis is rotated by a Haar-random unitary.
    """
    if tau_up < 1:
        raise ValueError("tau_up must be >= 1")
    book = np.eye(tau_up, dtype=np.complex128)
    if rng is not None:
        q, r = np.linalg.qr(complex_normal(rng, (tau_up, tau_up)))
        # fix the phases so the unitary is Haar-distributed
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        book = q.T.copy()
    return book


def _plan(book, assignment):
    seqs = book[assignment]
    gram_sq = np.abs(seqs.conj() @ seqs.T) ** 2
    np.fill_diagonal(gram_sq, 1.0)
    return PilotPlan(book, np.asarray(assignment, dtype=np.int64), gram_sq)


def assign_pilots_random(num_users, book, rng):
    """Each user independently picks a pilot uniformly at random (with replacement)."""
    return _plan(book, rng.integers(0, book.shape[0], size=num_users))


def assign_pilots_orthogonal(num_users, book):
    """Round-robin assignment; contamination-free when ``num_users <= tau_up``."""
    if num_users > book.shape[0]:
        raise ValueError(
            f"cannot give {num_users} users distinct pilots from a book of {book.shape[0]}"
        )
    return _plan(book, np.arange(num_users) % book.shape[0])


def pilot_plan_from_sequences(sequences):
    """Plan for arbitrary (unit-norm) per-user pilots, one row per user."""
    seqs = np.asarray(sequences, dtype=np.complex128)
    norms = np.linalg.norm(seqs, axis=1)
    if not np.allclose(norms, 1.0, atol=1e-12):
        raise ValueError("pilot sequences must have unit norm")
    return _plan(seqs, np.arange(seqs.shape[0]))


def estimation_stats(beta, plan, tau_up, rho_up):
    """MMSE coefficients ``c`` and estimate variances ``gamma`` (both M x K).

    c_mk = sqrt(tau rho) beta_mk / (tau rho sum_k' beta_mk' |phi_k^H phi_k'|^2 + 1)
    gamma_mk = sqrt(tau rho) beta_mk c_mk
    """
    beta = np.asarray(beta, dtype=float)
    snr = tau_up * rho_up
    denom = snr * (beta @ plan.gram_sq.T) + 1.0
    c = np.sqrt(snr) * beta / denom
    gamma = np.sqrt(snr) * beta * c
    return EstimationStats(c, gamma)


def draw_channel(beta, rng, size=None):
    """``g = sqrt(beta) h`` with h ~ CN(0, 1); ``size`` prepends batch dims."""
    beta = np.asarray(beta, dtype=float)
    lead = () if size is None else tuple(np.atleast_1d(size))
    return np.sqrt(beta) * complex_normal(rng, lead + beta.shape)


def estimate_channel(g, plan, tau_up, rho_up, stats, rng, noise=True):
    """Simulate pilot reception at every AP and form the MMSE estimates.

    ``g`` is M x K or N x M x K.  Each AP receives
    ``sqrt(tau rho) sum_k g_mk phi_k + w``, projects onto each user's pilot
    and scales by ``c_mk``.  ``noise=False`` drops ``w`` (used to probe the
    noiseless limit).
    """
    snr = tau_up * rho_up
    seqs = plan.sequences
    y = np.sqrt(snr) * (g @ seqs)
    if noise:
        y = y + complex_normal(rng, y.shape)
    projected = y @ seqs.conj().T
    return ChannelDraw(g, stats.c * projected)
