"""Hot numeric loops.

Each kernel exists twice: a numba ``@njit`` version and a plain numpy version.
The numba path is used when numba imports and ``CFMIMO_DISABLE_NUMBA`` is not
set to a truthy value; :func:`use_backend` switches at runtime (tests and the
benchmark use it).
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    HAS_NUMBA = False


def _env_disabled():
    return os.environ.get("CFMIMO_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------

def wrap_distances_numpy(a, b, side):
    """(len(a), len(b)) matrix of minimum-image distances on a torus."""
    diff = np.abs(a[:, None, :] - b[None, :, :])
    diff = np.minimum(diff, side - diff)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def gain_moments_numpy(g, w):
    """Accumulate moments of ``a[n, k, j] = sum_m g[n, m, k] * w[n, m, j]``.

    Returns ``(s1, s2, s4, s3d, sqd)``: sums over ``n`` of ``a``, ``|a|^2``,
    ``|a|^4`` (all K x K), and of ``|a|^2 a`` and ``a^2`` on the diagonal.
    """
    a = np.matmul(np.swapaxes(g, 1, 2), w)
    p = a.real * a.real + a.imag * a.imag
    d = np.diagonal(a, axis1=1, axis2=2)
    pd = np.diagonal(p, axis1=1, axis2=2)
    return (
        a.sum(axis=0),
        p.sum(axis=0),
        (p * p).sum(axis=0),
        (pd * d).sum(axis=0),
        (d * d).sum(axis=0),
    )


def fading_moments_numpy(g, noise, seqs, c, root_coeffs, snr, normalized, floor):
    """Pilot reception, MMSE estimation, precoding and :func:`gain_moments`
    for one block of draws.

    ``g`` is N x M x K channels, ``noise`` N x M x tau pilot noise, ``seqs``
    the K x tau per-user pilots.  ``normalized`` selects the phase-only
    precoder; ``floor`` bounds ``|g_hat|`` away from zero.
    """
    y = np.sqrt(snr) * (g @ seqs) + noise
    g_hat = c * (y @ seqs.conj().T)
    if normalized:
        w = root_coeffs * (g_hat.conj() / np.maximum(np.abs(g_hat), floor))
    else:
        w = root_coeffs * g_hat.conj()
    return gain_moments_numpy(g, w)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def wrap_distances_numba(a, b, side):
        out = np.empty((a.shape[0], b.shape[0]))
        for i in range(a.shape[0]):
            for j in range(b.shape[0]):
                dx = abs(a[i, 0] - b[j, 0])
                dy = abs(a[i, 1] - b[j, 1])
                dx = min(dx, side - dx)
                dy = min(dy, side - dy)
                out[i, j] = np.sqrt(dx * dx + dy * dy)
        return out

    @njit(cache=True, nogil=True)
    def gain_moments_numba(g, w):
        n_draws, n_ap, n_user = g.shape
        s1 = np.zeros((n_user, n_user), dtype=np.complex128)
        s2 = np.zeros((n_user, n_user))
        s4 = np.zeros((n_user, n_user))
        s3d = np.zeros(n_user, dtype=np.complex128)
        sqd = np.zeros(n_user, dtype=np.complex128)
        for n in range(n_draws):
            # BLAS does the contraction; the moment sums are fused here
            a = np.dot(np.ascontiguousarray(g[n].T), w[n])
            for k in range(n_user):
                for j in range(n_user):
                    acc = a[k, j]
                    p = acc.real * acc.real + acc.imag * acc.imag
                    s1[k, j] += acc
                    s2[k, j] += p
                    s4[k, j] += p * p
                acc = a[k, k]
                p = acc.real * acc.real + acc.imag * acc.imag
                s3d[k] += p * acc
                sqd[k] += acc * acc
        return s1, s2, s4, s3d, sqd

    @njit(cache=True, nogil=True)
    def fading_moments_numba(g, noise, seqs, c, root_coeffs, snr, normalized, floor):
        n_draws, n_ap, n_user = g.shape
        tau = seqs.shape[1]
        flat = g.reshape(n_draws * n_ap, n_user)
        y = np.sqrt(snr) * np.dot(flat, seqs) + noise.reshape(n_draws * n_ap, tau)
        proj = np.dot(y, np.ascontiguousarray(seqs.conj().T))
        w = np.empty((n_draws, n_ap, n_user), dtype=np.complex128)
        for n in range(n_draws):
            for m in range(n_ap):
                row = n * n_ap + m
                for k in range(n_user):
                    est = c[m, k] * proj[row, k]
                    if normalized:
                        mag = max(abs(est), floor)
                        w[n, m, k] = root_coeffs[m, k] * est.conjugate() / mag
                    else:
                        w[n, m, k] = root_coeffs[m, k] * est.conjugate()
        return gain_moments_numba(g, w)

else:  # pragma: no cover
    wrap_distances_numba = wrap_distances_numpy
    gain_moments_numba = gain_moments_numpy
    fading_moments_numba = fading_moments_numpy


_BACKENDS = {
    "numpy": {
        "wrap_distances": wrap_distances_numpy,
        "gain_moments": gain_moments_numpy,
        "fading_moments": fading_moments_numpy,
    },
    "numba": {
        "wrap_distances": wrap_distances_numba,
        "gain_moments": gain_moments_numba,
        "fading_moments": fading_moments_numba,
    },
}

_active = "numba" if HAS_NUMBA and not _env_disabled() else "numpy"


def backend():
    return _active


def use_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _active = _active, name
    return prev


def wrap_distances(a, b, side):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return _BACKENDS[_active]["wrap_distances"](a, b, float(side))


def gain_moments(g, w):
    g = np.ascontiguousarray(g, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    return _BACKENDS[_active]["gain_moments"](g, w)


def fading_moments(g, noise, seqs, c, root_coeffs, snr, normalized, floor):
    as_c = lambda x: np.ascontiguousarray(x, dtype=np.complex128)
    as_f = lambda x: np.ascontiguousarray(x, dtype=np.float64)
    return _BACKENDS[_active]["fading_moments"](
        as_c(g), as_c(noise), as_c(seqs), as_f(c), as_f(root_coeffs),
        float(snr), bool(normalized), float(floor),
    )
