import math

import numpy as np
import pytest

from cfmimo import kernels
from cfmimo.config import resolve_config
from cfmimo.montecarlo import make_snapshot


@pytest.fixture(params=["numpy", "numba"] if kernels.HAS_NUMBA else ["numpy"])
def backend(request):
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_snapshot():
    cfg = resolve_config(overrides={"num_aps": 4, "num_users": 3, "area_side": 200.0})
    return make_snapshot(cfg, np.random.default_rng(7))


def exact_normalized_ui(snapshot, eta):
    """E{|UI_kk'|^2} for the normalized precoder, exact for pilots that are
    either identical or orthogonal.

    With a shared pilot g_hat_mk = (beta_mk / beta_mk') g_hat_mk', so
    E{g_mk conj(g_hat_mk')/|g_hat_mk'|} = (beta_mk / beta_mk') E|g_hat_mk'|
    and E|g_hat| = sqrt(pi gamma) / 2 (Rayleigh mean).
    """
    beta, gamma, gram = snapshot.beta, snapshot.gamma, snapshot.pilots.gram_sq
    rho = snapshot.config.rho_d
    K = beta.shape[1]
    out = np.zeros((K, K))
    for k in range(K):
        for j in range(K):
            if j == k:
                continue
            mean = gram[k, j] * (beta[:, k] / beta[:, j]) * math.sqrt(math.pi) / 2 * np.sqrt(gamma[:, j])
            weighted = np.sqrt(eta[:, j]) * mean
            cross = weighted.sum() ** 2 - (weighted**2).sum()
            out[k, j] = rho * (cross + (eta[:, j] * beta[:, k]).sum())
    return out


_ACCEPTANCE = []


def record_criterion(number, passed, detail):
    _ACCEPTANCE.append((number, passed, detail))
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}")
