"""Monte Carlo vs closed-form agreement checks on small networks."""

from dataclasses import dataclass

import numpy as np

from .config import resolve_config
from .montecarlo import make_snapshot, mc_effective_gains, substream
from .precoding import Scheme

# (M, K) instances; every one has at least one shared pilot with tau_up = ceil(K/2)
SMALL_INSTANCES = ((2, 1), (3, 2), (4, 3))


@dataclass(frozen=True)
class Check:
    instance: str
    scheme: str
    quantity: str
    mc: float
    closed: float
    stderr: float
    limit: float

    @property
    def z(self):
        if self.stderr == 0:
            return 0.0 if self.mc == self.closed else float("inf")
        return abs(self.mc - self.closed) / self.stderr

    @property
    def passed(self):
        return self.z <= self.limit

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.instance} {self.scheme:<12} {self.quantity:<10} "
                f"mc={self.mc:.6g} closed={self.closed:.6g} z={self.z:.2f}")


def small_config(num_aps, num_users, **overrides):
    """A compact scenario where every AP sees every user with usable SNR."""
    base = {"num_aps": num_aps, "num_users": num_users, "area_side": 200.0}
    base.update(overrides)
    return resolve_config(overrides=base)


def oracle_checks(num_fadings=100_000, seed=0, instances=SMALL_INSTANCES, limit=3.0, workers=1):
    """Compare Monte Carlo DS/BU/UI with the closed forms that are exact.

    Conventional: DS, BU and every UI pair.  Normalized: DS and BU (the UI
    expression for this scheme is an approximation and is excluded).
    """
    checks = []
    for idx, (M, K) in enumerate(instances):
        cfg = small_config(M, K)
        rng = np.random.default_rng(substream(seed, idx, 0))
        snap = make_snapshot(cfg, rng)
        label = f"M={M},K={K}"
        for scheme in (Scheme.CONVENTIONAL, Scheme.NORMALIZED):
            alloc = snap.allocation(scheme)
            closed = snap.closed_form(scheme)
            est = mc_effective_gains(snap, alloc, num_fadings, base_seed=seed, snapshot_index=idx,
                                     workers=workers)
            for k in range(K):
                checks.append(Check(label, scheme.value, f"ds[{k}]", est.ds_sq[k], closed.ds_sq[k],
                                    est.ds_stderr[k], limit))
                checks.append(Check(label, scheme.value, f"bu[{k}]", est.bu[k], closed.bu[k],
                                    est.bu_stderr[k], limit))
                if scheme is Scheme.CONVENTIONAL:
                    for j in range(K):
                        if j != k:
                            checks.append(Check(label, scheme.value, f"ui[{k},{j}]", est.ui[k, j],
                                                closed.ui[k, j], est.ui_stderr[k, j], limit))
    return checks
