"""Ambiguity removal, error metrics, identifiability and complexity figures."""

from dataclasses import dataclass, replace
import math

import numpy as np

from .channel_model import hard_decision
from .errors import DegenerateInputError, DimensionError
from .tensor_core import khatri_rao


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: int
    rhs: int

    @property
    def satisfied(self):
        return self.lhs >= self.rhs


@dataclass(frozen=True)
class IdentReport:
    protocol: str
    conditions: tuple

    @property
    def overall(self):
        return all(c.satisfied for c in self.conditions)

    def lines(self):
        for c in self.conditions:
            mark = "ok" if c.satisfied else "VIOLATED"
            yield f"{c.name}: {c.lhs} >= {c.rhs} [{mark}]"


@dataclass(frozen=True)
class MetricRecord:
    snr_db: float
    trial: int
    protocol: str
    nmse_eff: float = math.nan
    ber: float = math.nan
    ser: float = math.nan
    iterations: int = 0
    converged: bool = False

    @property
    def nmse_eff_db(self):
        return to_db(self.nmse_eff)


CSV_HEADER = ("snr_db", "trial", "protocol", "nmse_db", "ber", "ser", "iters", "converged")


def to_db(x):
    if math.isnan(x):
        return math.nan
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def effective_channel(G, H):
    """Cascaded channel ``G^T kr H``, shape ``(K*N) x N_r``."""
    G = np.asarray(G)
    H = np.asarray(H)
    if G.shape[0] != H.shape[1]:
        raise DimensionError(f"G has {G.shape[0]} rows but H has {H.shape[1]} columns")
    return khatri_rao(G.T, H)


def nmse(est, truth):
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise DimensionError(f"shape mismatch {est.shape} vs {truth.shape}")
    denom = float(np.sum(np.abs(truth) ** 2))
    if denom == 0.0:
        raise DegenerateInputError("nmse against an all-zero reference")
    return float(np.sum(np.abs(est - truth) ** 2)) / denom


def resolve_scaling(out, x_true_pilot):
    """Remove the per-user scaling between ``G_hat`` and ``X_hat`` using one pilot.

    With ``a_k = x_pilot[k] / X_hat[k, 0]`` the symbols become
    ``diag(a) X_hat`` and the channel ``G_hat diag(1/a)``, which leaves the
    fitted data unchanged.  A common scale shared by all users is the special
    case of equal ``a_k``.
    """
    pilot = np.asarray(x_true_pilot, dtype=np.complex128).reshape(-1)
    est = out.X_hat[:, 0]
    if pilot.shape != est.shape:
        raise DimensionError(f"pilot has {pilot.size} entries, expected {est.size}")
    if not np.all(np.abs(pilot) > 0):
        raise DegenerateInputError("pilot column has a zero entry")
    if not np.all(np.abs(est) > 0):
        raise DegenerateInputError("estimated pilot column has a zero entry")
    alpha = pilot / est
    return replace(out, X_hat=alpha[:, None] * out.X_hat, G_hat=out.G_hat / alpha[None, :])


def demod_ber(x_hat, x_true, skip_pilot=True):
    """Hard-decision bit and symbol error rates against the transmitted payload.

    The pilot column (column 0) is excluded unless ``skip_pilot`` is False.
    """
    x_hat = np.asarray(x_hat)
    if x_hat.shape != x_true.X.shape:
        raise DimensionError(f"shape mismatch {x_hat.shape} vs {x_true.X.shape}")
    start = 1 if skip_pilot and x_hat.shape[1] > 1 else 0
    idx, bits = hard_decision(x_hat[:, start:], x_true.modulation)
    ser = float(np.mean(idx != x_true.indices[:, start:]))
    ber = float(np.mean(bits != x_true.bits[:, start:]))
    return ber, ser


def check_identifiability(cfg):
    """Necessary dimension conditions for unique LS updates."""
    I, M, N, N_r, K, P, T = cfg.I, cfg.M, cfg.N, cfg.N_r, cfg.K, cfg.P, cfg.T
    if cfg.protocol == "P1":
        conds = (Condition("IMTP >= N_r*max(K,N)", I * M * T * P, N_r * max(K, N)),
                 Condition("IM >= N_r", I * M, N_r),
                 Condition("IMP >= K", I * M * P, K))
    else:
        conds = (Condition("MTI >= N_r*max(K,N)", M * T * I, N_r * max(K, N)),
                 Condition("IM >= K", I * M, K))
    return IdentReport(cfg.protocol, conds)


def complexity_estimate(cfg):
    """Dominant per-iteration LS costs (unit constants) for both receivers."""
    I, M, N, N_r, K, P, T = cfg.I, cfg.M, cfg.N, cfg.N_r, cfg.K, cfg.P, cfg.T
    channel = N_r ** 2 * K ** 2 + N ** 2 * N_r ** 2
    p1 = I * M * P * K ** 2 + I * M * T * P * channel
    p2 = I * M * K ** 2 + M * T * I * channel
    return float(p1), float(p2)
