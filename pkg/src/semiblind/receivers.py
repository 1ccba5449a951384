"""Semi-blind trilinear alternating least-squares receivers.

Both receivers cycle through three exact least-squares updates of the
user-to-RIS channel ``G``, the RIS-to-BS channel ``H`` and the symbols
``X``; each update minimizes the same global data-fit cost with the other
two factors fixed, only the regression matrix and the ordering of the
observations differ.  ``pf_tals`` handles the Protocol 1 tensor
(``IM x T x P``) and ``npf_tals`` the Protocol 2 tensor (``M x T x I``).
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .channel_model import SystemConfig, crandn
from .errors import DimensionError, NumericalFailure, UsageError
from .protocols import spatial_stack, stacked_observation
from .tensor_core import DEFAULT_PINV_RTOL, lstsq, unvec


class IdentifiabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TalsOptions:
    delta: float = 1e-8
    max_iters: int = 300
    pinv_rel_tol: float = DEFAULT_PINV_RTOL
    init: str = "random"
    init_H: np.ndarray = None
    init_X: np.ndarray = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init not in ("random", "provided"):
            raise ValueError("init must be 'random' or 'provided'")
        if self.init == "provided" and (self.init_H is None or self.init_X is None):
            raise ValueError("init='provided' needs init_H and init_X")


@dataclass
class ReceiverOutput:
    """Receiver estimates and convergence record.

    ``residuals[j]`` is the normalized fit after sweep ``j + 1``.
    ``sweep_residuals[j]`` holds the normalized global fit after each of the
    three sub-updates (G, H, X) of that sweep, and ``effective_ranks[j]``
    the pseudo-inverse ranks of the three regression matrices.
    ``full_ranks`` are the column counts those ranks are compared against.
    """

    G_hat: np.ndarray
    H_hat: np.ndarray
    X_hat: np.ndarray
    residuals: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    effective_ranks: list = field(default_factory=list)
    sweep_residuals: list = field(default_factory=list)
    full_ranks: tuple = ()

    @property
    def rank_deficient(self):
        """True if any update ran on a regression matrix below full column rank."""
        return any(r < f for ranks in self.effective_ranks
                   for r, f in zip(ranks, self.full_ranks) if r is not None)

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else math.inf


def _dims(side, H=None, G=None, X=None):
    I = len(side.selections)
    M, N = side.selections[0].shape
    N_r = side.theta.shape[1]
    K = side.coding.shape[1]
    if side.theta.shape[0] != I:
        raise DimensionError("theta must have one row per block")
    if H is not None and H.shape != (N, N_r):
        raise DimensionError(f"H must be {N}x{N_r}, got {H.shape}")
    if G is not None and G.shape != (N_r, K):
        raise DimensionError(f"G must be {N_r}x{K}, got {G.shape}")
    if X is not None and X.shape[0] != K:
        raise DimensionError(f"X must have K={K} rows, got {X.shape}")
    return I, M, N, N_r, K


# ---------------------------------------------------------------- Protocol 1

def pf_build_WG(side, H, X):
    """``IMTP x N_r K`` stack over slots of ``kron((D_p(C) X)^T, Q)``."""
    _dims(side, H=H, X=X)
    Q = spatial_stack(H, side)
    return np.vstack([np.kron((c[:, None] * X).T, Q) for c in side.coding])


def pf_build_WH(side, G, X):
    """``IMTP x N N_r`` stack over blocks of ``kron(B_i^T, S_i)``.

    ``B_i = D_i(Theta) R_aux`` with ``R_aux = [G D_1(C) X, ..., G D_P(C) X]``.
    """
    _dims(side, G=G, X=X)
    R_aux = np.hstack([(G * c) @ X for c in side.coding])
    return np.vstack([np.kron((th[:, None] * R_aux).T, s)
                      for s, th in zip(side.selections, side.theta)])


def pf_build_Btotal(side, G, H):
    """``IMP x K`` stack over slots of ``Q G D_p(C)``."""
    _dims(side, H=H, G=G)
    W = spatial_stack(H, side) @ G
    return np.vstack([W * c for c in side.coding])


def pf_vec_G(data, M):
    """Observation ordering paired with :func:`pf_build_WG`: ``vec`` of each slot, stacked."""
    return data.reshape(-1, order="F")


def pf_vec_H(data, M):
    """Observation ordering paired with :func:`pf_build_WH`.

    Block ``i`` is ``vec([Y_{i,1}, ..., Y_{i,P}])``.
    """
    IM, T, P = data.shape
    I = IM // M
    return data.reshape(M, I, T, P, order="F").transpose(0, 2, 3, 1).reshape(-1, order="F")


# ---------------------------------------------------------------- Protocol 2

def npf_build_WG(side, H, X):
    """``MTI x N_r K`` stack of ``(X^T kron S_i H)(D_i(C) kron D_i(Theta))``."""
    _dims(side, H=H, X=X)
    Xt = X.T
    return np.vstack([np.kron(Xt, s @ H) * np.kron(c, th)
                      for s, th, c in zip(side.selections, side.theta, side.coding)])


def npf_build_WH(side, G, X):
    """``MTI x N N_r`` stack of ``kron(R_i^T, S_i)``, ``R_i = D_i(Theta) G D_i(C) X``."""
    _dims(side, G=G, X=X)
    return np.vstack([np.kron(((th[:, None] * G * c) @ X).T, s)
                      for s, th, c in zip(side.selections, side.theta, side.coding)])


def npf_build_Btotal(side, G, H):
    """``IM x K`` stack of ``S_i H D_i(Theta) G D_i(C)``."""
    _dims(side, H=H, G=G)
    return np.vstack([s @ H @ (th[:, None] * G * c)
                      for s, th, c in zip(side.selections, side.theta, side.coding)])


def npf_vec(data, M=None):
    """Observation ordering paired with both NPF channel regressions."""
    return data.reshape(-1, order="F")


_MODELS = {
    "P1": (pf_build_WG, pf_build_WH, pf_build_Btotal, pf_vec_G, pf_vec_H),
    "P2": (npf_build_WG, npf_build_WH, npf_build_Btotal, npf_vec, npf_vec),
}


def _config_for(y, side):
    I, M, N, N_r, K = _dims(side)
    d1, T, d3 = y.data.shape
    if y.protocol == "P1":
        if d1 != I * M or d3 != side.coding.shape[0]:
            raise DimensionError(f"P1 tensor {y.data.shape} does not match I*M={I * M}, "
                                 f"P={side.coding.shape[0]}")
        P = d3
    else:
        if d1 != M or d3 != I or side.coding.shape[0] != I:
            raise DimensionError(f"P2 tensor {y.data.shape} does not match M={M}, I={I}")
        P = 1
    return SystemConfig(M=M, N=N, N_r=N_r, K=K, I=I, P=P, T=T, protocol=y.protocol)


def _warn_if_unidentifiable(cfg):
    from .metrics import check_identifiability

    report = check_identifiability(cfg)
    if not report.overall:
        failed = ", ".join(c.name for c in report.conditions if not c.satisfied)
        warnings.warn(f"identifiability conditions violated: {failed}",
                      IdentifiabilityWarning, stacklevel=3)


def _initial_factors(opt, rng, N, N_r, K, T):
    if opt.init == "provided":
        H = np.array(opt.init_H, dtype=np.complex128)
        X = np.array(opt.init_X, dtype=np.complex128)
        if H.shape != (N, N_r) or X.shape != (K, T):
            raise DimensionError("provided initial factors have the wrong shape")
        return H, X
    if rng is None:
        raise ValueError("random initialization needs a random generator")
    return crandn(rng, (N, N_r)), crandn(rng, (K, T))


def tals(y, side, opt=None, rng=None, fixed_X=None):
    """Alternating LS over (G, H, X) for either protocol.

    With ``fixed_X`` the symbol update is skipped and ``X`` is clamped to the
    given matrix (supervised channel estimation).
    """
    opt = opt or TalsOptions()
    cfg = _config_for(y, side)
    _warn_if_unidentifiable(cfg)
    build_WG, build_WH, build_B, vec_G, vec_H = _MODELS[y.protocol]
    I, M, N, N_r, K = _dims(side)
    T = cfg.T

    y_G = vec_G(y.data, M)
    y_H = vec_H(y.data, M)
    Y_st = stacked_observation(y)
    energy = float(np.vdot(Y_st, Y_st).real)
    if energy == 0.0:
        energy = 1.0

    def fit(G, H, X):
        r = Y_st - build_B(side, G, H) @ X
        return float(np.vdot(r, r).real) / energy

    H, X = _initial_factors(opt, rng, N, N_r, K, T)
    if fixed_X is not None:
        X = np.asarray(fixed_X, dtype=np.complex128)
    out = ReceiverOutput(G_hat=None, H_hat=H, X_hat=X,
                         full_ranks=(N_r * K, N * N_r, None if fixed_X is not None else K))
    eps_prev = math.inf
    for j in range(1, opt.max_iters + 1):
        try:
            g, rank_g = lstsq(build_WG(side, H, X), y_G, opt.pinv_rel_tol)
            G = unvec(g, N_r, K)
            after_g = fit(G, H, X)
            h, rank_h = lstsq(build_WH(side, G, X), y_H, opt.pinv_rel_tol)
            H = unvec(h, N, N_r)
            after_h = fit(G, H, X)
            if fixed_X is None:
                X, rank_x = lstsq(build_B(side, G, H), Y_st, opt.pinv_rel_tol)
                eps = fit(G, H, X)
            else:
                rank_x, eps = None, after_h
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"SVD failed at iteration {j}: {exc}", j) from exc
        if not math.isfinite(eps):
            raise NumericalFailure(f"non-finite residual at iteration {j}", j)
        out.residuals.append(eps)
        out.sweep_residuals.append((after_g, after_h, eps))
        out.effective_ranks.append((rank_g, rank_h, rank_x))
        out.iterations = j
        if abs(eps - eps_prev) < opt.delta:
            out.converged = True
            break
        eps_prev = eps
    out.G_hat, out.H_hat, out.X_hat = G, H, X
    return out


def pf_tals(y, side, opt=None, rng=None):
    """PF receiver for Protocol 1 observations."""
    if y.protocol != "P1":
        raise UsageError("pf_tals needs a Protocol 1 observation tensor")
    return tals(y, side, opt, rng)


def npf_tals(y, side, opt=None, rng=None):
    """NPF receiver for Protocol 2 observations."""
    if y.protocol != "P2":
        raise UsageError("npf_tals needs a Protocol 2 observation tensor")
    return tals(y, side, opt, rng)


def pilot_assisted(y, side, X, opt=None, rng=None):
    """Channel-only ALS with every symbol known."""
    return tals(y, side, opt, rng, fixed_X=X)


def perfect_csi_symbols(y, side, G, H, rel_tol=DEFAULT_PINV_RTOL):
    """LS symbol estimate with the true channels; returns ``(X_hat, rank)``."""
    build_B = _MODELS[y.protocol][2]
    return lstsq(build_B(side, G, H), stacked_observation(y), rel_tol)
