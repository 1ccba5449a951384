"""Brute-force scalar-loop references for the vectorized code paths.

Nothing here calls the vectorized synthesis or regression builders; each
linear map is rebuilt entry by entry from its summation form.  Used by the
test-suite and by ``semiblind oracle``.
"""

import numpy as np

from .channel_model import SystemConfig, gen_channels, gen_schedule, gen_symbols, crandn
from .tensor_core import fro_norm, khatri_rao, kron, pinv, vec


def synth_p1_loop(H, G, sch, X):
    """``y[(i-1)M + m, t, p] = sum_{n_r, k} (S_i h_{n_r})_m theta_{i,n_r} g_{n_r,k} c_{p,k} x_{k,t}``."""
    I = len(sch.selections)
    M = sch.selections[0].shape[0]
    N_r, K = G.shape
    P = sch.coding.shape[0]
    T = X.shape[1]
    out = np.zeros((I * M, T, P), dtype=np.complex128)
    for i in range(I):
        SH = sch.selections[i] @ H
        for p in range(P):
            for t in range(T):
                for m in range(M):
                    acc = 0j
                    for nr in range(N_r):
                        for k in range(K):
                            acc += SH[m, nr] * sch.theta[i, nr] * G[nr, k] * sch.coding[p, k] * X[k, t]
                    out[i * M + m, t, p] = acc
    return out


def synth_p2_loop(H, G, sch, X):
    """``y[m, t, i] = sum_{n_r, k} (S_i h_{n_r})_m theta_{i,n_r} g_{n_r,k} c_{i,k} x_{k,t}``."""
    I = len(sch.selections)
    M = sch.selections[0].shape[0]
    N_r, K = G.shape
    T = X.shape[1]
    out = np.zeros((M, T, I), dtype=np.complex128)
    for i in range(I):
        SH = sch.selections[i] @ H
        for t in range(T):
            for m in range(M):
                acc = 0j
                for nr in range(N_r):
                    for k in range(K):
                        acc += SH[m, nr] * sch.theta[i, nr] * G[nr, k] * sch.coding[i, k] * X[k, t]
                out[m, t, i] = acc
    return out


def _order_y(tensor, M, layout):
    """Flatten a tensor in the observation ordering named by ``layout``."""
    d1, T, d3 = tensor.shape
    if layout == "slices":  # vec of each frontal slice, stacked by slice
        return np.array([tensor[r, t, s] for s in range(d3) for t in range(T) for r in range(d1)])
    if layout == "blocks":  # P1: vec([Y_{i,1} .. Y_{i,P}]) stacked by block
        I = d1 // M
        return np.array([tensor[i * M + m, t, p] for i in range(I) for p in range(d3)
                         for t in range(T) for m in range(M)])
    raise ValueError(layout)


def regression_by_probing(protocol, which, H, G, sch, X):
    """Rebuild ``W_G``, ``W_H`` or ``B_total`` column by column with the loop synthesizer."""
    synth = synth_p1_loop if protocol == "P1" else synth_p2_loop
    M = sch.selections[0].shape[0]
    cols = []
    if which == "WG":
        N_r, K = G.shape
        for k in range(K):
            for nr in range(N_r):  # column-major vec(G)
                E = np.zeros((N_r, K), dtype=np.complex128)
                E[nr, k] = 1.0
                cols.append(_order_y(synth(H, E, sch, X), M, "slices"))
    elif which == "WH":
        N, N_r = H.shape
        layout = "blocks" if protocol == "P1" else "slices"
        for nr in range(N_r):
            for n in range(N):
                E = np.zeros((N, N_r), dtype=np.complex128)
                E[n, nr] = 1.0
                cols.append(_order_y(synth(E, G, sch, X), M, layout))
    elif which == "B":
        K = G.shape[1]
        for k in range(K):
            e = np.zeros((K, 1), dtype=np.complex128)
            e[k, 0] = 1.0
            y = synth(H, G, sch, e)
            cols.append(np.concatenate([y[:, 0, s] for s in range(y.shape[2])]))
    else:
        raise ValueError(which)
    return np.column_stack(cols)


def penrose_errors(a, rel_tol=1e-12):
    """Max residual of the four Penrose conditions for ``pinv(a)``."""
    p, _ = pinv(a, rel_tol)
    return max(fro_norm(a @ p @ a - a), fro_norm(p @ a @ p - p),
               fro_norm((a @ p).conj().T - a @ p), fro_norm((p @ a).conj().T - p @ a))


def run_suite(seed=0, n_random=20):
    """Run the small-dimension equivalence checks; returns ``[(name, max_error, tol)]``."""
    from . import protocols, receivers

    rng = np.random.default_rng(seed)
    results = []

    def record(name, err, tol):
        results.append((name, float(err), tol))

    err = 0.0
    for _ in range(n_random):
        A, B, C = crandn(rng, (2, 3)), crandn(rng, (3, 2)), crandn(rng, (2, 4))
        err = max(err, fro_norm(vec(A @ B @ C) - kron(C.T, A) @ vec(B)))
    record("vec(ABC) = (C^T kron A) vec(B)", err, 1e-12)
    err = 0.0
    for _ in range(n_random):
        A, B, C, D = (crandn(rng, (2, 2)) for _ in range(4))
        err = max(err, fro_norm(kron(A, B) @ kron(C, D) - kron(A @ C, B @ D)))
    record("mixed product", err, 1e-12)
    err = 0.0
    for _ in range(n_random):
        A, x, B = crandn(rng, (3, 2)), crandn(rng, (2,)), crandn(rng, (2, 4))
        err = max(err, fro_norm(vec(A @ np.diag(x) @ B) - khatri_rao(B.T, A) @ x[:, None]))
    record("vec(A diag(x) B) = (B^T kr A) x", err, 1e-12)
    err = 0.0
    for shape in ((8, 3), (3, 8), (5, 5)):
        err = max(err, penrose_errors(crandn(rng, shape)))
    err = max(err, penrose_errors(crandn(rng, (6, 2)) @ crandn(rng, (2, 5))))
    record("Penrose conditions", err, 1e-10)

    for protocol, dims in (("P1", dict(I=2, P=2, T=3)), ("P2", dict(I=3, T=3))):
        cfg = SystemConfig(M=2, N=3, N_r=2, K=2, protocol=protocol, **dims)
        ch = gen_channels(cfg, rng)
        sch = gen_schedule(cfg, rng)
        X = gen_symbols(cfg, rng).X
        if protocol == "P1":
            fast = protocols.synth_p1(ch, sch, X)
            slow = synth_p1_loop(ch.H, ch.G, sch, X)
            builders = (receivers.pf_build_WG(sch, ch.H, X), receivers.pf_build_WH(sch, ch.G, X),
                        receivers.pf_build_Btotal(sch, ch.G, ch.H))
        else:
            fast = protocols.synth_p2(ch, sch, X)
            slow = synth_p2_loop(ch.H, ch.G, sch, X)
            builders = (receivers.npf_build_WG(sch, ch.H, X),
                        receivers.npf_build_WH(sch, ch.G, X),
                        receivers.npf_build_Btotal(sch, ch.G, ch.H))
        record(f"{protocol} synthesis vs scalar loop", fro_norm(fast - slow), 1e-12)
        for name, built in zip(("WG", "WH", "B"), builders):
            ref = regression_by_probing(protocol, name, ch.H, ch.G, sch, X)
            record(f"{protocol} {name} builder vs probed loop map", fro_norm(built - ref), 1e-12)
    return results
