import numpy as np
import pytest

from semiblind.channel_model import SystemConfig, gen_channels, gen_schedule, gen_symbols
from semiblind.protocols import add_awgn, synth_p1, synth_p2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def small_p1():
    return SystemConfig(M=2, N=3, N_r=2, K=2, I=2, P=2, T=3, protocol="P1")


@pytest.fixture
def small_p2():
    return SystemConfig(M=2, N=3, N_r=2, K=2, I=3, P=1, T=3, protocol="P2")


def realize(cfg, seed=0, snr_db=np.inf):
    rng = np.random.default_rng(seed)
    ch = gen_channels(cfg, rng)
    sch = gen_schedule(cfg, rng)
    sym = gen_symbols(cfg, rng)
    clean = synth_p1(ch, sch, sym) if cfg.protocol == "P1" else synth_p2(ch, sch, sym)
    return ch, sch, sym, add_awgn(clean, snr_db, rng, cfg.protocol)


def qfunc(x):
    import math
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def perfect_csi_ber_oracle(cfg, seeds, snr_db):
    """Expected QPSK BER of zero-forcing detection with true ``B_total``.

    For each trial the LS symbol error on user ``k`` is circular Gaussian
    with variance ``v_k = sigma^2 [(B^H B)^{-1}]_kk``; a Gray QPSK bit is
    wrong with probability ``Q(1/sqrt(v_k))``.  Returns the mean over
    trials and users and the matching binomial standard error.
    """
    import math
    from semiblind.harness import simulate
    from semiblind.receivers import npf_build_Btotal, pf_build_Btotal

    build = pf_build_Btotal if cfg.protocol == "P1" else npf_build_Btotal
    probs = []
    for seed in seeds:
        ch, sch, sym, y, _ = simulate(cfg, seed, snr_db)
        B = build(sch, ch.G, ch.H)
        v = y.noise_variance * np.real(np.diag(np.linalg.inv(B.conj().T @ B)))
        probs.extend(qfunc(1.0 / math.sqrt(vk)) for vk in v)
    p = np.asarray(probs)
    bits_per_prob = 2 * (cfg.T - 1)
    se = math.sqrt(float(np.sum(p * (1 - p))) * bits_per_prob) / (bits_per_prob * p.size)
    return float(p.mean()), se
