"""Ground-truth channels, known schedules and user symbols.

Every generator takes an explicit ``numpy.random.Generator`` (PCG64 via
``numpy.random.default_rng``), so a run is fully determined by its seed.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError

PROTOCOLS = ("P1", "P2")
MODULATIONS = ("BPSK", "QPSK", "16QAM")
SCHEDULE_MODES = ("dft", "random")
SELECTION_MODES = ("balanced", "random", "cyclic")


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and protocol parameters.

    ``M`` active antennas out of ``N`` fluid-antenna ports, ``N_r`` RIS
    elements, ``K`` users, ``I`` blocks, ``P`` coding slots per block
    (Protocol 1 only) and ``T`` symbols per block, the first of which is the
    pilot.
    """

    M: int = 4
    N: int = 6
    N_r: int = 4
    K: int = 2
    I: int = 4
    P: int = 4
    T: int = 20
    snr_db: float = math.inf
    protocol: str = "P1"
    seed: int = 0
    modulation: str = "QPSK"
    theta_mode: str = "dft"
    coding_mode: str = "dft"
    selection_mode: str = "balanced"

    def __post_init__(self):
        bad = [f for f in ("M", "N", "N_r", "K", "I", "P", "T")
               if not isinstance(getattr(self, f), (int, np.integer)) or getattr(self, f) < 1]
        if bad:
            raise ConfigError(f"dimensions must be integers >= 1: {', '.join(bad)}", bad)
        if self.M > self.N:
            raise ConfigError(
                f"M={self.M} active antennas exceed N={self.N} ports", ("M", "N"))
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}", ("protocol",))
        if self.modulation not in MODULATIONS:
            raise ConfigError(f"unknown modulation {self.modulation!r}", ("modulation",))
        for name in ("theta_mode", "coding_mode"):
            if getattr(self, name) not in SCHEDULE_MODES:
                raise ConfigError(f"{name} must be one of {SCHEDULE_MODES}", (name,))
        if self.selection_mode not in SELECTION_MODES:
            raise ConfigError(f"selection_mode must be one of {SELECTION_MODES}",
                              ("selection_mode",))
        if self.coding_mode == "dft" and self.coding_rows < self.K:
            rows = "P" if self.protocol == "P1" else "I"
            raise ConfigError(
                f"DFT coding needs {rows} >= K ({rows}={self.coding_rows}, K={self.K}); "
                "use coding_mode = random", (rows, "K", "coding_mode"))
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer", ("seed",))

    @property
    def coding_rows(self):
        """Number of rows of the coding matrix (``P`` or ``I``)."""
        return self.P if self.protocol == "P1" else self.I


@dataclass(frozen=True)
class ChannelSet:
    H: np.ndarray  # N x N_r, RIS to BS
    G: np.ndarray  # N_r x K, users to RIS


@dataclass(frozen=True)
class Schedule:
    selections: list  # I binary M x N matrices
    theta: np.ndarray  # I x N_r, unit modulus
    coding: np.ndarray  # P x K (P1) or I x K (P2)

    @property
    def I(self):
        return len(self.selections)

    @property
    def M(self):
        return self.selections[0].shape[0]

    @property
    def N(self):
        return self.selections[0].shape[1]


@dataclass(frozen=True)
class SymbolMatrix:
    """User symbols ``X`` (K x T) plus the bits and constellation indices behind them."""

    X: np.ndarray
    indices: np.ndarray
    bits: np.ndarray  # K x T x bits_per_symbol
    modulation: str = "QPSK"
    constellation: np.ndarray = field(default=None, repr=False)


def crandn(rng, shape):
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def dft_columns(n_points, n_cols):
    """First ``n_cols`` columns of the unnormalized ``n_points``-point DFT matrix."""
    rows = np.arange(n_points)[:, None]
    cols = np.arange(n_cols)[None, :]
    return np.exp(-2j * np.pi * rows * cols / n_points)


def gen_channels(cfg, rng):
    """i.i.d. CN(0, 1) Rayleigh channels."""
    H = crandn(rng, (cfg.N, cfg.N_r))
    G = crandn(rng, (cfg.N_r, cfg.K))
    return ChannelSet(H=H, G=G)


def selection_matrix(ports, n_ports):
    """Binary ``len(ports) x n_ports`` matrix with a one at ``(m, ports[m])``."""
    s = np.zeros((len(ports), n_ports), dtype=np.complex128)
    s[np.arange(len(ports)), ports] = 1.0
    return s


def gen_selections(cfg, rng):
    """Per-block port selections, redrawn for each block.

    Every block activates ``M`` distinct ports in random order, so each
    row has exactly one 1 and each column at most one.  How the port sets
    are drawn depends on ``cfg.selection_mode``:

    ``balanced`` (default)
        Ports are drawn at random among the least-used ones so far, so usage
        counts never differ by more than one across ports.  Every port is then
        seen in at least ``floor(I*M/N)`` blocks.
    ``random``
        Each block draws its ``M`` ports uniformly without replacement,
        independently of the other blocks.  Some ports may be observed in too
        few blocks for their channel row to be recoverable.
    ``cyclic``
        Block ``i`` takes ports ``iM, ..., iM + M - 1`` modulo ``N``; no
        randomness is consumed.
    """
    if cfg.M > cfg.N:
        raise ConfigError(f"M={cfg.M} exceeds N={cfg.N}", ("M", "N"))
    if cfg.selection_mode == "cyclic":
        return [selection_matrix((i * cfg.M + np.arange(cfg.M)) % cfg.N, cfg.N)
                for i in range(cfg.I)]
    if cfg.selection_mode == "random":
        return [selection_matrix(rng.choice(cfg.N, size=cfg.M, replace=False), cfg.N)
                for _ in range(cfg.I)]
    counts = np.zeros(cfg.N, dtype=np.int64)
    selections = []
    for _ in range(cfg.I):
        order = rng.permutation(cfg.N)
        ports = order[np.argsort(counts[order], kind="stable")[:cfg.M]]
        counts[ports] += 1
        selections.append(selection_matrix(rng.permutation(ports), cfg.N))
    return selections


def gen_theta(cfg, rng):
    """RIS phase matrix, ``I x N_r`` with unit-modulus entries.

    In ``dft`` mode with ``I >= N_r`` the first ``N_r`` columns of an
    ``I``-point DFT are used; otherwise phases are uniform on ``[0, 2 pi)``.
    """
    if cfg.theta_mode == "dft" and cfg.I >= cfg.N_r:
        return dft_columns(cfg.I, cfg.N_r)
    return np.exp(2j * np.pi * rng.random((cfg.I, cfg.N_r)))


def gen_coding(cfg, rng=None):
    rows = cfg.coding_rows
    if cfg.coding_mode == "dft":
        if rows < cfg.K:
            which = "P" if cfg.protocol == "P1" else "I"
            raise ConfigError(
                f"DFT coding needs {which} >= K ({which}={rows}, K={cfg.K})", (which, "K"))
        return dft_columns(rows, cfg.K)
    if rng is None:
        raise ValueError("random coding mode needs a random generator")
    return np.exp(2j * np.pi * rng.random((rows, cfg.K)))


def gen_schedule(cfg, rng):
    selections = gen_selections(cfg, rng)
    theta = gen_theta(cfg, rng)
    coding = gen_coding(cfg, rng)
    return Schedule(selections=selections, theta=theta, coding=coding)


# Gray-labelled, unit average energy.
def constellation(modulation):
    """Return ``(points, labels)``; ``labels[j]`` is the bit tuple of ``points[j]``."""
    if modulation == "BPSK":
        points = np.array([1.0, -1.0], dtype=np.complex128)
        labels = np.array([[0], [1]], dtype=np.uint8)
    elif modulation == "QPSK":
        labels = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
        points = ((1 - 2.0 * labels[:, 0]) + 1j * (1 - 2.0 * labels[:, 1])) / np.sqrt(2.0)
    elif modulation == "16QAM":
        # per-axis Gray map: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
        level = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}
        labels = np.array([[b0, b1, b2, b3] for b0 in (0, 1) for b1 in (0, 1)
                           for b2 in (0, 1) for b3 in (0, 1)], dtype=np.uint8)
        points = np.array([level[(l[0], l[1])] + 1j * level[(l[2], l[3])] for l in labels])
        points = points / np.sqrt(10.0)
    else:
        raise ConfigError(f"unknown modulation {modulation!r}", ("modulation",))
    return points, labels


def gen_symbols(cfg, rng):
    points, labels = constellation(cfg.modulation)
    idx = rng.integers(0, points.size, size=(cfg.K, cfg.T))
    return SymbolMatrix(X=points[idx], indices=idx, bits=labels[idx],
                        modulation=cfg.modulation, constellation=points)


def hard_decision(x_hat, modulation):
    """Nearest-point demapping; returns ``(indices, bits)``."""
    points, labels = constellation(modulation)
    x_hat = np.asarray(x_hat)
    idx = np.argmin(np.abs(x_hat[..., None] - points) ** 2, axis=-1)
    return idx, labels[idx]


def check_schedule(sch, cfg=None):
    """Raise ``ValueError`` if ``sch`` violates the schedule invariants."""
    for i, s in enumerate(sch.selections):
        if not np.all((s == 0) | (s == 1)):
            raise ValueError(f"selection {i} is not binary")
        if not np.all(s.sum(axis=1) == 1) or not np.all(s.sum(axis=0) <= 1):
            raise ValueError(f"selection {i} must have one 1 per row, at most one per column")
        if not np.array_equal(s @ s.conj().T, np.eye(s.shape[0])):
            raise ValueError(f"selection {i} does not satisfy S S^H = I")
    if not np.allclose(np.abs(sch.theta), 1.0, atol=1e-14, rtol=0):
        raise ValueError("theta entries must have unit modulus")
    if np.any(np.all(sch.coding == 0, axis=1)):
        raise ValueError("coding matrix has an all-zero row")
    if cfg is not None:
        if len(sch.selections) != cfg.I or sch.selections[0].shape != (cfg.M, cfg.N):
            raise ValueError("selection shapes do not match the configuration")
        if sch.theta.shape != (cfg.I, cfg.N_r):
            raise ValueError("theta shape does not match the configuration")
        if sch.coding.shape != (cfg.coding_rows, cfg.K):
            raise ValueError("coding shape does not match the configuration")
