"""Received-signal synthesis for the two transmission protocols.

Protocol 1 (two time scales) produces an ``IM x T x P`` tensor whose frontal
slice ``p`` stacks ``Y_{i,p} = S_i H D_i(Theta) G D_p(C) X`` over blocks
``i`` (block index slowest).  Protocol 2 (single time scale) produces an
``M x T x I`` tensor with slices ``Y_i = S_i H D_i(Theta) G D_i(C) X``.
"""

from dataclasses import dataclass
import math
import struct

import numpy as np

from .errors import DegenerateInputError, DimensionError, UsageError
from .tensor_core import fro_norm

NOISELESS = math.inf


@dataclass(frozen=True)
class ObservationTensor:
    protocol: str
    data: np.ndarray  # complex128, (IM, T, P) for P1 or (M, T, I) for P2
    snr_db: float = NOISELESS
    noise_variance: float = 0.0

    @property
    def shape(self):
        return self.data.shape


def _check_shapes(ch, sch, X, coding_rows):
    H, G = ch.H, ch.G
    N, N_r = H.shape
    if G.shape[0] != N_r:
        raise DimensionError(f"G has {G.shape[0]} rows, H has {N_r} columns")
    K = G.shape[1]
    if X.shape[0] != K:
        raise DimensionError(f"X has {X.shape[0]} rows, expected K={K}")
    if sch.theta.shape != (len(sch.selections), N_r):
        raise DimensionError(f"theta shape {sch.theta.shape} does not match I x N_r")
    if any(s.shape[1] != N for s in sch.selections):
        raise DimensionError("selection matrices must have N columns")
    if sch.coding.shape[1] != K:
        raise DimensionError(f"coding has {sch.coding.shape[1]} columns, expected K={K}")
    if coding_rows is not None and sch.coding.shape[0] != coding_rows:
        raise DimensionError(
            f"coding has {sch.coding.shape[0]} rows, expected {coding_rows}")


def spatial_stack(H, sch):
    """``Q``: vertical stack over blocks of ``S_i H D_i(Theta)``, shape ``IM x N_r``."""
    return np.vstack([s @ H * th for s, th in zip(sch.selections, sch.theta)])


def synth_p1(ch, sch, x):
    """Noiseless Protocol 1 tensor, shape ``(I*M, T, P)``."""
    X = np.asarray(getattr(x, "X", x), dtype=np.complex128)
    _check_shapes(ch, sch, X, None)
    W = spatial_stack(ch.H, sch) @ ch.G
    # slice p = W D_p(C) X
    return np.einsum("rk,pk,kt->rtp", W, sch.coding, X)


def synth_p2(ch, sch, x):
    """Noiseless Protocol 2 tensor, shape ``(M, T, I)``."""
    X = np.asarray(getattr(x, "X", x), dtype=np.complex128)
    _check_shapes(ch, sch, X, len(sch.selections))
    slices = [s @ ch.H @ (th[:, None] * ch.G * c) @ X
              for s, th, c in zip(sch.selections, sch.theta, sch.coding)]
    return np.stack(slices, axis=2)


def add_awgn(clean, snr_db, rng, protocol):
    """Add complex white Gaussian noise at a per-entry SNR.

    The noise variance is ``mean(|clean|^2) / 10**(snr_db / 10)``.  Draws are
    taken in slice-major, column-major order as interleaved (re, im) pairs, so
    the realization depends only on ``rng`` and the tensor shape.
    ``snr_db = inf`` returns the clean tensor unchanged.
    """
    clean = np.asarray(clean, dtype=np.complex128)
    if math.isinf(snr_db) and snr_db > 0:
        return ObservationTensor(protocol, clean.copy(), NOISELESS, 0.0)
    power = fro_norm(clean) ** 2 / clean.size
    if power == 0.0:
        raise DegenerateInputError("cannot calibrate noise on an all-zero signal")
    variance = power / 10.0 ** (snr_db / 10.0)
    w = rng.standard_normal(2 * clean.size)
    z = (w[0::2] + 1j * w[1::2]) * math.sqrt(variance / 2.0)
    noisy = clean + z.reshape(clean.shape, order="F")
    return ObservationTensor(protocol, noisy, float(snr_db), variance)


def unfold_mode3_p1(y):
    """Mode-3 unfolding ``P x IMT`` of a Protocol 1 tensor.

    Row ``p`` is ``vec(Ybar_p)^T`` (antenna-row index fastest, then symbol
    time), so that ``Y_(3) = C (X^T kr W)^T`` on noiseless data.
    """
    if y.protocol != "P1":
        raise UsageError("mode-3 unfolding is defined for Protocol 1 tensors")
    d1, d2, d3 = y.data.shape
    return y.data.reshape(d1 * d2, d3, order="F").T


def stacked_observation(y):
    """``Y_stacked``: frontal slices stacked vertically (slice index slowest)."""
    d1, d2, d3 = y.data.shape
    return y.data.transpose(2, 0, 1).reshape(d3 * d1, d2)


# Binary layout, little-endian:
#   magic b"SBOT", uint32 version, uint8 protocol (1 or 2), 3 pad bytes,
#   3 x uint64 dims, float64 snr_db, float64 noise_variance (52 bytes),
#   then d1*d2*d3 complex entries as interleaved (re, im) float64,
#   slice-major and column-major within each slice.
_MAGIC = b"SBOT"
_VERSION = 1
_HEADER = struct.Struct("<4sIB3xQQQdd")


def to_bytes(y):
    d1, d2, d3 = y.data.shape
    header = _HEADER.pack(_MAGIC, _VERSION, 1 if y.protocol == "P1" else 2,
                          d1, d2, d3, y.snr_db, y.noise_variance)
    payload = np.asarray(y.data, dtype="<c16").ravel(order="F").tobytes()
    return header + payload


def from_bytes(buf):
    magic, version, proto, d1, d2, d3, snr_db, var = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not an observation tensor file (bad magic or version)")
    if proto not in (1, 2):
        raise ValueError(f"bad protocol code {proto}")
    n = d1 * d2 * d3
    payload = np.frombuffer(buf, dtype="<c16", count=n, offset=_HEADER.size)
    data = payload.reshape((d1, d2, d3), order="F").astype(np.complex128)
    return ObservationTensor("P1" if proto == 1 else "P2", data, snr_db, var)


def save(path, y):
    with open(path, "wb") as fh:
        fh.write(to_bytes(y))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
