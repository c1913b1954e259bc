"""Scalar SNR / BER / OSNR algebra and the constellation table.

All SNR quantities are carried in linear units; dB is a view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr

C_LIGHT = 299792458.0
H_PLANCK = 6.62607015e-34

#: 0.1 nm at 1550 nm
DEFAULT_REF_BANDWIDTH_HZ = 12.5e9


def db_from_linear(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("ratio must be strictly positive to convert to dB")
    out = 10.0 * np.log10(x)
    return float(out) if out.ndim == 0 else out


def linear_from_db(x):
    out = 10.0 ** (np.asarray(x, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def dbm_to_watt(p_dbm):
    return 1e-3 * linear_from_db(p_dbm)


def watt_to_dbm(p_w):
    return db_from_linear(np.asarray(p_w) / 1e-3)


@dataclass(frozen=True)
class SnrValue:
    """A signal-to-noise ratio stored linearly; ``inf`` means noiseless."""

    linear: float

    def __post_init__(self):
        if not (self.linear > 0):
            raise ValueError(f"SNR must be > 0 in linear units, got {self.linear!r}")

    @classmethod
    def from_db(cls, value_db: float) -> "SnrValue":
        if math.isinf(value_db) and value_db > 0:
            return cls(math.inf)
        return cls(linear_from_db(value_db))

    @property
    def db(self) -> float:
        if math.isinf(self.linear):
            return math.inf
        return 10.0 * math.log10(self.linear)

    @property
    def inverse(self) -> float:
        return 0.0 if math.isinf(self.linear) else 1.0 / self.linear


@dataclass(frozen=True)
class BandwidthPair:
    baud: float
    ref_bandwidth: float = DEFAULT_REF_BANDWIDTH_HZ

    def __post_init__(self):
        if not (self.baud > 0 and self.ref_bandwidth > 0):
            raise ValueError("symbol rate and reference bandwidth must be positive")

    @property
    def ratio(self) -> float:
        return self.baud / self.ref_bandwidth


def _gray(n_bits: int) -> list[int]:
    return [i ^ (i >> 1) for i in range(1 << n_bits)]


@dataclass(frozen=True)
class Constellation:
    """Rectangular Gray-mapped QAM built as a product of two PAM axes.

    ``points[i]`` carries the bit label ``labels[i]`` (MSB first, in-phase
    bits followed by quadrature bits).
    """

    name: str
    levels_i: int
    levels_q: int
    points: np.ndarray = field(repr=False, compare=False)
    labels: np.ndarray = field(repr=False, compare=False)
    scale: float = field(repr=False, compare=False)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.levels_i * self.levels_q)))

    @property
    def size(self) -> int:
        return self.levels_i * self.levels_q

    @property
    def code(self) -> int:
        return CONSTELLATION_CODES[self.name]

    def bit_matrix(self) -> np.ndarray:
        """(size, bits_per_symbol) array of 0/1 bit labels."""
        b = self.bits_per_symbol
        shifts = np.arange(b - 1, -1, -1)
        return ((self.labels[:, None] >> shifts) & 1).astype(np.uint8)


def _build(name: str, mi: int, mq: int) -> Constellation:
    bi, bq = int(math.log2(mi)), int(math.log2(mq))
    amp_i = np.arange(-(mi - 1), mi, 2, dtype=float)
    amp_q = np.arange(-(mq - 1), mq, 2, dtype=float)
    gi, gq = _gray(bi), _gray(bq)
    energy = np.mean(amp_i**2) + np.mean(amp_q**2)
    scale = 1.0 / math.sqrt(energy)
    pts, labs = [], []
    for ii, ai in enumerate(amp_i):
        for qq, aq in enumerate(amp_q):
            pts.append(scale * complex(ai, aq))
            labs.append((gi[ii] << bq) | gq[qq])
    return Constellation(name, mi, mq, np.array(pts), np.array(labs, dtype=np.int64), scale)


CONSTELLATION_CODES = {"QPSK": 0, "8QAM": 1, "16QAM": 2}
_SHAPES = {"QPSK": (2, 2), "8QAM": (4, 2), "16QAM": (4, 4)}


@lru_cache(maxsize=None)
def get_constellation(name: str) -> Constellation:
    try:
        mi, mq = _SHAPES[name]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; expected one of {sorted(_SHAPES)}") from None
    return _build(name, mi, mq)


def constellation_from_code(code: int) -> Constellation:
    for name, c in CONSTELLATION_CODES.items():
        if c == code:
            return get_constellation(name)
    raise ValueError(f"unknown constellation code {code}")


def _as_constellation(c) -> Constellation:
    return get_constellation(c) if isinstance(c, str) else c


def _log_ber(snr_linear, c: Constellation):
    # per PAM axis with M levels: 2(1-1/M) Q(d/2sigma) symbol errors, one bit each under Gray
    snr_linear = np.asarray(snr_linear, dtype=float)
    arg = c.scale * np.sqrt(2.0 * snr_linear)
    log_q = log_ndtr(-arg)
    weight = 2.0 * (1 - 1 / c.levels_i) + 2.0 * (1 - 1 / c.levels_q)
    return np.log(weight / c.bits_per_symbol) + log_q


def ber_from_snr(snr, c) -> float:
    """Gray-coded AWGN bit error rate of ``c`` at ``snr`` (Es/N0).

    Nearest-neighbour approximation per PAM axis; exact for QPSK.
    """
    c = _as_constellation(c)
    lin = snr.linear if isinstance(snr, SnrValue) else snr
    if np.any(~(np.asarray(lin) > 0)):
        raise ValueError("snr must be positive")
    out = np.exp(_log_ber(lin, c))
    return float(out) if np.ndim(out) == 0 else out


BISECTION_RANGE_DB = (-5.0, 40.0)


def esnr_from_ber(ber: float, c, tol_db: float = 1e-10) -> SnrValue:
    """Invert :func:`ber_from_snr` by bisection in dB over [-5, 40] dB."""
    c = _as_constellation(c)
    if not (0.0 < ber < 0.5):
        raise ValueError(f"BER must lie in (0, 0.5), got {ber!r}")
    target = math.log(ber)
    lo, hi = BISECTION_RANGE_DB
    if target > _log_ber(linear_from_db(lo), c):
        raise ValueError(f"BER {ber} exceeds the {c.name} curve at {lo} dB")
    if target < _log_ber(linear_from_db(hi), c):
        raise ValueError(f"BER {ber} is below the {c.name} curve at {hi} dB")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if _log_ber(linear_from_db(mid), c) > target:
            lo = mid
        else:
            hi = mid
    return SnrValue.from_db(0.5 * (lo + hi))


def osnr_from_snr_ase(snr_ase: SnrValue, bw: BandwidthPair) -> SnrValue:
    return SnrValue(snr_ase.linear * bw.ratio)


def snr_ase_from_osnr(osnr: SnrValue, bw: BandwidthPair) -> SnrValue:
    return SnrValue(osnr.linear / bw.ratio)


def osnr_offset_db(bw: BandwidthPair) -> float:
    return 10.0 * math.log10(bw.ratio)
