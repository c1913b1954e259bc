"""Nonlinear-noise correlation features and the 35-element NN input vector.

Layout (``FEATURE_LAYOUT_ID``)::

    [0]       ESNR, dB
    [1]       link length / 1000 km
    [2]       cumulative dispersion / 1e4 ps/nm
    [3..18]   |C(m, n)|, (m, n) in {-1,0,1,2} x {-1,0,1,2}, row-major
    [19..26]  |R_co(m)|, m = 1..8
    [27..34]  |R_cross(m)|, m = 0..7
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import SnrValue
from .rxdsp import MIN_FRAME_SYMBOLS, LinkMetadata, SymbolFrame

FEATURE_LAYOUT_ID = "esnr-len-cd/cc4x4/co1-8/cross0-7/v1"
N_FEATURES = 35
DEFAULT_CC_M = (-1, 0, 1, 2)
DEFAULT_CC_N = (-1, 0, 1, 2)
DEFAULT_CO_LAGS = tuple(range(1, 9))
DEFAULT_CROSS_LAGS = tuple(range(0, 8))
MAX_CC_INDEX = 32
MAX_LAG = 64
ESNR_CAP_DB = 60.0  # error-free noiseless frames report infinite ESNR


@dataclass
class CCoefficients:
    index_set: list[tuple[int, int]]
    values: np.ndarray  # complex, one per index
    std_error: np.ndarray  # standard error of each estimate under white noise
    normalization: str = "noise-field projection onto unit-power triplets, x/y averaged"

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)

    def __getitem__(self, mn):
        return self.values[self.index_set.index(tuple(mn))]


@dataclass
class Doublets:
    co_lags: list[int]
    cross_lags: list[int]
    co: np.ndarray
    cross: np.ndarray
    normalization: str = "symbol-demodulated noise, divided by its mean power"


@dataclass
class FeatureVector:
    values: np.ndarray
    layout_id: str = FEATURE_LAYOUT_ID
    names: list[str] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have exactly {N_FEATURES} entries")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


def _check_frame(frame: SymbolFrame):
    if frame.count < MIN_FRAME_SYMBOLS:
        raise ValueError(f"need at least {MIN_FRAME_SYMBOLS} symbols, got {frame.count}")


def triplet(s: np.ndarray, m: int, n: int, pol: int) -> np.ndarray:
    """First-order intra-channel perturbation kernel for polarisation ``pol``:
    ``(a[k+m] a*[k+m+n] + b[k+m] b*[k+m+n]) * s_pol[k+n]``, circular in k."""
    x, y = s
    xm, ym = np.roll(x, -m), np.roll(y, -m)
    xmn, ymn = np.roll(x, -(m + n)), np.roll(y, -(m + n))
    return (xm * np.conj(xmn) + ym * np.conj(ymn)) * np.roll(s[pol], -n)


def c_coefficients(frame: SymbolFrame, index_set=None) -> CCoefficients:
    """Least-squares projection of the noise field onto each triplet."""
    _check_frame(frame)
    if index_set is None:
        index_set = [(m, n) for m in DEFAULT_CC_M for n in DEFAULT_CC_N]
    index_set = [tuple(int(v) for v in mn) for mn in index_set]
    if any(abs(v) > MAX_CC_INDEX for mn in index_set for v in mn):
        raise ValueError(f"C-coefficient indices must lie within +-{MAX_CC_INDEX}")
    s = frame.reference
    delta = frame.noise
    noise_var = np.mean(np.abs(delta) ** 2, axis=1)
    vals = np.empty(len(index_set), dtype=complex)
    se = np.empty(len(index_set))
    for i, (m, n) in enumerate(index_set):
        est, var = [], []
        for pol in range(2):
            t = triplet(s, m, n, pol)
            tt = np.sum(np.abs(t) ** 2)
            est.append(np.sum(delta[pol] * np.conj(t)) / tt)
            var.append(noise_var[pol] / tt)
        vals[i] = 0.5 * (est[0] + est[1])
        se[i] = 0.5 * np.sqrt(var[0] + var[1])
    return CCoefficients(index_set, vals, se)


def demodulated_noise(frame: SymbolFrame) -> np.ndarray:
    """Noise field referred to the symbol it rides on, ``delta * conj(s)``.

    Multiplicative (phase / polarisation) perturbations keep their temporal
    correlation in this frame even though the symbols are random.
    """
    ref = frame.reference
    return frame.noise * np.conj(ref) / np.mean(np.abs(ref) ** 2)


def doublets(frame: SymbolFrame, co_lags=DEFAULT_CO_LAGS, cross_lags=DEFAULT_CROSS_LAGS) -> Doublets:
    """Co- and cross-polarised lagged correlations of the demodulated noise.

    ``R_co(m) = E[d_x,k d*_x,k+m + d_y,k d*_y,k+m] / E[|d_x|^2 + |d_y|^2]`` and
    ``R_cross(m) = E[d_x,k d*_y,k+m] / E[(|d_x|^2 + |d_y|^2) / 2]``.
    """
    _check_frame(frame)
    co_lags, cross_lags = [int(m) for m in co_lags], [int(m) for m in cross_lags]
    if any(abs(m) > MAX_LAG for m in co_lags + cross_lags):
        raise ValueError(f"doublet lags must lie within +-{MAX_LAG}")
    d = demodulated_noise(frame)
    dx, dy = d
    power = np.mean(np.abs(dx) ** 2 + np.abs(dy) ** 2)
    if power == 0:
        co = np.zeros(len(co_lags), dtype=complex)
        cross = np.zeros(len(cross_lags), dtype=complex)
        return Doublets(co_lags, cross_lags, co, cross)
    co = np.array([np.mean(dx * np.conj(np.roll(dx, -m)) + dy * np.conj(np.roll(dy, -m))) / power
                   for m in co_lags])
    cross = np.array([np.mean(dx * np.conj(np.roll(dy, -m))) / (power / 2) for m in cross_lags])
    return Doublets(co_lags, cross_lags, co, cross)


def feature_names() -> list[str]:
    names = ["esnr_db", "length_1000km", "cumdisp_1e4psnm"]
    names += [f"cc_{m}_{n}" for m in DEFAULT_CC_M for n in DEFAULT_CC_N]
    names += [f"rco_{m}" for m in DEFAULT_CO_LAGS]
    names += [f"rcross_{m}" for m in DEFAULT_CROSS_LAGS]
    return names


def assemble_features(cc: CCoefficients, dbl: Doublets, meta: LinkMetadata, esnr: SnrValue) -> FeatureVector:
    if len(cc.values) != 16 or len(dbl.co) != 8 or len(dbl.cross) != 8:
        raise ValueError("component sizes do not match the 35-feature layout")
    head = [min(esnr.db, ESNR_CAP_DB), meta.length_km / 1000.0, meta.cumulative_dispersion / 1e4]
    values = np.concatenate([head, cc.magnitudes(), np.abs(dbl.co), np.abs(dbl.cross)])
    return FeatureVector(values, FEATURE_LAYOUT_ID, feature_names())


def extract_features(frame: SymbolFrame, meta: LinkMetadata, cfg: dict | None = None) -> FeatureVector:
    f = (cfg or {}).get("features", {})
    index_set = [(m, n) for m in f.get("cc_m", DEFAULT_CC_M) for n in f.get("cc_n", DEFAULT_CC_N)]
    cc = c_coefficients(frame, index_set)
    dbl = doublets(frame, f.get("co_lags", DEFAULT_CO_LAGS), f.get("cross_lags", DEFAULT_CROSS_LAGS))
    return assemble_features(cc, dbl, meta, frame.esnr)
