"""Triplet projections, demodulated-noise doublets and the feature layout."""

import math

import numpy as np
import pytest

from conftest import B2B_META
from osnrnn.features import (
    ESNR_CAP_DB,
    FEATURE_LAYOUT_ID,
    N_FEATURES,
    FeatureVector,
    c_coefficients,
    doublets,
    extract_features,
    feature_names,
    triplet,
)
from osnrnn.metrics import SnrValue, get_constellation
from osnrnn.rxdsp import LinkMetadata, SymbolFrame
from osnrnn.txmodel import gen_symbols

QPSK = get_constellation("QPSK")


def synthetic_frame(k=2**14, seed=0, noise_db=-15.0, plant=None, phase=None):
    """Frame with white noise at ``noise_db`` relative to the symbols, an
    optional planted triplet term ``{(m, n): c}`` and an optional common
    phase trajectory."""
    rng = np.random.default_rng(seed)
    tx = gen_symbols(seed, k, QPSK)
    sigma = math.sqrt(10 ** (noise_db / 10) / 2)
    rx = tx + sigma * (rng.standard_normal(tx.shape) + 1j * rng.standard_normal(tx.shape))
    for (m, n), c in (plant or {}).items():
        rx = rx + c * np.stack([triplet(tx, m, n, p) for p in range(2)])
    if phase is not None:
        rx = rx * np.exp(1j * phase)[None, :]
    return SymbolFrame(tx, rx, QPSK, 0.0, SnrValue.from_db(-noise_db), "evm")


def mean_floor(frames):
    co = np.mean([np.abs(doublets(f).co) for f in frames])
    cross = np.mean([np.abs(doublets(f).cross) for f in frames])
    return co, cross


class TestCCoefficients:
    def test_planted_kernel_recovered(self):
        c0 = 0.01 * np.exp(0.6j)
        cc = c_coefficients(synthetic_frame(seed=3, plant={(1, 2): c0}))
        assert abs(cc[(1, 2)] - c0) < 3 * cc.std_error[cc.index_set.index((1, 2))]
        # unplanted coefficients stay at the noise floor; (2, 1) shares the
        # single-polarisation half of the (1, 2) triplet and (0, 0) is the symbol itself
        others = [i for i, mn in enumerate(cc.index_set) if mn not in ((1, 2), (2, 1), (0, 0))]
        assert np.all(np.abs(cc.values[others]) < 5 * cc.std_error[others])

    def test_standard_error_matches_spread(self):
        est = np.array([c_coefficients(synthetic_frame(k=4096, seed=s), [(1, 1)]).values[0]
                        for s in range(200)])
        se = c_coefficients(synthetic_frame(k=4096, seed=0), [(1, 1)]).std_error[0]
        # complex estimate: E|c|^2 = se^2
        assert np.sqrt(np.mean(np.abs(est) ** 2)) == pytest.approx(se, rel=0.15)

    def test_index_bound(self):
        with pytest.raises(ValueError):
            c_coefficients(synthetic_frame(k=4096), [(33, 0)])


class TestDoublets:
    def test_white_noise_floor(self):
        k = 2**14
        frames = [synthetic_frame(k=k, seed=s) for s in range(4)]
        co, cross = mean_floor(frames)
        # Rayleigh means for E|R_co|^2 = 1/(2K) and E|R_cross|^2 = 1/K
        assert co == pytest.approx(math.sqrt(math.pi / 4 / (2 * k)), rel=0.3)
        assert cross == pytest.approx(math.sqrt(math.pi / 4 / k), rel=0.3)

    def test_zero_lag_co_correlation_is_one(self):
        d = doublets(synthetic_frame(seed=7), co_lags=[0, 1])
        assert d.co[0] == pytest.approx(1.0, abs=1e-12)
        assert abs(d.co[1]) < 5 / math.sqrt(2**14)

    def test_floor_scales_with_inverse_sqrt_count(self):
        small = mean_floor([synthetic_frame(k=2**12, seed=s) for s in range(6)])
        large = mean_floor([synthetic_frame(k=2**16, seed=s) for s in range(6)])
        for a, b in zip(small, large):
            assert a / b == pytest.approx(4.0, rel=0.25)

    def test_correlated_phase_noise_detected(self):
        rng = np.random.default_rng(1)
        phase = np.convolve(rng.standard_normal(2**14 + 15), np.ones(16) / 4, mode="valid")[: 2**14] * 0.1
        d = doublets(synthetic_frame(seed=1, noise_db=-30.0, phase=phase))
        assert abs(d.co[0]) > 0.5 and abs(d.co[0]) > abs(d.co[-1])

    def test_noiseless_frame(self):
        tx = gen_symbols(0, 4096, QPSK)
        d = doublets(SymbolFrame(tx, tx.copy(), QPSK, 0.0, SnrValue(math.inf), "evm"))
        assert np.all(d.co == 0) and np.all(d.cross == 0)

    def test_lag_bound(self):
        with pytest.raises(ValueError):
            doublets(synthetic_frame(k=4096), co_lags=[65])


class TestFeatureVector:
    def test_layout(self, awgn_frame):
        frame, _ = awgn_frame(15.0)
        meta = LinkMetadata(1200.0, 20400.0, B2B_META.baud, "56-200G")
        fv = extract_features(frame, meta)
        assert fv.values.shape == (N_FEATURES,) and fv.layout_id == FEATURE_LAYOUT_ID
        assert len(fv.names) == N_FEATURES == len(set(feature_names()))
        assert fv.values[0] == pytest.approx(frame.esnr.db)
        assert fv.values[1] == pytest.approx(1.2) and fv.values[2] == pytest.approx(2.04)
        assert np.all(fv.values[3:] >= 0)

    def test_infinite_esnr_capped(self):
        tx = gen_symbols(0, 4096, QPSK)
        fv = extract_features(SymbolFrame(tx, tx.copy(), QPSK, 0.0, SnrValue(math.inf), "evm"), B2B_META)
        assert fv.values[0] == ESNR_CAP_DB

    def test_vector_validation(self):
        with pytest.raises(ValueError):
            FeatureVector(np.zeros(34))
        v = np.zeros(35)
        v[4] = np.nan
        with pytest.raises(ValueError):
            FeatureVector(v)

    def test_deterministic(self):
        f = synthetic_frame(k=4096, seed=2)
        np.testing.assert_array_equal(extract_features(f, B2B_META).values, extract_features(f, B2B_META).values)
