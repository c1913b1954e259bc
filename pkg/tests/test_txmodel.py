"""Symbol generation, RRC shaping and WDM multiplexing."""

import numpy as np
import pytest
from scipy import stats

from osnrnn.metrics import get_constellation
from osnrnn.rxdsp import matched_filter
from osnrnn.txmodel import (
    FieldGrid,
    TxChannel,
    channel_offsets,
    choose_sim_sps,
    gen_symbols,
    mux_wdm,
    rrc_response,
    shape_waveform,
)

BAUD = 56e9
SPACING = 62.5e9


def channel(seed, k=4096, power=1e-3, offset=0.0, name="QPSK"):
    c = get_constellation(name)
    return TxChannel(gen_symbols(seed, k, c), c, BAUD, offset, power)


def evm_db(rx, tx):
    g = np.vdot(tx, rx) / np.vdot(tx, tx)
    return 10 * np.log10(np.mean(np.abs(rx / g - tx) ** 2) / np.mean(np.abs(tx) ** 2))


class TestSymbols:
    def test_deterministic(self):
        a = gen_symbols(7, 1000, "16QAM")
        np.testing.assert_array_equal(a, gen_symbols(7, 1000, "16QAM"))
        assert a.shape == (2, 1000)

    def test_mean_energy(self):
        s = gen_symbols(3, 2**16, "QPSK")
        assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("name", ["QPSK", "8QAM", "16QAM"])
    def test_uniform_histogram(self, name):
        c = get_constellation(name)
        s = gen_symbols(11, 2**15, c).ravel()
        idx = np.argmin(np.abs(s[:, None] - c.points[None, :]), axis=1)
        counts = np.bincount(idx, minlength=c.size)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_count_positive(self):
        with pytest.raises(ValueError):
            gen_symbols(0, 0, "QPSK")


class TestShaping:
    def test_rolloff_domain(self):
        with pytest.raises(ValueError):
            rrc_response(np.zeros(3), BAUD, 1.5)
        with pytest.raises(ValueError):
            shape_waveform(channel(0), 2, -0.1)

    def test_power(self):
        w = shape_waveform(channel(1, power=2.5e-3), 4)
        assert w.power == pytest.approx(2.5e-3, rel=1e-3)
        w2 = shape_waveform(channel(1, power=5e-3), 4)
        assert w2.power / w.power == pytest.approx(2.0, rel=1e-12)

    def test_out_of_band_suppression(self):
        w = shape_waveform(channel(2), 8, 0.1)
        psd = np.sum(np.abs(w.spectrum()) ** 2, axis=0)
        f = np.abs(w.freqs())
        outside = psd[f > 1.1 * BAUD / 2].max()
        assert 10 * np.log10(outside / psd.max()) < -40

    @pytest.mark.parametrize("name", ["QPSK", "8QAM", "16QAM"])
    def test_loopback_evm(self, name):
        ch = channel(5, name=name)
        w = matched_filter(shape_waveform(ch, 2, 0.1), BAUD, 0.1)
        assert evm_db(w.samples[:, ::2], ch.symbols) < -35

    def test_parseval(self):
        w = shape_waveform(channel(9), 4)
        spec_energy = np.sum(np.abs(w.spectrum()) ** 2) / w.n
        assert spec_energy == pytest.approx(w.energy, rel=1e-9)

    def test_sps_at_least_two(self):
        with pytest.raises(ValueError):
            shape_waveform(channel(0), 1)


class TestMux:
    def test_single_channel_identity(self):
        ch = channel(4)
        wdm = mux_wdm([ch], SPACING, 4 * BAUD)
        np.testing.assert_allclose(wdm.samples, shape_waveform(ch, 4).samples, atol=1e-12)

    def test_additivity_13_channels(self):
        n = 13
        sps = choose_sim_sps(n, SPACING, BAUD)
        assert sps == 16
        offs = channel_offsets(n, SPACING)
        chans = [channel(i, k=1024, offset=o) for i, o in enumerate(offs)]
        wdm = mux_wdm(chans, SPACING, sps * BAUD)
        assert wdm.power == pytest.approx(n * 1e-3, rel=5e-3)

        # one spectral peak region per channel, centred on the grid
        psd = np.sum(np.abs(wdm.spectrum()) ** 2, axis=0)
        f = wdm.freqs()
        for o in offs:
            band = np.abs(f - o) < 0.4 * BAUD
            gap = np.abs(f - o - SPACING / 2) < 0.5e9
            assert psd[band].mean() > 1e3 * psd[gap].mean()

    def test_aliasing_rejected(self):
        chans = [channel(i, k=1024, offset=o) for i, o in enumerate(channel_offsets(5, SPACING))]
        with pytest.raises(ValueError):
            mux_wdm(chans, SPACING, 2 * BAUD)

    def test_non_integer_rate_rejected(self):
        with pytest.raises(ValueError):
            mux_wdm([channel(0, k=1024)], SPACING, 3.3 * BAUD)

    def test_field_shape_checked(self):
        with pytest.raises(ValueError):
            FieldGrid(np.zeros(8), 1.0)
