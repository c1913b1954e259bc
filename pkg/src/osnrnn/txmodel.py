"""Transmitter: random symbols, root-raised-cosine shaping and WDM multiplexing.

Fields are dual-polarisation arrays of shape ``(2, n)`` in sqrt(W); all
filtering happens on the periodic FFT grid, so waveforms are circular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import Constellation, get_constellation


@dataclass
class FieldGrid:
    samples: np.ndarray
    sample_rate: float
    center_freq_offset: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 2 or self.samples.shape[0] != 2:
            raise ValueError("field samples must have shape (2, n)")

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def power(self) -> float:
        """Mean optical power summed over both polarisations."""
        return float(np.mean(np.abs(self.samples[0]) ** 2 + np.abs(self.samples[1]) ** 2))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.samples, axis=1)

    def freqs(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.sample_rate)

    def copy(self) -> "FieldGrid":
        return FieldGrid(self.samples.copy(), self.sample_rate, self.center_freq_offset)


@dataclass
class TxChannel:
    symbols: np.ndarray  # (2, K), unit mean energy
    constellation: Constellation
    baud: float
    offset: float  # Hz, relative to grid centre
    power: float  # W, both polarisations
    seed: int | None = None

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[1]


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def gen_symbols(seed, count: int, constellation) -> np.ndarray:
    """I.i.d. uniform constellation symbols for x and y, shape ``(2, count)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    c = get_constellation(constellation) if isinstance(constellation, str) else constellation
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, c.size, size=(2, count))
    return c.points[idx]


def rrc_response(freqs: np.ndarray, baud: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine amplitude response, unity in the flat band."""
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    f = np.abs(np.asarray(freqs, dtype=float))
    f1 = (1 - rolloff) * baud / 2
    f2 = (1 + rolloff) * baud / 2
    h = np.zeros_like(f)
    h[f <= f1] = 1.0
    if rolloff > 0:
        band = (f > f1) & (f <= f2)
        h[band] = np.sqrt(0.5 * (1 + np.cos(np.pi / (rolloff * baud) * (f[band] - f1))))
    return h


def _shaped_spectrum(symbols: np.ndarray, baud: float, sps: int, rolloff: float) -> np.ndarray:
    k = symbols.shape[1]
    spec = np.tile(np.fft.fft(symbols, axis=1), (1, sps))  # zero-insertion upsampling
    return spec * rrc_response(np.fft.fftfreq(k * sps, 1.0 / (sps * baud)), baud, rolloff)


def shape_waveform(ch: TxChannel, samples_per_symbol: int, rolloff: float = 0.1) -> FieldGrid:
    """Baseband RRC waveform of one channel scaled to its launch power."""
    if samples_per_symbol < 2 or int(samples_per_symbol) != samples_per_symbol:
        raise ValueError("samples_per_symbol must be an integer >= 2")
    sps = int(samples_per_symbol)
    wave = np.fft.ifft(_shaped_spectrum(ch.symbols, ch.baud, sps, rolloff), axis=1)
    p = np.mean(np.sum(np.abs(wave) ** 2, axis=0))
    wave *= np.sqrt(ch.power / p)
    return FieldGrid(wave, sps * ch.baud, 0.0)


def channel_offsets(n_channels: int, spacing: float, probe: int | None = None) -> np.ndarray:
    """Channel centre offsets with the probe channel at 0 Hz."""
    probe = n_channels // 2 if probe is None else probe
    return (np.arange(n_channels) - probe) * spacing


def choose_sim_sps(n_channels: int, spacing: float, baud: float, minimum: int = 2) -> int:
    """Smallest power-of-two samples/symbol whose band covers ``n_channels * spacing``."""
    sps = minimum
    while sps * baud < n_channels * spacing:
        sps *= 2
    return sps


def offset_bin(offset: float, sample_rate: float, n: int) -> int:
    """Nearest FFT bin for a carrier offset; channels are snapped to the grid."""
    return int(round(offset * n / sample_rate))


def mux_wdm(channels: list[TxChannel], grid_spacing: float, sim_sample_rate: float,
            rolloff: float = 0.1) -> FieldGrid:
    """Sum of frequency-shifted RRC channels on one simulation grid.

    Offsets are rounded to the nearest FFT bin (bin width is baud/K, a few MHz
    for typical K), which keeps the shift an exact circular frequency roll.
    """
    if not channels:
        raise ValueError("need at least one channel")
    baud, k = channels[0].baud, channels[0].n_symbols
    if any(c.baud != baud or c.n_symbols != k for c in channels):
        raise ValueError("all channels must share symbol rate and length")
    ratio = sim_sample_rate / baud
    sps = int(round(ratio))
    if abs(ratio - sps) > 1e-9 or sps < 2:
        raise ValueError("simulation sample rate must be an integer multiple (>= 2) of the baud")
    n = k * sps
    if not _is_pow2(n):
        raise ValueError("simulation grid length must be a power of two")
    nyq = sim_sample_rate / 2
    for c in channels:
        if abs(c.offset) + (1 + rolloff) * baud / 2 > nyq:
            raise ValueError(
                f"channel at {c.offset / 1e9:.2f} GHz does not fit in the {sim_sample_rate / 1e9:.1f} GHz grid"
            )
    if len(channels) > 1 and sim_sample_rate < len(channels) * grid_spacing:
        raise ValueError("simulation band narrower than the WDM comb")
    total = np.zeros((2, n), dtype=complex)
    for c in channels:
        spec = _shaped_spectrum(c.symbols, baud, sps, rolloff)
        # scale in the frequency domain so the time-domain power equals c.power
        p = np.sum(np.abs(spec) ** 2) / n**2
        spec *= np.sqrt(c.power / p)
        total += np.roll(spec, offset_bin(c.offset, sim_sample_rate, n), axis=1)
    return FieldGrid(np.fft.ifft(total, axis=1), sim_sample_rate, 0.0)
