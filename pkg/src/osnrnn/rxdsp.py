"""Floating-point receiver: CD compensation, matched filtering, data-aided
2x2 equalisation, carrier phase recovery, decisions and the noise field.

Clock recovery is ideal: the sampling phase is known and the frame delay is
found by cross-correlation against the transmitted symbols.
"""

from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .metrics import (C_LIGHT, Constellation, SnrValue, constellation_from_code,
                      esnr_from_ber, get_constellation)
from .txmodel import FieldGrid, rrc_response

MIN_FRAME_SYMBOLS = 4096


class FrameFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DspConfig:
    n_taps: int = 15
    phase_window: int = 64
    training_symbols: int = 16384
    ridge: float = 1e-6
    min_bit_errors: int = 100
    decision_directed: bool = False
    rolloff: float = 0.1
    wavelength_nm: float = 1550.0

    @classmethod
    def from_config(cls, cfg: dict) -> "DspConfig":
        d = cfg["dsp"]
        return cls(int(d["n_taps"]), int(d["phase_window"]), int(d["training_symbols"]),
                   float(d["ridge"]), int(d["min_bit_errors"]), bool(d["decision_directed"]),
                   float(cfg["channel_plan"]["rolloff"]), float(cfg.get("wavelength_nm", 1550.0)))


@dataclass(frozen=True)
class LinkMetadata:
    length_km: float
    cumulative_dispersion: float  # ps/nm
    baud: float
    mode: str

    def __post_init__(self):
        if self.length_km < 0 or self.baud <= 0:
            raise ValueError("link metadata must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LinkMetadata":
        return cls(float(d["length_km"]), float(d["cumulative_dispersion"]), float(d["baud"]), str(d["mode"]))


@dataclass
class SymbolFrame:
    tx: np.ndarray  # (2, K) transmitted symbols
    rx: np.ndarray  # (2, K) soft received symbols
    constellation: Constellation
    ber: float
    esnr: SnrValue
    esnr_source: str = "ber"  # "ber" or "evm" (too few errors to invert)
    bit_errors: int = 0
    decision_directed: bool = False
    decisions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.tx = np.asarray(self.tx, dtype=complex)
        self.rx = np.asarray(self.rx, dtype=complex)
        if self.tx.shape != self.rx.shape or self.tx.ndim != 2 or self.tx.shape[0] != 2:
            raise ValueError("tx and rx must both have shape (2, K)")
        if self.tx.shape[1] < MIN_FRAME_SYMBOLS:
            raise ValueError(f"a frame needs at least {MIN_FRAME_SYMBOLS} symbols per polarisation")

    @property
    def count(self) -> int:
        return self.tx.shape[1]

    @property
    def reference(self) -> np.ndarray:
        if self.decision_directed:
            if self.decisions is None:
                self.decisions = hard_decisions(self.rx, self.constellation)[0]
            return self.decisions
        return self.tx

    @property
    def noise(self) -> np.ndarray:
        return self.rx - self.reference


# ---------------------------------------------------------------- frame files
# little-endian: magic, version u16, constellation u8, flags u8, count u32,
# bit errors u64, ber f64, esnr (linear) f64; then tx_x, tx_y, rx_x, rx_y as
# interleaved float32 (re, im) pairs.
FRAME_MAGIC = b"SYMF"
FRAME_VERSION = 1
_HEADER = struct.Struct("<4sHBBIQdd")
_FLAG_EVM = 1
_FLAG_DD = 2


def write_frame(frame: SymbolFrame, path) -> None:
    flags = (_FLAG_EVM if frame.esnr_source == "evm" else 0) | (_FLAG_DD if frame.decision_directed else 0)
    header = _HEADER.pack(FRAME_MAGIC, FRAME_VERSION, frame.constellation.code, flags,
                          frame.count, int(frame.bit_errors), float(frame.ber), float(frame.esnr.linear))
    body = np.concatenate([frame.tx, frame.rx]).astype("<c8").tobytes()
    Path(path).write_bytes(header + body)


def read_frame(path) -> SymbolFrame:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FrameFormatError(f"cannot read frame file {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FrameFormatError("frame file truncated before end of header")
    magic, version, code, flags, count, errors, ber, esnr = _HEADER.unpack_from(raw)
    if magic != FRAME_MAGIC:
        raise FrameFormatError("not a symbol frame file (bad magic)")
    if version != FRAME_VERSION:
        raise FrameFormatError(f"unsupported frame version {version}")
    expected = _HEADER.size + 4 * count * 8
    if len(raw) != expected:
        raise FrameFormatError(f"frame file size {len(raw)} does not match header ({expected} bytes)")
    try:
        c = constellation_from_code(code)
        data = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size).astype(complex).reshape(4, count)
        return SymbolFrame(data[:2], data[2:], c, ber, SnrValue(esnr),
                           "evm" if flags & _FLAG_EVM else "ber", int(errors), bool(flags & _FLAG_DD))
    except ValueError as exc:
        raise FrameFormatError(f"invalid frame content: {exc}") from exc


# ----------------------------------------------------------------- DSP blocks
def total_beta2_length(total_dispersion: float, wavelength_nm: float = 1550.0) -> float:
    """Accumulated beta2*L in s^2 from total dispersion in ps/nm."""
    lam = wavelength_nm * 1e-9
    return -(total_dispersion * 1e-3) * lam**2 / (2 * math.pi * C_LIGHT)


def compensate_cd(wave: FieldGrid, total_dispersion: float, wavelength_nm: float = 1550.0) -> FieldGrid:
    b2l = total_beta2_length(total_dispersion, wavelength_nm)
    omega = 2 * np.pi * wave.freqs()
    spec = np.fft.fft(wave.samples, axis=1) * np.exp(-0.5j * b2l * omega**2)
    return FieldGrid(np.fft.ifft(spec, axis=1), wave.sample_rate, wave.center_freq_offset)


def matched_filter(wave: FieldGrid, baud: float, rolloff: float = 0.1) -> FieldGrid:
    spec = np.fft.fft(wave.samples, axis=1) * rrc_response(wave.freqs(), baud, rolloff)
    return FieldGrid(np.fft.ifft(spec, axis=1), wave.sample_rate, wave.center_freq_offset)


def _sps(wave: FieldGrid, baud: float) -> int:
    r = wave.sample_rate / baud
    sps = int(round(r))
    if abs(r - sps) > 1e-9 or sps < 2:
        raise ValueError("waveform must carry an integer number (>= 2) of samples per symbol")
    return sps


def align_timing(samples: np.ndarray, tx_ref: np.ndarray, sps: int, window: int = 1) -> int:
    """Sample delay that best centres ``tx_ref`` energy in ``samples``.

    Correlation energy over all pol pairs is smoothed over ``window`` lags so
    that a spread (PMD) response is centred rather than its strongest path.
    """
    n = samples.shape[1]
    up = np.zeros((2, n), dtype=complex)
    up[:, ::sps] = tx_ref
    r_f = np.fft.fft(samples, axis=1)
    s_f = np.fft.fft(up, axis=1)
    energy = np.zeros(n)
    for q in range(2):
        for p in range(2):
            energy += np.abs(np.fft.ifft(r_f[q] * np.conj(s_f[p]))) ** 2
    if window > 1:
        kern = np.zeros(n)
        half = window // 2
        kern[np.arange(-half, half + 1) % n] = 1.0
        energy = np.real(np.fft.ifft(np.fft.fft(energy) * np.conj(np.fft.fft(kern))))
    return int(np.argmax(energy))


def _tap_offsets(n_taps: int) -> np.ndarray:
    return np.arange(n_taps) - n_taps // 2


def _regressors(samples: np.ndarray, sps: int, n_taps: int, n_sym: int) -> np.ndarray:
    k = np.arange(n_sym) * sps
    cols = [samples[q][(k + j) % samples.shape[1]] for q in range(2) for j in _tap_offsets(n_taps)]
    return np.stack(cols, axis=1)


def equalize(wave: FieldGrid, tx_ref: np.ndarray, n_taps: int = 15, baud: float = 56e9,
             rolloff: float = 0.1, training_symbols: int = 16384, ridge: float = 1e-6,
             matched: bool = True) -> np.ndarray:
    """Data-aided 2x2 fractionally-spaced FIR equaliser.

    Taps are the ridge-regularised least-squares fit to ``tx_ref`` over the
    first ``training_symbols`` symbols; each output is then rescaled to remove
    the MMSE gain bias. Returns symbol-spaced samples, shape ``(2, K)``.
    """
    sps = _sps(wave, baud)
    if matched:
        wave = matched_filter(wave, baud, rolloff)
    samples = wave.samples
    n_sym = tx_ref.shape[1]
    if samples.shape[1] != n_sym * sps:
        raise ValueError("waveform length does not match the reference symbol count")
    delay = align_timing(samples, tx_ref, sps, window=n_taps)
    samples = np.roll(samples, -delay, axis=1)
    n_train = min(training_symbols, n_sym)
    x = _regressors(samples, sps, n_taps, n_train)
    gram = x.conj().T @ x
    reg = ridge * np.real(np.trace(gram)) / gram.shape[0]
    gram = gram + reg * np.eye(gram.shape[0])
    rhs = x.conj().T @ tx_ref[:, :n_train].T
    try:
        w = np.linalg.solve(gram, rhs)  # (2*n_taps, 2)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular equaliser normal equations (degenerate input)") from exc
    if not np.all(np.isfinite(w)):
        raise ValueError("singular equaliser normal equations (degenerate input)")
    out = np.zeros((2, n_sym), dtype=complex)
    k = np.arange(n_sym) * sps
    for q in range(2):
        for t, j in enumerate(_tap_offsets(n_taps)):
            col = samples[q][(k + j) % samples.shape[1]]
            out += w[q * n_taps + t][:, None] * col[None, :]
    for p in range(2):
        g = np.vdot(tx_ref[p], out[p]) / np.vdot(tx_ref[p], tx_ref[p])
        if abs(g) == 0:
            raise ValueError("equaliser output carries no signal")
        out[p] /= g
    return out


def recover_phase(rx: np.ndarray, tx_ref: np.ndarray, window: int = 64) -> np.ndarray:
    """Sliding-window data-aided carrier phase, common to both polarisations."""
    corr = np.sum(rx * np.conj(tx_ref), axis=0)
    n = corr.size
    half = window // 2
    kern = np.zeros(n)
    kern[np.arange(-half, window - half) % n] = 1.0
    acc = np.fft.ifft(np.fft.fft(corr) * np.conj(np.fft.fft(kern)))
    if np.any(np.abs(acc) <= 1e-300):
        raise ValueError("zero-energy phase estimation window")
    return rx * np.exp(-1j * np.angle(acc))[None, :]


def hard_decisions(rx: np.ndarray, c: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-distance decisions: (decided symbols, point indices)."""
    idx = np.empty(rx.shape, dtype=np.int64)
    for p in range(rx.shape[0]):
        d = np.abs(rx[p][:, None] - c.points[None, :])
        idx[p] = np.argmin(d, axis=1)
    return c.points[idx], idx


def decide_and_measure(rx: np.ndarray, tx: np.ndarray, c, min_bit_errors: int = 100,
                       decision_directed: bool = False) -> SymbolFrame:
    c = get_constellation(c) if isinstance(c, str) else c
    dec, idx_rx = hard_decisions(rx, c)
    _, idx_tx = hard_decisions(tx, c)
    bits = c.bit_matrix()
    errors = int(np.count_nonzero(bits[idx_rx] != bits[idx_tx]))
    n_bits = idx_tx.size * c.bits_per_symbol
    ber = errors / n_bits
    ref = dec if decision_directed else tx
    source = "ber"
    esnr = None
    if errors >= max(min_bit_errors, 1):
        try:
            esnr = esnr_from_ber(ber, c)
        except ValueError:
            esnr = None
    if esnr is None:
        source = "evm"
        noise_power = np.mean(np.abs(rx - ref) ** 2)
        sig = np.mean(np.abs(ref) ** 2)
        esnr = SnrValue(math.inf if noise_power == 0 else sig / noise_power)
    return SymbolFrame(tx, rx, c, ber, esnr, source, errors, decision_directed,
                       dec if decision_directed else None)


def receive_symbols(wave: FieldGrid, tx_ref: np.ndarray, total_dispersion: float, baud: float,
                    dsp: DspConfig = DspConfig()) -> np.ndarray:
    """CD compensation, matched filter, equaliser and phase recovery."""
    w = compensate_cd(wave, total_dispersion, dsp.wavelength_nm)
    rx = equalize(w, tx_ref, dsp.n_taps, baud, dsp.rolloff, dsp.training_symbols, dsp.ridge)
    return recover_phase(rx, tx_ref, dsp.phase_window)


def receive_frame(wave: FieldGrid, tx_ref: np.ndarray, total_dispersion: float, baud: float,
                  c, dsp: DspConfig = DspConfig()) -> SymbolFrame:
    rx = receive_symbols(wave, tx_ref, total_dispersion, baud, dsp)
    return decide_and_measure(rx, tx_ref, c, dsp.min_bit_errors, dsp.decision_directed)


def snr_nl_from_twins(nl_wave: FieldGrid, lin_wave: FieldGrid, tx_ref: np.ndarray,
                      total_dispersion: float, baud: float, dsp: DspConfig = DspConfig()) -> SnrValue:
    """Nonlinear SNR from a nonlinear/linear propagation pair through one
    noiseless receiver chain."""
    rx_nl = receive_symbols(nl_wave, tx_ref, total_dispersion, baud, dsp)
    rx_lin = receive_symbols(lin_wave, tx_ref, total_dispersion, baud, dsp)
    d = np.mean(np.abs(rx_nl - rx_lin) ** 2)
    s = np.mean(np.abs(tx_ref) ** 2)
    return SnrValue(math.inf if d == 0 else s / d)


def ground_truth_snr_nl(scenario, tx_field: FieldGrid, tx_symbols: np.ndarray, cfg: dict) -> SnrValue:
    """Propagate ``tx_field`` with and without the Kerr term and compare the
    probe channel after identical noiseless DSP."""
    from .scenario import propagate_probe  # late import: scenario builds on this module

    nl, lin = propagate_probe(scenario, tx_field, cfg)
    dsp = DspConfig.from_config(cfg)
    return snr_nl_from_twins(nl, lin, tx_symbols, scenario.route.cumulative_dispersion,
                             scenario.baud, dsp)
