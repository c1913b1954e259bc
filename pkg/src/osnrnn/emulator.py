"""Linear channel emulator: patterning, segment-wise polarisation rotation,
DGD and PDL, and ASE loading distributed over the segments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import SnrValue
from .txmodel import FieldGrid

_MAXWELL_MEAN = 2.0 * math.sqrt(2.0 / math.pi)


def sample_maxwellian(seed, mean: float, size=None):
    """Maxwell-Boltzmann draw(s) with the given mean."""
    if mean < 0:
        raise ValueError("mean must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a = mean / _MAXWELL_MEAN
    shape = (3,) if size is None else (*np.atleast_1d(size), 3)
    v = np.linalg.norm(rng.normal(0.0, 1.0, size=shape) * a, axis=-1)
    return float(v) if size is None else v


def haar_unitary(rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def pdl_gains(pdl_db: float) -> tuple[float, float]:
    """Power gains of the two PDL eigenstates, with unit mean (g1 + g2 = 2)."""
    r = 10 ** (pdl_db / 10)
    return 2 * r / (1 + r), 2 / (1 + r)


@dataclass
class Segment:
    rotation: np.ndarray  # 2x2 unitary applied first
    dgd: float  # s, along the rotated x/y axes
    pdl_db: float = 0.0
    pdl_axes: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))

    def jones(self, omega: np.ndarray) -> np.ndarray:
        """Jones matrices, shape ``(len(omega), 2, 2)``."""
        omega = np.atleast_1d(omega)
        ph = np.exp(0.5j * omega * self.dgd)
        d = np.zeros((omega.size, 2, 2), dtype=complex)
        d[:, 0, 0] = ph
        d[:, 1, 1] = np.conj(ph)
        return self.pdl_matrix() @ d @ self.rotation

    def pdl_matrix(self) -> np.ndarray:
        g1, g2 = pdl_gains(self.pdl_db)
        return self.pdl_axes.conj().T @ np.diag([math.sqrt(g1), math.sqrt(g2)]) @ self.pdl_axes

    def apply(self, spec: np.ndarray, omega: np.ndarray) -> np.ndarray:
        """Apply the segment to a ``(2, n)`` spectrum."""
        u = self.rotation @ spec
        ph = np.exp(0.5j * omega * self.dgd)
        u[0] *= ph
        u[1] *= np.conj(ph)
        return self.pdl_matrix() @ u


@dataclass
class EmulatorChain:
    segments: list[Segment]
    total_dgd: float = 0.0  # s, drawn value
    total_pdl_db: float = 0.0  # drawn value

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def jones(self, omega) -> np.ndarray:
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        j = np.broadcast_to(np.eye(2, dtype=complex), (omega.size, 2, 2)).copy()
        for seg in self.segments:
            j = seg.jones(omega) @ j
        return j


def chain_dgd(chain: EmulatorChain, omega: float = 0.0, d_omega: float = 2 * np.pi * 1e6) -> float:
    """DGD from the frequency derivative of the eigenphases of the lossless
    part of the chain (PDL removed)."""
    lossless = EmulatorChain([Segment(s.rotation, s.dgd) for s in chain.segments])
    j = lossless.jones(np.array([omega - d_omega, omega + d_omega]))
    # J(w+dw) J(w-dw)^H has eigenphases +-tau*dw
    m = j[1] @ j[0].conj().T
    ev = np.linalg.eigvals(m)
    return float(abs(np.angle(ev[0] / ev[1])) / (2 * d_omega))


MAX_DGD_RESCALE = 1.25  # accepted range of the fine rescale, either direction
_MAX_ROTATION_DRAWS = 200


def build_emulator(seed, n_segments: int = 50, dgd_mean: float = 25e-12,
                   pdl_mean: float = 2.0) -> EmulatorChain:
    """Random emulator chain; total DGD (s) and PDL (dB) are Maxwellian draws.

    Each segment gets a Haar rotation, DGD total/sqrt(n) along its axes and an
    equal dB share of the PDL with a random orientation. A random-axis chain
    only reaches the drawn DGD on average, so the rotations are redrawn until
    the chain DGD at the carrier lies within ``MAX_DGD_RESCALE`` of the drawn
    total, and the segment DGDs are then rescaled to hit it exactly. Bounding
    the rescale keeps the in-band (higher-order) PMD at its natural level.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    rng = np.random.default_rng(seed)
    total_dgd = sample_maxwellian(rng, dgd_mean) if dgd_mean > 0 else 0.0
    total_pdl = sample_maxwellian(rng, pdl_mean) if pdl_mean > 0 else 0.0
    seg_dgd = total_dgd / math.sqrt(n_segments)
    pdl_axes = [haar_unitary(rng) for _ in range(n_segments)]
    best = None
    for _ in range(_MAX_ROTATION_DRAWS):
        segments = [Segment(haar_unitary(rng), seg_dgd, total_pdl / n_segments, pdl_axes[i])
                    for i in range(n_segments)]
        chain = EmulatorChain(segments, total_dgd, total_pdl)
        if total_dgd == 0:
            return chain
        agg = chain_dgd(chain)
        factor = total_dgd / agg if agg > 0 else math.inf
        if best is None or abs(math.log(factor)) < abs(math.log(best[1])):
            best = (chain, factor)
        if 1 / MAX_DGD_RESCALE <= factor <= MAX_DGD_RESCALE:
            break
    chain, factor = best
    for s in chain.segments:
        s.dgd *= factor
    return chain


def noise_variance_per_sample(signal_power: float, sample_rate: float, baud: float,
                              target: SnrValue) -> float:
    """Total (both pols) white-noise variance per sample giving ``target`` SNR
    in the symbol-rate bandwidth."""
    return signal_power * (sample_rate / baud) / target.linear


def apply_emulator(wave: FieldGrid, chain: EmulatorChain, target_snr_ase: SnrValue,
                   pattern_count: int = 20, baud: float = 56e9, seed=None,
                   signal_power: float | None = None) -> FieldGrid:
    """Tile ``wave`` ``pattern_count`` times and run it through ``chain``.

    After each segment transform an equal share of circular white Gaussian
    noise is added. PDL elements have unit mean gain, so unpolarised signal
    and noise keep their expected power and the shares add up to the target
    SNR over the symbol-rate bandwidth.
    """
    if pattern_count < 1:
        raise ValueError("pattern_count must be >= 1")
    if wave.sample_rate < 2 * baud * (1 - 1e-12):
        raise ValueError("emulator input needs at least 2 samples per symbol")
    rng = np.random.default_rng(seed)
    tiled = np.tile(wave.samples, (1, pattern_count))
    n = tiled.shape[1]
    omega = 2 * np.pi * np.fft.fftfreq(n, 1.0 / wave.sample_rate)
    spec = np.fft.fft(tiled, axis=1)
    p_sig = wave.power if signal_power is None else signal_power
    noisy = not math.isinf(target_snr_ase.linear)
    if noisy:
        var = noise_variance_per_sample(p_sig, wave.sample_rate, baud, target_snr_ase)
        if not var > 0:
            raise ValueError("target SNR unreachable")
        # per polarisation, per segment; an unnormalised FFT scales variance by n
        seg_sigma = math.sqrt(var / 2 / chain.n_segments * n / 2)
    for seg in chain.segments:
        spec = seg.apply(spec, omega)
        if noisy:
            spec += seg_sigma * (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))
    return FieldGrid(np.fft.ifft(spec, axis=1), wave.sample_rate, wave.center_freq_offset)
