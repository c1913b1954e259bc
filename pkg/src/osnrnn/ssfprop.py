"""Symmetric split-step Fourier solver for the Manakov equation.

Convention: with numpy's FFT, the dispersion operator per length ``h`` is
``exp(+1j * beta2 / 2 * w**2 * h)`` and the Kerr step is
``exp(+1j * 8/9 * gamma * (|Ax|^2 + |Ay|^2) * h)``. ``rxdsp.compensate_cd``
applies the exact inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .routegen import Route, Span, beta2_from_dispersion
from .txmodel import FieldGrid, offset_bin

MANAKOV_FACTOR = 8.0 / 9.0
DEFAULT_SPACING_HZ = 62.5e9


@dataclass(frozen=True)
class SsfConfig:
    max_nonlinear_phase: float = 0.003  # rad per step, on mean power
    max_step_km: float = 10.0
    fixed_step_km: float | None = None
    wavelength_nm: float = 1550.0

    def __post_init__(self):
        if self.fixed_step_km is not None:
            if not self.fixed_step_km > 0:
                raise ValueError("fixed step must be positive")
        elif not 0 < self.max_nonlinear_phase <= 0.1:
            raise ValueError("max nonlinear phase per step must lie in (0, 0.1] rad")
        if not self.max_step_km > 0:
            raise ValueError("max_step_km must be positive")

    @classmethod
    def from_config(cls, cfg: dict) -> "SsfConfig":
        s = cfg["ssf"]
        return cls(float(s["max_nonlinear_phase"]), float(s["max_step_km"]),
                   None if s.get("fixed_step_km") is None else float(s["fixed_step_km"]),
                   float(cfg.get("wavelength_nm", 1550.0)))


def _span_si(span: Span, wavelength_nm: float):
    alpha = span.fiber.loss * math.log(10) / 10 / 1e3  # power attenuation, 1/m
    beta2 = beta2_from_dispersion(span.fiber.dispersion, wavelength_nm) * 1e-27  # s^2/m
    gamma = span.fiber.gamma * 1e-3  # 1/(W m)
    return alpha, beta2, gamma, span.length * 1e3


def step_sizes(length_m: float, alpha: float, gamma: float, power: float, cfg: SsfConfig) -> np.ndarray:
    """Step lengths in metres; adaptive steps cap the mean-power nonlinear phase."""
    max_step = cfg.max_step_km * 1e3
    if cfg.fixed_step_km is not None:
        h = min(cfg.fixed_step_km * 1e3, length_m)
        n = int(math.ceil(length_m / h - 1e-9))
        return np.full(n, length_m / n)
    steps, z = [], 0.0
    k = MANAKOV_FACTOR * gamma * power
    while z < length_m * (1 - 1e-12):
        p_rel = math.exp(-alpha * z)
        h = max_step if k == 0 else min(max_step, cfg.max_nonlinear_phase / (k * p_rel))
        h = min(h, length_m - z)
        steps.append(h)
        z += h
    return np.array(steps)


def linear_operator(omega: np.ndarray, alpha: float, beta2: float, length_m: float) -> np.ndarray:
    return np.exp((-alpha / 2 + 0.5j * beta2 * omega**2) * length_m)


def propagate_fiber(field: FieldGrid, length_m: float, alpha: float, beta2: float, gamma: float,
                    cfg: SsfConfig = SsfConfig(), nonlinear: bool = True) -> FieldGrid:
    """Symmetric split-step solution of the Manakov equation in SI units.

    ``alpha`` is the power attenuation (1/m), ``beta2`` in s^2/m and ``gamma``
    in 1/(W m). With ``nonlinear=False`` the exact linear transfer function is
    applied in one step.
    """
    if not length_m > 0:
        raise ValueError("fiber length must be positive")
    omega = 2 * np.pi * np.fft.fftfreq(field.n, 1.0 / field.sample_rate)
    spec = np.fft.fft(field.samples, axis=1)
    if not nonlinear:
        spec *= linear_operator(omega, alpha, beta2, length_m)
        return FieldGrid(np.fft.ifft(spec, axis=1), field.sample_rate, field.center_freq_offset)

    gen = -alpha / 2 + 0.5j * beta2 * omega**2
    steps = step_sizes(length_m, alpha, gamma, field.power, cfg)
    k = MANAKOV_FACTOR * gamma
    # half linear steps of neighbouring slices are merged into one
    spec *= np.exp(gen * (steps[0] / 2))
    for i, h in enumerate(steps):
        a = np.fft.ifft(spec, axis=1)
        p = a[0].real**2 + a[0].imag**2 + a[1].real**2 + a[1].imag**2
        a *= np.exp(1j * k * h * p)
        spec = np.fft.fft(a, axis=1)
        h_next = steps[i + 1] if i + 1 < len(steps) else 0.0
        spec *= np.exp(gen * ((h + h_next) / 2))
    return FieldGrid(np.fft.ifft(spec, axis=1), field.sample_rate, field.center_freq_offset)


def propagate_span(field: FieldGrid, span: Span, cfg: SsfConfig = SsfConfig(),
                   nonlinear: bool = True) -> FieldGrid:
    """Propagate one fiber span (no amplifier)."""
    alpha, beta2, gamma, length = _span_si(span, cfg.wavelength_nm)
    return propagate_fiber(field, length, alpha, beta2, gamma, cfg, nonlinear)


def amplifier_scales_db(route: Route, scales_db) -> list[float]:
    n = len(route.spans)
    if scales_db is None:
        return [0.0] * (n - 1)
    scales_db = [float(s) for s in scales_db]
    if len(scales_db) != n - 1:
        raise ValueError(f"expected {n - 1} inter-span scale factors, got {len(scales_db)}")
    return scales_db


def propagate_route(field: FieldGrid, route: Route, scales_db=None,
                    cfg: SsfConfig = SsfConfig(), nonlinear: bool = True) -> FieldGrid:
    """Span-by-span propagation with noiseless amplifiers.

    Each amplifier restores the span loss; the amplifiers between spans then
    apply ``scales_db[i]`` to the whole WDM comb. ASE is left to the emulator.
    """
    scales = amplifier_scales_db(route, scales_db)
    out = field
    for i, span in enumerate(route.spans):
        out = propagate_span(out, span, cfg, nonlinear)
        g_db = span.gain + (scales[i] if i < len(scales) else 0.0)
        out.samples *= math.sqrt(10 ** (g_db / 10))
    return out


def extract_channel(field: FieldGrid, channel_offset: float, baud: float,
                    out_samples_per_symbol: int = 2,
                    spacing: float = DEFAULT_SPACING_HZ) -> FieldGrid:
    """Brick-wall filter one channel (width ``spacing``), shift it to baseband
    and decimate to ``out_samples_per_symbol``."""
    out_rate = out_samples_per_symbol * baud
    ratio = field.sample_rate / out_rate
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 or field.n % r:
        raise ValueError("output rate must be an integer divisor of the grid rate")
    n_out = field.n // r
    if spacing > out_rate:
        raise ValueError("filter width exceeds the output sampling band")
    if abs(channel_offset) > field.sample_rate / 2:
        raise ValueError("channel lies outside the simulated band")
    spec = np.fft.fft(field.samples, axis=1)
    k = np.fft.fftfreq(n_out, 1.0 / n_out).astype(int)
    f = k * (out_rate / n_out)
    keep = np.abs(f) <= spacing / 2
    src = (offset_bin(channel_offset, field.sample_rate, field.n) + k[keep]) % field.n
    out = np.zeros((2, n_out), dtype=complex)
    out[:, keep] = spec[:, src] * (n_out / field.n)
    return FieldGrid(np.fft.ifft(out, axis=1), out_rate, 0.0)
