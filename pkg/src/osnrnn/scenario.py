"""Randomised training / evaluation cases.

A :class:`Scenario` is a pure function of ``(master_seed, index, config)``:
route, channel plan and launch powers, amplifier power scaling for mixed
fiber routes, emulator impairment means and the ASE SNR target.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import routegen
from .metrics import (C_LIGHT, H_PLANCK, SnrValue, dbm_to_watt, esnr_from_ber,
                      get_constellation, watt_to_dbm)
from .routegen import FiberMarkovModel, FiberType, Route, beta2_from_dispersion

SCENARIO_SCHEMA_VERSION = 1
CASE_TYPES = ("single", "equal", "steps")
_SEED_NAMES = ("case", "route", "powers", "target", "symbols", "emulator", "noise")


class ScenarioRejected(ValueError):
    """The draw cannot produce a usable link (e.g. delivered SNR below threshold)."""


# ------------------------------------------------------------------ GN model
def ase_power_per_span(gain_db: float, nf_db: float, bandwidth: float,
                       wavelength_nm: float = 1550.0) -> float:
    """(G - 1) h nu NF B, in W."""
    nu = C_LIGHT / (wavelength_nm * 1e-9)
    return (10 ** (gain_db / 10) - 1) * H_PLANCK * nu * 10 ** (nf_db / 10) * bandwidth


def gn_eta(fiber: FiberType, span_length: float, baud: float, n_channels: int, spacing: float,
           wavelength_nm: float = 1550.0) -> float:
    """Per-span NLI coefficient (1/W^2) of the incoherent closed-form GN model
    for a flat near-Nyquist comb: ``P_nli = eta * P_ch**3``."""
    alpha = fiber.loss * math.log(10) / 10 / 1e3
    l_span = span_length * 1e3
    l_eff = (1 - math.exp(-alpha * l_span)) / alpha
    l_eff_a = 1 / alpha
    beta2 = abs(beta2_from_dispersion(fiber.dispersion, wavelength_nm)) * 1e-27
    gamma = fiber.gamma * 1e-3
    b_wdm = n_channels * spacing
    eta = (8 / 27) * gamma**2 * l_eff**2 * math.asinh(0.5 * math.pi**2 * beta2 * l_eff_a * b_wdm**2)
    eta /= math.pi * beta2 * l_eff_a * baud**2
    if not eta > 0:
        raise ValueError("non-positive NLI efficiency")
    return eta


def gn_optimal_power(fiber: FiberType, span_length: float, baud: float, n_channels: int,
                     spacing: float, nf: float = 5.0, wavelength_nm: float = 1550.0) -> float:
    """Optimum launch power per channel in dBm, ``(P_ase / (2 eta))**(1/3)``."""
    eta = gn_eta(fiber, span_length, baud, n_channels, spacing, wavelength_nm)
    p_ase = ase_power_per_span(fiber.loss * span_length, nf, baud, wavelength_nm)
    return watt_to_dbm((p_ase / (2 * eta)) ** (1 / 3))


# --------------------------------------------------------------- steps model
@dataclass(frozen=True)
class StepsModelDraw:
    n_channels: int
    n_groups: int
    group_sizes: tuple[int, ...]
    group_powers_dbm: tuple[float, ...]

    def __post_init__(self):
        if not 1 <= self.n_groups <= self.n_channels:
            raise ValueError("group count out of range")
        if len(self.group_sizes) != self.n_groups or sum(self.group_sizes) != self.n_channels:
            raise ValueError("group sizes must partition the channel count")
        if min(self.group_sizes) < 1:
            raise ValueError("empty group")

    def channel_powers(self) -> list[float]:
        return [p for p, s in zip(self.group_powers_dbm, self.group_sizes) for _ in range(s)]


def partition_groups(rng: np.random.Generator, n: int, m: int) -> list[int]:
    """Sizes of ``m`` adjacent groups covering ``n`` channels.

    Sizes are drawn one at a time, uniform on {1, ..., remaining - groups
    still to fill}; the last group takes the remainder.
    """
    sizes, remaining = [], n
    for g in range(m - 1):
        hi = remaining - (m - 1 - g)
        size = int(rng.integers(1, hi + 1))
        sizes.append(size)
        remaining -= size
    sizes.append(remaining)
    return sizes


def steps_model_powers(seed, n_channels: int, base_power_dbm_fn, offset_db: float = 2.0,
                       sigma_db: float = 2.0) -> tuple[list[float], StepsModelDraw]:
    if n_channels < 1:
        raise ValueError("need at least one channel")
    if sigma_db < 0:
        raise ValueError("sigma_db must be non-negative")
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, n_channels + 1))
    sizes = partition_groups(rng, n_channels, m)
    powers, start = [], 0
    for s in sizes:
        base = float(np.mean([base_power_dbm_fn(ch) for ch in range(start, start + s)]))
        powers.append(float(rng.normal(base - offset_db, sigma_db)) if sigma_db > 0 else base - offset_db)
        start += s
    draw = StepsModelDraw(n_channels, m, tuple(sizes), tuple(powers))
    return draw.channel_powers(), draw


# --------------------------------------------------------------- link budget
def link_delivered_snr(route: Route, launch_power_dbm: float, baud: float, scales_db=None,
                       wavelength_nm: float = 1550.0) -> SnrValue:
    """ASE-only SNR over the symbol-rate bandwidth.

    Amplifier noise after each span is referred to the channel power at that
    amplifier, which tracks the inter-span scale factors.
    """
    n = len(route.spans)
    scales = [0.0] * (n - 1) if scales_db is None else list(scales_db)
    p_dbm = launch_power_dbm
    inv = 0.0
    for i, span in enumerate(route.spans):
        inv += ase_power_per_span(span.gain, span.noise_figure, baud, wavelength_nm) / dbm_to_watt(p_dbm)
        if i < n - 1:
            p_dbm += scales[i]
    return SnrValue(1.0 / inv)


def sample_target_snr_ase(seed, delivered: SnrValue, fec_threshold: SnrValue) -> SnrValue:
    if not delivered.db > fec_threshold.db:
        raise ScenarioRejected(
            f"delivered SNR {delivered.db:.2f} dB does not exceed FEC threshold {fec_threshold.db:.2f} dB"
        )
    rng = np.random.default_rng(seed)
    return SnrValue.from_db(float(rng.uniform(fec_threshold.db, delivered.db)))


# ------------------------------------------------------------------ scenario
@dataclass
class Scenario:
    index: int
    master_seed: int
    attempt: int
    route: Route
    mode: str
    constellation: str
    baud: float
    case: str
    n_channels: int
    spacing: float
    probe: int
    launch_powers_dbm: list[float]
    amp_scales_db: list[float]
    optimal_powers_dbm: list[float]
    delivered_snr_db: float
    fec_threshold_db: float
    target_snr_ase_db: float
    dgd_mean_ps: float
    pdl_mean_db: float
    n_symbols: int
    sim_sps: int
    out_sps: int
    rolloff: float
    n_segments: int
    pattern_count: int
    seeds: dict[str, int]
    steps: dict | None = None
    schema_version: int = SCENARIO_SCHEMA_VERSION

    def __post_init__(self):
        if not 0 <= self.probe < self.n_channels:
            raise ValueError("probe index outside channel plan")
        if len(self.launch_powers_dbm) != self.n_channels:
            raise ValueError("one launch power per channel required")
        if not all(math.isfinite(p) for p in self.launch_powers_dbm):
            raise ValueError("launch powers must be finite")

    @property
    def probe_power_dbm(self) -> float:
        return self.launch_powers_dbm[self.probe]

    @property
    def target_snr_ase(self) -> SnrValue:
        return SnrValue.from_db(self.target_snr_ase_db)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["route"] = self.route.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, catalog: dict[str, FiberType]) -> "Scenario":
        if d.get("schema_version") != SCENARIO_SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema version {d.get('schema_version')!r}")
        kw = dict(d)
        kw["route"] = Route.from_dict(d["route"], catalog)
        return cls(**kw)


def derive_seeds(master_seed: int, index: int, attempt: int = 0) -> dict[str, int]:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index), int(attempt)))
    return {name: int(child.generate_state(1, np.uint64)[0])
            for name, child in zip(_SEED_NAMES, ss.spawn(len(_SEED_NAMES)))}


def _weighted_choice(rng: np.random.Generator, weights: dict) -> str:
    keys = list(weights)
    p = np.array([float(weights[k]) for k in keys])
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def _draw(master_seed: int, index: int, attempt: int, cfg: dict, model: FiberMarkovModel) -> Scenario:
    from .txmodel import choose_sim_sps

    seeds = derive_seeds(master_seed, index, attempt)
    sc, plan = cfg["scenario"], cfg["channel_plan"]
    wl = float(cfg.get("wavelength_nm", 1550.0))
    rng = np.random.default_rng(seeds["case"])
    mode = _weighted_choice(rng, sc["modes"])
    mode_cfg = cfg["modes"][mode]
    case = _weighted_choice(rng, sc["case_mix"])
    n_spans = int(rng.integers(cfg["route"]["min_spans"], cfg["route"]["max_spans"] + 1))
    route = routegen.sample_route(seeds["route"], model, n_spans)

    baud = float(mode_cfg["baud"])
    spacing = float(plan["spacing_hz"])
    n_ch = 1 if case == "single" else int(plan["n_channels"])
    probe = n_ch // 2
    p_opt = [gn_optimal_power(s.fiber, s.length, baud, n_ch, spacing, s.noise_figure, wl) for s in route.spans]
    scales = [p_opt[i + 1] - p_opt[i] for i in range(n_spans - 1)]
    offset, sigma = float(sc["power_offset_db"]), float(sc["power_sigma_db"])

    prng = np.random.default_rng(seeds["powers"])
    steps = None
    if case == "steps":
        powers, draw = steps_model_powers(prng, n_ch, lambda ch: p_opt[0], offset, sigma)
        steps = {"n_groups": draw.n_groups, "group_sizes": list(draw.group_sizes),
                 "group_powers_dbm": list(draw.group_powers_dbm)}
    else:
        p = float(prng.normal(p_opt[0] - offset, sigma)) if sigma > 0 else p_opt[0] - offset
        powers = [p] * n_ch

    delivered = link_delivered_snr(route, powers[probe], baud, scales, wl)
    fec = esnr_from_ber(float(sc["fec_ber"]), mode_cfg["constellation"])
    target = sample_target_snr_ase(seeds["target"], delivered, fec)

    sim_sps = plan.get("sim_sps") or choose_sim_sps(n_ch, spacing, baud)
    return Scenario(
        index=int(index), master_seed=int(master_seed), attempt=attempt, route=route, mode=mode,
        constellation=str(mode_cfg["constellation"]), baud=baud, case=case, n_channels=n_ch,
        spacing=spacing, probe=probe, launch_powers_dbm=[float(x) for x in powers],
        amp_scales_db=[float(x) for x in scales], optimal_powers_dbm=[float(x) for x in p_opt],
        delivered_snr_db=delivered.db, fec_threshold_db=fec.db, target_snr_ase_db=target.db,
        dgd_mean_ps=float(mode_cfg["dgd_mean_ps"]), pdl_mean_db=float(mode_cfg["pdl_mean_db"]),
        n_symbols=int(plan["n_symbols"]), sim_sps=int(sim_sps), out_sps=int(plan["out_sps"]),
        rolloff=float(plan["rolloff"]), n_segments=int(cfg["emulator"]["n_segments"]),
        pattern_count=int(cfg["emulator"]["pattern_count"]), seeds=seeds, steps=steps,
    )


def build_scenario(master_seed: int, index: int, cfg: dict) -> Scenario:
    """Deterministic scenario for ``(master_seed, index)``; rejected draws are
    retried with a derived retry seed up to ``scenario.max_retries`` times."""
    model = FiberMarkovModel.from_config(cfg)
    retries = int(cfg["scenario"].get("max_retries", 10))
    last = None
    for attempt in range(retries + 1):
        try:
            return _draw(master_seed, index, attempt, cfg, model)
        except ScenarioRejected as exc:
            last = exc
    raise ScenarioRejected(f"scenario {index}: no usable draw after {retries} retries ({last})")


# ---------------------------------------------------------------- simulation
def transmit(scenario: Scenario):
    """WDM launch field and the probe channel's transmitted symbols."""
    from .txmodel import TxChannel, channel_offsets, gen_symbols, mux_wdm

    c = get_constellation(scenario.constellation)
    ss = np.random.SeedSequence(scenario.seeds["symbols"])
    offsets = channel_offsets(scenario.n_channels, scenario.spacing, scenario.probe)
    channels = []
    for ch, child in enumerate(ss.spawn(scenario.n_channels)):
        sym = gen_symbols(child, scenario.n_symbols, c)
        channels.append(TxChannel(sym, c, scenario.baud, float(offsets[ch]),
                                  dbm_to_watt(scenario.launch_powers_dbm[ch])))
    field = mux_wdm(channels, scenario.spacing, scenario.sim_sps * scenario.baud, scenario.rolloff)
    return field, channels[scenario.probe].symbols


def propagate_probe(scenario: Scenario, tx_field, cfg: dict):
    """Probe channel after nonlinear and after linear (gamma = 0) propagation."""
    from .ssfprop import SsfConfig, extract_channel, propagate_route

    ssf = SsfConfig.from_config(cfg)
    out = []
    for nonlinear in (True, False):
        f = propagate_route(tx_field, scenario.route, scenario.amp_scales_db, ssf, nonlinear)
        out.append(extract_channel(f, 0.0, scenario.baud, scenario.out_sps, scenario.spacing))
    return out[0], out[1]
