"""Randomised multi-span fiber routes from a Markov fiber-type model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import truncnorm

from .metrics import C_LIGHT

FIBER_TYPES = ("ELEAF", "LEAF", "NDSF", "TERALIGHT", "TWc", "TWP", "TWRS")


@dataclass(frozen=True)
class FiberType:
    name: str
    dispersion: float  # ps/nm/km
    loss: float  # dB/km
    gamma: float  # 1/(W km)

    def __post_init__(self):
        if not (self.loss > 0 and self.gamma > 0) or self.dispersion == 0:
            raise ValueError(f"invalid fiber parameters for {self.name}")

    def beta2(self, wavelength_nm: float = 1550.0) -> float:
        return beta2_from_dispersion(self.dispersion, wavelength_nm)


@dataclass(frozen=True)
class Span:
    fiber: FiberType
    length: float  # km
    noise_figure: float = 5.0  # dB

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("span length must be positive")

    @property
    def gain(self) -> float:
        """Amplifier gain in dB; exactly offsets the span loss."""
        return self.fiber.loss * self.length

    @property
    def dispersion(self) -> float:
        return self.fiber.dispersion * self.length


@dataclass(frozen=True)
class Route:
    spans: tuple[Span, ...]

    def __post_init__(self):
        if len(self.spans) < 1:
            raise ValueError("a route needs at least one span")
        object.__setattr__(self, "spans", tuple(self.spans))

    def __add__(self, other: "Route") -> "Route":
        return Route(self.spans + other.spans)

    def __len__(self):
        return len(self.spans)

    @property
    def total_length(self) -> float:
        return float(sum(s.length for s in self.spans))

    @property
    def cumulative_dispersion(self) -> float:
        return cumulative_dispersion(self)

    @property
    def is_uniform(self) -> bool:
        return len({s.fiber.name for s in self.spans}) == 1

    def to_dict(self) -> dict:
        return {
            "spans": [
                {"fiber": s.fiber.name, "length_km": s.length, "noise_figure_db": s.noise_figure}
                for s in self.spans
            ]
        }

    @classmethod
    def from_dict(cls, d: dict, catalog: dict[str, FiberType]) -> "Route":
        return cls(tuple(
            Span(catalog[s["fiber"]], float(s["length_km"]), float(s["noise_figure_db"]))
            for s in d["spans"]
        ))


@dataclass(frozen=True)
class SpanLengthDist:
    """Truncated normal span-length distribution in km."""

    mean: float
    std: float
    min: float
    max: float

    def sample(self, rng: np.random.Generator, size=None):
        if self.std == 0:
            return np.full(size, self.mean) if size is not None else float(self.mean)
        a, b = (self.min - self.mean) / self.std, (self.max - self.mean) / self.std
        return truncnorm.rvs(a, b, loc=self.mean, scale=self.std, size=size, random_state=rng)


@dataclass
class FiberMarkovModel:
    types: tuple[str, ...]
    initial: np.ndarray
    transition: np.ndarray
    lengths: dict[str, SpanLengthDist]
    catalog: dict[str, FiberType] = field(repr=False)
    noise_figure: float = 5.0

    def __post_init__(self):
        self.types = tuple(self.types)
        self.initial = np.asarray(self.initial, dtype=float)
        self.transition = np.asarray(self.transition, dtype=float)
        self.validate()

    def validate(self):
        n = len(self.types)
        if self.initial.shape != (n,) or self.transition.shape != (n, n):
            raise ValueError("Markov model shapes do not match the number of fiber types")
        if np.any(self.initial < 0) or np.any(self.transition < 0):
            raise ValueError("Markov probabilities must be non-negative")
        if abs(self.initial.sum() - 1) > 1e-12:
            raise ValueError("initial distribution must sum to 1")
        if np.any(np.abs(self.transition.sum(axis=1) - 1) > 1e-12):
            raise ValueError("transition matrix rows must sum to 1")
        missing = [t for t in self.types if t not in self.catalog or t not in self.lengths]
        if missing:
            raise ValueError(f"fiber types missing from catalog or length table: {missing}")

    def stationary(self) -> np.ndarray:
        w, v = np.linalg.eig(self.transition.T)
        vec = np.real(v[:, np.argmin(np.abs(w - 1))])
        return vec / vec.sum()

    @classmethod
    def from_config(cls, cfg: dict) -> "FiberMarkovModel":
        catalog = fiber_catalog(cfg)
        mk = cfg["markov"]
        types = tuple(mk["types"])
        n = len(types)
        initial = mk.get("initial")
        initial = np.full(n, 1.0 / n) if initial is None else np.asarray(initial, dtype=float)
        trans = mk.get("transition")
        if trans is None:
            p = float(mk.get("self_transition", 0.9))
            trans = np.full((n, n), (1 - p) / (n - 1)) if n > 1 else np.ones((1, 1))
            if n > 1:
                np.fill_diagonal(trans, p)
        lengths_cfg = mk["span_length"]
        default = lengths_cfg.get("default")
        lengths = {}
        for t in types:
            d = lengths_cfg.get(t, default)
            lengths[t] = SpanLengthDist(float(d["mean"]), float(d["std"]), float(d["min"]), float(d["max"]))
        nf = float(cfg.get("amplifier", {}).get("noise_figure_db", 5.0))
        return cls(types, initial, np.asarray(trans, dtype=float), lengths, catalog, nf)


def fiber_catalog(cfg: dict) -> dict[str, FiberType]:
    return {
        name: FiberType(name, float(p["dispersion"]), float(p["loss"]), float(p["gamma"]))
        for name, p in cfg["fiber_catalog"].items()
    }


def sample_route(seed, model: FiberMarkovModel, n_spans: int) -> Route:
    """Draw a route: the first fiber type from the initial distribution, then
    one Markov step per span; lengths are i.i.d. per type."""
    if n_spans < 1:
        raise ValueError("n_spans must be >= 1")
    model.validate()
    rng = np.random.default_rng(seed)
    n = len(model.types)
    states = [rng.choice(n, p=model.initial)]
    for _ in range(n_spans - 1):
        states.append(rng.choice(n, p=model.transition[states[-1]]))
    spans = []
    for s in states:
        name = model.types[s]
        length = float(model.lengths[name].sample(rng))
        spans.append(Span(model.catalog[name], length, model.noise_figure))
    return Route(tuple(spans))


def beta2_from_dispersion(D: float, wavelength_nm: float = 1550.0) -> float:
    """Group-velocity dispersion in ps^2/km from D in ps/(nm km)."""
    if not wavelength_nm > 0:
        raise ValueError("wavelength must be positive")
    lam = wavelength_nm * 1e-9
    d_si = D * 1e-6  # s/m^2
    b2_si = -d_si * lam**2 / (2 * math.pi * C_LIGHT)  # s^2/m
    return b2_si * 1e24 * 1e3


def cumulative_dispersion(route: Route) -> float:
    return float(sum(s.fiber.dispersion * s.length for s in route.spans))
