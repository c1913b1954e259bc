"""In-service OSNR estimate: ESNR -> external SNR -> ASE SNR -> OSNR, with
the nonlinear SNR supplied by the trained network."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .features import extract_features
from .metrics import BandwidthPair, SnrValue, osnr_from_snr_ase
from .nn import ModelWeights, forward
from .rxdsp import LinkMetadata, SymbolFrame

MIN_ESTIMATE_SYMBOLS = 4096

VALID = "ok"
NL_BELOW_EXT = "nl_below_ext"
NL_IMPLAUSIBLY_SMALL = "nl_implausibly_small"


class ImplementationNoiseError(ValueError):
    """Implementation noise exceeds total noise: no external noise left."""


class NonPhysicalNonlinearSNR(ValueError):
    """Nonlinear SNR at or below external SNR."""


@dataclass(frozen=True)
class CalibrationFactors:
    eye_closure: float = 1.0
    snr_imp: SnrValue = SnrValue(math.inf)

    def __post_init__(self):
        if not self.eye_closure > 0:
            raise ValueError("eye closure must be positive")

    @classmethod
    def from_config(cls, cfg: dict) -> "CalibrationFactors":
        c = cfg.get("calibration", {})
        return cls(float(c.get("eye_closure", 1.0)), SnrValue.from_db(float(c.get("snr_imp_db", math.inf))))


@dataclass(frozen=True)
class ValidityConfig:
    min_gap_db: float = 0.2
    max_gap_db: float = 25.0

    def __post_init__(self):
        if not self.min_gap_db < self.max_gap_db:
            raise ValueError("min_gap_db must be below max_gap_db")

    @classmethod
    def from_config(cls, cfg: dict) -> "ValidityConfig":
        v = cfg["validity"]
        return cls(float(v["min_gap_db"]), float(v["max_gap_db"]))


@dataclass(frozen=True)
class OsnrEstimate:
    esnr: SnrValue
    snr_ext: SnrValue
    snr_nl: SnrValue
    snr_ase: SnrValue
    osnr: SnrValue
    valid: bool
    reason: str

    def to_dict(self) -> dict:
        out = {name: getattr(self, name).db for name in ("esnr", "snr_ext", "snr_nl", "snr_ase", "osnr")}
        out = {f"{k}_db": v for k, v in out.items()}
        out.update(valid=self.valid, reason=self.reason)
        return out


def snr_ext_from_esnr(esnr: SnrValue, cal: CalibrationFactors = CalibrationFactors()) -> SnrValue:
    """``1/SNR_ext = 1/(EC*ESNR) - 1/SNR_imp``."""
    inv = 1.0 / (cal.eye_closure * esnr.linear) - cal.snr_imp.inverse
    if not inv > 0:
        raise ImplementationNoiseError("implementation noise exceeds total noise")
    return SnrValue(1.0 / inv)


def snr_ase_from_ext(snr_ext: SnrValue, snr_nl: SnrValue) -> SnrValue:
    """``1/SNR_ASE = 1/SNR_ext - 1/SNR_NL``."""
    if not snr_nl.linear > snr_ext.linear:
        raise NonPhysicalNonlinearSNR("non-physical nonlinear SNR (not above external SNR)")
    return SnrValue(1.0 / (snr_ext.inverse - snr_nl.inverse))


def validity_gate(snr_nl_db: float, snr_ext_db: float, cfg: ValidityConfig = ValidityConfig()):
    gap = snr_nl_db - snr_ext_db
    if gap < cfg.min_gap_db:
        return False, NL_BELOW_EXT
    if gap > cfg.max_gap_db:
        return False, NL_IMPLAUSIBLY_SMALL
    return True, VALID


def osnr_chain(esnr: SnrValue, snr_nl: SnrValue, cal: CalibrationFactors, bw: BandwidthPair,
               cfg: ValidityConfig = ValidityConfig()) -> OsnrEstimate:
    """Equation chain and gate for a given nonlinear SNR.

    Invalid estimates are still reported. When the nonlinear SNR does not
    exceed the external SNR the ASE SNR falls back to the external SNR (no
    nonlinear correction) and stays flagged.
    """
    ext = snr_ext_from_esnr(esnr, cal)
    valid, reason = validity_gate(snr_nl.db, ext.db, cfg)
    try:
        ase = snr_ase_from_ext(ext, snr_nl)
    except NonPhysicalNonlinearSNR:
        ase = ext
    return OsnrEstimate(esnr, ext, snr_nl, ase, osnr_from_snr_ase(ase, bw), valid, reason)


def predict_snr_nl(frame: SymbolFrame, meta: LinkMetadata, model: ModelWeights, cfg: dict | None = None) -> SnrValue:
    return SnrValue.from_db(forward(model, extract_features(frame, meta, cfg)))


def estimate_osnr(frame: SymbolFrame, meta: LinkMetadata, cal: CalibrationFactors, model: ModelWeights,
                  bw: BandwidthPair, cfg: ValidityConfig = ValidityConfig(),
                  feature_cfg: dict | None = None) -> OsnrEstimate:
    if frame.count < MIN_ESTIMATE_SYMBOLS:
        raise ValueError(f"estimate needs at least {MIN_ESTIMATE_SYMBOLS} symbols per polarisation")
    return osnr_chain(frame.esnr, predict_snr_nl(frame, meta, model, feature_cfg), cal, bw, cfg)
