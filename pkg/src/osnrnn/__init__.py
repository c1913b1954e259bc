"""Neural-network assisted in-service OSNR estimation for coherent links.

The package simulates WDM transmission (split-step Manakov propagation, a
PMD/PDL emulator with ASE loading and a coherent receiver), extracts
nonlinear-noise correlation features from received symbols, trains a small
MLP that predicts the nonlinear SNR, and removes that contribution from the
measured effective SNR to estimate OSNR.
"""

import importlib

__version__ = "0.1.0"

# Resolved lazily so the CLI can pin BLAS threads before numpy is imported.
_EXPORTS = {
    "BandwidthPair": "metrics",
    "SnrValue": "metrics",
    "ber_from_snr": "metrics",
    "esnr_from_ber": "metrics",
    "get_constellation": "metrics",
    "CalibrationFactors": "estimator",
    "OsnrEstimate": "estimator",
    "estimate_osnr": "estimator",
    "osnr_chain": "estimator",
    "load_config": "config",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(importlib.import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
