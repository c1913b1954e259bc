"""Accuracy statistics (systematic shift +- sigma, CCDF of |error|) and their
CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CCDF_GRID = np.round(np.arange(0.0, 3.0 + 1e-9, 0.05), 2)


def ccdf(abs_errors, grid=CCDF_GRID) -> np.ndarray:
    """Fraction of |errors| at or above each grid point (so ccdf(0) = 1)."""
    e = np.abs(np.asarray(abs_errors, dtype=float))
    if e.size == 0:
        return np.full(len(grid), np.nan)
    return np.array([np.mean(e >= g) for g in grid])


@dataclass
class ErrorStats:
    count: int
    offset: float
    sigma: float
    rmse: float

    @classmethod
    def from_errors(cls, errors) -> "ErrorStats":
        e = np.asarray(errors, dtype=float)
        if e.size == 0:
            return cls(0, float("nan"), float("nan"), float("nan"))
        sigma = float(np.std(e, ddof=1)) if e.size > 1 else 0.0
        return cls(int(e.size), float(np.mean(e)), sigma, float(np.sqrt(np.mean(e**2))))

    def formatted(self) -> str:
        return f"({self.offset:+.2f} ± {self.sigma:.2f}) dB"


@dataclass
class EvalReport:
    osnr: ErrorStats
    snr_nl: ErrorStats
    ccdf_osnr: np.ndarray
    ccdf_snr_nl: np.ndarray
    invalid_rate: float
    n_records: int
    per_mode: dict[str, dict] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def summary_rows(self) -> list[dict]:
        rows = [{"group": "all", "metric": "osnr", **_stats_row(self.osnr), "invalid_rate": self.invalid_rate,
                 "n_records": self.n_records},
                {"group": "all", "metric": "snr_nl", **_stats_row(self.snr_nl), "invalid_rate": self.invalid_rate,
                 "n_records": self.n_records}]
        for mode, d in sorted(self.per_mode.items()):
            for metric in ("osnr", "snr_nl"):
                rows.append({"group": mode, "metric": metric, **_stats_row(d[metric]),
                             "invalid_rate": d["invalid_rate"], "n_records": d["n_records"]})
        return rows

    def to_dict(self) -> dict:
        return {
            "offset": self.osnr.offset, "sigma": self.osnr.sigma, "rmse": self.osnr.rmse,
            "count": self.osnr.count, "invalid_rate": self.invalid_rate, "n_records": self.n_records,
            "snr_nl_offset": self.snr_nl.offset, "snr_nl_sigma": self.snr_nl.sigma,
            "formatted": self.osnr.formatted(),
            "per_mode": {m: {"offset": d["osnr"].offset, "sigma": d["osnr"].sigma,
                             "invalid_rate": d["invalid_rate"], "n_records": d["n_records"]}
                         for m, d in self.per_mode.items()},
            "warnings": list(self.warnings),
        }


def _stats_row(s: ErrorStats) -> dict:
    return {"count": s.count, "offset_db": s.offset, "sigma_db": s.sigma, "rmse_db": s.rmse}


def write_csv(path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def ccdf_rows(report: EvalReport, grid=CCDF_GRID) -> list[dict]:
    return [{"abs_error_db": float(g), "ccdf_osnr": float(a), "ccdf_snr_nl": float(b)}
            for g, a, b in zip(grid, report.ccdf_osnr, report.ccdf_snr_nl)]
