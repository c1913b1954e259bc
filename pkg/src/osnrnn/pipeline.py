"""Dataset generation, training, evaluation and single-capture estimation.

Datasets are JSONL files holding one record per scenario index, written in
index order. Records are serialised with sorted keys, so a given
``(config, master_seed)`` always yields the same bytes regardless of worker
count or interruptions.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .emulator import apply_emulator, build_emulator
from .estimator import CalibrationFactors, ImplementationNoiseError, ValidityConfig, estimate_osnr, osnr_chain
from .features import FEATURE_LAYOUT_ID, extract_features
from .metrics import (DEFAULT_REF_BANDWIDTH_HZ, BandwidthPair, SnrValue, get_constellation,
                      osnr_from_snr_ase)
from .reporting import EvalReport, ErrorStats, ccdf, ccdf_rows, write_csv
from .rxdsp import DspConfig, LinkMetadata, read_frame, receive_frame, snr_nl_from_twins, write_frame
from .scenario import build_scenario, propagate_probe, transmit

log = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1
MAX_FAILURE_RATE = 0.05
OVERFIT_RATIO = 3.0


class DataError(ValueError):
    """Dataset, split or model inconsistent with what the command expects."""


# ------------------------------------------------------------------- records
@dataclass
class DatasetRecord:
    index: int
    master_seed: int
    config_hash: str
    status: str  # "ok" or "failed"
    error: str | None = None
    scenario: dict | None = None
    features: list[float] | None = None
    feature_layout_id: str = FEATURE_LAYOUT_ID
    esnr_db: float | None = None
    esnr_source: str | None = None
    ber: float | None = None
    bit_errors: int | None = None
    snr_nl_db: float | None = None
    snr_ase_db: float | None = None
    meta: dict | None = None
    seeds: dict | None = None
    schema_version: int = RECORD_SCHEMA_VERSION

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def mode(self) -> str:
        return self.meta["mode"]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        d = json.loads(line)
        if d.get("schema_version") != RECORD_SCHEMA_VERSION:
            raise DataError(f"unsupported record schema version {d.get('schema_version')!r}")
        return cls(**d)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def simulate_record(cfg: dict, master_seed: int, index: int, frames_dir=None) -> DatasetRecord:
    """Full chain for one scenario index. Failures come back as a record with
    ``status="failed"`` instead of raising."""
    chash = config_hash(cfg)
    try:
        sc = build_scenario(master_seed, index, cfg)
        tx_field, tx_sym = transmit(sc)
        nl, lin = propagate_probe(sc, tx_field, cfg)
        dsp = DspConfig.from_config(cfg)
        cd = sc.route.cumulative_dispersion
        snr_nl = snr_nl_from_twins(nl, lin, tx_sym, cd, sc.baud, dsp)
        if not math.isfinite(snr_nl.db):
            raise ValueError("nonlinear SNR is infinite")

        chain = build_emulator(sc.seeds["emulator"], sc.n_segments, sc.dgd_mean_ps * 1e-12, sc.pdl_mean_db)
        # the linear twin carries the undistorted signal power the target refers to
        rx_wave = apply_emulator(nl, chain, sc.target_snr_ase, sc.pattern_count, sc.baud,
                                 seed=sc.seeds["noise"], signal_power=lin.power)
        tx_ref = np.tile(tx_sym, (1, sc.pattern_count))
        frame = receive_frame(rx_wave, tx_ref, cd, sc.baud, get_constellation(sc.constellation), dsp)
        meta = LinkMetadata(sc.route.total_length, cd, sc.baud, sc.mode)
        fv = extract_features(frame, meta, cfg)
        if frames_dir is not None:
            frames_dir = Path(frames_dir)
            frames_dir.mkdir(parents=True, exist_ok=True)
            write_frame(frame, frames_dir / f"{index:06d}.symf")
            (frames_dir / f"{index:06d}.meta.json").write_text(json.dumps(meta.to_dict(), sort_keys=True) + "\n")
    except Exception as exc:  # noqa: BLE001 - isolate per-scenario failures
        log.warning("scenario %d failed: %s", index, exc)
        return DatasetRecord(index, int(master_seed), chash, "failed", f"{type(exc).__name__}: {exc}")

    return DatasetRecord(
        index=index, master_seed=int(master_seed), config_hash=chash, status="ok",
        scenario=sc.to_dict(), features=[float(v) for v in fv.values], feature_layout_id=fv.layout_id,
        esnr_db=min(frame.esnr.db, 1e3), esnr_source=frame.esnr_source, ber=float(frame.ber),
        bit_errors=int(frame.bit_errors), snr_nl_db=snr_nl.db, snr_ase_db=sc.target_snr_ase_db,
        meta=meta.to_dict(), seeds=dict(sc.seeds),
    )


def _simulate_job(args):
    return simulate_record(*args)


def read_dataset(path, only_ok: bool = True) -> list[DatasetRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    try:
        records = [DatasetRecord.from_json(line) for line in lines if line.strip()]
    except (json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"malformed dataset {path}: {exc}") from exc
    layouts = {r.feature_layout_id for r in records if r.ok}
    if len(layouts) > 1:
        raise DataError(f"mixed feature layouts in {path}: {sorted(layouts)}")
    return [r for r in records if r.ok] if only_ok else records


def write_dataset(records: list[DatasetRecord], path) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in records), encoding="utf-8")


def _resume_point(path: Path, master_seed: int, chash: str) -> tuple[int, int]:
    """Number of complete leading records (truncating anything after them)
    and how many of those failed."""
    if not path.exists():
        return 0, 0
    raw = path.read_bytes()
    good_end, n, failed = 0, 0, 0
    for line in raw.splitlines(keepends=True):
        if not line.endswith(b"\n"):
            break
        try:
            rec = DatasetRecord.from_json(line.decode("utf-8"))
        except (ValueError, TypeError):
            break
        if rec.index != n:
            break
        if rec.master_seed != master_seed or rec.config_hash != chash:
            raise DataError(f"{path} was generated with a different seed or configuration")
        failed += not rec.ok
        n += 1
        good_end += len(line)
    if good_end < len(raw):
        with path.open("r+b") as fh:
            fh.truncate(good_end)
    return n, failed


@dataclass
class GenerateSummary:
    count: int
    completed: int
    failed: int
    resumed_from: int
    path: str

    @property
    def failure_rate(self) -> float:
        return self.failed / self.count if self.count else 0.0

    @property
    def exceeded(self) -> bool:
        return self.failure_rate > MAX_FAILURE_RATE


def run_generate(cfg: dict, master_seed: int, count: int, out_path, threads: int = 1,
                 frames_dir=None) -> GenerateSummary:
    """Simulate scenario indices ``0..count-1`` into ``out_path``.

    Already completed leading indices are kept, so an interrupted run picks up
    where it stopped. Workers may finish in any order; records are written
    in index order.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    start, failed = _resume_point(out_path, int(master_seed), chash)
    jobs = [(cfg, int(master_seed), i, frames_dir) for i in range(start, count)]
    with out_path.open("a", encoding="utf-8") as fh:
        if threads > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = pool.map(_simulate_job, jobs)
                for rec in results:
                    failed += not rec.ok
                    fh.write(rec.to_json() + "\n")
                    fh.flush()
        else:
            for job in jobs:
                rec = _simulate_job(job)
                failed += not rec.ok
                fh.write(rec.to_json() + "\n")
                fh.flush()
    return GenerateSummary(count, max(count, start), failed, start, str(out_path))


# ------------------------------------------------------------------ training
def split_indices(records: list[DatasetRecord], test_fraction: float, seed: int) -> dict[str, list[int]]:
    """Seed-derived train/test split over record indices."""
    idx = np.array(sorted(r.index for r in records))
    rng = np.random.default_rng([int(seed), 0x7E57])
    perm = rng.permutation(len(idx))
    n_test = int(round(test_fraction * len(idx)))
    return {"train": sorted(idx[perm[n_test:]].tolist()), "test": sorted(idx[perm[:n_test]].tolist())}


def _select(records: list[DatasetRecord], indices) -> list[DatasetRecord]:
    by_index = {r.index: r for r in records}
    missing = [i for i in indices if i not in by_index]
    if missing:
        raise DataError(f"split refers to {len(missing)} indices absent from the dataset")
    return [by_index[i] for i in indices]


def _matrix(records: list[DatasetRecord]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([r.features for r in records], dtype=float)
    t = np.array([r.snr_nl_db for r in records], dtype=float)
    return x, t


def overfit_warning(train_rmse: float, test_rmse: float) -> str | None:
    """Warning text when the test RMSE exceeds ``OVERFIT_RATIO`` times the training RMSE."""
    if train_rmse > 0 and test_rmse > OVERFIT_RATIO * train_rmse:
        return f"test RMSE {test_rmse:.3f} dB exceeds {OVERFIT_RATIO:g}x training RMSE {train_rmse:.3f} dB"
    return None


def run_train(dataset_path, cfg: dict, model_out, history_out=None, split_out=None) -> dict:
    """Split, train on the training part, save the model, report test accuracy."""
    records = read_dataset(dataset_path)
    split = split_indices(records, float(cfg["nn"]["test_fraction"]), int(cfg["nn"]["seed"]))
    train_recs, test_recs = _select(records, split["train"]), _select(records, split["test"])
    x, t = _matrix(train_recs)
    model, hist = nn.train(x, t, nn.TrainConfig.from_config(cfg), train_recs[0].feature_layout_id if train_recs else FEATURE_LAYOUT_ID)

    model_out = Path(model_out)
    model_out.parent.mkdir(parents=True, exist_ok=True)
    nn.save(model, model_out)
    history_out = Path(history_out) if history_out else model_out.with_suffix(".history.csv")
    write_csv(history_out, [{"epoch": i + 1, "train_mse_db2": a, "val_mse_db2": b}
                            for i, (a, b) in enumerate(zip(hist.train_loss, hist.val_loss))])
    split_out = Path(split_out) if split_out else model_out.with_suffix(".split.json")
    split_out.write_text(json.dumps(split, indent=1) + "\n")

    warnings = list(hist.warnings)
    train_report = evaluate_records(train_recs, model, cfg).report
    test_report = evaluate_records(test_recs, model, cfg).report if test_recs else None
    if test_report is not None:
        w = overfit_warning(train_report.snr_nl.rmse, test_report.snr_nl.rmse)
        if w:
            warnings.append(w)
    rep = test_report or train_report
    return {
        "records": len(records), "train": len(train_recs), "test": len(test_recs),
        "epochs": hist.epochs, "best_epoch": hist.best_epoch,
        "offset": rep.osnr.offset, "sigma": rep.osnr.sigma, "formatted": rep.osnr.formatted(),
        "snr_nl_offset": rep.snr_nl.offset, "snr_nl_sigma": rep.snr_nl.sigma, "snr_nl_rmse": rep.snr_nl.rmse,
        "snr_nl_formatted": rep.snr_nl.formatted(), "invalid_rate": rep.invalid_rate,
        "train_snr_nl_rmse": train_report.snr_nl.rmse,
        "model": str(model_out), "history": str(history_out), "split": str(split_out),
        "warnings": warnings,
    }


# ---------------------------------------------------------------- evaluation
@dataclass
class RecordResult:
    index: int
    mode: str
    true_osnr_db: float
    est_osnr_db: float
    true_snr_nl_db: float
    pred_snr_nl_db: float
    valid: bool
    reason: str

    @property
    def osnr_error(self) -> float:
        return self.est_osnr_db - self.true_osnr_db

    @property
    def snr_nl_error(self) -> float:
        return self.pred_snr_nl_db - self.true_snr_nl_db


@dataclass
class Evaluation:
    report: EvalReport
    results: list[RecordResult] = field(default_factory=list)


def _ref_bandwidth(cfg: dict) -> float:
    return float(cfg.get("reference_bandwidth_hz", DEFAULT_REF_BANDWIDTH_HZ))


def record_results(records: list[DatasetRecord], model: nn.ModelWeights | None, cfg: dict,
                   cal: CalibrationFactors | None = None) -> list[RecordResult]:
    """Per-record OSNR chain. ``model=None`` feeds the true SNR_NL back in
    (oracle ablation)."""
    if not records:
        return []
    cal = cal or CalibrationFactors.from_config(cfg)
    vcfg = ValidityConfig.from_config(cfg)
    x, t = _matrix(records)
    pred = t.copy() if model is None else np.atleast_1d(nn.forward(model, x))
    out = []
    for r, p in zip(records, pred):
        bw = BandwidthPair(r.meta["baud"], _ref_bandwidth(cfg))
        true_osnr = osnr_from_snr_ase(SnrValue.from_db(r.snr_ase_db), bw).db
        try:
            est = osnr_chain(SnrValue.from_db(r.esnr_db), SnrValue.from_db(float(p)), cal, bw, vcfg)
            est_db, valid, reason = est.osnr.db, est.valid, est.reason
        except ImplementationNoiseError:
            est_db, valid, reason = math.nan, False, "implementation_noise"
        out.append(RecordResult(r.index, r.mode, true_osnr, est_db, r.snr_nl_db, float(p), valid, reason))
    return out


def summarize(results: list[RecordResult]) -> EvalReport:
    valid = [r for r in results if r.valid]
    e_osnr = [r.osnr_error for r in valid]
    e_nl = [r.snr_nl_error for r in results]
    invalid_rate = 1.0 - len(valid) / len(results) if results else math.nan
    per_mode = {}
    for mode in sorted({r.mode for r in results}):
        rs = [r for r in results if r.mode == mode]
        vs = [r for r in rs if r.valid]
        per_mode[mode] = {"osnr": ErrorStats.from_errors([r.osnr_error for r in vs]),
                          "snr_nl": ErrorStats.from_errors([r.snr_nl_error for r in rs]),
                          "invalid_rate": 1.0 - len(vs) / len(rs), "n_records": len(rs)}
    return EvalReport(ErrorStats.from_errors(e_osnr), ErrorStats.from_errors(e_nl), ccdf(e_osnr), ccdf(e_nl),
                      invalid_rate, len(results), per_mode)


def evaluate_records(records, model, cfg, cal=None) -> Evaluation:
    results = record_results(records, model, cfg, cal)
    return Evaluation(summarize(results), results)


def _check_layout(records: list[DatasetRecord], model: nn.ModelWeights):
    layouts = {r.feature_layout_id for r in records}
    if layouts and layouts != {model.layout_id}:
        raise DataError(f"model feature layout {model.layout_id!r} does not match dataset {sorted(layouts)}")


def load_subset(dataset_path, split_path=None, subset: str = "test") -> list[DatasetRecord]:
    records = read_dataset(dataset_path)
    if split_path is None or subset == "all":
        return records
    split = json.loads(Path(split_path).read_text())
    if subset not in split:
        raise DataError(f"split file has no {subset!r} part")
    return _select(records, split[subset])


def run_eval(dataset_path, model_path, cfg: dict, out_dir=None, split_path=None, subset: str = "test",
             svg: bool = False, oracle: bool = False, cal: CalibrationFactors | None = None) -> Evaluation:
    """Predicted SNR_NL through the OSNR chain versus the injected SNR_ASE.

    Writes ``eval_summary.csv``, ``eval_ccdf.csv`` and ``eval_records.csv``
    to ``out_dir`` when given, plus ``eval_ccdf.svg`` with ``svg=True``.
    """
    records = load_subset(dataset_path, split_path, subset)
    model = None
    if not oracle:
        model = nn.load(model_path, expected_layout_id=None)
        _check_layout(records, model)
    ev = evaluate_records(records, model, cfg, cal)
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "eval_summary.csv", ev.report.summary_rows())
        write_csv(out_dir / "eval_ccdf.csv", ccdf_rows(ev.report))
        write_csv(out_dir / "eval_records.csv",
                  [{**asdict(r), "osnr_error_db": r.osnr_error, "snr_nl_error_db": r.snr_nl_error}
                   for r in ev.results])
        if svg:
            from .plotting import plot_ccdf

            plot_ccdf({"OSNR": ev.report.ccdf_osnr, "SNR$_{NL}$": ev.report.ccdf_snr_nl},
                      out_dir / "eval_ccdf.svg")
    return ev


def run_report(dataset_path, model_path, cfg: dict, out_dir, split_path=None, subset: str = "test",
               history_path=None, fmt: str = "png") -> dict:
    """Evaluation CSVs plus figures (CCDF, scatter, error histogram, training
    history) rendered to ``out_dir``."""
    from .plotting import plot_ccdf, plot_error_histogram, plot_estimate_scatter, plot_history

    out_dir = Path(out_dir)
    ev = run_eval(dataset_path, model_path, cfg, out_dir, split_path, subset)
    figs = [
        plot_ccdf({"OSNR": ev.report.ccdf_osnr, "SNR$_{NL}$": ev.report.ccdf_snr_nl},
                  out_dir / f"ccdf.{fmt}"),
        plot_estimate_scatter([r.true_osnr_db for r in ev.results], [r.est_osnr_db for r in ev.results],
                              np.array([r.valid for r in ev.results], dtype=bool), out_dir / f"osnr_scatter.{fmt}"),
        plot_error_histogram([r.osnr_error for r in ev.results if r.valid], out_dir / f"osnr_error_hist.{fmt}"),
    ]
    if history_path is not None and Path(history_path).exists():
        import csv

        with open(history_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        figs.append(plot_history([float(r["train_mse_db2"]) for r in rows], [float(r["val_mse_db2"]) for r in rows],
                                 out_dir / f"history.{fmt}"))
    return {**ev.report.to_dict(), "figures": [str(p) for p in figs]}


# ---------------------------------------------------------------- estimation
def run_estimate(frame_path, meta_path, model_path, cfg: dict, cal: CalibrationFactors | None = None) -> dict:
    frame = read_frame(frame_path)
    try:
        meta = LinkMetadata.from_dict(json.loads(Path(meta_path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read link metadata {meta_path}: {exc}") from exc
    model = nn.load(model_path)
    cal = cal or CalibrationFactors.from_config(cfg)
    bw = BandwidthPair(meta.baud, _ref_bandwidth(cfg))
    est = estimate_osnr(frame, meta, cal, model, bw, ValidityConfig.from_config(cfg), cfg)
    return {**est.to_dict(), "esnr_source": frame.esnr_source, "ber": frame.ber,
            "eye_closure": cal.eye_closure, "snr_imp_db": cal.snr_imp.db}
