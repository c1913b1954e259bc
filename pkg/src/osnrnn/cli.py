"""``osnrnn`` command line: generate, train, eval, estimate, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 too many failed
scenarios during ``generate``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

# Pin BLAS threading before numpy loads: worker count must not change results.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from .config import ENV_OUT, ENV_THREADS, ConfigError, load_config  # noqa: E402

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config merged over the defaults")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker processes (env {ENV_THREADS}, default 1)")
    common.add_argument("--out", default=None, help=f"output directory (env {ENV_OUT}, default .)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="osnrnn", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="simulate a dataset (JSONL)")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--dataset", default="dataset.jsonl", help="file name inside --out")
    g.add_argument("--frames", action="store_true", help="also write symbol frames and link metadata")

    t = sub.add_parser("train", parents=[common], help="train the SNR_NL network")
    t.add_argument("dataset")
    t.add_argument("--model", default="model.json", help="file name inside --out")

    def _calibration(sp):
        sp.add_argument("--ec", type=float, default=None, help="eye-closure factor (overrides config)")
        sp.add_argument("--snr-imp-db", type=float, default=None,
                        help="implementation SNR in dB (overrides config)")

    e = sub.add_parser("eval", parents=[common], help="evaluate a model on a dataset")
    e.add_argument("dataset")
    e.add_argument("model", nargs="?")
    e.add_argument("--split", help="split file written by train")
    e.add_argument("--subset", choices=("train", "test", "all"), default="test")
    e.add_argument("--svg", action="store_true", help="also write the CCDF as SVG")
    e.add_argument("--oracle", action="store_true", help="feed true SNR_NL instead of the model")
    _calibration(e)

    s = sub.add_parser("estimate", parents=[common], help="estimate OSNR from one frame file")
    s.add_argument("frame")
    s.add_argument("meta")
    s.add_argument("model")
    _calibration(s)

    r = sub.add_parser("report", parents=[common], help="evaluation CSVs plus figures")
    r.add_argument("dataset")
    r.add_argument("model")
    r.add_argument("--split")
    r.add_argument("--subset", choices=("train", "test", "all"), default="test")
    r.add_argument("--history", help="training history CSV")
    r.add_argument("--format", choices=("png", "svg", "pdf"), default="png")
    return p


def _calibration_overrides(args) -> dict:
    cal = {}
    if getattr(args, "ec", None) is not None:
        cal["eye_closure"] = args.ec
    if getattr(args, "snr_imp_db", None) is not None:
        cal["snr_imp_db"] = args.snr_imp_db
    return {"calibration": cal} if cal else {}


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    return obj


def _print_json(d: dict):
    print(json.dumps(_jsonable(d), indent=1, sort_keys=True, ensure_ascii=False))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    from . import pipeline
    from .nn import ModelFormatError
    from .rxdsp import FrameFormatError

    threads = args.threads if args.threads is not None else int(os.environ.get(ENV_THREADS, "1"))
    if threads < 1:
        print("osnrnn: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or os.environ.get(ENV_OUT, "."))

    try:
        cfg = load_config(args.config, _calibration_overrides(args))
        if args.command == "generate":
            s = pipeline.run_generate(cfg, args.seed, args.count, out / args.dataset, threads,
                                      out / "frames" if args.frames else None)
            _print_json({"path": s.path, "count": s.count, "failed": s.failed,
                         "failure_rate": s.failure_rate, "resumed_from": s.resumed_from})
            if s.exceeded:
                print(f"osnrnn: {s.failed}/{s.count} scenarios failed", file=sys.stderr)
                return EXIT_PARTIAL
        elif args.command == "train":
            rep = pipeline.run_train(args.dataset, cfg, out / args.model)
            print(f"test OSNR error {rep['formatted']}  (SNR_NL {rep['snr_nl_formatted']})")
            for w in rep["warnings"]:
                print(f"warning: {w}", file=sys.stderr)
            _print_json(rep)
        elif args.command == "eval":
            if args.model is None and not args.oracle:
                print("osnrnn eval: error: a model is required unless --oracle is given", file=sys.stderr)
                return EXIT_USAGE
            ev = pipeline.run_eval(args.dataset, args.model, cfg, out, args.split, args.subset,
                                   args.svg, args.oracle)
            print(f"OSNR error {ev.report.osnr.formatted()}  invalid {ev.report.invalid_rate:.1%}")
            _print_json(ev.report.to_dict())
        elif args.command == "estimate":
            _print_json(pipeline.run_estimate(args.frame, args.meta, args.model, cfg))
        elif args.command == "report":
            _print_json(pipeline.run_report(args.dataset, args.model, cfg, out, args.split, args.subset,
                                            args.history, args.format))
    except (ConfigError, pipeline.DataError, ModelFormatError, FrameFormatError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
