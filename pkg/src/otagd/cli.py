"""Command line entry point.

    otagd run CONFIG [--out DIR] [--check]
    otagd sweep CONFIG --axis {alpha,N,rho,beta} --values 1.3,1.5 [--out DIR] [--check]
    otagd validate CONFIG
    otagd bounds CONFIG [--k 10,100,1000] [--json]

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 failed
``--check``.  ``OTAGD_OUTPUT_DIR`` overrides the configured output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from otagd.config import ConfigError, load_config
from otagd.experiment import SWEEP_AXES, bound_report, check_run, run_experiment, sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otagd", description="Over-the-air GD under heavy-tailed interference")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one Monte Carlo experiment")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides config and env)")
    r.add_argument("--check", action="store_true", help="exit 3 if the fitted slope misses the predicted rate")

    s = sub.add_parser("sweep", help="repeat an experiment along one parameter axis")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=SWEEP_AXES)
    s.add_argument("--values", required=True, type=_floats)
    s.add_argument("--out", default=None)
    s.add_argument("--check", action="store_true", help="exit 3 if a monotonicity verdict fails")

    v = sub.add_parser("validate", help="check a config file and print the resolved settings")
    v.add_argument("config")

    b = sub.add_parser("bounds", help="evaluate the closed-form bounds for a config")
    b.add_argument("config")
    b.add_argument("--k", type=_ints, default=None, help="rounds at which to evaluate")
    b.add_argument("--json", action="store_true")
    return p


def _print_bounds(report: dict) -> None:
    print("round k      GD bound        momentum bound")
    t1, t2 = report.get("gd_bound"), report.get("momentum_bound")
    for i, k in enumerate(report["k"]):
        a = f"{t1[i]:.6g}" if isinstance(t1, list) else "n/a"
        b = f"{t2[i]:.6g}" if isinstance(t2, list) else "n/a"
        print(f"{k:<12d} {a:<15s} {b}")
    for name in ("gd_bound", "momentum_bound"):
        if isinstance(report.get(name), dict):
            print(f"{name}: {report[name]['error']}")
    if "note" in report:
        print(f"note: {report['note']}")
    if "C" in report:
        c = report["C"]
        extra = f" (mean of draws below the {c['truncation_quantile']} quantile)" if c["source"] == "calibrated" else ""
        print(f"C = {c['value']:.6g} [{c['source']}]{extra}")
    g = report["generalization"]
    print(f"generalization bound (B={g['B']}, alpha={g['alpha']}, lambda={g['lambda']:.6g}, "
          f"|D|={g['dataset_size']}, p={g['p']}): {g['bound']:.6g}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "bounds" and args.k:
            cfg = cfg.copy_with("analysis", "bound_k", tuple(args.k))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate":
            print(cfg.dumps(), end="")
            return EXIT_OK
        if args.command == "bounds":
            report = bound_report(cfg)
            if args.json:
                print(json.dumps(report, indent=2, sort_keys=True))
            else:
                _print_bounds(report)
            return EXIT_OK
        if args.command == "run":
            res = run_experiment(cfg, args.out)
            fit = res.summary["fit"] or {}
            print(f"wrote {len(res.files)} files to {res.directory}")
            if fit.get("slope") is not None:
                print(f"fitted slope {fit['slope']:.4f} over k in {fit['fit_window']}, "
                      f"predicted {res.summary['predicted_exponent']}")
            if res.summary["flagged_trials"]:
                print(f"warning: {len(res.summary['flagged_trials'])} trials hit non-finite iterates")
            if args.check:
                ok, msg = check_run(cfg, res.summary)
                print(("PASS " if ok else "FAIL ") + msg)
                return EXIT_OK if ok else EXIT_CHECK
            return EXIT_OK
        if args.command == "sweep":
            comp = sweep(cfg, args.axis, args.values, args.out)
            print("value        slope        final median error")
            for r in comp["rows"]:
                slope = "n/a" if r["fitted_slope"] is None else f"{r['fitted_slope']:.4f}"
                print(f"{r['value']:<12g} {slope:<12s} {r['final_median_error']:.6g}")
            for name, ok in comp["verdicts"].items():
                print(f"{name}: {ok}")
            if args.check and not comp["verdicts"]["passed"]:
                return EXIT_CHECK
            return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # every module error maps to the runtime exit code
        logging.getLogger("otagd").debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
