"""Command-line entry point: ``restless-bai {run,drift,sweep,verify,describe}``.

Exit codes: 0 success, 2 invalid input, 3 a ``verify`` check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .errors import IoError, ParseError, RestlessBAIError, ValidationError
from . import experiment as ex

log = logging.getLogger("restless_bai")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERIFY_FAILED = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="restless-bai", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    helps = {
        "run": "Monte Carlo trials of the stopping policy (plus an L sweep if configured)",
        "drift": "non-stopping run comparing LLR slopes and occupancy with their limits",
        "sweep": "T_R* and T_R unif over a range of R",
        "verify": "structural checks; exit code 3 if any fails",
        "describe": "print a summary of the instance",
    }
    for verb, text in helps.items():
        sp = sub.add_parser(verb, help=text)
        sp.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        sp.add_argument("--out", type=Path, default=None, help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=None, help="override the base seed")
        sp.add_argument("--workers", type=int, default=None, help="override the worker count")
        sp.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        if verb == "drift":
            sp.add_argument("--estimate", action="store_true", help="follow the running estimate instead of the true C")
        if verb == "verify":
            sp.add_argument("--reference", type=Path, default=None,
                            help="earlier report.json whose constants must recompute identically")
        if verb in ("run", "drift", "sweep", "verify"):
            sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return p


def _emit(report, args) -> None:
    if args.out is None:
        return
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {args.out}: {exc}") from exc
    for path in ex.emit_report(report, args.out, figures=not args.no_figures):
        log.info("wrote %s", path)


def _print_checks(report) -> None:
    for c in report.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: value={c['value']!r} threshold={c['threshold']!r}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.workers is not None:
            cfg = replace(cfg, workers=max(1, args.workers))

        if args.verb == "describe":
            print(json.dumps(ex.describe(cfg), indent=2))
            return EXIT_OK
        if args.verb == "run":
            report = ex.monte_carlo(cfg)
            s, t = report.summary, report.theory
            print(f"trials={s['trials']} errors={s['errors']} error_rate={s['error_rate']:.4g} "
                  f"(95% CI {s['ci95_low']:.4g}..{s['ci95_high']:.4g})")
            print(f"mean tau={s['mean_tau']:.4g} median tau={s['median_tau']:.4g} "
                  f"tau/log L={s['tau_over_logL']:.4g} bound={t['bound']:.4g}")
        elif args.verb == "drift":
            report = ex.drift_report(cfg, fixed=not args.estimate)
            for r in report.drift:
                print(f"n={r['n']} vs {r['alternative']}: slope={r['slope']:.6g} limit={r['limit']:.6g} "
                      f"occupancy gap={r['occupancy_gap']:.3g}")
        elif args.verb == "sweep":
            report = ex.lp_sweep_report(cfg)
            for r in report.lp_table:
                print(f"R={r['R']} n_states={r['n_states']} T_R*={r['T_R_star']:.10g} T_R unif={r['T_R_unif']:.10g}")
        else:
            reference = ex.read_report(args.reference) if args.reference else None
            report = ex.verify_report(cfg, reference)
        _emit(report, args)
        _print_checks(report)
        if args.verb == "verify" and not report.passed:
            return EXIT_VERIFY_FAILED
        return EXIT_OK
    except (ParseError, ValidationError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RestlessBAIError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
