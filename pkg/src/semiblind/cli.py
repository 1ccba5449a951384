"""Command-line front end: ``semiblind run|check|oracle``."""

import argparse
import logging
import sys
import warnings

from .config import load_plan
from .errors import ConfigError
from .harness import run_experiment
from .metrics import check_identifiability, complexity_estimate


def _overrides(pairs):
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} must look like section.key=value")
        out[key.strip()] = value.strip()
    return out


def _read_plan(args):
    with open(args.plan) as fh:
        text = fh.read()
    return load_plan(text, _overrides(args.set))


def cmd_run(args):
    plan = _read_plan(args)
    for path in run_experiment(plan, workers=args.workers):
        print(path)
    return 0


def cmd_check(args):
    plan = _read_plan(args)
    ok = True
    for name, cfg in plan.configs():
        report = check_identifiability(cfg)
        p1, p2 = complexity_estimate(cfg)
        print(f"[{name or 'base'}] protocol={cfg.protocol} M={cfg.M} N={cfg.N} N_r={cfg.N_r} "
              f"K={cfg.K} I={cfg.I} P={cfg.P} T={cfg.T}")
        for line in report.lines():
            print("  " + line)
        print(f"  per-iteration cost: P1 {p1:.4g}, P2 {p2:.4g}")
        ok &= report.overall
    print("identifiable" if ok else "NOT identifiable")
    return 0 if ok else 1


def cmd_oracle(args):
    from .oracles import run_suite

    failed = 0
    for name, err, tol in run_suite(seed=args.seed):
        status = "PASS" if err < tol else "FAIL"
        failed += status == "FAIL"
        print(f"{status}  {name}  (max error {err:.2e}, tol {tol:.0e})")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="semiblind", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, helptext in (("run", cmd_run, "run an experiment plan"),
                                 ("check", cmd_check, "validate a plan and report identifiability")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("plan", help="INI plan file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a plan value (repeatable)")
        p.set_defaults(func=func)
    sub.choices["run"].add_argument(
        "--workers", type=int, default=None,
        help="worker processes (default: $SEMIBLIND_WORKERS or 1)")

    p = sub.add_parser("oracle", help="run the brute-force equivalence suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
