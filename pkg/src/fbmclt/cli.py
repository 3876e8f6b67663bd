"""Command line entry point: ``fbmclt <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 failed
checks in ``--check`` mode.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .analytic import chd_closed_form, chd_quadrature, riesz_constant
from .errors import ConfigError, DomainError, NumericalError
from .experiments import RUNNERS, ExperimentConfig, emit_report
from .fbm_core import HurstModel
from .moments import MomentSpec, clt_moment_target, limit_moment
from .rng import RngStream
from .testfunc import TestFunction

log = logging.getLogger("fbmclt")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4


def _constants(args) -> int:
    try:
        model = HurstModel(args.hurst, args.dim)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    beta = args.beta if args.beta is not None else model.beta
    out = {"chd_closed": None, "chd_quad": None, "abs_err": None, "riesz_c": None,
           "regime": "clt" if model.clt_regime else "outside"}
    if model.clt_regime:
        closed = chd_closed_form(model)
        quad = chd_quadrature(model)
        out.update(chd_closed=closed.value, chd_quad=quad.value, abs_err=quad.abs_error_estimate)
    if 0.0 < beta < 2.0:
        out["riesz_c"] = riesz_constant(beta, model.d)
    elif args.beta is not None:
        raise ConfigError(f"beta must lie in (0, 2), got {beta}")
    if args.json:
        print(json.dumps(out, sort_keys=True))
    else:
        for key in ("regime", "chd_closed", "chd_quad", "abs_err", "riesz_c"):
            print(f"{key:>10}: {out[key]}")
    return EXIT_OK


def _oracle(args) -> int:
    try:
        with open(args.config) as fh:
            data = json.load(fh)
        model = HurstModel(data["hurst"], data.get("dim", 1))
        spec = MomentSpec.from_dict(data)
        samples = int(data.get("samples", 200_000))
        seed = args.seed if args.seed is not None else int(data.get("seed", 0))
        func = data.get("function")
        func = TestFunction.from_dict({"dim": model.d, **func}) if func else None
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad oracle spec {args.config}: {exc}") from None
    stream = RngStream(seed).substream("oracle")
    try:
        if func is None:
            est = limit_moment(spec, model, samples, stream)
        else:
            est = clt_moment_target(spec, model, func, samples, stream)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    print(json.dumps(est.to_dict(), sort_keys=True))
    return EXIT_OK


def _experiment(args) -> int:
    config = ExperimentConfig.load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.out is not None:
        changes["output_dir"] = args.out
    if changes:
        config = config.replace(**changes)
    report = RUNNERS[args.command](config)
    manifest = emit_report(report, config, config.output_dir)
    log.info("wrote %s", ", ".join(sorted(manifest["checksums"])))
    if report.summary:
        print(json.dumps(manifest["summary"], sort_keys=True))
    # exploratory runs report numbers only; verdicts belong to --check
    if args.check:
        for name, ok in report.checks.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if args.check and not report.passed:
        return EXIT_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbmclt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="C_(H,d), its quadrature check and c_(beta,d)")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_constants)

    p = sub.add_parser("oracle", help="limit moment of W(L(0)) increments from a spec JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=_oracle)

    for name in ("simulate", "clt-moments", "lln", "tightness", "ks"):
        doc = (RUNNERS[name].__doc__ or "").strip()
        p = sub.add_parser(name, help=doc.splitlines()[0] if doc else None)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--check", action="store_true", help="exit 4 if any check fails")
        p.set_defaults(handler=_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"fbmclt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"fbmclt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"fbmclt: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
