"""Command line entry point ``nls-perturb``.

Usage::

    nls-perturb run --scenario gp --alpha 0.01 --out out/gp
    nls-perturb modes --scenario log
    nls-perturb verify --scenario log
    nls-perturb evolve --config my.toml --threads 4
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nls-perturb",
                                     description="Nonlinear oscillation modes of stationary NLS solutions.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"run": "full pipeline: modes, corrections, invariants and identity reports",
             "modes": "oscillation spectrum only",
             "verify": "vanishing-coefficient identities only",
             "evolve": "time evolution of the assembled perturbation"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", choices=("gp", "log", "custom"), default=None)
        p.add_argument("--alpha", type=float, default=None, help="perturbation amplitude")
        p.add_argument("--config", default=None, help="TOML file overriding the scenario preset")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads (also caps BLAS)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_config(args):
    from .config import ConfigError, from_mapping, load, preset

    if args.config is not None:
        cfg = load(args.config, scenario=args.scenario)
    else:
        if args.scenario == "custom":
            raise ConfigError("scenario 'custom' needs --config")
        cfg = preset(args.scenario or "gp")
    overrides = {k: v for k, v in (("alpha", args.alpha), ("out", args.out), ("threads", args.threads))
                 if v is not None}
    if overrides:
        data = cfg.to_dict()
        data.update(overrides)
        cfg = from_mapping(data, cfg.scenario)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))

    from .config import ConfigError
    from .pipeline import StageError, run_pipeline

    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"nls-perturb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = run_pipeline(cfg, args.command)
    except StageError as exc:
        print(f"nls-perturb: numerical failure in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"nls-perturb: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in res.artifacts:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
