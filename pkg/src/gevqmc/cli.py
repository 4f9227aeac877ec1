"""Command-line driver.

    gevqmc validate    [--config FILE] [--KEY VALUE ...] [--weights-out FILE]
    gevqmc cbc         --n PRIME --s DIM --out FILE [--weights FILE] [--kernel surrogate|table:FILE]
    gevqmc qmc-study   [--config FILE] [--full] [--threads N] [--seed S] --out FILE
    gevqmc trunc-study ...
    gevqmc fem-study   ...

Every config key is also a flag of the same name (``--n_list`` or
``--n-list``).  Precedence: defaults, then ``--full``, then the config file,
then flags.  Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import fem, studies
from .betagauss import DivergenceError, QuadratureError
from .lattice import LatticeError, ShiftSet, cbc_construct, kernel_table, write_genvec, write_shifts
from .regularity import OrderCapError
from .studies import ConfigError, StudyConfig
from .weights import ParameterError, kernel_case, load_weights, save_weights, zeta

__all__ = ["main", "build_parser", "resolve_config"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("gevqmc")


def _add_config_flags(p: argparse.ArgumentParser, skip=()) -> None:
    g = p.add_argument_group("config overrides")
    for f in dataclasses.fields(StudyConfig):
        if f.name in skip:
            continue
        names = [f"--{f.name}"]
        if "_" in f.name:
            names.append(f"--{f.name.replace('_', '-')}")
        g.add_argument(*names, dest=f"cfg_{f.name}", default=None, metavar=f.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gevqmc", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, skip=()):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--full", action="store_true", help="full-scale parameters (multi-hour)")
        _add_config_flags(p, skip)

    p = sub.add_parser("validate", help="check a config and print derived constants")
    common(p)
    p.add_argument("--weights-out", help="write the POD weights file")

    p = sub.add_parser("cbc", help="construct a generating vector")
    common(p, skip=("s", "kernel", "out"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True, dest="cfg_s")
    p.add_argument("--weights", help="weights file (default: built from the config)")
    p.add_argument("--kernel", dest="cfg_kernel", default=None, help="surrogate or table:<file>")
    p.add_argument("--out", required=True, dest="cfg_out")

    for name, helptext in (
        ("qmc-study", "R.M.S. QMC error versus n"),
        ("trunc-study", "dimension truncation error versus s"),
        ("fem-study", "finite element error versus h"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name == "qmc-study":
            p.add_argument("--shifts-out", help="also write the random shifts")
    return parser


def resolve_config(args) -> StudyConfig:
    cfg = StudyConfig(threads=os.cpu_count() or 1)
    if args.full:
        cfg = studies.with_overrides(cfg, studies.FULL_SCALE)
    if args.config:
        cfg = studies.load_config(args.config, cfg)
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    cfg = studies.with_overrides(cfg, flags)
    cfg.validate()
    return cfg


def _cmd_validate(cfg: StudyConfig, args) -> int:
    d = studies.derived_quantities(cfg)
    sp = cfg.space_params()
    print(f"config_hash = {cfg.config_hash()}")
    print(f"kernel_case = {kernel_case(sp)}")
    print(f"p = {d['p']!r}")
    print(f"lambda = {d['lambda']!r}")
    print(f"K = {d['K']!r}")
    print(f"zeta(2 r lambda) = {zeta(2 * cfg.r * d['lambda'])!r}")
    print(f"theoretical_rate = {d['theoretical_rate']!r}")
    print(f"rate_check = {d['theoretical_rate']:.2f}")
    if args.weights_out:
        s_max = max(cfg.s, cfg.s_reference, cfg.fem_s)
        w = studies.build_weights(cfg, s_max)
        save_weights(args.weights_out, w, [f"config_hash={cfg.config_hash()}"])
        print(f"weights written to {args.weights_out} (s_max = {s_max})")
    return EXIT_OK


def _cmd_cbc(cfg: StudyConfig, args) -> int:
    if args.weights:
        try:
            w = load_weights(args.weights)
        except OSError as exc:
            raise ConfigError(f"cannot read weights {args.weights}: {exc}") from exc
    else:
        w = studies.build_weights(cfg, cfg.s)
    try:
        omega = kernel_table(cfg.kernel, args.n)
    except OSError as exc:
        raise ConfigError(f"cannot read kernel table: {exc}") from exc
    g = cbc_construct(args.n, cfg.s, w, omega, cfg.order_cap)
    header = [f"kernel_mode={cfg.kernel}", f"seed={cfg.seed}", f"config_hash={cfg.config_hash()}"]
    write_genvec(cfg.out, g, header)
    print(f"wrote n={g.n} s={g.s} to {cfg.out}")
    return EXIT_OK


def _cmd_study(cfg: StudyConfig, args) -> int:
    runner = {
        "qmc-study": studies.qmc_convergence_study,
        "trunc-study": studies.truncation_study,
        "fem-study": studies.fem_study,
    }[args.command]
    out = cfg.out or f"{args.command.replace('-', '_')}.csv"
    table = runner(cfg)
    table.write(out)
    for col in ("h1", "l2"):
        fr = table.fit(col)
        if fr is not None:
            print(f"{col} slope = {fr.slope:.4f}")
    if getattr(args, "shifts_out", None):
        write_shifts(args.shifts_out, ShiftSet.generate(cfg.R, cfg.s, cfg.seed))
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "validate":
            return _cmd_validate(cfg, args)
        if args.command == "cbc":
            return _cmd_cbc(cfg, args)
        return _cmd_study(cfg, args)
    except (ConfigError, ParameterError, LatticeError, OrderCapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fem.SolverError, QuadratureError, DivergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
