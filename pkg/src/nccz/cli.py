from __future__ import annotations

import argparse
import json
import logging
import math
import os
import pathlib
import sys
from typing import Any, Dict, List, Optional, Tuple

from nccz import __version__
from nccz.certificates import weak11_sweep
from nccz.config import SUITES, NcczCLIConfig, SweepConfig
from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.core.operator import set_tolerances
from nccz.core.parallel import set_max_workers
from nccz.core.serializable import to_jsonable
from nccz.data_collection import SCHEMA_VERSION
from nccz.exporter import ExportError, write_json, write_report
from nccz.kernels import DEFAULT_SYMBOL_RESOLUTION, KernelRegistryError, RoughSymbol, resolve_kernel
from nccz.loaders import (
    FieldFormatError,
    dump_field,
    load_config_from_path,
    parse_field,
    read_field,
    try_load_local_config,
    write_field,
)
from nccz.maximal import MaximalFamily, strong_max_norm, weak_sweep
from nccz.operators import (
    NotOddSymbolError,
    PartitionWindowError,
    SingularIntegralOperator,
    TruncationLadder,
    UnresolvableTruncationError,
    rotation_method,
)
from nccz.plotting import emit_plots
from nccz.reports import CertifyReport
from nccz.suites import FAMILIES, field_family, run_suite

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

OUT_DIR_ENV = "NCCZ_OUT_DIR"
STDIN_NAME = "<stdin>"
EXPONENTS = (1.0, 2.0, math.inf)


class UsageError(Exception):
    """Raised for arguments that parse but cannot be acted on"""

    __slots__ = "message"

    def __init__(self, message: str) -> None:
        super().__init__()
        self.message: str = message

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(message={})".format(self.__class__.__name__, self.message)


def _add_field_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "field", nargs="?", default=None, help="NDJSON field file; read from stdin when omitted"
    )
    parser.add_argument(
        "-k", "--kernel", default=None, help="Kernel registry name (defaults to the config)"
    )
    parser.add_argument("-o", "--output", default=None, help="Where to write the result")


def _add_family_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--family",
        choices=FAMILIES,
        default=None,
        help="Maximal family built from the field (default: martingale)",
    )


def _exponent(text: str) -> float:
    return math.inf if text.strip().lower() == "inf" else float(text)


def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        "nccz", description="Operator-valued Calderon-Zygmund experiments"
    )

    parser.add_argument(
        "-v",
        "--version",
        action="store_true",
        default=False,
        help="Print the version of nccz",
    )

    parser.add_argument(
        "-c",
        "--config",
        help="Path to the configuration file to load before running",
    )

    parser.add_argument("--suite", choices=SUITES, help="Suite to run")
    parser.add_argument("--seed", type=int, help="Seed of the corpus generator")
    parser.add_argument(
        "--out-dir",
        help=f"Output root; defaults to ${OUT_DIR_ENV} or the working directory",
    )
    parser.add_argument("--threads", type=int, help="Cap on the worker pool")
    parser.add_argument(
        "--svg",
        default=None,
        action="store_true",
        help="Also draw SVG plots (needs matplotlib)",
    )
    parser.add_argument("--kernel", dest="kernel_name", help="Kernel registry name")
    parser.add_argument("--sweep", help="Lambda sweep written as start:stop:num")
    parser.add_argument("--corpus-size", type=int, help="Number of random fields")

    parser.add_argument(
        "-q",
        "--quiet",
        default=False,
        action="store_true",
        help="Only log warnings and errors",
    )

    commands = parser.add_subparsers(dest="command")

    for suite in SUITES:
        if suite == "maxnorm":
            continue
        commands.add_parser(suite, help=f"Run the {suite} suite")

    maxnorm_parser = commands.add_parser(
        "maxnorm",
        help="Run the maxnorm suite, or the strong maximal norm of one field with --p",
    )
    _add_field_arguments(maxnorm_parser)
    maxnorm_parser.add_argument(
        "--p", type=_exponent, choices=EXPONENTS, default=None, help="1, 2 or inf"
    )
    _add_family_argument(maxnorm_parser)
    maxnorm_parser.add_argument("--majorant", default=None, help="Write the majorant as NDJSON")

    apply_parser = commands.add_parser("apply", help="Apply T_eps to a field")
    _add_field_arguments(apply_parser)
    apply_parser.add_argument("--eps", type=float, required=True, help="Truncation radius")

    ladder_parser = commands.add_parser(
        "ladder", help="Lacunary operators T^phi_j f along the truncation ladder"
    )
    _add_field_arguments(ladder_parser)
    ladder_parser.add_argument(
        "--J", dest="top", type=int, default=None, help="Top ladder index (default: finest)"
    )

    rotate_parser = commands.add_parser(
        "rotate", help="Rough operator with an odd symbol through directional Hilbert transforms"
    )
    _add_field_arguments(rotate_parser)
    rotate_parser.add_argument(
        "--omega", required=True, help="CSV of angle,value samples or a named symbol"
    )
    rotate_parser.add_argument(
        "--eps", type=float, default=None, help="Truncation radius (default: finest ladder one)"
    )
    rotate_parser.add_argument(
        "--resolution", type=int, default=DEFAULT_SYMBOL_RESOLUTION, help="Angular samples"
    )

    weaknorm_parser = commands.add_parser(
        "weaknorm", help="Weak maximal quasinorm of one field over a lambda sweep"
    )
    _add_field_arguments(weaknorm_parser)
    weaknorm_parser.add_argument(
        "--lambda-sweep", required=True, help="Absolute levels written as start:stop:num"
    )
    weaknorm_parser.add_argument("--p", type=float, default=1.0, help="Weak exponent")
    _add_family_argument(weaknorm_parser)

    certify_parser = commands.add_parser(
        "certify", help="Build weak type (1, 1) certificates for a field"
    )
    _add_field_arguments(certify_parser)
    certify_parser.add_argument("--out", dest="output", help="Alias of --output")
    levels = certify_parser.add_mutually_exclusive_group(required=True)
    levels.add_argument("--lam", type=float, help="A single level lambda")
    levels.add_argument("--lambda-sweep", help="Absolute levels written as start:stop:num")

    return parser


def get_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return get_parser().parse_args(argv)


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.command in SUITES:
        overrides["suite"] = args.command
    elif args.suite is not None:
        overrides["suite"] = args.suite
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.svg is not None:
        overrides["svg"] = args.svg
    if args.corpus_size is not None:
        overrides["corpus_size"] = args.corpus_size
    if args.sweep is not None:
        overrides["lambda_sweep"] = SweepConfig.parse(args.sweep).model_dump()
    return overrides


def load_config(args: argparse.Namespace) -> NcczCLIConfig:
    """Defaults, then the config file, then the command line flags"""
    config = NcczCLIConfig()

    if args.config:
        config = NcczCLIConfig.from_partial(load_config_from_path(args.config), config)
        config.path = os.path.abspath(args.config)
    else:
        loaded_settings = try_load_local_config()
        if loaded_settings:
            config = NcczCLIConfig.from_partial(loaded_settings, config)

    config = NcczCLIConfig.from_partial(_flag_overrides(args), config)

    if args.kernel_name is not None:
        kernel = config.kernel.model_copy(update={"name": args.kernel_name})
        config = config.model_copy(update={"kernel": kernel})

    return config


def output_root(config: NcczCLIConfig) -> pathlib.Path:
    if config.out_dir:
        return pathlib.Path(config.out_dir)
    return pathlib.Path(os.environ.get(OUT_DIR_ENV, os.getcwd()))


def run_suite_command(config: NcczCLIConfig) -> int:
    out_dir = output_root(config) / f"nccz_{config.suite}_{config.seed}"
    result = run_suite(config.experiment(), config.suite)

    write_report(result.report, out_dir)
    emit_plots(result.collector, out_dir, result.plots, config.svg)

    if result.passed:
        logger.info("Suite %s passed; artifacts in %s", config.suite, out_dir)
        return EXIT_PASS

    failed = result.report.failed()
    logger.error("Suite %s failed %d hard checks", config.suite, len(failed))
    for name in failed[:20]:
        logger.error("  %s", name)
    return EXIT_FAIL


# ---------------------------------------------------------------------------
# Single-field commands
# ---------------------------------------------------------------------------


def _field_source(args: argparse.Namespace) -> str:
    return args.field if args.field not in (None, "-") else STDIN_NAME


def _read_input(args: argparse.Namespace) -> OperatorField:
    if args.field in (None, "-"):
        return parse_field(sys.stdin, STDIN_NAME)
    return read_field(args.field)


def _write_output(f: OperatorField, args: argparse.Namespace) -> None:
    if args.output:
        write_field(f, args.output)
    else:
        dump_field(f, sys.stdout)


def _emit_json(data: Dict[str, Any], output: Optional[str]) -> None:
    if output:
        write_json(data, output)
    else:
        sys.stdout.write(json.dumps(to_jsonable(data), indent=2) + "\n")


def _kernel_name(args: argparse.Namespace, config: NcczCLIConfig) -> str:
    return args.kernel if args.kernel else config.kernel.name


def _operator_for(
    args: argparse.Namespace,
    config: NcczCLIConfig,
    grid: DyadicGrid,
    ladder: Optional[TruncationLadder] = None,
) -> SingularIntegralOperator:
    name = _kernel_name(args, config)
    params = config.kernel.params if name == config.kernel.name else {}
    kernel = resolve_kernel(name, grid.d, params)
    return SingularIntegralOperator(kernel, grid, ladder, settings=config.tolerances.quadrature())


def _family_for(
    args: argparse.Namespace, config: NcczCLIConfig, f: OperatorField
) -> Tuple[str, MaximalFamily]:
    name = args.family or "martingale"
    op = None if name == "martingale" else _operator_for(args, config, f.grid)
    return name, field_family(f, name, op)


def _parse_levels(text: str) -> List[float]:
    return SweepConfig.parse(text).levels()


def run_apply(args: argparse.Namespace, config: NcczCLIConfig) -> int:
    f = _read_input(args)
    op = _operator_for(args, config, f.grid)
    _write_output(op.truncated(f, args.eps), args)
    return EXIT_PASS


def run_ladder(args: argparse.Namespace, config: NcczCLIConfig) -> int:
    """
    T^phi_j f for j = 0..J

    With --output the fields go to <output>/lacunary_j<j>.ndjson next to a
    ladder.json summary; otherwise only the summary is printed.
    """
    f = _read_input(args)
    op = _operator_for(args, config, f.grid, TruncationLadder.default(f.grid, args.top))

    splits = [op.pieces(f, op.ladder.j_of(eps)) for eps in op.ladder]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "field": _field_source(args),
        "kernel": op.kernel.name,
        "J": op.ladder.top,
        "ladder": op.ladder.to_dict(),
        "residuals": [split.relative_residual for split in splits],
    }

    if not args.output:
        _emit_json(summary, None)
        return EXIT_PASS

    out_dir = pathlib.Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for split in splits:
        path = out_dir / f"lacunary_j{split.j}.ndjson"
        write_field(split.partial, path)
        files.append(path.name)
    summary["files"] = files
    write_json(summary, out_dir / "ladder.json")
    logger.info("Wrote %d lacunary fields to %s", len(files), out_dir)
    return EXIT_PASS


def load_symbol(spec: str, d: int, resolution: int) -> RoughSymbol:
    """A CSV of angle,value samples when the path exists, else a named symbol"""
    if pathlib.Path(spec).is_file():
        return RoughSymbol.from_csv(spec, d, resolution)
    return RoughSymbol.named(spec, d, resolution)


def run_rotate(args: argparse.Namespace, config: NcczCLIConfig) -> int:
    f = _read_input(args)
    eps = args.eps if args.eps is not None else TruncationLadder.default(f.grid).epsilons[-1]
    if not eps > 0:
        raise UsageError(f"--eps must be positive, got {eps}")
    omega = load_symbol(args.omega, f.grid.d, args.resolution)
    _write_output(rotation_method(omega, f, eps), args)
    return EXIT_PASS


def run_maxnorm_field(args: argparse.Namespace, config: NcczCLIConfig) -> int:
    f = _read_input(args)
    name, family = _family_for(args, config, f)
    p = args.p if args.p is not None else 1.0
    cert = strong_max_norm(family, p, settings=config.tolerances.barrier())
    if cert.fallback:
        logger.warning("Some cells kept an unconverged majorant; the gap is %.3e", cert.gap)

    if args.majorant:
        write_field(cert.as_field(), args.majorant)

    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "field": _field_source(args),
            "family": name,
            "members": len(family),
            **cert.to_dict(),
        },
        args.output,
    )
    return EXIT_PASS


def run_weaknorm(args: argparse.Namespace, config: NcczCLIConfig) -> int:
    lambdas = _parse_levels(args.lambda_sweep)
    f = _read_input(args)
    name, family = _family_for(args, config, f)
    sweep = weak_sweep(family, lambdas, args.p)

    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "field": _field_source(args),
            "family": name,
            "p": args.p,
            **sweep.to_dict(),
        },
        args.output,
    )
    return EXIT_PASS


def run_certify(args: argparse.Namespace, config: NcczCLIConfig) -> int:
    if args.lambda_sweep is not None:
        lambdas = _parse_levels(args.lambda_sweep)
    elif not args.lam > 0:
        raise UsageError(f"--lam must be positive, got {args.lam}")
    else:
        lambdas = [args.lam]

    f = _read_input(args)
    op = _operator_for(args, config, f.grid)
    report = CertifyReport(
        version=__version__,
        field=_field_source(args),
        kernel=op.kernel.name,
        lambdas=lambdas,
        summaries=weak11_sweep(op, f, lambdas),
    )

    if args.output:
        write_json(report.model_dump(), args.output)
    else:
        sys.stdout.write(report.model_dump_json(indent=2) + "\n")

    if report.passed:
        return EXIT_PASS
    for name in report.failed()[:20]:
        logger.error("  %s", name)
    return EXIT_FAIL


def _wants_single_field(args: argparse.Namespace) -> bool:
    return args.command == "maxnorm" and (
        args.field is not None or args.p is not None or args.majorant is not None
    )


FIELD_COMMANDS = {
    "apply": run_apply,
    "ladder": run_ladder,
    "rotate": run_rotate,
    "weaknorm": run_weaknorm,
    "certify": run_certify,
}


def run(argv: Optional[List[str]] = None) -> int:
    args = get_args(argv)

    if args.version:
        print(__version__)
        return EXIT_PASS

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_config(args)
    except (OSError, ValueError) as err:
        logger.error("Invalid configuration: %s", err)
        return EXIT_USAGE

    set_tolerances(config.tolerances.tolerances())
    set_max_workers(config.threads)

    try:
        if args.command in FIELD_COMMANDS:
            return FIELD_COMMANDS[args.command](args, config)
        if _wants_single_field(args):
            return run_maxnorm_field(args, config)
        return run_suite_command(config)
    except (
        UsageError,
        KernelRegistryError,
        UnresolvableTruncationError,
        NotOddSymbolError,
        FieldFormatError,
        FileNotFoundError,
        ValueError,
    ) as err:
        logger.error("%s", err)
        return EXIT_USAGE
    except (ExportError, PartitionWindowError, OSError) as err:
        logger.error("%s", err)
        return EXIT_FAIL
