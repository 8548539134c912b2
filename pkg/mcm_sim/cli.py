"""``mcm-sim`` command line, generated from the registered command classes.

Commands named "group action" become nested subcommands. Every invocation
writes its artifacts into one run directory with a hashed manifest.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import COMMAND_CLASS_MAPPINGS, COMMAND_DISPLAY_NAME_MAPPINGS, __version__
from .artifacts import RunDirectory, to_json
from .config import load_config
from .errors import ConfigError, MCMError
from .units import parse_quantity

logger = logging.getLogger("mcm_sim")

LOG_FORMAT = "[MCM-Sim] %(levelname)s %(name)s: %(message)s"
REPORT = "report.json"
NUMERIC_EXIT = 3


def configure_logging(verbose: int = 0, quiet: bool = False) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    for handler in list(logger.handlers):
        if getattr(handler, "_mcm_sim", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._mcm_sim = True
    logger.addHandler(handler)
    logger.setLevel(level)


def _option(name: str) -> str:
    return "--" + name.replace("_", "-")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="run configuration (default: $MCM_SIM_CONFIG or the packaged preset)")
    common.add_argument("--out", default=None, help="run directory (default: execution.output_dir/<command>)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return common


def _add_flag(parser: argparse.ArgumentParser, name: str, spec, required: bool) -> None:
    kind, opts = spec
    help_text = opts.get("help", "")
    if kind == "BOOLEAN":
        parser.add_argument(_option(name), dest=name, action="store_true", help=help_text)
        return
    if isinstance(kind, list):
        metavar = "{" + ",".join(kind) + "}"
    else:
        metavar = kind
    if opts.get("default") is not None:
        help_text = f"{help_text} (default: {opts['default']})"
    parser.add_argument(_option(name), dest=name, default=None, required=required,
                        metavar=metavar, help=help_text)


def _summary(cls) -> str:
    doc = (cls.__doc__ or "").strip()
    return doc.splitlines()[0] if doc else ""


def build_parser(mappings: Optional[Dict[str, Any]] = None) -> argparse.ArgumentParser:
    mappings = COMMAND_CLASS_MAPPINGS if mappings is None else mappings
    parser = argparse.ArgumentParser(
        prog="mcm-sim",
        description="Pulse-level simulator and analytics for mid-circuit measurement on Cs atom arrays.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common()
    top = parser.add_subparsers(dest="group", metavar="COMMAND", required=True)
    groups: Dict[str, argparse._SubParsersAction] = {}
    for command in sorted(mappings):
        cls = mappings[command]
        words = command.split(" ")
        title = COMMAND_DISPLAY_NAME_MAPPINGS.get(command, command)
        if len(words) == 1:
            sub = top.add_parser(words[0], parents=[common], help=title, description=_summary(cls))
        else:
            group, action = words
            if group not in groups:
                group_parser = top.add_parser(group, help=f"{group} commands")
                groups[group] = group_parser.add_subparsers(dest="action", metavar="ACTION", required=True)
            sub = groups[group].add_parser(action, parents=[common], help=title, description=_summary(cls))
        sub.set_defaults(command=command)
        inputs = cls.INPUT_TYPES()
        for section in ("required", "optional"):
            for name, spec in inputs.get(section, {}).items():
                _add_flag(sub, name, spec, section == "required")
    return parser


def _flag_error(flag: str, message: str) -> ConfigError:
    return ConfigError(f"{flag}: {message}", diagnostics=[{"path": flag, "message": message}])


def convert_flags(cls, namespace: argparse.Namespace) -> Dict[str, Any]:
    """Typed keyword arguments for the flags given on the command line."""
    inputs = cls.INPUT_TYPES()
    flags: Dict[str, Any] = {}
    for section in ("required", "optional"):
        for name, (kind, opts) in inputs.get(section, {}).items():
            raw = getattr(namespace, name, None)
            flag = _option(name)
            if kind == "BOOLEAN":
                if raw:
                    flags[name] = True
                continue
            if raw is None:
                continue
            if isinstance(kind, list):
                if raw not in kind:
                    raise _flag_error(flag, f"'{raw}' is not one of {', '.join(kind)}")
                value = raw
            elif kind == "INT":
                try:
                    value = int(raw)
                except ValueError:
                    raise _flag_error(flag, f"expected an integer, got '{raw}'") from None
            elif kind == "FLOAT":
                try:
                    value = float(raw)
                except ValueError:
                    raise _flag_error(flag, f"expected a number, got '{raw}'") from None
            elif kind == "QUANTITY":
                try:
                    value = parse_quantity(raw, opts["dimension"])
                except ConfigError as e:
                    raise _flag_error(flag, e.message) from None
            else:
                value = raw
            if "min" in opts and value < opts["min"]:
                raise _flag_error(flag, f"must be >= {opts['min']}, got {value}")
            if "max" in opts and value > opts["max"]:
                raise _flag_error(flag, f"must be <= {opts['max']}, got {value}")
            flags[name] = value
    verdict = cls.VALIDATE_INPUTS(**flags)
    if verdict is not True:
        raise ConfigError(str(verdict), diagnostics=[{"path": cls.COMMAND, "message": str(verdict)}])
    return flags


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


def run_command(command: str, config_path: Optional[str], out: Optional[str],
                namespace: argparse.Namespace) -> int:
    cls = COMMAND_CLASS_MAPPINGS[command]
    run_dir: Optional[RunDirectory] = RunDirectory(Path(out), command) if out else None
    try:
        config = load_config(config_path)
        if run_dir is None:
            run_dir = RunDirectory(Path(config.execution.output_dir) / command.replace(" ", "-"), command)
        flags = convert_flags(cls, namespace)
        logger.debug("%s %s", command, flags)
        outputs = getattr(cls(), cls.FUNCTION)(config, run_dir, **flags)
        results = dict(zip(cls.RETURN_NAMES, outputs))
        run_dir.write_json(REPORT, results["report"])
        run_dir.finalize()
        _emit(results["text"] if "text" in results else to_json(results["report"]))
        return 0
    except MCMError as e:
        report = dict(e.to_report(), command=command)
        exit_code = e.exit_code
        logger.error("%s", e.message)
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        report = {"error": "numeric", "message": str(e), "exit_code": NUMERIC_EXIT, "command": command}
        exit_code = NUMERIC_EXIT
        logger.error("numerical failure: %s", e)
    if run_dir is not None:
        run_dir.write_error(report)
    _emit(to_json(report))
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)
    configure_logging(args.verbose, args.quiet)
    return run_command(args.command, args.config, args.out, args)


if __name__ == "__main__":
    raise SystemExit(main())
