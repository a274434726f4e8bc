"""
Command line for the designer.

    python -m app.cli design --config runs/dmin.json --snr-db 20 --out out/joint.json
    python -m app.cli evaluate --in out/joint.json --snr-db 0,5,10,15,20 --out out/eval.csv
    python -m app.cli simulate --config runs/pilot-baseline.json --blocks 100000

Every command reads an optional JSON RunSpec (--config) and applies the flags
on top of it. The outcome summary is printed as JSON on stdout; errors are
printed as one JSON envelope line on stderr with exit status 2 (configuration)
or 3 (numerical failure).
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from sqlalchemy.exc import SQLAlchemyError

from app.config import settings
from app.schemas.codebook import PartitionStrategy
from app.schemas.optimizer import Criterion
from app.schemas.run_spec import Command, RunSpec
from app.schemas.simulation import Scheme
from app.schemas.system import db_to_linear
from app.utils.exceptions import (
    AppException, ConfigException, ExitCode, LinearAlgebraException, NotFoundException,
    UsageException, validation_details,
)

logger = logging.getLogger("app.cli")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of printing usage and exiting."""

    def error(self, message):
        raise UsageException(message)


def _snr_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageException(f"--snr-db expects a comma separated list of numbers, got '{text}'", field="snr_db")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="app.cli", description="Joint constellation design for the two-user non-coherent MIMO MAC")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG | INFO | WARNING | ERROR")
    parser.add_argument("--no-record", action="store_true", help="Do not write the run to the registry")
    sub = parser.add_subparsers(dest="command", required=True)

    for command in Command:
        p = sub.add_parser(command.value)
        p.add_argument("--config", help="JSON RunSpec file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="Output file (codebook JSON or CSV)")
        p.add_argument("--in", dest="input", help="Input codebook file")
        p.add_argument("--snr-db", type=_snr_list, help="Comma list; design SNR for generate/design")
        p.add_argument("--T", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--M1", type=int)
        p.add_argument("--M2", type=int)
        p.add_argument("--tol", type=float, help="Identifiability tolerance")

        if command in (Command.GENERATE, Command.DESIGN):
            p.add_argument("--criterion", help=" | ".join(c.value for c in Criterion))
            p.add_argument("--epsilon", type=float)
            p.add_argument("--max-iters", type=int)
            p.add_argument("--anneal", action=argparse.BooleanOptionalAction, default=None,
                           help="Halve epsilon every quarter of the iterations (default on)")
            p.add_argument("--trace", help="Optimizer progress CSV")
            p.add_argument("--size", type=int)
        if command in (Command.GENERATE, Command.DESIGN, Command.SIMULATE):
            p.add_argument("--bits", type=int, help="Bits per user (simulate: pilot schemes)")
        if command in (Command.DESIGN, Command.PARTITION):
            p.add_argument("--strategy", choices=[s.value for s in PartitionStrategy])
        if command == Command.DESIGN:
            p.add_argument("--rounds", type=int)
        if command == Command.SIMULATE:
            p.add_argument("--blocks", type=int)
            p.add_argument("--scheme", choices=[s.value for s in Scheme])
            p.add_argument("--pep-trials", type=int, help="Draws per symbol for the worst pairwise error (joint-ml)")

    serve = sub.add_parser("serve", help="Run the HTTP API")
    serve.add_argument("--host", default=settings.APP_HOST)
    serve.add_argument("--port", type=int, default=settings.APP_PORT)
    return parser


# ─── Spec assembly ────────────────────────────────────────────────────────────
def _read_config(path: str) -> dict:
    file = Path(path)
    if not file.is_file():
        raise NotFoundException(f"Config file '{path}'")
    try:
        doc = json.loads(file.read_text())
    except json.JSONDecodeError as e:
        raise ConfigException(f"Config file '{path}' is not valid JSON: {e.msg}", field="config")
    if not isinstance(doc, dict):
        raise ConfigException(f"Config file '{path}' must hold a JSON object", field="config")
    return doc


def build_spec(args: argparse.Namespace) -> RunSpec:
    """Merges the config file with the command-line overrides and validates the result."""
    command = Command(args.command)
    doc = _read_config(args.config) if args.config else {}
    if doc.setdefault("command", command.value) != command.value:
        raise UsageException(f"Config is a '{doc['command']}' run, not '{command.value}'", field="command")

    system = doc.setdefault("sys", {})
    for name in ("T", "N", "M1", "M2"):
        if getattr(args, name) is not None:
            system[name] = getattr(args, name)
    io = doc.setdefault("io", {})
    if args.out:
        io["output"] = args.out
    if args.input:
        io["input"] = args.input
    if args.tol is not None:
        doc["tol"] = args.tol

    match command:
        case Command.GENERATE | Command.DESIGN:
            opt = doc.setdefault("opt", {})
            if args.criterion is not None:
                if args.criterion not in {c.value for c in Criterion}:
                    raise UsageException(f"Unknown criterion '{args.criterion}'", field="criterion")
                opt["criterion"] = args.criterion
            if args.snr_db:
                if len(args.snr_db) != 1:
                    raise UsageException(f"{command.value} takes a single design SNR", field="snr_db")
                opt["design_snr"] = db_to_linear(args.snr_db[0])
                system["P1"] = system["P2"] = opt["design_snr"]
            for flag, key in (("epsilon", "epsilon"), ("max_iters", "max_iters"), ("anneal", "anneal"), ("seed", "seed")):
                if getattr(args, flag) is not None:
                    opt[key] = getattr(args, flag)
            if args.trace:
                io["trace"] = args.trace
            for key in ("size", "bits"):
                if getattr(args, key) is not None:
                    doc[key] = getattr(args, key)
            if command == Command.DESIGN:
                if args.rounds is not None:
                    doc["rounds"] = args.rounds
                if args.strategy is not None:
                    doc["strategy"] = args.strategy
                if args.seed is not None:
                    doc["seed"] = args.seed
        case Command.PARTITION:
            if args.strategy is not None:
                doc["strategy"] = args.strategy
            if args.seed is not None:
                doc["seed"] = args.seed
        case Command.EVALUATE:
            if args.snr_db:
                doc["snr_grid_db"] = args.snr_db
        case Command.SIMULATE:
            sim = doc.setdefault("sim", {})
            if args.snr_db:
                sim["snr_grid_db"] = args.snr_db
            for flag, key in (("blocks", "num_blocks"), ("seed", "seed"), ("scheme", "scheme"), ("bits", "bits"),
                              ("pep_trials", "pep_trials")):
                if getattr(args, flag) is not None:
                    sim[key] = getattr(args, flag)

    try:
        return RunSpec.model_validate(doc)
    except ValidationError as e:
        raise ConfigException(f"Invalid {command.value} spec", details=validation_details(e.errors()))


# ─── Entry point ──────────────────────────────────────────────────────────────
def _open_registry():
    from app.database import SessionLocal, ensure_schema
    try:
        ensure_schema()
        return SessionLocal()
    except SQLAlchemyError as e:
        logger.warning(f"Run registry unavailable, run will not be recorded: {e}")
        return None


def _fail(exc: AppException) -> int:
    print(json.dumps(exc.envelope()), file=sys.stderr)
    return exc.exit_code


def run(args: argparse.Namespace) -> int:
    from app.services.run_service import run_service

    spec = build_spec(args)
    db = None if args.no_record or not settings.RECORD_RUNS else _open_registry()
    try:
        outcome = run_service.execute(spec, db)
    finally:
        if db is not None:
            db.close()
    print(json.dumps({"command": outcome.command.value, "output": outcome.output_path, "summary": outcome.summary},
                     default=float))
    return ExitCode.SUCCESS


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except AppException as e:
        return _fail(e)

    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if args.command == "serve":
        import uvicorn
        uvicorn.run("app.main:app", host=args.host, port=args.port)
        return ExitCode.SUCCESS

    try:
        return run(args)
    except AppException as e:
        return _fail(e)
    except np.linalg.LinAlgError as e:
        return _fail(LinearAlgebraException(str(e)))


if __name__ == "__main__":
    sys.exit(main())
