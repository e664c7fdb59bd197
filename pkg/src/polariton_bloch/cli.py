"""Command-line entry point.

Exit codes: 0 all checks passed, 2 configuration error, 3 a numerical check
or engine run failed (failure list printed as JSON on stdout), 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import SCENARIOS, ConfigError, parse_assignment, parse_config
from .errors import DomainError, StepSizeError
from .output import OutputError, to_json
from .scenarios import ScenarioError, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_IO = 0, 2, 3, 4
ENV_OUT = "POLARITON_BLOCH_OUT"
DEFAULT_OUT = "polariton_out"

log = logging.getLogger("polariton_bloch")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polariton-bloch", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="INI scenario file (defaults to the Rb-87 parameter set)")
    p.add_argument("--scenario", choices=SCENARIOS, help="overrides [simulation] scenario")
    p.add_argument("--out-dir", type=Path, help=f"output directory (else [output] directory, ${ENV_OUT}, ./{DEFAULT_OUT})")
    p.add_argument("--format", choices=("csv", "json", "both"), help="overrides [output] format")
    p.add_argument("--seed", type=int, default=None, help="reserved; every scenario is deterministic")
    p.add_argument("--sweep", metavar="KEY=START:STOP:STEPS",
                   help="run the scenario at STEPS evenly spaced values of section.key")
    p.add_argument("--workers", type=int, default=None, help="processes for --sweep")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def output_directory(args, cfg) -> Path:
    if args.out_dir is not None:
        return args.out_dir
    if cfg["output.directory"] is not None:
        return Path(cfg["output.directory"])
    return Path(os.environ.get(ENV_OUT) or DEFAULT_OUT)


def parse_sweep(text: str):
    """``section.key=start:stop:steps`` -> (key, values)."""
    key, sep, rng = text.partition("=")
    parts = rng.split(":")
    if not sep or len(parts) != 3:
        raise ConfigError(f"expected KEY=START:STOP:STEPS, got {text!r}", key="--sweep")
    try:
        steps = int(parts[2])
    except ValueError:
        raise ConfigError(f"STEPS must be an integer, got {parts[2]!r}", key="--sweep") from None
    if steps < 1:
        raise ConfigError("STEPS must be >= 1", key="--sweep")
    _, start = parse_assignment(f"{key}={parts[0]}")
    _, stop = parse_assignment(f"{key}={parts[1]}")
    if isinstance(start, bool) or not isinstance(start, (int, float)):
        raise ConfigError("only numeric keys can be swept", key=key.strip())
    values = np.linspace(start, stop, steps)
    if isinstance(start, int):
        values = np.round(values).astype(int)
    return key.strip(), [v.item() for v in values]


def _run_one(cfg, directory, fmt):
    """Run one configuration; returns (exit code, report dict). Never raises."""
    try:
        summary, _ = run_scenario(cfg, directory, fmt)
    except ScenarioError as exc:
        code = EXIT_CONFIG if isinstance(exc.cause, (DomainError, StepSizeError, ConfigError)) else EXIT_CHECK
        return code, {"directory": str(directory), "error": str(exc)}
    except OutputError as exc:
        return EXIT_IO, {"directory": str(directory), "error": str(exc), "path": str(exc.path)}
    report = {"directory": str(directory), "passed": summary.passed, "failures": summary.failures}
    return (EXIT_OK if summary.passed else EXIT_CHECK), report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text, scenario=args.scenario)
        sweep = parse_sweep(args.sweep) if args.sweep else None
        points = [cfg] if sweep is None else [cfg.with_values({sweep[0]: v}) for v in sweep[1]]
    except ConfigError as exc:
        where = f"{args.config}: " if args.config else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = args.format or cfg["output.format"]
    root = output_directory(args, cfg)

    if sweep is None:
        code, report = _run_one(cfg, root, fmt)
        reports = [report]
    else:
        key = sweep[0].replace(".", "_")
        dirs = [root / f"{key}_{i:03d}" for i in range(len(points))]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_run_one, points, dirs, [fmt] * len(points)))
        for (c, r), v in zip(outcomes, sweep[1]):
            r["value"] = v
        code = max(c for c, _ in outcomes)
        reports = [r for _, r in outcomes]
    if code == EXIT_OK:
        for r in reports:
            print(f"ok: {cfg.scenario} -> {r['directory']}")
    else:
        print(to_json({"exit_code": code, "runs": reports}))
    return code


if __name__ == "__main__":
    sys.exit(main())
