"""Command-line scenario runner with reproducible, machine-readable outputs.

Exit codes: 0 success, 1 usage or configuration error, 2 protocol-level
abort. All randomness derives from the mandatory --seed, so identical
invocations produce byte-identical outputs regardless of --threads; wall-clock
metadata goes only to the optional --meta sidecar.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adversary import AttackStrategy, run_attack
from .analysis import rate_window, sweep_csv, sweep_m
from .protocol import ProtocolConfig, run_protocol

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORT = 2


@dataclass(frozen=True)
class Scenario:
    """One CLI work item: a named config plus optional attack selection."""

    name: str
    config: ProtocolConfig
    strategy: AttackStrategy | None = None
    trials: int = 1
    output: Path | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("scenario name must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def _round_sig(value, digits: int = 9):
    """Round every float in a JSON-ready structure to `digits` significant digits."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: _round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, list):
        return [_round_sig(v, digits) for v in value]
    return value


def _render_json(doc: dict) -> str:
    return json.dumps(_round_sig(doc), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_meta(path: Path | None, argv: list[str]):
    if path is None:
        return
    meta = {"argv": argv, "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    _write(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _load_config(path: str) -> ProtocolConfig:
    text = Path(path).read_text()
    return ProtocolConfig.from_json_dict(json.loads(text))


def cmd_run(args, argv) -> int:
    try:
        config = _load_config(args.config)
        scenario = Scenario(name=Path(args.config).stem, config=config,
                            output=Path(args.output))
        outcome = run_protocol(scenario.config, np.random.default_rng(args.seed))
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write(scenario.output, _render_json(outcome.to_json_dict()))
    _write_meta(args.meta and Path(args.meta), argv)
    return EXIT_OK if outcome.verified else EXIT_ABORT


def cmd_attack(args, argv) -> int:
    try:
        strategy = AttackStrategy.parse(args.strategy)
        config = _load_config(args.config)
        scenario = Scenario(name=args.strategy, config=config, strategy=strategy,
                            trials=args.trials, output=Path(args.output))
        report = run_attack(strategy, config, np.random.default_rng(args.seed),
                            trials=scenario.trials, threads=args.threads)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write(scenario.output, _render_json(report.to_json_dict()))
    _write_meta(args.meta and Path(args.meta), argv)
    return EXIT_OK


def cmd_sweep(args, argv) -> int:
    try:
        m_values = [int(v) for v in args.m.split(",") if v.strip()]
        if not m_values:
            raise ValueError("empty basis-count list")
        rows = sweep_m(m_values, include_keyless=not args.no_keyless)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write(Path(args.output), sweep_csv(rows))
    _write_meta(args.meta and Path(args.meta), argv)
    return EXIT_OK


def cmd_rate_window(args, argv) -> int:
    try:
        window = rate_window(args.p_c)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(_render_json({
        "p_c": args.p_c,
        "lower": window.lower,
        "upper": window.upper,
        "nonempty": window.nonempty,
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keyedqkd",
        description="Keyed-basis qubit key-generation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the full protocol from a config file")
    run_p.add_argument("--config", required=True, help="protocol config JSON")
    run_p.add_argument("--seed", type=int, required=True, help="master RNG seed")
    run_p.add_argument("--output", required=True, help="outcome JSON path")
    run_p.add_argument("--meta", help="optional sidecar for wall-clock metadata")
    run_p.set_defaults(fn=cmd_run)

    atk_p = sub.add_parser("attack", help="evaluate an eavesdropping strategy")
    atk_p.add_argument("strategy",
                       help="intercept[:f] | fixed:<phi> | breidbart | keyguess | blockguess:<k>")
    atk_p.add_argument("--config", required=True, help="protocol config JSON")
    atk_p.add_argument("--trials", type=int, default=1, help="Monte Carlo repetitions")
    atk_p.add_argument("--seed", type=int, required=True, help="master RNG seed")
    atk_p.add_argument("--output", required=True, help="report JSON path")
    atk_p.add_argument("--threads", type=int, default=1,
                       help="worker threads for trial chunks (does not affect results)")
    atk_p.add_argument("--meta", help="optional sidecar for wall-clock metadata")
    atk_p.set_defaults(fn=cmd_attack)

    sweep_p = sub.add_parser("sweep", help="eavesdropper error rates vs basis count")
    sweep_p.add_argument("--m", required=True, help="comma-separated basis counts, powers of two")
    sweep_p.add_argument("--output", required=True, help="CSV path")
    sweep_p.add_argument("--no-keyless", action="store_true",
                         help="skip the keyless-error column")
    sweep_p.add_argument("--meta", help="optional sidecar for wall-clock metadata")
    sweep_p.set_defaults(fn=cmd_sweep)

    win_p = sub.add_parser("rate-window", help="print the feasible code-rate window")
    win_p.add_argument("p_c", type=float, help="estimated channel error rate")
    win_p.set_defaults(fn=cmd_rate_window)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return args.fn(args, argv)


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
