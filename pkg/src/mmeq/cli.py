"""Command-line entry point: ``mmeq <command> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import __version__
from .errors import ConfigurationError, NumericalFailure
from .runner import (
    _PRESET_DESCRIPTIONS,
    ENSEMBLE,
    MASTER,
    OUTPUT_ROOT_ENV,
    PRESET_NAMES,
    SWEEP,
    TRAJECTORY,
    RunConfig,
    apply_preset,
    load_config_file,
    parse_grid,
    run,
)

COMMAND_MODES = {"master": MASTER, "traj": TRAJECTORY, "ensemble": ENSEMBLE, "sweep": SWEEP}

# CLI flag -> RunConfig field
_FLAG_FIELDS = {
    "p": "p",
    "rate": "rate",
    "initial": "initial",
    "omega_t_final": "t_final",
    "dt": "dt",
    "scheme": "scheme",
    "n": "n",
    "seed": "seed",
    "sample_interval": "sample_interval",
    "band": "band",
    "out": "out",
    "workers": "workers",
    "grid": "grid",
}
_PRESET_OWNED = {"p", "rate", "initial", "t_final", "sample_interval", "seed"}


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI run file with [run], [atom], [trajectory], [sweep] sections")
    parser.add_argument("--preset", choices=PRESET_NAMES,
                        help="figure regime; overrides p, rate, initial state, duration and sampling")
    parser.add_argument("--p", type=float, help="measurement error probability, 0 <= p <= 0.5")
    parser.add_argument("--rate", type=float, help="measurement rate R in units of Omega")
    parser.add_argument("--initial", help="initial state: 1, 2 or a Bloch triple u,v,w (default 2)")
    parser.add_argument("--omega-t-final", type=float, help="run duration in units of 1/Omega")
    parser.add_argument("--dt", type=float,
                        help="integrator step (master) or bin width (binned trajectories)")
    parser.add_argument("--scheme", choices=("event-driven", "binned"), help="trajectory scheme")
    parser.add_argument("--n", type=int, help="ensemble size")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--sample-interval", type=float, help="output sampling period")
    parser.add_argument("--band", type=float, help="eigenstate band width for jump detection (default 0.1)")
    parser.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<preset or mode>)")
    parser.add_argument("--workers", type=int, help="worker processes for ensembles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmeq",
        description="Measurement master equation and quantum trajectories of a monitored two-level atom.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "master": "integrate the master equation (RK4) and compare with the closed form",
        "traj": "simulate one quantum trajectory",
        "ensemble": "simulate n trajectories and average them",
        "sweep": "master-equation and trajectory runs over a grid of (R, p)",
        "run": "run whatever mode the preset or config file selects",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _add_run_options(p)
        if name in ("sweep", "run"):
            p.add_argument("--grid", type=parse_grid, help="sweep points as 'R:p,R:p,...'")
    sub.add_parser("preset-list", help="list the figure presets")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < flags; a preset then fixes the atom/trajectory fields."""
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for flag, fname in _FLAG_FIELDS.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[fname] = val
    preset_name = args.preset or values.pop("preset", None)
    values.pop("preset", None)
    mode = COMMAND_MODES.get(args.command)
    file_mode = values.pop("mode", None)
    cfg = RunConfig(**values)
    if preset_name:
        for fname in sorted(_PRESET_OWNED & set(values)):
            logging.getLogger(__name__).warning("preset %s overrides %s", preset_name, fname)
        cfg = apply_preset(cfg, preset_name, keep_mode=False)
    if mode is not None:
        cfg = dataclasses.replace(cfg, mode=mode)
    elif file_mode is not None:
        cfg = dataclasses.replace(cfg, mode=file_mode)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "preset-list":
        for name in PRESET_NAMES:
            print(f"{name}\t{_PRESET_DESCRIPTIONS[name]}")
        return 0
    try:
        cfg = config_from_args(args)
        summary = run(cfg)
    except (ConfigurationError, ValueError) as exc:
        print(f"mmeq: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"mmeq: numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mmeq: I/O error: {exc}", file=sys.stderr)
        return 1
    brief = {k: summary[k] for k in ("mode", "preset", "gamma_recomputed", "caption_gamma") if k in summary}
    print(json.dumps(brief, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
