"""Command-line interface.

Subcommands:
    run <config>        run one scenario; write traces and the gate report
    sweep <config> --key K --values v1,v2,...   repeat the run over values
    modes <config>      print crystal equilibrium positions and normal modes
    tables [--out DIR]  regenerate the bundled reference tables (skips the
                        long-pulse degradation configs; run those directly)

Exit codes: 0 success, 1 configuration error, 2 physics/integration error.
The TRAPSIM_OUT environment variable overrides the configured output
directory; --out overrides both.
"""

import argparse
import sys

from .errors import EXIT_OK, TrapsimError
from .scenarios import (
    describe_modes,
    parse_config,
    resolve_config_path,
    run_bundled_tables,
    run_scenario,
    sweep_scenario,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapsim",
        description=(
            "Trapped-ion crystal normal modes, phonon-mediated exchange "
            "couplings, and multi-qubit controlled-flip gate simulation."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="run one scenario config")
    run_cmd.add_argument("config", help="path to a key = value scenario file")
    run_cmd.add_argument("--out", help="output directory override")
    run_cmd.add_argument(
        "--plot", action="store_true", help="emit per-pattern SVG plots"
    )

    sweep_cmd = commands.add_parser(
        "sweep", help="run a scenario repeatedly over values of one key"
    )
    sweep_cmd.add_argument("config", help="path to a key = value scenario file")
    sweep_cmd.add_argument("--key", required=True, help="numeric config key to vary")
    sweep_cmd.add_argument(
        "--values", required=True, help="comma-separated values for the key"
    )
    sweep_cmd.add_argument("--out", help="output directory override")

    modes_cmd = commands.add_parser(
        "modes", help="print equilibrium positions and normal modes"
    )
    modes_cmd.add_argument("config", help="path to a scenario file (crystal keys)")

    tables_cmd = commands.add_parser(
        "tables",
        help=(
            "regenerate all bundled reference tables (long-pulse studies "
            "excluded; run those individually)"
        ),
    )
    tables_cmd.add_argument("--out", help="output directory override")
    tables_cmd.add_argument(
        "--plot", action="store_true", help="emit per-pattern SVG plots"
    )
    return parser


def main(argv=None) -> int:
    arguments = _build_parser().parse_args(argv)
    try:
        if arguments.command == "run":
            config = parse_config(resolve_config_path(arguments.config))
            report = run_scenario(config, out_dir=arguments.out, plot=arguments.plot)
            for pattern, p_flip in zip(report.patterns, report.p_flip):
                print(f"{pattern}  p_flip = {p_flip:.6f}")
            print(
                f"selected {report.patterns[report.selected_index]}: "
                f"infidelity {report.on_branch_infidelity:.3e}, "
                f"worst false flip {report.worst_false_flip:.3e}"
            )
        elif arguments.command == "sweep":
            config = parse_config(resolve_config_path(arguments.config))
            values = [v for v in arguments.values.split(",") if v.strip()]
            summary = sweep_scenario(
                config, arguments.key, values, out_dir=arguments.out
            )
            print(f"sweep summary written to {summary}")
        elif arguments.command == "modes":
            config = parse_config(resolve_config_path(arguments.config))
            print(describe_modes(config))
        elif arguments.command == "tables":
            for name, report in run_bundled_tables(
                out_dir=arguments.out, plot=arguments.plot
            ):
                print(
                    f"{name}: selected "
                    f"{report.patterns[report.selected_index]} "
                    f"p_flip = {max(report.p_flip):.5f}, "
                    f"worst false flip = {report.worst_false_flip:.5f}"
                )
    except TrapsimError as error:
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
