"""
Main script for the tissue growth solver - runs, convergence studies and model validation
"""
import argparse
import logging
import math
import os
from enum import IntEnum
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from dotenv import load_dotenv

from .config import RunConfig, load_config
from .convergence import ConvergenceAxis, ConvergenceStudy, ConvergenceTable
from .diagnostics import CSV_COLUMNS, DiagnosticsSeries, audit
from .exceptions import (AssumptionsViolated, ConfigError, ConfigValidationError, Diverged,
                         FloorBreaksHomeostatic, GridError, LocalizerExceedsBox, ModelError,
                         SnapshotError)
from .field_core import Grid
from .model import (AssumptionReport, barenblatt, barenblatt_constants, barenblatt_support_radius,
                    validate_assumptions)
from .presets import build_initial_data
from .scheme import run as run_scheme
from .snapshot import write_snapshot

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'TISSUE_GROWTH_OUTPUT_DIR'
DEFAULT_OUTPUT_DIR = 'output'


class ExitCode(IntEnum):
    OK = 0
    CONFIG = 2
    AUDIT_FAILED = 3
    DIVERGED = 4
    IO = 5
    ASSUMPTIONS = 6


class TissueGrowth:
    def __init__(self, output_dir: Optional[str] = None, emit_plots: bool = False):
        """Initialize the solver front end; an explicit output_dir wins over config and environment."""
        # Load environment variables
        load_dotenv()
        self.output_dir = output_dir
        self.emit_plots = emit_plots

    def resolve_output_dir(self, config: RunConfig) -> Path:
        return Path(self.output_dir or config.output.directory
                    or os.getenv(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)

    def run(self, config: RunConfig) -> Dict:
        """
        Run one scenario, write its diagnostics, snapshots and audit report.

        Args:
            config (RunConfig): Validated configuration

        Returns:
            dict: final state, diagnostics series, audit report and written files
        """
        output_dir = self.resolve_output_dir(config)
        grid = config.grid.build()
        model = config.model.build()
        params = config.scheme.build()

        print(f"\n🧫 Running preset: {config.initial.snapshot or config.initial.preset}")
        data = build_initial_data(config, grid, model)
        checkpoints = self._snapshot_times(config, data.t0)

        print("⏱️ Integrating...")
        state, series = run_scheme(
            data, params, model,
            allow_invalid=config.scheme.allow_invalid_model,
            checkpoints=checkpoints,
            localizer_radius=config.grid.localizer_radius,
            moment_radius=config.grid.moment_radius,
        )

        print("🔎 Auditing estimates...")
        report = audit(series, model, params)

        files = {'diagnostics': self._save_diagnostics(series, output_dir / 'diagnostics.csv')}
        audit_path = output_dir / 'audit.txt'
        audit_path.write_text(report.to_text(), encoding='utf-8')
        files['audit'] = audit_path
        for index, t in enumerate(sorted(t for t in series.checkpoints if t in checkpoints)):
            write_snapshot(series.checkpoints[t], output_dir / 'snapshots' / f"snapshot_{index:04d}.tgs")
        files['final_snapshot'] = write_snapshot(state, output_dir / 'final.tgs')
        if self.emit_plots or config.output.emit_plots:
            from .plotting import plot_diagnostics
            files['plot'] = plot_diagnostics(series, output_dir / 'diagnostics.svg')
        print(f"💾 Results saved to: {output_dir}")

        return {
            'state': state,
            'series': series,
            'audit': report,
            'files': files,
        }

    def converge(self, config: RunConfig, axis: ConvergenceAxis, levels: int) -> ConvergenceTable:
        """Run a convergence study and write its table (and plot when enabled)."""
        output_dir = self.resolve_output_dir(config)
        print(f"\n📐 Convergence study along {axis.value} with {levels} levels")
        study = ConvergenceStudy(config, snapshot_dir=output_dir / 'convergence')
        table = study.run(axis, levels)
        table.to_csv(output_dir / f"convergence_{axis.value}.csv")
        if self.emit_plots or config.output.emit_plots:
            from .plotting import plot_convergence
            plot_convergence(table, output_dir / f"convergence_{axis.value}.svg")
        print(f"💾 Results saved to: {output_dir}")
        return table

    def validate(self, config: RunConfig) -> AssumptionReport:
        return validate_assumptions(config.model.build(), config.grid.dim)

    def barenblatt_stats(self, gamma: float, dim: int, t: float, mass: float = 1.0,
                         cells_per_axis: int = 256) -> Dict:
        """Closed-form profile statistics plus the discrete mass on a box twice the support."""
        radius = barenblatt_support_radius(gamma, dim, t, mass)
        grid = Grid(dim, max(math.ceil(2.0 * radius), 2), cells_per_axis)
        profile = barenblatt(grid, gamma, t, mass)
        alpha, _, _, C = barenblatt_constants(gamma, dim, mass)
        center = (gamma / (gamma + 1.0) * t) ** (-alpha) * C ** (1.0 / gamma)
        return {
            'gamma': gamma,
            'dim': dim,
            't': t,
            'mass': mass,
            'support_radius': radius,
            'peak_density': center,
            'peak_pressure': center ** gamma,
            'discrete_mass': profile.integral(),
            'L_box': grid.half_width,
            'cells_per_axis': cells_per_axis,
        }

    def _snapshot_times(self, config: RunConfig, t0: float) -> list:
        t_end = config.scheme.t_end
        times = set()
        every = config.output.snapshot_every
        if every > 0:
            times.update(float(t) for t in np.arange(t0 + every, t_end, every))
        if config.output.checkpoints > 0:
            times.update(float(t) for t in np.linspace(t0, t_end, config.output.checkpoints))
        return sorted(times)

    def _save_diagnostics(self, series: DiagnosticsSeries, path: Path) -> Path:
        """Write the diagnostics CSV with 17 significant digits."""
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [','.join(CSV_COLUMNS)]
        for record in series:
            lines.append(','.join(f"{value:.17g}" for value in record.csv_values()))
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return path

    def _format_run_summary(self, results: Dict) -> str:
        """Format a run's results for console output."""
        series = results['series']
        report = results['audit']
        final = series.final()
        first = series.records[0]

        summary = [
            "\n📊 Run Summary",
            "=" * 50,

            "\n📈 Final State:",
            f"• Time: {final.t:.6g} ({len(series)} records)",
            f"• Mass: {final.mass:.6g} (initial {first.mass:.6g}, bound {final.mass_bound:.6g})",
            f"• Species Masses: {final.mass_1:.6g} / {final.mass_2:.6g}",
            f"• Max Pressure: {final.p_max:.6g}",
            f"• Energy: {final.energy:.6g}",
            f"• Clamped Mass: {final.clamp_total:.3e}",

            "\n🔎 Estimate Audit:",
        ]
        for name, entry in report.entries.items():
            summary.append(f"{'✅' if entry.passed else '❌'} {name}: {entry.explanation}")
        summary.append(f"\n{'✅ All audits passed' if report.passed else '❌ Audit failed: ' + ', '.join(report.failures())}")
        return "\n".join(summary)

    def _format_convergence_summary(self, table: ConvergenceTable) -> str:
        summary = [
            f"\n📐 Convergence ({table.axis.value})",
            "=" * 50,
        ]
        for row in table.rows:
            order = 'n/a' if row.order is None else f"{row.order:.3f}"
            summary.append(f"• {table.axis.value} = {row.parameter:.4g}: L1(n) = {row.l1_error_n:.4e}, "
                           f"L2(grad p) = {row.l2_error_grad_p:.4e}, order = {order}")
        return "\n".join(summary)

    def _format_assumption_summary(self, report: AssumptionReport) -> str:
        summary = [
            "\n🧪 Assumption Report",
            "=" * 50,
            f"• Sign above P_H: {'✅' if report.passes_3 else '❌'}",
            f"• Gamma restriction: {'✅' if report.passes_7_gamma else '❌'}",
            f"• Low-pressure cancellation: {'✅' if report.passes_7_cancellation else '❌'}",
            f"• Estimated C_H: {report.estimated_C_H:.6g}",
            f"• ||R||_inf: {report.R_inf_norm:.6g}",
        ]
        for explanation in report.explanations.values():
            summary.append(f"  {explanation}")
        return "\n".join(summary)

    def _format_barenblatt_summary(self, stats: Dict) -> str:
        return "\n".join([
            f"\n🌊 Barenblatt profile (gamma = {stats['gamma']:g}, dim = {stats['dim']}, t = {stats['t']:g})",
            "=" * 50,
            f"• Mass: {stats['mass']:.6g}",
            f"• Support Radius: {stats['support_radius']:.6g}",
            f"• Peak Density: {stats['peak_density']:.6g}",
            f"• Peak Pressure: {stats['peak_pressure']:.6g}",
            f"• Discrete Mass: {stats['discrete_mass']:.6g} "
            f"({stats['cells_per_axis']} cells on [-{stats['L_box']:g}, {stats['L_box']:g}])",
        ])


def cmd_run(config: RunConfig, output_dir: Optional[str] = None, emit_plots: bool = False,
            show_summary: bool = True) -> int:
    """Run one scenario; exit code OK iff every audit passes."""
    solver = TissueGrowth(output_dir, emit_plots)
    results = solver.run(config)
    if show_summary:
        print(solver._format_run_summary(results))
    return ExitCode.OK if results['audit'].passed else ExitCode.AUDIT_FAILED


def cmd_converge(config: RunConfig, axis: Union[str, ConvergenceAxis], levels: int,
                 output_dir: Optional[str] = None, emit_plots: bool = False) -> ConvergenceTable:
    solver = TissueGrowth(output_dir, emit_plots)
    table = solver.converge(config, ConvergenceAxis(axis), levels)
    print(solver._format_convergence_summary(table))
    return table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Tissue growth solver - two-species porous-medium runs with a priori estimate audits",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument('--output-dir', help="Directory for CSV, snapshots and reports", default=None)
    parser.add_argument('--seed', type=int, default=None, help="Reserved; runs are deterministic")
    parser.add_argument('--emit-plots', action='store_true', help="Write SVG plots")
    parser.add_argument('--verbose', action='store_true', help="Debug logging")

    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help="Run one scenario and audit it")
    run_parser.add_argument('config', help="Configuration file")
    run_parser.add_argument('--allow-invalid-model', action='store_true',
                            help="Run reaction models that fail the assumption checks")
    run_parser.add_argument('--no-summary', action='store_true',
                            help="Don't display the summary in console")

    converge_parser = subparsers.add_parser('converge', help="Convergence study")
    converge_parser.add_argument('config', help="Configuration file")
    converge_parser.add_argument('--axis', choices=[axis.value for axis in ConvergenceAxis], required=True)
    converge_parser.add_argument('--levels', type=int, default=3)

    validate_parser = subparsers.add_parser('validate', help="Assumption report only")
    validate_parser.add_argument('config', help="Configuration file")

    barenblatt_parser = subparsers.add_parser('barenblatt', help="Barenblatt profile statistics")
    barenblatt_parser.add_argument('--gamma', type=float, required=True)
    barenblatt_parser.add_argument('--dim', type=int, choices=(1, 2), required=True)
    barenblatt_parser.add_argument('--t', type=float, required=True)
    barenblatt_parser.add_argument('--mass', type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    """Main entry point for the script."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    if args.seed is not None:
        logger.info("--seed %d accepted; this version uses no randomness", args.seed)

    try:
        if args.command == 'barenblatt':
            solver = TissueGrowth(args.output_dir, args.emit_plots)
            print(solver._format_barenblatt_summary(solver.barenblatt_stats(args.gamma, args.dim, args.t, args.mass)))
            return ExitCode.OK

        config = load_config(args.config)
        if args.command == 'run':
            if args.allow_invalid_model:
                config.scheme.allow_invalid_model = True
            return cmd_run(config, args.output_dir, args.emit_plots, not args.no_summary)
        if args.command == 'converge':
            cmd_converge(config, args.axis, args.levels, args.output_dir, args.emit_plots)
            return ExitCode.OK

        solver = TissueGrowth(args.output_dir, args.emit_plots)
        report = solver.validate(config)
        print(solver._format_assumption_summary(report))
        return ExitCode.OK if report.all_pass else ExitCode.ASSUMPTIONS

    except (ConfigError, ConfigValidationError, LocalizerExceedsBox, FloorBreaksHomeostatic,
            ModelError, GridError, ValueError) as e:
        print(f"\n❌ Configuration error: {str(e)}")
        return ExitCode.CONFIG
    except AssumptionsViolated as e:
        print(f"\n❌ Assumptions violated: {str(e)}")
        return ExitCode.ASSUMPTIONS
    except Diverged as e:
        print(f"\n❌ Diverged: {str(e)}")
        return ExitCode.DIVERGED
    except (SnapshotError, OSError) as e:
        print(f"\n❌ I/O error: {str(e)}")
        return ExitCode.IO


if __name__ == '__main__':
    exit(main())
