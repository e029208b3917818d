"""
Convergence studies along the grid, epsilon and delta axes.

The grid axis with the Barenblatt preset compares every level with the exact profile. The other
studies use the Cauchy criterion: each level is compared with the finest one.
"""
import copy
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import RunConfig
from .exceptions import ConfigValidationError, GridError
from .field_core import Field, Grid, gradient
from .model import barenblatt, pressure
from .presets import build_initial_data
from .scheme import run as run_scheme
from .snapshot import read_snapshot, write_snapshot

logger = logging.getLogger(__name__)

CHECKPOINT_COUNT = 11
MIN_LEVELS = 3
DEFAULT_START = {'epsilon': 1e-1, 'delta': 1e-2}
REFINEMENT = {'dx': 2, 'epsilon': 10.0, 'delta': 10.0}

Checkpoints = Dict[float, Field]


class ConvergenceAxis(Enum):
    DX = 'dx'
    EPSILON = 'epsilon'
    DELTA = 'delta'


@dataclass
class ConvergenceRow:
    parameter: float
    l1_error_n: float
    l2_error_grad_p: float
    order: Optional[float] = None


@dataclass
class ConvergenceTable:
    axis: ConvergenceAxis
    rows: List[ConvergenceRow]

    CSV_COLUMNS = ('parameter', 'l1_error_n', 'l2_error_grad_p', 'order')

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(row, name) is None else getattr(row, name) for row in self.rows])

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [','.join(self.CSV_COLUMNS)]
        for row in self.rows:
            order = '' if row.order is None else f"{row.order:.17g}"
            lines.append(f"{row.parameter:.17g},{row.l1_error_n:.17g},{row.l2_error_grad_p:.17g},{order}")
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return path


def restrict(field: Field, grid: Grid) -> Field:
    """Block-average a field onto a coarser grid whose cells nest in the field's cells."""
    fine = field.grid
    if fine.dim != grid.dim or fine.half_width != grid.half_width:
        raise GridError("restriction needs grids of the same dimension and box")
    factor, remainder = divmod(fine.cells_per_axis, grid.cells_per_axis)
    if remainder or factor < 1:
        raise GridError(f"{fine.cells_per_axis} cells do not nest into {grid.cells_per_axis}")
    if factor == 1:
        return Field(grid, field.values)
    shape = []
    for _ in range(grid.dim):
        shape.extend([grid.cells_per_axis, factor])
    blocks = field.values.reshape(shape)
    return Field(grid, blocks.mean(axis=tuple(range(1, 2 * grid.dim, 2))))


def level_errors(level: Checkpoints, reference: Checkpoints, gamma: float) -> Tuple[float, float]:
    """
    L1 error of n at the final checkpoint and space-time L2 error of grad p over all checkpoints.

    The reference is restricted onto the level's grid; the time integral uses the trapezoid rule.
    """
    times = sorted(level)
    if sorted(reference) != times:
        raise ValueError("level and reference checkpoints are taken at different times")
    grid = level[times[-1]].grid

    squared = []
    for t in times:
        ref = restrict(reference[t], grid)
        difference = [a.values - b.values for a, b in zip(
            gradient(pressure(level[t], gamma)).components,
            gradient(pressure(ref, gamma)).components,
        )]
        squared.append(grid.integrate(sum(d ** 2 for d in difference)))
    squared = np.array(squared)
    if len(times) > 1:
        steps = np.diff(times)
        space_time = float(np.sum(0.5 * steps * (squared[1:] + squared[:-1])))
    else:
        space_time = float(squared[0])

    final_ref = restrict(reference[times[-1]], grid)
    l1 = grid.integrate(np.abs(level[times[-1]].values - final_ref.values))
    return l1, math.sqrt(space_time)


def observed_order(coarse: Tuple[float, float], fine: Tuple[float, float]) -> Optional[float]:
    """log(e_coarse / e_fine) / log(h_coarse / h_fine) for (parameter, error) pairs; None if undefined."""
    (h0, e0), (h1, e1) = coarse, fine
    if e0 <= 0 or e1 <= 0 or h0 <= 0 or h1 <= 0 or h0 == h1:
        return None
    order = math.log(e0 / e1) / math.log(h0 / h1)
    return order if math.isfinite(order) else None


def build_table(axis: ConvergenceAxis, parameters: Sequence[float],
                errors: Sequence[Tuple[float, float]]) -> ConvergenceTable:
    rows = []
    for index, (parameter, (l1, l2)) in enumerate(zip(parameters, errors)):
        order = None
        if index > 0:
            order = observed_order((parameters[index - 1], errors[index - 1][0]), (parameter, l1))
        rows.append(ConvergenceRow(parameter, l1, l2, order))
    return ConvergenceTable(axis, rows)


class ConvergenceStudy:
    """Runs one scenario at several refinement levels and tabulates the errors."""

    def __init__(self, config: RunConfig, snapshot_dir: Optional[Union[str, Path]] = None):
        self.config = config
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir is not None else None

    def level_values(self, axis: ConvergenceAxis, levels: int) -> List[float]:
        """Cells per axis for the grid axis, epsilon or delta values otherwise; coarsest first."""
        if levels < MIN_LEVELS:
            raise ValueError(f"a convergence study needs at least {MIN_LEVELS} levels, got {levels}")
        if axis is ConvergenceAxis.DX:
            return [self.config.grid.cells_per_axis * REFINEMENT['dx'] ** k for k in range(levels)]
        start = getattr(self.config.scheme, axis.value) or DEFAULT_START[axis.value]
        return [start / REFINEMENT[axis.value] ** k for k in range(levels)]

    def level_config(self, axis: ConvergenceAxis, value: float) -> RunConfig:
        config = copy.deepcopy(self.config)
        if axis is ConvergenceAxis.DX:
            config.grid.cells_per_axis = int(value)
        else:
            setattr(config.scheme, axis.value, value)
        return config

    def checkpoint_times(self) -> np.ndarray:
        return np.linspace(self.config.start_time, self.config.scheme.t_end, CHECKPOINT_COUNT)

    def uses_exact_solution(self, axis: ConvergenceAxis) -> bool:
        if axis is not ConvergenceAxis.DX or self.config.initial.preset != 'barenblatt' \
                or self.config.initial.snapshot:
            return False
        model = self.config.model.build()
        if model.R_inf_norm != 0 or self.config.scheme.delta != 0:
            raise ConfigValidationError(
                'BarenblattOracleNeedsNoReaction',
                "the exact Barenblatt comparison needs R = 0 (growth_rate = 0) and delta = 0",
            )
        return True

    def run_level(self, axis: ConvergenceAxis, index: int, value: float) -> Checkpoints:
        """Run one level; returns n at every checkpoint. Diverged propagates."""
        config = self.level_config(axis, value)
        grid = config.grid.build()
        model = config.model.build()
        params = config.scheme.build()
        data = build_initial_data(config, grid, model)
        logger.info("convergence level %d: %s = %g", index, axis.value, value)
        _, series = run_scheme(
            data, params, model,
            allow_invalid=config.scheme.allow_invalid_model,
            checkpoints=self.checkpoint_times(),
            localizer_radius=config.grid.localizer_radius,
            moment_radius=config.grid.moment_radius,
        )
        if self.snapshot_dir is not None:
            for j, t in enumerate(sorted(series.checkpoints)):
                write_snapshot(series.checkpoints[t], self._snapshot_path(axis, index, j))
        return {t: state.n for t, state in series.checkpoints.items()}

    def exact_checkpoints(self, grid: Grid) -> Checkpoints:
        gamma = self.config.model.gamma
        mass = self.config.initial.mass
        return {float(t): barenblatt(grid, gamma, float(t), mass) for t in self.checkpoint_times()}

    def run(self, axis: ConvergenceAxis, levels: int) -> ConvergenceTable:
        """
        Execute the study level by level.

        Args:
            axis (ConvergenceAxis): Refined parameter
            levels (int): Number of levels, at least 3

        Returns:
            ConvergenceTable: rows by decreasing parameter
        """
        values = self.level_values(axis, levels)
        exact = self.uses_exact_solution(axis)
        results = [self.run_level(axis, index, value) for index, value in enumerate(values)]
        return self._tabulate(axis, values, results, exact)

    def table_from_snapshots(self, axis: ConvergenceAxis, levels: int) -> ConvergenceTable:
        """Rebuild the table from the checkpoint snapshots a previous study wrote."""
        if self.snapshot_dir is None:
            raise ValueError("no snapshot directory configured")
        values = self.level_values(axis, levels)
        results = []
        for index, value in enumerate(values):
            grid = self.level_config(axis, value).grid.build()
            results.append({
                state.t: state.n
                for state in (read_snapshot(self._snapshot_path(axis, index, j), grid)
                              for j in range(CHECKPOINT_COUNT))
            })
        return self._tabulate(axis, values, results, self.uses_exact_solution(axis))

    def _tabulate(self, axis: ConvergenceAxis, values: List[float], results: List[Checkpoints],
                  exact: bool) -> ConvergenceTable:
        gamma = self.config.model.gamma
        if axis is ConvergenceAxis.DX:
            parameters = [2.0 * self.config.grid.L_box / cells for cells in values]
        else:
            parameters = list(values)

        if exact:
            errors = [level_errors(level, self.exact_checkpoints(level[max(level)].grid), gamma)
                      for level in results]
        else:
            reference = results[-1]
            errors = [level_errors(level, reference, gamma) for level in results[:-1]]
            parameters = parameters[:-1]
        table = build_table(axis, parameters, errors)
        for row in table.rows:
            logger.info("%s = %.6g: L1(n) = %.6e, L2(grad p) = %.6e, order = %s", axis.value,
                        row.parameter, row.l1_error_n, row.l2_error_grad_p,
                        'n/a' if row.order is None else f"{row.order:.3f}")
        return table

    def _snapshot_path(self, axis: ConvergenceAxis, index: int, checkpoint: int) -> Path:
        return self.snapshot_dir / f"{axis.value}_level{index:02d}" / f"checkpoint{checkpoint:02d}.tgs"
