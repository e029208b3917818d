"""
Initial-data presets.
"""
import logging

import numpy as np

from .config import RunConfig
from .exceptions import GammaMismatch
from .field_core import Field, Grid
from .model import InitialData, ReactionModel, barenblatt
from .snapshot import read_snapshot

logger = logging.getLogger(__name__)

GAUSSIAN_AMPLITUDE = 0.5
SEGREGATED_AMPLITUDE = 0.8


def _center_offsets(grid: Grid, offset: float):
    """Squared distances to the points (-offset, 0, ...) and (+offset, 0, ...)."""
    coordinates = grid.coordinates()
    rest = sum(x ** 2 for x in coordinates[1:]) if grid.dim > 1 else 0.0
    return (coordinates[0] + offset) ** 2 + rest, (coordinates[0] - offset) ** 2 + rest


def barenblatt_data(grid: Grid, model: ReactionModel, t0: float, mass: float) -> InitialData:
    """Single species in n1 following the source solution at t0."""
    n1 = barenblatt(grid, model.gamma, t0, mass)
    return InitialData(n1, Field.constant(grid, 0.0), t0)


def gaussian_bumps(grid: Grid, amplitude: float, width: float, offset: float, t0: float = 0.0) -> InitialData:
    """Two overlapping Gaussians, species 1 on the left and species 2 on the right."""
    left, right = _center_offsets(grid, offset)
    n1 = amplitude * np.exp(-left / (2.0 * width ** 2))
    n2 = amplitude * np.exp(-right / (2.0 * width ** 2))
    return InitialData(Field(grid, n1), Field(grid, n2), t0)


def two_bumps_segregated(grid: Grid, amplitude: float, width: float, offset: float,
                         t0: float = 0.0) -> InitialData:
    """Compactly supported bumps a (1 - r^2/w^2)_+^2; disjoint supports when offset >= width."""
    left, right = _center_offsets(grid, offset)
    n1 = amplitude * np.maximum(1.0 - left / width ** 2, 0.0) ** 2
    n2 = amplitude * np.maximum(1.0 - right / width ** 2, 0.0) ** 2
    return InitialData(Field(grid, n1), Field(grid, n2), t0)


def homeostatic_plateau(grid: Grid, model: ReactionModel, fraction: float, t0: float = 0.0) -> InitialData:
    """Constant density at p = P_H split between the species by fraction."""
    n_star = model.homeostatic_density
    return InitialData(Field.constant(grid, fraction * n_star),
                       Field.constant(grid, (1.0 - fraction) * n_star), t0)


def build_initial_data(config: RunConfig, grid: Grid, model: ReactionModel) -> InitialData:
    """
    Initial data for a run, from a snapshot if one is configured, otherwise from the preset.

    Raises:
        DimensionMismatch: if the snapshot dimension differs from the configured grid
        GammaMismatch: if the snapshot was written with another pressure exponent
    """
    initial = config.initial
    t0 = config.start_time
    if initial.snapshot:
        state = read_snapshot(initial.snapshot, grid)
        if state.gamma != model.gamma:
            raise GammaMismatch(
                f"snapshot {initial.snapshot} has gamma = {state.gamma:g} but the model uses {model.gamma:g}"
            )
        logger.info("initial data read from snapshot %s (t=%.6g)", initial.snapshot, state.t)
        start = state.t if initial.t0 is None else initial.t0
        return InitialData(state.n1, state.n2, start)

    n_star = model.homeostatic_density
    logger.info("initial data from preset %s at t0=%.6g", initial.preset, t0)
    if initial.preset == 'barenblatt':
        return barenblatt_data(grid, model, t0, initial.mass)
    if initial.preset == 'gaussian_bumps':
        amplitude = initial.amplitude if initial.amplitude is not None else GAUSSIAN_AMPLITUDE * n_star
        return gaussian_bumps(grid, amplitude, initial.width, initial.offset, t0)
    if initial.preset == 'two_bumps_segregated':
        amplitude = initial.amplitude if initial.amplitude is not None else SEGREGATED_AMPLITUDE * n_star
        return two_bumps_segregated(grid, amplitude, initial.width, initial.offset, t0)
    return homeostatic_plateau(grid, model, initial.fraction, t0)
