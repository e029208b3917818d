"""
Explicit time integration of the regularized two-species system.

The total density follows the conservative porous-medium update, the species fraction c1
follows the upwind transport equation with an epsilon-parabolic term, and the species
densities are reconstructed as c1 * n and (1 - c1) * n.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .diagnostics import DiagnosticsMonitor, DiagnosticsSeries
from .exceptions import AssumptionsViolated, Diverged, ModelError, StepRejected
from .field_core import Field, Grid, div_density_flux, gradient, upwind_advect
from .model import (InitialData, ReactionModel, gaussian_floor, pressure, rates,
                    validate_assumptions)

logger = logging.getLogger(__name__)

TINY = 1e-300
PRESSURE_TOLERANCE = 1e-6
MIN_DT_FRACTION = 1e-14


@dataclass(frozen=True, eq=False)
class State:
    """Total density n, species-1 fraction c1 and time t; everything else is derived."""

    n: Field
    c1: Field
    t: float
    gamma: float

    def __post_init__(self):
        if self.n.grid != self.c1.grid:
            raise ModelError("density and fraction live on different grids")

    @property
    def grid(self) -> Grid:
        return self.n.grid

    @property
    def c2(self) -> Field:
        return Field(self.grid, 1.0 - self.c1.values)

    @property
    def n1(self) -> Field:
        return Field(self.grid, self.c1.values * self.n.values)

    @property
    def n2(self) -> Field:
        return Field(self.grid, (1.0 - self.c1.values) * self.n.values)

    @property
    def pressure(self) -> Field:
        return pressure(self.n, self.gamma)


@dataclass(frozen=True)
class SchemeParams:
    epsilon: float = 0.0
    delta: float = 0.0
    cfl_safety: float = 0.4
    t_end: float = 1.0
    diag_every: int = 1

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be finite and non-negative, got {self.epsilon}")
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ValueError(f"delta must be finite and non-negative, got {self.delta}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.diag_every < 1:
            raise ValueError(f"diag_every must be at least 1, got {self.diag_every}")


@dataclass
class ClampLedger:
    """Mass moved by clamping n into [0, inf) and c1 into [0, 1]."""

    total: float = 0.0
    last: float = 0.0

    def record(self, amount: float):
        self.last = amount
        self.total += amount


def cfl_dt(state: State, params: SchemeParams, model: ReactionModel) -> float:
    """Largest stable explicit step: diffusion, advection, epsilon-diffusion and reaction limits."""
    grid = state.grid
    dx = grid.dx
    p = state.pressure
    p_max = p.max()
    limits = (
        dx ** 2 / (2 * grid.dim * model.gamma * p_max + TINY),
        dx / (gradient(p).max_magnitude() + TINY),
        dx ** 2 / (2 * grid.dim * params.epsilon * p_max + TINY),
        1.0 / (model.R_inf_norm + TINY),
    )
    dt = params.cfl_safety * min(limits)
    remaining = params.t_end - state.t
    if remaining > 0:
        dt = min(dt, remaining)
    return dt


def step(state: State, dt: float, params: SchemeParams, model: ReactionModel,
         ledger: Optional[ClampLedger] = None, enforce_max_principle: bool = True) -> State:
    """
    One forward Euler step of the coupled density / fraction system.

    Raises:
        StepRejected: if the updated pressure exceeds P_H (maximum principle) or is not finite
    """
    grid = state.grid
    n, c1 = state.n, state.c1
    p = pressure(n, state.gamma)
    grad_p = gradient(p)
    r = rates(model, p.values)
    c1_values = c1.values
    c2_values = 1.0 - c1_values
    R = c1_values * r.F + c2_values * r.G

    n_new = n.values + dt * (div_density_flux(n, p).values + n.values * R)

    # upwind_advect(c1, -grad p) is the discrete grad p . grad c1 transport term.
    c1_rhs = (upwind_advect(c1, -grad_p).values
              + c1_values * r.F1 + c2_values * r.G1 - c1_values * R)
    if params.epsilon > 0:
        c1_rhs = c1_rhs + params.epsilon * div_density_flux(p, c1).values
    c1_new = c1_values + dt * c1_rhs

    if not (np.all(np.isfinite(n_new)) and np.all(np.isfinite(c1_new))):
        raise StepRejected(f"non-finite values after a step of {dt:.3e}", p_max=float('inf'))

    n_clamp = np.maximum(-n_new, 0.0)
    n_new = np.maximum(n_new, 0.0)
    c1_clipped = np.clip(c1_new, 0.0, 1.0)
    c1_clamp = np.abs(c1_clipped - c1_new) * n_new

    p_max = float(np.max(n_new)) ** state.gamma
    if enforce_max_principle and p_max > model.P_H * (1.0 + PRESSURE_TOLERANCE):
        raise StepRejected(
            f"pressure {p_max:.9g} exceeds P_H = {model.P_H:.9g} after a step of {dt:.3e}", p_max=p_max
        )

    if ledger is not None:
        ledger.record(float((np.sum(n_clamp) + np.sum(c1_clamp)) * grid.cell_volume))
    return State(Field(grid, n_new), Field(grid, c1_clipped), state.t + dt, state.gamma)


def initial_state(data: InitialData, model: ReactionModel) -> State:
    """
    Build (n, c1) from species densities.

    Vacuum cells take the global mass fraction of species 1 (one for single-species data).
    """
    grid = data.grid
    n = data.total.values
    total_mass = float(np.sum(n))
    background = float(np.sum(data.n1_0.values)) / total_mass if total_mass > 0 else 0.5
    c1 = np.divide(data.n1_0.values, n, out=np.full(grid.shape, background), where=n > 0)
    return State(Field(grid, n), Field(grid, np.clip(c1, 0.0, 1.0)), data.t0, model.gamma)


def _advance(state: State, dt: float, params: SchemeParams, model: ReactionModel,
             ledger: ClampLedger, enforce_max_principle: bool) -> Tuple[State, float]:
    """Step with dt halving on rejection; returns the new state and the dt actually used."""
    while True:
        try:
            return step(state, dt, params, model, ledger, enforce_max_principle), dt
        except StepRejected as err:
            dt *= 0.5
            logger.warning("step rejected at t=%.6g (%s); retrying with dt=%.3e", state.t, err, dt)
            if dt < MIN_DT_FRACTION * max(params.t_end, TINY):
                raise Diverged(f"dt fell below {MIN_DT_FRACTION:g} * t_end at t={state.t:.6g}",
                               t=state.t, dt=dt) from err


def run(initial: InitialData, params: SchemeParams, model: ReactionModel,
        allow_invalid: bool = False, checkpoints: Iterable[float] = (),
        localizer_radius: Optional[float] = None,
        moment_radius: Optional[float] = None) -> Tuple[State, DiagnosticsSeries]:
    """
    Integrate one (epsilon, delta) member of the approximating family up to params.t_end.

    Args:
        initial (InitialData): Species densities before flooring
        params (SchemeParams): Regularization and step control
        model (ReactionModel): Reaction model
        allow_invalid (bool): Run models that fail the assumption checks (with a warning)
        checkpoints (Iterable[float]): Times the step loop must land on; states kept in the series
        localizer_radius (Optional[float]): Radius of the localizing function for Laplacian diagnostics
        moment_radius (Optional[float]): Radius of the cutoff for moment and entropy diagnostics

    Returns:
        tuple: final State and the DiagnosticsSeries
    """
    grid = initial.grid
    report = validate_assumptions(model, grid.dim)
    if not report.all_pass:
        failed = "; ".join(report.explanations.values())
        if not allow_invalid:
            raise AssumptionsViolated(f"reaction model fails the assumption checks: {failed}", report)
        logger.warning("running a model that fails the assumption checks: %s", failed)
    # The maximum-principle guard is only meaningful when rates are non-positive above P_H.
    enforce_max_principle = report.passes_3

    initial.check_homeostatic(model)
    state = initial_state(gaussian_floor(initial, params.delta, model), model)
    monitor = DiagnosticsMonitor(grid, model, localizer_radius, moment_radius)
    ledger = ClampLedger()
    targets = sorted({float(t) for t in checkpoints if state.t <= t <= params.t_end} | {params.t_end})
    kept = {}

    def keep_if_target(current: State):
        if current.t in targets and current.t not in kept:
            kept[current.t] = current

    logger.info("run start: t0=%.6g t_end=%.6g eps=%g delta=%g cells=%d^%d",
                state.t, params.t_end, params.epsilon, params.delta, grid.cells_per_axis, grid.dim)
    keep_if_target(state)
    monitor.record(state, ledger.total)
    steps = 0
    while state.t < params.t_end:
        target = next(t for t in targets if t > state.t)
        dt = min(cfl_dt(state, params, model), target - state.t)
        new_state, used_dt = _advance(state, dt, params, model, ledger, enforce_max_principle)
        if used_dt == target - state.t:
            new_state = dataclasses.replace(new_state, t=target)
        monitor.accumulate(state, used_dt)
        state = new_state
        steps += 1
        keep_if_target(state)
        if steps % params.diag_every == 0 or state.t >= params.t_end:
            monitor.record(state, ledger.total)
        logger.debug("step %d: t=%.6g dt=%.3e", steps, state.t, used_dt)

    logger.info("run finished after %d steps (clamped mass %.3e)", steps, ledger.total)
    return state, monitor.series(params.t_end, kept)


def check_floor(state: State, delta: float, c_rate: float, t0: float = 0.0) -> Tuple[bool, float]:
    """
    Compare n with the Gaussian subsolution delta * exp(-|x|^2/2 - c_rate (t - t0)).

    Returns:
        tuple: (passed, worst_margin) where worst_margin = min(n - subsolution) and the check
        allows one cell of slack, dx * max |grad subsolution|
    """
    grid = state.grid
    radius_squared = grid.radius_squared()
    floor = delta * np.exp(-0.5 * radius_squared - c_rate * (state.t - t0))
    tolerance = grid.dx * float(np.max(np.sqrt(radius_squared) * floor))
    worst_margin = float(np.min(state.n.values - floor))
    return worst_margin >= -tolerance, worst_margin
