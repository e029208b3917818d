"""
Constitutive model: pressure law, reaction families, assumption checks and exact or initial data.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import FloorBreaksHomeostatic, ModelError, NegativeFieldError
from .field_core import Field, Grid

logger = logging.getLogger(__name__)

ASSUMPTION_SAMPLES = 10_000
SUBSOLUTION_SEARCH_STEPS = 64
SUBSOLUTION_RADII = np.linspace(0.0, 10.0, 201)


class ReactionFamily(Enum):
    LINEAR_SHARED_RATE = 'linear_shared'
    LINEAR_SPLIT_RATE = 'linear_split'
    CUSTOM = 'custom'


class Rates(NamedTuple):
    F1: np.ndarray
    F2: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    F: np.ndarray
    G: np.ndarray


@dataclass(frozen=True, eq=False)
class RateTable:
    """Piecewise-linear rate tables over pressure, extrapolated by their end values."""

    pressures: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    G1: np.ndarray
    G2: np.ndarray

    def __post_init__(self):
        columns = {}
        for name in ('pressures', 'F1', 'F2', 'G1', 'G2'):
            columns[name] = np.array(getattr(self, name), dtype=float).reshape(-1)
            object.__setattr__(self, name, columns[name])
        sizes = {len(col) for col in columns.values()}
        if len(sizes) != 1 or sizes.pop() < 2:
            raise ModelError("rate tables need at least two rows and equal column lengths")
        if np.any(np.diff(self.pressures) <= 0):
            raise ModelError("rate table pressures must be strictly increasing")

    def evaluate(self, p: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.interp(p, self.pressures, col) for col in (self.F1, self.F2, self.G1, self.G2))


@dataclass(frozen=True, eq=False)
class ReactionModel:
    """Pressure exponent, homeostatic pressure and the four growth/death rate functions."""

    gamma: float = 2.0
    P_H: float = 1.0
    family: ReactionFamily = ReactionFamily.LINEAR_SHARED_RATE
    growth_rate: float = 1.0
    theta: float = 0.5
    eta: float = 0.5
    kappa: float = 0.0
    table: Optional[RateTable] = None

    def __post_init__(self):
        if not self.gamma > 1:
            raise ModelError(f"gamma must exceed 1, got {self.gamma}")
        if not self.P_H > 0:
            raise ModelError(f"P_H must be positive, got {self.P_H}")
        if self.growth_rate < 0:
            raise ModelError(f"growth_rate must be non-negative, got {self.growth_rate}")
        for name in ('theta', 'eta'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.kappa < 0:
            raise ModelError(f"kappa must be non-negative, got {self.kappa}")
        if self.family is ReactionFamily.CUSTOM and self.table is None:
            raise ModelError("the custom family needs a rate table")

    @cached_property
    def R_inf_norm(self) -> float:
        """max |c1 F + (1 - c1) G| over c1 in [0, 1] and p in [0, P_H]; attained at c1 in {0, 1}."""
        p = np.linspace(0.0, self.P_H, ASSUMPTION_SAMPLES + 1)
        r = rates(self, p)
        return float(max(np.max(np.abs(r.F)), np.max(np.abs(r.G))))

    @property
    def homeostatic_density(self) -> float:
        return self.P_H ** (1.0 / self.gamma)


@dataclass
class AssumptionReport:
    passes_3: bool
    passes_7_gamma: bool
    passes_7_cancellation: bool
    estimated_C_H: float
    R_inf_norm: float
    explanations: Dict[str, str] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.passes_3 and self.passes_7_gamma and self.passes_7_cancellation


@dataclass(frozen=True, eq=False)
class InitialData:
    """Species densities at the start time t0."""

    n1_0: Field
    n2_0: Field
    t0: float = 0.0

    def __post_init__(self):
        if self.n1_0.grid != self.n2_0.grid:
            raise ModelError("initial species densities live on different grids")
        for name in ('n1_0', 'n2_0'):
            values = getattr(self, name).values
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise NegativeFieldError(f"{name} must be finite and non-negative")

    @property
    def grid(self) -> Grid:
        return self.n1_0.grid

    @property
    def total(self) -> Field:
        return Field(self.grid, self.n1_0.values + self.n2_0.values)

    def check_homeostatic(self, model: ReactionModel):
        """Initial pressure must not exceed P_H."""
        p_max = self.total.max() ** model.gamma
        if p_max > model.P_H * (1.0 + 1e-12):
            raise ModelError(f"initial pressure {p_max:.6g} exceeds P_H = {model.P_H:.6g}")


def pressure(n: Field, gamma: float) -> Field:
    """p = n^gamma."""
    if np.any(n.values < 0):
        raise NegativeFieldError(
            f"negative density {n.min():.3e} reached the pressure law; the scheme has blown up"
        )
    return Field(n.grid, n.values ** gamma)


def rates(model: ReactionModel, p) -> Rates:
    """Evaluate F1, F2, G1, G2 and the totals F, G at pressure(s) p."""
    p = np.asarray(p, dtype=float)
    if model.family is ReactionFamily.CUSTOM:
        F1, F2, G1, G2 = model.table.evaluate(p)
        return Rates(F1, F2, G1, G2, F1 + F2, G1 + G2)

    base = model.growth_rate * (model.P_H - p)
    F = base
    if model.family is ReactionFamily.LINEAR_SPLIT_RATE:
        G = base - model.kappa * p ** (1.0 / (2.0 * model.gamma)) * (model.P_H - p) / model.P_H
    else:
        # Identical totals, so |F - G| vanishes exactly.
        G = base
    return Rates(
        F1=model.theta * F,
        F2=(1.0 - model.theta) * F,
        G1=(1.0 - model.eta) * G,
        G2=model.eta * G,
        F=F,
        G=G,
    )


def R_total(model: ReactionModel, c1, p):
    """Net growth rate R = c1 F(p) + (1 - c1) G(p)."""
    r = rates(model, p)
    c1 = np.asarray(c1, dtype=float)
    return c1 * r.F + (1.0 - c1) * r.G


def _cancellation_sup(model: ReactionModel, samples: int) -> float:
    p = model.P_H * np.arange(1, samples + 1) / samples
    r = rates(model, p)
    return float(np.max((r.F - r.G) ** 2 / p ** (1.0 / model.gamma)))


def validate_assumptions(model: ReactionModel, dim: int) -> AssumptionReport:
    """
    Check the sign condition above P_H, the gamma restriction and the low-pressure cancellation.

    Args:
        model (ReactionModel): Model to check
        dim (int): Space dimension

    Returns:
        AssumptionReport: Pass flags, the sampled C_H and ||R||_inf
    """
    p = np.linspace(0.0, max(2.0 * model.P_H, 1.0), ASSUMPTION_SAMPLES)
    r = rates(model, p)
    above = p >= model.P_H
    passes_3 = bool(np.all(r.F[above] <= 1e-12) and np.all(r.G[above] <= 1e-12))

    gamma_threshold = 2.0 - 4.0 / dim
    passes_7_gamma = model.gamma > gamma_threshold

    coarse = _cancellation_sup(model, ASSUMPTION_SAMPLES)
    fine = _cancellation_sup(model, 2 * ASSUMPTION_SAMPLES)
    # A p^(-1/gamma) blow-up grows by 2^(1/gamma) per sample doubling; flag half of that log-growth.
    growth_limit = 2.0 ** (1.0 / (2.0 * model.gamma))
    passes_cancellation = bool(np.isfinite(fine) and np.isfinite(coarse) and fine <= coarse * growth_limit)

    explanations = {
        'sign_above_homeostasis': (
            "F and G are non-positive above P_H" if passes_3
            else f"F or G is positive somewhere in [P_H, {p[-1]:g}]: pressure can exceed P_H"
        ),
        'gamma_restriction': (
            f"gamma = {model.gamma:g} > {gamma_threshold:g}" if passes_7_gamma
            else f"gamma = {model.gamma:g} must exceed {gamma_threshold:g} in dimension {dim}"
        ),
        'low_pressure_cancellation': (
            f"|F - G|^2 / p^(1/gamma) bounded by about {fine:.4g}" if passes_cancellation
            else f"|F - G|^2 / p^(1/gamma) keeps growing as p -> 0 ({coarse:.4g} -> {fine:.4g})"
        ),
    }
    report = AssumptionReport(
        passes_3=passes_3,
        passes_7_gamma=passes_7_gamma,
        passes_7_cancellation=passes_cancellation,
        estimated_C_H=fine,
        R_inf_norm=model.R_inf_norm,
        explanations=explanations,
    )
    logger.debug("assumption report: %s", report)
    return report


def barenblatt_constants(gamma: float, dim: int, mass: float) -> Tuple[float, float, float, float]:
    """Return (alpha, beta, kappa, C) of the porous-medium source solution with exponent gamma + 1."""
    m = gamma + 1.0
    alpha = dim / (dim * (m - 1.0) + 2.0)
    beta = alpha / dim
    kappa = alpha * (m - 1.0) / (2.0 * m * dim)
    q = 1.0 / (m - 1.0)
    half_d = dim / 2.0
    # mass = C^(q + d/2) kappa^(-d/2) pi^(d/2) Gamma(q + 1) / Gamma(q + 1 + d/2)
    C = (mass * kappa ** half_d * math.gamma(q + 1.0 + half_d)
         / (math.pi ** half_d * math.gamma(q + 1.0))) ** (1.0 / (q + half_d))
    return alpha, beta, kappa, C


def _barenblatt_time(gamma: float, t: float) -> float:
    return gamma / (gamma + 1.0) * t


def barenblatt_support_radius(gamma: float, dim: int, t: float, mass: float) -> float:
    _, beta, kappa, C = barenblatt_constants(gamma, dim, mass)
    return math.sqrt(C / kappa) * _barenblatt_time(gamma, t) ** beta


def barenblatt(grid: Grid, gamma: float, t: float, mass: float = 1.0) -> Field:
    """
    Exact self-similar solution of the reaction-free density equation.

    dn/dt = div(n grad n^gamma) is the porous-medium equation with exponent gamma + 1
    in the rescaled time tau = gamma / (gamma + 1) * t.
    """
    if t <= 0:
        raise ModelError(f"Barenblatt profiles need t > 0, got {t}")
    if mass <= 0:
        raise ModelError(f"Barenblatt profiles need a positive mass, got {mass}")
    alpha, beta, kappa, C = barenblatt_constants(gamma, grid.dim, mass)
    tau = _barenblatt_time(gamma, t)
    core = np.maximum(C - kappa * grid.radius_squared() * tau ** (-2.0 * beta), 0.0)
    return Field(grid, tau ** (-alpha) * core ** (1.0 / gamma))


def gaussian_floor(data: InitialData, delta: float, model: ReactionModel) -> InitialData:
    """
    Add delta * exp(-|x|^2 / 2) to the total density.

    The floor is shared between species in proportion to their local fractions, equally where
    the initial density vanishes.
    """
    if delta < 0:
        raise ModelError(f"delta must be non-negative, got {delta}")
    if delta == 0:
        return data
    n0 = data.total.values
    if (n0.max() + delta) ** model.gamma > model.P_H:
        raise FloorBreaksHomeostatic(
            f"(max n0 + delta)^gamma = {(n0.max() + delta) ** model.gamma:.6g} exceeds P_H = {model.P_H:.6g}"
        )
    grid = data.grid
    floor = delta * np.exp(-0.5 * grid.radius_squared())
    share = np.divide(data.n1_0.values, n0, out=np.full(grid.shape, 0.5), where=n0 > 0)
    return InitialData(
        n1_0=Field(grid, data.n1_0.values + share * floor),
        n2_0=Field(grid, data.n2_0.values + (1.0 - share) * floor),
        t0=data.t0,
    )


def subsolution_residual(c: float, radius, t: float, gamma: float, delta: float,
                         R_inf: float, dim: int = 1) -> np.ndarray:
    """Residual of the Gaussian subsolution inequality divided by the Gaussian itself; must be <= 0."""
    radius = np.asarray(radius, dtype=float)
    floor_power = (delta * np.exp(-0.5 * radius ** 2 - c * t)) ** gamma
    return (-c - gamma * (gamma + 1.0) * floor_power * radius ** 2
            + gamma * dim * floor_power + R_inf)


def subsolution_rate(model: ReactionModel, gamma: float, delta: float, dim: int = 1) -> float:
    """
    Smallest decay rate c on a coarse grid making delta * exp(-|x|^2/2 - c t) a subsolution.

    The quadratic term only helps, so c = gamma * dim * delta^gamma + ||R||_inf always works.
    """
    if delta <= 0:
        raise ModelError(f"delta must be positive, got {delta}")
    R_inf = model.R_inf_norm
    sufficient = gamma * dim * delta ** gamma + R_inf
    tolerance = 1e-12 * max(1.0, sufficient)
    for k in range(SUBSOLUTION_SEARCH_STEPS + 1):
        c = sufficient * k / SUBSOLUTION_SEARCH_STEPS
        residual = subsolution_residual(c, SUBSOLUTION_RADII, 0.0, gamma, delta, R_inf, dim)
        if np.all(residual <= tolerance):
            return c
    return sufficient
