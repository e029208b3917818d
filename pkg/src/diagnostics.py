"""
A priori estimate diagnostics and their audit along a run.

Every quantity is a read-only reduction over a state. Divisions by the pressure are removed
through power-of-p gradient identities, so vacuum cells contribute finite values.
"""
import logging
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .field_core import Field, Grid, gradient, interior, laplacian, localizer
from .model import ReactionModel, R_total, pressure

if TYPE_CHECKING:
    from .scheme import SchemeParams, State

logger = logging.getLogger(__name__)

VACUUM_DENSITY = 1e-300
LOCALIZER_FRACTION = 0.6
MOMENT_FRACTION = 0.8
OUTER_SHELL_FRACTION = 0.9
OUTER_SHELL_WARNING = 1e-6
SUPPORT_FRACTION = 1e-3
FRONT_MARGIN = 2
SENSITIVITY_WARNING = 0.05

CSV_COLUMNS = (
    't', 'mass', 'mass_bound', 'p_max', 'second_moment', 'entropy', 'entropy_diss_cum',
    'w_minus_L2', 'w_minus_L3_cum', 'lap_L1', 'energy', 'energy_diss_cum', 'clamp_total',
)


def default_radius(grid: Grid, fraction: float) -> float:
    """fraction * half_width, reduced so that the unit bridge still fits in the box."""
    return max(0.0, min(fraction * grid.half_width, grid.half_width - 1.0))


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    mass_bound: float
    p_max: float
    second_moment: float
    entropy: float
    entropy_diss_cum: float
    w_minus_L2: float
    w_minus_L3_cum: float
    lap_L1: float
    energy: float
    energy_diss_cum: float
    clamp_total: float
    mass_1: float = 0.0
    mass_2: float = 0.0
    # Time integral of sum n R dx^d since the first record.
    mass_source_cum: float = 0.0
    pressure_excess: float = 0.0
    outer_shell_mass: float = 0.0

    def csv_values(self) -> List[float]:
        return [getattr(self, name) for name in CSV_COLUMNS]


@dataclass
class DiagnosticsSeries:
    records: List[DiagnosticsRecord]
    t_end: float
    checkpoints: Dict[float, 'State'] = field(default_factory=dict)
    grid: Optional[Grid] = None
    localizer_sensitivity: Dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def t0(self) -> float:
        return self.records[0].t

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(record, name) for record in self.records], dtype=float)

    def final(self) -> DiagnosticsRecord:
        return self.records[-1]


def entropy_and_dissipation(state: 'State', model: ReactionModel, PhiL: Field) -> Tuple[float, float]:
    """
    Localized entropy sum n (ln n - 1) PhiL and the rate |grad p|^2 / p^(1 - 1/gamma) PhiL.

    The rate uses |grad p^s|^2 / s^2 with s = (1 + 1/gamma) / 2.
    """
    grid = state.grid
    n = state.n.values
    occupied = n > VACUUM_DENSITY
    density_log = np.where(occupied, n * (np.log(np.where(occupied, n, 1.0)) - 1.0), 0.0)
    entropy = grid.integrate(density_log * PhiL.values)

    s = 0.5 * (1.0 + 1.0 / model.gamma)
    p_power = Field(grid, pressure(state.n, model.gamma).values ** s)
    dissipation = grid.integrate(gradient(p_power).magnitude_squared() * PhiL.values) / s ** 2
    return entropy, dissipation


def support_interior(p: np.ndarray, margin: int = FRONT_MARGIN) -> np.ndarray:
    """Cells with p above SUPPORT_FRACTION of its maximum, eroded by margin cells."""
    p_max = float(np.max(p))
    if p_max <= 0:
        return np.zeros(p.shape, dtype=bool)
    return interior(p > SUPPORT_FRACTION * p_max, margin)


def w_diagnostics(state: 'State', model: ReactionModel, phi: Field) -> Tuple[float, float, float]:
    """
    Negative part of w = lap p + R, localized by phi.

    The negative part is only taken on the support interior: next to the discrete free boundary
    the Laplacian stencil straddles the kink of p and oscillates with amplitude |grad p| / dx.
    |lap p| is integrated on every cell.

    Returns:
        tuple: (sum |w|_-^2 phi, sum |w|_-^3 phi, sum |lap p| phi), each times the cell volume
    """
    grid = state.grid
    p = pressure(state.n, model.gamma)
    lap_p = laplacian(p).values
    w = lap_p + R_total(model, state.c1.values, p.values)
    w_minus = np.where(support_interior(p.values), np.maximum(-w, 0.0), 0.0)
    return (
        grid.integrate(w_minus ** 2 * phi.values),
        grid.integrate(w_minus ** 3 * phi.values),
        grid.integrate(np.abs(lap_p) * phi.values),
    )


def second_moment(state: 'State', PhiL: Field) -> float:
    grid = state.grid
    return grid.integrate(grid.radius_squared() * state.n.values * PhiL.values)


def energy_diagnostics(state: 'State', model: ReactionModel) -> Tuple[float, float]:
    """
    Energy sum p^a |grad p|^2 / 2 with a = 2 / gamma, and the squared dissipation integrand.

    The integrand div(p^((a+1)/2) grad p) - p^((a+1)/2) |grad p|^2 / (2p) is evaluated as
    2/(a+3) lap p^((a+3)/2) - |grad p^((a+3)/4)|^2 / (2 ((a+3)/4)^2).
    """
    grid = state.grid
    alpha = 2.0 / model.gamma
    p = pressure(state.n, model.gamma)
    energy = grid.integrate(p.values ** alpha * gradient(p).magnitude_squared() / 2.0)

    flux_power = (alpha + 3.0) / 2.0
    slope_power = (alpha + 3.0) / 4.0
    divergence = laplacian(Field(grid, p.values ** flux_power)).values / flux_power
    slope = gradient(Field(grid, p.values ** slope_power)).magnitude_squared() / (2.0 * slope_power ** 2)
    dissipation = grid.integrate((divergence - slope) ** 2)
    return energy, dissipation


def localizer_sensitivity(state: 'State', model: ReactionModel, localizer_radius: float,
                          moment_radius: float) -> Dict[str, float]:
    """
    Relative change of each localized diagnostic when both radii are doubled (capped by the box).

    Small values mean the mass is well contained and the finite radii stand in for L -> infinity.
    """
    grid = state.grid
    cap = grid.half_width - 1.0

    def localized(phi_radius: float, moment_cutoff: float) -> Dict[str, float]:
        phi = localizer(grid, phi_radius)
        Phi = localizer(grid, moment_cutoff)
        entropy, _ = entropy_and_dissipation(state, model, Phi)
        w_l2, _, lap_l1 = w_diagnostics(state, model, phi)
        return {
            'second_moment': second_moment(state, Phi),
            'entropy': entropy,
            'w_minus_L2': w_l2,
            'lap_L1': lap_l1,
        }

    base = localized(localizer_radius, moment_radius)
    wide = localized(min(2.0 * localizer_radius, cap), min(2.0 * moment_radius, cap))
    return {
        name: abs(wide[name] - base[name]) / abs(base[name]) if base[name] != 0 else abs(wide[name])
        for name in base
    }


class DiagnosticsMonitor:
    """Collects diagnostics records along a run and integrates the cumulative ones."""

    def __init__(self, grid: Grid, model: ReactionModel, localizer_radius: Optional[float] = None,
                 moment_radius: Optional[float] = None):
        self.grid = grid
        self.model = model
        self.localizer_radius = (default_radius(grid, LOCALIZER_FRACTION)
                                 if localizer_radius is None else localizer_radius)
        self.moment_radius = default_radius(grid, MOMENT_FRACTION) if moment_radius is None else moment_radius
        self.phi = localizer(grid, self.localizer_radius)
        self.Phi = localizer(grid, self.moment_radius)
        coordinates = np.abs(np.stack(grid.coordinates()))
        self.shell_mask = np.max(coordinates, axis=0) > OUTER_SHELL_FRACTION * grid.half_width
        self.cumulative = {'entropy_diss_cum': 0.0, 'w_minus_L3_cum': 0.0, 'energy_diss_cum': 0.0,
                           'mass_source_cum': 0.0}
        self.records: List[DiagnosticsRecord] = []
        self.initial_mass: Optional[float] = None
        self.initial_time = 0.0
        self.last_state: Optional['State'] = None
        self._shell_warned = False

    def mass_source(self, state: 'State') -> float:
        """sum n R dx^d, the rate of change of mass under zero-flux boundaries."""
        p = pressure(state.n, self.model.gamma).values
        return self.grid.integrate(state.n.values * R_total(self.model, state.c1.values, p))

    def accumulate(self, state: 'State', dt: float):
        """Left-endpoint integration of the dissipation-type rates over one step."""
        _, entropy_rate = entropy_and_dissipation(state, self.model, self.Phi)
        _, w_cubed, _ = w_diagnostics(state, self.model, self.phi)
        _, energy_rate = energy_diagnostics(state, self.model)
        self.cumulative['entropy_diss_cum'] += entropy_rate * dt
        self.cumulative['w_minus_L3_cum'] += w_cubed * dt
        self.cumulative['energy_diss_cum'] += energy_rate * dt
        self.cumulative['mass_source_cum'] += self.mass_source(state) * dt

    def record(self, state: 'State', clamp_total: float) -> DiagnosticsRecord:
        grid = self.grid
        model = self.model
        n = state.n.values
        mass = grid.integrate(n)
        if self.initial_mass is None:
            self.initial_mass = mass
            self.initial_time = state.t
        p = pressure(state.n, model.gamma).values
        n1 = state.c1.values * n
        n2 = n - n1
        entropy, _ = entropy_and_dissipation(state, model, self.Phi)
        w_l2, _, lap_l1 = w_diagnostics(state, model, self.phi)
        energy, _ = energy_diagnostics(state, model)
        shell_fraction = grid.integrate(n * self.shell_mask) / mass if mass > 0 else 0.0
        if shell_fraction > OUTER_SHELL_WARNING and not self._shell_warned:
            logger.warning("%.2e of the mass sits in the outer 10%% of the box at t=%.6g; "
                           "the truncated domain may be too small", shell_fraction, state.t)
            self._shell_warned = True

        record = DiagnosticsRecord(
            t=state.t,
            mass=mass,
            mass_bound=self.initial_mass * float(np.exp((state.t - self.initial_time) * model.R_inf_norm)),
            p_max=float(np.max(p)),
            second_moment=second_moment(state, self.Phi),
            entropy=entropy,
            entropy_diss_cum=self.cumulative['entropy_diss_cum'],
            w_minus_L2=w_l2,
            w_minus_L3_cum=self.cumulative['w_minus_L3_cum'],
            lap_L1=lap_l1,
            energy=energy,
            energy_diss_cum=self.cumulative['energy_diss_cum'],
            clamp_total=clamp_total,
            mass_1=grid.integrate(n1),
            mass_2=grid.integrate(n2),
            mass_source_cum=self.cumulative['mass_source_cum'],
            pressure_excess=0.5 * grid.integrate(np.maximum(p - model.P_H, 0.0) ** 2),
            outer_shell_mass=shell_fraction,
        )
        self.records.append(record)
        self.last_state = state
        return record

    def series(self, t_end: float, checkpoints: Optional[Dict[float, 'State']] = None) -> DiagnosticsSeries:
        """Recorded series; the localizer sensitivity is evaluated on the last recorded state."""
        sensitivity = {}
        if self.last_state is not None:
            sensitivity = localizer_sensitivity(self.last_state, self.model,
                                                self.localizer_radius, self.moment_radius)
        return DiagnosticsSeries(list(self.records), t_end, dict(checkpoints or {}), self.grid, sensitivity)


class BoundType(Enum):
    POINTWISE = 'PointwiseBound'
    UNIFORM_IN_TIME = 'UniformInTime'
    CUMULATIVE_FINITE = 'CumulativeFinite'
    INFORMATIONAL = 'Informational'


@dataclass
class AuditEntry:
    bound_type: BoundType
    observed_max: float
    limit_used: float
    explanation: str = ''

    @property
    def passed(self) -> bool:
        """Informational entries never fail; the limit only decides their wording."""
        if self.bound_type is BoundType.INFORMATIONAL:
            return True
        return bool(self.observed_max <= self.limit_used)


@dataclass
class AuditReport:
    entries: Dict[str, AuditEntry]

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries.values())

    def failures(self) -> List[str]:
        return [name for name, entry in self.entries.items() if not entry.passed]

    def to_text(self) -> str:
        """Structured plain-text report, one block per audited quantity."""
        lines = [f"audit: {'PASS' if self.passed else 'FAIL'}"]
        for name, entry in self.entries.items():
            lines.extend([
                f"[{name}]",
                f"bound_type = {entry.bound_type.value}",
                f"observed_max = {entry.observed_max:.17g}",
                f"limit_used = {entry.limit_used:.17g}",
                f"pass = {str(entry.passed).lower()}",
                f"explanation = {entry.explanation}",
            ])
        return "\n".join(lines) + "\n"


class EstimateAuditor:
    """Checks a diagnostics series against the bounds of the a priori estimates."""

    def __init__(self):
        self.pressure_tolerance = 1e-6
        self.mass_tolerance = 1e-3
        self.refinement_factor = 2.0
        self.transient_fraction = 0.1
        self.clamp_tolerance = 1e-8
        self.balance_tolerance = 1e-9
        self.cumulative_names = ('entropy_diss_cum', 'w_minus_L3_cum', 'energy_diss_cum')
        self.uniform_names = ('w_minus_L2', 'lap_L1', 'energy')
        # Power of ||R||_inf giving the scale of each uniform quantity per unit box volume.
        self.uniform_floor_powers = {'w_minus_L2': 2, 'lap_L1': 1}

    def audit(self, series: DiagnosticsSeries, model: ReactionModel, params: 'SchemeParams',
              refinement_family: Optional[Sequence[DiagnosticsSeries]] = None) -> AuditReport:
        """
        Audit one series.

        Args:
            series (DiagnosticsSeries): Recorded run, non-empty
            model (ReactionModel): Model the run used
            params (SchemeParams): Scheme parameters of the run
            refinement_family (Optional[Sequence[DiagnosticsSeries]]): Same scenario on successively
                finer grids, coarsest first; enables the refinement-stability limits

        Returns:
            AuditReport: One entry per audited quantity
        """
        if len(series) == 0:
            raise ValueError("cannot audit an empty diagnostics series")
        entries = {
            'p_max': self._audit_pressure(series, model),
            'mass': self._audit_mass(series),
            'mass_balance': self._audit_mass_balance(series),
        }
        for name in self.cumulative_names:
            entries[name] = self._audit_cumulative(series, name, refinement_family)
        for name in self.uniform_names:
            entries[name] = self._audit_uniform(series, name, model, params, refinement_family)
        entries['pressure_excess'] = self._audit_pressure_excess(series, model)
        entries['clamp_total'] = self._audit_clamp(series)
        entries['localizer_sensitivity'] = self._audit_sensitivity(series)
        entries['outer_shell_mass'] = self._audit_outer_shell(series)
        for name in entries:
            logger.debug("audit %s: %s", name, entries[name])
        return AuditReport(entries)

    def _audit_pressure(self, series: DiagnosticsSeries, model: ReactionModel) -> AuditEntry:
        observed = float(np.max(series.column('p_max')))
        limit = model.P_H * (1.0 + self.pressure_tolerance)
        return AuditEntry(BoundType.POINTWISE, observed, limit, self._get_pressure_explanation(observed, limit))

    def _audit_mass(self, series: DiagnosticsSeries) -> AuditEntry:
        mass = series.column('mass')
        bound = series.column('mass_bound')
        ratio = np.divide(mass, bound, out=np.where(mass > 0, np.inf, 0.0), where=bound > 0)
        observed = float(np.max(ratio))
        limit = 1.0 + self.mass_tolerance
        explanation = (
            "Mass stays below the exponential growth bound" if observed <= limit
            else f"Mass exceeds the exponential growth bound by a factor {observed:.6g}"
        )
        return AuditEntry(BoundType.POINTWISE, observed, limit, explanation)

    def _audit_mass_balance(self, series: DiagnosticsSeries) -> AuditEntry:
        """
        Discrete Gronwall consistency: mass(t) - mass(t0) equals the integrated source sum n R dx^d.

        Only clamping and round-off may separate the two under zero-flux boundaries.
        """
        mass = series.column('mass')
        residual = np.abs(mass - mass[0] - series.column('mass_source_cum'))
        observed = float(np.max(residual)) if np.all(np.isfinite(residual)) else float('inf')
        limit = series.final().clamp_total + self.balance_tolerance * float(np.max(np.abs(mass)))
        if series.grid is not None and series.grid.boundary != 'neumann':
            return AuditEntry(BoundType.INFORMATIONAL, observed, limit,
                              f"{series.grid.boundary} faces let mass leave the box; balance not enforced")
        explanation = (
            "Mass changes only through the reaction source" if observed <= limit
            else f"Mass drifts {observed:.6g} away from the integrated reaction source"
        )
        return AuditEntry(BoundType.POINTWISE, observed, limit, explanation)

    def _audit_cumulative(self, series: DiagnosticsSeries, name: str,
                          refinement_family: Optional[Sequence[DiagnosticsSeries]]) -> AuditEntry:
        if refinement_family:
            finals = [float(getattr(member.final(), name)) for member in refinement_family]
            observed = max(finals + [float(getattr(series.final(), name))])
            limit = self.refinement_factor * finals[0]
            explanation = (
                f"Refinement-stable: finest-grid values stay within {self.refinement_factor:g}x the coarsest"
                if observed <= limit else
                f"Grows under refinement beyond {self.refinement_factor:g}x the coarsest grid"
            )
        else:
            observed = float(getattr(series.final(), name))
            limit = sys.float_info.max
            explanation = "Finite" if np.isfinite(observed) else "Not finite"
        if not np.isfinite(observed):
            observed = float('inf')
        return AuditEntry(BoundType.CUMULATIVE_FINITE, observed, limit,
                          explanation + " (refinement stability stands in for the unknown constant C(T))")

    def uniform_floor(self, series: DiagnosticsSeries, name: str, model: ReactionModel) -> float:
        """Smallest reference value for a uniform quantity: ||R||_inf^k times the box volume."""
        power = self.uniform_floor_powers.get(name)
        if power is None:
            return 0.0
        return model.R_inf_norm ** power * self._box_volume(series)

    def _audit_uniform(self, series: DiagnosticsSeries, name: str, model: ReactionModel,
                       params: 'SchemeParams',
                       refinement_family: Optional[Sequence[DiagnosticsSeries]] = None) -> AuditEntry:
        values = series.column(name)
        observed = float(np.max(values)) if np.all(np.isfinite(values)) else float('inf')
        floor = self.uniform_floor(series, name, model)
        if refinement_family:
            # sup over [t0, T] of the coarsest run against the sup of every finer one
            sups = [float(np.max(member.column(name))) for member in refinement_family]
            observed = max(sups + [observed])
            reference = max(sups[0], floor)
            limit = self.refinement_factor * reference
            explanation = (
                f"Refinement-stable: sup over time stays within {self.refinement_factor:g}x the coarsest grid"
                if observed <= limit else
                f"Sup over time grows under refinement beyond {self.refinement_factor:g}x the coarsest grid"
            )
            return AuditEntry(BoundType.UNIFORM_IN_TIME, observed, limit, explanation)

        times = series.column('t')
        horizon = series.t0 + self.transient_fraction * (params.t_end - series.t0)
        window = max(int(np.count_nonzero(times <= horizon)), min(2, len(values)))
        transient = float(np.max(values[:window]))
        limit = self.refinement_factor * max(transient, floor)
        explanation = (
            f"Bounded in time by {self.refinement_factor:g}x max(initial-transient maximum {transient:.6g}, "
            f"reaction scale {floor:.6g})"
            if observed <= limit else
            f"Exceeds {self.refinement_factor:g}x max(initial-transient maximum, reaction scale) ({limit:.6g})"
        )
        return AuditEntry(BoundType.UNIFORM_IN_TIME, observed, limit, explanation)

    def _audit_pressure_excess(self, series: DiagnosticsSeries, model: ReactionModel) -> AuditEntry:
        excess = series.column('pressure_excess')
        observed = float(np.max(np.diff(excess))) if len(excess) > 1 else 0.0
        observed = max(observed, 0.0)
        # Largest excess a state can carry while the pressure bound holds.
        limit = 0.5 * (model.P_H * self.pressure_tolerance) ** 2 * self._box_volume(series)
        explanation = (
            "Pressure excess above P_H never increases" if observed <= limit
            else f"Pressure excess above P_H increased by {observed:.6g}"
        )
        return AuditEntry(BoundType.POINTWISE, observed, limit, explanation)

    def _audit_clamp(self, series: DiagnosticsSeries) -> AuditEntry:
        observed = float(series.final().clamp_total)
        limit = self.clamp_tolerance * series.records[0].mass
        explanation = (
            "Clamping moved a negligible amount of mass" if observed <= limit
            else f"Clamping moved {observed:.3e}, more than {self.clamp_tolerance:g} of the initial mass"
        )
        return AuditEntry(BoundType.POINTWISE, observed, limit, explanation)

    def _audit_sensitivity(self, series: DiagnosticsSeries) -> AuditEntry:
        sensitivity = series.localizer_sensitivity
        observed = max(sensitivity.values(), default=0.0)
        if not sensitivity:
            explanation = "No final state to evaluate"
        else:
            changes = ", ".join(f"{name} {value:.3g}" for name, value in sensitivity.items())
            verdict = ("radii large enough" if observed <= SENSITIVITY_WARNING
                       else "localized values still depend on the radii")
            explanation = f"Relative change with doubled radii: {changes}; {verdict}"
        if observed > SENSITIVITY_WARNING:
            logger.warning("localized diagnostics change by %.3g when the radii double", observed)
        return AuditEntry(BoundType.INFORMATIONAL, observed, SENSITIVITY_WARNING, explanation)

    def _audit_outer_shell(self, series: DiagnosticsSeries) -> AuditEntry:
        observed = float(np.max(series.column('outer_shell_mass')))
        explanation = (
            "Mass stays clear of the box boundary" if observed <= OUTER_SHELL_WARNING
            else f"Up to {observed:.3e} of the mass reached the outer 10% of the box"
        )
        return AuditEntry(BoundType.INFORMATIONAL, observed, OUTER_SHELL_WARNING, explanation)

    def _box_volume(self, series: DiagnosticsSeries) -> float:
        if series.grid is None:
            return 1.0
        return (2.0 * series.grid.half_width) ** series.grid.dim

    def _get_pressure_explanation(self, observed: float, limit: float) -> str:
        if observed <= limit:
            return f"Maximum pressure {observed:.6g} respects the homeostatic bound"
        return f"Maximum pressure {observed:.6g} exceeds the homeostatic bound {limit:.6g}"


def audit(series: DiagnosticsSeries, model: ReactionModel, params: 'SchemeParams',
          refinement_family: Optional[Sequence[DiagnosticsSeries]] = None) -> AuditReport:
    return EstimateAuditor().audit(series, model, params, refinement_family)
