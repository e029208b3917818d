"""
Tests for the estimate diagnostics and the audit.
"""
import dataclasses

import numpy as np
import pytest

from src.diagnostics import (CSV_COLUMNS, AuditReport, BoundType, DiagnosticsMonitor, DiagnosticsRecord,
                             DiagnosticsSeries, EstimateAuditor, audit, default_radius,
                             energy_diagnostics, entropy_and_dissipation, localizer_sensitivity,
                             second_moment, support_interior, w_diagnostics)
from src.field_core import Field, Grid, localizer
from src.model import ReactionModel
from src.presets import barenblatt_data, two_bumps_segregated
from src.scheme import ClampLedger, SchemeParams, State, cfl_dt, run, step


@pytest.fixture
def model():
    return ReactionModel()


@pytest.fixture
def reaction_free():
    return ReactionModel(growth_rate=0.0)


def state_from_pressure(grid, p, gamma=2.0, c1=0.5):
    return State(Field(grid, np.asarray(p) ** (1.0 / gamma)), Field.constant(grid, c1), 0.0, gamma)


def make_record(t, **overrides):
    values = {name: 0.0 for name in CSV_COLUMNS}
    values.update(t=t, mass=1.0, mass_bound=1.0, p_max=0.5)
    values.update(overrides)
    return DiagnosticsRecord(**values)


def make_series(records, t_end=1.0):
    return DiagnosticsSeries(records, t_end, grid=Grid(1, 4.0, 32))


def test_csv_columns_order():
    assert ','.join(CSV_COLUMNS) == (
        "t,mass,mass_bound,p_max,second_moment,entropy,entropy_diss_cum,w_minus_L2,"
        "w_minus_L3_cum,lap_L1,energy,energy_diss_cum,clamp_total"
    )
    assert make_record(0.25).csv_values()[0] == 0.25


def test_default_radius_fits_box():
    grid = Grid(1, 2.0, 16)
    assert default_radius(grid, 0.6) == pytest.approx(1.0)
    assert default_radius(Grid(1, 10.0, 16), 0.6) == pytest.approx(6.0)


class TestReductions:
    def test_energy_of_linear_pressure(self, model):
        grid = Grid(1, 0.5, 8)
        state = state_from_pressure(grid, grid.centers() + 0.5)
        energy, _ = energy_diagnostics(state, model)
        assert energy == pytest.approx(0.25)

    def test_w_of_concave_pressure(self, reaction_free):
        grid = Grid(1, 4.0, 80)
        state = state_from_pressure(grid, (16.0 - grid.centers() ** 2) / 16.0)
        phi = localizer(grid, 2.0)
        w_l2, w_l3, lap_l1 = w_diagnostics(state, reaction_free, phi)
        assert w_l2 == pytest.approx(0.125 * lap_l1, rel=1e-8)
        assert w_l3 == pytest.approx(0.125 ** 2 * lap_l1, rel=1e-8)
        assert lap_l1 == pytest.approx(0.125 * phi.integral(), rel=1e-8)

    def test_reaction_lifts_w(self, model):
        grid = Grid(1, 4.0, 80)
        # lap p = -1/32 while R = 1 - p >= 0.75, so w stays positive.
        state = state_from_pressure(grid, 0.25 * (16.0 - grid.centers() ** 2) / 16.0)
        w_l2, _, _ = w_diagnostics(state, model, localizer(grid, 2.0))
        assert w_l2 == 0.0

    def test_entropy_of_constant_density(self, model):
        grid = Grid(1, 4.0, 32)
        state = State(Field.constant(grid, 0.5), Field.constant(grid, 0.5), 0.0, 2.0)
        Phi = localizer(grid, 2.0)
        entropy, dissipation = entropy_and_dissipation(state, model, Phi)
        assert entropy == pytest.approx(0.5 * (np.log(0.5) - 1.0) * Phi.integral())
        assert dissipation == 0.0

    def test_entropy_ignores_vacuum(self, model):
        grid = Grid(1, 4.0, 32)
        state = State(Field.constant(grid, 0.0), Field.constant(grid, 0.5), 0.0, 2.0)
        entropy, dissipation = entropy_and_dissipation(state, model, localizer(grid, 2.0))
        assert entropy == 0.0
        assert dissipation == 0.0

    def test_localizer_sensitivity_of_contained_mass(self, model):
        grid = Grid(1, 8.0, 128)
        n = 0.5 * np.exp(-grid.centers() ** 2 / 0.1)
        state = State(Field(grid, n), Field.constant(grid, 0.5), 0.0, 2.0)
        sensitivity = localizer_sensitivity(state, model, 2.0, 2.0)
        assert set(sensitivity) == {'second_moment', 'entropy', 'w_minus_L2', 'lap_L1'}
        assert sensitivity['second_moment'] < 1e-6

    def test_second_moment_of_gaussian(self):
        grid = Grid(1, 10.0, 1000)
        delta = 0.1
        state = State(Field(grid, delta * np.exp(-0.5 * grid.radius_squared())),
                      Field.constant(grid, 0.5), 0.0, 2.0)
        assert second_moment(state, Field.constant(grid, 1.0)) == pytest.approx(delta * np.sqrt(2.0 * np.pi),
                                                                                rel=1e-6)

    def test_support_interior_drops_front_cells(self):
        p = np.array([0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0])
        assert support_interior(p, margin=1).tolist() == [False] * 3 + [True] * 3 + [False] * 2
        assert not np.any(support_interior(np.zeros(8)))

    def test_front_kink_does_not_count_as_negative_w(self, reaction_free):
        grid = Grid(1, 4.0, 80)
        x = grid.centers()
        # Pressure with a wiggle at the edge of its support and a concave core.
        p = np.maximum(1.0 - x ** 2, 0.0)
        p[np.argmax(p > 0)] = 0.2
        state = state_from_pressure(grid, p)
        phi = localizer(grid, 2.0)
        w_l2, _, lap_l1 = w_diagnostics(state, reaction_free, phi)
        inside = np.abs(x) < 1.0 - 3 * grid.dx
        assert w_l2 == pytest.approx(grid.integrate(4.0 * phi.values * support_interior(p)), rel=1e-8)
        assert w_l2 < 4.0 * 2.0
        assert lap_l1 > 2.0 * grid.integrate(inside * 1.0)


class TestMonitor:
    def test_first_record(self, model):
        grid = Grid(1, 4.0, 32)
        n = 0.5 * np.exp(-grid.centers() ** 2)
        c1 = np.where(grid.centers() < 0, 1.0, 0.0)
        state = State(Field(grid, n), Field(grid, c1), 0.0, 2.0)
        monitor = DiagnosticsMonitor(grid, model)
        record = monitor.record(state, 0.0)
        assert record.mass == pytest.approx(state.n.integral())
        assert record.mass_bound == record.mass
        assert record.mass_1 + record.mass_2 == pytest.approx(record.mass)
        assert record.mass_source_cum == 0.0
        assert record.pressure_excess == 0.0
        assert record.p_max == pytest.approx(np.max(n) ** 2)

    def test_accumulate_integrates_rates(self, reaction_free):
        grid = Grid(1, 4.0, 32)
        state = state_from_pressure(grid, 0.5 * np.exp(-grid.centers() ** 2))
        monitor = DiagnosticsMonitor(grid, reaction_free)
        _, rate = entropy_and_dissipation(state, reaction_free, monitor.Phi)
        monitor.accumulate(state, 0.1)
        monitor.accumulate(state, 0.2)
        assert monitor.cumulative['entropy_diss_cum'] == pytest.approx(0.3 * rate)

    def test_outer_shell_warning(self, model, caplog):
        grid = Grid(1, 4.0, 32)
        state = State(Field.constant(grid, 0.5), Field.constant(grid, 0.5), 0.0, 2.0)
        monitor = DiagnosticsMonitor(grid, model)
        monitor.record(state, 0.0)
        monitor.record(state, 0.0)
        warnings = [r for r in caplog.records if 'outer 10%' in r.getMessage()]
        assert len(warnings) == 1

    def test_series_carries_localizer_sensitivity(self, model):
        grid = Grid(1, 8.0, 128)
        monitor = DiagnosticsMonitor(grid, model)
        assert monitor.series(1.0).localizer_sensitivity == {}
        state = State(Field(grid, 0.5 * np.exp(-grid.centers() ** 2)), Field.constant(grid, 0.5), 0.0, 2.0)
        monitor.record(state, 0.0)
        sensitivity = monitor.series(1.0).localizer_sensitivity
        assert sensitivity == localizer_sensitivity(state, model, monitor.localizer_radius, monitor.moment_radius)

    def test_mass_change_matches_reaction_source(self, model):
        grid = Grid(1, 4.0, 32)
        state = State(Field(grid, 0.4 + 0.1 * np.exp(-grid.centers() ** 2)), Field.constant(grid, 0.3), 0.0, 2.0)
        params = SchemeParams()
        dt = cfl_dt(state, params, model)
        ledger = ClampLedger()
        advanced = step(state, dt, params, model, ledger)
        monitor = DiagnosticsMonitor(grid, model)
        assert ledger.total == 0.0
        rate = (advanced.n.integral() - state.n.integral()) / dt
        assert rate == pytest.approx(monitor.mass_source(state), rel=1e-9)
        monitor.accumulate(state, dt)
        assert monitor.cumulative['mass_source_cum'] == pytest.approx(rate * dt, rel=1e-9)


class TestAudit:
    @pytest.fixture
    def params(self):
        return SchemeParams(t_end=1.0)

    @pytest.fixture
    def auditor(self):
        return EstimateAuditor()

    def test_clean_series_passes(self, model, params):
        series = make_series([make_record(t) for t in (0.0, 0.05, 0.5, 1.0)])
        report = audit(series, model, params)
        assert isinstance(report, AuditReport)
        assert report.passed
        assert report.failures() == []

    def test_pressure_above_homeostasis_fails(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, p_max=1.1)])
        report = audit(series, model, params)
        assert report.failures() == ['p_max']
        assert report.entries['p_max'].bound_type is BoundType.POINTWISE

    def test_mass_above_bound_fails(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, mass=1.01)])
        assert 'mass' in audit(series, model, params).failures()

    def test_uniform_in_time_window(self, auditor, reaction_free, params):
        records = [make_record(t, lap_L1=value) for t, value in ((0.0, 1.0), (0.05, 1.0), (0.5, 1.0), (1.0, 5.0))]
        entry = auditor.audit(make_series(records), reaction_free, params).entries['lap_L1']
        assert entry.bound_type is BoundType.UNIFORM_IN_TIME
        assert entry.limit_used == pytest.approx(2.0)
        assert not entry.passed

    def test_uniform_floor_covers_quiet_transient(self, auditor, model, reaction_free, params):
        # Growth can create a negative part of w after a transient where it vanished.
        records = [make_record(t, w_minus_L2=value) for t, value in ((0.0, 0.0), (0.05, 0.0), (1.0, 0.25))]
        entry = auditor.audit(make_series(records), model, params).entries['w_minus_L2']
        # ||R||_inf = 1 on a box of volume 8
        assert entry.limit_used == pytest.approx(16.0)
        assert entry.passed
        assert not auditor.audit(make_series(records), reaction_free, params).entries['w_minus_L2'].passed

    def test_uniform_refinement_family_compares_sups(self, auditor, reaction_free, params):
        coarse = make_series([make_record(0.0, w_minus_L2=1.0), make_record(1.0, w_minus_L2=0.0)])
        stable = make_series([make_record(0.0, w_minus_L2=1.5), make_record(1.0, w_minus_L2=0.6)])
        growing = make_series([make_record(0.0, w_minus_L2=1.0), make_record(1.0, w_minus_L2=3.0)])
        entry = auditor.audit(stable, reaction_free, params, refinement_family=[coarse]).entries['w_minus_L2']
        assert entry.observed_max == 1.5
        assert entry.limit_used == 2.0
        assert entry.passed
        assert not auditor.audit(growing, reaction_free, params,
                                 refinement_family=[coarse]).entries['w_minus_L2'].passed

    def test_mass_balance(self, model, params):
        balanced = make_series([make_record(0.0), make_record(1.0, mass=1.5, mass_bound=3.0, mass_source_cum=0.5)])
        entry = audit(balanced, model, params).entries['mass_balance']
        assert entry.bound_type is BoundType.POINTWISE
        assert entry.passed
        drifting = make_series([make_record(0.0), make_record(1.0, mass=1.5, mass_bound=3.0, mass_source_cum=0.4)])
        assert audit(drifting, model, params).failures() == ['mass_balance']

    def test_clamped_mass_is_allowed_in_balance(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, mass=1.001, clamp_total=2e-3)])
        assert audit(series, model, params).entries['mass_balance'].passed

    def test_mass_balance_not_enforced_with_dirichlet_faces(self, model, params):
        records = [make_record(0.0), make_record(1.0, mass=0.5)]
        series = DiagnosticsSeries(records, 1.0, grid=Grid(1, 4.0, 32, boundary='dirichlet'))
        entry = audit(series, model, params).entries['mass_balance']
        assert entry.bound_type is BoundType.INFORMATIONAL
        assert entry.passed

    def test_informational_entries_never_fail(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, outer_shell_mass=0.2)])
        series.localizer_sensitivity = {'entropy': 0.5, 'lap_L1': 0.01}
        report = audit(series, model, params)
        sensitivity = report.entries['localizer_sensitivity']
        assert sensitivity.bound_type is BoundType.INFORMATIONAL
        assert sensitivity.observed_max == 0.5
        assert "entropy 0.5" in sensitivity.explanation
        assert report.entries['outer_shell_mass'].observed_max == 0.2
        assert report.passed
        assert "bound_type = Informational" in report.to_text()

    def test_cumulative_refinement_family(self, auditor, model, params):
        coarse = make_series([make_record(0.0), make_record(1.0, energy_diss_cum=1.0)])
        fine = make_series([make_record(0.0), make_record(1.0, energy_diss_cum=3.0)])
        report = auditor.audit(fine, model, params, refinement_family=[coarse])
        entry = report.entries['energy_diss_cum']
        assert entry.bound_type is BoundType.CUMULATIVE_FINITE
        assert not entry.passed

    def test_cumulative_without_family_only_needs_finite(self, auditor, model, params):
        series = make_series([make_record(0.0), make_record(1.0, w_minus_L3_cum=1e30)])
        assert auditor.audit(series, model, params).entries['w_minus_L3_cum'].passed
        series = make_series([make_record(0.0), make_record(1.0, w_minus_L3_cum=float('nan'))])
        assert not auditor.audit(series, model, params).entries['w_minus_L3_cum'].passed

    def test_pressure_excess_growth_fails(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, pressure_excess=0.1)])
        assert 'pressure_excess' in audit(series, model, params).failures()

    def test_clamping_fails(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, clamp_total=1e-3)])
        assert 'clamp_total' in audit(series, model, params).failures()

    def test_text_report(self, model, params):
        series = make_series([make_record(0.0), make_record(1.0, p_max=2.0)])
        text = audit(series, model, params).to_text()
        assert text.startswith("audit: FAIL")
        assert "[p_max]" in text
        assert "bound_type = PointwiseBound" in text
        assert "bound_type = CumulativeFinite" in text
        assert "bound_type = UniformInTime" in text

    def test_empty_series(self, model, params):
        with pytest.raises(ValueError):
            audit(make_series([]), model, params)

    def test_records_are_plain_dataclasses(self):
        record = make_record(0.0)
        assert dataclasses.asdict(record)['clamp_total'] == 0.0


def test_barenblatt_run_passes_every_audit(reaction_free):
    grid = Grid(1, 6.0, 256)
    params = SchemeParams(t_end=1.0, diag_every=10)
    _, series = run(barenblatt_data(grid, reaction_free, 0.5, 1.0), params, reaction_free)
    report = audit(series, reaction_free, params)
    assert report.failures() == []
    assert report.entries['mass_balance'].bound_type is BoundType.POINTWISE
    assert series.final().mass == pytest.approx(series.records[0].mass, rel=1e-9)


def test_growing_run_balances_mass_with_source(model):
    grid = Grid(1, 6.0, 128)
    params = SchemeParams(t_end=1.0, diag_every=5)
    _, series = run(barenblatt_data(grid, model, 0.5, 1.0), params, model)
    mass = series.column('mass')
    assert mass[-1] > mass[0]
    assert np.allclose(mass - mass[0], series.column('mass_source_cum'), rtol=0.0, atol=1e-9)
    assert audit(series, model, params).passed


@pytest.mark.slow
def test_segregated_bumps_are_refinement_stable(model):
    params = SchemeParams(t_end=1.0, diag_every=10)
    runs = []
    for cells in (128, 256):
        grid = Grid(1, 6.0, cells)
        data = two_bumps_segregated(grid, 0.8 * model.homeostatic_density, 1.0, 1.5)
        runs.append(run(data, params, model)[1])
    coarse, fine = runs

    for name in ('entropy_diss_cum', 'w_minus_L3_cum'):
        values = [getattr(series.final(), name) for series in runs]
        assert 0.0 < max(values) <= 2.0 * min(values), name
    for name in ('w_minus_L2', 'lap_L1', 'energy'):
        sups = [np.max(series.column(name)) for series in runs]
        assert 0.0 < max(sups) <= 2.0 * min(sups), name

    report = audit(fine, model, params, refinement_family=[coarse])
    for name in ('entropy_diss_cum', 'w_minus_L3_cum', 'w_minus_L2', 'lap_L1', 'energy'):
        assert report.entries[name].passed, name
