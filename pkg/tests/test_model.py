"""
Tests for the constitutive model.
"""
import numpy as np
import pytest

from src.exceptions import FloorBreaksHomeostatic, ModelError
from src.field_core import Field, Grid, laplacian
from src.model import (InitialData, R_total, RateTable, ReactionFamily, ReactionModel, barenblatt,
                       barenblatt_constants, barenblatt_support_radius, gaussian_floor, pressure,
                       rates, subsolution_rate, subsolution_residual, validate_assumptions)


@pytest.fixture
def model():
    return ReactionModel()


def custom_model(F1, F2=(0.0, 0.0), G1=(0.0, 0.0), G2=(0.0, 0.0)):
    table = RateTable((0.0, 1.0), F1, F2, G1, G2)
    return ReactionModel(family=ReactionFamily.CUSTOM, table=table)


def test_pressure_law():
    grid = Grid(1, 1.0, 8)
    assert np.allclose(pressure(Field.constant(grid, 2.0), 2.0).values, 4.0)


def test_invalid_gamma():
    with pytest.raises(ModelError):
        ReactionModel(gamma=0.5)


def test_shared_rates(model):
    p = np.linspace(0.0, 1.0, 11)
    r = rates(model, p)
    assert np.array_equal(r.F, r.G)
    assert np.allclose(r.F1 + r.F2, r.F)
    assert np.allclose(r.G1 + r.G2, r.G)
    assert r.F[0] == pytest.approx(1.0)
    assert r.F[-1] == pytest.approx(0.0)


def test_split_rates_differ_at_intermediate_pressure():
    model = ReactionModel(family=ReactionFamily.LINEAR_SPLIT_RATE, kappa=0.5)
    r = rates(model, np.array([0.0, 0.5, 1.0]))
    assert r.F[1] > r.G[1]
    assert r.F[0] == r.G[0]
    assert r.F[2] == r.G[2] == 0.0


def test_rate_table_validation():
    with pytest.raises(ModelError):
        RateTable((0.0, 1.0), (1.0,), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ModelError):
        RateTable((1.0, 0.0), (1.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0))


class TestAssumptions:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_default_model_passes(self, model, dim):
        report = validate_assumptions(model, dim)
        assert report.all_pass
        assert report.R_inf_norm == pytest.approx(1.0)

    def test_split_model_passes(self):
        model = ReactionModel(family=ReactionFamily.LINEAR_SPLIT_RATE, kappa=0.5)
        assert validate_assumptions(model, 1).all_pass

    def test_positive_growth_above_homeostasis_fails(self):
        report = validate_assumptions(custom_model(F1=(1.0, 1.0), G1=(1.0, 1.0)), 1)
        assert not report.passes_3
        assert report.passes_7_cancellation
        assert "exceed P_H" in report.explanations['sign_above_homeostasis']

    def test_rate_gap_at_vacuum_fails_cancellation(self):
        report = validate_assumptions(custom_model(F1=(0.5, 0.0)), 1)
        assert report.passes_3
        assert not report.passes_7_cancellation

    def test_gamma_restriction_two_dimensions(self):
        # The threshold 2 - 4/d vanishes in two dimensions.
        assert validate_assumptions(ReactionModel(gamma=1.1), 2).passes_7_gamma


class TestBarenblatt:
    def test_constants(self):
        alpha, beta, kappa, C = barenblatt_constants(2.0, 1, 1.0)
        assert alpha == pytest.approx(0.25)
        assert beta == pytest.approx(0.25)
        assert kappa == pytest.approx(1.0 / 12.0)
        assert C == pytest.approx(0.18378, rel=1e-4)

    def test_support_radius(self):
        assert barenblatt_support_radius(2.0, 1, 1.0, 1.0) == pytest.approx(1.342, abs=1e-3)

    def test_profile_mass_and_support(self):
        grid = Grid(1, 3.0, 512)
        profile = barenblatt(grid, 2.0, 1.0, 1.0)
        assert profile.integral() == pytest.approx(1.0, rel=1e-2)
        outside = np.abs(grid.centers()) > 1.343
        assert np.all(profile.values[outside] == 0.0)

    def test_two_dimensional_mass(self):
        grid = Grid(2, 2.0, 128)
        assert barenblatt(grid, 2.0, 1.0, 1.0).integral() == pytest.approx(1.0, rel=2e-2)

    def test_nonpositive_time(self):
        with pytest.raises(ModelError):
            barenblatt(Grid(1, 3.0, 64), 2.0, 0.0)

    def test_mass_is_conserved_in_time(self):
        grid = Grid(1, 3.0, 2048)
        early = barenblatt(grid, 2.0, 1.0).integral()
        late = barenblatt(grid, 2.0, 2.0).integral()
        assert late == pytest.approx(early, rel=1e-3)

    def test_profile_is_even(self):
        values = barenblatt(Grid(2, 2.0, 64), 2.0, 1.0).values
        assert np.allclose(values, values[::-1, :], rtol=0.0, atol=1e-12)
        assert np.allclose(values, values[:, ::-1], rtol=0.0, atol=1e-12)

    def test_residual_vanishes_under_refinement(self):
        gamma, t, h = 2.0, 1.0, 1e-3
        radius = barenblatt_support_radius(gamma, 1, t, 1.0)
        residuals = []
        for cells in (256, 512):
            grid = Grid(1, 3.0, cells)
            n = barenblatt(grid, gamma, t)
            time_derivative = (barenblatt(grid, gamma, t + h).values
                               - barenblatt(grid, gamma, t - h).values) / (2.0 * h)
            flux = gamma / (gamma + 1.0) * laplacian(Field(grid, n.values ** (gamma + 1.0))).values
            inside = np.abs(grid.centers()) < 0.8 * radius
            residuals.append(np.max(np.abs(time_derivative - flux)[inside]))
        assert residuals[1] < 1e-3
        assert residuals[1] <= 0.5 * residuals[0]


class TestInitialData:
    def test_homeostatic_check(self, model):
        grid = Grid(1, 2.0, 16)
        data = InitialData(Field.constant(grid, 1.5), Field.constant(grid, 0.0))
        with pytest.raises(ModelError):
            data.check_homeostatic(model)

    def test_gaussian_floor_splits_by_fraction(self, model):
        grid = Grid(1, 2.0, 16)
        data = InitialData(Field.constant(grid, 0.3), Field.constant(grid, 0.1))
        floored = gaussian_floor(data, 0.1, model)
        added = floored.total.values - data.total.values
        assert np.allclose(added, 0.1 * np.exp(-0.5 * grid.centers() ** 2))
        assert np.allclose(floored.n1_0.values / floored.total.values, 0.75)

    def test_floor_breaking_homeostasis(self, model):
        grid = Grid(1, 2.0, 16)
        data = InitialData(Field.constant(grid, 0.5), Field.constant(grid, 0.5))
        with pytest.raises(FloorBreaksHomeostatic):
            gaussian_floor(data, 0.01, model)

    def test_zero_floor_is_identity(self, model):
        grid = Grid(1, 2.0, 16)
        data = InitialData(Field.constant(grid, 0.5), Field.constant(grid, 0.5))
        assert gaussian_floor(data, 0.0, model) is data


class TestSubsolution:
    def test_rate_for_default_model(self, model):
        c = subsolution_rate(model, 2.0, 0.1)
        assert c == pytest.approx(1.02)

    def test_rate_satisfies_inequality(self, model):
        c = subsolution_rate(model, 2.0, 0.1)
        radius = np.linspace(0.0, 6.0, 301)
        assert np.all(subsolution_residual(c, radius, 0.0, 2.0, 0.1, model.R_inf_norm) <= 1e-12)

    def test_reaction_free_rate(self):
        model = ReactionModel(growth_rate=0.0)
        assert subsolution_rate(model, 2.0, 1e-2) == pytest.approx(2e-4)
        assert subsolution_rate(model, 2.0, 1e-2, dim=2) == pytest.approx(4e-4)


@pytest.mark.parametrize("gamma", [1.5, 2.0, 3.0])
def test_pressure_is_monotone(gamma):
    grid = Grid(1, 1.0, 64)
    rng = np.random.default_rng(3)
    low = rng.uniform(0.0, 1.0, grid.shape)
    high = low + rng.uniform(0.0, 0.5, grid.shape)
    assert np.all(pressure(Field(grid, low), gamma).values <= pressure(Field(grid, high), gamma).values)


def test_split_rate_cancellation_constant():
    model = ReactionModel(family=ReactionFamily.LINEAR_SPLIT_RATE, kappa=0.5)
    report = validate_assumptions(model, 1)
    assert report.passes_7_cancellation
    assert report.estimated_C_H == pytest.approx(0.25, rel=1e-3)


def test_shared_rate_ignores_fraction(model):
    p = np.linspace(0.0, 1.5, 31)
    assert np.array_equal(R_total(model, 0.0, p), R_total(model, 1.0, p))
