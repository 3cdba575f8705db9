"""Domain types and scalar rate quantities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgtsim.model import (
    DegenerateDenominatorError,
    MutationKernel,
    Population,
    RateSet,
    TraitDomainError,
    TraitSpace,
    TransferModel,
    TwoTraitParams,
    flux_rate,
    growth_rate,
    logistic_equilibrium,
    transfer_kernel_h,
)

SPACE = TraitSpace(0.0, 4.0)


def campaign_rates(tau="0.7*(x>y)"):
    return RateSet.from_expressions(b="4 - x", d="1", C="0.5", tau=tau, beta=0.0, mu=1.0)


class TestGrowthRate:
    def test_campaign_value_at_one(self):
        assert growth_rate(1.0, campaign_rates(), SPACE) == 2.0

    def test_campaign_value_at_zero(self):
        assert growth_rate(0.0, campaign_rates(), SPACE) == 3.0

    def test_constant_offset(self):
        rates = RateSet.from_expressions(b="x + 2.5", d="x", C="1", tau="0", beta=1.0, mu=0.0)
        for x in (0.0, 1.3, 4.0):
            assert growth_rate(x, rates, SPACE) == pytest.approx(2.5)

    def test_domain_error(self):
        with pytest.raises(TraitDomainError):
            growth_rate(5.0, campaign_rates(), SPACE)


class TestLogisticEquilibrium:
    def test_campaign_density_and_count(self):
        nbar = logistic_equilibrium(1.0, campaign_rates(), SPACE)
        assert nbar == pytest.approx(4.0)
        assert 1000 * nbar == pytest.approx(4000)

    def test_optimal_trait_count(self):
        nbar = logistic_equilibrium(0.0, campaign_rates(), SPACE)
        assert nbar == pytest.approx(6.0)
        assert 1000 * nbar == pytest.approx(6000)

    def test_ratio_one(self):
        rates = RateSet.from_expressions(b="3", d="1", C="2", tau="0", beta=1.0, mu=0.0)
        assert logistic_equilibrium(2.0, rates, SPACE) == pytest.approx(1.0)


class TestTransferKernel:
    def test_frequency_dependent_value(self):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="0.7", beta=0.0, mu=1.0)
        assert transfer_kernel_h(1.0, 2.0, 4.0, rates) == pytest.approx(0.175)

    def test_zero_numerator(self):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="0", beta=0.0, mu=1.0)
        for mass in (0.5, 1.0, 10.0):
            assert transfer_kernel_h(1.0, 2.0, mass, rates) == 0.0

    def test_density_dependent_is_mass_free(self):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="5", beta=1.0, mu=0.0)
        assert transfer_kernel_h(1.0, 2.0, 0.0, rates) == pytest.approx(5.0)
        assert transfer_kernel_h(1.0, 2.0, 123.0, rates) == pytest.approx(5.0)

    def test_degenerate_denominator(self):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="1", beta=0.0, mu=1.0)
        with pytest.raises(DegenerateDenominatorError):
            transfer_kernel_h(1.0, 2.0, 0.0, rates)

    @given(st.floats(0.1, 50), st.floats(0.1, 50))
    @settings(max_examples=60, deadline=None)
    def test_nonincreasing_in_mass_when_mu_positive(self, m1, m2):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="0.7", beta=0.3, mu=1.0)
        lo, hi = sorted((m1, m2))
        assert transfer_kernel_h(1.0, 2.0, hi, rates) <= transfer_kernel_h(1.0, 2.0, lo, rates)


class TestFluxRate:
    def test_unilateral(self):
        rates = campaign_rates()
        # donor 1.5 (larger trait) transfers at 0.7; the reverse is silent
        assert flux_rate(1.5, 0.5, rates, SPACE) == pytest.approx(0.7)
        assert flux_rate(0.5, 1.5, rates, SPACE) == pytest.approx(-0.7)

    def test_diagonal_zero(self):
        rates = campaign_rates()
        for x in (0.0, 1.0, 3.7):
            assert flux_rate(x, x, rates, SPACE) == 0.0

    def test_exponential_kernel(self):
        rates = RateSet.from_expressions(
            b="4 - x", d="0", C="0.5", tau="exp(x - y)", beta=0.0, mu=1.0
        )
        h = 0.35
        x = 1.2
        expected = np.exp(h) - np.exp(-h)
        assert flux_rate(x + h, x, rates, SPACE) == pytest.approx(expected, rel=1e-12)

    @given(st.floats(0, 4), st.floats(0, 4))
    @settings(max_examples=100, deadline=None)
    def test_antisymmetry(self, x, y):
        rates = RateSet.from_expressions(
            b="4 - x", d="0", C="0.5", tau="exp(x - y) + 0.3*(x>y)", beta=0.0, mu=1.0
        )
        assert flux_rate(x, y, rates) == pytest.approx(-flux_rate(y, x, rates), abs=1e-12)


class TestRateSetValidation:
    def test_accepts_campaign_when_lenient(self):
        campaign_rates().validate(SPACE, strict_growth=False)

    def test_strict_rejects_negative_growth_region(self):
        with pytest.raises(ValueError, match="growth"):
            campaign_rates().validate(SPACE, strict_growth=True)

    def test_rejects_equal_birth_death(self):
        rates = RateSet.from_expressions(b="2", d="2", C="1", tau="0", beta=1.0, mu=0.0)
        with pytest.raises(ValueError, match="growth"):
            rates.validate(TraitSpace(0.0, 1.0))

    def test_rejects_nonpositive_competition(self):
        rates = RateSet.from_expressions(b="2", d="1", C="x - 2", tau="0", beta=1.0, mu=0.0)
        with pytest.raises(ValueError, match="competition"):
            rates.validate(TraitSpace(0.0, 1.0))

    def test_rejects_negative_transfer(self):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="x - 2", beta=1.0, mu=0.0)
        with pytest.raises(ValueError, match="transfer"):
            rates.validate(TraitSpace(0.0, 1.0))

    def test_rejects_degenerate_regime(self):
        rates = RateSet.from_expressions(b="2", d="1", C="1", tau="0", beta=0.0, mu=0.0)
        with pytest.raises(ValueError, match="beta and mu"):
            rates.validate(TraitSpace(0.0, 1.0))

    def test_positivity_on_grid_for_accepted_rates(self):
        rates = RateSet.from_expressions(
            b="2 + x", d="1", C="0.5 + 0.1*x*y", tau="0.2", beta=1.0, mu=1.0
        )
        space = TraitSpace(0.0, 2.0)
        rates.validate(space)
        grid = space.grid(257)
        r = rates.b(grid) - rates.d(grid)
        nbar = r / rates.C(grid, grid)
        assert np.all(r > 0)
        assert np.all(nbar > 0)


class TestMutationKernel:
    def test_resample_lands_inside(self):
        kern = MutationKernel(p=0.1, sigma=0.5, boundary_policy="resample")
        rng = np.random.default_rng(0)
        space = TraitSpace(0.0, 1.0)
        draws = [kern.sample(rng, 0.05, space) for _ in range(500)]
        assert all(0.0 <= z <= 1.0 for z in draws)

    def test_clamp_lands_inside(self):
        kern = MutationKernel(p=0.1, sigma=2.0, boundary_policy="clamp")
        rng = np.random.default_rng(0)
        space = TraitSpace(0.0, 1.0)
        draws = [kern.sample(rng, 0.5, space) for _ in range(500)]
        assert all(0.0 <= z <= 1.0 for z in draws)
        assert any(z in (0.0, 1.0) for z in draws)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            MutationKernel(p=1.5, sigma=0.1)
        with pytest.raises(ValueError):
            MutationKernel(p=0.1, sigma=0.0)
        with pytest.raises(ValueError):
            MutationKernel(p=0.1, sigma=0.1, boundary_policy="bounce")


class TestPopulation:
    def test_counts_and_mass(self):
        pop = Population([0.5, 1.5], [300, 200])
        assert pop.total == 500
        assert pop.mass(1000) == pytest.approx(0.5)
        assert pop.mean_trait() == pytest.approx(0.9)

    def test_rejects_duplicate_traits(self):
        with pytest.raises(ValueError, match="distinct"):
            Population([1.0, 1.0], [1, 2])

    def test_rejects_nonpositive_counts(self):
        with pytest.raises(ValueError, match="positive"):
            Population([1.0], [0])

    def test_empty_population(self):
        pop = Population.from_pairs([])
        assert pop.total == 0
        with pytest.raises(ValueError):
            pop.mean_trait()


def test_transfer_model_replacement_only():
    assert TransferModel().map_kind == "replacement"
    with pytest.raises(NotImplementedError):
        TransferModel(map_kind="symmetric_swap")


def test_trait_space_validation():
    with pytest.raises(ValueError):
        TraitSpace(1.0, 1.0)
    with pytest.raises(ValueError):
        TraitSpace(2.0, 1.0)


def test_two_trait_params_swap_is_involution():
    params = TwoTraitParams(
        bx=1.0, dx=0.1, by=0.7, dy=0.0, cxx=1.0, cxy=2.0, cyx=0.5, cyy=1.5,
        tau_xy=0.2, tau_yx=0.6, beta=1.0, mu=0.5,
    )
    assert params.swapped().swapped() == params
    assert params.alpha_xy == pytest.approx(-0.4)
    assert params.swapped().alpha_xy == pytest.approx(0.4)
