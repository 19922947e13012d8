"""Oracle tests for the spiked sample-covariance analytics."""

import math

import numpy as np
import pytest

from spikelab.errors import ConvergenceError, DomainError, SpecError
from spikelab.free_multiplicative import (
    MultiplicativeContext,
    W,
    Z,
    classify_spike,
    companion_g,
    density,
    fixed_point_g,
    mass_at_zero,
    mp_density,
    outlier_set_intervals,
    support,
)
from spikelab.measure import AtomicMeasure

DELTA1 = AtomicMeasure(((1.0, 1.0),))
DELTA0 = AtomicMeasure(((0.0, 1.0),))
DELTA2 = AtomicMeasure(((2.0, 1.0),))
HALF01 = AtomicMeasure(((0.0, 0.5), (1.0, 0.5)))
TWO_SPREAD = AtomicMeasure(((1.0, 0.5), (4.0, 0.5)))


def ctx(nu, c):
    return MultiplicativeContext(nu, c)


class TestContext:
    def test_rejects_nonpositive_c(self):
        with pytest.raises(SpecError):
            ctx(DELTA1, 0.0)
        with pytest.raises(SpecError):
            ctx(DELTA1, -0.5)

    def test_rejects_negative_atoms(self):
        signed = AtomicMeasure(((-1.0, 0.5), (1.0, 0.5)))
        with pytest.raises(SpecError):
            ctx(signed, 1.0)

    def test_accepts_atom_at_zero(self):
        c = ctx(HALF01, 2.0)
        assert c.c == 2.0


class TestMpDensity:
    def test_center_value_square_case(self):
        # c=1: f(2) = sqrt(2*(4-2))/(2*pi*2) = 1/(2*pi)
        assert mp_density(1.0, 2.0) == pytest.approx(0.15915494309189535, abs=1e-15)

    def test_zero_outside_support(self):
        assert mp_density(1.0, 5.0) == 0.0
        assert mp_density(0.25, 0.2) == 0.0

    def test_zero_at_upper_edge(self):
        for c in (0.25, 1.0, 2.0, 4.0):
            assert mp_density(c, (1.0 + math.sqrt(c)) ** 2) == 0.0

    def test_positive_inside(self):
        assert mp_density(1.0, 3.9999) > 0.0

    def test_nonpositive_x_rejected(self):
        with pytest.raises(DomainError):
            mp_density(1.0, 0.0)
        with pytest.raises(DomainError):
            mp_density(1.0, -1.0)

    def test_continuous_mass_is_min_of_one_and_inverse_c(self):
        # the absolutely continuous part carries 1/c of the mass when c>1
        for c, target in ((0.25, 1.0), (4.0, 0.25)):
            lo = (1.0 - math.sqrt(c)) ** 2
            hi = (1.0 + math.sqrt(c)) ** 2
            xs = np.linspace(lo, hi, 4001)
            f = np.array([mp_density(c, x) for x in xs])
            assert abs(np.trapezoid(f, xs) - target) < 1e-3


class TestZ:
    def test_single_atom_spike_location(self):
        # theta=3, c=1: Z(1/3) = 3*(1 + 1/(3-1)) = 4.5
        assert Z(ctx(DELTA1, 1.0), 1.0 / 3.0) == pytest.approx(4.5, abs=1e-12)

    def test_upper_edge_algebra(self):
        c = 0.3
        theta = 1.0 + math.sqrt(c)
        assert Z(ctx(DELTA1, c), 1.0 / theta) == pytest.approx((1.0 + math.sqrt(c)) ** 2, abs=1e-12)

    def test_vanishing_c_leaves_spike_in_place(self):
        assert Z(ctx(DELTA2, 1e-9), 0.2) == pytest.approx(5.0, abs=1e-7)

    def test_pole_at_zero_argument(self):
        with pytest.raises(DomainError):
            Z(ctx(DELTA1, 1.0), 0.0)

    def test_pole_when_inverse_hits_atom(self):
        with pytest.raises(DomainError):
            Z(ctx(DELTA2, 1.0), 0.5)
        with pytest.raises(DomainError):
            Z(ctx(DELTA2, 1.0), 0.5 + 1e-14)

    def test_atom_at_zero_is_not_a_pole(self):
        val = Z(ctx(HALF01, 1.0), 1e6)
        assert val == pytest.approx(1e-6 + 0.5 / (1.0 - 1e6), rel=1e-12)


class TestW:
    def test_single_atom_value(self):
        assert W(ctx(DELTA1, 1.0), 3.0) == pytest.approx(0.25, abs=1e-15)

    def test_boundary_equals_one(self):
        c = 0.49
        assert W(ctx(DELTA1, c), 1.7) == pytest.approx(1.0, abs=1e-12)
        assert W(ctx(DELTA1, c), 0.3) == pytest.approx(1.0, abs=1e-12)

    def test_zero_measure_gives_zero(self):
        assert W(ctx(DELTA0, 7.0), 5.0) == 0.0

    def test_atom_at_zero_contributes_nothing(self):
        assert W(ctx(HALF01, 0.3), 0.5) == pytest.approx(0.6, abs=1e-15)

    def test_negative_argument_allowed(self):
        assert W(ctx(DELTA1, 4.0), -1.0) == pytest.approx(1.0, abs=1e-15)

    def test_rejected_points(self):
        with pytest.raises(DomainError):
            W(ctx(DELTA1, 1.0), 0.0)
        with pytest.raises(DomainError):
            W(ctx(DELTA1, 1.0), 1.0)
        with pytest.raises(DomainError):
            W(ctx(HALF01, 1.0), 0.0)

    def test_derivative_identity_of_Z(self):
        # -u^2 + c*sum w t^2 u^2/(u-t)^2 must equal u^2*(W(u)-1)
        cases = [(DELTA1, 1.0), (TWO_SPREAD, 0.1), (HALF01, 2.0)]
        points = (-3.0, -0.7, 0.31, 2.6, 7.5)
        for nu, c in cases:
            context = ctx(nu, c)
            for u in points:
                if any(abs(u - t) < 1e-9 for t, _ in nu.atoms):
                    continue
                lhs = -u * u + c * sum(w * t * t * u * u / (u - t) ** 2 for t, w in nu.atoms)
                rhs = u * u * (W(context, u) - 1.0)
                assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


class TestClassifySpike:
    def test_bbp_outlier(self):
        v = classify_spike(ctx(DELTA1, 1.0), 3.0)
        assert v.is_outlier
        assert v.rho == pytest.approx(4.5, abs=1e-12)
        assert v.tau == pytest.approx(0.5, abs=1e-12)
        assert v.criterion_value == pytest.approx(0.25, abs=1e-12)

    def test_bbp_sticking(self):
        v = classify_spike(ctx(DELTA1, 1.0), 1.5)
        assert not v.is_outlier
        assert v.rho is None and v.tau is None
        assert v.criterion_value == pytest.approx(4.0, abs=1e-12)

    def test_phase_transition_flip(self):
        wide = ctx(DELTA1, 4.0)
        assert classify_spike(wide, 3.001).is_outlier
        assert not classify_spike(wide, 2.999).is_outlier

    def test_zero_bulk_spike(self):
        v = classify_spike(ctx(DELTA0, 2.0), 5.0)
        assert v.is_outlier
        assert v.rho == pytest.approx(5.0, abs=1e-12)
        assert v.tau == pytest.approx(1.0, abs=1e-12)

    def test_large_spike_overlap_tends_to_one(self):
        v = classify_spike(ctx(DELTA1, 1.0), 1e6)
        assert v.is_outlier
        assert 1.0 - 1e-5 < v.tau <= 1.0

    def test_nonpositive_theta_rejected(self):
        with pytest.raises(DomainError):
            classify_spike(ctx(DELTA1, 1.0), 0.0)
        with pytest.raises(DomainError):
            classify_spike(ctx(DELTA1, 1.0), -3.0)

    def test_theta_on_atom_rejected(self):
        with pytest.raises(DomainError):
            classify_spike(ctx(DELTA1, 1.0), 1.0)

    def test_multiplicity_carried_and_validated(self):
        assert classify_spike(ctx(DELTA1, 1.0), 3.0, multiplicity=4).multiplicity == 4
        with pytest.raises(SpecError):
            classify_spike(ctx(DELTA1, 1.0), 3.0, multiplicity=0)


class TestOutlierIntervals:
    def test_single_atom_small_c(self):
        ivs = outlier_set_intervals(ctx(DELTA1, 0.25))
        assert len(ivs) == 2
        assert ivs[0][0] == pytest.approx(0.0, abs=1e-9)
        assert ivs[0][1] == pytest.approx(0.5, abs=1e-9)
        assert ivs[1][0] == pytest.approx(1.5, abs=1e-9)
        assert ivs[1][1] == math.inf

    def test_single_atom_square_case(self):
        ivs = outlier_set_intervals(ctx(DELTA1, 1.0))
        assert len(ivs) == 1
        assert ivs[0][0] == pytest.approx(2.0, abs=1e-9)
        assert ivs[0][1] == math.inf

    def test_single_atom_large_c(self):
        ivs = outlier_set_intervals(ctx(DELTA1, 4.0))
        assert len(ivs) == 1
        assert ivs[0][0] == pytest.approx(3.0, abs=1e-9)

    def test_zero_measure_everything_positive(self):
        ivs = outlier_set_intervals(ctx(DELTA0, 2.0))
        assert ivs == [(0.0, math.inf)]

    def test_mixed_zero_and_one(self):
        ivs = outlier_set_intervals(ctx(HALF01, 1.0))
        assert len(ivs) == 2
        assert ivs[0][0] == pytest.approx(0.0, abs=1e-9)
        assert ivs[0][1] == pytest.approx(1.0 - 2.0 ** -0.5, abs=1e-9)
        assert ivs[1][0] == pytest.approx(1.0 + 2.0 ** -0.5, abs=1e-9)
        assert ivs[1][1] == math.inf

    def test_membership_matches_classification(self):
        context = ctx(DELTA1, 0.25)
        assert classify_spike(context, 0.25).is_outlier
        assert classify_spike(context, 2.0).is_outlier
        assert not classify_spike(context, 0.6).is_outlier
        assert not classify_spike(context, 1.4).is_outlier


class TestSupport:
    def test_marchenko_pastur_edges(self):
        for c in (0.25, 1.0, 4.0):
            sup = support(ctx(DELTA1, c))
            assert len(sup.intervals) == 1
            lo, hi = sup.intervals[0]
            assert lo == pytest.approx((1.0 - math.sqrt(c)) ** 2, abs=1e-8)
            assert hi == pytest.approx((1.0 + math.sqrt(c)) ** 2, abs=1e-8)

    def test_scaling(self):
        sup = support(ctx(DELTA2, 0.25))
        lo, hi = sup.intervals[0]
        assert lo == pytest.approx(0.5, abs=1e-8)
        assert hi == pytest.approx(4.5, abs=1e-8)

    def test_zero_measure_empty_support(self):
        sup = support(ctx(DELTA0, 3.0))
        assert sup.intervals == ()
        assert mass_at_zero(ctx(DELTA0, 3.0)) == 1.0

    def test_two_component_case(self):
        sup = support(ctx(TWO_SPREAD, 0.1))
        assert len(sup.intervals) == 2
        (a1, b1), (a2, b2) = sup.intervals
        assert 0.0 < a1 < b1 < a2 < b2
        assert b1 < 4.0 < b2

    def test_outlier_sits_off_support(self):
        sup = support(ctx(DELTA1, 1.0))
        assert not sup.contains(4.5)
        assert sup.distance_to_edge(4.5) == pytest.approx(0.5, abs=1e-8)


class TestMassAtZero:
    def test_cases(self):
        assert mass_at_zero(ctx(DELTA1, 2.0)) == pytest.approx(0.5, abs=1e-15)
        assert mass_at_zero(ctx(DELTA1, 0.5)) == 0.0
        assert mass_at_zero(ctx(DELTA0, 3.0)) == 1.0
        assert mass_at_zero(ctx(HALF01, 1.0)) == pytest.approx(0.5, abs=1e-15)
        assert mass_at_zero(ctx(HALF01, 4.0)) == pytest.approx(0.75, abs=1e-15)


class TestFixedPointG:
    def test_requires_upper_half_plane(self):
        with pytest.raises(DomainError):
            fixed_point_g(ctx(DELTA1, 1.0), 2.0 - 1.0j)
        with pytest.raises(DomainError):
            fixed_point_g(ctx(DELTA1, 1.0), 2.0)

    def test_zero_measure_closed_form(self):
        z = 2.0 + 1.0j
        assert fixed_point_g(ctx(DELTA0, 2.0), z) == pytest.approx(1.0 / z, abs=1e-12)

    def test_matches_mp_density_at_interior_point(self):
        g = fixed_point_g(ctx(DELTA1, 1.0), 2.0 + 1e-6j)
        assert -g.imag / math.pi == pytest.approx(mp_density(1.0, 2.0), abs=1e-3)

    def test_scaling_relation(self):
        z = 1.0 + 0.3j
        g2 = fixed_point_g(ctx(DELTA2, 0.7), z)
        g1 = fixed_point_g(ctx(DELTA1, 0.7), z / 2.0)
        assert g2 == pytest.approx(0.5 * g1, abs=1e-9)

    def test_moment_expansion_far_from_support(self):
        z = 50.0j
        g = fixed_point_g(ctx(DELTA1, 0.5), z)
        series = 1.0 / z + 1.0 / z ** 2 + 1.5 / z ** 3
        assert abs(g - series) < 1e-5

    def test_imaginary_part_negative(self):
        context = ctx(TWO_SPREAD, 0.1)
        for z in (0.5 + 1e-4j, 1.2 + 0.01j, 4.0 + 1e-5j, 10.0 + 1.0j):
            assert fixed_point_g(context, z).imag < 0.0

    def test_convergence_error_carries_diagnostics(self):
        with pytest.raises(ConvergenceError) as err:
            fixed_point_g(ctx(DELTA1, 1.0), 2.0 + 1e-8j, max_iter=2)
        assert err.value.iterations == 2
        assert err.value.residual is not None and err.value.residual > 0.0


class TestCompanionG:
    def test_square_case_equals_fixed_point(self):
        z = 1.3 + 0.2j
        assert companion_g(ctx(DELTA1, 1.0), z) == pytest.approx(
            fixed_point_g(ctx(DELTA1, 1.0), z), abs=1e-14
        )

    def test_inverts_outlier_map(self):
        # at x = Z(1/u) the companion transform returns 1/u
        context = ctx(DELTA1, 1.0)
        x = Z(context, 1.0 / 3.0)
        assert abs(companion_g(context, x + 1e-7j) - 1.0 / 3.0) < 1e-3

    def test_vanishing_c_limit(self):
        z = 3.0 + 0.5j
        assert abs(companion_g(ctx(DELTA1, 1e-8), z) - 1.0 / z) < 1e-6


class TestDensity:
    def test_matches_mp_closed_form_small_c(self):
        c = 0.5
        context = ctx(DELTA1, c)
        lo = (1.0 - math.sqrt(c)) ** 2
        hi = (1.0 + math.sqrt(c)) ** 2
        xs = np.concatenate([np.linspace(lo + 0.05, hi - 0.05, 35), [hi + 0.3, hi + 1.0]])
        for x, f in density(context, xs, eps=1e-6):
            assert abs(f - mp_density(c, x)) < 1e-2

    def test_matches_mp_closed_form_large_c(self):
        c = 2.0
        context = ctx(DELTA1, c)
        lo = (1.0 - math.sqrt(c)) ** 2
        hi = (1.0 + math.sqrt(c)) ** 2
        xs = np.linspace(lo + 0.05, hi - 0.05, 34)
        for x, f in density(context, xs, eps=1e-6):
            assert abs(f - mp_density(c, x)) < 1e-2

    def test_total_mass_with_atom(self):
        c = 2.0
        context = ctx(DELTA1, c)
        (lo, hi), = support(context).intervals
        m = 0.012
        xs = np.unique(
            np.concatenate(
                [
                    np.linspace(0.01, lo - m, 30),
                    np.linspace(lo + m, hi - m, 600),
                    np.linspace(hi + m, 7.0, 30),
                ]
            )
        )
        f = np.array([v for _, v in density(context, xs, eps=1e-6)])
        assert np.all(f >= 0.0)
        total = mass_at_zero(context) + np.trapezoid(f, xs)
        assert abs(total - 1.0) < 1e-2

    def test_two_component_profile(self):
        context = ctx(TWO_SPREAD, 0.1)
        (a1, b1), (a2, b2) = support(context).intervals
        mids = [(a1 + b1) / 2.0, (a2 + b2) / 2.0]
        gap_mid = (b1 + a2) / 2.0
        pts = dict(density(context, mids + [gap_mid], eps=1e-6))
        assert pts[mids[0]] > 1e-2
        assert pts[mids[1]] > 1e-2
        assert pts[gap_mid] < 1e-3

    def test_two_component_total_mass(self):
        context = ctx(TWO_SPREAD, 0.1)
        (a1, b1), (a2, b2) = support(context).intervals
        m = 0.012
        xs = np.unique(
            np.concatenate(
                [
                    np.linspace(max(a1 - 0.3, 0.01), a1 - m, 20),
                    np.linspace(a1 + m, b1 - m, 300),
                    np.linspace(b1 + m, a2 - m, 40),
                    np.linspace(a2 + m, b2 - m, 300),
                    np.linspace(b2 + m, b2 + 0.5, 20),
                ]
            )
        )
        f = np.array([v for _, v in density(context, xs, eps=1e-6)])
        total = mass_at_zero(context) + np.trapezoid(f, xs)
        assert abs(total - 1.0) < 1e-2

    def test_eps_validation(self):
        with pytest.raises(SpecError):
            density(ctx(DELTA1, 1.0), [2.0], eps=0.0)

    def test_grid_convergence_error_reports_index(self):
        with pytest.raises(ConvergenceError) as err:
            density(ctx(DELTA1, 1.0), [3.0, 2.0], max_iter=3)
        assert err.value.grid_index == 0
        assert err.value.residual is not None
