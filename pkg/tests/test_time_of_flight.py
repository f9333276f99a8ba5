"""Tests for the complex-potential time-of-flight integral and its engines."""

import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptdimer import (
    BranchError,
    ConvergenceError,
    SingularityError,
    TofRequest,
    ValidationError,
    potential,
    tail_bound,
    tail_exponent,
    time_of_flight,
)
from ptdimer.time_of_flight import (
    adaptive_gauss_kronrod,
    fixed_graded_legendre,
    tof_report_json,
)


class TestPotential:
    @pytest.mark.parametrize("x,eps,expected", [
        (1.0, 1.0, 1j),          # |1|^3 e^{i pi/2}
        (1.0, 2.0, -1.0),        # |1|^4 e^{i pi}
        (-2.0, 0.0, 4.0),        # plain harmonic branch
        (0.0, 1.0, 0.0),
        (2.0, 0.0, 4.0),
    ])
    def test_reference_values(self, x, eps, expected):
        assert cmath.isclose(potential(x, eps), expected, abs_tol=1e-14)

    def test_origin_needs_positive_exponent(self):
        with pytest.raises(BranchError):
            potential(0.0, -2.0)
        with pytest.raises(BranchError):
            potential(0.0, -2.5)

    @given(
        x=st.floats(min_value=1e-3, max_value=1e3),
        eps=st.floats(min_value=-1.9, max_value=4.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_left_right_values_are_conjugate(self, x, eps):
        left, right = potential(-x, eps), potential(x, eps)
        assert cmath.isclose(left, right.conjugate(), rel_tol=1e-12)


class TestTailAnalysis:
    @pytest.mark.parametrize("eps,exponent,convergent", [
        (1.0, 1.5, True),
        (0.5, 1.25, True),
        (0.0, 1.0, False),
        (-0.5, 0.75, False),
    ])
    def test_exponent_and_convergence(self, eps, exponent, convergent):
        behaviour = tail_exponent(eps)
        assert behaviour.exponent == pytest.approx(exponent, abs=1e-15)
        assert behaviour.convergent is convergent

    def test_bound_formula(self):
        assert tail_bound(1.0, 1e4) == pytest.approx(0.04, rel=1e-12)
        assert tail_bound(0.5, 1e4) == pytest.approx(8 * 1e4**-0.25, rel=1e-12)

    @pytest.mark.parametrize("eps", [0.0, -0.5, -1.0])
    def test_bound_infinite_for_divergent_tails(self, eps):
        assert tail_bound(eps, 1e4) == math.inf


class TestAdaptiveEngine:
    def test_smooth_gaussian(self):
        value, err = adaptive_gauss_kronrod(
            lambda x: np.exp(-x * x), -8.0, 8.0, 1e-12
        )
        assert abs(value - math.sqrt(math.pi)) < 1e-12
        assert err < 1e-12

    @pytest.mark.parametrize("energy", [1.0, 2.5, 7.0, 0.3, 13.7])
    def test_endpoint_singularities_reach_pi(self, energy):
        # arcsine mass: integral of 1/sqrt(E - x^2) between turning points
        half = math.sqrt(energy)

        def f(x):
            return 1.0 / np.sqrt(energy - x * x)

        value, err = adaptive_gauss_kronrod(f, -half, half, 1e-8)
        assert abs(value - math.pi) < 1e-8
        assert err <= 1e-8

    def test_unresolvable_tolerance_raises(self):
        with pytest.raises(ConvergenceError):
            adaptive_gauss_kronrod(
                lambda x: 1.0 / np.sqrt(np.abs(1.0 - x * x) + 0j),
                -1.0, 1.0, 1e-300,
            )

    def test_interior_pole_raises_instead_of_lying(self):
        with pytest.raises(ConvergenceError):
            adaptive_gauss_kronrod(lambda x: 1.0 / (x - 0.3), -1.0, 1.0, 1e-10)

    def test_error_estimate_is_honest_for_the_arcsine_family(self):
        for energy in (1.0, 5.0):
            half = math.sqrt(energy)
            value, err = adaptive_gauss_kronrod(
                lambda x: 1.0 / np.sqrt(energy - x * x), -half, half, 1e-9
            )
            assert abs(value - math.pi) <= err <= 1e-9


class TestTimeOfFlight:
    def test_request_validation_collects_problems(self):
        with pytest.raises(ValidationError) as excinfo:
            TofRequest(epsilon=-3.0, energy=0.0, cutoff=1.0, target_accuracy=0.0)
        fields = {f for f, _ in excinfo.value.violations}
        assert fields == {"epsilon", "energy", "cutoff", "target_accuracy"}

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValidationError):
            time_of_flight(TofRequest(epsilon=1.0), scheme="simpson")

    def test_engines_agree_on_convergent_case(self):
        req = TofRequest(epsilon=1.0, energy=1.0, cutoff=1e4,
                         target_accuracy=1e-6)
        adaptive = time_of_flight(req, scheme="adaptive")
        fixed = time_of_flight(req, scheme="fixed")
        assert abs(adaptive.value - fixed.value) / abs(fixed.value) < 1e-6
        assert adaptive.value.real == pytest.approx(4.829017024527686, abs=1e-8)

    def test_engines_agree_on_sharper_cusp(self):
        req = TofRequest(epsilon=0.5, energy=1.0, cutoff=1e4,
                         target_accuracy=1e-6)
        adaptive = time_of_flight(req, scheme="adaptive")
        fixed = time_of_flight(req, scheme="fixed")
        assert abs(adaptive.value - fixed.value) / abs(fixed.value) < 1e-6

    def test_cutoff_doubling_lies_inside_tail_bound(self):
        base = time_of_flight(TofRequest(epsilon=1.0, cutoff=1e4), scheme="fixed")
        doubled = time_of_flight(TofRequest(epsilon=1.0, cutoff=2e4),
                                 scheme="fixed")
        assert abs(doubled.value - base.value) <= base.tail_bound

    def test_imaginary_part_cancels_by_symmetry(self):
        rng = np.random.default_rng(31)
        for _ in range(6):
            eps = float(rng.uniform(0.1, 2.0))
            result = time_of_flight(TofRequest(epsilon=eps, cutoff=1e3),
                                    scheme="fixed")
            assert abs(result.value.imag) < 1e-12 * abs(result.value.real)

    @pytest.mark.parametrize("eps", [-0.9, -0.5, -0.2, -0.1])
    def test_divergent_exponents_grow_geometrically(self, eps):
        values = [
            time_of_flight(TofRequest(epsilon=eps, cutoff=100.0 * 2**k),
                           scheme="fixed").value.real
            for k in range(5)
        ]
        increments = np.diff(values)
        assert (increments > 0).all()
        ratios = increments[1:] / increments[:-1]
        expected = 2.0 ** (-eps / 2.0)
        np.testing.assert_allclose(ratios, expected, rtol=0.10)

    def test_convergence_flag_tracks_tail_bound(self):
        loose = time_of_flight(TofRequest(epsilon=1.0, cutoff=1e4,
                                          target_accuracy=0.1))
        assert loose.converged  # tail 0.04 <= 0.05
        tight = time_of_flight(TofRequest(epsilon=1.0, cutoff=1e4,
                                          target_accuracy=1e-6))
        assert not tight.converged

    def test_overflowing_potential_raises_singularity_error(self):
        with pytest.raises(SingularityError):
            time_of_flight(TofRequest(epsilon=600.0, cutoff=1e4))

    def test_fixed_scheme_matches_arcsine_normalisation(self):
        # eps = 0 inside the truncated integral but away from turning
        # points: the integrand is real-analytic on (1, L], so both
        # engines integrate the same well-defined truncated quantity.
        req = TofRequest(epsilon=2.0, energy=1.0, cutoff=1e3,
                         target_accuracy=1e-6)
        adaptive = time_of_flight(req, scheme="adaptive")
        fixed = time_of_flight(req, scheme="fixed")
        assert abs(adaptive.value - fixed.value) / abs(fixed.value) < 1e-6

    def test_report_round_trips_to_json(self):
        result = time_of_flight(TofRequest(epsilon=1.0, cutoff=1e4))
        payload = json.loads(tof_report_json(result))
        assert set(payload) == {"T", "tail_bound", "converged", "L",
                                "epsilon", "E"}
        assert payload["T"][0] == result.value.real
        assert payload["L"] == 1e4
        assert payload["converged"] is False


def test_fixed_engine_handles_plain_polynomial():
    value = fixed_graded_legendre(lambda x: x * x, 2.0)
    assert complex(value).real == pytest.approx(16.0 / 3.0, rel=1e-12)
