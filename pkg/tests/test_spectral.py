"""Tests for the eigenvalue analysis: two-box matrix, modal quartic, phases."""

import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptdimer import (
    CoupledParams,
    DomainError,
    PhaseLabel,
    TwoBoxParams,
    classify_phase,
    critical_damping,
    modal_eigenvalues,
    phase_margin,
    two_box_critical_coupling,
    two_box_eigenvalues,
)
from ptdimer.core import Tolerances
from ptdimer.spectral import (
    QuarticCoefficients,
    characteristic_coefficients,
    modal_report_json,
    quartic_root_oracle,
)


def multiset_gap(a, b) -> float:
    """Largest nearest-neighbour distance pairing two equal-size multisets."""
    b = list(b)
    assert len(list(a)) == len(b)
    worst = 0.0
    for z in a:
        j = min(range(len(b)), key=lambda k: abs(b[k] - z))
        worst = max(worst, abs(b[j] - z))
        b.pop(j)
    return worst


def two_box_matrix(tb: TwoBoxParams) -> np.ndarray:
    diag = tb.magnitude * cmath.exp(1j * tb.theta)
    return np.array([[diag, tb.coupling], [tb.coupling, diag.conjugate()]])


class TestTwoBox:
    def test_strong_coupling_real_pair(self):
        tb = TwoBoxParams(magnitude=1.0, theta=math.pi / 2, coupling=1.5)
        spectrum = two_box_eigenvalues(tb)
        assert spectrum.phase is PhaseLabel.UNBROKEN
        expected = {math.sqrt(1.25), -math.sqrt(1.25)}
        assert multiset_gap(spectrum.eigenvalues, expected) < 1e-15

    def test_weak_coupling_conjugate_pair(self):
        tb = TwoBoxParams(magnitude=1.0, theta=math.pi / 2, coupling=0.5)
        spectrum = two_box_eigenvalues(tb)
        assert spectrum.phase is PhaseLabel.BROKEN
        e1, e2 = spectrum.eigenvalues
        assert abs(e1 - e2.conjugate()) < 1e-15
        assert abs(e1.imag) > 0.1

    def test_critical_coupling_formula(self):
        tb = TwoBoxParams(magnitude=2.0, theta=0.7, coupling=0.0)
        assert two_box_critical_coupling(tb) == pytest.approx(
            2.0 * math.sin(0.7), abs=1e-15
        )

    def test_exceptional_band(self):
        gc = two_box_critical_coupling(TwoBoxParams(1.0, 1.0, 0.0))
        at_critical = two_box_eigenvalues(TwoBoxParams(1.0, 1.0, gc))
        assert at_critical.phase is PhaseLabel.EXCEPTIONAL
        outside = two_box_eigenvalues(TwoBoxParams(1.0, 1.0, gc + 1e-3))
        assert outside.phase is PhaseLabel.UNBROKEN

    def test_matches_direct_eigensolve(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            tb = TwoBoxParams(
                magnitude=rng.uniform(0.1, 3.0),
                theta=rng.uniform(0.05, math.pi - 0.05),
                coupling=rng.uniform(-3.0, 3.0),
            )
            direct = np.linalg.eigvals(two_box_matrix(tb))
            assert multiset_gap(two_box_eigenvalues(tb).eigenvalues, direct) < 1e-12

    def test_reality_exactly_tracks_criticality(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            tb = TwoBoxParams(
                magnitude=rng.uniform(0.1, 3.0),
                theta=rng.uniform(0.05, math.pi - 0.05),
                coupling=rng.uniform(-3.0, 3.0),
            )
            gc = two_box_critical_coupling(tb)
            if abs(abs(tb.coupling) - gc) < 1e-6:
                continue
            spectrum = two_box_eigenvalues(tb)
            is_real = max(abs(z.imag) for z in spectrum.eigenvalues) < 1e-12
            assert is_real == (abs(tb.coupling) > gc)


class TestQuartic:
    def test_coefficients(self):
        c = characteristic_coefficients(CoupledParams(0.3, 0.4))
        assert (c.c4, c.c2, c.c0) == (1.0, 2.0 - 0.4**2, 1.0 - 0.3**2)

    def test_oracle_fourth_roots_of_unity(self):
        roots = quartic_root_oracle(QuarticCoefficients(1.0, 0.0, -1.0))
        assert multiset_gap(roots, [1, -1, 1j, -1j]) < 1e-12

    def test_oracle_factored_quartic(self):
        # (E^2 - 1)(E^2 - 4) = E^4 - 5E^2 + 4
        roots = quartic_root_oracle(QuarticCoefficients(1.0, -5.0, 4.0))
        assert multiset_gap(roots, [1, -1, 2, -2]) < 1e-12

    def test_uncoupled_lossless_spectrum(self):
        spectrum = modal_eigenvalues(CoupledParams(0.0, 0.0))
        assert multiset_gap(spectrum.eigenvalues, [1j, -1j, 1j, -1j]) < 1e-15
        assert spectrum.phase is PhaseLabel.EXCEPTIONAL  # degenerate pair

    def test_paper_lossless_splitting(self):
        spectrum = modal_eigenvalues(CoupledParams(0.075, 0.0))
        expected = [
            1j * math.sqrt(1.075), -1j * math.sqrt(1.075),
            1j * math.sqrt(0.925), -1j * math.sqrt(0.925),
        ]
        assert multiset_gap(spectrum.eigenvalues, expected) < 1e-14
        assert spectrum.phase is PhaseLabel.UNBROKEN

    def test_broken_point_has_real_parts(self):
        spectrum = modal_eigenvalues(CoupledParams(0.075, 0.2))
        assert spectrum.phase is PhaseLabel.BROKEN
        assert max(z.real for z in spectrum.eigenvalues) > 1e-3

    def test_matches_oracle_sample(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            p = CoupledParams(rng.uniform(0, 1.5), rng.uniform(0, 1.5))
            oracle = quartic_root_oracle(characteristic_coefficients(p))
            assert multiset_gap(modal_eigenvalues(p).eigenvalues, oracle) < 1e-10

    def test_vieta_identities(self):
        rng = np.random.default_rng(14)
        for _ in range(300):
            p = CoupledParams(rng.uniform(0, 1.5), rng.uniform(0, 1.5))
            c = characteristic_coefficients(p)
            ev = modal_eigenvalues(p).eigenvalues
            e_a_sq, e_b_sq = ev[0] ** 2, ev[2] ** 2
            assert abs(e_a_sq + e_b_sq + c.c2) < 1e-12
            assert abs(e_a_sq * e_b_sq - c.c0) < 1e-12

    def test_pt_closure_under_negation_and_conjugation(self):
        rng = np.random.default_rng(15)
        for _ in range(300):
            p = CoupledParams(rng.uniform(0, 1.5), rng.uniform(0, 1.5))
            ev = modal_eigenvalues(p).eigenvalues
            assert multiset_gap(ev, [-z for z in ev]) < 1e-12
            assert multiset_gap(ev, [z.conjugate() for z in ev]) < 1e-12


class TestPhaseClassification:
    def test_unbroken_means_imaginary(self):
        rng = np.random.default_rng(16)
        checked = 0
        while checked < 200:
            p = CoupledParams(rng.uniform(0.01, 0.99), rng.uniform(0, 1.4))
            label = classify_phase(p)
            ev = modal_eigenvalues(p).eigenvalues
            max_re = max(abs(z.real) for z in ev)
            if label is PhaseLabel.UNBROKEN:
                assert max_re <= 1e-9
                checked += 1
            elif label is PhaseLabel.BROKEN:
                assert max_re >= Tolerances().boundary / 4
                checked += 1

    def test_margin_sign_tracks_phase(self):
        eps = 0.3
        ac = critical_damping(eps)
        assert phase_margin(CoupledParams(eps, 0.5 * ac)) < 0
        assert phase_margin(CoupledParams(eps, 1.5 * ac)) > 0
        assert abs(phase_margin(CoupledParams(eps, ac))) < 1e-12

    def test_exceptional_at_critical_damping(self):
        eps = 0.3
        assert classify_phase(CoupledParams(eps, critical_damping(eps))) \
            is PhaseLabel.EXCEPTIONAL

    def test_wide_tolerance_band_widens_exceptional(self):
        eps = 0.3
        ac = critical_damping(eps)
        tol = Tolerances(ep=1e-2, boundary=1e-2, real=1e-9)
        assert classify_phase(CoupledParams(eps, ac * 1.001), tol) \
            is PhaseLabel.EXCEPTIONAL


class TestCriticalDamping:
    def test_frozen_value_at_paper_epsilon(self):
        assert critical_damping(0.075) == pytest.approx(
            0.07505286458281879, abs=1e-15
        )

    def test_zero_coupling_gives_zero(self):
        assert critical_damping(0.0) == 0.0

    @given(st.floats(min_value=1e-3, max_value=0.999999))
    @settings(max_examples=100, deadline=None)
    def test_equivalent_closed_forms(self, eps):
        # sqrt(1+eps) - sqrt(1-eps) == sqrt(2(1 - sqrt(1-eps^2)))
        direct = math.sqrt(2.0 * (1.0 - math.sqrt(1.0 - eps * eps)))
        assert critical_damping(eps) == pytest.approx(direct, rel=1e-10)

    def test_small_coupling_asymptotics(self):
        # a_crit ~ eps for small eps; the stable form keeps full precision
        assert critical_damping(1e-8) == pytest.approx(1e-8, rel=1e-12)

    @given(st.floats(min_value=1e-2, max_value=0.999))
    @settings(max_examples=50, deadline=None)
    def test_sits_on_the_phase_boundary(self, eps):
        ac = critical_damping(eps)
        assert classify_phase(CoupledParams(eps, ac * 0.99)) \
            is PhaseLabel.UNBROKEN
        assert classify_phase(CoupledParams(eps, ac * 1.01)) \
            is PhaseLabel.BROKEN

    @pytest.mark.parametrize("eps", [-0.1, 1.0, 1.5, math.inf])
    def test_domain_is_half_open_unit_interval(self, eps):
        with pytest.raises(DomainError):
            critical_damping(eps)


class TestReport:
    def test_json_shape(self):
        report = json.loads(modal_report_json(modal_eigenvalues(
            CoupledParams(0.075, 0.0)
        )))
        assert set(report) == {"eigenvalues", "phase", "boundary_distance"}
        assert report["phase"] == "unbroken"
        assert len(report["eigenvalues"]) == 4
        assert all(len(pair) == 2 for pair in report["eigenvalues"])
