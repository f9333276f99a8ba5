"""Spectra and phase classification for the gain/loss models.

Two eigenproblems live here.

The *two-box* model is a 2x2 matrix with complex conjugate on-site terms
``m e^(+i theta)``, ``m e^(-i theta)`` and a real symmetric coupling
``g``; its eigenvalues are ``m cos(theta) +/- sqrt(g^2 - m^2 sin^2 theta)``,
so they turn real exactly when the coupling beats the critical value
``|m sin theta|``.

The *modal* problem comes from the coupled oscillator pair with balanced
linear gain and loss (rate ``a``, coupling ``epsilon``).  Inserting
``exp(E t)`` into the equations of motion gives a quartic in ``E`` that
is even, ``E^4 + (2 - a^2) E^2 + (1 - epsilon^2) = 0``, solved as a
quadratic in ``E^2``.  All four roots are purely imaginary (bounded,
oscillatory motion) exactly when

    (1)  a^4 - 4 a^2 + 4 epsilon^2 > 0, and
    (2)  a^2 - 2 + sqrt(a^4 - 4 a^2 + 4 epsilon^2) < 0,

and the boundary of that region in ``a`` at fixed ``epsilon < 1`` is
``a_crit = sqrt(2 (1 - sqrt(1 - epsilon^2)))``.

Branch convention: square roots of negative real numbers map to
``+i sqrt(|.|)``; genuinely complex arguments use the principal branch.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

from .core import (
    DEFAULT_TOLERANCES,
    CoupledParams,
    PhaseLabel,
    Tolerances,
    TwoBoxParams,
)
from .errors import ConvergenceError, DomainError

__all__ = [
    "TwoBoxSpectrum",
    "ModalSpectrum",
    "QuarticCoefficients",
    "two_box_eigenvalues",
    "two_box_critical_coupling",
    "characteristic_coefficients",
    "modal_eigenvalues",
    "phase_margin",
    "classify_phase",
    "critical_damping",
    "quartic_root_oracle",
    "modal_report_json",
]


def _branch_sqrt(v: float | complex) -> complex:
    """Square root with the package branch convention.

    Negative reals map to ``+i sqrt(|v|)``; complex arguments use the
    principal branch.  (``cmath.sqrt`` would send ``-4 - 0j`` to ``-2j``,
    which is why real inputs are handled explicitly.)
    """
    if isinstance(v, complex):
        if v.imag != 0.0:
            return cmath.sqrt(v)
        v = v.real
    if v >= 0.0:
        return complex(math.sqrt(v))
    return complex(0.0, math.sqrt(-v))


@dataclass(frozen=True)
class TwoBoxSpectrum:
    """Eigenvalue pair of the two-box matrix plus its phase label."""

    eigenvalues: tuple[complex, complex]
    phase: PhaseLabel


@dataclass(frozen=True)
class QuarticCoefficients:
    """Coefficients ``(c4, c2, c0)`` of an even quartic, with ``c4 = 1``."""

    c4: float
    c2: float
    c0: float


@dataclass(frozen=True)
class ModalSpectrum:
    """Four modal eigenvalues, phase label, and signed boundary margin.

    ``boundary_distance`` is the classification margin: negative inside
    the unbroken region, positive in the broken region, zero on the
    boundary.  Eigenvalues are ordered ``(+E_a, -E_a, +E_b, -E_b)`` with
    the ``+sqrt`` branch of ``E^2`` first.
    """

    eigenvalues: tuple[complex, complex, complex, complex]
    phase: PhaseLabel
    boundary_distance: float


def two_box_eigenvalues(
    tb: TwoBoxParams, tol: Tolerances = DEFAULT_TOLERANCES
) -> TwoBoxSpectrum:
    """Closed-form eigenvalues of the two-box matrix with a phase label.

    The label tracks the sign of ``g^2 - m^2 sin^2 theta``: positive
    (beyond the ``tol.ep`` band) gives two real eigenvalues (unbroken),
    negative gives a complex-conjugate pair (broken), and values inside
    the band are flagged exceptional.
    """
    radic = tb.coupling**2 - (tb.magnitude * math.sin(tb.theta)) ** 2
    centre = tb.magnitude * math.cos(tb.theta)
    root = _branch_sqrt(radic)
    if radic > tol.ep:
        phase = PhaseLabel.UNBROKEN
    elif radic < -tol.ep:
        phase = PhaseLabel.BROKEN
    else:
        phase = PhaseLabel.EXCEPTIONAL
    return TwoBoxSpectrum((centre + root, centre - root), phase)


def two_box_critical_coupling(tb: TwoBoxParams) -> float:
    """Coupling strength at which the two-box eigenvalues coalesce."""
    return abs(tb.magnitude * math.sin(tb.theta))


def characteristic_coefficients(p: CoupledParams) -> QuarticCoefficients:
    """Even-quartic coefficients of the modal problem for ``p``."""
    a = p.gain_loss_rate
    return QuarticCoefficients(1.0, 2.0 - a * a, 1.0 - p.epsilon * p.epsilon)


def modal_eigenvalues(
    p: CoupledParams, tol: Tolerances = DEFAULT_TOLERANCES
) -> ModalSpectrum:
    """All four modal eigenvalues via the quadratic in ``E^2``."""
    a, eps = p.gain_loss_rate, p.epsilon
    disc = a**4 - 4.0 * a**2 + 4.0 * eps**2
    sq = _branch_sqrt(disc)
    e2_plus = 0.5 * (a * a - 2.0 + sq)
    e2_minus = 0.5 * (a * a - 2.0 - sq)
    r_plus = _branch_sqrt(e2_plus)
    r_minus = _branch_sqrt(e2_minus)
    margin = phase_margin(p)
    if margin < -tol.boundary:
        phase = PhaseLabel.UNBROKEN
    elif margin > tol.boundary:
        phase = PhaseLabel.BROKEN
    else:
        phase = PhaseLabel.EXCEPTIONAL
    return ModalSpectrum(
        (r_plus, -r_plus, r_minus, -r_minus), phase, margin
    )


def phase_margin(p: CoupledParams) -> float:
    """Signed distance-like margin of ``p`` from the phase boundary.

    Both unbroken conditions are folded into one number: with
    ``d1 = a^4 - 4a^2 + 4 eps^2`` and ``d2 = a^2 - 2 + sqrt(d1)``, the
    margin is ``max(-d1, d2)`` when ``d1 >= 0`` and ``-d1`` otherwise.
    It is negative exactly when both conditions hold strictly and zero
    on the boundary curves.
    """
    a, eps = p.gain_loss_rate, p.epsilon
    d1 = a**4 - 4.0 * a**2 + 4.0 * eps**2
    if d1 < 0.0:
        return -d1
    return max(-d1, a * a - 2.0 + math.sqrt(d1))


def classify_phase(
    p: CoupledParams, tol: Tolerances = DEFAULT_TOLERANCES
) -> PhaseLabel:
    """Phase label of ``p``: unbroken, broken, or exceptional (boundary)."""
    margin = phase_margin(p)
    if margin < -tol.boundary:
        return PhaseLabel.UNBROKEN
    if margin > tol.boundary:
        return PhaseLabel.BROKEN
    return PhaseLabel.EXCEPTIONAL


def critical_damping(epsilon: float) -> float:
    """Gain/loss rate at which the unbroken region closes, at fixed coupling.

    Defined for ``0 <= epsilon < 1``; beyond that the quartic always has
    a real root, so no finite rate restores bounded motion.
    """
    if not (0.0 <= epsilon < 1.0) or not math.isfinite(epsilon):
        raise DomainError(
            f"critical damping requires 0 <= epsilon < 1, got {epsilon!r}"
        )
    # Equal to sqrt(2 (1 - sqrt(1 - eps^2))) but free of the cancellation
    # that wrecks the direct form for small eps.
    return math.sqrt(1.0 + epsilon) - math.sqrt(1.0 - epsilon)


def quartic_root_oracle(
    c: QuarticCoefficients, max_iter: int = 500
) -> tuple[complex, complex, complex, complex]:
    """All roots of ``c4 z^4 + c2 z^2 + c0`` by simultaneous iteration.

    This deliberately does *not* reuse the quadratic-in-``z^2`` closed
    form: it runs Weierstrass (Durand-Kerner) iteration on the full
    quartic so it can serve as an independent cross-check of
    :func:`modal_eigenvalues`.  Raises :class:`ConvergenceError` if the
    final residuals exceed ``1e-10 * max(1, |c2|, |c0|)``.
    """
    if c.c4 != 1.0:
        raise DomainError(f"oracle expects a monic quartic, got c4={c.c4!r}")
    c2, c0 = complex(c.c2), complex(c.c0)

    def poly(z: complex) -> complex:
        return ((z * z + c2) * z * z) + c0

    # Cauchy bound on root magnitude for the monic quartic, then the
    # usual asymmetric seed ring so no two seeds start conjugate.
    radius = 1.0 + max(abs(c2), abs(c0))
    seed = 0.4 + 0.9j
    roots = [radius * seed**k for k in range(1, 5)]
    scale = max(1.0, abs(c2), abs(c0))
    for _ in range(max_iter):
        moved = 0.0
        for i in range(4):
            zi = roots[i]
            denom = 1.0 + 0.0j
            for j in range(4):
                if j != i:
                    denom *= zi - roots[j]
            if denom == 0:
                denom = 1e-300
            delta = poly(zi) / denom
            roots[i] = zi - delta
            moved = max(moved, abs(delta))
        if moved < 1e-15 * max(1.0, max(abs(z) for z in roots)):
            break
    residual = max(abs(poly(z)) for z in roots)
    if residual > 1e-10 * scale:
        raise ConvergenceError(
            f"root iteration stalled: residual {residual:.3e} "
            f"exceeds {1e-10 * scale:.3e}"
        )
    return tuple(roots)  # type: ignore[return-value]


def modal_report_json(spectrum: ModalSpectrum) -> str:
    """Serialise a modal spectrum as the standard JSON report."""
    payload = {
        "eigenvalues": [[z.real, z.imag] for z in spectrum.eigenvalues],
        "phase": spectrum.phase.value,
        "boundary_distance": spectrum.boundary_distance,
    }
    return json.dumps(payload, sort_keys=True)
