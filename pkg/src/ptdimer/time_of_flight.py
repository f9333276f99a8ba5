"""Complex traversal-time integrals for the deformed quadratic potential.

The potential ``V(x) = x^2 (ix)^epsilon`` is evaluated on the branch
that keeps it PT-symmetric on the real line:

    (ix)^epsilon = exp(epsilon * (ln|x| + i (pi/2) sign(x)))

so ``V(x) = |x|^(2+epsilon) exp(i (pi/2) epsilon sign(x))`` and
``V(-x) = conj(V(x))``.  The traversal-time estimate at real energy
``E > 0`` is the truncated integral

    T(L) = integral_{-L}^{L} dx / sqrt(E - V(x))

with the principal square root.  For ``epsilon > 0`` the integrand
falls off like ``|x|^-(2+epsilon)/2`` whose tail exponent exceeds one,
so T(L) converges as L grows and the discarded tail is bounded by
``4 L^(-epsilon/2) / epsilon``.  For ``epsilon <= 0`` the tail bound is
infinite and the estimate grows without limit under cutoff doubling:
like ``L^(-epsilon/2)`` (exponent ``1 - (2+epsilon)/2``).

Two interchangeable quadrature engines are provided: an adaptive
Gauss-Kronrod (G7, K15) bisection scheme and a fixed composite
Gauss-Legendre scheme on a dyadically graded mesh.  They share no code
beyond the integrand, so agreement between them validates both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Callable, NamedTuple

import numpy as np

from .errors import BranchError, ConvergenceError, SingularityError, ValidationError

__all__ = [
    "TofRequest",
    "TofResult",
    "potential",
    "TailBehavior",
    "tail_exponent",
    "tail_bound",
    "time_of_flight",
    "adaptive_gauss_kronrod",
    "fixed_graded_legendre",
    "tof_report_json",
]

#: Kronrod-15 abscissae (positive half; the Gauss-7 points interleave).
_K15_NODES = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_K15_WEIGHTS = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_G7_WEIGHTS = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
])

#: Hard ceiling on adaptive subdivisions before giving up.
_MAX_PANELS = 20000
#: Fixed-scheme mesh is dyadic from this scale up to the cutoff.
_GRADED_INNER = 2.0**-24
_FIXED_ORDER = 40


@dataclass(frozen=True)
class TofRequest:
    """Parameters of one traversal-time evaluation.

    ``epsilon > -2`` selects the potential, ``energy > 0`` the level,
    ``cutoff >= 10`` the truncation half-width, and ``target_accuracy``
    the absolute accuracy goal (tail plus quadrature).
    """

    epsilon: float
    energy: float = 1.0
    cutoff: float = 1e4
    target_accuracy: float = 1e-6

    def __post_init__(self) -> None:
        problems: list[tuple[str, str]] = []
        if not (math.isfinite(self.epsilon) and self.epsilon > -2.0):
            problems.append(("epsilon", f"must be finite and > -2, got {self.epsilon!r}"))
        if not (math.isfinite(self.energy) and self.energy > 0.0):
            problems.append(("energy", f"must be positive, got {self.energy!r}"))
        if not (math.isfinite(self.cutoff) and self.cutoff >= 10.0):
            problems.append(("cutoff", f"must be >= 10, got {self.cutoff!r}"))
        if not (math.isfinite(self.target_accuracy) and self.target_accuracy > 0.0):
            problems.append(
                ("target_accuracy", f"must be positive, got {self.target_accuracy!r}")
            )
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class TofResult:
    """Truncated traversal-time value and its convergence bookkeeping."""

    value: complex
    tail_bound: float
    converged: bool
    epsilon: float
    energy: float
    cutoff: float


def potential(x: float, epsilon: float) -> complex:
    """Deformed potential ``x^2 (ix)^epsilon`` on the PT-symmetric branch."""
    if x == 0.0:
        if epsilon <= -2.0:
            raise BranchError(
                f"potential undefined at x = 0 for epsilon = {epsilon!r} "
                "(needs epsilon > -2)"
            )
        return 0.0 + 0.0j
    magnitude = abs(x) ** (2.0 + epsilon)
    phase = 0.5 * math.pi * epsilon * (1.0 if x > 0.0 else -1.0)
    return magnitude * complex(math.cos(phase), math.sin(phase))


def _potential_array(x: np.ndarray, epsilon: float) -> np.ndarray:
    # Overflow produces inf, which the integrand factory turns into a
    # deliberate SingularityError; keep numpy quiet about it here.
    with np.errstate(over="ignore"):
        mag = np.abs(x) ** (2.0 + epsilon)
        return mag * np.exp(1j * 0.5 * math.pi * epsilon * np.sign(x))


def _integrand_factory(epsilon: float, energy: float) -> Callable[[np.ndarray], np.ndarray]:
    def f(x: np.ndarray) -> np.ndarray:
        gap = energy - _potential_array(x, epsilon)
        if np.any(gap == 0.0):
            raise SingularityError(
                f"E - V vanished on the evaluation grid (epsilon={epsilon}, E={energy})"
            )
        out = 1.0 / np.sqrt(gap)
        if not np.all(np.isfinite(out)):
            raise SingularityError(
                f"integrand overflowed near a turning point (epsilon={epsilon}, E={energy})"
            )
        return out

    return f


class TailBehavior(NamedTuple):
    """Large-|x| decay exponent of the integrand and what it implies."""

    exponent: float
    convergent: bool


def tail_exponent(epsilon: float) -> TailBehavior:
    """Decay exponent (2 + epsilon)/2 of |integrand|; > 1 means convergent."""
    p = 0.5 * (2.0 + epsilon)
    return TailBehavior(exponent=p, convergent=p > 1.0)


def tail_bound(epsilon: float, cutoff: float) -> float:
    """Bound on the modulus of the discarded |x| > cutoff contribution.

    Integrating ``2 |x|^-(2+epsilon)/2`` from the cutoff out gives
    ``4 cutoff^(-epsilon/2) / epsilon`` for ``epsilon > 0``; otherwise
    the tail diverges and the bound is infinite.
    """
    if epsilon <= 0.0:
        return math.inf
    return 4.0 * cutoff ** (-0.5 * epsilon) / epsilon


def _gauss_kronrod_panel(
    f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float
) -> tuple[complex, float]:
    """15-point Kronrod value and inflated error estimate on one panel.

    The raw |K15 - G7| discrepancy badly underestimates the error of a
    panel holding an unresolved singularity (both rules miss the same
    mass), so it is rescaled against the panel's absolute-deviation
    mass ``resasc`` the way QUADPACK's QK15 does: sharp for resolved
    panels, saturating at ``resasc`` for unresolved ones.
    """
    centre = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    offsets = half * _K15_NODES
    xs = np.concatenate((centre - offsets[:-1], [centre], centre + offsets[:-1]))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ys = f(xs)
        left, mid, right = ys[:7], ys[7], ys[8:]
        pairs = left + right            # f(c - h xi_i) + f(c + h xi_i)
        k15 = half * (mid * _K15_WEIGHTS[-1] + np.sum(pairs * _K15_WEIGHTS[:-1]))
        g7 = half * (mid * _G7_WEIGHTS[-1] + np.sum(pairs[1::2] * _G7_WEIGHTS[:-1]))
        err = abs(k15 - g7)
        mean = k15 / (hi - lo) if hi > lo else 0.0
        dev = np.abs(ys - mean)
    resasc = half * (
        dev[7] * _K15_WEIGHTS[-1]
        + np.sum((dev[:7] + dev[8:]) * _K15_WEIGHTS[:-1])
    )
    if resasc > 0.0 and err > 0.0:
        err = float(resasc) * min(1.0, (200.0 * err / float(resasc)) ** 1.5)
    return complex(k15), err


_Panel = tuple[float, float, float, complex, float]


def _refine(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: float,
    max_panels: int,
) -> tuple[list[_Panel], list[_Panel], float, float]:
    """Adaptive-bisection pass; returns live and floor-frozen panels.

    Panels narrower than ~96 machine epsilons (relative to position)
    are not split further: beyond that width quadrature nodes start
    rounding onto the panel endpoints.  Such panels are reported
    separately so the caller can tell genuine convergence from a
    resolution-limited stall.
    """
    eps = float(np.finfo(float).eps)
    value, err = _gauss_kronrod_panel(f, lo, hi)
    heap: list[_Panel] = []
    heappush(heap, (-err, lo, hi, value, err))
    frozen: list[_Panel] = []
    frozen_err = 0.0
    live_err = err
    n_panels = 1
    while heap and live_err > max(tol - frozen_err, 0.1 * tol):
        if n_panels >= max_panels:
            raise ConvergenceError(
                f"quadrature needed more than {max_panels} panels "
                f"(error estimate {frozen_err + live_err:.3e}, tol {tol:.3e})"
            )
        neg, a, b, v, e = heappop(heap)
        live_err -= e
        if b - a <= 96.0 * eps * max(1.0, abs(a), abs(b)):
            frozen.append((neg, a, b, v, e))
            frozen_err += e
            continue
        mid = 0.5 * (a + b)
        v1, e1 = _gauss_kronrod_panel(f, a, mid)
        v2, e2 = _gauss_kronrod_panel(f, mid, b)
        if not (
            math.isfinite(v1.real) and math.isfinite(v1.imag) and math.isfinite(e1)
            and math.isfinite(v2.real) and math.isfinite(v2.imag) and math.isfinite(e2)
        ):
            # A child's nodes rounded onto a non-evaluable point; keep
            # the parent's finite estimate instead.
            frozen.append((neg, a, b, v, e))
            frozen_err += e
            continue
        live_err += e1 + e2
        heappush(heap, (-e1, a, mid, v1, e1))
        heappush(heap, (-e2, mid, b, v2, e2))
        n_panels += 1
    return list(heap), frozen, float(live_err), float(frozen_err)


def _complete_tail(
    f: Callable[[np.ndarray], np.ndarray], edge: float, inward: float, scale: float
) -> tuple[complex, float]:
    """Geometric completion of an integrable power-law endpoint tail.

    Evaluates three dyadic rungs approaching ``edge`` from ``inward``
    direction at width ``scale`` (far above the floating-point floor,
    so the integrand is clean there), fits the geometric rung ratio,
    and sums the remaining series.  Returns the mass of the last
    ``scale``/8 of the interval next to ``edge`` plus an error estimate
    from the ratio's self-consistency.  Exact whenever the integrand is
    locally ``A * (distance to edge)**(p-1)`` with ``p > 0`` — which is
    also the only structure that can stall bisection at an endpoint
    while remaining integrable.
    """
    direction = 1.0 if inward > edge else -1.0
    rungs: list[complex] = []
    for k in range(3):
        far = edge + direction * scale * 2.0 ** (-k)
        near = edge + direction * scale * 2.0 ** (-k - 1)
        lo, hi = (near, far) if direction > 0 else (far, near)
        v, _ = _gauss_kronrod_panel(f, lo, hi)
        rungs.append(v)
    r1, r2, r3 = rungs
    if abs(r1) == 0.0 or abs(r2) == 0.0:
        raise ConvergenceError("endpoint tail completion found no mass ladder")
    q12, q23 = r2 / r1, r3 / r2
    if abs(q23) > 0.995 or abs(q12 - q23) > 0.05 * max(abs(q23), 0.05):
        raise ConvergenceError(
            f"endpoint tail is not a convergent power ladder "
            f"(rung ratios {q12:.4f}, {q23:.4f})"
        )
    tail = r3 * q23 / (1.0 - q23)
    err = abs(tail) * abs(q12 - q23) / abs(1.0 - abs(q23)) ** 2
    return tail, float(err)


def adaptive_gauss_kronrod(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: float,
    max_panels: int = _MAX_PANELS,
) -> tuple[complex, float]:
    """Adaptive bisection quadrature of a complex integrand.

    Splits the panel with the largest Kronrod-Gauss discrepancy until
    the summed estimate drops below ``tol`` (absolute).  The final value
    sums panels ordered by left endpoint so the result is independent
    of the splitting schedule's history.

    Integrable endpoint singularities stall plain bisection at the
    floating-point resolution floor, below which the integrand cannot
    even be sampled.  Stalled endpoints are finished analytically by
    :func:`_complete_tail`, which fits the local power-law mass ladder
    well above the floor and sums the remaining geometric series.
    """
    live, frozen, live_err, frozen_err = _refine(f, lo, hi, tol, max_panels)
    if live_err + frozen_err <= tol:
        panels = sorted(live + frozen, key=lambda p: p[1])
        return sum(p[3] for p in panels), live_err + frozen_err
    span = hi - lo
    cut = span * 2.0 ** -33          # dyadic, so it lands on panel edges
    stalled_left = any(p[1] - lo <= cut for p in frozen)
    stalled_right = any(hi - p[2] <= cut for p in frozen)
    if not (stalled_left or stalled_right):
        raise ConvergenceError(
            f"quadrature stalled on an interior feature "
            f"(error estimate {live_err + frozen_err:.3e}, tol {tol:.3e})"
        )
    kept = live + frozen
    total_tail = 0.0 + 0.0j
    tail_err = 0.0
    for stalled, edge, inward_sign in (
        (stalled_left, lo, 1.0),
        (stalled_right, hi, -1.0),
    ):
        if not stalled:
            continue
        tail, t_err = _complete_tail(f, edge, edge + inward_sign * span, span * 2.0 ** -30)
        inside = {p for p in kept if abs(0.5 * (p[1] + p[2]) - edge) < cut}
        kept = [p for p in kept if p not in inside]
        covered = sum(p[2] - p[1] for p in inside)
        if not math.isclose(covered, cut, rel_tol=1e-6):
            raise ConvergenceError(
                "stalled endpoint panels do not tile the tail region "
                f"(covered {covered:.3e} of {cut:.3e})"
            )
        total_tail += tail
        tail_err += t_err
    kept.sort(key=lambda p: p[1])
    frozen_set = set(frozen)
    value = sum(p[3] for p in kept) + total_tail
    err = live_err + sum(p[4] for p in kept if p in frozen_set) + tail_err
    if err > tol:
        raise ConvergenceError(
            f"endpoint tail completion left error {err:.3e} above tol {tol:.3e}"
        )
    return value, err


def _graded_edges(cutoff: float) -> np.ndarray:
    """Dyadic mesh 0 < 2^-24 < ... < 1 < 2 < ... <= cutoff for one side."""
    edges = [0.0]
    scale = _GRADED_INNER
    while scale < cutoff:
        edges.append(scale)
        scale *= 2.0
    edges.append(cutoff)
    return np.array(edges)


def fixed_graded_legendre(
    f: Callable[[np.ndarray], np.ndarray], cutoff: float, order: int = _FIXED_ORDER
) -> complex:
    """Composite Gauss-Legendre quadrature on the graded symmetric mesh.

    Fixed nodes and weights, no adaptivity: an independent counterpart
    to :func:`adaptive_gauss_kronrod` for cross-validation.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = _graded_edges(cutoff)
    total = 0.0 + 0.0j
    for sign in (-1.0, 1.0):
        for a, b in zip(edges[:-1], edges[1:]):
            lo, hi = sign * b, sign * a
            if sign > 0:
                lo, hi = sign * a, sign * b
            centre = 0.5 * (hi + lo)
            half = 0.5 * (hi - lo)
            total += half * np.sum(weights * f(centre + half * nodes))
    return complex(total)


def time_of_flight(req: TofRequest, scheme: str = "adaptive") -> TofResult:
    """Truncated traversal-time integral over ``[-cutoff, cutoff]``.

    The truncated part is integrated to half the accuracy target; the
    ``converged`` flag reports whether the analytic tail bound fits in
    the other half.  ``scheme`` selects the quadrature engine
    (``"adaptive"`` or ``"fixed"``).
    """
    f = _integrand_factory(req.epsilon, req.energy)
    if scheme == "adaptive":
        value, _ = adaptive_gauss_kronrod(
            f, -req.cutoff, req.cutoff, 0.5 * req.target_accuracy
        )
    elif scheme == "fixed":
        value = fixed_graded_legendre(f, req.cutoff)
    else:
        raise ValidationError([("scheme", f"unknown quadrature scheme {scheme!r}")])
    bound = tail_bound(req.epsilon, req.cutoff)
    return TofResult(
        value=value,
        tail_bound=bound,
        converged=bound <= 0.5 * req.target_accuracy,
        epsilon=req.epsilon,
        energy=req.energy,
        cutoff=req.cutoff,
    )


def tof_report_json(result: TofResult) -> str:
    """Serialise a traversal-time result as the standard JSON report."""
    import json

    payload = {
        "T": [result.value.real, result.value.imag],
        "tail_bound": result.tail_bound,
        "converged": result.converged,
        "L": result.cutoff,
        "epsilon": result.epsilon,
        "E": result.energy,
    }
    return json.dumps(payload, sort_keys=True)
