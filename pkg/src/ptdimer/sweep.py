"""Phase-diagram sweeps over parameter grids.

A sweep evaluates a phase label on every point of a rectangular
(epsilon, other-parameter) grid — by closed-form spectral criterion or
by simulating and classifying the dynamics — and extracts the empirical
phase boundary.  Points are independent, so grids can be evaluated by a
process pool; results land at their grid index, making output identical
at any worker count.  A failing point is recorded as Exceptional with
the error message in an annex instead of aborting the sweep.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ._version import __version__
from .core import FLOAT_FMT, CoupledParams, PhaseLabel
from .dynamics import Model, SimConfig, classify_dynamics, integrate
from .errors import NoTransitionError, ValidationError
from .spectral import classify_phase, modal_eigenvalues

__all__ = [
    "SweepMode",
    "GridSpec",
    "PhaseMap",
    "BoundaryPoint",
    "run_sweep",
    "refine_boundary",
    "write_phase_map_csv",
    "read_phase_map_labels",
    "write_boundary_csv",
    "sweep_manifest_json",
    "grid_from_manifest",
]

#: Hard ceiling on a dynamical cell's integration horizon.
MAX_CELL_T_END = 1e4
#: Rabi periods to cover when the spectral beat frequency is defined.
RABI_MULTIPLE = 4.0
#: ln(1e9): growth budget keeping broken-cell amplitudes well under the
#: integrator's blow-up guard.
GROWTH_BUDGET = 20.72


class SweepMode(str, Enum):
    """What varies on the non-epsilon axis and how points are labeled."""

    SPECTRAL_EPS_A = "spectral-eps-a"
    DYNAMICAL_EPS_A = "dynamical-eps-a"
    DYNAMICAL_EPS_G = "dynamical-eps-g"

    @property
    def dynamical(self) -> bool:
        return self is not SweepMode.SPECTRAL_EPS_A


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sweep grid.

    ``epsilon_range`` and ``param_range`` are ``(lo, hi, n)`` triples
    rendered with ``numpy.linspace``.  The epsilon axis needs ``n >= 2``;
    the other axis may be degenerate (``n == 1`` with ``lo == hi``).
    Axes are capped at 2048 points.  Dynamical modes require ``sim``;
    its ``model`` field is overridden per mode (linear for the
    gain/loss-rate axis, transfer for the transfer-fraction axis).
    """

    epsilon_range: tuple[float, float, int]
    param_range: tuple[float, float, int]
    mode: SweepMode
    sim: SimConfig | None = None

    def __post_init__(self) -> None:
        problems: list[tuple[str, str]] = []
        for name, (lo, hi, n), n_min in (
            ("epsilon_range", self.epsilon_range, 2),
            ("param_range", self.param_range, 1),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                problems.append((name, f"bounds must be finite, got ({lo!r}, {hi!r})"))
                continue
            if int(n) != n or not (n_min <= n <= 2048):
                problems.append(
                    (name, f"point count must be an integer in [{n_min}, 2048], got {n!r}")
                )
            if n == 1:
                if lo != hi:
                    problems.append(
                        (name, f"a single-point axis needs lo == hi, got ({lo!r}, {hi!r})")
                    )
            elif not lo < hi:
                problems.append((name, f"needs lo < hi, got ({lo!r}, {hi!r})"))
        if self.mode.dynamical and self.sim is None:
            problems.append(("sim", f"required for mode {self.mode.value!r}"))
        if problems:
            raise ValidationError(problems)

    def epsilon_values(self) -> np.ndarray:
        lo, hi, n = self.epsilon_range
        return np.linspace(lo, hi, int(n))

    def param_values(self) -> np.ndarray:
        lo, hi, n = self.param_range
        return np.linspace(lo, hi, int(n))

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.epsilon_range[2]), int(self.param_range[2])


@dataclass(frozen=True)
class BoundaryPoint:
    """One refined phase-boundary location at fixed epsilon."""

    epsilon: float
    critical_value: float
    half_width: float


@dataclass(frozen=True)
class PhaseMap:
    """Row-major labels over a grid, plus failures and a coarse boundary.

    ``labels[i * n_param + j]`` belongs to ``epsilon_values()[i]`` and
    ``param_values()[j]``.  ``errors`` maps flat indices of failed cells
    (labelled Exceptional) to their error messages.  ``boundary`` holds
    the midpoints of adjacent opposite-labelled cells, column by column.
    """

    grid: GridSpec
    labels: tuple[PhaseLabel, ...]
    errors: dict[int, str] = dataclasses.field(default_factory=dict)
    boundary: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        n_eps, n_param = self.grid.shape
        if len(self.labels) != n_eps * n_param:
            raise ValidationError(
                [("labels", f"expected {n_eps * n_param} labels, got {len(self.labels)}")]
            )

    def row(self, i: int) -> tuple[PhaseLabel, ...]:
        n_param = self.grid.shape[1]
        return self.labels[i * n_param : (i + 1) * n_param]


def _cell_params(mode: SweepMode, epsilon: float, param: float) -> CoupledParams:
    if mode is SweepMode.DYNAMICAL_EPS_G:
        return CoupledParams(epsilon=epsilon, transfer_fraction=param)
    return CoupledParams(epsilon=epsilon, gain_loss_rate=param)


def _cell_t_end(mode: SweepMode, p: CoupledParams, sim: SimConfig) -> float:
    """Per-cell integration horizon.

    Covers RABI_MULTIPLE estimated beat periods when the spectral beat
    frequency is defined (unbroken side), never less than the configured
    ``t_end`` and never more than MAX_CELL_T_END; on the growing side the
    horizon is additionally capped so amplitudes stay far below the
    integrator's blow-up guard.
    """
    spectral_probe = (
        CoupledParams(epsilon=p.epsilon) if mode is SweepMode.DYNAMICAL_EPS_G else p
    )
    spectrum = modal_eigenvalues(spectral_probe)
    t = sim.t_end
    if spectrum.phase is PhaseLabel.UNBROKEN:
        freqs = sorted(abs(e.imag) for e in spectrum.eigenvalues[::2])
        beat = abs(freqs[1] - freqs[0])
        if beat > 1e-12:
            t = min(max(RABI_MULTIPLE * 2.0 * math.pi / beat, sim.t_end), MAX_CELL_T_END)
    growth = max(e.real for e in spectrum.eigenvalues)
    if mode is not SweepMode.DYNAMICAL_EPS_G and growth > 0.0:
        t = min(t, GROWTH_BUDGET / growth)
    return t


def classify_cell(spec: GridSpec, epsilon: float, param: float) -> PhaseLabel:
    """Label one grid point the way the sweep's mode prescribes."""
    p = _cell_params(spec.mode, epsilon, param)
    if spec.mode is SweepMode.SPECTRAL_EPS_A:
        return classify_phase(p)
    assert spec.sim is not None
    model = Model.TRANSFER if spec.mode is SweepMode.DYNAMICAL_EPS_G else Model.LINEAR
    cfg = dataclasses.replace(
        spec.sim, model=model, t_end=_cell_t_end(spec.mode, p, spec.sim)
    )
    return classify_dynamics(integrate(cfg, p).series)


def _evaluate_cell(args: tuple[GridSpec, float, float]) -> tuple[str, str | None]:
    spec, epsilon, param = args
    try:
        return classify_cell(spec, epsilon, param).value, None
    except Exception as exc:  # containment: one bad point must not kill a sweep
        return PhaseLabel.EXCEPTIONAL.value, f"{type(exc).__name__}: {exc}"


def _coarse_boundary(
    spec: GridSpec, labels: tuple[PhaseLabel, ...]
) -> tuple[tuple[float, float], ...]:
    eps_vals = spec.epsilon_values()
    param_vals = spec.param_values()
    n_param = len(param_vals)
    points: list[tuple[float, float]] = []
    for i, eps in enumerate(eps_vals):
        row = labels[i * n_param : (i + 1) * n_param]
        for j in range(n_param - 1):
            if row[j] != row[j + 1]:
                points.append(
                    (float(eps), 0.5 * (float(param_vals[j]) + float(param_vals[j + 1])))
                )
                break
    return tuple(points)


def run_sweep(spec: GridSpec, workers: int = 1) -> PhaseMap:
    """Evaluate every grid point and assemble the phase map.

    ``workers > 1`` fans points out to a process pool; results are
    placed by grid index, so the map is identical at any worker count.
    Cell failures become Exceptional labels with the message recorded in
    the ``errors`` annex.
    """
    if int(workers) != workers or workers < 1:
        raise ValidationError([("workers", f"must be a positive integer, got {workers!r}")])
    tasks = [
        (spec, float(eps), float(param))
        for eps in spec.epsilon_values()
        for param in spec.param_values()
    ]
    if workers == 1:
        outcomes = [_evaluate_cell(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (int(workers) * 8))
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            outcomes = list(pool.map(_evaluate_cell, tasks, chunksize=chunk))
    labels = tuple(PhaseLabel(value) for value, _ in outcomes)
    errors = {i: msg for i, (_, msg) in enumerate(outcomes) if msg is not None}
    return PhaseMap(spec, labels, errors, _coarse_boundary(spec, labels))


def refine_boundary(pmap: PhaseMap, iterations: int) -> tuple[BoundaryPoint, ...]:
    """Bisect each epsilon column's unbroken/non-unbroken transition.

    Starting from the adjacent grid cells that disagree about being
    unbroken, `iterations` halvings shrink the bracket by exactly 2x
    each; the returned half_width is half the final bracket.  A column
    with no such transition raises NoTransitionError.
    """
    if int(iterations) != iterations or iterations < 1:
        raise ValidationError(
            [("iterations", f"must be a positive integer, got {iterations!r}")]
        )
    spec = pmap.grid
    param_vals = spec.param_values()
    n_param = len(param_vals)
    points: list[BoundaryPoint] = []
    for i, eps in enumerate(spec.epsilon_values()):
        eps = float(eps)
        row = pmap.row(i)
        bracket = None
        for j in range(n_param - 1):
            if (row[j] is PhaseLabel.UNBROKEN) != (row[j + 1] is PhaseLabel.UNBROKEN):
                bracket = (float(param_vals[j]), float(param_vals[j + 1]),
                           row[j] is PhaseLabel.UNBROKEN)
                break
        if bracket is None:
            raise NoTransitionError(
                f"column epsilon={eps:g} has no unbroken/non-unbroken transition"
            )
        lo, hi, lo_unbroken = bracket
        for _ in range(int(iterations)):
            mid = 0.5 * (lo + hi)
            mid_unbroken = classify_cell(spec, eps, mid) is PhaseLabel.UNBROKEN
            if mid_unbroken == lo_unbroken:
                lo = mid
            else:
                hi = mid
        points.append(BoundaryPoint(eps, 0.5 * (lo + hi), 0.5 * (hi - lo)))
    return tuple(points)


def write_phase_map_csv(pmap: PhaseMap, path: str | Path) -> None:
    """Write ``epsilon,param,label`` rows in row-major grid order."""
    eps_vals = pmap.grid.epsilon_values()
    param_vals = pmap.grid.param_values()
    n_param = len(param_vals)
    lines = ["epsilon,param,label"]
    for i, eps in enumerate(eps_vals):
        for j, param in enumerate(param_vals):
            label = pmap.labels[i * n_param + j]
            lines.append(
                f"{FLOAT_FMT % eps},{FLOAT_FMT % param},{label.value}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_phase_map_labels(path: str | Path) -> tuple[PhaseLabel, ...]:
    """Labels of a phase-map CSV, in file (row-major) order."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != "epsilon,param,label":
        raise ValidationError([("file", f"{path}: not a phase-map CSV")])
    return tuple(PhaseLabel(line.rsplit(",", 1)[1]) for line in lines[1:])


def write_boundary_csv(points: tuple[BoundaryPoint, ...], path: str | Path) -> None:
    """Write ``epsilon,critical_value,half_width`` rows."""
    lines = ["epsilon,critical_value,half_width"]
    for pt in points:
        lines.append(
            f"{FLOAT_FMT % pt.epsilon},{FLOAT_FMT % pt.critical_value},"
            f"{FLOAT_FMT % pt.half_width}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _grid_payload(spec: GridSpec) -> dict:
    payload: dict = {
        "epsilon_range": list(spec.epsilon_range),
        "param_range": list(spec.param_range),
        "mode": spec.mode.value,
        "sim": None,
    }
    if spec.sim is not None:
        payload["sim"] = {
            "model": spec.sim.model.value,
            "dt": spec.sim.dt,
            "t_end": spec.sim.t_end,
            "sample_stride": spec.sim.sample_stride,
            "initial": list(spec.sim.initial.as_array()),
            "allow_large_dt": spec.sim.allow_large_dt,
        }
    return payload


def sweep_manifest_json(pmap: PhaseMap, wall_seconds: float) -> str:
    """JSON record of the grid, tool version, and wall-clock time."""
    return json.dumps(
        {
            "grid": _grid_payload(pmap.grid),
            "tool_version": __version__,
            "wall_seconds": wall_seconds,
            "n_errors": len(pmap.errors),
            "errors": {str(k): v for k, v in sorted(pmap.errors.items())},
        },
        sort_keys=True,
        indent=2,
    )


def grid_from_manifest(text: str) -> GridSpec:
    """Reconstruct the GridSpec recorded by :func:`sweep_manifest_json`."""
    try:
        payload = json.loads(text)["grid"]
        sim = None
        if payload["sim"] is not None:
            raw = payload["sim"]
            from .core import StateVector

            sim = SimConfig(
                model=Model(raw["model"]),
                dt=raw["dt"],
                t_end=raw["t_end"],
                sample_stride=raw["sample_stride"],
                initial=StateVector(*raw["initial"]),
                allow_large_dt=raw["allow_large_dt"],
            )
        return GridSpec(
            epsilon_range=tuple(payload["epsilon_range"]),
            param_range=tuple(payload["param_range"]),
            mode=SweepMode(payload["mode"]),
            sim=sim,
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError([("manifest", f"malformed sweep manifest: {exc}")]) from exc
