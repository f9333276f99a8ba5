"""Shared model types: parameter sets, state vectors, series, event logs.

The two-oscillator model couples an undamped pair of unit-frequency
oscillators through a symmetric spring term.  One oscillator may carry
linear loss while the other carries an equal linear gain, or energy may
be moved in discrete packets; the parameter set is the same either way:

* ``epsilon``            coupling strength between the oscillators,
* ``gain_loss_rate``     balanced linear gain/loss coefficient,
* ``transfer_fraction``  fraction of peak energy moved per packet event.

Everything downstream (spectra, integration, sweeps, the CLI) consumes
these types.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import ValidationError

__all__ = [
    "PhaseLabel",
    "StateVector",
    "CoupledParams",
    "TwoBoxParams",
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "TimeSeries",
    "TransferEvent",
    "TransferLog",
    "validate_params",
    "params_to_manifest",
    "params_from_manifest",
    "read_trajectory_csv",
    "read_transfer_log_csv",
]

#: Format used for every floating-point value we serialise.  17 significant
#: digits round-trip any IEEE-754 double exactly.
FLOAT_FMT = "%.17g"

TRAJECTORY_HEADER = "t,x,p,y,q,E_x,E_y"
TRANSFER_HEADER = "t_extract,x_before,x_after,packet_energy,t_deposit,y_before,y_after"


class PhaseLabel(str, enum.Enum):
    """Classification of a parameter point or of a simulated run."""

    UNBROKEN = "unbroken"
    BROKEN = "broken"
    EXCEPTIONAL = "exceptional"

    def __str__(self) -> str:  # so f-strings emit the bare value
        return self.value


def _finite(name: str, value: float, problems: list[tuple[str, str]]) -> None:
    if not math.isfinite(value):
        problems.append((name, f"must be finite, got {value!r}"))


@dataclass(frozen=True)
class StateVector:
    """Phase-space point ``(x, p, y, q)``: two displacements and velocities.

    Also used for time-derivatives of states, which share the layout.
    """

    x: float
    p: float
    y: float
    q: float

    def __post_init__(self) -> None:
        problems: list[tuple[str, str]] = []
        for name in ("x", "p", "y", "q"):
            _finite(name, getattr(self, name), problems)
        if problems:
            raise ValidationError(problems)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p, self.y, self.q], dtype=float)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "StateVector":
        x, p, y, q = (float(v) for v in arr)
        return cls(x, p, y, q)


@dataclass(frozen=True)
class CoupledParams:
    """Parameters of the coupled oscillator pair.

    Bounds: ``epsilon >= 0``, ``gain_loss_rate >= 0`` and
    ``0 <= transfer_fraction < 1``; every field must be finite.
    Violations are all collected into one :class:`ValidationError`.
    """

    epsilon: float
    gain_loss_rate: float = 0.0
    transfer_fraction: float = 0.0

    def __post_init__(self) -> None:
        problems: list[tuple[str, str]] = []
        for name in ("epsilon", "gain_loss_rate", "transfer_fraction"):
            _finite(name, getattr(self, name), problems)
        if math.isfinite(self.epsilon) and self.epsilon < 0:
            problems.append(("epsilon", f"must be >= 0, got {self.epsilon!r}"))
        if math.isfinite(self.gain_loss_rate) and self.gain_loss_rate < 0:
            problems.append(
                ("gain_loss_rate", f"must be >= 0, got {self.gain_loss_rate!r}")
            )
        if math.isfinite(self.transfer_fraction) and not (
            0.0 <= self.transfer_fraction < 1.0
        ):
            problems.append(
                (
                    "transfer_fraction",
                    f"must lie in [0, 1), got {self.transfer_fraction!r}",
                )
            )
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class TwoBoxParams:
    """Parameters of the two-site gain/loss matrix model.

    ``magnitude > 0`` sets the size of the complex on-site terms,
    ``theta`` in ``(0, pi)`` their common phase angle, and ``coupling``
    (any finite real) the off-diagonal hopping.
    """

    magnitude: float
    theta: float
    coupling: float

    def __post_init__(self) -> None:
        problems: list[tuple[str, str]] = []
        for name in ("magnitude", "theta", "coupling"):
            _finite(name, getattr(self, name), problems)
        if math.isfinite(self.magnitude) and self.magnitude <= 0:
            problems.append(("magnitude", f"must be > 0, got {self.magnitude!r}"))
        if math.isfinite(self.theta) and not (0.0 < self.theta < math.pi):
            problems.append(("theta", f"must lie in (0, pi), got {self.theta!r}"))
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class Tolerances:
    """Numerical windows used by the classifiers.

    ``ep`` is the half-width of the band treated as an exceptional point,
    ``boundary`` the margin required before a phase label is committed,
    and ``real`` the largest |Re E| still accepted as purely imaginary.
    """

    ep: float = 1e-9
    boundary: float = 1e-9
    real: float = 1e-9


DEFAULT_TOLERANCES = Tolerances()


class TimeSeries:
    """Uniformly sampled trajectory of the four-component state.

    ``times`` has shape ``(n,)`` with strictly increasing entries spaced
    by ``dt``; ``states`` has shape ``(n, 4)`` with columns ``x, p, y, q``;
    ``energies`` has shape ``(n, 2)`` with the decoupled oscillator
    energies ``E_x = (p^2 + x^2)/2`` and ``E_y = (q^2 + y^2)/2``.
    """

    def __init__(self, dt: float, times: np.ndarray, states: np.ndarray,
                 energies: np.ndarray | None = None):
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        if times.ndim != 1 or states.shape != (times.size, 4):
            raise ValidationError(
                [("states", f"expected ({times.size}, 4), got {states.shape}")]
            )
        if times.size < 2:
            raise ValidationError([("times", "need at least two samples")])
        spacing = np.diff(times)
        if spacing.min() <= 0:
            raise ValidationError([("times", "timestamps must strictly increase")])
        if not np.allclose(spacing, dt, rtol=1e-9, atol=1e-12):
            raise ValidationError([("times", f"spacing is not uniformly {dt!r}")])
        if energies is None:
            energies = 0.5 * np.column_stack(
                (states[:, 1] ** 2 + states[:, 0] ** 2,
                 states[:, 3] ** 2 + states[:, 2] ** 2)
            )
        energies = np.asarray(energies, dtype=float)
        if energies.shape != (times.size, 2):
            raise ValidationError(
                [("energies", f"expected ({times.size}, 2), got {energies.shape}")]
            )
        self.dt = float(dt)
        self.times = times
        self.states = states
        self.energies = energies

    def __len__(self) -> int:
        return self.times.size

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def p(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def q(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def e_x(self) -> np.ndarray:
        return self.energies[:, 0]

    @property
    def e_y(self) -> np.ndarray:
        return self.energies[:, 1]

    def samples(self) -> Iterator[tuple[float, StateVector]]:
        for t, row in zip(self.times, self.states):
            yield float(t), StateVector.from_array(row)

    def write_csv(self, path: str | Path) -> None:
        table = np.column_stack((self.times, self.states, self.energies))
        np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",",
                   header=TRAJECTORY_HEADER, comments="")


def read_trajectory_csv(path: str | Path) -> TimeSeries:
    """Load a trajectory written by :meth:`TimeSeries.write_csv`."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != 7:
        raise ValidationError(
            [("file", f"expected 7 columns ({TRAJECTORY_HEADER}), got {table.shape[1]}")]
        )
    times = table[:, 0]
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return TimeSeries(dt, times, table[:, 1:5], table[:, 5:7])


@dataclass
class TransferEvent:
    """One packet of energy: extracted at an x-peak, deposited at a y-peak.

    Peak displacements are stored as amplitudes (absolute values).  The
    deposit fields stay ``None`` while a packet is still queued.
    """

    t_extract: float
    x_before: float
    x_after: float
    packet_energy: float
    t_deposit: float | None = None
    y_before: float | None = None
    y_after: float | None = None

    @property
    def completed(self) -> bool:
        return self.t_deposit is not None


@dataclass
class TransferLog:
    """Ordered ledger of discrete energy-transfer events."""

    events: list[TransferEvent] = field(default_factory=list)

    def completed(self) -> list[TransferEvent]:
        return [e for e in self.events if e.completed]

    def total_extracted(self) -> float:
        """Sum of every packet removed from the x channel, in event order."""
        return sum(e.packet_energy for e in self.events)

    def total_deposited(self) -> float:
        """Sum of packets actually applied to the y channel.

        Deposits re-apply the stored ``packet_energy`` value, so summing
        that field over completed events in deposit order reproduces the
        deposited total bit-for-bit.
        """
        ordered = sorted(self.completed(), key=lambda e: e.t_deposit)  # type: ignore[arg-type, return-value]
        return sum(e.packet_energy for e in ordered)

    def write_csv(self, path: str | Path) -> None:
        def render(v: float | None) -> str:
            return "" if v is None else FLOAT_FMT % v

        lines = [TRANSFER_HEADER]
        for e in self.events:
            lines.append(",".join([
                FLOAT_FMT % e.t_extract,
                FLOAT_FMT % e.x_before,
                FLOAT_FMT % e.x_after,
                FLOAT_FMT % e.packet_energy,
                render(e.t_deposit),
                render(e.y_before),
                render(e.y_after),
            ]))
        Path(path).write_text("\n".join(lines) + "\n")


def read_transfer_log_csv(path: str | Path) -> TransferLog:
    """Load a transfer log written by :meth:`TransferLog.write_csv`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRANSFER_HEADER:
        raise ValidationError([("file", "missing transfer-log header")])
    log = TransferLog()
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        opt = [None if s == "" else float(s) for s in parts[4:7]]
        log.events.append(TransferEvent(
            float(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]),
            opt[0], opt[1], opt[2],
        ))
    return log


def validate_params(raw: Mapping[str, float] | CoupledParams) -> CoupledParams:
    """Validate a parameter candidate, reporting *every* violated bound.

    Accepts either an existing :class:`CoupledParams` (validated on
    construction, returned unchanged) or a mapping with the field names.
    Unknown keys are rejected so typos cannot silently drop a parameter.
    """
    if isinstance(raw, CoupledParams):
        return raw
    known = {f.name for f in fields(CoupledParams)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError([(k, "unknown parameter") for k in unknown])
    if "epsilon" not in raw:
        raise ValidationError([("epsilon", "required parameter is missing")])
    return CoupledParams(**{k: float(v) for k, v in raw.items()})


def params_to_manifest(p: CoupledParams) -> str:
    """Render parameters as a flat JSON object.

    Values are written with 17 significant digits, which re-parse to
    bit-identical doubles.
    """
    items = sorted((f.name, getattr(p, f.name)) for f in fields(p))
    body = ", ".join(f'"{k}": {FLOAT_FMT % v}' for k, v in items)
    return "{" + body + "}"


def params_from_manifest(text: str) -> CoupledParams:
    """Parse a manifest produced by :func:`params_to_manifest`."""
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValidationError([("manifest", "expected a flat JSON object")])
    return validate_params(data)
