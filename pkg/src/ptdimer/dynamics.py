"""Time-domain simulation and envelope analysis of the oscillator pair.

Equations of motion (unit natural frequency, coupling ``epsilon``,
balanced gain/loss rate ``a``):

    x' = p        p' = -x - epsilon*y - a*p      (lossy side)
    y' = q        q' = -epsilon*x - y + a*q      (gain side)

Three model variants share this right-hand side:

* ``LOSSLESS``        a = 0; conserves H = (p^2+x^2+q^2+y^2)/2 + eps*x*y.
* ``LINEAR``          a > 0 as written: continuous balanced gain/loss.
* ``TRANSFER``        a = 0 between events; whenever x passes through an
  amplitude extremum a fraction ``g`` of its decoupled peak energy is
  removed, queued, and deposited at the next y extremum (FIFO, one
  packet per peak).

Integration is classical fixed-step fourth-order Runge-Kutta.  Because
the right-hand side is linear, one RK4 step equals the degree-4 Taylor
polynomial of the matrix exponential; the integrator applies that exact
one-step map in blocks, which keeps long runs fast without changing the
method (see ``rk4_step`` and the equivalence test).  Transfer events are
detected as velocity sign changes on the integration grid, located by a
quadratic fit through the three nearest steps, and applied by restarting
from the modified state at the nearest step boundary, an O(dt^2)
perturbation.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    CoupledParams,
    PhaseLabel,
    StateVector,
    TimeSeries,
    TransferEvent,
    TransferLog,
)
from .errors import ConfigError, InsufficientDataError, StepSizeError

__all__ = [
    "Model",
    "SimConfig",
    "SimResult",
    "PeakEvent",
    "Envelope",
    "RabiMetrics",
    "derivative",
    "rk4_step",
    "rk4_map",
    "system_matrix",
    "integrate",
    "detect_peaks",
    "envelope_of",
    "qualifying_minima_times",
    "rabi_metrics",
    "classify_dynamics",
]

#: Peaks with interpolated |displacement| at or below this are ignored.
NOISE_FLOOR = 1e-12
#: Any state component beyond this aborts the run with StepSizeError.
BLOWUP_LIMIT = 1e12
#: Largest step size accepted without the explicit override flag.
MAX_TRUSTED_DT = 0.01
#: Hard ceiling on the number of integration steps.
MAX_STEPS = 1e8
#: Minimum number of envelope points required by the analysis routines.
MIN_ENVELOPE_POINTS = 8
#: An envelope minimum must sit at least this fraction of the window's
#: maximum amplitude below surrounding values to count as a beat node.
PROMINENCE_FRACTION = 0.1
#: Number of coarse chunks used by the monotone-envelope test and the
#: relative slack allowed between consecutive chunk means.
MONOTONE_CHUNKS = 8
MONOTONE_SLACK = 0.05
#: Modulation depth required before beats count as full energy exchange.
DEPTH_THRESHOLD = 0.5
#: The trend fit ignores envelope points below this fraction of the
#: window maximum: beat nodes pin log(amplitude) to large negative
#: values that carry no information about secular drift.
TREND_FLOOR_FRACTION = 0.2
#: Total log-amplitude drift budget over a run: |slope| < budget / span.
SLOPE_BUDGET = 0.2
#: Steps ignored on a channel after one of its events fired.
EVENT_REFRACTORY_STEPS = 10
#: Steps propagated per matrix-block application.
_BLOCK = 64


class Model(enum.Enum):
    LOSSLESS = "lossless"
    LINEAR = "linear"
    TRANSFER = "transfer"


@dataclass(frozen=True)
class SimConfig:
    """Integration settings; invalid combinations raise ConfigError."""

    model: Model
    dt: float = 1e-3
    t_end: float = 400.0
    sample_stride: int = 10
    initial: StateVector = field(default_factory=lambda: StateVector(1.0, 0.0, 0.0, 0.0))
    allow_large_dt: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive and finite, got {self.dt!r}")
        if self.dt > MAX_TRUSTED_DT and not self.allow_large_dt:
            raise ConfigError(
                f"dt={self.dt!r} exceeds {MAX_TRUSTED_DT} "
                "(set allow_large_dt to override)"
            )
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"t_end must be positive and finite, got {self.t_end!r}")
        if self.t_end / self.dt > MAX_STEPS:
            raise ConfigError(
                f"t_end/dt = {self.t_end / self.dt:.3g} exceeds {MAX_STEPS:.0e} steps"
            )
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ConfigError(
                f"sample_stride must be a positive integer, got {self.sample_stride!r}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class SimResult:
    """A simulated trajectory plus, for the transfer model, its event log."""

    series: TimeSeries
    transfer_log: TransferLog | None = None


@dataclass(frozen=True)
class PeakEvent:
    """One interpolated amplitude extremum of a channel."""

    t: float
    amplitude: float
    sign: int
    channel: str


@dataclass(frozen=True)
class Envelope:
    """Per-channel sequence of (peak time, peak amplitude)."""

    channel: str
    times: np.ndarray
    amplitudes: np.ndarray

    def __len__(self) -> int:
        return self.times.size

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self) else 0.0


@dataclass(frozen=True)
class RabiMetrics:
    """Envelope summary: beat period, modulation depth, secular trend.

    ``rabi_period`` is the mean spacing of qualifying envelope minima
    (``None`` when fewer than two exist).  ``modulation_depth`` is
    ``1 - min/max`` of the envelope over the analysis window, and
    ``trend_slope`` the least-squares slope of ``log(amplitude)`` against
    time over the same window.  When at least two minima exist the window
    runs from the first to the last of them, an integer number of beat
    periods, so the periodic dips do not bias the fitted trend; points
    below ``TREND_FLOOR_FRACTION`` of the window maximum are likewise
    excluded from the fit (not from the depth).
    """

    rabi_period: float | None
    modulation_depth: float
    trend_slope: float


def system_matrix(p: CoupledParams, model: Model) -> np.ndarray:
    """Right-hand-side matrix M with state ordering (x, p, y, q)."""
    a = p.gain_loss_rate if model is Model.LINEAR else 0.0
    eps = p.epsilon
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, -a, -eps, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-eps, 0.0, -1.0, a],
    ])


def derivative(state: StateVector, p: CoupledParams, model: Model) -> StateVector:
    """Time derivative of the state under the chosen model."""
    a = p.gain_loss_rate if model is Model.LINEAR else 0.0
    return StateVector(
        state.p,
        -state.x - p.epsilon * state.y - a * state.p,
        state.q,
        -p.epsilon * state.x - state.y + a * state.q,
    )


def rk4_step(
    f: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    state: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step for a generic RHS."""
    k1 = f(t, state)
    k2 = f(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = f(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_map(matrix: np.ndarray, dt: float) -> np.ndarray:
    """Exact one-step RK4 propagator for the linear system ``V' = M V``.

    Expanding the classical Runge-Kutta stages for a linear right-hand
    side collapses them to ``I + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24``.
    """
    hm = dt * matrix
    eye = np.eye(matrix.shape[0])
    term = eye.copy()
    total = eye.copy()
    for k in range(1, 5):
        term = term @ hm / k
        total = total + term
    return total


def _block_tensor(step_map: np.ndarray, block: int) -> np.ndarray:
    """Stack of powers ``A^1 .. A^block`` applied per propagation block."""
    powers = np.empty((block, 4, 4))
    powers[0] = step_map
    for j in range(1, block):
        powers[j] = powers[j - 1] @ step_map
    return powers


def _parabola_vertex(
    t_mid: float, h: float, d0: float, d1: float, d2: float
) -> tuple[float, float]:
    """Vertex of the parabola through three equally spaced samples."""
    curvature = d0 - 2.0 * d1 + d2
    if curvature == 0.0:
        return t_mid, d1
    offset = 0.5 * h * (d0 - d2) / curvature
    offset = min(max(offset, -h), h)
    value = d1 - (d2 - d0) ** 2 / (8.0 * curvature)
    return t_mid + offset, value


def _sign_crossings(prev_sign: float, velocities: np.ndarray) -> tuple[np.ndarray, float]:
    """Indices k where the velocity sign flips between steps k and k+1.

    ``velocities[0]`` is the velocity at the block's first step; exact
    zeros inherit the last nonzero sign (``prev_sign`` carries context
    from before the block), so a zero touched mid-crossing still counts
    exactly once and a start from rest does not.
    """
    signs = np.sign(velocities)
    filled = signs.copy()
    last = prev_sign
    for i in range(filled.size):
        if filled[i] == 0.0:
            filled[i] = last
        else:
            last = filled[i]
    flips = np.nonzero((filled[:-1] != filled[1:]) & (filled[:-1] != 0.0)
                       & (filled[1:] != 0.0))[0]
    return flips, last


def integrate(cfg: SimConfig, p: CoupledParams) -> SimResult:
    """Integrate the configured model; returns samples and any event log.

    Samples land every ``sample_stride`` steps starting at t = 0.  Any
    state component exceeding ``BLOWUP_LIMIT`` raises StepSizeError.
    For the transfer model the returned :class:`SimResult` carries the
    ledger of extraction/deposit events (packets still queued at the end
    remain incomplete).
    """
    n_steps = cfg.n_steps
    stride = int(cfg.sample_stride)
    dt = cfg.dt
    matrix = system_matrix(p, cfg.model)
    tensor = _block_tensor(rk4_map(matrix, dt), _BLOCK)

    n_samples = n_steps // stride + 1
    states = np.empty((n_samples, 4))
    current = cfg.initial.as_array()
    states[0] = current

    transfer = cfg.model is Model.TRANSFER
    log = TransferLog() if transfer else None
    queue: deque[TransferEvent] = deque()
    keep_fraction = math.sqrt(1.0 - p.transfer_fraction) if transfer else 1.0

    prev_state = current.copy()  # step n-1, for vertex fits at block joins
    have_prev = False
    prev_sign = {  # last nonzero velocity sign per channel
        "x": 0.0,
        "y": 0.0,
    }
    guard = {"x": -1, "y": -1}  # earliest step allowed to host a new event
    step = 0

    while step < n_steps:
        span = min(_BLOCK, n_steps - step)
        block = np.einsum("bij,j->bi", tensor[:span], current)
        peak = np.abs(block[:span]).max()
        if peak > BLOWUP_LIMIT:
            bad = int(np.nonzero(np.abs(block[:span]).max(axis=1) > BLOWUP_LIMIT)[0][0])
            raise StepSizeError(
                f"state magnitude {peak:.3e} exceeded {BLOWUP_LIMIT:.0e} "
                f"near t = {(step + bad + 1) * dt:.6g}"
            )

        cut = span  # how many of the block's steps survive
        event_state: np.ndarray | None = None
        if transfer:
            cut, event_state = _scan_block(
                step, span, current, block, prev_state, have_prev, dt,
                prev_sign, guard, queue, log, keep_fraction, p.transfer_fraction,
            )

        # Record sample-aligned states among surviving steps; if an event
        # modified the state at the cut boundary, record that version.
        first = step + 1
        last = step + cut
        if event_state is not None and cut > 0:
            block[cut - 1] = event_state
        k = first + (-first) % stride
        while k <= last:
            states[k // stride] = block[k - step - 1]
            k += stride

        if cut == 0:
            # Event restarted at the current step: state modified in place.
            assert event_state is not None
            current = event_state
            if step % stride == 0:
                states[step // stride] = current
            # prev_state is unchanged: history predates the modification.
        else:
            prev_state = block[cut - 2] if cut >= 2 else current
            have_prev = True
            current = block[cut - 1]
            step += cut

    dt_sample = dt * stride
    times = np.arange(n_samples) * dt_sample
    series = TimeSeries(dt_sample, times, states)
    return SimResult(series, log)


def _scan_block(
    step: int,
    span: int,
    current: np.ndarray,
    block: np.ndarray,
    prev_state: np.ndarray,
    have_prev: bool,
    dt: float,
    prev_sign: dict[str, float],
    guard: dict[str, int],
    queue: deque[TransferEvent],
    log: TransferLog | None,
    keep_fraction: float,
    transfer_fraction: float,
) -> tuple[int, np.ndarray | None]:
    """Find and apply the first actionable peak event inside a block.

    Returns ``(cut, modified_state)``: the number of block steps to keep
    and, when an event fired, the modified state at step ``step + cut``
    (``cut`` may be zero when the integrator restarts at the block's
    first step).  Non-actionable crossings (sub-noise peaks, y-peaks
    with an empty queue) advance the per-channel guard without touching
    the state.
    """
    assert log is not None
    # Velocity sequences include the block's starting step.
    seq = np.vstack((current[None, :], block[:span]))
    candidates: list[tuple[int, str]] = []
    for channel, col in (("x", 1), ("y", 3)):
        flips, _ = _sign_crossings(prev_sign[channel], seq[:, col])
        for k in flips:
            left = step + int(k)
            if left >= guard[channel]:
                candidates.append((left, channel))
    candidates.sort()

    for left, channel in candidates:
        dcol = 0 if channel == "x" else 2
        # Displacement triplet around the crossing pair (left, left+1).
        k = left - step  # 0-based offset of the pair inside ``seq``
        if k >= 1:
            d0, d1, d2 = seq[k - 1, dcol], seq[k, dcol], seq[k + 1, dcol]
            t_mid = (left) * dt
        elif have_prev:
            d0, d1, d2 = prev_state[dcol], seq[0, dcol], seq[1, dcol]
            t_mid = left * dt
        else:
            # No history yet (crossing at the very first pair of the run).
            d0, d1, d2 = seq[0, dcol], seq[1, dcol], seq[2, dcol]
            t_mid = (left + 1) * dt
        t_peak, d_peak = _parabola_vertex(t_mid, dt, d0, d1, d2)
        amplitude = abs(d_peak)

        guard[channel] = left + EVENT_REFRACTORY_STEPS
        if amplitude <= NOISE_FLOOR:
            continue
        if channel == "y" and not queue:
            continue  # nothing to deposit; the peak passes unused

        # Restart from the step boundary nearest the interpolated peak.
        restart = left if abs(left * dt - t_peak) <= abs((left + 1) * dt - t_peak) \
            else left + 1
        restart = min(restart, step + span)
        offset = restart - step
        state = (current if offset == 0 else block[offset - 1]).copy()

        if channel == "x":
            packet = 0.5 * transfer_fraction * amplitude * amplitude
            event = TransferEvent(
                t_extract=t_peak,
                x_before=amplitude,
                x_after=keep_fraction * amplitude,
                packet_energy=packet,
            )
            log.events.append(event)
            queue.append(event)
            state[0] *= keep_fraction
            state[1] *= keep_fraction
        else:
            event = queue.popleft()
            y_after = math.sqrt(amplitude * amplitude + 2.0 * event.packet_energy)
            event.t_deposit = t_peak
            event.y_before = amplitude
            event.y_after = y_after
            factor = y_after / amplitude
            state[2] *= factor
            state[3] *= factor

        # Sign context must reflect the surviving prefix only.
        for ch, col in (("x", 1), ("y", 3)):
            nz = seq[: offset + 1, col][np.sign(seq[: offset + 1, col]) != 0.0]
            if nz.size:
                prev_sign[ch] = float(np.sign(nz[-1]))
        return offset, state

    for ch, col in (("x", 1), ("y", 3)):
        nz = seq[: span + 1, col][np.sign(seq[: span + 1, col]) != 0.0]
        if nz.size:
            prev_sign[ch] = float(np.sign(nz[-1]))
    return span, None


def detect_peaks(series: TimeSeries, channel: str) -> list[PeakEvent]:
    """Amplitude extrema of one channel, located to sub-sample accuracy.

    A peak is a sign change of the channel's velocity between adjacent
    samples (exact zeros inherit the neighbouring sign; a zero-velocity
    first sample with nonzero displacement counts as a peak at the start).
    Each detection is refined by a quadratic fit through the three
    nearest displacement samples; peaks below ``NOISE_FLOOR`` or closer
    than ten sample intervals to the previous peak are dropped.
    """
    if channel not in ("x", "y"):
        raise ValueError(f"channel must be 'x' or 'y', got {channel!r}")
    disp = series.x if channel == "x" else series.y
    vel = series.p if channel == "x" else series.q
    times = series.times
    n = times.size
    if n < 3:
        return []

    signs = np.sign(vel)
    nonzero = signs != 0.0
    idx = np.where(nonzero, np.arange(n), -1)
    np.maximum.accumulate(idx, out=idx)
    filled = np.where(idx >= 0, signs[np.maximum(idx, 0)], 0.0)
    flip = np.nonzero((filled[:-1] != filled[1:]) & (filled[:-1] != 0.0)
                      & (filled[1:] != 0.0))[0]
    centers = [int(i) if abs(disp[i]) >= abs(disp[i + 1]) else int(i) + 1
               for i in flip]
    if signs[0] == 0.0 and bool(np.any(signs[1:] != 0.0)):
        # Started at rest: treat the initial sample as a candidate peak.
        centers.insert(0, 1)

    dt = series.dt
    peaks: list[PeakEvent] = []
    last_t = -math.inf
    for c in centers:
        c = min(max(c, 1), n - 2)
        t_peak, d_peak = _parabola_vertex(
            float(times[c]), dt, float(disp[c - 1]), float(disp[c]),
            float(disp[c + 1]),
        )
        if abs(d_peak) <= NOISE_FLOOR:
            continue
        if t_peak - last_t < 10.0 * dt:
            continue
        peaks.append(PeakEvent(t_peak, abs(d_peak), 1 if d_peak >= 0 else -1,
                               channel))
        last_t = t_peak
    return peaks


def envelope_of(series: TimeSeries, channel: str) -> Envelope:
    """Envelope (peak-time, amplitude) sequence for one channel."""
    peaks = detect_peaks(series, channel)
    return Envelope(
        channel,
        np.array([pk.t for pk in peaks]),
        np.array([pk.amplitude for pk in peaks]),
    )


def _qualifying_minima(amplitudes: np.ndarray, fraction: float) -> np.ndarray:
    """Indices of local envelope minima with sufficient prominence.

    A minimum qualifies when some earlier and some later envelope value
    both exceed it by ``fraction`` of the window's maximum amplitude,
    which rejects event-scale jitter on otherwise monotone envelopes.
    """
    n = amplitudes.size
    if n < 3:
        return np.empty(0, dtype=int)
    local = np.nonzero(
        (amplitudes[1:-1] < amplitudes[:-2]) & (amplitudes[1:-1] <= amplitudes[2:])
    )[0] + 1
    if local.size == 0:
        return local
    threshold = fraction * float(amplitudes.max())
    before_max = np.maximum.accumulate(amplitudes)
    after_max = np.maximum.accumulate(amplitudes[::-1])[::-1]
    keep = [
        i for i in local
        if before_max[i - 1] - amplitudes[i] >= threshold
        and after_max[i + 1] - amplitudes[i] >= threshold
    ]
    return np.array(keep, dtype=int)


def qualifying_minima_times(
    env: Envelope, fraction: float = PROMINENCE_FRACTION
) -> np.ndarray:
    """Times of the envelope minima used for beat-period estimates."""
    return env.times[_qualifying_minima(env.amplitudes, fraction)]


def rabi_metrics(env: Envelope) -> RabiMetrics:
    """Beat-period, depth, and trend statistics of one envelope."""
    if len(env) < MIN_ENVELOPE_POINTS:
        raise InsufficientDataError(
            f"envelope has {len(env)} points; need {MIN_ENVELOPE_POINTS}"
        )
    minima = _qualifying_minima(env.amplitudes, PROMINENCE_FRACTION)
    if minima.size >= 2:
        lo, hi = int(minima[0]), int(minima[-1])
        window = slice(lo, hi + 1)
        spacings = np.diff(env.times[minima])
        period: float | None = float(spacings.mean())
    else:
        window = slice(None)
        period = None
    amps = env.amplitudes[window]
    times = env.times[window]
    depth = 1.0 - float(amps.min()) / float(amps.max())

    # Secular trend.  With beats present, the envelope between minima is
    # periodic, so the crest of each beat arc is the cleanest trend
    # sample; otherwise fall back to all window points above the floor.
    arc_times: list[float] = []
    arc_amps: list[float] = []
    for a_idx, b_idx in zip(minima[:-1], minima[1:]):
        seg = slice(int(a_idx), int(b_idx) + 1)
        top = int(a_idx) + int(np.argmax(env.amplitudes[seg]))
        arc_times.append(float(env.times[top]))
        arc_amps.append(float(env.amplitudes[top]))
    if len(arc_times) >= 2:
        slope = float(np.polyfit(arc_times, np.log(arc_amps), 1)[0])
    else:
        keep = amps >= TREND_FLOOR_FRACTION * amps.max()
        if keep.sum() < 2:
            keep = np.ones_like(keep, dtype=bool)
        slope = float(np.polyfit(times[keep], np.log(amps[keep]), 1)[0])
    return RabiMetrics(period, depth, slope)


def _monotone_envelope(env: Envelope) -> bool:
    """True when the envelope drifts one way (or saturates) at coarse scale.

    The envelope is averaged over ``MONOTONE_CHUNKS`` consecutive chunks
    and the chunk means must be non-decreasing or non-increasing within
    ``MONOTONE_SLACK`` of the largest mean, so packet-scale sawtooth
    around a limiting amplitude still reads as saturation while genuine
    beats do not.
    """
    means = np.array([
        chunk.mean() for chunk in np.array_split(env.amplitudes, MONOTONE_CHUNKS)
        if chunk.size
    ])
    if means.size < 2:
        return True
    slack = MONOTONE_SLACK * float(means.max())
    deltas = np.diff(means)
    return bool((deltas >= -slack).all() or (deltas <= slack).all())


def classify_dynamics(series: TimeSeries) -> PhaseLabel:
    """Label a run unbroken, broken, or exceptional from its envelopes.

    Unbroken: both channels beat (a defined Rabi period), with deep
    modulation and no secular amplitude trend.  Broken: at least one
    channel has no beat nodes and a monotone (growing or saturating)
    envelope.  Anything else is exceptional.  The trend budget scales
    with the run length: |slope| < SLOPE_BUDGET / span.
    """
    envelopes = [envelope_of(series, ch) for ch in ("x", "y")]
    for env in envelopes:
        if len(env) < MIN_ENVELOPE_POINTS:
            raise InsufficientDataError(
                f"channel {env.channel!r} produced {len(env)} envelope points; "
                f"need {MIN_ENVELOPE_POINTS}"
            )
    span = float(series.times[-1] - series.times[0])
    slope_tol = SLOPE_BUDGET / span
    metrics = [rabi_metrics(env) for env in envelopes]
    unbroken = all(
        m.rabi_period is not None
        and m.modulation_depth > DEPTH_THRESHOLD
        and abs(m.trend_slope) < slope_tol
        for m in metrics
    )
    if unbroken:
        return PhaseLabel.UNBROKEN
    for env in envelopes:
        has_minima = _qualifying_minima(env.amplitudes, PROMINENCE_FRACTION).size > 0
        if not has_minima and _monotone_envelope(env):
            return PhaseLabel.BROKEN
    return PhaseLabel.EXCEPTIONAL
