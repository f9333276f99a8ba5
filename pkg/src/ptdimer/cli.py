"""Command-line driver: simulate, spectrum, classify, tof, sweep, boundary.

Each subcommand mirrors one module capability and emits the file formats
defined there (trajectory/transfer-log/phase-map/boundary CSV, spectrum
and time-of-flight JSON).  Alongside every file output the driver writes
a run manifest recording the subcommand, the *complete* parameter record
(defaults included), the emitted files, the tool version, and start and
finish timestamps, so any run can be reproduced from its manifest alone.

Parameters resolve in three layers: built-in defaults, then an optional
TOML config file (``--config``, flat ``key = value`` pairs named after
the long flags with underscores), then explicit flags, which win.

Exit codes: 0 success; 1 invalid parameters or configuration; 2 numerical
failure (blow-up, non-convergence, undecidable classification); 3 I/O
error.  Diagnostics go to standard error only; data goes to files, or to
standard output where ``--out -`` is supported.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from ._version import __version__
from .core import (
    FLOAT_FMT,
    CoupledParams,
    StateVector,
    TwoBoxParams,
    read_trajectory_csv,
)
from .dynamics import Model, SimConfig, classify_dynamics, integrate
from .errors import (
    BranchError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InsufficientDataError,
    NoTransitionError,
    PtDimerError,
    SingularityError,
    StepSizeError,
    ValidationError,
)
from .spectral import (
    modal_eigenvalues,
    modal_report_json,
    two_box_critical_coupling,
    two_box_eigenvalues,
)
from .sweep import (
    GridSpec,
    PhaseMap,
    SweepMode,
    grid_from_manifest,
    read_phase_map_labels,
    refine_boundary,
    run_sweep,
    sweep_manifest_json,
    write_boundary_csv,
    write_phase_map_csv,
)
from .time_of_flight import TofRequest, time_of_flight, tof_report_json

__all__ = ["main"]

_REQUIRED = object()


class _UsageError(Exception):
    """Raised in place of argparse's SystemExit so main() can return 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise _UsageError(message)


@dataclasses.dataclass(frozen=True)
class _Flag:
    name: str                      # long option, e.g. "--t-end"
    kind: Any                      # float, int, str, or "bool"
    default: Any                   # canonical default or _REQUIRED
    help: str
    choices: tuple[str, ...] | None = None

    @property
    def dest(self) -> str:
        return self.name.lstrip("-").replace("-", "_")


_MODEL_NAMES = tuple(m.value for m in Model)
_MODE_NAMES = tuple(m.value for m in SweepMode)

_COMMON = [
    _Flag("--config", str, "", "TOML file of key = value defaults (flags win)"),
    _Flag("--manifest", str, "",
          "run-manifest path ('' = derive from --out, 'none' = skip)"),
]

_SUBCOMMANDS: dict[str, tuple[str, list[_Flag]]] = {
    "simulate": ("integrate one trajectory and write it as CSV", [
        _Flag("--model", str, "lossless", "dynamical model", _MODEL_NAMES),
        _Flag("--epsilon", float, _REQUIRED, "frequency-splitting parameter"),
        _Flag("--a", float, 0.0, "gain/loss rate (linear model)"),
        _Flag("--g", float, 0.0, "transfer fraction (transfer model)"),
        _Flag("--dt", float, 1e-3, "integration step"),
        _Flag("--t-end", float, 400.0, "final time"),
        _Flag("--init", str, "1,0,0,0", "initial state x,p,y,q"),
        _Flag("--stride", int, 10, "keep every N-th sample"),
        _Flag("--allow-large-dt", "bool", False, "permit dt above the trusted cap"),
        _Flag("--out", str, "trajectory.csv", "trajectory CSV path ('-' = stdout)"),
        _Flag("--transfer-out", str, "",
              "transfer-log CSV path ('' = derive, 'none' = skip)"),
    ]),
    "spectrum": ("eigenvalues and phase label for one parameter point", [
        _Flag("--epsilon", float, None, "splitting parameter (modal problem)"),
        _Flag("--a", float, 0.0, "gain/loss rate (modal problem)"),
        _Flag("--magnitude", float, None, "complex-frequency magnitude (two-box)"),
        _Flag("--theta", float, None, "complex-frequency phase angle (two-box)"),
        _Flag("--g", float, 0.0, "coupling strength (two-box)"),
        _Flag("--format", str, "json", "output format", ("json", "csv")),
        _Flag("--out", str, "-", "output path ('-' = stdout)"),
    ]),
    "classify": ("phase label for a previously written trajectory CSV", [
        _Flag("--in", str, _REQUIRED, "trajectory CSV to analyse"),
        _Flag("--format", str, "text", "output format", ("text", "json")),
        _Flag("--out", str, "-", "output path ('-' = stdout)"),
    ]),
    "tof": ("truncated time-of-flight integral with tail bound", [
        _Flag("--epsilon", float, _REQUIRED, "potential exponent offset"),
        _Flag("--energy", float, 1.0, "particle energy"),
        _Flag("--cutoff", float, 1e4, "truncation half-width L"),
        _Flag("--accuracy", float, 1e-6, "quadrature accuracy target"),
        _Flag("--scheme", str, "adaptive", "quadrature engine",
              ("adaptive", "fixed")),
        _Flag("--format", str, "json", "output format", ("json", "csv")),
        _Flag("--out", str, "-", "output path ('-' = stdout)"),
    ]),
    "sweep": ("classify the phase over a parameter grid", [
        _Flag("--mode", str, "spectral-eps-a", "sweep mode", _MODE_NAMES),
        _Flag("--epsilon-range", str, _REQUIRED, "epsilon axis as lo,hi,n"),
        _Flag("--param-range", str, _REQUIRED, "second axis as lo,hi,n"),
        _Flag("--workers", int, 1, "parallel worker processes"),
        _Flag("--dt", float, 1e-3, "integration step (dynamical modes)"),
        _Flag("--t-end", float, 400.0, "per-cell final time (dynamical modes)"),
        _Flag("--stride", int, 10, "sample stride (dynamical modes)"),
        _Flag("--init", str, "1,0,0,0", "initial state (dynamical modes)"),
        _Flag("--out", str, "phase_map.csv", "phase-map CSV path"),
    ]),
    "boundary": ("refine a swept phase boundary by bisection", [
        _Flag("--map", str, _REQUIRED, "phase-map CSV from a sweep run"),
        _Flag("--sweep-manifest", str, _REQUIRED,
              "manifest JSON written by that sweep run"),
        _Flag("--iterations", int, 20, "bisection iterations per column"),
        _Flag("--out", str, "boundary.csv", "boundary CSV path"),
    ]),
}


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="ptdimer",
        description="Gain/loss oscillator-pair simulator and phase-analysis tools.",
        epilog="Exit codes: 0 ok, 1 invalid input, 2 numerical failure, 3 I/O.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (blurb, flags) in _SUBCOMMANDS.items():
        sub = subs.add_parser(name, help=blurb, description=blurb)
        for flag in flags + _COMMON:
            if flag.kind == "bool":
                sub.add_argument(flag.name, dest=flag.dest, action="store_true",
                                 default=argparse.SUPPRESS, help=flag.help)
            else:
                sub.add_argument(flag.name, dest=flag.dest, type=flag.kind,
                                 default=argparse.SUPPRESS, help=flag.help,
                                 choices=flag.choices,
                                 metavar=flag.dest.upper())
    return parser


def _coerce(flag: _Flag, value: Any) -> Any:
    """Convert one config-file value onto a flag's type, or complain."""
    if flag.kind == "bool":
        if isinstance(value, bool):
            return value
        raise ConfigError(f"config key {flag.dest!r} must be a boolean")
    if flag.kind is float and isinstance(value, (int, float)) \
            and not isinstance(value, bool):
        return float(value)
    if flag.kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if flag.kind is str and isinstance(value, str):
        if flag.choices and value not in flag.choices:
            raise ConfigError(
                f"config key {flag.dest!r} must be one of {flag.choices}"
            )
        return value
    raise ConfigError(
        f"config key {flag.dest!r} has incompatible type {type(value).__name__}"
    )


def _load_config(path: str, command: str) -> dict[str, Any]:
    try:
        raw = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config file {path!r}: {exc}") from exc
    by_dest = {f.dest: f for f in _SUBCOMMANDS[command][1] + _COMMON}
    values: dict[str, Any] = {}
    for key, value in raw.items():
        flag = by_dest.get(key)
        if flag is None:
            raise ConfigError(f"unknown config key {key!r} for {command!r}")
        values[key] = _coerce(flag, value)
    return values


def _merge_params(command: str, explicit: dict[str, Any]) -> dict[str, Any]:
    """Layer defaults <- config file <- explicit flags; check required."""
    flags = _SUBCOMMANDS[command][1] + _COMMON
    params = {f.dest: f.default for f in flags if f.default is not _REQUIRED}
    config_path = explicit.get("config", params.get("config", ""))
    if config_path:
        params.update(_load_config(config_path, command))
    params.update(explicit)
    missing = sorted(
        f.dest for f in flags
        if f.default is _REQUIRED and f.dest not in params
    )
    if missing:
        raise ValidationError([(m, "required parameter missing") for m in missing])
    return params


def _parse_init(text: str) -> StateVector:
    parts = text.split(",")
    try:
        values = [float(s) for s in parts]
    except ValueError:
        values = []
    if len(values) != 4:
        raise ValidationError(
            [("init", f"expected four comma-separated numbers, got {text!r}")]
        )
    return StateVector(*values)


def _parse_range(text: str, field: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) == 3:
        try:
            return float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            pass
    raise ValidationError([(field, f"expected lo,hi,n with integer n, got {text!r}")])


def _emit_text(text: str, out: str) -> list[str]:
    """Write text to a file (returning its path) or to standard output."""
    if out == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return []
    Path(out).write_text(text if text.endswith("\n") else text + "\n")
    return [out]


# ---------------------------------------------------------------------------
# subcommand handlers: params -> (output paths, extra manifest fields)
# ---------------------------------------------------------------------------

def _cmd_simulate(params: dict[str, Any]) -> tuple[list[str], dict]:
    model = Model(params["model"])
    cp = CoupledParams(
        epsilon=params["epsilon"],
        gain_loss_rate=params["a"],
        transfer_fraction=params["g"],
    )
    cfg = SimConfig(
        model=model,
        dt=params["dt"],
        t_end=params["t_end"],
        sample_stride=params["stride"],
        initial=_parse_init(params["init"]),
        allow_large_dt=params["allow_large_dt"],
    )
    result = integrate(cfg, cp)
    outputs: list[str] = []
    out = params["out"]
    if out == "-":
        result.series.write_csv(sys.stdout)
    else:
        result.series.write_csv(out)
        outputs.append(out)
    transfer_out = params["transfer_out"]
    if not transfer_out and model is Model.TRANSFER and out != "-":
        transfer_out = str(Path(out).with_suffix("")) + ".transfer.csv"
    if transfer_out and transfer_out != "none" and result.transfer_log is not None:
        result.transfer_log.write_csv(transfer_out)
        outputs.append(transfer_out)
    return outputs, {}


def _spectrum_csv(rows: Sequence[complex]) -> str:
    lines = ["re,im"]
    lines += [f"{FLOAT_FMT % z.real},{FLOAT_FMT % z.imag}" for z in rows]
    return "\n".join(lines) + "\n"


def _cmd_spectrum(params: dict[str, Any]) -> tuple[list[str], dict]:
    two_box = [params["magnitude"], params["theta"]]
    if any(v is not None for v in two_box):
        if any(v is None for v in two_box):
            raise ValidationError([
                ("magnitude/theta", "the two-box problem needs both values"),
            ])
        tb = TwoBoxParams(magnitude=params["magnitude"], theta=params["theta"],
                          coupling=params["g"])
        spectrum = two_box_eigenvalues(tb)
        eigenvalues: Sequence[complex] = spectrum.eigenvalues
        payload = json.dumps({
            "eigenvalues": [[z.real, z.imag] for z in eigenvalues],
            "phase": spectrum.phase.value,
            "critical_coupling": two_box_critical_coupling(tb),
        }, sort_keys=True)
    else:
        if params["epsilon"] is None:
            raise ValidationError(
                [("epsilon", "required for the modal spectrum")]
            )
        cp = CoupledParams(epsilon=params["epsilon"],
                           gain_loss_rate=params["a"])
        modal = modal_eigenvalues(cp)
        eigenvalues = modal.eigenvalues
        payload = modal_report_json(modal)
    text = payload if params["format"] == "json" else _spectrum_csv(eigenvalues)
    return _emit_text(text, params["out"]), {}


def _cmd_classify(params: dict[str, Any]) -> tuple[list[str], dict]:
    series = read_trajectory_csv(params["in"])
    label = classify_dynamics(series)
    if params["format"] == "json":
        text = json.dumps({"label": label.value}, sort_keys=True)
    else:
        text = label.value
    return _emit_text(text, params["out"]), {}


def _tof_csv(report: str) -> str:
    obj = json.loads(report)
    header = "T_re,T_im,tail_bound,converged,L,epsilon,E"
    row = ",".join([
        FLOAT_FMT % obj["T"][0],
        FLOAT_FMT % obj["T"][1],
        FLOAT_FMT % obj["tail_bound"],
        "true" if obj["converged"] else "false",
        FLOAT_FMT % obj["L"],
        FLOAT_FMT % obj["epsilon"],
        FLOAT_FMT % obj["E"],
    ])
    return f"{header}\n{row}\n"


def _cmd_tof(params: dict[str, Any]) -> tuple[list[str], dict]:
    req = TofRequest(
        epsilon=params["epsilon"],
        energy=params["energy"],
        cutoff=params["cutoff"],
        target_accuracy=params["accuracy"],
    )
    report = tof_report_json(time_of_flight(req, scheme=params["scheme"]))
    text = report if params["format"] == "json" else _tof_csv(report)
    return _emit_text(text, params["out"]), {}


def _cmd_sweep(params: dict[str, Any]) -> tuple[list[str], dict]:
    out = params["out"]
    if out == "-":
        raise ValidationError(
            [("out", "sweep output must be a file path, not '-'")]
        )
    mode = SweepMode(params["mode"])
    sim = None
    if mode.dynamical:
        model = Model.TRANSFER if mode is SweepMode.DYNAMICAL_EPS_G else Model.LINEAR
        sim = SimConfig(
            model=model,
            dt=params["dt"],
            t_end=params["t_end"],
            sample_stride=params["stride"],
            initial=_parse_init(params["init"]),
        )
    spec = GridSpec(
        epsilon_range=_parse_range(params["epsilon_range"], "epsilon_range"),
        param_range=_parse_range(params["param_range"], "param_range"),
        mode=mode,
        sim=sim,
    )
    start = time.perf_counter()
    pmap = run_sweep(spec, workers=params["workers"])
    wall = time.perf_counter() - start
    write_phase_map_csv(pmap, out)
    extra = json.loads(sweep_manifest_json(pmap, wall_seconds=wall))
    return [out], extra


def _cmd_boundary(params: dict[str, Any]) -> tuple[list[str], dict]:
    out = params["out"]
    if out == "-":
        raise ValidationError(
            [("out", "boundary output must be a file path, not '-'")]
        )
    spec = grid_from_manifest(Path(params["sweep_manifest"]).read_text())
    labels = read_phase_map_labels(params["map"])
    pmap = PhaseMap(grid=spec, labels=labels)
    points = refine_boundary(pmap, iterations=params["iterations"])
    write_boundary_csv(points, out)
    return [out], {}


_HANDLERS: dict[str, Callable[[dict[str, Any]], tuple[list[str], dict]]] = {
    "simulate": _cmd_simulate,
    "spectrum": _cmd_spectrum,
    "classify": _cmd_classify,
    "tof": _cmd_tof,
    "sweep": _cmd_sweep,
    "boundary": _cmd_boundary,
}


def _manifest_path(params: dict[str, Any]) -> str:
    requested = params.get("manifest", "")
    if requested == "none":
        return ""
    if requested:
        return requested
    out = params.get("out", "-")
    if out and out != "-":
        return out + ".manifest.json"
    return ""


def _write_manifest(path: str, command: str, params: dict[str, Any],
                    outputs: list[str], started: str, finished: str,
                    extra: dict) -> None:
    payload = dict(extra)
    payload.update({
        "command": command,
        "params": params,
        "outputs": outputs,
        "tool_version": __version__,
        "started": started,
        "finished": finished,
    })
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        namespace = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"ptdimer: error: {exc}", file=sys.stderr)
        return 1
    explicit = vars(namespace)
    command = explicit.pop("command")
    started = _timestamp()
    try:
        params = _merge_params(command, explicit)
        outputs, extra = _HANDLERS[command](params)
        manifest = _manifest_path(params)
        if manifest:
            _write_manifest(manifest, command, params, outputs,
                            started, _timestamp(), extra)
    except (ValidationError, ConfigError, DomainError, BranchError) as exc:
        print(f"ptdimer: error: {exc}", file=sys.stderr)
        return 1
    except (StepSizeError, ConvergenceError, SingularityError,
            InsufficientDataError, NoTransitionError) as exc:
        print(f"ptdimer: numerical failure: {exc}", file=sys.stderr)
        return 2
    except PtDimerError as exc:  # safety net for future subclasses
        print(f"ptdimer: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ptdimer: i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
