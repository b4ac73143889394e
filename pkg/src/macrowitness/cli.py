"""Command-line harness: configuration, sweeps, result files and OpenQASM export.

Configuration is one JSON object. Command-line flags override the values
read from ``--config``, which override the built-in defaults. Unknown keys
are rejected by name.

Result formats
--------------
``json``  full records plus a provenance block (config echo, tool version).
``csv``   one row per point. Witness protocols use the columns
          ``theta, n, W, sigma, bound, verdict, shots, seed``; invasiveness
          uses ``state, n, epsilon_ii, invasiveness, sigma, shots, seed``;
          disconnectivity uses ``theta, n, state, gamma, eta, strategy, deltas``.

Exit status: 0 on success, 2 for an invalid configuration or argument,
3 when a run exceeds the qubit capacity.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .circuits import (
    Circuit,
    GateDurations,
    Measure,
    attach_ancilla_measurement,
    basis_preparation_circuit,
    blind_circuit,
    cat_preparation_circuit,
    direct_measure_circuit,
    format_angle,
    prepare_measure_circuits,
    product_preparation_circuit,
    rotation_preparation_circuit,
    to_qasm,
)
from .errors import ArgumentError, CapacityError, MacrowitnessError
from .noise import FITTED_NOISE, NoiseParams
from .protocols import (
    DEFAULT_ETA,
    DEFAULT_PRUNE_FLOOR,
    DEFAULT_SHOTS,
    clumsy_bound,
    disconnectivity,
    invasiveness_test,
    verdict,
    witness_experiment,
)
from .qstate import all_bitstrings
from .simulator import final_state

PROTOCOLS = ("cat-witness", "product-witness", "invasiveness", "disconnectivity", "sweep")
SCENARIOS = {"direct": "direct", "prepare-measure": "prepare-measure", "pm": "prepare-measure"}
FORMATS = ("csv", "json")
DEFAULT_THETAS = tuple(k * math.pi / 8 for k in range(5))

WITNESS_COLUMNS = ["theta", "n", "W", "sigma", "bound", "verdict", "shots", "seed"]
INVASIVENESS_COLUMNS = ["state", "n", "epsilon_ii", "invasiveness", "sigma", "shots", "seed"]
DISCONNECTIVITY_COLUMNS = ["theta", "n", "state", "gamma", "eta", "strategy", "deltas"]

CONFIG_KEYS = {
    "protocol", "n", "theta", "noise", "durations", "shots", "seed", "scenario",
    "serial_ancilla", "output", "format", "workers", "eta", "strategy",
    "prune_floor", "states", "target", "state",
}
NOISE_KEYS = {"t1", "t2", "gamma_errors", "errors_on_measure_only", "per_qubit"}
DURATION_KEYS = {"u3_time", "cnot_time", "h_time", "measure_time"}

EXIT_OK, EXIT_INVALID, EXIT_CAPACITY = 0, 2, 3


class ConfigError(ArgumentError):
    pass


# --- configuration --------------------------------------------------------------

_PI_EXPR = re.compile(r"^\s*(-)?\s*(?:(\d+(?:\.\d*)?)\s*\*\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(value: Any) -> float:
    """A number, or a string such as ``"pi/2"`` or ``"-3*pi/8"``."""
    if isinstance(value, bool):
        raise ConfigError(f"theta: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_EXPR.match(value)
        if m:
            sign, num, den = m.groups()
            x = math.pi * float(num or 1) / float(den or 1)
            return -x if sign else x
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"theta: cannot read {value!r} as an angle")


def _as_int(key: str, value: Any, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    try:
        out = int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if minimum is not None and out < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {out}")
    return out


def _as_list(value: Any) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _parse_noise(value: Any) -> NoiseParams | None:
    if value is None or value == "none":
        return None
    if value == "fitted":
        return FITTED_NOISE
    if not isinstance(value, dict):
        raise ConfigError(f"noise: expected null, \"none\", \"fitted\" or an object, got {value!r}")
    unknown = sorted(set(value) - NOISE_KEYS)
    if unknown:
        raise ConfigError(f"noise: unknown key {unknown[0]!r}")
    per_qubit = []
    for q, sub in sorted((value.get("per_qubit") or {}).items(), key=lambda kv: int(kv[0])):
        p = _parse_noise(sub)
        if p is None:
            raise ConfigError(f"noise.per_qubit[{q}]: override must be an object")
        per_qubit.append((_as_int("noise.per_qubit", q, 0), p))
    try:
        return NoiseParams(
            t1=math.inf if value.get("t1") is None else float(value["t1"]),
            t2=math.inf if value.get("t2") is None else float(value["t2"]),
            gamma_errors=float(value.get("gamma_errors", 0.0)),
            errors_on_measure_only=bool(value.get("errors_on_measure_only", False)),
            per_qubit=tuple(per_qubit),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"noise: {exc}") from None


def _parse_durations(value: Any) -> GateDurations:
    if value is None:
        return GateDurations()
    if not isinstance(value, dict):
        raise ConfigError(f"durations: expected an object, got {value!r}")
    unknown = sorted(set(value) - DURATION_KEYS)
    if unknown:
        raise ConfigError(f"durations: unknown key {unknown[0]!r}")
    try:
        return GateDurations(**{k: float(v) for k, v in value.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"durations: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str = "cat-witness"
    n: tuple[int, ...] = (2,)
    theta: tuple[float, ...] = DEFAULT_THETAS
    noise: NoiseParams | None = None
    durations: GateDurations = field(default_factory=GateDurations)
    shots: int | str = "exact"
    seed: int = 0
    scenario: str = "direct"
    serial_ancilla: bool = False
    output: str | None = None
    format: str | None = None
    workers: int = 1
    eta: float = DEFAULT_ETA
    strategy: str = "prefix"
    prune_floor: float = DEFAULT_PRUNE_FLOOR
    states: tuple[str, ...] | None = None
    target: str | None = None
    state: str = "cat"
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def output_format(self) -> str:
        if self.format:
            return self.format
        if self.output and self.output.lower().endswith(".csv"):
            return "csv"
        return "json"

    def echo(self) -> dict:
        """Normalized configuration for provenance records."""
        out = {
            "protocol": self.protocol,
            "n": list(self.n),
            "theta": list(self.theta),
            "noise": self.raw.get("noise"),
            "durations": asdict(self.durations),
            "shots": self.shots,
            "seed": self.seed,
            "scenario": self.scenario,
            "serial_ancilla": self.serial_ancilla,
            "eta": self.eta,
            "strategy": self.strategy,
            "prune_floor": self.prune_floor,
            "states": list(self.states) if self.states is not None else None,
            "target": self.target,
            "state": self.state,
        }
        return out


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a raw configuration mapping."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration key {unknown[0]!r}")

    protocol = data.get("protocol", "cat-witness")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"protocol: expected one of {', '.join(PROTOCOLS)}, got {protocol!r}")
    ns = tuple(_as_int("n", v, 1) for v in _as_list(data.get("n", 2)))
    if not ns:
        raise ConfigError("n: empty list")
    if protocol not in ("sweep", "product-witness") and len(ns) > 1:
        raise ConfigError(f"n: protocol {protocol!r} takes a single n, got {list(ns)}")
    thetas = tuple(parse_angle(v) for v in _as_list(data.get("theta", list(DEFAULT_THETAS))))
    if not thetas:
        raise ConfigError("theta: empty list")

    shots = data.get("shots", "exact")
    if shots != "exact":
        shots = _as_int("shots", shots, 1)
    scenario = data.get("scenario", "direct")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: expected direct or prepare-measure, got {scenario!r}")
    fmt = data.get("format")
    if fmt is not None and fmt not in FORMATS:
        raise ConfigError(f"format: expected csv or json, got {fmt!r}")
    strategy = data.get("strategy", "prefix")
    if strategy not in ("prefix", "exhaustive"):
        raise ConfigError(f"strategy: expected prefix or exhaustive, got {strategy!r}")
    eta = float(data.get("eta", DEFAULT_ETA))
    if not 0 < eta <= 1:
        raise ConfigError(f"eta: must lie in (0, 1], got {eta}")
    prune_floor = float(data.get("prune_floor", DEFAULT_PRUNE_FLOOR))
    if not 0 <= prune_floor < 1:
        raise ConfigError(f"prune_floor: must lie in [0, 1), got {prune_floor}")
    state = data.get("state", "cat")
    if state not in ("cat", "product"):
        raise ConfigError(f"state: expected cat or product, got {state!r}")

    states = data.get("states")
    if states is not None:
        states = tuple(str(s) for s in _as_list(states))
        for s in states:
            if len(s) != ns[0] or any(b not in "01" for b in s):
                raise ConfigError(f"states: {s!r} is not a {ns[0]}-bit string")
    target = data.get("target")
    if target is not None:
        target = str(target)
        if any(len(target) != n for n in ns) or any(b not in "01" for b in target):
            raise ConfigError(f"target: {target!r} does not match n")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError(f"output: expected a path string, got {output!r}")

    return ExperimentConfig(
        protocol=protocol,
        n=ns,
        theta=thetas,
        noise=_parse_noise(data.get("noise")),
        durations=_parse_durations(data.get("durations")),
        shots=shots,
        seed=_as_int("seed", data.get("seed", 0), 0),
        scenario=SCENARIOS[scenario],
        serial_ancilla=bool(data.get("serial_ancilla", False)),
        output=output,
        format=fmt,
        workers=_as_int("workers", data.get("workers", 1), 1),
        eta=eta,
        strategy=strategy,
        prune_floor=prune_floor,
        states=states,
        target=target,
        state=state,
        raw=dict(data),
    )


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read ``path`` (JSON) and apply ``overrides`` on top."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(data)


# --- running --------------------------------------------------------------------


def preparation(n: int, theta: float | None, kind: str = "cat") -> Circuit:
    if kind == "product":
        return product_preparation_circuit(n)
    return rotation_preparation_circuit(theta) if n == 1 else cat_preparation_circuit(n, theta)


def _bound(n: int, cfg: ExperimentConfig) -> float:
    rec = invasiveness_test("0" * n, n, cfg.noise, cfg.durations, cfg.serial_ancilla)
    return clumsy_bound([rec])


def _point_seed(root: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root, spawn_key=(index,))


def _witness_point(args) -> dict:
    cfg, kind, n, theta, index, bound = args
    prep = preparation(n, theta, kind)
    seed = _point_seed(cfg.seed, index)
    res = witness_experiment(
        prep, cfg.noise, cfg.durations, cfg.scenario, cfg.shots, seed,
        cfg.serial_ancilla, cfg.target, cfg.prune_floor,
    )
    return {
        "theta": theta,
        "n": n,
        "W": res.w,
        "sigma": res.sigma,
        "bound": bound,
        "verdict": verdict(res, bound),
        "shots": cfg.shots,
        "seed": cfg.seed,
        "scenario": res.scenario,
        "target": res.target_outcome,
        "complete": res.complete,
        "p_blind": res.p_blind,
        "p_with_measurement": res.p_with_measurement,
        "joint": {f"{i}|{j}": p for (i, j), p in sorted(res.joint.items())},
    }


def _map(fn, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _witness_rows(cfg: ExperimentConfig) -> list[dict]:
    if cfg.protocol == "product-witness":
        points = [("product", n, None) for n in sorted(set(cfg.n))]
    else:
        points = [("cat", n, t) for n in sorted(set(cfg.n)) for t in sorted(set(cfg.theta))]
    bounds = {n: _bound(n, cfg) for n in sorted({p[1] for p in points})}
    jobs = [(cfg, kind, n, t, k, bounds[n]) for k, (kind, n, t) in enumerate(points)]
    rows = _map(_witness_point, jobs, cfg.workers)
    return sorted(rows, key=lambda r: (r["n"], -1.0 if r["theta"] is None else r["theta"]))


def _invasiveness_rows(cfg: ExperimentConfig) -> list[dict]:
    n = cfg.n[0]
    states = cfg.states or tuple(all_bitstrings(n))
    rows = []
    for k, s in enumerate(states):
        rec = invasiveness_test(
            s, n, cfg.noise, cfg.durations, cfg.serial_ancilla,
            shots=cfg.shots, seed=_point_seed(cfg.seed, k),
        )
        rows.append({
            "state": s,
            "n": n,
            "epsilon_ii": rec.epsilon_ii,
            "invasiveness": rec.invasiveness,
            "sigma": rec.sigma,
            "shots": cfg.shots,
            "seed": cfg.seed,
        })
    return rows


def _disconnectivity_rows(cfg: ExperimentConfig) -> list[dict]:
    n = cfg.n[0]
    thetas = [None] if cfg.state == "product" else sorted(set(cfg.theta))
    rows = []
    for t in thetas:
        rho = final_state(preparation(n, t, cfg.state), cfg.noise, cfg.durations)
        rep = disconnectivity(rho, cfg.eta, cfg.strategy)
        rows.append({
            "theta": t,
            "n": n,
            "state": cfg.state,
            "gamma": rep.gamma,
            "eta": rep.eta,
            "strategy": rep.partition_strategy,
            "deltas": {str(k): v for k, v in sorted(rep.deltas.items())},
        })
    return rows


def execute(cfg: ExperimentConfig) -> dict:
    """Run the configured protocol and return the full result record."""
    if cfg.protocol in ("cat-witness", "sweep", "product-witness"):
        rows = _witness_rows(cfg)
    elif cfg.protocol == "invasiveness":
        rows = _invasiveness_rows(cfg)
    else:
        rows = _disconnectivity_rows(cfg)
    record = {
        "provenance": {"tool": "macrowitness", "version": __version__, "config": cfg.echo()},
        "protocol": cfg.protocol,
        "results": rows,
    }
    if cfg.protocol == "invasiveness":
        record["bound"] = max(r["invasiveness"] for r in rows)
    return record


def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return str(v)


def render(record: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(record, indent=2, sort_keys=True) + "\n"
    protocol = record["protocol"]
    if protocol == "invasiveness":
        columns = INVASIVENESS_COLUMNS
    elif protocol == "disconnectivity":
        columns = DISCONNECTIVITY_COLUMNS
    else:
        columns = WITNESS_COLUMNS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in record["results"]:
        w.writerow([_csv_value(row[c]) for c in columns])
    return buf.getvalue()


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute ``cfg`` and write the result to ``cfg.output`` (or ``stdout``)."""
    text = render(execute(cfg), cfg.output_format)
    if cfg.output:
        path = Path(cfg.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        (stdout or sys.stdout).write(text)
    return EXIT_OK


# --- OpenQASM export --------------------------------------------------------------


def _angle_tag(theta: float) -> str:
    return format_angle(theta).replace("*", "").replace("/", "_").replace("-", "m")


def protocol_circuits(cfg: ExperimentConfig) -> dict[str, Circuit]:
    """Every circuit the configured protocol would execute, keyed by file stem."""
    out: dict[str, Circuit] = {}

    def invasiveness_circuit(bits: str) -> Circuit:
        n = len(bits)
        c = basis_preparation_circuit(bits).widened(2 * n)
        c = attach_ancilla_measurement(c, range(n), range(n, 2 * n), serial=cfg.serial_ancilla)
        return c.with_gates(Measure(range(n), "final"))

    if cfg.protocol == "invasiveness":
        n = cfg.n[0]
        for s in cfg.states or all_bitstrings(n):
            out[f"invasiveness_n{n}_{s}"] = invasiveness_circuit(s)
        return out

    if cfg.protocol == "disconnectivity":
        n = cfg.n[0]
        thetas = [None] if cfg.state == "product" else sorted(set(cfg.theta))
        for t in thetas:
            prep = preparation(n, t, cfg.state)
            stem = f"{cfg.state}_n{n}" + ("" if t is None else f"_theta{_angle_tag(t)}")
            out[stem] = prep.with_gates(Measure(range(n), "final"))
        return out

    if cfg.protocol == "product-witness":
        points = [("product", n, None) for n in sorted(set(cfg.n))]
    else:
        points = [("cat", n, t) for n in sorted(set(cfg.n)) for t in sorted(set(cfg.theta))]
    for kind, n, t in points:
        prep = preparation(n, t, kind)
        stem = f"{kind}_n{n}" + ("" if t is None else f"_theta{_angle_tag(t)}")
        out[f"{stem}_blind"] = blind_circuit(prep)
        if cfg.scenario == "direct":
            out[f"{stem}_direct"] = direct_measure_circuit(prep, serial=cfg.serial_ancilla)
        else:
            first, second = prepare_measure_circuits(prep)
            out[f"{stem}_pm1"] = first
            for bits in all_bitstrings(n):
                out[f"{stem}_pm2_{bits}"] = second(bits)
    for n in sorted({p[1] for p in points}):
        out[f"invasiveness_n{n}_{'0' * n}"] = invasiveness_circuit("0" * n)
    return out


def export_qasm(cfg: ExperimentConfig, directory: str | Path) -> list[Path]:
    """Write one ``.qasm`` file per circuit; returns the paths in sorted order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, circuit in sorted(protocol_circuits(cfg).items()):
        path = directory / f"{stem}.qasm"
        path.write_text(to_qasm(circuit))
        paths.append(path)
    return paths


# --- entry point ------------------------------------------------------------------


def _shots_flag(value: str):
    if value == "exact":
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'exact', got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macrowitness", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"macrowitness {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run the configured protocol and write results"),
        ("export-qasm", "write OpenQASM 2.0 files for every circuit the protocol runs"),
        ("validate", "check a configuration without running it"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", metavar="PATH", help="JSON configuration file")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--shots", type=_shots_flag, metavar="N|exact")
        p.add_argument("--output", metavar="PATH",
                       help="result file (run) or target directory (export-qasm)")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--serial-ancilla", action="store_true", default=None,
                       help="read out ancillas one CNOT at a time")
        p.add_argument("--scenario", choices=("direct", "pm", "prepare-measure"))
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "shots": args.shots,
        "output": args.output,
        "format": args.format,
        "serial_ancilla": args.serial_ancilla,
        "scenario": args.scenario,
    }
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "validate":
            sys.stdout.write(json.dumps({"valid": True, "config": cfg.echo()}, sort_keys=True) + "\n")
            return EXIT_OK
        if args.command == "export-qasm":
            if not cfg.output:
                raise ConfigError("export-qasm needs --output DIR (or an 'output' config key)")
            for path in export_qasm(cfg, cfg.output):
                sys.stdout.write(f"{path}\n")
            return EXIT_OK
        return run(cfg)
    except CapacityError as exc:
        return _fail("capacity", str(exc), EXIT_CAPACITY)
    except (MacrowitnessError, ValueError) as exc:
        return _fail("invalid", str(exc), EXIT_INVALID)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
