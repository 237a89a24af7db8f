"""Command-line front end.

    photonlink budget   --attenuation 0.15 --length 500
    photonlink amplify  --t2 0.8 --s2 0.1 [--oracle] [--mc] [--threshold]
    photonlink repeater --links 2 --p 0.5 --strategy parallel-memory --tau inf
    photonlink sweep    --command amplify --param t2 --start 0.1 --stop 0.9 --num 9

Every command accepts ``--config``, ``--seed``, ``--out`` and ``--format``.
Configs are JSON: ``{"seed": 7, "amplify": {"t2": 0.8}}``.  The effective
config, defaults resolved, is echoed into every output and can be fed back via
``--config`` to regenerate the same rows.

Exit codes: 0 success, 1 configuration error, 2 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from photonlink import amplifier as amp
from photonlink import linkbudget as lb
from photonlink import repeater as rep


class ConfigError(Exception):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ComputationError(Exception):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # float | int | bool | str
    default: Any
    help: str = ""
    choices: tuple[str, ...] | None = None
    optional: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")

    def coerce(self, value: Any, path: str) -> Any:
        if value is None:
            if self.optional:
                return None
            raise ConfigError(path, "value required")
        if self.kind == "bool":
            if isinstance(value, bool):
                return value
            raise ConfigError(path, f"expected true/false, got {value!r}")
        if isinstance(value, bool):
            raise ConfigError(path, f"expected {self.kind}, got {value!r}")
        if self.kind == "float":
            try:
                return float(value)
            except (TypeError, ValueError):
                raise ConfigError(path, f"expected a number, got {value!r}") from None
        if self.kind == "int":
            if isinstance(value, int):
                return value
            if isinstance(value, str) and re.fullmatch(r"\s*[+-]?\d+\s*", value):
                return int(value)
            try:
                f = float(value)
            except (TypeError, ValueError):
                raise ConfigError(path, f"expected an integer, got {value!r}") from None
            if not f.is_integer():
                raise ConfigError(path, f"expected an integer, got {value!r}")
            return int(f)
        value = str(value)
        if self.choices and value not in self.choices:
            raise ConfigError(path, f"expected one of {', '.join(self.choices)}, got {value!r}")
        return value


BUDGET = [
    Param("attenuation", "float", 0.15, "fiber loss, dB/km"),
    Param("length", "float", 500.0, "fiber length, km"),
    Param("clock_rate", "float", 1e10, "source clock, pulses/s"),
    Param("mean_photon", "float", 1.0, "mean photons per pulse"),
    Param("detector_efficiency", "float", 1.0),
    Param("dark_count_rate", "float", 0.0, "dark counts per second"),
    Param("min_rate", "float", 10.0, "minimum useful detections per second for max_distance"),
    Param("ledger", "str", "rounded", "improvement ledger values", choices=("rounded", "exact")),
    Param("diqip_efficiency", "float", None, "heralded end-to-end efficiency (default: detector efficiency)", optional=True),
    Param("diqip_threshold", "float", 0.8),
]

AMPLIFY = [
    Param("t2", "float", 0.8, "resource splitter transmission t^2"),
    Param("s2", "float", 0.1, "input photon probability |s|^2"),
    Param("phase", "float", 0.0, "phase of s, radians"),
    Param("detector", "str", "pnr", choices=("pnr", "threshold")),
    Param("efficiency", "float", 1.0, "detector efficiency"),
    Param("dark", "float", 0.0, "dark click probability per gate"),
    Param("oracle", "bool", False, "use the optical circuit instead of the analytic branches"),
    Param("mc", "bool", False, "add Monte Carlo herald statistics"),
    Param("threshold", "bool", False, "add the amplification threshold t_min"),
    Param("trials", "int", 100_000),
]

REPEATER = [
    Param("links", "int", 2, "number of elementary links"),
    Param("distance", "float", 100.0, "total distance, km"),
    Param("attenuation", "float", 0.2, "dB/km"),
    Param("scheme", "str", "midpoint", choices=("midpoint", "end-to-end")),
    Param("detector_efficiency", "float", 1.0),
    Param("source_success", "float", 1.0),
    Param("p", "float", None, "per-mode link success probability (overrides the fiber model)", optional=True),
    Param("p_swap", "float", 1.0),
    Param("modes", "int", 1, "memory multimode capacity"),
    Param("eta0", "float", 1.0, "memory efficiency"),
    Param("tau", "float", math.inf, "memory storage time, s"),
    Param("fidelity", "float", 1.0, "memory fidelity factor"),
    Param("memory_bandwidth", "float", 1e9, "Hz"),
    Param("photon_bandwidth", "float", 5e7, "Hz"),
    Param("classical_comm", "bool", False, "swap results wait for classical signalling"),
    Param("medium", "str", "fiber", choices=("fiber", "vacuum")),
    Param("slot_duration", "float", None, "seconds (default: link length / signal speed)", optional=True),
    Param("strategy", "str", "parallel-memory", choices=tuple(s.value for s in rep.Strategy)),
    Param("trials", "int", 10_000),
    Param("max_slots", "int", rep.DEFAULT_MAX_SLOTS),
]

SWEEP = [
    Param("command", "str", "amplify", choices=("budget", "amplify", "repeater")),
    Param("param", "str", "t2", "parameter to vary"),
    Param("start", "float", None, optional=True),
    Param("stop", "float", None, optional=True),
    Param("num", "int", None, optional=True),
    Param("values", "str", None, "comma-separated explicit grid", optional=True),
]

COMMANDS = {"budget": BUDGET, "amplify": AMPLIFY, "repeater": REPEATER, "sweep": SWEEP}
GLOBAL_KEYS = {"seed", "format", "command"}


# --- computations -----------------------------------------------------------


def _detector(p: dict) -> amp.DetectorModel:
    return amp.DetectorModel(amp.DetectorKind(p["detector"]), p["efficiency"], p["dark"])


def _check_budget(p: dict) -> Callable[[], dict]:
    try:
        channel = lb.ChannelSpec(p["attenuation"], p["length"])
        source = lb.SourceSpec(p["clock_rate"], p["mean_photon"])
        receiver = lb.ReceiverSpec(p["detector_efficiency"], p["dark_count_rate"])
    except ValueError as exc:
        raise ConfigError("budget", str(exc)) from None
    if not p["min_rate"] > 0:
        raise ConfigError("budget.min_rate", "must be > 0")
    eff = p["diqip_efficiency"] if p["diqip_efficiency"] is not None else p["detector_efficiency"]
    if not 0 <= eff <= 1:
        raise ConfigError("budget.diqip_efficiency", "must lie in [0, 1]")

    def compute() -> dict:
        ledger = lb.direct_link_ledger(rounded=p["ledger"] == "rounded")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            feas = lb.diqip_feasible(eff, p["diqip_threshold"])
        return {
            "attenuation": channel.attenuation,
            "length": channel.length,
            "loss_db": channel.loss_db,
            "transmission": lb.transmission(channel),
            "detection_rate": lb.detection_rate(source, channel, receiver),
            "signal_to_dark": lb.signal_to_dark(source, channel, receiver),
            "min_rate": p["min_rate"],
            "max_distance": lb.max_distance(source, channel.attenuation, receiver, p["min_rate"]),
            "ledger_mode": p["ledger"],
            "ledger_total_db": ledger.total_db,
            "ledger_extension": lb.ledger_extension(ledger, channel.attenuation),
            "diqip_efficiency": eff,
            "diqip_threshold": p["diqip_threshold"],
            "diqip_feasible": feas.feasible,
            "diqip_margin": feas.margin,
            "diqip_out_of_band": feas.out_of_band,
        }

    return compute


def _check_amplify(p: dict, seed: int) -> Callable[[], dict]:
    try:
        qubit = amp.QubitAmplitudes.from_photon_probability(p["s2"], p["phase"])
        resource = amp.ResourceSplit.from_t2(p["t2"])
        detector = _detector(p)
    except ValueError as exc:
        raise ConfigError("amplify", str(exc)) from None
    if p["trials"] < 1:
        raise ConfigError("amplify.trials", "must be >= 1")

    def compute() -> dict:
        row: dict[str, Any] = {"t2": p["t2"], "s2": p["s2"], "phase": p["phase"]}
        g = amp.gain(qubit, resource)
        row["gain"] = g
        row["eta_in"] = qubit.eta
        row["eta_out"] = amp.eta_map(qubit.eta, resource)
        if p["oracle"]:
            outcomes = amp.circuit_oracle(qubit, resource, detector)
            groups = amp.oracle_branches(outcomes)
            row["source"] = "oracle"
            row["p_psi_plus"] = groups["psi+"][0]
            row["p_psi_minus"] = groups["psi-"][0]
            row["p_rejected"] = groups["phi"][0]
            summary = amp.herald_summary(outcomes)
        else:
            branches = {b.outcome.value: b.probability for b in amp.bell_expand(qubit, resource)}
            row["source"] = "analytic"
            row["p_psi_plus"] = branches["psi+"]
            row["p_psi_minus"] = branches["psi-"]
            row["p_rejected"] = branches["phi+"] + branches["phi-"]
            accepted = branches["psi+"] + branches["psi-"]
            summary = amp.HeraldSummary(accepted, abs(qubit.s) ** 2 * g * g, None)
        row["herald_probability"] = summary.herald_probability
        row["conditional_photon_probability"] = summary.conditional_photon_probability
        if p["threshold"]:
            t_min = amp.amplification_threshold(qubit, detector)
            row["t_min"] = t_min
            row["t_min2"] = t_min * t_min
        if p["mc"]:
            stats = amp.amplify_mc(qubit, resource, detector, p["trials"], seed)
            row["mc_trials"] = stats.trials
            row["mc_herald_probability"] = stats.herald_probability
            row["mc_conditional_photon_probability"] = stats.conditional_photon_probability
            row["mc_fidelity_to_analytic"] = stats.fidelity_to_analytic
        return row

    return compute


def _check_repeater(p: dict, seed: int) -> Callable[[], dict]:
    try:
        memory = rep.MemorySpec(p["eta0"], p["tau"], p["modes"], p["memory_bandwidth"], p["fidelity"])
        config = rep.RepeaterConfig(
            total_distance=p["distance"],
            num_links=p["links"],
            attenuation=p["attenuation"],
            link_scheme=p["scheme"],
            detector_efficiency=p["detector_efficiency"],
            source_success=p["source_success"],
            swap_success=p["p_swap"],
            slot_duration=p["slot_duration"],
            medium=p["medium"],
            classical_comm=p["classical_comm"],
            memory=memory,
            photon_bandwidth=p["photon_bandwidth"],
            link_success=p["p"],
        )
    except ValueError as exc:
        raise ConfigError("repeater", str(exc)) from None
    for key in ("trials", "max_slots"):
        if p[key] < 1:
            raise ConfigError(f"repeater.{key}", "must be >= 1")
    strategy = rep.Strategy(p["strategy"])

    def compute() -> dict:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = rep.simulate_chain(config, strategy, p["trials"], seed, p["max_slots"])
        p_link = rep.link_success_prob(config)
        ideal = config.swap_success == 1.0 and not config.classical_comm and (
            math.isinf(memory.storage_time) or strategy is rep.Strategy.PARALLEL_NO_MEMORY
        )
        quant = result.quantiles()
        return {
            "strategy": strategy.value,
            "links": config.num_links,
            "link_length": config.link_length,
            "p_link": p_link,
            "p_eff": rep.multiplexed_success(p_link, memory.multimode_capacity),
            "trials": result.trials,
            "delivered_fraction": result.delivered_fraction,
            "mean_slots": result.mean_slots,
            "std_error": result.std_error,
            "variance_slots": result.variance_slots,
            "q50": quant[0.5],
            "q90": quant[0.9],
            "q99": quant[0.99],
            "analytic_slots": rep.expected_time_analytic(
                config.num_links, p_link, memory.multimode_capacity, strategy
            ),
            "analytic_applies": ideal,
            "slot_duration": result.slot_duration,
            "medium": config.medium.value,
            "rate": result.end_to_end_rate,
            "mean_retrieval_efficiency": result.mean_retrieval_efficiency,
            "mean_fidelity": result.mean_fidelity,
            "memory_margin": result.memory_margin,
            "schedule": "doubling" if config.canonical_schedule else "left-associative",
        }

    return compute


def _checker(command: str, params: dict, seed: int) -> Callable[[], dict]:
    if command == "budget":
        return _check_budget(params)
    if command == "amplify":
        return _check_amplify(params, seed)
    return _check_repeater(params, seed)


# --- config resolution -------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in data:
        if key not in COMMANDS and key not in GLOBAL_KEYS:
            raise ConfigError(key, "unknown key")
    return data


def _resolve(command: str, file_block: Any, cli_values: dict, path: str) -> dict:
    table = {p.name: p for p in COMMANDS[command]}
    if file_block is None:
        file_block = {}
    if not isinstance(file_block, dict):
        raise ConfigError(path, "expected an object")
    for key in file_block:
        if key not in table:
            raise ConfigError(f"{path}.{key}", "unknown key")
    resolved = {}
    for name, param in table.items():
        if name in cli_values:
            value = cli_values[name]
        elif name in file_block:
            value = file_block[name]
        else:
            value = param.default
        resolved[name] = param.coerce(value, f"{path}.{name}")
    return resolved


def _parse_assignments(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError("sweep.set", f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value
    return out


def _sweep_grid(p: dict) -> list[float]:
    if p["values"] is not None:
        try:
            return [float(v) for v in p["values"].split(",") if v.strip()]
        except ValueError:
            raise ConfigError("sweep.values", "expected comma-separated numbers") from None
    if p["start"] is None or p["stop"] is None or p["num"] is None:
        raise ConfigError("sweep", "give either values or start, stop and num")
    if p["num"] < 1:
        raise ConfigError("sweep.num", "must be >= 1")
    return [float(v) for v in np.linspace(p["start"], p["stop"], p["num"])]


# --- output ------------------------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def render(rows: list[dict], config: dict, fmt: str) -> str:
    if fmt == "structured":
        return json.dumps({"config": config, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    header: list[str] = []
    for row in rows:
        header.extend(k for k in row if k not in header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(k)) for k in header])
    return buf.getvalue()


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".photonlink-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("argv", message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (u64)")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "structured"), default=argparse.SUPPRESS)

    parser = _Parser(prog="photonlink", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, table in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common])
        for param in table:
            if param.kind == "bool":
                sp.add_argument(param.flag, dest=param.name, action="store_true", default=argparse.SUPPRESS, help=param.help)
            else:
                sp.add_argument(param.flag, dest=param.name, default=argparse.SUPPRESS, help=param.help)
        if name == "sweep":
            sp.add_argument("--set", dest="assignments", action="append", default=[], help="base parameter key=value")
    return parser


def execute(argv: Sequence[str]) -> tuple[str, str | None]:
    """Parse, validate and compute; returns the rendered output and target path."""
    args = vars(build_parser().parse_args(list(argv)))
    command = args.pop("subcommand")
    config_path = args.pop("config")
    out = args.pop("out")
    assignments = args.pop("assignments", [])
    data = _load_config(config_path)

    if "command" in data and data["command"] != command:
        raise ConfigError("command", f"config is for {data['command']!r}, not {command!r}")
    seed = Param("seed", "int", 0).coerce(args.pop("seed", data.get("seed", 0)), "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    fmt = Param("format", "str", "csv", choices=("csv", "structured")).coerce(
        args.pop("format", data.get("format", "csv")), "format"
    )

    params = _resolve(command, data.get(command), args, command)
    echo: dict[str, Any] = {"command": command, "seed": seed, "format": fmt, command: params}

    if command != "sweep":
        compute = _checker(command, params, seed)
        try:
            rows = [compute()]
        except (ValueError, ZeroDivisionError) as exc:
            raise ComputationError(f"{command}: {exc}") from None
        return render(rows, echo, fmt), out

    target = params["command"]
    base_cli = _parse_assignments(assignments)
    base_file = data.get(target) or {}
    if not isinstance(base_file, dict):
        raise ConfigError(target, "expected an object")
    base = _resolve(target, {**base_file, **base_cli}, {}, target)
    if params["param"] not in base:
        raise ConfigError("sweep.param", f"{target} has no parameter {params['param']!r}")
    grid = _sweep_grid(params)
    table = {p.name: p for p in COMMANDS[target]}
    checks = []
    for i, value in enumerate(grid):
        point = dict(base)
        point[params["param"]] = table[params["param"]].coerce(value, f"sweep.values[{i}]")
        checks.append((value, _checker(target, point, seed)))
    rows = []
    for value, compute in checks:
        try:
            rows.append({"sweep_" + params["param"]: value, **compute()})
        except (ValueError, ZeroDivisionError) as exc:
            raise ComputationError(f"sweep {params['param']}={value}: {exc}") from None
    echo[target] = base
    return render(rows, echo, fmt), out


def run(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if any(a in ("-h", "--help") for a in argv):
        try:
            build_parser().parse_args(list(argv))
        except SystemExit as exc:
            return int(exc.code or 0)
    try:
        text, out = execute(argv)
    except ConfigError as exc:
        print(f"photonlink: config error: {exc}", file=sys.stderr)
        return 1
    except ComputationError as exc:
        print(f"photonlink: computation error: {exc}", file=sys.stderr)
        return 2
    _write(text, out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
