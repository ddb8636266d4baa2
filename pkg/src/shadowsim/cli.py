"""Command-line front end: single computations and parameter sweeps as CSV or JSON.

Channel specs::

    depolarizing | ad | dephasing      parametric qubit channels, parameter from ``--p``
    depolarizing:0.9                   inline parameter
    identity:4                         identity channel on 4 levels
    <spec>^2                           tensor power
    path/to/choi.json                  Choi operator file ({in_dim, out_dim, re, im})

Exit codes: 0 success, 2 bad arguments, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np

from . import programs
from .channels import (ChoiOperator, amplitude_damping_choi, branch_decomposition, dephasing_choi,
                       depolarizing_choi, identity_choi, tensor_power)
from .sampling import SamplingPlan, hoeffding_rounds, run, true_expectation
from .sdp import SdpError

CSV_FIELDS = ("task", "source", "target", "gamma", "eps", "value", "status", "gap", "seed")
TASK_NAMES = ("capacity", "simcost", "min-error", "min-cost", "diamond", "sample")
EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 2, 3

_PARAMETRIC = {"depolarizing": depolarizing_choi, "depo": depolarizing_choi, "ad": amplitude_damping_choi,
               "amplitude-damping": amplitude_damping_choi, "dephasing": dephasing_choi, "deph": dephasing_choi}


class UsageError(ValueError):
    pass


def parse_channel(spec: str, p: float | None = None, power: int = 1) -> ChoiOperator:
    """Build a Choi operator from the channel mini-language (see module docstring)."""
    text = spec.strip()
    if "^" in text:
        text, _, k = text.rpartition("^")
        try:
            power *= int(k)
        except ValueError as exc:
            raise UsageError(f"bad tensor power in {spec!r}") from exc
    if text.endswith(".json"):
        path = Path(text)
        if not path.exists():
            raise UsageError(f"Choi file {text!r} not found")
        try:
            choi = ChoiOperator.from_json(path.read_text())
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read Choi file {text!r}: {exc}") from exc
    else:
        kind, _, arg = text.partition(":")
        kind = kind.lower()
        if kind == "identity":
            if not arg:
                raise UsageError("identity needs a dimension, e.g. identity:2")
            try:
                d = int(arg)
            except ValueError as exc:
                raise UsageError(f"bad identity dimension in {spec!r}") from exc
            if d < 1:
                raise UsageError("identity dimension must be positive")
            choi = identity_choi(d)
        elif kind in _PARAMETRIC:
            value = float(arg) if arg else p
            if value is None:
                raise UsageError(f"channel {kind!r} needs a parameter (--p or {kind}:p)")
            try:
                choi = _PARAMETRIC[kind](value)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
        else:
            raise UsageError(f"unknown channel kind {kind!r}")
    if power < 1:
        raise UsageError("tensor power must be >= 1")
    return tensor_power(choi, power) if power > 1 else choi


def channel_label(spec: str | None, p: float | None, power: int) -> str:
    if spec is None:
        return ""
    label = spec
    base = spec.split("^")[0]
    if base.split(":")[0].lower() in _PARAMETRIC and ":" not in base and p is not None:
        label = f"{base}:{p!r}" + spec[len(base):]
    if power > 1:
        label += f"^{power}"
    return label


# ---------------------------------------------------------------------------
# evaluation of a single point


@dataclass(frozen=True)
class Point:
    task: str
    source: ChoiOperator | None
    target: ChoiOperator | None
    source_label: str
    target_label: str
    gamma: float | None = None
    eps: float | None = None
    seed: int | None = None
    method: str = "auto"
    quantum: bool = False
    observable: str = "Z"
    state: str = "0"
    rounds: int | None = None
    delta: float = 0.01
    code_eps: float = 0.0


def _pauli(label: str) -> np.ndarray:
    table = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]),
             "Z": np.diag([1.0, -1.0])}
    try:
        return reduce(np.kron, [table[c] for c in label.upper()]).astype(complex)
    except KeyError as exc:
        raise UsageError(f"observable must be a Pauli string, got {label!r}") from exc


def _product_state(label: str) -> np.ndarray:
    kets = {"0": np.array([1, 0]), "1": np.array([0, 1]), "+": np.array([1, 1]) / np.sqrt(2),
            "-": np.array([1, -1]) / np.sqrt(2)}
    try:
        v = reduce(np.kron, [kets[c] for c in label]).astype(complex)
    except KeyError as exc:
        raise UsageError(f"state must be a string over 0 1 + -, got {label!r}") from exc
    return np.outer(v, v.conj())


def evaluate(point: Point) -> dict:
    """Run one computation and return its output row (also used by sweep workers)."""
    row = {"task": point.task, "source": point.source_label, "target": point.target_label,
           "gamma": point.gamma, "eps": point.eps, "seed": point.seed}
    t = point.task
    if t == "capacity":
        res = programs.shadow_capacity(point.source, point.gamma)
    elif t == "simcost":
        res = programs.shadow_sim_cost(point.target, point.gamma)
    elif t == "min-error":
        if point.quantum:
            res = programs.min_error_quantum(point.source, point.target)
        else:
            res = programs.min_error_ns(point.source, point.target, point.gamma, method=point.method)
    elif t == "min-cost":
        res = programs.min_cost_ns(point.source, point.target, point.eps, method=point.method)
    elif t == "diamond":
        res = programs.diamond_result(point.source, point.target)
    elif t == "sample":
        return _sample_row(point, row)
    else:
        raise UsageError(f"unknown task {t!r}")
    row.update(value=res.value, status=res.status, gap=res.gap, details=res.details)
    return row


def _sample_row(point: Point, row: dict) -> dict:
    code = programs.min_cost_ns(point.source, point.target, point.code_eps, method=point.method)
    if code.status != "optimal":
        row.update(value=float("nan"), status=code.status, gap=code.gap, details={})
        return row
    dec = branch_decomposition(code.realized_code, point.source)
    obs = _pauli(point.observable)
    rho = _product_state(point.state)
    rounds = point.rounds
    if rounds is None:
        rounds = hoeffding_rounds(dec.cost, point.eps if point.eps else 0.05, point.delta)
    plan = SamplingPlan(dec, obs, rho, rounds, seed=point.seed or 0)
    est = run(plan)
    row.update(value=est.xi, status="optimal", gap=code.gap,
               details={"rounds": rounds, "gamma": dec.cost, "expected": true_expectation(dec, obs, rho)})
    return row


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_rows(rows: list[dict], fmt: str, stream) -> None:
    if fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in CSV_FIELDS])
    else:
        def clean(v):
            if isinstance(v, float) and not np.isfinite(v):
                return str(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v
        json.dump([{k: clean(v) for k, v in r.items()} for r in rows], stream, indent=2)
        stream.write("\n")


# ---------------------------------------------------------------------------
# argument parsing


def _add_channel_args(sp: argparse.ArgumentParser, roles: tuple[str, ...]) -> None:
    for role in roles:
        sp.add_argument(f"--{role}", help=f"{role} channel spec")
    sp.add_argument("--choi", help="JSON Choi file used as the source/channel")
    sp.add_argument("--p", type=float, help="parameter of parametric channel kinds")
    sp.add_argument("--power", type=int, default=1, help="tensor power of the target (or single channel)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_out(sp):
        sp.add_argument("--out", choices=("csv", "json"), default="csv")
        sp.add_argument("--output", help="write to this file instead of stdout")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("capacity", help="zero-error shadow capacity of a channel")
    _add_channel_args(sp, ("channel",))
    sp.add_argument("--gamma", type=float, required=True)
    common_out(sp)

    sp = sub.add_parser("simcost", help="zero-error shadow simulation cost of a channel")
    _add_channel_args(sp, ("channel",))
    sp.add_argument("--gamma", type=float, required=True)
    common_out(sp)

    sp = sub.add_parser("min-error", help="minimum simulation error under a cost budget")
    _add_channel_args(sp, ("source", "target"))
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--quantum", action="store_true", help="single CPTP code baseline")
    sp.add_argument("--method", choices=("auto", "general"), default="auto")
    common_out(sp)

    sp = sub.add_parser("min-cost", help="minimum sampling cost under an error tolerance")
    _add_channel_args(sp, ("source", "target"))
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--method", choices=("auto", "general"), default="auto")
    common_out(sp)

    sp = sub.add_parser("diamond", help="diamond distance between two channels")
    _add_channel_args(sp, ("source", "target"))
    common_out(sp)

    sp = sub.add_parser("sample", help="run the sampling protocol for a minimum-cost code")
    _add_channel_args(sp, ("source", "target"))
    _add_sample_args(sp)
    common_out(sp)

    sp = sub.add_parser("sweep", help="evaluate a task over a gamma or eps grid")
    sp.add_argument("--task", choices=TASK_NAMES, required=True)
    _add_channel_args(sp, ("source", "target", "channel"))
    for name in ("gamma", "eps"):
        sp.add_argument(f"--{name}", type=float, help=f"single {name} value")
        sp.add_argument(f"--{name}-min", type=float)
        sp.add_argument(f"--{name}-max", type=float)
    sp.add_argument("--steps", type=int, default=1)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--quantum", action="store_true")
    sp.add_argument("--method", choices=("auto", "general"), default="auto")
    _add_sample_args(sp)
    common_out(sp)
    return parser


def _add_sample_args(sp):
    sp.add_argument("--observable", default="Z", help="Pauli string on the output, e.g. Z or XZ")
    sp.add_argument("--state", default="0", help="product input state over 0 1 + -")
    sp.add_argument("--rounds", type=int, help="rounds (default: Hoeffding count for --eps/--delta)")
    sp.add_argument("--delta", type=float, default=0.01)
    sp.add_argument("--code-eps", type=float, default=0.0, help="error tolerance of the sampled code")
    if "--eps" not in sp._option_string_actions:
        sp.add_argument("--eps", type=float, default=None, help="target accuracy for the round count")


def _grid(args, name: str) -> list[float] | None:
    single = getattr(args, name, None)
    lo, hi = getattr(args, f"{name}_min", None), getattr(args, f"{name}_max", None)
    if lo is None and hi is None:
        return None if single is None else [single]
    if lo is None or hi is None:
        raise UsageError(f"--{name}-min and --{name}-max go together")
    if lo > hi:
        raise UsageError(f"--{name}-min must not exceed --{name}-max")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    return [float(x) for x in np.linspace(lo, hi, args.steps)]


def _channels(args, task: str):
    src_spec = args.source if getattr(args, "source", None) else getattr(args, "channel", None)
    tgt_spec = getattr(args, "target", None)
    single = task in ("capacity", "simcost")
    if single:
        spec = getattr(args, "channel", None) or src_spec or tgt_spec
        if spec is None and args.choi is None:
            raise UsageError("a channel is required (--channel or --choi)")
        if args.choi:
            ch = parse_channel(args.choi, power=args.power)
            spec = args.choi
        else:
            ch = parse_channel(spec, args.p, args.power)
        label = channel_label(spec, args.p, args.power if args.choi is None else 1)
        if task == "capacity":
            return ch, None, label, ""
        return None, ch, "", label
    if args.choi:
        src = parse_channel(args.choi)
        src_spec = args.choi
    elif src_spec is None:
        raise UsageError("--source (or --choi) is required")
    else:
        src = parse_channel(src_spec, args.p)
    if tgt_spec is None:
        raise UsageError("--target is required")
    tgt = parse_channel(tgt_spec, args.p, args.power)
    return src, tgt, channel_label(src_spec, args.p, 1), channel_label(tgt_spec, args.p, args.power)


def _points(args) -> tuple[list[Point], int]:
    task = args.task if args.command == "sweep" else args.command
    src, tgt, sl, tl = _channels(args, task)
    extra = {"method": getattr(args, "method", "auto"), "quantum": getattr(args, "quantum", False),
             "observable": getattr(args, "observable", "Z"), "state": getattr(args, "state", "0"),
             "rounds": getattr(args, "rounds", None), "delta": getattr(args, "delta", 0.01),
             "code_eps": getattr(args, "code_eps", 0.0)}
    base = dict(task=task, source=src, target=tgt, source_label=sl, target_label=tl, seed=args.seed, **extra)
    jobs = getattr(args, "jobs", 1)
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if task in ("capacity", "simcost") or (task == "min-error" and not extra["quantum"]):
        grid = _grid(args, "gamma")
        if grid is None:
            raise UsageError(f"{task} needs --gamma (or a gamma range)")
        return [Point(gamma=g, **base) for g in grid], jobs
    if task == "min-cost":
        grid = _grid(args, "eps")
        if grid is None:
            raise UsageError("min-cost needs --eps (or an eps range)")
        return [Point(eps=e, **base) for e in grid], jobs
    if task == "sample":
        seeds = [args.seed or 0]
        return [Point(**{**base, "seed": s}, eps=args.eps) for s in seeds], jobs
    return [Point(**base)], jobs


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        points, jobs = _points(args)
        for pt in points:
            if pt.gamma is not None and pt.gamma < 0 or pt.eps is not None and pt.eps < 0:
                raise UsageError("gamma and eps must be non-negative")
            if pt.task in ("capacity", "simcost") and pt.gamma < 1:
                raise UsageError(f"{pt.task} needs gamma >= 1")
        if jobs > 1 and len(points) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(evaluate, points))  # map keeps the sweep order
        else:
            rows = [evaluate(p) for p in points]
    except UsageError as exc:
        print(f"shadowsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SdpError as exc:
        print(f"shadowsim: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_rows(rows, args.out, fh)
    else:
        write_rows(rows, args.out, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
