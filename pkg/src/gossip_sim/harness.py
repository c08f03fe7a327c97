"""Experiment configuration, batch execution and trace/summary output.

A config is a JSON document (``schema_version`` 1)::

    {
      "schema_version": 1,
      "graph": {"type": "cycle", "n": 10},
      "initial_values": {"type": "uniform", "seed": 0},
      "protocols": [
        {"kind": "standard"},
        {"kind": "binary", "schedule": {"type": "constant", "lambda": 0.01}},
        {"kind": "epsgap", "eps": 0.02},
        {"kind": "noise", "sigma": 1.0, "phi": 0.9}
      ],
      "iterations": 1000,
      "seeds": {"count": 50, "start": 0},
      "output_dir": "out"
    }

Graph types: ``cycle`` (n), ``rgg`` (n, r = sqrt(ln n / n) by default,
seed), ``file`` (path, text or .json), ``edges`` (n, edges). Initial values:
``uniform`` on [0, 1] with their own ``seed``, or ``explicit`` ``values``.
Binary schedules: ``constant`` (lambda), ``inverse_t`` (a), ``inverse_sqrt_t``
(a), ``fixed_horizon_optimal`` (R defaults to the exact dual gap, k to
``iterations``), ``adaptive`` (scale: number, ``"1/2m"`` or ``"1/4m"``).
Noise: ``sigma`` (number or per-node list) and exactly one of ``phi`` (number
or list) or ``gamma`` (number, or ``"threshold"`` for
``phi_i = sqrt(1 - alpha / 2 d_i)``).

Optional top-level keys: ``metrics``, ``eps`` (adds ``Delta_t`` to every
protocol), ``stride``, ``trajectory``, ``bound_iterations``, ``label`` per
protocol. Unknown keys are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from gossip_sim import analysis
from gossip_sim.bounds import bound_report, noise_threshold_check, threshold_phi
from gossip_sim.duality import ConsensusProblem
from gossip_sim.errors import ConfigError, GossipError
from gossip_sim.graph import (
    Graph,
    build_cycle,
    build_random_geometric,
    load_graph,
    spectral_summary,
)
from gossip_sim.protocols import (
    Adaptive,
    Binary,
    Constant,
    EpsGap,
    FixedHorizonOptimal,
    InverseSqrtT,
    InverseT,
    Noise,
    NoiseParams,
    Protocol,
    Standard,
    Trace,
    phi_from_gamma,
    simulate,
)

SCHEMA_VERSION = 1
DEFAULT_SEED_COUNT = 50
TRACE_COLUMNS = ("dual_subopt", "rel_error", "L_t", "Delta_t", "mean_drift")

_TOP_KEYS = {
    "schema_version", "graph", "initial_values", "protocols", "iterations",
    "seeds", "metrics", "eps", "stride", "trajectory", "output_dir",
    "bound_iterations",
}
_GRAPH_KEYS = {
    "cycle": {"type", "n"},
    "rgg": {"type", "n", "r", "seed"},
    "file": {"type", "path"},
    "edges": {"type", "n", "edges"},
}
_SCHEDULE_KEYS = {
    "constant": {"type", "lambda"},
    "inverse_t": {"type", "a"},
    "inverse_sqrt_t": {"type", "a"},
    "fixed_horizon_optimal": {"type", "R", "k"},
    "adaptive": {"type", "scale"},
}
_PROTOCOL_KEYS = {
    "standard": {"kind", "label"},
    "binary": {"kind", "label", "schedule"},
    "epsgap": {"kind", "label", "eps"},
    "noise": {"kind", "label", "sigma", "phi", "gamma"},
}


def fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class ProtocolSpec:
    label: str
    protocol: Protocol
    raw: dict


@dataclass
class ExperimentConfig:
    graph: Graph
    problem: ConsensusProblem
    protocols: list[ProtocolSpec]
    iterations: int
    seeds: list[int]
    metrics: tuple[str, ...]
    eps: float | None
    stride: int | None
    trajectory: bool
    output_dir: Path
    bound_iterations: list[int] | None
    raw: dict = field(repr=False)
    graph_info: dict = field(default_factory=dict)


# -- validation ------------------------------------------------------------


def _check_keys(obj: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return obj


def _number(obj: dict, key: str, where: str, *, positive=False, integer=False, default=None):
    if key not in obj or obj[key] is None:
        if default is not None:
            return default
        raise ConfigError(f"{where}: missing '{key}'")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if integer and not float(v).is_integer():
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if not np.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"{where}.{key}: must be {'positive' if positive else 'finite'}")
    return int(v) if integer else float(v)


def _build_graph(spec: dict, base: Path) -> Graph:
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind not in _GRAPH_KEYS:
        raise ConfigError(f"graph.type must be one of {sorted(_GRAPH_KEYS)}")
    _check_keys(spec, _GRAPH_KEYS[kind], "graph")
    if kind == "cycle":
        return build_cycle(_number(spec, "n", "graph", integer=True))
    if kind == "rgg":
        n = _number(spec, "n", "graph", integer=True)
        r = spec.get("r")
        r = None if r is None else _number(spec, "r", "graph", positive=True)
        seed = _number(spec, "seed", "graph", integer=True, default=0)
        return build_random_geometric(n, r, seed)
    if kind == "file":
        path = Path(spec.get("path", ""))
        if not path.is_absolute():
            path = base / path
        return load_graph(path)
    n = _number(spec, "n", "graph", integer=True)
    return Graph(n, spec.get("edges") or [])


def _initial_values(spec: Any, n: int) -> np.ndarray:
    if spec is None:
        spec = {"type": "uniform", "seed": 0}
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind == "uniform":
        _check_keys(spec, {"type", "seed"}, "initial_values")
        seed = _number(spec, "seed", "initial_values", integer=True, default=0)
        return np.random.default_rng(seed).random(n)
    if kind == "explicit":
        _check_keys(spec, {"type", "values"}, "initial_values")
        vals = np.asarray(spec.get("values"), dtype=float)
        if vals.shape != (n,) or not np.all(np.isfinite(vals)):
            raise ConfigError(f"initial_values.values: need {n} finite numbers")
        return vals
    raise ConfigError("initial_values.type must be 'uniform' or 'explicit'")


def _per_node(v: Any, n: int, where: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{where}: need a number or {n} per-node values")
    return arr


def _schedule(spec: Any, problem: ConsensusProblem, iterations: int, where: str):
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind not in _SCHEDULE_KEYS:
        raise ConfigError(f"{where}.type must be one of {sorted(_SCHEDULE_KEYS)}")
    _check_keys(spec, _SCHEDULE_KEYS[kind], where)
    if kind == "constant":
        return Constant(_number(spec, "lambda", where, positive=True))
    if kind == "inverse_t":
        return InverseT(_number(spec, "a", where, positive=True, default=1.0))
    if kind == "inverse_sqrt_t":
        return InverseSqrtT(_number(spec, "a", where, positive=True, default=1.0))
    if kind == "fixed_horizon_optimal":
        R = spec.get("R")
        R = problem.d_gap if R is None else _number(spec, "R", where, positive=True)
        k = spec.get("k")
        k = iterations if k is None else _number(spec, "k", where, integer=True)
        return FixedHorizonOptimal(R, k)
    scale = spec.get("scale", "1/2m")
    m = problem.graph.m
    if scale == "1/2m" or scale is None:
        return Adaptive(1.0 / (2 * m))
    if scale == "1/4m":
        return Adaptive(1.0 / (4 * m))
    return Adaptive(_number(spec, "scale", where, positive=True))


def _protocol(spec: Any, problem: ConsensusProblem, iterations: int, idx: int) -> ProtocolSpec:
    where = f"protocols[{idx}]"
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind not in _PROTOCOL_KEYS:
        raise ConfigError(f"{where}.kind must be one of {sorted(_PROTOCOL_KEYS)}")
    _check_keys(spec, _PROTOCOL_KEYS[kind], where)
    g = problem.graph
    if kind == "standard":
        proto = Standard()
    elif kind == "binary":
        proto = Binary(_schedule(spec.get("schedule"), problem, iterations, where + ".schedule"))
    elif kind == "epsgap":
        proto = EpsGap(_number(spec, "eps", where, positive=True))
    else:
        sigma = _per_node(spec.get("sigma", 1.0), g.n, where + ".sigma")
        has_phi, has_gamma = spec.get("phi") is not None, spec.get("gamma") is not None
        if has_phi == has_gamma:
            raise ConfigError(f"{where}: give exactly one of 'phi' or 'gamma'")
        if has_phi:
            phi = _per_node(spec["phi"], g.n, where + ".phi")
        elif spec["gamma"] == "threshold":
            phi = threshold_phi(g)
        else:
            phi = phi_from_gamma(g, _number(spec, "gamma", where, positive=True))
        proto = Noise(NoiseParams(sigma, phi))
    label = spec.get("label") or f"{idx}_{kind}"
    if not re.fullmatch(r"[A-Za-z0-9_.\-]+", label):
        raise ConfigError(f"{where}.label must be a plain file-name token")
    return ProtocolSpec(label, proto, spec)


def parse_config(doc: Any, base: Path | str = ".") -> ExperimentConfig:
    """Validate a config document and build its graph, problem and protocols.

    Raises:
        ConfigError: on any schema or value problem (library errors raised
            while building the graph or parameters are re-raised as
            ConfigError).
    """
    base = Path(base)
    _check_keys(doc, _TOP_KEYS, "config")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    try:
        graph = _build_graph(doc.get("graph"), base)
        problem = ConsensusProblem(graph, _initial_values(doc.get("initial_values"), graph.n))
        if problem.is_optimal:
            raise ConfigError("initial values are already at consensus")
        iterations = _number(doc, "iterations", "config", integer=True)
        if iterations < 0:
            raise ConfigError("config.iterations must be nonnegative")
        protos = doc.get("protocols")
        if not isinstance(protos, list) or not protos:
            raise ConfigError("config.protocols must be a nonempty list")
        specs = [_protocol(p, problem, iterations, i) for i, p in enumerate(protos)]
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ConfigError("protocol labels must be unique")
        seeds = doc.get("seeds", {"count": DEFAULT_SEED_COUNT})
        if isinstance(seeds, dict):
            _check_keys(seeds, {"count", "start"}, "seeds")
            count = _number(seeds, "count", "seeds", integer=True, positive=True)
            start = _number(seeds, "start", "seeds", integer=True, default=0)
            seeds = list(range(start, start + count))
        if (
            not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds)
            or len(set(seeds)) != len(seeds)
        ):
            raise ConfigError("seeds must be a nonempty list of distinct nonnegative ints")
        seeds = sorted(seeds)
        metrics = doc.get("metrics")
        if metrics is None:
            metrics = [c for c in TRACE_COLUMNS if c != "Delta_t"]
        if not isinstance(metrics, list) or set(metrics) - set(TRACE_COLUMNS):
            raise ConfigError(f"metrics must be a list drawn from {list(TRACE_COLUMNS)}")
        eps = doc.get("eps")
        eps = None if eps is None else _number(doc, "eps", "config", positive=True)
        stride = doc.get("stride")
        stride = None if stride is None else _number(doc, "stride", "config", integer=True, positive=True)
        traj = doc.get("trajectory", False)
        if not isinstance(traj, bool):
            raise ConfigError("config.trajectory must be a boolean")
        bits = doc.get("bound_iterations")
        if bits is not None:
            if not isinstance(bits, list) or not all(
                isinstance(b, int) and not isinstance(b, bool) and b >= 0 for b in bits
            ):
                raise ConfigError("bound_iterations must be a list of nonnegative ints")
            bits = sorted(set(bits))
        out = Path(doc.get("output_dir", "out"))
        if not out.is_absolute():
            out = base / out
    except ConfigError:
        raise
    except (GossipError, ValueError, TypeError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    spec = spectral_summary(graph)
    info = {
        "n": graph.n, "m": graph.m, "alpha": spec.alpha, "beta": spec.beta,
        "d_min": graph.d_min,
    }
    return ExperimentConfig(
        graph=graph, problem=problem, protocols=specs, iterations=iterations,
        seeds=seeds, metrics=tuple(c for c in TRACE_COLUMNS if c in metrics),
        eps=eps, stride=stride, trajectory=traj, output_dir=out,
        bound_iterations=bits, raw=doc, graph_info=info,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc, base=path.parent)


# -- running ---------------------------------------------------------------


def _columns(cfg: ExperimentConfig, spec: ProtocolSpec) -> list[str]:
    eps = spec.protocol.eps if isinstance(spec.protocol, EpsGap) else cfg.eps
    cols = [c for c in cfg.metrics if c != "Delta_t"]
    if eps is not None:
        cols.insert(cols.index("mean_drift") if "mean_drift" in cols else len(cols), "Delta_t")
    return cols


def run_protocol(cfg: ExperimentConfig, spec: ProtocolSpec) -> Trace:
    eps = spec.protocol.eps if isinstance(spec.protocol, EpsGap) else cfg.eps
    return simulate(
        cfg.problem, spec.protocol, cfg.iterations, cfg.seeds,
        record=_columns(cfg, spec), stride=cfg.stride, eps=eps,
        trajectory=cfg.trajectory,
    )


def trace_csv(trace: Trace, columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "iter", *columns])
    for s, seed in enumerate(trace.seeds):
        for r, it in enumerate(trace.iters):
            w.writerow([int(seed), int(it), *(fmt(trace.metrics[c][s, r]) for c in columns)])
    return buf.getvalue()


def trajectory_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "iter", "node", "value"])
    for s, seed in enumerate(trace.seeds):
        for r, it in enumerate(trace.iters):
            for node, v in enumerate(trace.trajectory[s, r]):
                w.writerow([int(seed), int(it), node, fmt(v)])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def protocol_summary(cfg: ExperimentConfig, spec: ProtocolSpec, trace: Trace) -> dict:
    cols = list(trace.metrics)
    curves = {}
    for c in cols:
        mu, se = analysis.mean_and_stderr(trace.metrics[c])
        curves[c] = {"mean": mu, "stderr": se}
    report = bound_report(cfg.problem, spec.protocol, trace.iters)
    out = {
        "label": spec.label,
        "kind": spec.protocol.kind,
        "params": spec.raw,
        "iters": trace.iters,
        "curves": curves,
        "bound": {"measure": report.measure, "values": report.values, "inputs": report.inputs},
        "final": {c: float(curves[c]["mean"][-1]) for c in cols},
    }
    proto = spec.protocol
    if isinstance(proto, Binary) and "L_t" in trace.metrics:
        val, it, se = analysis.average_then_min(trace, "L_t")
        out["min_L_t"] = {
            "average_then_min": val,
            "at_iter": it,
            "stderr": se,
            "mean_running_min_final": float(analysis.mean_running_min(trace, "L_t")[-1]),
        }
        out["stepsize_sums"] = {"alpha_k": trace.alpha_sum, "beta_k": trace.beta_sum}
    if isinstance(proto, EpsGap) and "Delta_t" in trace.metrics and cfg.iterations >= 1:
        ks, running = analysis.running_average(trace, "Delta_t")
        out["delta_k"] = {
            "k": int(ks[-1]),
            "empirical": float(running[-1]),
            "exact": bool(np.array_equal(trace.iters, np.arange(cfg.iterations + 1))),
            "moves_mean": float(trace.moves.mean()),
        }
    if isinstance(proto, Noise):
        v = noise_threshold_check(cfg.problem, proto.params)
        out["threshold"] = {
            "rho": v.rho,
            "decay_factors": v.decay_factors,
            "dominating_nodes": np.flatnonzero(v.dominates),
            "maximizers": v.maximizers,
            "noise_dominated": v.noise_dominated,
        }
    return out


def _atomic_write(files: dict[Path, str]) -> None:
    tmp: list[tuple[str, Path]] = []
    try:
        for path, text in files.items():
            fd, name = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            tmp.append((name, path))
        for name, path in tmp:
            os.replace(name, path)
    except BaseException:
        for name, _ in tmp:
            if os.path.exists(name):
                os.unlink(name)
        raise


def run_experiment(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run every protocol over every seed and write traces plus ``summary.json``.

    Nothing is written until all runs finish; the summary is moved into
    place last.
    """
    files: dict[Path, str] = {}
    summaries = []
    out = cfg.output_dir
    for spec in cfg.protocols:
        trace = run_protocol(cfg, spec)
        files[out / f"trace_{spec.label}.csv"] = trace_csv(trace, list(trace.metrics))
        if cfg.trajectory:
            files[out / f"trajectory_{spec.label}.csv"] = trajectory_csv(trace)
        summaries.append(protocol_summary(cfg, spec, trace))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "graph": cfg.graph_info,
        "initial_values": cfg.problem.c,
        "c_bar": cfg.problem.c_bar,
        "D_gap": cfg.problem.d_gap,
        "iterations": cfg.iterations,
        "seeds": cfg.seeds,
        "protocols": summaries,
    }
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "summary.json"
    _atomic_write(files)
    _atomic_write({summary_path: json.dumps(_jsonable(summary), indent=1) + "\n"})
    return {"summary": summary_path, **{p.name: p for p in files}}


def bounds_table(cfg: ExperimentConfig) -> tuple[list[str], list[list[float]]]:
    """Bound values at ``bound_iterations`` (default: 0, k/10, ..., k)."""
    its = cfg.bound_iterations
    if its is None:
        k = cfg.iterations
        its = sorted({int(round(k * f / 10)) for f in range(11)})
    its_arr = np.asarray(its, dtype=np.int64)
    header = ["iter"]
    cols = []
    for spec in cfg.protocols:
        rep = bound_report(cfg.problem, spec.protocol, its_arr)
        header.append(f"{spec.label}:{rep.measure}")
        cols.append(rep.values)
    rows = [[int(it), *(float(c[r]) for c in cols)] for r, it in enumerate(its)]
    return header, rows


def bounds_csv(header: list[str], rows: list[list[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[0], *(fmt(v) if np.isfinite(v) else "" for v in row[1:])])
    return buf.getvalue()
