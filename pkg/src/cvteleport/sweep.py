"""Parameter sweeps over the interaction protocol and their CSV/JSON emission.

Grid points that share every protocol parameter (everything except the
Jamiolkowski ``R`` and the light squeezing ``r``) reuse one protocol run.
Records are emitted with the last axis varying fastest.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ContractViolation
from .fidelity import ChannelEvaluator, RSearch
from .noise import integrated_noise
from .protocol import SLICE_PHASE_CAP, ProtocolConfig, run_protocol
from .targets import QuadraticTarget, gain_schedule_for_target

#: axes a sweep may vary
AXIS_NAMES = ("omega1_dt", "expR", "R", "r", "kappa", "g", "Z", "omega1", "omega2_ratio")
#: axes that do not change the protocol run
CHANNEL_AXES = ("expR", "R", "r")
SCENARIOS = ("fidelity", "interaction")
TARGETS = ("active", "passive")
WORKERS_ENV = "CVTELEPORT_WORKERS"

#: CSV columns, in order; ``runtime`` is appended only when requested
COLUMNS = (
    "scenario", "target", "kappa", "g", "Z", "omega1", "omega2", "omega1_dt", "total_time",
    "steps", "epsilon", "R", "expR", "r", "r_optimized", "F", "E", "deviation", "map_error",
)
_INT_COLUMNS = ("steps", "r_optimized")
_STR_COLUMNS = ("scenario", "target")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ContractViolation(f"unknown axis {self.name!r}; choose from {AXIS_NAMES}")
        if int(self.points) != self.points or self.points < 2:
            raise ContractViolation(f"axis {self.name} needs at least 2 points")
        if self.scale not in ("linear", "log"):
            raise ContractViolation(f"axis scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and not (self.min > 0 and self.max > 0):
            raise ContractViolation(f"log axis {self.name} needs positive bounds")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """``name=min:max:points[:scale]``."""
        try:
            name, rng = text.split("=", 1)
            parts = rng.split(":")
            if len(parts) not in (3, 4):
                raise ValueError
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ContractViolation(f"malformed axis {text!r}; expected name=min:max:points[:scale]") from None
        return cls(name.strip(), lo, hi, n, parts[3] if len(parts) == 4 else "linear")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class SweepSpec:
    """A full sweep: axes, fixed base parameters and execution settings.

    ``base`` may contain any axis name plus ``omega2``; missing values fall back
    to :data:`DEFAULT_BASE`.
    """

    axes: tuple
    scenario: str = "fidelity"
    target: str = "active"
    base: dict = field(default_factory=dict)
    workers: int = 1
    search: RSearch = RSearch()
    phase_cap: float = SLICE_PHASE_CAP

    def __post_init__(self):
        if not self.axes:
            raise ContractViolation("a sweep needs at least one axis")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ContractViolation(f"duplicate axes in {names}")
        if "expR" in names and "R" in names:
            raise ContractViolation("sweep either expR or R, not both")
        if self.scenario not in SCENARIOS:
            raise ContractViolation(f"scenario must be one of {SCENARIOS}")
        if self.target not in TARGETS:
            raise ContractViolation(f"target must be one of {TARGETS}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ContractViolation("workers must be a positive integer")
        unknown = set(self.base) - set(AXIS_NAMES) - {"omega2"}
        if unknown:
            raise ContractViolation(f"unknown base parameters {sorted(unknown)}")

    @property
    def shape(self) -> tuple:
        return tuple(a.points for a in self.axes)

    def points(self) -> list[dict]:
        """Grid points in row-major order (last axis fastest), merged with the base."""
        params = {**DEFAULT_BASE, **self.base}
        names = [a.name for a in self.axes]
        out = []
        for combo in itertools.product(*(a.values() for a in self.axes)):
            p = dict(params)
            p.update(zip(names, (float(v) for v in combo)))
            if "expR" in names:
                p.pop("R", None)
            elif "R" in names or "R" in self.base:
                p.pop("expR", None)
            out.append(p)
        return out


DEFAULT_BASE = {"kappa": 1.0, "g": 1.0, "Z": 1.0, "omega1": 1.0, "omega2_ratio": 2.0,
                "omega1_dt": 500.0, "expR": math.e ** 3}


@dataclass(frozen=True)
class SweepRecord:
    scenario: str
    target: str
    kappa: float
    g: float
    Z: float
    omega1: float
    omega2: float
    omega1_dt: float
    total_time: float
    steps: int
    epsilon: float
    R: float
    expR: float
    r: float
    r_optimized: int
    F: float
    E: float
    deviation: float
    map_error: float
    runtime: float = float("nan")

    def row(self, with_runtime: bool = False) -> list:
        cols = COLUMNS + (("runtime",) if with_runtime else ())
        return [_fmt(getattr(self, c)) for c in cols]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.16e}"


def _config(p: dict, spec: SweepSpec) -> ProtocolConfig:
    kw = {}
    if "omega2" in p:
        kw["omega2"] = p["omega2"]
    return ProtocolConfig.from_omega_dt(
        p["omega1_dt"], omega1=p["omega1"], omega2_ratio=p["omega2_ratio"],
        phase_cap=spec.phase_cap, kappa=p["kappa"], g=p["g"], Z=p["Z"], **kw,
    )


def _group_key(p: dict) -> tuple:
    return tuple(sorted((k, v) for k, v in p.items() if k not in CHANNEL_AXES))


def _evaluate_group(spec: SweepSpec, items: list) -> list:
    """Run the protocol once and evaluate every ``(R, r)`` grid point that shares it."""
    t0 = time.perf_counter()
    cfg = _config(items[0][1], spec)
    target = QuadraticTarget.from_config(cfg, passive=spec.target == "passive")
    result = run_protocol(cfg, gain_schedule_for_target(target, cfg))
    S_ideal = target.ideal_map(cfg.window_time)
    ev = ChannelEvaluator(result.S, integrated_noise(result), S_ideal, cfg)
    map_error = float(np.linalg.norm(result.S - S_ideal))
    deviation = ev.noise.deviation
    run_time = time.perf_counter() - t0
    out = []
    for idx, p in items:
        t1 = time.perf_counter()
        R = math.log(p["expR"]) if "expR" in p else p["R"]
        if spec.scenario == "interaction":
            E, r, opt = float("nan"), p.get("r", 0.0), 0
        elif "r" in p:
            E, r, opt = ev.error(p["r"], R), p["r"], 0
        else:
            rep = ev.optimize(R, spec.search)
            E, r, opt = rep.E, rep.r_used, 1
        out.append((idx, SweepRecord(
            spec.scenario, spec.target, cfg.kappa, cfg.g, cfg.Z, cfg.omega1, cfg.omega2,
            p["omega1_dt"], cfg.total_time, cfg.steps, cfg.epsilon, R, math.exp(R), r, opt,
            1.0 - E, E, deviation, map_error,
            run_time / len(items) + time.perf_counter() - t1,
        )))
    return out


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else the ``CVTELEPORT_WORKERS`` environment variable, else 1."""
    if workers is not None:
        return int(workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ContractViolation(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ContractViolation(f"{WORKERS_ENV} must be positive")
        return n
    return 1


def run_sweep(spec: SweepSpec) -> list[SweepRecord]:
    """Evaluate every grid point; records come back in row-major grid order."""
    groups: dict = {}
    for idx, p in enumerate(spec.points()):
        groups.setdefault(_group_key(p), []).append((idx, p))
    tasks = list(groups.values())
    if spec.workers == 1 or len(tasks) == 1:
        results = [_evaluate_group(spec, t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_evaluate_group, itertools.repeat(spec), tasks))
    flat = sorted(itertools.chain.from_iterable(results), key=lambda x: x[0])
    return [rec for _, rec in flat]


def emit_records(records, path, json_path=None, with_runtime: bool = False):
    """Write records as CSV (17 significant digits) and optionally a JSON mirror."""
    records = list(records)
    if not records:
        raise ContractViolation("no records to emit")
    cols = COLUMNS + (("runtime",) if with_runtime else ())
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in records:
            w.writerow(rec.row(with_runtime))
    if json_path is not None:
        data = [{c: getattr(rec, c) for c in cols} for rec in records]
        with open(json_path, "w") as fh:
            json.dump(data, fh, indent=1)


def read_records(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            kw = {}
            for k, v in row.items():
                if k in _STR_COLUMNS:
                    kw[k] = v
                elif k in _INT_COLUMNS:
                    kw[k] = int(v)
                else:
                    kw[k] = float(v)
            out.append(SweepRecord(**kw))
    return out


def grid_to_matrix(records, spec_or_shape, column: str = "F") -> np.ndarray:
    """Reshape one column to the grid shape (row-major, last axis fastest)."""
    shape = spec_or_shape.shape if isinstance(spec_or_shape, SweepSpec) else tuple(spec_or_shape)
    vals = np.array([getattr(r, column) for r in records], dtype=float)
    if vals.size != math.prod(shape):
        raise ContractViolation(f"{vals.size} records do not fill a grid of shape {shape}")
    return vals.reshape(shape)
