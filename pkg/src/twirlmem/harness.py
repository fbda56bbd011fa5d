"""Seeded experiment runner, aggregation and CSV output.

Seeds derive from the master seed with ``numpy.random.SeedSequence`` spawn
keys ``(replicate, stream, ...)``: stream 0 draws the state, 1 the noise
instance, 2 the twirling sets and 3 the measurement shots. Random and balanced
twirling sets each have their own key, shared between the direct and the
transformed variant of a method, so those pairs see common random numbers.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .circuit import Circuit
from .mitigate import INFINITE, TwirledReadout, tpn_baseline
from .mtcompile import MtPlan, compile_mt, default_targets
from .noise import (
    NoiseInstance,
    device_config,
    lambda_to_ptm,
    marginal_readouts,
    noise_from_config,
    parity_expectation,
    ptm_to_csv,
)
from .pauli import ZMask, support
from .sim import MAX_DENSITY_QUBITS, GateNoiseParams, PureState, basis_state, haar_state, z_expectation, zero_state
from .twirl import random_twirl_set, sbpt_set

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig4", "noise-sweep", "ptm-dump")
METHODS = ("noisy", "tpn", "mf", "mf-sub", "mt-rnd", "mt-sub")
MT_METHODS = ("mt-rnd", "mt-sub")
STATE_KINDS = ("haar", "basis-random", "zero")
CSV_COLUMNS = ("experiment", "method", "replicate", "param_name", "param_value", "estimate", "ideal", "abs_error", "wall_ms")

STREAM_STATE, STREAM_NOISE, STREAM_TWIRL, STREAM_SHOTS = range(4)
TWIRL_RANDOM, TWIRL_BALANCED = 0, 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 6
    observables: tuple[str, ...] = ()
    methods: tuple[str, ...] = ("noisy", "tpn", "mf", "mf-sub")
    ri: tuple[int, ...] = (1, 4, 16, 64)
    shots: tuple = (INFINITE,)
    state: str = "haar"
    noise: dict = field(default_factory=lambda: {"kind": "device"})
    gate_noise: dict | None = None
    replicates: int = 100
    seed: int = 0
    mt_weights: tuple[int, ...] = (1,)
    mt_targets: tuple[int, ...] | None = None
    n_values: tuple[int, ...] = ()
    noise_scales: tuple[float, ...] = ()
    threads: int = 1
    timing: bool = True

    def __post_init__(self):
        tup = lambda v: tuple(v) if v is not None else None
        for name in ("observables", "methods", "ri", "shots", "mt_weights", "n_values", "noise_scales"):
            object.__setattr__(self, name, tup(getattr(self, name)))
        object.__setattr__(self, "mt_targets", tup(self.mt_targets))
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.experiment != "ptm-dump":
            if not self.methods:
                raise ConfigError("at least one method is required")
            bad = [m for m in self.methods if m not in METHODS]
            if bad:
                raise ConfigError(f"unknown methods {bad}")
            if any(m in MT_METHODS for m in self.methods) and not (self.mt_weights or self.mt_targets):
                raise ConfigError("measurement-transformation methods need a target weight or targets")
        if self.state not in STATE_KINDS:
            raise ConfigError(f"unknown state kind {self.state!r}")
        for s in self.shots:
            if s != INFINITE and (not isinstance(s, int) or s < 1):
                raise ConfigError(f"bad shot count {s!r}")

    @property
    def gnoise(self) -> GateNoiseParams | None:
        return None if self.gate_noise is None else GateNoiseParams(**self.gate_noise)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' field")
        base = preset(data["experiment"])
        return replace(base, **data)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})


_GATE_DEFAULTS = {"p1": 5e-4, "p2": 5e-3, "beta": 0.01}
_FIG3_METHODS = ("noisy", "tpn", "mf", "mt-rnd", "mt-sub")


def preset(experiment: str) -> ExperimentConfig:
    """Desk-scale defaults for each experiment id."""
    glob6 = ("ZZZZZZ",)
    table = {
        "fig2": dict(observables=("ZIIIII", "ZZIIII", "ZZZIII"), ri=(1, 4, 16, 64)),
        "fig3a": dict(observables=glob6, methods=_FIG3_METHODS, ri=(4, 16, 64), state="basis-random", gate_noise=_GATE_DEFAULTS),
        "fig3b": dict(observables=glob6, methods=_FIG3_METHODS, ri=(4, 16, 64), gate_noise=_GATE_DEFAULTS),
        "fig3c": dict(methods=_FIG3_METHODS, ri=(16,), n_values=(4, 6, 8, 10, 12), noise={"kind": "synthetic"}, gate_noise=_GATE_DEFAULTS, replicates=20),
        "fig3d": dict(observables=glob6, methods=_FIG3_METHODS, ri=(16,), shots=(1000, 4000, 16000, 64000), gate_noise=_GATE_DEFAULTS),
        "fig3e": dict(observables=glob6, methods=("mf", "mt-sub"), ri=(4, 16, 36, 64, 100), gate_noise=_GATE_DEFAULTS),
        "fig4": dict(observables=("ZZIZZI", "ZIZIZI"), methods=("mt-sub",), ri=(16,), mt_weights=(1, 2), gate_noise=_GATE_DEFAULTS),
        "noise-sweep": dict(observables=("ZZZIII",), methods=("noisy", "tpn", "mf", "mf-sub"), ri=(64,), noise_scales=(0.5, 1.0, 1.5, 2.0)),
        "ptm-dump": dict(n=4, methods=(), noise={"kind": "synthetic"}, replicates=1),
    }
    if experiment not in table:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return ExperimentConfig(experiment=experiment, **table[experiment])


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    method: str
    replicate: int
    param_name: str
    param_value: float | int | str
    estimate: float
    ideal: float
    abs_error: float
    wall_ms: float = 0.0

    def row(self) -> list:
        fmt = lambda v: repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


# -- seeds -----------------------------------------------------------------------


def derive_seed(master: int, *key: int) -> int:
    """64-bit seed for the stream identified by ``key``."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key)))


# -- building blocks ---------------------------------------------------------------


def draw_state(kind: str, n: int, rng) -> PureState:
    if kind == "haar":
        return haar_state(n, rng)
    if kind == "basis-random":
        return basis_state(rng.integers(0, 2, size=n).tolist())
    return zero_state(n)


def scaled_device_noise(scale: float, n: int | None = None) -> NoiseInstance:
    """Bundled device noise with every error probability multiplied by ``scale``."""
    cfg = dict(device_config())
    cfg["kind"] = "ctmp"
    cfg["readouts"] = [
        {"a": 1 - scale * (1 - float(r["a"])), "b": 1 - scale * (1 - float(r["b"]))}
        for r in cfg["readouts"]
    ]
    cfg["pairs"] = [
        {"pair": p["pair"], "strengths": [scale * float(s) for s in p["strengths"]]}
        for p in cfg.get("pairs", [])
    ]
    return noise_from_config(cfg, n=n)


def _noise_for(cfg: ExperimentConfig, n: int, rep: int, scale: float | None = None) -> NoiseInstance:
    if scale is not None:
        return scaled_device_noise(scale, n)
    return noise_from_config(cfg.noise, seed=derive_seed(cfg.seed, rep, STREAM_NOISE, n), n=n)


def mt_plans(cfg: ExperimentConfig, source: ZMask) -> list[tuple[str, MtPlan]]:
    """``(tag, plan)`` pairs; the tag is empty when only one plan is configured."""
    if cfg.mt_targets:
        return [("", MtPlan(source, ZMask.from_support(cfg.mt_targets, source.n)))]
    plans = [(f"w{k}", MtPlan(source, default_targets(source, k))) for k in cfg.mt_weights]
    if len(plans) == 1:
        plans = [("", plans[0][1])]
    return plans


@dataclass
class _Point:
    """One evaluation context: observable, parameter point and noise instance."""

    label: str
    source: ZMask
    noise: NoiseInstance
    ri: int
    shots: object
    param_name: str
    param_value: object
    key: tuple


def _twirl(kind: int, sup: Iterable[int], n: int, size: int, seed: int):
    if kind == TWIRL_RANDOM:
        return random_twirl_set(n, size, seed)
    return sbpt_set(sorted(sup), n, size, seed)


class _Runner:
    def __init__(self, cfg: ExperimentConfig, rep: int):
        self.cfg = cfg
        self.rep = rep
        self.gnoise = cfg.gnoise
        self._readouts: dict = {}
        self._calib: dict = {}

    def readout(self, noise: NoiseInstance, z_eff: ZMask, circuit: Circuit | None) -> TwirledReadout:
        key = (id(noise), z_eff.index, None if circuit is None else circuit.gates)
        hit = self._readouts.get(key)
        if hit is None:
            hit = self._readouts[key] = (noise, TwirledReadout(noise.lam, z_eff, circuit, self.gnoise))
        return hit[1]

    def _calibration(self, noise: NoiseInstance):
        hit = self._calib.get(id(noise))
        if hit is None:
            hit = self._calib[id(noise)] = (noise, marginal_readouts(noise.lam))
        return hit[1]

    def run_point(self, state: PureState, pt: _Point) -> list[ResultRecord]:
        cfg, rep = self.cfg, self.rep
        ideal = z_expectation(state, pt.source.index)
        shot_seed = derive_seed(cfg.seed, rep, STREAM_SHOTS, *pt.key)
        out = []

        def emit(method, est, t0):
            wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
            out.append(
                ResultRecord(pt.label, method, rep, pt.param_name, pt.param_value, float(est), float(ideal), abs(float(est) - float(ideal)), wall)
            )

        lam = pt.noise.lam
        for method in cfg.methods:
            t0 = time.perf_counter()
            if method in ("noisy", "tpn"):
                probs = lam.matrix @ state.probabilities()
                if pt.shots != INFINITE:
                    counts = np.random.default_rng(shot_seed).multinomial(pt.shots, np.clip(probs, 0, None) / probs.sum())
                    probs = counts / pt.shots
                if method == "noisy":
                    est = parity_expectation(probs, pt.source.index)
                else:
                    est = tpn_baseline(probs, self._calibration(pt.noise), pt.source)[1]
                emit(method, est, t0)
                continue
            kind = TWIRL_BALANCED if method.endswith("sub") else TWIRL_RANDOM
            tw_seed = derive_seed(cfg.seed, rep, STREAM_TWIRL, kind, *pt.key)
            if method in ("mf", "mf-sub"):
                twirl = _twirl(kind, support(pt.source), pt.source.n, pt.ri, tw_seed)
                est = self.readout(pt.noise, pt.source, None).mitigate(state, twirl, pt.shots, shot_seed)
                emit(method, est, t0)
                continue
            if pt.source.n > MAX_DENSITY_QUBITS:
                log.info("skipping %s at n=%d (gate-noise simulation cap)", method, pt.source.n)
                continue
            for tag, plan in mt_plans(cfg, pt.source):
                t0 = time.perf_counter()
                circuit, z_eff = compile_mt(plan)
                twirl = _twirl(kind, support(z_eff), pt.source.n, pt.ri, tw_seed)
                est = self.readout(pt.noise, z_eff, circuit).mitigate(state, twirl, pt.shots, shot_seed)
                emit(f"{method}:{tag}" if tag else method, est, t0)
        return out


def _points(cfg: ExperimentConfig, rep: int):
    """Yield ``(n, points)`` groups; every group shares one drawn state."""
    exp = cfg.experiment
    if exp == "fig3c":
        for n in cfg.n_values:
            noise = _noise_for(cfg, n, rep)
            src = ZMask((1,) * n)
            yield n, [_Point(f"{exp}:{src.label}", src, noise, cfg.ri[0], cfg.shots[0], "n", n, (n,))]
        return
    n = cfg.n
    observables = [ZMask.from_label(o) for o in cfg.observables]
    if any(o.n != n for o in observables):
        raise ConfigError(f"observable sizes differ from n={n}")
    if exp == "noise-sweep":
        pts = []
        for si, scale in enumerate(cfg.noise_scales):
            noise = _noise_for(cfg, n, rep, scale)
            for oi, src in enumerate(observables):
                pts.append(_Point(f"{exp}:{src.label}", src, noise, cfg.ri[0], cfg.shots[0], "noise_scale", scale, (oi, si)))
        yield n, pts
        return
    noise = _noise_for(cfg, n, rep)
    pts = []
    for oi, src in enumerate(observables):
        if exp == "fig3d":
            for si, shots in enumerate(cfg.shots):
                pts.append(_Point(f"{exp}:{src.label}", src, noise, cfg.ri[0], shots, "shots", shots, (oi, 0, si)))
        else:
            for ii, ri in enumerate(cfg.ri):
                pts.append(_Point(f"{exp}:{src.label}", src, noise, ri, cfg.shots[0], "ri", ri, (oi, ii, 0)))
    yield n, pts


def run_replicate(cfg: ExperimentConfig, rep: int) -> list[ResultRecord]:
    runner = _Runner(cfg, rep)
    records = []
    for n, pts in _points(cfg, rep):
        state = draw_state(cfg.state, n, _rng(cfg.seed, rep, STREAM_STATE, n))
        for pt in pts:
            records.extend(runner.run_point(state, pt))
    return records


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> list[ResultRecord]:
    """All records, ordered by replicate regardless of worker scheduling."""
    if cfg.experiment == "ptm-dump":
        raise ConfigError("ptm-dump produces a matrix, use ptm_dump()")
    if cfg.experiment == "fig4":
        for obs in cfg.observables:
            for tag, plan in mt_plans(cfg, ZMask.from_label(obs)):
                log.info("%s %s depth %d", obs, tag or "plan", compile_mt(plan)[0].depth)
    workers = threads if threads is not None else cfg.threads
    reps = range(cfg.replicates)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_replicate, [cfg] * cfg.replicates, reps))
    else:
        chunks = [run_replicate(cfg, r) for r in reps]
    return [rec for chunk in chunks for rec in chunk]


def depth_report(observables: Sequence[str], weights: Sequence[int] = (1, 2)) -> list[tuple[str, int, int]]:
    """``(observable, effective weight, depth)`` for default plans."""
    rows = []
    for obs in observables:
        src = ZMask.from_label(obs)
        for k in weights:
            circuit, _ = compile_mt(MtPlan(src, default_targets(src, k)))
            rows.append((obs, k, circuit.depth))
    return rows


# -- output and aggregation ----------------------------------------------------------


def records_to_csv(records: Sequence[ResultRecord], out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow(rec.row())
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


def read_records(path) -> list[ResultRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pv = row["param_value"]
            try:
                pv = int(pv)
            except ValueError:
                try:
                    pv = float(pv)
                except ValueError:
                    pass
            out.append(
                ResultRecord(
                    row["experiment"], row["method"], int(row["replicate"]), row["param_name"], pv,
                    float(row["estimate"]), float(row["ideal"]), float(row["abs_error"]), float(row["wall_ms"]),
                )
            )
    return out


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    method: str
    param_name: str
    param_value: object
    mean: float
    sem: float
    count: int


def aggregate(records: Iterable[ResultRecord]) -> list[SummaryRow]:
    """Mean and standard error of ``abs_error`` per (experiment, method, point)."""
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        groups.setdefault((rec.experiment, rec.method, rec.param_name, rec.param_value), []).append(rec.abs_error)
    rows = []
    for (exp, method, pname, pval), errs in groups.items():
        a = np.asarray(errs)
        sem = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        rows.append(SummaryRow(exp, method, pname, pval, float(a.mean()), sem, int(a.size)))
    return rows


def summary_lookup(rows: Iterable[SummaryRow]) -> dict:
    return {(r.experiment, r.method, r.param_value): r for r in rows}


def relative_log_error(rows: Iterable[SummaryRow], method: str, baseline: str = "noisy") -> dict:
    """``log(mean error of method / mean error of baseline)`` per parameter point."""
    rows = list(rows)
    base = {(r.experiment, r.param_value): r.mean for r in rows if r.method == baseline}
    out = {}
    for r in rows:
        if r.method == method and (r.experiment, r.param_value) in base:
            out[r.param_value] = math.log(r.mean / base[(r.experiment, r.param_value)])
    return out


def summary_to_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "method", "param_name", "param_value", "mean_abs_error", "sem", "count"])
    for r in rows:
        w.writerow([r.experiment, r.method, r.param_name, r.param_value, repr(r.mean), repr(r.sem), r.count])
    return buf.getvalue()


def ptm_dump(noise_spec: dict, n: int | None = None, seed: int | None = None, out=None) -> str:
    """CSV of ``|R_Z|`` for a noise spec, rows and columns labelled by Z-mask index."""
    noise = noise_from_config(noise_spec, seed=seed, n=n)
    return ptm_to_csv(lambda_to_ptm(noise.lam), out=out)
