"""Seeded oscillator-machine trials, batch statistics and parameter sweeps."""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .cnf import CnfFormula
from .dynamics import OscillatorParams, make_rhs
from .energy import build_energy
from .integrator import OK, IntegratorConfig, integrate_batch
from .quadratize import quadratize_3sat

log = logging.getLogger(__name__)

HIGHER = "higher"
SECOND = "second"
TTS_TARGET = 0.95


@dataclass(frozen=True)
class TrialConfig:
    seed: int = 0
    params: OscillatorParams = OscillatorParams()
    integrator: IntegratorConfig = IntegratorConfig()
    machine: Literal["higher", "second"] = HIGHER
    init_scale: float = 0.1

    def __post_init__(self):
        if self.machine not in (HIGHER, SECOND):
            raise ValueError(f"unknown machine {self.machine!r}")
        if self.machine == SECOND and self.params.exponent != 1:
            raise ValueError("the second-order machine has no exponent-2 form")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")

    def replace(self, **changes) -> "TrialConfig":
        """Like ``dataclasses.replace`` but also accepts OscillatorParams field names."""
        pnames = {f.name for f in dataclasses.fields(OscillatorParams)}
        pchanges = {k: changes.pop(k) for k in list(changes) if k in pnames}
        cfg = dataclasses.replace(self, **changes) if changes else self
        if pchanges:
            cfg = dataclasses.replace(cfg, params=cfg.params.replace(**pchanges))
        return cfg

    def to_json(self) -> dict:
        return {"seed": self.seed, "machine": self.machine, "init_scale": self.init_scale,
                "params": dataclasses.asdict(self.params),
                "integrator": {k: (None if v == np.inf else v) for k, v in dataclasses.asdict(self.integrator).items()}}

    @classmethod
    def from_json(cls, doc: dict) -> "TrialConfig":
        integ = {k: (np.inf if v is None else v) for k, v in doc.get("integrator", {}).items()}
        return cls(seed=int(doc.get("seed", 0)), params=OscillatorParams(**doc.get("params", {})),
                   integrator=IntegratorConfig(**integ), machine=doc.get("machine", HIGHER),
                   init_scale=float(doc.get("init_scale", 0.1)))


@dataclass
class TrialResult:
    final_energy: float
    frac_satisfied: float
    all_sat: bool
    tts95: float | None
    steps: int
    seed: int
    wall_time: float
    status: str = OK
    instance: int = 0
    trial: int = 0

    CSV_FIELDS = ("instance", "trial", "seed", "status", "final_energy", "frac_satisfied", "all_sat",
                  "tts95", "steps", "wall_time")

    def row(self) -> dict:
        return {"instance": self.instance, "trial": self.trial, "seed": self.seed, "status": self.status,
                "final_energy": self.final_energy, "frac_satisfied": self.frac_satisfied,
                "all_sat": int(self.all_sat), "tts95": "" if self.tts95 is None else self.tts95,
                "steps": self.steps, "wall_time": self.wall_time}


def binarize(z) -> np.ndarray:
    """Spin +1 where ``Re z >= 0``, -1 otherwise."""
    return np.where(np.real(z) >= 0, 1.0, -1.0)


def tts_from_trace(trace: Iterable[tuple[float, float]], target: float = TTS_TARGET) -> float | None:
    """Earliest sample time whose satisfied fraction reaches ``target``."""
    prev = -math.inf
    hit = None
    for t, frac in trace:
        if t < prev:
            raise ValueError("trace is not time-sorted")
        prev = t
        if hit is None and frac >= target:
            hit = t
    return hit


def initial_state(seed: int, n: int, scale: float) -> np.ndarray:
    """Uniform sample from the complex disk of radius ``scale`` for each oscillator."""
    rng = np.random.default_rng(seed)
    r = scale * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    return r * np.exp(1j * theta)


def machine_provider(formula: CnfFormula, config: TrialConfig):
    if config.machine == HIGHER:
        return build_energy(formula, config.params.exponent)
    return quadratize_3sat(formula)


def run_trials(formula: CnfFormula, config: TrialConfig, seeds: Sequence[int], instance: int = 0,
               first_trial: int = 0, provider=None, trace: list | None = None) -> list[TrialResult]:
    """Run one vectorised batch of trials, one per seed.

    Every trial is scored on the original formula's clauses using the
    binarised original spins; auxiliary spins are ignored. If ``trace`` is a
    list, ``(trial, t, z)`` tuples are appended at every accepted step.
    """
    seeds = [int(s) for s in seeds]
    if provider is None:
        provider = machine_provider(formula, config)
    score = build_energy(formula, 1)
    n0 = formula.num_vars
    m = formula.num_clauses
    b = len(seeds)
    z0 = np.stack([initial_state(s, provider.num_spins, config.init_scale) for s in seeds])
    tts = np.full(b, np.nan)

    def observer(t, z, rows):
        viol = score.term_values(binarize(z[:, :n0])) > 0.5
        frac = 1 - viol.sum(axis=-1) / m
        hit = (frac >= TTS_TARGET) & np.isnan(tts[rows])
        tts[rows[hit]] = t[hit]
        if trace is not None:
            for r, ti, zi in zip(rows, t, z):
                trace.append((first_trial + int(r), float(ti), zi))

    start = time.perf_counter()
    res = integrate_batch(make_rhs(provider, config.params), z0, (0.0, config.params.t_end),
                          config.integrator, observer)
    elapsed = time.perf_counter() - start

    s = binarize(res.z[:, :n0])
    viol = score.term_values(s) > 0.5
    energies = (viol * np.array([t.weight for t in score.terms])).sum(axis=-1)
    out = []
    for i, seed in enumerate(seeds):
        ok = res.status[i] == OK
        n_sat = m - int(viol[i].sum())
        out.append(TrialResult(
            final_energy=float(energies[i]) if ok else math.nan,
            frac_satisfied=n_sat / m if ok else math.nan,
            all_sat=bool(ok and n_sat == m),
            tts95=None if not ok or np.isnan(tts[i]) else float(tts[i]),
            steps=int(res.steps[i]),
            seed=seed,
            wall_time=elapsed / b,
            status=str(res.status[i]),
            instance=instance,
            trial=first_trial + i,
        ))
    return out


def run_trial(formula: CnfFormula, config: TrialConfig) -> TrialResult:
    return run_trials(formula, config, [config.seed])[0]


def _stats(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


@dataclass
class Aggregate:
    trials: int
    diverged: int
    mean_energy: float
    std_energy: float
    mean_frac: float
    std_frac: float
    all_sat_prob: float
    mean_tts95: float
    std_tts95: float
    tts_reached: int

    @classmethod
    def of(cls, results: Sequence[TrialResult]) -> "Aggregate":
        good = [r for r in results if r.status == OK]
        me, se = _stats([r.final_energy for r in good])
        mf, sf = _stats([r.frac_satisfied for r in good])
        reached = [r.tts95 for r in good if r.tts95 is not None]
        mt, st = _stats(reached)
        prob = sum(r.all_sat for r in good) / len(good) if good else math.nan
        return cls(len(results), len(results) - len(good), me, se, mf, sf, prob, mt, st, len(reached))

    def to_json(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in dataclasses.asdict(self).items()}


@dataclass
class BatchReport:
    results: list[TrialResult]
    instances: list[str] = field(default_factory=list)
    per_instance: list[Aggregate] = field(default_factory=list)
    overall: Aggregate | None = None

    SCHEMA = 1

    @classmethod
    def build(cls, results: list[TrialResult], names: Sequence[str]) -> "BatchReport":
        results = sorted(results, key=lambda r: (r.instance, r.trial))
        per = [Aggregate.of([r for r in results if r.instance == i]) for i in range(len(names))]
        return cls(results, list(names), per, Aggregate.of(results))

    @property
    def instances_with_solution(self) -> int:
        return sum(1 for a in self.per_instance if a.all_sat_prob and a.all_sat_prob > 0)

    def to_json(self, config: TrialConfig | None = None) -> dict:
        doc = {"schema": self.SCHEMA, "overall": self.overall.to_json(),
               "instances": [{"name": n, **a.to_json()} for n, a in zip(self.instances, self.per_instance)]}
        if config is not None:
            doc["config"] = config.to_json()
        return doc


def _instance_job(args, trace=None):
    idx, formula, config, trials, seed_base = args
    seeds = [seed_base + idx * trials + j for j in range(trials)]
    part = [] if trace is not None else None
    out = run_trials(formula, config, seeds, instance=idx, trace=part)
    if trace is not None:
        trace.extend((idx, trial, t, z) for trial, t, z in part)
    return out


def run_batch(formulas: Sequence[CnfFormula], config: TrialConfig, trials: int, workers: int = 1,
              names: Sequence[str] | None = None, seed_base: int | None = None,
              on_instance=None, trace: list | None = None) -> BatchReport:
    """All trials for all instances; trial seed = base + instance * trials + trial.

    Each instance is one vectorised work item, so results do not depend on
    ``workers``. ``on_instance(results)`` is called as instances complete.
    ``trace`` collects ``(instance, trial, t, z)`` samples and needs
    ``workers == 1``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if trace is not None and workers > 1:
        raise ValueError("trajectory capture runs in-process; use workers=1")
    if seed_base is None:
        seed_base = config.seed
    names = list(names) if names is not None else [f"instance-{i}" for i in range(len(formulas))]
    jobs = [(i, f, config, trials, seed_base) for i, f in enumerate(formulas)]
    results: list[TrialResult] = []
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            part = _instance_job(job, trace)
            results.extend(part)
            if on_instance:
                on_instance(part)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_instance_job, jobs):
                results.extend(part)
                if on_instance:
                    on_instance(part)
    return BatchReport.build(results, names)


SWEEP_KEYS = ("lam", "rho", "q_max", "coupling", "t_end", "init_scale", "omega", "normalize", "exponent")


@dataclass
class SweepRow:
    point: dict
    aggregate: Aggregate

    def row(self) -> dict:
        return {**self.point, **self.aggregate.to_json()}


@dataclass
class SweepResult:
    rows: list[SweepRow]

    @property
    def best(self) -> SweepRow:
        return self.rows[0]


def rank_key(agg: Aggregate):
    prob = -1.0 if math.isnan(agg.all_sat_prob) else agg.all_sat_prob
    energy = math.inf if math.isnan(agg.mean_energy) else agg.mean_energy
    return (-prob, energy)


def parameter_sweep(formulas: Sequence[CnfFormula], grid: dict[str, Sequence], base: TrialConfig,
                    trials: int, workers: int = 1) -> SweepResult:
    """Evaluate the Cartesian product of ``grid`` and rank the points.

    Ranking: all-SAT probability descending, then mean final energy
    ascending. Every point reuses the same trial seeds.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must have at least one value per parameter")
    unknown = set(grid) - set(SWEEP_KEYS)
    if unknown:
        raise ValueError(f"unknown sweep parameters: {sorted(unknown)}")
    keys = list(grid)
    rows = []
    for values in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, values))
        cfg = base.replace(**point)
        report = run_batch(formulas, cfg, trials, workers)
        log.info("sweep point %s: p_sat=%.3f energy=%.3f", point, report.overall.all_sat_prob,
                 report.overall.mean_energy)
        rows.append(SweepRow(point, report.overall))
    rows.sort(key=lambda r: rank_key(r.aggregate))
    return SweepResult(rows)
