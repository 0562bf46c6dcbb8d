"""Seeded, replication-parallel experiment orchestration and CSV/summary output.

Every random stream is derived from ``(master_seed, label, replication)`` with
:func:`derive_seed`, so results do not depend on execution order or on the
number of worker processes. Golden value::

    derive_seed(0, "noise", 0) == 15934095970772388808
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import yaml

from . import estimators as est
from .env import Environment, MeanSchedule, NoiseSpec, alternating_schedule, regret_per_round
from .errors import ParameterError
from .fast import simulate
from .hard_instances import (FAMILY_ALIASES, SINGLE_SWITCH, SWAP_WINDOW, InstanceParams, build_environment,
                             family_params, sample_nu)
from .policies import PolicySpec

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
EXPERIMENT_KINDS = ("simulate", "scaling", "lowerbound", "estimators", "selfcheck")
FAMILIES = ("swap-window", "single-switch", "alternating", "schedule")
ALL_POLICIES = ("nonstat-sat", "simple-sat", "oracle-restart", "round-robin", "uniform", "fixed:1", "fixed:2")


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, stream_label: str, replication: int) -> int:
    """64-bit seed: splitmix64 finalizer of the BLAKE2b-64 hash of ``"master|label|replication"``."""
    key = f"{master_seed & MASK64}|{stream_label}|{replication}".encode()
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return splitmix64(h)


def stream(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, label, 0))


# -- Configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    T: int
    L: int
    delta: float
    S: float

    @property
    def label(self) -> str:
        return f"T={self.T};L={self.L};delta={self.delta!r};S={self.S!r}"


@dataclass
class Grid:
    T: list[int] = field(default_factory=lambda: [3000])
    L: list[int] = field(default_factory=lambda: [3])
    delta: list[float] = field(default_factory=lambda: [0.5])
    S: list[float] = field(default_factory=lambda: [0.5])

    def points(self) -> list[GridPoint]:
        return [GridPoint(int(T), int(L), float(d), float(S))
                for T, L, d, S in itertools.product(self.T, self.L, self.delta, self.S)]

    @classmethod
    def coerce(cls, value: Any) -> "Grid":
        if value is None:
            return cls()
        if isinstance(value, Grid):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        return cls(**{k: list(v) if isinstance(v, (list, tuple)) else [v] for k, v in value.items()})

    @classmethod
    def parse(cls, text: str, base: Optional["Grid"] = None) -> "Grid":
        """Parse ``"T=4096,16384;L=1,2;delta=0.3;S=0.5"``; omitted keys keep the values of ``base``."""
        grid = cls(**vars(base)) if base is not None else cls()
        for part in filter(None, (p.strip() for p in text.split(";"))):
            key, sep, values = part.partition("=")
            key = key.strip()
            if not sep or key not in ("T", "L", "delta", "S"):
                raise ParameterError("grid entries must look like T=..., L=..., delta=..., S=...", repr(part))
            cast = int if key in ("T", "L") else float
            try:
                setattr(grid, key, [cast(v) for v in values.split(",") if v.strip()])
            except ValueError:
                raise ParameterError(f"bad value in grid entry {key}", repr(values)) from None
        return grid


@dataclass
class ExperimentConfig:
    kind: str = "simulate"
    family: str = "swap-window"
    schedule: Optional[str] = None
    policies: list[str] = field(default_factory=lambda: ["nonstat-sat"])
    grid: Grid = field(default_factory=Grid)
    replications: int = 1
    master_seed: int = 0
    out: Optional[str] = None
    workers: int = 1
    noise: str = "unit-gaussian"
    timing: bool = False
    experiment_id: str = ""

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ParameterError("unknown experiment kind", f"{self.kind!r}; known: {', '.join(EXPERIMENT_KINDS)}")
        if self.family not in FAMILIES and self.family not in FAMILY_ALIASES:
            raise ParameterError("unknown instance family", f"{self.family!r}; known: {', '.join(FAMILIES)}")
        if self.family == "schedule" and not self.schedule:
            raise ParameterError("family 'schedule' needs a schedule file")
        if self.replications < 1:
            raise ParameterError("replications R >= 1", f"got {self.replications}")
        if self.workers < 1:
            raise ParameterError("workers >= 1", f"got {self.workers}")
        self.master_seed = int(self.master_seed) & MASK64
        for pid in self.policies:
            PolicySpec.parse(pid)
        NoiseSpec(self.noise)
        if not self.experiment_id:
            self.experiment_id = self.kind

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        grid = Grid.coerce(data.pop("grid", None))
        if "seed" in data:
            data["master_seed"] = data.pop("seed")
        if isinstance(data.get("policies"), str):
            data["policies"] = [p for p in data["policies"].split(",") if p.strip()]
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError("unknown config keys", ", ".join(sorted(unknown)))
        return cls(grid=grid, **data)

    @classmethod
    def load(cls, path: str | Path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        data.update(overrides or {})
        return cls.from_mapping(data)


# -- Records ------------------------------------------------------------------------

@dataclass
class RegretRecord:
    experiment_id: str
    policy: str
    family: str
    T: int
    L: int
    K: int
    delta: Optional[float]
    S: float
    replication: int
    seed: int
    regret: float
    wrong_pulls: int
    runtime_ms: float

    @property
    def key(self) -> tuple:
        return (self.T, self.L, self.delta, self.S)


CSV_COLUMNS = tuple(f.name for f in fields(RegretRecord))


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Iterable[RegretRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


# -- Experiment execution -------------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    order: tuple[int, int, int]
    experiment_id: str
    family: str
    point: GridPoint
    params: Optional[InstanceParams]
    schedule: Optional[dict]
    policy: str
    replication: int
    master_seed: int
    noise: str
    timing: bool


def _instance(family: str, point: GridPoint, params: Optional[InstanceParams], schedule: Optional[dict],
              noise: str, nu_rng: np.random.Generator) -> Environment:
    if params is not None:
        return build_environment(params, sample_nu(params, nu_rng), noise)
    if family == "alternating":
        return Environment(alternating_schedule(point.T, point.L, point.delta, point.S), point.S, NoiseSpec(noise))
    return Environment(MeanSchedule.from_dict(schedule), float(schedule["S"]), NoiseSpec(noise))


def _run_task(task: _Task) -> RegretRecord:
    rep_seed = derive_seed(task.master_seed, task.point.label, task.replication)
    env = _instance(task.family, task.point, task.params, task.schedule, task.noise, stream(rep_seed, "nu"))
    spec = PolicySpec.parse(task.policy)
    start = time.perf_counter()
    transcript, regret = simulate(env, spec, stream(rep_seed, "noise"), stream(rep_seed, f"policy/{spec.id}"))
    elapsed = (time.perf_counter() - start) * 1e3
    wrong = int(np.count_nonzero(regret_per_round(env.schedule, env.threshold, transcript.actions) > 0))
    sched = env.schedule
    delta = task.point.delta if task.family != "schedule" else None
    return RegretRecord(task.experiment_id, spec.id, task.family, sched.horizon, sched.num_segments,
                        sched.num_arms, delta, env.threshold, task.replication, rep_seed, regret, wrong,
                        round(elapsed, 3) if task.timing else 0.0)


def resolve_points(config: ExperimentConfig) -> list[tuple[GridPoint, Optional[InstanceParams], Optional[dict]]]:
    """Grid points with their family parameters; infeasible points are logged and dropped."""
    family = FAMILY_ALIASES.get(config.family, config.family)
    out = []
    if family == "schedule":
        with open(config.schedule) as fh:
            sched = yaml.safe_load(fh)
        schedule = MeanSchedule.from_dict(sched)
        out.append((GridPoint(schedule.horizon, schedule.num_segments, math.nan, float(sched["S"])), None, sched))
        return out
    for point in config.grid.points():
        try:
            if family in (SWAP_WINDOW, SINGLE_SWITCH):
                out.append((point, family_params(family, point.T, point.L, point.delta, point.S), None))
            else:
                alternating_schedule(point.T, point.L, point.delta, point.S)
                out.append((point, None, None))
        except ValueError as exc:  # ParameterError and schedule ContractError alike
            log.error("skipping grid point %s: %s", point.label, exc)
    if not out:
        raise ParameterError("at least one feasible grid point", "every grid point was rejected")
    return out


def run_experiment(config: ExperimentConfig) -> list[RegretRecord]:
    family = config.family if config.family in FAMILIES else config.family.replace("_", "-")
    tasks = []
    for g, (point, params, sched) in enumerate(resolve_points(config)):
        for p, pid in enumerate(config.policies):
            for rep in range(config.replications):
                tasks.append(_Task((g, p, rep), config.experiment_id, family, point, params, sched,
                                   pid, rep, config.master_seed, config.noise, config.timing))
    log.info("running %d episodes on %d worker(s)", len(tasks), config.workers)
    if config.workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (8 * config.workers))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
    else:
        results = [_run_task(t) for t in tasks]
    ranked = sorted(zip((t.order for t in tasks), results), key=lambda pair: pair[0])
    return [rec for _, rec in ranked]


# -- Reports ----------------------------------------------------------------------------

def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


@dataclass
class ScalingReport:
    rows: list[dict]
    spread: dict[str, float]
    flat_factor: float = 4.0

    def flat(self, policy: str) -> bool:
        return self.spread[policy] < self.flat_factor

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def scaling_report(records: Sequence[RegretRecord], flat_factor: float = 4.0) -> ScalingReport:
    """Mean regret, standard error and ``regret / (L ln T)`` per (policy, grid point)."""
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        groups.setdefault((rec.policy, rec.family, rec.T, rec.L, rec.delta, rec.S), []).append(rec.regret)
    rows, spread = [], {}
    for (policy, family, T, L, delta, S), regrets in groups.items():
        mean, se = _mean_se(regrets)
        norm = mean / (L * math.log(T)) if T > 1 else math.nan
        rows.append(dict(policy=policy, family=family, T=T, L=L, delta=delta, S=S, R=len(regrets),
                         mean_regret=mean, std_error=se, normalized=norm))
    for policy in {r["policy"] for r in rows}:
        vals = [r["normalized"] for r in rows if r["policy"] == policy]
        lo, hi = min(vals), max(vals)
        spread[policy] = hi / lo if lo > 0 else math.inf
    for row in rows:
        row["non_flat"] = spread[row["policy"]] >= flat_factor
    return ScalingReport(rows, spread, flat_factor)


def lowerbound_report(config: ExperimentConfig, records: Sequence[RegretRecord]) -> list[dict]:
    """Bayesian mean regret per policy against the swap-window regret floor."""
    params_by_key = {(p.T, p.L, p.delta, p.S): prm for p, prm, _ in resolve_points(config) if prm is not None}
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        groups.setdefault((rec.policy,) + rec.key, []).append(rec.regret)
    rows = []
    for (policy, T, L, delta, S), regrets in groups.items():
        prm = params_by_key.get((T, L, delta, S))
        mean, se = _mean_se(regrets)
        if prm is None:
            continue
        if prm.family == SWAP_WINDOW:
            floor = est.swap_window_bayes_floor(L, prm.n, delta)
            weak_floor = (L - 1) * math.log(prm.n) / 256
        else:
            floor = est.single_switch_bayes_floor(L, prm.n, delta)
            weak_floor = floor
        se0 = 0.0 if math.isnan(se) else se
        rows.append(dict(policy=policy, T=T, L=L, delta=delta, S=S, n=prm.n, l=prm.l, R=len(regrets),
                         mean_regret=mean, std_error=se, floor=floor, criterion_floor=weak_floor,
                         ok=bool(mean >= weak_floor - 3 * se0)))
    return rows


def estimator_report(config: ExperimentConfig) -> list[dict]:
    """Monte-Carlo identification error rates of the block estimators with their analytic bounds."""
    rows = []
    for point, prm, _ in resolve_points(config):
        if prm is None:
            raise ParameterError("estimator report needs a hard-instance family", config.family)
        for pid in config.policies:
            spec = PolicySpec.parse(pid)
            tally = _EstimatorTally()
            for rep in range(config.replications):
                rep_seed = derive_seed(config.master_seed, point.label, rep)
                nu = sample_nu(prm, stream(rep_seed, "nu"))
                env = build_environment(prm, nu, config.noise)
                transcript, _ = simulate(env, spec, stream(rep_seed, "noise"), stream(rep_seed, f"policy/{spec.id}"))
                coins = stream(rep_seed, "coin").integers(0, 2, size=prm.num_blocks)
                for view, v, wrong, coin in zip(est.block_views(transcript, prm), nu,
                                                transcript.wrong_pull_counts, coins):
                    tally.add(prm, view, int(v), int(wrong), int(coin))
            rows.append(tally.row(prm, spec.id))
    return rows


@dataclass
class _EstimatorTally:
    blocks: int = 0
    argmax_errors: int = 0
    premise: int = 0
    violations: int = 0
    prime_errors: int = 0
    double_errors: int = 0
    mixed_errors: int = 0
    short_windows: int = 0

    def add(self, prm: InstanceParams, view: est.BlockView, nu: int, wrong: int, coin: int) -> None:
        self.blocks += 1
        if prm.family == SWAP_WINDOW:
            correct = est.argmax_nu_estimator(view) == nu
            self.argmax_errors += not correct
            if wrong <= prm.l / 4:
                self.premise += 1
                self.violations += not correct
        else:
            n1 = int(np.count_nonzero(view.actions[view.window(nu)] == 1))
            self.short_windows += n1 < prm.r
            prime = est.changepoint_estimator_prime(view)
            double = est.changepoint_estimator_double_prime(view)
            self.prime_errors += prime != nu
            self.double_errors += double != nu
            self.mixed_errors += (prime if coin == 0 else double) != nu

    def row(self, prm: InstanceParams, policy: str) -> dict:
        B = self.blocks
        base = dict(policy=policy, family=prm.family, T=prm.T, L=prm.L, delta=prm.delta, S=prm.S,
                    n=prm.n, l=prm.l, r=prm.r, blocks=B)

        def rate(k):
            p = k / B
            return p, math.sqrt(p * (1 - p) / B)

        if prm.family == SWAP_WINDOW:
            err, se = rate(self.argmax_errors)
            base.update(argmax_error=err, argmax_se=se, fano_lower=est.swap_family_fano(prm),
                        premise_blocks=self.premise, implication_violations=self.violations)
            return base
        p_short = self.short_windows / B
        pe, pse = rate(self.prime_errors)
        de, dse = rate(self.double_errors)
        me, mse = rate(self.mixed_errors)
        pb = est.lemma2_prime_bound(prm.n, prm.r, prm.delta, p_short)
        db = est.lemma2_double_prime_bound(prm.n, prm.l, prm.r, prm.delta, 1 - p_short)
        base.update(prime_error=pe, prime_se=pse, prime_bound=pb,
                    double_prime_error=de, double_prime_se=dse, double_prime_bound=db,
                    mixed_error=me, mixed_se=mse, mixed_bound=0.5 * (pb + db), mixed_target=0.75)
        return base


def write_output(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)

