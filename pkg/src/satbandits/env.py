"""Piecewise-stationary environments and satisficing regret.

Times and arms are 1-based throughout the public API: rounds run over
``1..T`` and arms over ``1..K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import ContractError, RangeError

UNIT_GAUSSIAN = "unit-gaussian"
ZERO_NOISE = "zero"
NOISE_KINDS = (UNIT_GAUSSIAN, ZERO_NOISE)


@dataclass(frozen=True, eq=False)
class MeanSchedule:
    """Per-arm means that are constant between change points.

    ``change_points`` holds ``1 = T_0 < T_1 < ... < T_L = T + 1`` and
    ``segment_means[l]`` is the mean vector on ``[T_l, T_{l+1} - 1]``.
    """

    num_arms: int
    horizon: int
    change_points: tuple[int, ...]
    segment_means: np.ndarray

    def __post_init__(self):
        K, T = int(self.num_arms), int(self.horizon)
        if K < 1 or T < 1:
            raise ContractError(f"need K >= 1 and T >= 1, got K={K}, T={T}")
        cps = tuple(int(c) for c in self.change_points)
        means = np.array(self.segment_means, dtype=float, copy=True)
        if means.ndim != 2 or means.shape[1] != K:
            raise ContractError(f"segment_means must have shape (L, {K}), got {means.shape}")
        if len(cps) != means.shape[0] + 1:
            raise ContractError("need exactly one more change point than segments")
        if cps[0] != 1 or cps[-1] != T + 1:
            raise ContractError(f"change points must start at 1 and end at T+1={T + 1}")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ContractError("change points must be strictly increasing")
        if not np.all(np.isfinite(means)) or means.min() < 0.0 or means.max() > 1.0:
            raise ContractError("all means must lie in [0, 1]")
        for j in range(1, means.shape[0]):
            if np.array_equal(means[j - 1], means[j]):
                raise ContractError(f"segments {j - 1} and {j} have identical means")
        means.setflags(write=False)
        object.__setattr__(self, "num_arms", K)
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "change_points", cps)
        object.__setattr__(self, "segment_means", means)

    @classmethod
    def from_dense(cls, matrix: Any) -> "MeanSchedule":
        """Build from a ``T x K`` matrix of per-round means, merging equal rows."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1:
            raise ContractError("dense means must be a non-empty T x K matrix")
        changed = np.any(m[1:] != m[:-1], axis=1)
        starts = np.concatenate(([0], np.flatnonzero(changed) + 1))
        cps = tuple(int(s) + 1 for s in starts) + (m.shape[0] + 1,)
        return cls(m.shape[1], m.shape[0], cps, m[starts])

    @classmethod
    def constant(cls, means: Sequence[float], horizon: int) -> "MeanSchedule":
        return cls(len(means), horizon, (1, horizon + 1), np.asarray([means], dtype=float))

    @property
    def num_segments(self) -> int:
        return self.segment_means.shape[0]

    def segment_of(self, t: Any) -> Any:
        """0-based segment index containing time(s) ``t`` (no range check)."""
        return np.searchsorted(self.change_points, t, side="right") - 1

    def dense(self) -> np.ndarray:
        """The ``T x K`` matrix of per-round means."""
        lengths = np.diff(self.change_points)
        return np.repeat(self.segment_means, lengths, axis=0)

    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.change_points)

    def to_dict(self) -> dict:
        return {
            "K": self.num_arms,
            "T": self.horizon,
            "change_points": list(self.change_points),
            "segment_means": self.segment_means.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeanSchedule":
        return cls(int(d["K"]), int(d["T"]), tuple(d["change_points"]), np.asarray(d["segment_means"]))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = UNIT_GAUSSIAN

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ContractError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == ZERO_NOISE:
            return 0.0
        return float(rng.standard_normal())

    def draw_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # Same values, in the same order, as n successive draw() calls.
        if self.kind == ZERO_NOISE:
            return np.zeros(n)
        return rng.standard_normal(n)


@dataclass(frozen=True)
class BlockLayout:
    """Block metadata of a hard instance: ``num_blocks`` blocks of ``block_length`` rounds."""

    block_length: int
    num_blocks: int


@dataclass(frozen=True)
class Environment:
    schedule: MeanSchedule
    threshold: float
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    blocks: Optional[BlockLayout] = None

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ContractError("threshold must be finite")

    @property
    def num_arms(self) -> int:
        return self.schedule.num_arms

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    def to_dict(self) -> dict:
        d = self.schedule.to_dict()
        d["S"] = self.threshold
        return d

    @classmethod
    def from_dict(cls, d: dict, noise: str = UNIT_GAUSSIAN) -> "Environment":
        return cls(MeanSchedule.from_dict(d), float(d["S"]), NoiseSpec(noise))


@dataclass
class Transcript:
    actions: np.ndarray
    rewards: np.ndarray
    wrong_pull_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.actions.shape != self.rewards.shape or self.actions.ndim != 1:
            raise ContractError("actions and rewards must be 1-d arrays of equal length")

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class AssumptionFlags:
    realizable: bool
    always_realizable: bool
    no_down_crossing: bool


def _check_time(schedule: MeanSchedule, t: int) -> None:
    if not 1 <= t <= schedule.horizon:
        raise RangeError(f"time {t} outside [1, {schedule.horizon}]")


def segment_count(schedule: MeanSchedule, s: int, t: int) -> int:
    """Number of stationary segments on ``[s, t]``."""
    if not 1 <= s <= t <= schedule.horizon:
        raise RangeError(f"need 1 <= s <= t <= {schedule.horizon}, got s={s}, t={t}")
    # A change between j and j+1 with j in [s, t-1] is a change point in [s+1, t].
    inner = np.asarray(schedule.change_points[1:-1])
    return 1 + int(np.count_nonzero((inner >= s + 1) & (inner <= t)))


def means_at(schedule: MeanSchedule, t: int) -> np.ndarray:
    _check_time(schedule, t)
    return schedule.segment_means[schedule.segment_of(t)]


def sample_reward(env: Environment, t: int, arm: int, rng: np.random.Generator) -> float:
    """Draw ``mu_t(arm) + xi`` with ``xi`` taken from ``rng`` according to the environment noise kind."""
    if not 1 <= arm <= env.num_arms:
        raise RangeError(f"arm {arm} outside [1, {env.num_arms}]")
    mu = means_at(env.schedule, t)[arm - 1]
    return float(mu) + env.noise.draw(rng)


def check_assumptions(schedule: MeanSchedule, S: float) -> AssumptionFlags:
    means = schedule.segment_means
    above = means > S
    satisficing = means >= S
    realizable = bool(np.all(above.any(axis=1)))
    always = bool(np.any(above.all(axis=0)))
    # Indicators are constant within a segment, so segment-level monotonicity suffices.
    no_down = bool(np.all(satisficing[1:] >= satisficing[:-1])) if len(means) > 1 else True
    return AssumptionFlags(realizable, always, no_down)


def regret_per_round(schedule: MeanSchedule, S: float, actions: Any) -> np.ndarray:
    """Per-round shortfall ``(S - mu_t(a_t))_+``."""
    a = np.asarray(actions, dtype=np.int64)
    if a.shape != (schedule.horizon,):
        raise ContractError(f"expected {schedule.horizon} actions, got shape {a.shape}")
    if a.size and (a.min() < 1 or a.max() > schedule.num_arms):
        raise RangeError("action outside [1, K]")
    seg = schedule.segment_of(np.arange(1, schedule.horizon + 1))
    return np.maximum(S - schedule.segment_means[seg, a - 1], 0.0)


def pull_counts(schedule: MeanSchedule, actions: Any) -> np.ndarray:
    """``(L, K)`` matrix counting pulls of each arm within each segment."""
    a = np.asarray(actions, dtype=np.int64)
    seg = schedule.segment_of(np.arange(1, len(a) + 1))
    flat = np.bincount(seg * schedule.num_arms + (a - 1), minlength=schedule.num_segments * schedule.num_arms)
    return flat.reshape(schedule.num_segments, schedule.num_arms)


def satisficing_regret(schedule: MeanSchedule, S: float, actions: Any) -> float:
    """Cumulative satisficing regret ``sum_t (S - mu_t(a_t))_+`` of an action sequence."""
    a = np.asarray(actions, dtype=np.int64)
    if a.shape != (schedule.horizon,):
        raise ContractError(f"expected {schedule.horizon} actions, got shape {a.shape}")
    if a.size and (a.min() < 1 or a.max() > schedule.num_arms):
        raise RangeError("action outside [1, K]")
    counts = pull_counts(schedule, a)
    gaps = np.maximum(S - schedule.segment_means, 0.0)
    return math.fsum((counts * gaps).ravel())


def wrong_pulls_per_block(env: Environment, actions: Any) -> Optional[np.ndarray]:
    """Per-block count of non-satisficing pulls, or None without block metadata."""
    if env.blocks is None:
        return None
    a = np.asarray(actions, dtype=np.int64)
    seg = env.schedule.segment_of(np.arange(1, len(a) + 1))
    wrong = env.schedule.segment_means[seg, a - 1] < env.threshold
    m, nb = env.blocks.block_length, env.blocks.num_blocks
    return wrong[: m * nb].reshape(nb, m).sum(axis=1)


def alternating_schedule(T: int, L: int, delta: float, S: float) -> MeanSchedule:
    """Two-armed schedule with ``L`` equally spaced segments whose satisficing arm alternates.

    Segment 0 has means ``(S + delta, S - delta)``; each change point swaps them.
    """
    if not 1 <= L <= T:
        raise ContractError(f"need 1 <= L <= T, got L={L}, T={T}")
    hi, lo = S + delta, S - delta
    starts = [1 + (j * T) // L for j in range(L)]
    means = [(hi, lo) if j % 2 == 0 else (lo, hi) for j in range(L)]
    return MeanSchedule(2, T, tuple(starts) + (T + 1,), np.asarray(means))
