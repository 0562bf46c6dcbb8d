"""Bandit policies and the episode runner.

Every policy follows the same protocol: ``select(t)`` returns the arm for
round ``t``, ``update(t, arm, reward)`` feeds back the observation, and
``reset()`` returns the policy to its freshly constructed state (including
its private random stream).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .env import Environment, Transcript, sample_reward, satisficing_regret, wrong_pulls_per_block
from .errors import ContractError, ParameterError
from .windowed import EpochBuffer, RadiusFn, lcb_win, ucb_win


class Policy:
    num_arms: int

    def select(self, t: int) -> int:
        raise NotImplementedError

    def update(self, t: int, arm: int, reward: float) -> None:
        pass

    def reset(self) -> None:
        pass


class _Sequenced(Policy):
    """Enforces the select(t) / update(t) call order t = 1, 2, ..."""

    def _init_clock(self):
        self._t = 1
        self._pending: Optional[int] = None

    def _check_select(self, t: int):
        if t != self._t or self._pending is not None:
            raise ContractError(f"select({t}) out of order; expected round {self._t}")

    def _check_update(self, t: int, arm: int):
        if t != self._t or self._pending != arm:
            raise ContractError(f"update({t}, {arm}) does not match select for round {self._t}")
        self._pending = None
        self._t += 1


class NonstationarySat(_Sequenced):
    """Leader-based satisficing policy with windowed confidence bounds.

    Without a leader, arms are explored in a fixed round-robin order whose
    pointer persists across leader periods. An explored arm whose windowed
    LCB reaches ``S`` becomes the leader; the leader is played until its
    windowed UCB drops strictly below ``S``. Either transition starts a new
    epoch for that arm with an empty buffer.
    """

    def __init__(self, num_arms: int, horizon: int, threshold: float, radius: Optional[RadiusFn] = None):
        self.num_arms = num_arms
        self.horizon = horizon
        self.threshold = threshold
        self.radius = radius if radius is not None else RadiusFn(horizon, num_arms)
        self.reset()

    def reset(self) -> None:
        self._init_clock()
        self.leader: Optional[int] = None
        self.pointer = 1
        self.epochs = [1] * self.num_arms
        self.buffers = [EpochBuffer() for _ in range(self.num_arms)]
        self.exploration_rounds = 0
        self.promotions = 0
        self.demotions = 0

    def select(self, t: int) -> int:
        self._check_select(t)
        arm = self.pointer if self.leader is None else self.leader
        self._pending = arm
        return arm

    def update(self, t: int, arm: int, reward: float) -> None:
        self._check_update(t, arm)
        buf = self.buffers[arm - 1]
        buf.append(reward)
        if self.leader is None:
            self.exploration_rounds += 1
            self.pointer = arm % self.num_arms + 1
            if lcb_win(buf, self.radius) >= self.threshold:
                self.leader = arm
                self._new_epoch(arm)
                self.promotions += 1
        elif ucb_win(buf, self.radius) < self.threshold:
            self.leader = None
            self._new_epoch(arm)
            self.demotions += 1

    def _new_epoch(self, arm: int) -> None:
        self.epochs[arm - 1] += 1
        self.buffers[arm - 1].reset()


class SimpleSat(_Sequenced):
    """Pull each arm once, then exploit an empirical argmax if it clears ``S``, else pull uniformly."""

    def __init__(self, num_arms: int, threshold: float, rng: Optional[np.random.Generator] = None):
        self.num_arms = num_arms
        self.threshold = threshold
        self.rng = rng if rng is not None else np.random.default_rng()
        self._rng_state = copy.deepcopy(self.rng.bit_generator.state)
        self.reset()

    def reset(self) -> None:
        self._init_clock()
        self.rng.bit_generator.state = copy.deepcopy(self._rng_state)
        self._restart()

    def _restart(self) -> None:
        self.counts = [0] * self.num_arms
        self.sums = [0.0] * self.num_arms
        self._local_t = 0

    def empirical_means(self) -> list[float]:
        return [s / c if c else math.nan for s, c in zip(self.sums, self.counts)]

    def select(self, t: int) -> int:
        self._check_select(t)
        self._local_t += 1
        if self._local_t <= self.num_arms:
            arm = self._local_t
        else:
            means = self.empirical_means()
            best = max(range(self.num_arms), key=lambda i: (means[i], -i))
            if means[best] >= self.threshold:
                arm = best + 1
            else:
                arm = int(self.rng.random() * self.num_arms) + 1
        self._pending = arm
        return arm

    def update(self, t: int, arm: int, reward: float) -> None:
        self._check_update(t, arm)
        self.counts[arm - 1] += 1
        self.sums[arm - 1] += reward


class OracleRestart(SimpleSat):
    """Simple-Sat restarted at every true change point (oracle knowledge of the schedule)."""

    def __init__(self, num_arms: int, threshold: float, change_points: Sequence[int],
                 rng: Optional[np.random.Generator] = None):
        self.restarts = frozenset(int(c) for c in change_points if c > 1)
        super().__init__(num_arms, threshold, rng)

    def select(self, t: int) -> int:
        if t in self.restarts and t == self._t and self._pending is None:
            self._restart()
        return super().select(t)


class FixedArm(Policy):
    def __init__(self, num_arms: int, arm: int):
        if not 1 <= arm <= num_arms:
            raise ParameterError("fixed arm must lie in [1, K]", f"got {arm} with K={num_arms}")
        self.num_arms = num_arms
        self.arm = arm

    def select(self, t: int) -> int:
        return self.arm


class RoundRobin(Policy):
    def __init__(self, num_arms: int):
        self.num_arms = num_arms

    def select(self, t: int) -> int:
        return (t - 1) % self.num_arms + 1


class UniformRandom(Policy):
    def __init__(self, num_arms: int, rng: Optional[np.random.Generator] = None):
        self.num_arms = num_arms
        self.rng = rng if rng is not None else np.random.default_rng()
        self._rng_state = copy.deepcopy(self.rng.bit_generator.state)

    def select(self, t: int) -> int:
        return int(self.rng.random() * self.num_arms) + 1

    def reset(self) -> None:
        self.rng.bit_generator.state = copy.deepcopy(self._rng_state)


class PerturbedOracle(Policy):
    """Plays a satisficing arm of the true schedule, switching to the other arm with probability ``eps``.

    Two-armed only. Used to generate trajectories with few non-satisficing pulls.
    """

    def __init__(self, schedule, threshold: float, eps: float, rng: Optional[np.random.Generator] = None):
        if schedule.num_arms != 2:
            raise ParameterError("perturbed-oracle needs K = 2", f"got K={schedule.num_arms}")
        if not 0 <= eps <= 1:
            raise ParameterError("eps must lie in [0, 1]", f"got {eps}")
        self.num_arms = 2
        self.eps = eps
        self.best = best_arms(schedule)
        self.rng = rng if rng is not None else np.random.default_rng()
        self._rng_state = copy.deepcopy(self.rng.bit_generator.state)

    def select(self, t: int) -> int:
        arm = int(self.best[t - 1])
        return 3 - arm if self.rng.random() < self.eps else arm

    def reset(self) -> None:
        self.rng.bit_generator.state = copy.deepcopy(self._rng_state)


def best_arms(schedule) -> np.ndarray:
    """Per-round arm with the highest mean (lowest index on ties)."""
    seg = schedule.segment_of(np.arange(1, schedule.horizon + 1))
    return np.argmax(schedule.segment_means, axis=1)[seg] + 1


POLICY_KINDS = ("nonstat-sat", "simple-sat", "oracle-restart", "fixed", "round-robin", "uniform",
                "perturbed-oracle")


@dataclass(frozen=True)
class PolicySpec:
    """A parsed policy id such as ``"nonstat-sat"`` or ``"fixed:2"``."""

    kind: str
    arm: Optional[int] = None
    eps: Optional[float] = None

    @classmethod
    def parse(cls, policy_id: str) -> "PolicySpec":
        pid = policy_id.strip()
        if pid.startswith("fixed"):
            _, sep, rest = pid.partition(":")
            try:
                arm = int(rest) if sep else 1
            except ValueError:
                raise ParameterError("fixed policy id must be 'fixed:<arm>'", repr(policy_id)) from None
            return cls("fixed", arm)
        if pid.startswith("perturbed-oracle"):
            _, sep, rest = pid.partition(":")
            try:
                eps = float(rest) if sep else 0.0
            except ValueError:
                raise ParameterError("perturbed-oracle id must be 'perturbed-oracle:<eps>'", repr(policy_id)) from None
            return cls("perturbed-oracle", eps=eps)
        if pid not in POLICY_KINDS:
            raise ParameterError("unknown policy id", f"{policy_id!r}; known: {', '.join(POLICY_KINDS)}")
        return cls(pid)

    @property
    def id(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.arm}"
        if self.kind == "perturbed-oracle":
            return f"perturbed-oracle:{self.eps:g}"
        return self.kind

    def build(self, env: Environment, rng: Optional[np.random.Generator] = None,
              radius: Optional[RadiusFn] = None) -> Policy:
        K, S = env.num_arms, env.threshold
        if self.kind == "nonstat-sat":
            return NonstationarySat(K, env.horizon, S, radius)
        if self.kind == "simple-sat":
            return SimpleSat(K, S, rng)
        if self.kind == "oracle-restart":
            return OracleRestart(K, S, env.schedule.change_points[:-1], rng)
        if self.kind == "fixed":
            return FixedArm(K, self.arm)
        if self.kind == "round-robin":
            return RoundRobin(K)
        if self.kind == "perturbed-oracle":
            return PerturbedOracle(env.schedule, S, self.eps, rng)
        return UniformRandom(K, rng)


def make_policy(policy_id: str, env: Environment, rng: Optional[np.random.Generator] = None,
                radius: Optional[RadiusFn] = None) -> Policy:
    return PolicySpec.parse(policy_id).build(env, rng, radius)


def run_episode(env: Environment, policy: Policy, rng: np.random.Generator) -> tuple[Transcript, float]:
    """Play ``T`` rounds of ``policy`` against ``env`` drawing noise from ``rng``."""
    T = env.horizon
    actions = np.empty(T, dtype=np.int64)
    rewards = np.empty(T)
    for t in range(1, T + 1):
        arm = policy.select(t)
        r = sample_reward(env, t, arm, rng)
        policy.update(t, arm, r)
        actions[t - 1] = arm
        rewards[t - 1] = r
    transcript = Transcript(actions, rewards, wrong_pulls_per_block(env, actions))
    return transcript, satisficing_regret(env.schedule, env.threshold, actions)
