"""Compiled episode kernels.

Each kernel replays exactly the decisions of the matching class in
:mod:`satbandits.policies` given the same noise and policy streams, so the
harness can run long horizons without the per-round Python overhead. Noise
for round ``t`` is the ``t``-th draw of the noise stream regardless of the arm
pulled, and the policy stream is consumed one uniform at a time, only when a
random choice is actually made.
"""

from __future__ import annotations

import numba
import numpy as np

from .env import Environment, Transcript, satisficing_regret, wrong_pulls_per_block
from .policies import PolicySpec, best_arms
from .windowed import RadiusFn, win_set


@numba.njit(cache=True)
def _nonstat_sat_kernel(means, noise, S, radius):
    T, K = means.shape
    actions = np.empty(T, dtype=np.int64)
    prefix = np.zeros((K, T + 1))
    length = np.zeros(K, dtype=np.int64)
    leader = -1
    pointer = 0
    explore = 0
    for t in range(T):
        if leader < 0:
            a = pointer
            pointer = (pointer + 1) % K
            explore += 1
        else:
            a = leader
        actions[t] = a + 1
        r = means[t, a] + noise[t]
        m = length[a] + 1
        prefix[a, m] = prefix[a, m - 1] + r
        length[a] = m
        if leader < 0:
            best = -np.inf
            w = 1
            k = 0
            while w <= m:
                v = (prefix[a, m] - prefix[a, m - w]) / w - radius[k]
                if v > best:
                    best = v
                w *= 2
                k += 1
            if best >= S:
                leader = a
                length[a] = 0
        else:
            best = np.inf
            w = 1
            k = 0
            while w <= m:
                v = (prefix[a, m] - prefix[a, m - w]) / w + radius[k]
                if v < best:
                    best = v
                w *= 2
                k += 1
            if best < S:
                leader = -1
                length[a] = 0
    return actions, explore


@numba.njit(cache=True)
def _simple_sat_kernel(means, noise, S, uniforms, restart):
    T, K = means.shape
    actions = np.empty(T, dtype=np.int64)
    counts = np.zeros(K, dtype=np.int64)
    sums = np.zeros(K)
    local = 0
    u = 0
    for t in range(T):
        if restart[t]:
            counts[:] = 0
            sums[:] = 0.0
            local = 0
        local += 1
        if local <= K:
            a = local - 1
        else:
            a = 0
            best = sums[0] / counts[0]
            for i in range(1, K):
                v = sums[i] / counts[i]
                if v > best:
                    best = v
                    a = i
            if not best >= S:
                a = int(uniforms[u] * K)
                u += 1
        actions[t] = a + 1
        counts[a] += 1
        sums[a] += means[t, a] + noise[t]
    return actions


def radius_table(radius: RadiusFn, T: int) -> np.ndarray:
    """Radius evaluated on every dyadic window up to ``T``."""
    return np.array([radius(w) for w in win_set(T)], dtype=float)


def simulate(env: Environment, spec: PolicySpec, noise_rng: np.random.Generator,
             policy_rng: np.random.Generator | None = None,
             radius: RadiusFn | None = None) -> tuple[Transcript, float]:
    """Fast equivalent of ``run_episode(env, spec.build(env, policy_rng, radius), noise_rng)``."""
    T, K = env.horizon, env.num_arms
    means = env.schedule.dense()
    noise = env.noise.draw_many(noise_rng, T)
    if spec.kind == "nonstat-sat":
        rad = radius if radius is not None else RadiusFn(T, K)
        actions, _ = _nonstat_sat_kernel(means, noise, float(env.threshold), radius_table(rad, T))
    elif spec.kind in ("simple-sat", "oracle-restart"):
        restart = np.zeros(T, dtype=np.bool_)
        if spec.kind == "oracle-restart":
            restart[np.asarray(env.schedule.change_points[1:-1]) - 1] = True
        uniforms = policy_rng.random(T) if policy_rng is not None else np.random.default_rng().random(T)
        actions = _simple_sat_kernel(means, noise, float(env.threshold), uniforms, restart)
    elif spec.kind == "fixed":
        actions = np.full(T, spec.arm, dtype=np.int64)
    elif spec.kind == "round-robin":
        actions = np.arange(T, dtype=np.int64) % K + 1
    elif spec.kind == "uniform":
        rng = policy_rng if policy_rng is not None else np.random.default_rng()
        actions = (rng.random(T) * K).astype(np.int64) + 1
    elif spec.kind == "perturbed-oracle":
        rng = policy_rng if policy_rng is not None else np.random.default_rng()
        best = best_arms(env.schedule)
        actions = np.where(rng.random(T) < spec.eps, 3 - best, best)
    else:
        raise ValueError(f"no kernel for policy kind {spec.kind!r}")
    rewards = means[np.arange(T), actions - 1] + noise
    transcript = Transcript(actions, rewards, wrong_pulls_per_block(env, actions))
    return transcript, satisficing_regret(env.schedule, env.threshold, actions)


def nonstat_sat_exploration_rounds(env: Environment, noise_rng: np.random.Generator,
                                   radius: RadiusFn | None = None) -> int:
    """Number of rounds Nonstationary-Sat spends without a leader on one episode."""
    T = env.horizon
    rad = radius if radius is not None else RadiusFn(T, env.num_arms)
    noise = env.noise.draw_many(noise_rng, T)
    _, explore = _nonstat_sat_kernel(env.schedule.dense(), noise, float(env.threshold), radius_table(rad, T))
    return int(explore)


def warm_up() -> None:
    """Compile the kernels once (useful before timing-sensitive runs)."""
    means = np.full((4, 2), 0.5)
    _nonstat_sat_kernel(means, np.zeros(4), 0.5, np.ones(3))
    _simple_sat_kernel(means, np.zeros(4), 0.5, np.zeros(4), np.zeros(4, dtype=np.bool_))

