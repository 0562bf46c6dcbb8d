"""Latent-index estimators for hard instances and closed-form information bounds.

The estimators read a single block of a transcript. Candidates, times and
arms are 1-based; in-block time ``1`` is the first round of the block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .env import MeanSchedule, Transcript, check_assumptions
from .errors import DomainError
from .hard_instances import InstanceParams, swap_window_instance


@dataclass(frozen=True)
class BlockView:
    """One block of a transcript together with the family parameters needed to read it."""

    index: int
    start: int
    actions: np.ndarray
    rewards: np.ndarray
    candidates: tuple[int, ...]
    l: int
    S: float
    r: Optional[int] = None

    @property
    def times(self) -> range:
        return range(self.start, self.start + len(self.actions))

    def window(self, tau: int) -> slice:
        return slice(tau - 1, tau - 1 + self.l)


def block_view(transcript: Transcript, params: InstanceParams, index: int) -> BlockView:
    """Slice block ``index`` (1-based) out of ``transcript``."""
    if not 1 <= index <= params.num_blocks:
        raise DomainError(f"block {index} not in [1, {params.num_blocks}]")
    lo = (index - 1) * params.m
    hi = lo + params.m
    return BlockView(index, lo + 1, transcript.actions[lo:hi], transcript.rewards[lo:hi],
                     params.candidates, params.l, params.S, params.r)


def block_views(transcript: Transcript, params: InstanceParams) -> list[BlockView]:
    return [block_view(transcript, params, b) for b in range(1, params.num_blocks + 1)]


# -- Estimators ---------------------------------------------------------------

def window_counter(block: BlockView, tau: int) -> int:
    """Arm-2 pulls within the in-block window ``[tau, tau + l - 1]``."""
    return int(np.count_nonzero(block.actions[block.window(tau)] == 2))


def argmax_nu_estimator(block: BlockView) -> int:
    counts = [window_counter(block, tau) for tau in block.candidates]
    return block.candidates[int(np.argmax(counts))]


def _first_rewards(block: BlockView, tau: int, arm: int, k: int) -> Optional[np.ndarray]:
    w = block.window(tau)
    rewards = block.rewards[w][block.actions[w] == arm]
    return rewards[:k] if len(rewards) >= k else None


def changepoint_estimator_prime(block: BlockView) -> Optional[int]:
    """First candidate whose window holds ``r`` arm-1 rewards averaging at least ``S``."""
    r = block.r
    for tau in block.candidates:
        first = _first_rewards(block, tau, 1, r)
        if first is not None and first.mean() >= block.S:
            return tau
    return None


def changepoint_estimator_double_prime(block: BlockView) -> Optional[int]:
    """First candidate with fewer than ``r`` arm-1 pulls whose first ``l - r`` arm-2 rewards average at most ``S``."""
    r, k = block.r, block.l - block.r
    if k < 1:
        raise DomainError("double-prime estimator needs l - r >= 1")
    for tau in block.candidates:
        n1 = int(np.count_nonzero(block.actions[block.window(tau)] == 1))
        if n1 >= r:
            continue
        first = _first_rewards(block, tau, 2, k)
        if first is not None and first.mean() <= block.S:
            return tau
    return None


def mixed_estimator(block: BlockView, coin: int) -> Optional[int]:
    if coin == 0:
        return changepoint_estimator_prime(block)
    return changepoint_estimator_double_prime(block)


def info_budget(block: BlockView, nu: int, delta: float) -> float:
    """``4 delta^2`` times the block's wrong pulls under the single-switch construction."""
    before = block.actions[: nu - 1]
    after = block.actions[nu - 1:]
    wrong = int(np.count_nonzero(before == 1)) + int(np.count_nonzero(after == 2))
    return 4 * delta**2 * wrong


# -- Divergences and Fano-type bounds -------------------------------------------

def gaussian_kl(mu1: float, mu2: float) -> float:
    """KL divergence between unit-variance Gaussians."""
    return (mu1 - mu2) ** 2 / 2


def swap_family_pairwise_kl(params: InstanceParams, tau: int, tau_prime: int) -> float:
    if tau not in params.candidates or tau_prime not in params.candidates:
        raise DomainError("tau and tau' must be candidates")
    return 0.0 if tau == tau_prime else 4 * params.delta**2 * params.l


def swap_family_pairwise_kl_bruteforce(params: InstanceParams, tau: int, tau_prime: int,
                                       block: int = 1, others: Optional[Sequence[int]] = None,
                                       actions: Optional[Sequence[int]] = None) -> float:
    """Sum of per-round Gaussian KLs between the two instances that differ only in ``block``.

    ``actions`` fixes the arm pulled each round (default: arm 1 throughout);
    the result does not depend on it.
    """
    nb = params.num_blocks
    base = list(others) if others is not None else [params.candidates[0]] * nb
    nu_a, nu_b = list(base), list(base)
    nu_a[block - 1], nu_b[block - 1] = tau, tau_prime
    ma = swap_window_instance(params, nu_a).dense()
    mb = swap_window_instance(params, nu_b).dense()
    arms = np.ones(params.T, dtype=np.int64) if actions is None else np.asarray(actions, dtype=np.int64)
    rows = np.arange(params.T)
    per_round = gaussian_kl(ma[rows, arms - 1], mb[rows, arms - 1])
    return math.fsum(per_round)


def pairwise_kl_average(kl_matrix: np.ndarray) -> float:
    """``(1/|V|^2) sum_{v,v'} KL(P_v || P_v')``, an upper bound on the mutual information."""
    kl = np.asarray(kl_matrix, dtype=float)
    if kl.ndim != 2 or kl.shape[0] != kl.shape[1]:
        raise DomainError("KL matrix must be square")
    if np.any(kl < 0):
        raise DomainError("KL entries must be nonnegative")
    return float(kl.sum() / kl.shape[0] ** 2)


def fano_rhs(mutual_info: float, num_hypotheses: int) -> float:
    """``1 - (I + ln 2) / ln V``, unclamped (may be negative)."""
    if num_hypotheses < 2:
        raise DomainError("need at least two hypotheses")
    if mutual_info < 0:
        raise DomainError("mutual information bound must be nonnegative")
    return 1 - (mutual_info + math.log(2)) / math.log(num_hypotheses)


def conditional_fano_rhs(pairwise_kl_avg: float, num_hypotheses: int) -> float:
    """Fano bound with the averaged conditional pairwise KL in place of the mutual information."""
    if num_hypotheses < 2:
        raise DomainError("need at least two hypotheses")
    return 1 - (pairwise_kl_avg + math.log(2)) / math.log(num_hypotheses)


def swap_family_fano(params: InstanceParams) -> float:
    n = params.n
    kl = np.array([[swap_family_pairwise_kl(params, a, b) for b in params.candidates] for a in params.candidates])
    return conditional_fano_rhs(pairwise_kl_average(kl), n)


def lemma2_prime_bound(n: int, r: int, delta: float, p_short: float = 0.0) -> float:
    """Error bound for the prime estimator; ``p_short`` is P(fewer than r arm-1 pulls in the true window)."""
    return p_short + n * math.exp(-r * delta**2 / 2)


def lemma2_double_prime_bound(n: int, l: int, r: int, delta: float, p_long: float = 0.0) -> float:
    """Error bound for the double-prime estimator; ``p_long`` is P(at least r arm-1 pulls in the true window)."""
    return p_long + n * math.exp(-(l - r) * delta**2 / 2)


def mixed_error_bound(n: int, l: int, delta: float) -> float:
    """``1/2 + n exp(-(l - 1) delta^2 / 2)``; at most 3/4 under the single-switch recipe."""
    return 0.5 + n * math.exp(-(l - 1) * delta**2 / 2)


def swap_window_bayes_floor(L: int, n: int, delta: float) -> float:
    """Bayesian regret floor ``(L - 1) ln n / (256 delta)`` on the swap-window family."""
    return (L - 1) * math.log(n) / (256 * delta)


def single_switch_bayes_floor(L: int, n: int, delta: float) -> float:
    """Bayesian regret floor ``L / (8 delta) (ln(n) / 4 - ln 2)`` on the single-switch family (may be negative)."""
    return L / (8 * delta) * (math.log(n) / 4 - math.log(2))


# -- Upper-bound formulas -------------------------------------------------------

def thm3_bound(schedule: MeanSchedule, S: float, T: int) -> float:
    """``sum_l sum_{a: mu < S} (1/gap + gap / gap*^2) ln T`` for the windowed-leader policy."""
    means = schedule.segment_means
    star = means.max(axis=1) - S
    if np.any(star <= 0):
        raise DomainError("some segment has no arm strictly above the threshold")
    total = 0.0
    for seg, gstar in zip(means, star):
        for mu in seg:
            if mu < S:
                gap = S - mu
                total += 1 / gap + gap / gstar**2
    return total * math.log(T)


def thm4_bound(schedule: MeanSchedule, S: float) -> float:
    """``sum_{a} gap_max (1 + 1/gap_min^2 + 1/gap*^2)`` over arms that are ever below ``S``."""
    flags = check_assumptions(schedule, S)
    if not (flags.always_realizable and flags.no_down_crossing):
        raise DomainError("requires an always-realizable arm and no down-crossings")
    means = schedule.segment_means
    always = np.all(means > S, axis=0)
    gap_star = float(np.max(np.min(means[:, always] - S, axis=0)))
    gaps = np.maximum(S - means, 0.0)
    total = 0.0
    for a in range(schedule.num_arms):
        pos = gaps[:, a][gaps[:, a] > 0]
        if pos.size:
            total += pos.max() * (1 + 1 / pos.min() ** 2 + 1 / gap_star**2)
    return total
