"""Dyadic suffix-window statistics and windowed confidence bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import ContractError


class EpochBuffer:
    """Append-only reward buffer for one arm within one epoch.

    Prefix sums are kept alongside the entries so every suffix average is O(1).
    """

    __slots__ = ("_entries", "_prefix")

    def __init__(self, entries: Iterable[float] = ()):
        self._entries: list[float] = []
        self._prefix: list[float] = [0.0]
        for x in entries:
            self.append(x)

    def append(self, x: float) -> None:
        x = float(x)
        self._entries.append(x)
        self._prefix.append(self._prefix[-1] + x)

    def reset(self) -> None:
        self._entries = []
        self._prefix = [0.0]

    @property
    def entries(self) -> tuple[float, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def suffix_sum(self, w: int) -> float:
        m = len(self._entries)
        return self._prefix[m] - self._prefix[m - w]

    def __repr__(self) -> str:
        return f"EpochBuffer({self._entries!r})"


def win_set(m: int) -> list[int]:
    """Powers of two (including 1) not exceeding ``m``, ascending."""
    out = []
    w = 1
    while w <= m:
        out.append(w)
        w *= 2
    return out


def avg_last(buffer: EpochBuffer, w: int) -> float:
    """Average of the most recent ``w`` entries."""
    if not 1 <= w <= len(buffer):
        raise ContractError(f"window {w} not in [1, {len(buffer)}]")
    return buffer.suffix_sum(w) / w


def beta(w: int, T: int, K: int) -> float:
    """Confidence radius ``sqrt(2 (4 ln T + ln K) / w)``."""
    if w < 1 or T < 2 or K < 1:
        raise ContractError(f"need w >= 1, T >= 2, K >= 1; got w={w}, T={T}, K={K}")
    return math.sqrt(2.0 * (4.0 * math.log(T) + math.log(K)) / w)


@dataclass(frozen=True)
class RadiusFn:
    """Window radius for horizon ``T`` and ``K`` arms; ``override`` replaces it in tests."""

    T: int
    K: int
    override: Optional[Callable[[int], float]] = None

    def __call__(self, w: int) -> float:
        if self.override is not None:
            return float(self.override(w))
        return beta(w, self.T, self.K)

    @classmethod
    def zero(cls, T: int = 2, K: int = 1) -> "RadiusFn":
        return cls(T, K, override=lambda w: 0.0)


def lcb_win(buffer: EpochBuffer, radius: RadiusFn) -> float:
    """Most optimistic lower bound over dyadic suffix windows; ``-inf`` when empty."""
    best = -math.inf
    for w in win_set(len(buffer)):
        best = max(best, buffer.suffix_sum(w) / w - radius(w))
    return best


def ucb_win(buffer: EpochBuffer, radius: RadiusFn) -> float:
    """Most pessimistic upper bound over dyadic suffix windows; ``+inf`` when empty."""
    best = math.inf
    for w in win_set(len(buffer)):
        best = min(best, buffer.suffix_sum(w) / w + radius(w))
    return best


def n_delta(T: int, K: int, delta: float) -> Optional[int]:
    """Smallest ``n`` in ``[1, T]`` with ``beta(n) <= delta / 2``, or None if there is none."""
    if delta <= 0:
        raise ContractError("delta must be positive")
    c = 8.0 * (4.0 * math.log(T) + math.log(K)) / delta**2
    n = max(1, math.ceil(c))
    # Settle float rounding at the boundary against beta itself.
    while n > 1 and beta(n - 1, T, K) <= delta / 2:
        n -= 1
    while beta(n, T, K) > delta / 2:
        n += 1
    return n if n <= T else None
