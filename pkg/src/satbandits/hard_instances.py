"""Hidden-window and hidden-change-point instance families used for lower bounds.

Both families are two-armed with means ``S +/- delta``. The horizon is cut
into blocks of length ``m``; each block hides one latent candidate ``nu``
drawn uniformly from ``{2, 2 + l, ..., 2 + (n - 1) l}``.

* ``swap_window``: arm 2 is satisficing only on ``[nu, nu + l - 1]`` of each
  block, arm 1 elsewhere. Requires odd ``L``; there are ``(L - 1) / 2`` blocks.
* ``single_switch``: arm 2 is satisficing before ``nu`` and arm 1 from ``nu``
  on. Requires even ``L``; there are ``L / 2`` blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .env import BlockLayout, Environment, MeanSchedule, NoiseSpec
from .errors import DomainError, ParameterError

SWAP_WINDOW = "swap_window"
SINGLE_SWITCH = "single_switch"
FAMILY_ALIASES = {"swap-window": SWAP_WINDOW, "swap_window": SWAP_WINDOW,
                  "single-switch": SINGLE_SWITCH, "single_switch": SINGLE_SWITCH}


@dataclass(frozen=True)
class InstanceParams:
    family: str
    T: int
    L: int
    delta: float
    S: float
    m: int
    n: int
    l: int
    r: Optional[int] = None

    @property
    def candidates(self) -> tuple[int, ...]:
        return tuple(2 + i * self.l for i in range(self.n))

    @property
    def num_blocks(self) -> int:
        return (self.L - 1) // 2 if self.family == SWAP_WINDOW else self.L // 2

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout(self.m, self.num_blocks)

    @property
    def fano_margin(self) -> float:
        """``0.5 ln n - (4 delta^2 l + ln 2)``; nonnegative means the identification bound is at least 1/2."""
        return 0.5 * math.log(self.n) - (4 * self.delta**2 * self.l + math.log(2))

    @property
    def fano_margin_ok(self) -> bool:
        return self.fano_margin >= 0


def lemma1_choose_n(y: float) -> int:
    """Integer ``x = ceil(sqrt(y)) >= 2`` with ``x ln x <= y`` and ``ln x >= ln(y) / 2``."""
    if not y >= 4:
        raise DomainError(f"need y >= 4, got {y}")
    # Smallest integer x with x^2 >= y, i.e. x^2 >= ceil(y); exact integer arithmetic.
    return math.isqrt(math.ceil(y) - 1) + 1


def _check_common(T: int, L: int, delta: float, S: float) -> None:
    if T < 1:
        raise ParameterError("T >= 1", f"got T={T}")
    # S +/- delta must stay inside [0, 1].
    if not 0 < delta <= min(S, 1 - S):
        raise ParameterError("0 < delta <= min(S, 1 - S)", f"got delta={delta}, S={S}")


def swap_window_params(T: int, L: int, delta: float, S: float) -> InstanceParams:
    _check_common(T, L, delta, S)
    if L < 3 or L % 2 == 0:
        raise ParameterError("L must be odd and >= 3 for swap_window", f"got L={L}")
    if (2 * T) % (L - 1):
        raise ParameterError("2T/(L-1) must be an integer", f"got T={T}, L={L}")
    if delta**2 * T < L:
        raise ParameterError("delta^2 T >= L", f"got delta^2 T={delta**2 * T:g}, L={L}")
    m = 2 * T // (L - 1)
    n = lemma1_choose_n(16 * delta**2 * (m - 2))

    def window(n):
        return math.ceil(math.log(n) / (16 * delta**2))

    while n >= 2 and n * window(n) > m - 2:
        n -= 1
    if n < 2:
        raise ParameterError("n l <= m - 2 with n >= 2", f"infeasible for m={m}, delta={delta}")
    return InstanceParams(SWAP_WINDOW, T, L, delta, S, m, n, window(n))


def single_switch_params(T: int, L: int, delta: float, S: float) -> InstanceParams:
    _check_common(T, L, delta, S)
    if L < 2 or L % 2:
        raise ParameterError("L must be even and >= 2 for single_switch", f"got L={L}")
    if (2 * T) % L:
        raise ParameterError("2T/L must be an integer", f"got T={T}, L={L}")
    if delta**2 * T < 13 * L:
        raise ParameterError("delta^2 T >= 13 L", f"got delta^2 T={delta**2 * T:g}, 13L={13 * L}")
    m = 2 * T // L
    n = lemma1_choose_n(delta**2 / 6 * (m - 1))

    def window(n):
        return math.ceil(6 * math.log(n) / delta**2) + 1

    while n >= 2 and n * window(n) > m - 1:
        n -= 1
    if n < 2:
        raise ParameterError("n l <= m - 1 with n >= 2", f"infeasible for m={m}, delta={delta}")
    l = window(n)
    return InstanceParams(SINGLE_SWITCH, T, L, delta, S, m, n, l, r=math.ceil(l / 2))


def family_params(family: str, T: int, L: int, delta: float, S: float) -> InstanceParams:
    fam = FAMILY_ALIASES.get(family)
    if fam == SWAP_WINDOW:
        return swap_window_params(T, L, delta, S)
    if fam == SINGLE_SWITCH:
        return single_switch_params(T, L, delta, S)
    raise ParameterError("unknown instance family", repr(family))


def feasible_horizon(family: str, T: int, L: int) -> int:
    """Largest ``T' <= T`` satisfying the family's divisibility constraint."""
    fam = FAMILY_ALIASES.get(family, family)
    div = L - 1 if fam == SWAP_WINDOW else L
    if div < 1:
        raise ParameterError("L too small for family", f"L={L}")
    step = div // math.gcd(2, div)
    return (T // step) * step


def _check_nu(params: InstanceParams, nu: Sequence[int]) -> np.ndarray:
    nu = np.asarray(nu, dtype=np.int64)
    if nu.shape != (params.num_blocks,):
        raise ParameterError("nu must have one entry per block", f"expected {params.num_blocks}, got {nu.shape}")
    if not set(nu.tolist()) <= set(params.candidates):
        raise ParameterError("every nu entry must be a candidate", f"got {nu.tolist()}")
    return nu


def swap_window_instance(params: InstanceParams, nu: Sequence[int]) -> MeanSchedule:
    nu = _check_nu(params, nu)
    S, d, m, l = params.S, params.delta, params.m, params.l
    cps = [1]
    for b, v in enumerate(nu):
        start = b * m + int(v)
        cps += [start, start + l]
    cps.append(params.T + 1)
    off, on = (S + d, S - d), (S - d, S + d)
    means = [off if j % 2 == 0 else on for j in range(len(cps) - 1)]
    return MeanSchedule(2, params.T, tuple(cps), np.asarray(means))


def single_switch_instance(params: InstanceParams, nu: Sequence[int]) -> MeanSchedule:
    nu = _check_nu(params, nu)
    S, d, m = params.S, params.delta, params.m
    cps = []
    for b, v in enumerate(nu):
        cps += [b * m + 1, b * m + int(v)]
    cps.append(params.T + 1)
    before, after = (S - d, S + d), (S + d, S - d)
    means = [before if j % 2 == 0 else after for j in range(len(cps) - 1)]
    return MeanSchedule(2, params.T, tuple(cps), np.asarray(means))


def build_instance(params: InstanceParams, nu: Sequence[int]) -> MeanSchedule:
    if params.family == SWAP_WINDOW:
        return swap_window_instance(params, nu)
    return single_switch_instance(params, nu)


def build_environment(params: InstanceParams, nu: Sequence[int], noise: str = "unit-gaussian") -> Environment:
    """Hard instance wrapped as an environment carrying its block layout."""
    return Environment(build_instance(params, nu), params.S, NoiseSpec(noise), params.layout)


def sample_nu(params: InstanceParams, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform candidate per block."""
    idx = rng.integers(0, params.n, size=params.num_blocks)
    return np.asarray(params.candidates, dtype=np.int64)[idx]
