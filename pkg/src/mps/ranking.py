"""Multinomial ranking and selection.

Decision rule R: sample a multinomial until one cell reaches count r, then
select every cell with count at least r - D.  The slack D is calibrated by
Monte Carlo under the uniform multinomial (the least favorable
configuration) so that the most probable cell is retained with probability
at least p_star; ``exact_pcs`` is an independent dynamic-programming oracle
for validating that search.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .resampling import derive_rng

__all__ = [
    "RuleRConfig",
    "DCacheKey",
    "sample_until_max",
    "select_cells",
    "find_min_D",
    "exact_pcs",
    "d_cache_as_json",
]

EXACT_STATE_CAP = 2_000_000


@dataclass(frozen=True)
class RuleRConfig:
    """Rule-R parameters: cell count M, stopping count r, selection slack D."""

    r: int
    D: int
    M: int

    def __post_init__(self):
        if self.r < 1 or self.M < 1:
            raise ValueError("r and M must be >= 1")
        if not 0 <= self.D <= self.r:
            raise ValueError("D must lie in [0, r]")


@dataclass(frozen=True)
class DCacheKey:
    M: int
    r: int
    p_star: float
    nsim: int


def sample_until_max(M: int, r: int, cell_sampler) -> np.ndarray:
    """Draw cells from ``cell_sampler`` until one cell's count reaches r.

    The sampler is any callable returning an index in [0, M).  The total
    number of draws is bounded by M(r-1)+1.
    """
    if r < 1 or M < 1:
        raise ValueError("M and r must be >= 1")
    counts = np.zeros(M, dtype=np.int64)
    while True:
        cell = int(cell_sampler())
        if not 0 <= cell < M:
            raise ValueError(f"sampler returned out-of-range cell {cell}")
        counts[cell] += 1
        if counts[cell] == r:
            return counts


def select_cells(counts, r: int, D: int, strict: bool = False) -> set[int]:
    """Cells selected by rule R: counts at least r - D (above r - D if strict).

    The argmax cell is always included; under the strict variant with D = 0
    the rule would otherwise select nothing.
    """
    counts = np.asarray(counts)
    if counts.max() != r:
        raise ValueError("rule R requires max(counts) == r")
    thr = r - D + (1 if strict else 0)
    out = {int(k) for k in np.flatnonzero(counts >= thr)}
    out.update(int(k) for k in np.flatnonzero(counts == r))
    return out


_x1_lock = threading.Lock()
_x1_cache: dict[tuple[int, int, int, int], np.ndarray] = {}
_d_cache: dict[tuple[DCacheKey, int], int] = {}


def _counts_ge(M: int, r: int, nsim: int, seed: int) -> np.ndarray:
    """counts_ge[t] = number of experiments whose cell-0 final count is >= t."""
    key = (M, r, nsim, seed)
    with _x1_lock:
        hit = _x1_cache.get(key)
    if hit is not None:
        return hit
    rng = derive_rng(seed, "rule-r-experiments", M, r, nsim)
    x1 = _kernels.rule_r_first_cell_counts(rng, M, r, nsim)
    binc = np.bincount(x1, minlength=r + 1)
    ge = np.cumsum(binc[::-1])[::-1]
    with _x1_lock:
        _x1_cache[key] = ge
    return ge


def find_min_D(M: int, r: int, p_star: float, nsim: int = 10_000,
               seed: int = 0) -> int:
    """Smallest slack D whose rule-R selection retains cell 1 with rate >= p_star.

    Runs nsim rule-R experiments under the uniform M-cell multinomial
    (tracking cell 1, which is exchangeable with any fixed cell) and returns
    the smallest D such that at least ceil(nsim * p_star) experiments ended
    with that cell's count >= r - D.  Deterministic given the seed; results
    are cached for the process lifetime.
    """
    if M < 1 or nsim < 1:
        raise ValueError("M and nsim must be >= 1")
    if not 0.0 < p_star <= 1.0:
        raise ValueError("p_star must lie in (0, 1]")
    if r < 1:
        raise ValueError("r must be >= 1")
    key = (DCacheKey(M, r, float(p_star), nsim), seed)
    with _x1_lock:
        hit = _d_cache.get(key)
    if hit is not None:
        return hit
    ge = _counts_ge(M, r, nsim, seed)
    need = math.ceil(round(nsim * p_star, 9))
    t_star = int(np.flatnonzero(ge >= need).max())  # t=0 always qualifies
    D = r - t_star
    with _x1_lock:
        _d_cache[key] = D
    return D


def exact_pcs(M: int, r: int, D: int) -> float:
    """Exact rule-R probability that cell 1 finishes with count >= r - D.

    Dynamic programming over count vectors under the uniform M-cell
    multinomial, with absorption as soon as any cell reaches r.  Exponential
    in M; intended as a validation oracle for small (M, r).
    """
    if M < 1 or r < 1:
        raise ValueError("M and r must be >= 1")
    if not 0 <= D <= r:
        raise ValueError("D must lie in [0, r]")
    if (r + 1) ** M > EXACT_STATE_CAP:
        raise ValueError(f"state space (r+1)^M = {(r + 1) ** M} exceeds cap "
                         f"{EXACT_STATE_CAP}")
    thr = r - D

    @lru_cache(maxsize=None)
    def prob(state: tuple[int, ...]) -> float:
        total = 0.0
        for i in range(M):
            grown = state[:i] + (state[i] + 1,) + state[i + 1:]
            if grown[i] == r:
                total += 1.0 if grown[0] >= thr else 0.0
            else:
                total += prob(grown)
        return total / M

    result = prob((0,) * M)
    prob.cache_clear()
    return result


def d_cache_as_json() -> str:
    """Snapshot of the memoized D values (debugging aid)."""
    with _x1_lock:
        items = [{"M": k[0].M, "r": k[0].r, "p_star": k[0].p_star,
                  "nsim": k[0].nsim, "seed": k[1], "D": v}
                 for k, v in sorted(_d_cache.items(),
                                    key=lambda kv: (kv[0][0].M, kv[0][0].r,
                                                    kv[0][0].p_star, kv[0][0].nsim,
                                                    kv[0][1]))]
    return json.dumps(items, indent=2)
