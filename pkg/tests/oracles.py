"""Independent reference computations the tests compare the engine against."""

from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import lcm


def trapezoid_cost(p0: float, k: float, s: int, ds: int, steps_per_unit: int = 64) -> float:
    """Numerically integrate the price line from s to s+ds."""
    n = max(1, ds * steps_per_unit)
    h = ds / n
    total = 0.0
    for i in range(n):
        x0 = s + i * h
        total += h * ((p0 + k * x0) + (p0 + k * (x0 + h))) / 2
    return total


def trapezoid_issuable(p0: float, k: float, s: int, budget: float) -> int:
    ds = 0
    while trapezoid_cost(p0, k, s, ds + 1) <= budget + 1e-9:
        ds += 1
    return ds


def brute_largest_remainder(total: int, weights: list[tuple[str, Fraction]]) -> dict[str, int]:
    """Enumerate integer splits of ``total`` and keep the fairest one.

    Fairest = the sorted (largest first) vector of |payout - quota| is
    lexicographically smallest; among equals the lowest address takes the
    contested unit. Only floor/ceil splits are enumerated: any other split has
    some deviation >= 1, while every floor/ceil split keeps all deviations < 1.
    """
    weights = tuple(sorted(weights))
    return dict(_brute(total, weights))


@lru_cache(maxsize=None)
def _brute(total: int, weights: tuple) -> tuple:
    # integer weights over a common denominator keep the comparison exact and fast
    scale = lcm(*(Fraction(w).denominator for _, w in weights))
    ints = [int(w * scale) for _, w in weights]
    wsum = sum(ints)
    # quota_i = total * ints[i] / wsum; deviations are compared as numerators over wsum
    nums = [total * w for w in ints]
    best, best_key = None, None
    for alloc in product(*[(n // wsum, n // wsum + 1) for n in nums]):
        if sum(alloc) != total:
            continue
        dev = sorted((abs(x * wsum - n) for x, n in zip(alloc, nums)), reverse=True)
        key = (dev, [-x for x in alloc])
        if best_key is None or key < best_key:
            best, best_key = alloc, key
    return tuple((a, x) for (a, _), x in zip(weights, best))


def conviction_trace(alpha: float, stake: float, ticks: int) -> list[float]:
    c, out = 0.0, []
    for _ in range(ticks):
        c = alpha * c + stake
        out.append(c)
    return out
