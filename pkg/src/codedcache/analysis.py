"""Closed-form evaluators used as simulation oracles and theory curves.

All logarithms are natural.  Infinite products over ``(1 - 2**-i)`` stop at
``i = 64``; the neglected tail is below double precision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import mpmath

from .errors import ContractViolation

PRODUCT_CUTOFF = 64
ERDOS_BORWEIN = 1.6066951524152917

FormulaId = Literal[
    "eq2", "lemma3", "eq8", "eq14", "eq15", "eq16", "eq17", "bitzero",
    "capacity_coded", "capacity_uncoded", "coded_hops", "uncoded_hops_lo", "uncoded_hops_hi",
]


@dataclass(frozen=True)
class TheoryPoint:
    formula_id: FormulaId
    value: float
    inputs: dict[str, float] = field(default_factory=dict)


def _tail_product(start: int) -> float:
    """``prod_{i=start}^{64} (1 - 2**-i)``; empty products are 1."""
    out = 1.0
    for i in range(max(start, 1), PRODUCT_CUTOFF + 1):
        out *= 1.0 - math.ldexp(1.0, -i)
    return out


def spanning_excess(m: int) -> float:
    """``sum_{i=1}^{m} 1/(2**i - 1)``, the expected surplus of draws beyond ``m``."""
    return math.fsum(1.0 / (2.0**i - 1.0) for i in range(1, min(m, PRODUCT_CUTOFF) + 1))


def expected_vectors_uniform(m: int) -> float:
    """Mean number of uniform vectors in ``F_2^m`` needed to span the space."""
    if m < 1:
        raise ContractViolation("m must be at least 1")
    return m + spanning_excess(m)


def expected_nodes_coded(m: int, M: int, ceil: bool = True) -> float:
    """Nodes needed to decode everything with ``M`` uniform slots each."""
    if m < 1 or M < 1:
        raise ContractViolation("m and M must be positive")
    value = expected_vectors_uniform(m) / M
    return float(math.ceil(value)) if ceil else value


def harmonic(m: int) -> float:
    return math.fsum(1.0 / i for i in range(1, m + 1))


def coupon_expectation(m: int) -> float:
    if m < 1:
        raise ContractViolation("m must be at least 1")
    return m * harmonic(m)


def group_draw_normalizer(m: int, M: int) -> float:
    """Expected single draws needed to see ``M`` distinct coupons out of ``m``."""
    if not 1 <= M <= m:
        raise ContractViolation(f"need 1 <= M <= m, got M={M}, m={m}")
    return math.fsum(m / (m - j) for j in range(M))


def uncoded_expected_nodes_bounds(m: int, M: int) -> tuple[float, float]:
    base = coupon_expectation(m) / group_draw_normalizer(m, M)
    return base, base + 1.0


def uncoded_hit_probability(m: int, M: int, u: int) -> float:
    """Probability that ``u`` uniform ``M``-subsets of ``m`` coupons cover them all.

    The alternating sum cancels catastrophically, so terms are formed from
    log-binomials at a working precision wide enough for the largest term.
    """
    if not 1 <= M <= m or u < 0:
        raise ContractViolation(f"invalid (m={m}, M={M}, u={u})")
    if u * M < m:
        return 0.0
    if M == m:
        return 1.0
    with mpmath.workdps(int(m * math.log10(2)) + 30):
        def log_binom(a: int, b: int):
            return mpmath.loggamma(a + 1) - mpmath.loggamma(b + 1) - mpmath.loggamma(a - b + 1)

        base = log_binom(m, M)
        terms = []
        for j in range(m - M + 1):
            mag = mpmath.exp(log_binom(m, j) + u * (log_binom(m - j, M) - base))
            terms.append(-mag if j % 2 else mag)
        total = float(mpmath.fsum(terms))
    return min(1.0, max(0.0, total))


def coded_rank_deficiency_probability(l: int, m: int, s: int) -> float:
    """Large-``m`` limit of ``P[rank = m - s]`` for a uniform ``l x m`` binary matrix."""
    if not l >= m >= 1 or s < 0:
        raise ContractViolation(f"need l >= m >= 1 and s >= 0, got l={l}, m={m}, s={s}")
    r = l - m
    value = math.ldexp(1.0, -s * (s + r)) * _tail_product(s + 1)
    for j in range(1, r + s + 1):
        value /= 1.0 - math.ldexp(1.0, -j)
    return value


def coded_hit_probability(l: int, m: int) -> float:
    """Large-``m`` probability that ``l`` uniform vectors span ``F_2^m``."""
    if l < 1 or m < 1:
        raise ContractViolation("l and m must be positive")
    if l < m:
        return 0.0
    return _tail_product(l - m + 1)


def coded_full_rank_exact(l: int, m: int) -> float:
    """Finite-``m`` full-rank probability ``prod_{i=0}^{m-1} (1 - 2**(i-l))``."""
    if l < m:
        return 0.0
    out = 1.0
    for i in range(m):
        out *= 1.0 - math.ldexp(1.0, i - l)
    return out


def coded_bit_zero_probability(p: Sequence[float]) -> float:
    """``P[encoded bit = 0]`` when source bits are one with probabilities ``p``."""
    prod = 1.0
    for pl in p:
        if not 0.0 <= pl <= 1.0:
            raise ContractViolation(f"probability {pl} outside [0, 1]")
        prod *= 1.0 - pl
    return 0.5 * (1.0 + prod)


def throughput_estimate(W: float, Q: float, n: int, expected_N: float, c1: float, c2: float) -> float:
    """Per-node throughput from the mean hop count under spatial reuse."""
    for name, value in (("W", W), ("Q", Q), ("n", n), ("expected_N", expected_N), ("c1", c1), ("c2", c2)):
        if value <= 0:
            raise ContractViolation(f"{name} must be positive")
    s2 = math.log(n) / n
    return W / (n * expected_N * Q * (c2 * c1) ** 2 * s2)


def capacity_scaling(scheme: str, n: int, m: int, M: int) -> float:
    """Capacity law with unit constant; only meaningful as a trend."""
    if not (m >= M >= 1 and n >= 2):
        raise ContractViolation(f"need m >= M >= 1 and n >= 2 (n={n}, m={m}, M={M})")
    coded = M / (m * math.log(n))
    if scheme == "coded":
        return coded
    if scheme == "uncoded":
        return coded / math.log(m) if m > 1 else math.inf
    raise ContractViolation(f"unknown scheme {scheme!r}")


def fmt(value: float) -> str:
    return f"{value:.9g}"


def write_theory_csv(path: str | Path, points: Iterable[TheoryPoint]) -> None:
    points = list(points)
    params: list[str] = []
    for pt in points:
        for key in pt.inputs:
            if key not in params:
                params.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["formula_id", *params, "value"])
        for pt in points:
            cells = [fmt(pt.inputs[k]) if k in pt.inputs else "" for k in params]
            writer.writerow([pt.formula_id, *cells, fmt(pt.value)])
