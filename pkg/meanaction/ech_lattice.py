"""Generators, ECH index, sweep ordering and the N_k / w(k) sequences for L(p, p-1).

Generators are the orbit sets e+^m+ e-^m- with m+ - m- = p d. The index counts lattice points in a
triangle of the northwest quadrant, and ordering generators by the sweep key m+ - a d lists them by
index 0, 2, 4, ...
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from mpmath import mp

from .errors import (
    BoundViolated,
    DomainError,
    FloorGuardTripped,
    NonIntegerP,
    OrderingMismatch,
    RankNotFound,
)
from .utils import require_positive

LOGGER = logging.getLogger(__name__)

SLOPE_SUM_TOL = 1e-12
_KEY_MARGIN = 1e-6


@dataclass(frozen=True)
class SlopeData:
    """Boundary slopes a = y+ and b = -y- + F with a + b = p."""

    a: float
    b: float
    p: int
    guard_eps: float = 1e-9
    precision: str = "double"
    digits: int = 50

    def __post_init__(self) -> None:
        require_positive("a", self.a)
        require_positive("b", self.b)
        if isinstance(self.p, float):
            if not self.p.is_integer():
                raise NonIntegerP(f"p = {self.p} is not an integer")
            object.__setattr__(self, "p", int(self.p))
        if self.p < 1:
            raise NonIntegerP(f"p must be a positive integer, got {self.p}")
        if abs(self.a + self.b - self.p) > SLOPE_SUM_TOL:
            raise DomainError(f"a + b = {self.a + self.b!r} differs from p = {self.p}")
        if self.precision not in ("double", "mpmath"):
            raise DomainError(f"unknown precision mode {self.precision!r}")

    @classmethod
    def from_boundary(cls, y_plus: float, inner: float, **kwargs: Any) -> "SlopeData":
        """Slopes from y+ and -y- + F; their sum must be an integer."""
        total = y_plus + inner
        p = round(total)
        if p < 1 or abs(total - p) > SLOPE_SUM_TOL:
            raise NonIntegerP(f"y+ - y- + F = {total!r} is not a positive integer")
        return cls(y_plus, inner, p, **kwargs)

    @property
    def high_precision(self) -> bool:
        return self.precision == "mpmath"

    def working_slopes(self) -> Tuple[Any, Any]:
        """(a, b) in working precision; in mpmath mode b is recomputed as p - a so a + b = p exactly.

        Call inside ``mp.workdps(self.digits)`` when ``high_precision`` is set.
        """
        if not self.high_precision:
            return self.a, self.b
        a = mp.mpf(repr(self.a))
        return a, self.p - a

    def as_dict(self) -> Dict[str, Any]:
        return {"a": self.a, "b": self.b, "p": self.p, "guard_eps": self.guard_eps, "precision": self.precision}


@dataclass(frozen=True)
class Generator:
    m_plus: int
    m_minus: int
    d: int

    def __post_init__(self) -> None:
        if self.m_plus < 0 or self.m_minus < 0:
            raise DomainError(f"generator exponents must be nonnegative, got ({self.m_plus}, {self.m_minus})")

    @classmethod
    def from_exponents(cls, m_plus: int, m_minus: int, p: int) -> "Generator":
        diff = m_plus - m_minus
        if diff % p:
            raise DomainError(f"m+ - m- = {diff} is not divisible by p = {p}")
        return cls(m_plus, m_minus, diff // p)

    @classmethod
    def from_lattice(cls, d: int, m_plus: int, p: int) -> "Generator":
        return cls(m_plus, m_plus - p * d, d)

    @property
    def label(self) -> str:
        parts = []
        for name, power in (("e+", self.m_plus), ("e-", self.m_minus)):
            if power == 1:
                parts.append(name)
            elif power > 1:
                parts.append(f"{name}^{power}")
        return " ".join(parts) or "empty"

    def as_dict(self) -> Dict[str, Any]:
        return {"m_plus": self.m_plus, "m_minus": self.m_minus, "d": self.d, "label": self.label}


def _check_generator(s: SlopeData, g: Generator) -> None:
    if g.m_plus - g.m_minus != s.p * g.d:
        raise DomainError(f"generator {g.label} has d = {g.d} inconsistent with p = {s.p}")


def _is_mp(value: Any) -> bool:
    return isinstance(value, mp.mpf)


def _guarded_floor(value: Any, eps: float, what: str) -> int:
    nearest = mp.nint(value) if _is_mp(value) else round(value)
    if abs(value - nearest) <= eps:
        raise FloorGuardTripped(f"{what} = {value} lies within {eps:g} of an integer")
    return int(mp.floor(value)) if _is_mp(value) else math.floor(value)


def cz_elliptic(theta: float, k: int, guard_eps: float = 1e-9) -> int:
    """Conley-Zehnder index 2 floor(k theta) + 1 of the k-th iterate of an elliptic orbit."""
    if k < 1:
        raise DomainError(f"iterate must be positive, got {k}")
    return 2 * _guarded_floor(k * theta, guard_eps, f"{k} * theta") + 1


def _cz_partial_sums(s: SlopeData, slope: Any, n: int) -> np.ndarray:
    """S[m] = sum_{i=1..m} cz_elliptic(1/slope, i) for m = 0..n."""
    if n <= 0:
        return np.zeros(1, dtype=np.int64)
    if _is_mp(slope):
        terms = [2 * _guarded_floor(mp.mpf(i) / slope, s.guard_eps, f"{i}/{slope}") + 1 for i in range(1, n + 1)]
        terms = np.asarray(terms, dtype=np.int64)
    else:
        ratios = np.arange(1, n + 1) / slope
        close = np.flatnonzero(np.abs(ratios - np.rint(ratios)) <= s.guard_eps)
        if close.size:
            i = int(close[0]) + 1
            raise FloorGuardTripped(f"{i}/{slope!r} lies within {s.guard_eps:g} of an integer")
        terms = 2 * np.floor(ratios).astype(np.int64) + 1
    return np.concatenate(([0], np.cumsum(terms)))


@dataclass(frozen=True)
class _IndexTables:
    p: int
    plus: np.ndarray
    minus: np.ndarray

    def index(self, g: Generator) -> int:
        return int(-self.p * g.d * g.d + self.plus[g.m_plus] + self.minus[g.m_minus])


def _index_tables(s: SlopeData, max_plus: int, max_minus: int) -> _IndexTables:
    with mp.workdps(s.digits):
        a, b = s.working_slopes()
        return _IndexTables(s.p, _cz_partial_sums(s, a, max_plus), _cz_partial_sums(s, b, max_minus))


def relative_invariant_constants(s: SlopeData, d: int) -> Dict[str, int]:
    """Relative first Chern class and self-intersection of the pieces A0 and dS+- in the A0 framing."""
    return {"c_A0": 0, "Q_A0": 0, "c_dS": 0, "Q_dS": -s.p * d * d}


def ech_index(s: SlopeData, g: Generator) -> int:
    _check_generator(s, g)
    index = _index_tables(s, g.m_plus, g.m_minus).index(g)
    LOGGER.debug("I(%s) = %d", g.label, index)
    return index


def _sweep_key(a: Any, d: int, m_plus: int) -> Any:
    return m_plus - a * d


def lattice_count(s: SlopeData, g: Generator) -> int:
    """Lattice points (d', m') with m' >= 0, m' >= p d' on or below the slope-a line through (d, m+)."""
    _check_generator(s, g)
    with mp.workdps(s.digits):
        a, b = s.working_slopes()
        key = _sweep_key(a, g.d, g.m_plus)
        lo = math.floor(float(-key / a)) - 1
        hi = math.ceil(float(key / b)) + 1
        if not s.high_precision:
            cols = np.arange(lo, hi + 1)
            tops = g.m_plus + a * (cols - g.d)
            lower = np.maximum(0, s.p * cols)
            watched = (tops >= lower - 1) & (cols != g.d)
            close = watched & (np.abs(tops - np.rint(tops)) <= s.guard_eps)
            if close.any():
                col = int(cols[np.flatnonzero(close)[0]])
                raise FloorGuardTripped(f"column d' = {col} has a lattice point on the sweep line of {g.label}")
            floors = np.floor(tops).astype(np.int64)
            floors[cols == g.d] = g.m_plus
            return int(np.clip(floors - lower + 1, 0, None).sum())
        count = 0
        for col in range(lo, hi + 1):
            lower = max(0, s.p * col)
            if col == g.d:
                top = g.m_plus
            else:
                value = g.m_plus + a * (col - g.d)
                if value < lower - 1:
                    continue
                top = _guarded_floor(value, s.guard_eps, f"sweep line at d' = {col}")
            count += max(0, top - lower + 1)
        return count


def ech_index_oracle(s: SlopeData, g: Generator) -> int:
    return 2 * lattice_count(s, g) - 2


def _points_below(s: SlopeData, a: Any, b: Any, bound: float) -> List[Tuple[Any, int, int]]:
    af, bf = float(a), float(b)
    points = []
    for col in range(math.floor(-bound / af) - 1, math.ceil(bound / bf) + 2):
        lower = max(0, s.p * col)
        top = math.floor(bound + af * col)
        for m_plus in range(lower, top + 1):
            points.append((_sweep_key(a, col, m_plus), col, m_plus))
    return points


def generators_by_index(s: SlopeData, max_index: int) -> List[Generator]:
    """Generators with ECH index <= max_index, in sweep order; item n has index 2n."""
    if max_index < 0 or max_index % 2:
        raise DomainError(f"max_index must be even and nonnegative, got {max_index}")
    wanted = max_index // 2 + 1
    with mp.workdps(s.digits):
        a, b = s.working_slopes()
        bound = 1.0
        while True:
            points = sorted(_points_below(s, a, b, bound))
            # only keys safely inside the enumerated region are complete
            points = [pt for pt in points if pt[0] < bound - _KEY_MARGIN]
            if len(points) > wanted:
                break
            bound *= 2.0
        for (k0, d0, m0), (k1, d1, m1) in zip(points[:wanted], points[1 : wanted + 1]):
            if k1 - k0 <= s.guard_eps:
                raise FloorGuardTripped(f"sweep keys of (d={d0}, m+={m0}) and (d={d1}, m+={m1}) coincide")
    gens = [Generator.from_lattice(d, m_plus, s.p) for _, d, m_plus in points[:wanted]]
    tables = _index_tables(s, max(g.m_plus for g in gens), max(g.m_minus for g in gens))
    for rank, g in enumerate(gens):
        index = tables.index(g)
        if index != 2 * rank:
            raise OrderingMismatch(f"{g.label} is number {rank} in sweep order but has index {index}")
    LOGGER.debug("Enumerated %d generators up to index %d (sweep bound %.3g)", len(gens), max_index, bound)
    return gens


def width(s: SlopeData, g: Generator) -> float:
    return g.m_plus / s.a + g.m_minus / s.b


def knot_filtrations(s: SlopeData, g: Generator) -> Dict[str, float]:
    f_plus = g.m_plus * (1.0 / s.a - 1.0 / s.p) + g.m_minus / s.p
    f_minus = g.m_plus / s.p + g.m_minus * (1.0 / s.b - 1.0 / s.p)
    return {"f_plus": f_plus, "f_minus": f_minus, "sum": f_plus + f_minus}


def n_sequence(alpha: float, beta: float, count: int) -> List[float]:
    """First ``count`` values of the sorted multiset {i alpha + j beta : i, j >= 0}, with repeats."""
    require_positive("alpha", alpha)
    require_positive("beta", beta)
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    heap = [(0.0, 0, 0)]
    values = []
    while len(values) < count:
        value, i, j = heapq.heappop(heap)
        values.append(value)
        heapq.heappush(heap, (i * alpha + (j + 1) * beta, i, j + 1))
        if j == 0:
            heapq.heappush(heap, ((i + 1) * alpha, i + 1, 0))
    return values


def _sequence_size(alpha: float, beta: float, limit: float) -> int:
    rows = np.arange(0, math.floor(limit / alpha) + 1)
    return int(np.sum(np.floor((limit - rows * alpha) / beta) + 1))


@dataclass(frozen=True)
class WidthRanks:
    generators: Tuple[Generator, ...]
    widths: np.ndarray
    ranks: np.ndarray
    sequence: np.ndarray

    def N(self, k: int) -> float:
        return float(self.sequence[self.ranks[k]])


def width_ranks(s: SlopeData, k_max: int) -> WidthRanks:
    """w(k) for k <= k_max: the rank of each generator's width in the N-sequence of (1/a, 1/b)."""
    if k_max < 0:
        raise DomainError(f"k_max must be nonnegative, got {k_max}")
    gens = generators_by_index(s, 2 * k_max)
    widths = np.array([width(s, g) for g in gens])
    tol = s.guard_eps
    alpha, beta = 1.0 / s.a, 1.0 / s.b
    size = _sequence_size(alpha, beta, float(widths[-1]) + tol) + 1
    sequence = np.asarray(n_sequence(alpha, beta, size))
    ranks = np.searchsorted(sequence, widths - tol, side="left")
    for k, (rank, w) in enumerate(zip(ranks, widths)):
        if rank >= sequence.size or abs(sequence[rank] - w) > tol:
            raise RankNotFound(f"width {w!r} of generator {k} has no match within {tol:g} in the N-sequence")
    if np.any(np.diff(ranks) <= 0):
        raise OrderingMismatch("w(k) is not strictly increasing")
    if np.any(ranks < np.arange(ranks.size)):
        raise OrderingMismatch("w(k) < k for some k")
    return WidthRanks(tuple(gens), widths, ranks.astype(np.int64), sequence)


def w_of_k(s: SlopeData, k: int) -> int:
    return int(width_ranks(s, k).ranks[k])


@dataclass(frozen=True)
class NkBoundRow:
    k: int
    N: float
    X: float
    quadratic_ok: bool
    root_ok: bool
    final_ok: bool

    def as_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "N": self.N,
            "X": self.X,
            "quadratic_ok": self.quadratic_ok,
            "root_ok": self.root_ok,
            "final_ok": self.final_ok,
        }


@dataclass(frozen=True)
class NkBoundReport:
    c0: float
    c1: float
    c2: float
    empirical_c0: float
    k_max: int
    rows: Tuple[NkBoundRow, ...]

    @property
    def all_pass(self) -> bool:
        return all(r.quadratic_ok and r.root_ok and r.final_ok for r in self.rows)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "c0": self.c0,
            "c1": self.c1,
            "c2": self.c2,
            "empirical_c0": self.empirical_c0,
            "k_max": self.k_max,
            "all_pass": self.all_pass,
        }


def nk_lower_bound_check(s: SlopeData, k_max: int, tol: float = 1e-9) -> NkBoundReport:
    """Check N^2 + c0 N >= X and N^2 >= X - c1 sqrt(k) + c2 for X = 2k(a+b)/(ab), N = N_w(k).

    Completing the square in the first inequality gives N >= sqrt(X + c0^2/4) - c0/2, and
    sqrt(X + c0^2/4) <= sqrt(X) + c0/2 turns that into the second with c1 = c0 sqrt(2(a+b)/(ab)), c2 = 0.
    """
    a, b = s.a, s.b
    scale = (a + b) / (a * b)
    c0 = scale * (max(a, b) + 1.0)
    c1 = c0 * math.sqrt(2.0 * scale)
    c2 = 0.0
    table = width_ranks(s, k_max)
    rows = []
    empirical = 0.0
    for k in range(k_max + 1):
        N = table.N(k)
        X = 2.0 * k * scale
        quadratic = N * N + c0 * N >= X - tol
        root = N >= math.sqrt(X + 0.25 * c0 * c0) - 0.5 * c0 - tol
        final = N * N >= X - c1 * math.sqrt(k) + c2 - tol
        if N > 0.0:
            empirical = max(empirical, (X - N * N) / N)
        rows.append(NkBoundRow(k, N, X, bool(quadratic), bool(root), bool(final)))
        if not (quadratic and root and final):
            raise BoundViolated(f"N_w(k) lower bound fails at k = {k}: N = {N!r}, X = {X!r}")
    LOGGER.info("N_k lower bound holds for k <= %d (c0 = %.6g, smallest working c0 = %.6g)", k_max, c0, empirical)
    return NkBoundReport(c0, c1, c2, empirical, k_max, tuple(rows))


def generator_table(s: SlopeData, gens: Sequence[Generator]) -> List[Dict[str, Any]]:
    """Per-generator rows: exponents, index, width and knot filtrations."""
    if not gens:
        return []
    tables = _index_tables(s, max(g.m_plus for g in gens), max(g.m_minus for g in gens))
    rows = []
    for g in gens:
        row = g.as_dict()
        row["index"] = tables.index(g)
        row["width"] = width(s, g)
        row.update(knot_filtrations(s, g))
        rows.append(row)
    return rows
