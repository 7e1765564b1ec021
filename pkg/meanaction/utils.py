from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .errors import NonPositiveInput

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count(requested: Optional[int] = None) -> int:
    """Worker cap: explicit request, then MEANACTION_THREADS, then the CPU count."""
    if requested is not None and requested > 0:
        return requested
    env = os.getenv("MEANACTION_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            LOGGER.warning("Ignoring non-integer MEANACTION_THREADS=%r", env)
        else:
            if value > 0:
                return value
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """Order-preserving map over a thread pool; runs inline for a single worker or item."""
    workers = min(worker_count(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunked(n: int, size: int) -> List[slice]:
    size = max(int(size), 1)
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]


def dist_to_int(value):
    """Distance to the nearest integer; works on floats, numpy arrays and mpmath numbers."""
    if isinstance(value, np.ndarray):
        return np.abs(value - np.rint(value))
    return abs(value - round(value))


def wrap_angle(y):
    return np.mod(y, 2.0 * np.pi)


def circular_distance(a, b):
    diff = np.mod(np.asarray(a) - np.asarray(b), 2.0 * np.pi)
    return np.minimum(diff, 2.0 * np.pi - diff)


def _continued_fraction(value: Fraction) -> Iterator[int]:
    num, den = value.numerator, value.denominator
    while den:
        q, r = divmod(num, den)
        yield q
        num, den = den, r


def convergents(value: float) -> Iterator[Tuple[int, int]]:
    """Continued-fraction convergents p/q of the exact binary value of ``value``."""
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    for term in _continued_fraction(Fraction(value)):
        p_prev, p = p, term * p + p_prev
        q_prev, q = q, term * q + q_prev
        yield p, q


@dataclass(frozen=True)
class RationalityVerdict:
    value: float
    rational_suspected: bool
    numerator: int
    denominator: int
    distance: float
    confidence: str

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "rational_suspected": self.rational_suspected,
            "approximant": f"{self.numerator}/{self.denominator}",
            "distance": self.distance,
            "confidence": self.confidence,
        }


def rationality_test(value: float, max_denominator: int = 1_000_000, tol: float = 1e-9) -> RationalityVerdict:
    """Flag ``value`` as rational when a convergent p/q with q <= max_denominator lies within tol/q.

    Any fraction closer than tol/q < 1/(2q^2) is a convergent, so scanning convergents is exhaustive.
    """
    best = (round(value), 1, abs(value - round(value)))
    for p, q in convergents(value):
        if q > max_denominator:
            break
        distance = abs(value - p / q)
        best = (p, q, distance)
        if distance <= tol / q:
            return RationalityVerdict(value, True, p, q, distance, "numerical")
    p, q, distance = best
    return RationalityVerdict(value, False, p, q, distance, "numerical")


def require_positive(name: str, value: float) -> float:
    if not math.isfinite(value) or value <= 0:
        raise NonPositiveInput(f"{name} must be positive, got {value!r}")
    return value

