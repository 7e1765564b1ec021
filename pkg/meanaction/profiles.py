"""Radial profiles b(x) on [-1, 1] used by shear and twist maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial as _NpPolynomial

from .errors import MapSpecError

ArrayLike = Union[float, np.ndarray]

# Quintic smoothstep S(u) = 6u^5 - 15u^4 + 10u^3 and its integrals, extended past [0, 1].
_S_INTEGRAL_AT_ONE = 0.5
_S_MOMENT_AT_ONE = 5.0 / 14.0


def smoothstep(u: ArrayLike) -> ArrayLike:
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def smoothstep_derivative(u: ArrayLike) -> ArrayLike:
    u = np.clip(u, 0.0, 1.0)
    return 30.0 * u * u * (1.0 - u) * (1.0 - u)


def smoothstep_integral(u: ArrayLike) -> ArrayLike:
    """Antiderivative of S(clip(u)) vanishing for u <= 0."""
    u = np.asarray(u, dtype=float)
    inner = np.clip(u, 0.0, 1.0)
    body = inner**4 * (inner * (inner - 3.0) + 2.5)
    return np.where(u > 1.0, _S_INTEGRAL_AT_ONE + (u - 1.0), body)


def smoothstep_moment(u: ArrayLike) -> ArrayLike:
    """Antiderivative of u * S(clip(u)) vanishing for u <= 0."""
    u = np.asarray(u, dtype=float)
    inner = np.clip(u, 0.0, 1.0)
    body = inner**5 * (inner * (6.0 / 7.0 * inner - 2.5) + 2.0)
    return np.where(u > 1.0, _S_MOMENT_AT_ONE + 0.5 * (u * u - 1.0), body)


class Profile:
    """Interface shared by all profiles; every method is vectorised over numpy arrays."""

    def value(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def derivative(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the profile over [a, b]."""
        raise NotImplementedError

    def moment(self, a: float, b: float) -> float:
        """Exact integral of t * profile(t) over [a, b]."""
        raise NotImplementedError

    def tail_integral(self, x: ArrayLike) -> ArrayLike:
        """Integral from x to 1, vectorised."""
        raise NotImplementedError

    def flat_collars(self) -> Tuple[float, float]:
        """Widths (plus, minus) of the boundary collars on which the profile is constant, capped at 1."""
        raise NotImplementedError

    def negated(self) -> "Profile":
        raise NotImplementedError

    def to_spec(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Profile):
    c: float

    def value(self, x: ArrayLike) -> ArrayLike:
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def derivative(self, x: ArrayLike) -> ArrayLike:
        return np.zeros_like(np.asarray(x, dtype=float))

    def integral(self, a: float, b: float) -> float:
        return self.c * (b - a)

    def moment(self, a: float, b: float) -> float:
        return 0.5 * self.c * (b * b - a * a)

    def tail_integral(self, x: ArrayLike) -> ArrayLike:
        return self.c * (1.0 - np.asarray(x, dtype=float))

    def flat_collars(self) -> Tuple[float, float]:
        return (1.0, 1.0)

    def negated(self) -> "Constant":
        return Constant(-self.c)

    def to_spec(self) -> Dict[str, Any]:
        return {"constant": self.c}


@dataclass(frozen=True)
class Polynomial(Profile):
    """Polynomial with ascending coefficients c0 + c1 x + c2 x^2 + ..."""

    coeffs: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise MapSpecError("polynomial profile needs at least one coefficient")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def _poly(self) -> _NpPolynomial:
        return _NpPolynomial(self.coeffs)

    def value(self, x: ArrayLike) -> ArrayLike:
        return self._poly(np.asarray(x, dtype=float))

    def derivative(self, x: ArrayLike) -> ArrayLike:
        return self._poly.deriv()(np.asarray(x, dtype=float))

    def integral(self, a: float, b: float) -> float:
        anti = self._poly.integ()
        return float(anti(b) - anti(a))

    def moment(self, a: float, b: float) -> float:
        anti = (_NpPolynomial([0.0, 1.0]) * self._poly).integ()
        return float(anti(b) - anti(a))

    def tail_integral(self, x: ArrayLike) -> ArrayLike:
        anti = self._poly.integ()
        return anti(1.0) - anti(np.asarray(x, dtype=float))

    def flat_collars(self) -> Tuple[float, float]:
        if all(c == 0.0 for c in self.coeffs[1:]):
            return (1.0, 1.0)
        return (0.0, 0.0)

    def negated(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def to_spec(self) -> Dict[str, Any]:
        return {"polynomial": list(self.coeffs)}


@dataclass(frozen=True)
class PiecewiseSmoothstep(Profile):
    """Plateau values joined by quintic smoothsteps.

    ``knots`` holds one (start, end) pair per transition, so ``len(knots) == 2 * (len(plateaus) - 1)``;
    the profile equals ``plateaus[i]`` between transitions.
    """

    plateaus: Tuple[float, ...]
    knots: Tuple[float, ...]

    def __post_init__(self) -> None:
        plateaus = tuple(float(v) for v in self.plateaus)
        knots = tuple(float(k) for k in self.knots)
        if not plateaus:
            raise MapSpecError("smoothstep profile needs at least one plateau")
        if len(knots) != 2 * (len(plateaus) - 1):
            raise MapSpecError(
                f"smoothstep profile with {len(plateaus)} plateaus needs {2 * (len(plateaus) - 1)} knots, got {len(knots)}"
            )
        if any(k < -1.0 or k > 1.0 for k in knots):
            raise MapSpecError("smoothstep knots must lie in [-1, 1]")
        for i in range(0, len(knots), 2):
            if not knots[i] < knots[i + 1]:
                raise MapSpecError(f"transition {i // 2} has empty width")
            if i + 2 < len(knots) and knots[i + 1] > knots[i + 2]:
                raise MapSpecError("smoothstep transitions must not overlap")
        object.__setattr__(self, "plateaus", plateaus)
        object.__setattr__(self, "knots", knots)

    def _transitions(self):
        for i in range(len(self.plateaus) - 1):
            start, end = self.knots[2 * i], self.knots[2 * i + 1]
            yield self.plateaus[i + 1] - self.plateaus[i], start, end - start

    def value(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.plateaus[0])
        for jump, start, width in self._transitions():
            out = out + jump * smoothstep((x - start) / width)
        return out

    def derivative(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for jump, start, width in self._transitions():
            out = out + jump * smoothstep_derivative((x - start) / width) / width
        return out

    def _antiderivative(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        out = self.plateaus[0] * x
        for jump, start, width in self._transitions():
            out = out + jump * width * smoothstep_integral((x - start) / width)
        return out

    def _moment_antiderivative(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        out = 0.5 * self.plateaus[0] * x * x
        for jump, start, width in self._transitions():
            u = (x - start) / width
            out = out + jump * width * (start * smoothstep_integral(u) + width * smoothstep_moment(u))
        return out

    def integral(self, a: float, b: float) -> float:
        return float(self._antiderivative(b) - self._antiderivative(a))

    def moment(self, a: float, b: float) -> float:
        return float(self._moment_antiderivative(b) - self._moment_antiderivative(a))

    def tail_integral(self, x: ArrayLike) -> ArrayLike:
        return self._antiderivative(1.0) - self._antiderivative(x)

    def flat_collars(self) -> Tuple[float, float]:
        if not self.knots:
            return (1.0, 1.0)
        return (min(1.0 - self.knots[-1], 1.0), min(self.knots[0] + 1.0, 1.0))

    def negated(self) -> "PiecewiseSmoothstep":
        return PiecewiseSmoothstep(tuple(-v for v in self.plateaus), self.knots)

    def to_spec(self) -> Dict[str, Any]:
        return {"plateaus": list(self.plateaus), "knots": list(self.knots)}


def collar_step(left: float, right: float, delta: float, delta_minus: Optional[float] = None) -> PiecewiseSmoothstep:
    """Profile equal to ``left`` near -1, ``right`` near 1 and zero on [-1 + delta_minus, 1 - delta].

    Each nonzero end ramps to zero over the middle half of its collar, so the integral of the
    profile is (left * delta_minus + right * delta) / 2.
    """
    delta_minus = delta if delta_minus is None else delta_minus
    if not (0.0 < delta <= 1.0 and 0.0 < delta_minus <= 1.0):
        raise MapSpecError(f"collar widths must lie in (0, 1], got {delta}, {delta_minus}")
    plateaus = []
    knots = []
    if left != 0.0:
        plateaus.append(left)
        knots.extend([-1.0 + 0.25 * delta_minus, -1.0 + 0.75 * delta_minus])
    plateaus.append(0.0)
    if right != 0.0:
        plateaus.append(right)
        knots.extend([1.0 - 0.75 * delta, 1.0 - 0.25 * delta])
    return PiecewiseSmoothstep(tuple(plateaus), tuple(knots))


def profile_from_spec(spec: Mapping[str, Any]) -> Profile:
    if not isinstance(spec, Mapping):
        raise MapSpecError(f"profile must be an object, got {type(spec).__name__}")
    if "constant" in spec:
        return Constant(float(spec["constant"]))
    if "polynomial" in spec:
        coeffs: Sequence[float] = spec["polynomial"]
        return Polynomial(tuple(float(c) for c in coeffs))
    if "plateaus" in spec:
        return PiecewiseSmoothstep(
            tuple(float(v) for v in spec["plateaus"]),
            tuple(float(k) for k in spec.get("knots", ())),
        )
    raise MapSpecError(f"unknown profile representation: {sorted(spec)}")
