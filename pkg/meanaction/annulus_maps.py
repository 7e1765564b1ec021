"""Lifted area-preserving diffeomorphisms of the annulus [-1, 1] x R/2piZ."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, IntegratorDivergence, MapSpecError
from .profiles import Profile

LOGGER = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEFAULT_FD_STEP = 1e-6

Jacobian = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class AnnulusPoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (-1.0 <= self.x <= 1.0) or not math.isfinite(self.y):
            raise DomainError(f"point ({self.x}, {self.y}) is outside the annulus")

    def projected(self) -> "AnnulusPoint":
        return AnnulusPoint(self.x, self.y % TWO_PI)


class LiftedMap:
    """Base class; subclasses implement ``apply`` on numpy arrays without domain checks."""

    kind = "abstract"

    @property
    def y_plus(self) -> float:
        raise NotImplementedError

    @property
    def y_minus(self) -> float:
        raise NotImplementedError

    @property
    def collars(self) -> Tuple[float, float]:
        """Declared (delta_plus, delta_minus)."""
        raise NotImplementedError

    @property
    def delta_plus(self) -> float:
        return self.collars[0]

    @property
    def delta_minus(self) -> float:
        return self.collars[1]

    @property
    def admissible(self) -> bool:
        plus, minus = self.collars
        return plus > 0.0 and minus > 0.0

    @property
    def has_analytic_jacobian(self) -> bool:
        return True

    def apply(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def jacobian_arrays(self, x: np.ndarray, y: np.ndarray, h: float = DEFAULT_FD_STEP) -> Jacobian:
        return finite_difference_jacobian(self, x, y, h)

    def inverse(self) -> "LiftedMap":
        raise NotImplementedError

    def to_spec(self) -> Dict[str, Any]:
        raise NotImplementedError


def finite_difference_jacobian(m: LiftedMap, x: np.ndarray, y: np.ndarray, h: float = DEFAULT_FD_STEP) -> Jacobian:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xp, yp = m.apply(x + h, y)
    xm, ym = m.apply(x - h, y)
    xq, yq = m.apply(x, y + h)
    xr, yr = m.apply(x, y - h)
    inv = 0.5 / h
    return (xp - xm) * inv, (xq - xr) * inv, (yp - ym) * inv, (yq - yr) * inv


@dataclass(frozen=True)
class RigidRotation(LiftedMap):
    theta0: float
    kind = "rigid"

    @property
    def y_plus(self) -> float:
        return self.theta0

    @property
    def y_minus(self) -> float:
        return self.theta0

    @property
    def collars(self) -> Tuple[float, float]:
        return (1.0, 1.0)

    def apply(self, x, y):
        x = np.asarray(x, dtype=float)
        return x + 0.0, np.asarray(y, dtype=float) + TWO_PI * self.theta0

    def jacobian_arrays(self, x, y, h=DEFAULT_FD_STEP):
        ones = np.ones_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float))
        zeros = np.zeros_like(ones)
        return ones, zeros, zeros, ones

    def inverse(self) -> "RigidRotation":
        return RigidRotation(-self.theta0)

    def to_spec(self) -> Dict[str, Any]:
        return {"kind": self.kind, "theta0": self.theta0}


@dataclass(frozen=True)
class _ProfileShear(LiftedMap):
    """(x, y) -> (x, y + 2 pi b(x))."""

    profile: Profile

    @property
    def y_plus(self) -> float:
        return float(self.profile.value(1.0))

    @property
    def y_minus(self) -> float:
        return float(self.profile.value(-1.0))

    @property
    def collars(self) -> Tuple[float, float]:
        return self.profile.flat_collars()

    def apply(self, x, y):
        x = np.asarray(x, dtype=float)
        return x + 0.0, np.asarray(y, dtype=float) + TWO_PI * self.profile.value(x)

    def jacobian_arrays(self, x, y, h=DEFAULT_FD_STEP):
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(x, np.asarray(y)).shape
        ones = np.ones(shape)
        zeros = np.zeros(shape)
        return ones, zeros, np.broadcast_to(TWO_PI * self.profile.derivative(x), shape).copy(), ones

    def inverse(self) -> "_ProfileShear":
        return type(self)(self.profile.negated())

    def to_spec(self) -> Dict[str, Any]:
        return {"kind": self.kind, "profile": self.profile.to_spec()}


@dataclass(frozen=True)
class TwistProfile(_ProfileShear):
    kind = "twist"


@dataclass(frozen=True)
class RadialShear(_ProfileShear):
    kind = "radial_shear"


@dataclass(frozen=True)
class HamiltonianBump(LiftedMap):
    """Time-``time`` flow of H = strength * (1 - r^2/radius^2)^3 on a disk inside the annulus.

    Integrated with the implicit midpoint rule at a fixed step; points outside the disk are fixed.
    """

    center: Tuple[float, float]
    radius: float
    strength: float
    time: float = 1.0
    step: float = 0.01
    solver_tol: float = 1e-14
    max_iter: int = 50
    kind = "hamiltonian_bump"

    def __post_init__(self) -> None:
        cx = self.center[0]
        if self.radius <= 0.0 or self.step <= 0.0:
            raise MapSpecError("bump radius and integrator step must be positive")
        if cx - self.radius <= -1.0 or cx + self.radius >= 1.0 or 2.0 * self.radius >= TWO_PI:
            raise MapSpecError(f"bump disk around {self.center} with radius {self.radius} leaves the annulus interior")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def y_plus(self) -> float:
        return 0.0

    @property
    def y_minus(self) -> float:
        return 0.0

    @property
    def collars(self) -> Tuple[float, float]:
        cx = self.center[0]
        return (min(1.0 - (cx + self.radius), 1.0), min(cx - self.radius + 1.0, 1.0))

    @property
    def has_analytic_jacobian(self) -> bool:
        return False

    @property
    def steps(self) -> int:
        return max(1, math.ceil(abs(self.time) / self.step))

    def _vector_field(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        dx = x - self.center[0]
        dy = np.mod(y - self.center[1] + math.pi, TWO_PI) - math.pi
        r2 = self.radius * self.radius
        u = (dx * dx + dy * dy) / r2
        inside = u < 1.0
        factor = np.where(inside, -6.0 * self.strength * (1.0 - u) ** 2 / r2, 0.0)
        # xdot = dH/dy, ydot = -dH/dx
        return factor * dy, -factor * dx

    def apply(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        base = TWO_PI * np.floor(y / TWO_PI)
        cx, cy = x.copy(), y - base
        h = self.time / self.steps
        for _ in range(self.steps):
            nx, ny = cx, cy
            for _ in range(self.max_iter):
                vx, vy = self._vector_field(0.5 * (cx + nx), 0.5 * (cy + ny))
                tx, ty = cx + h * vx, cy + h * vy
                change = max(np.max(np.abs(tx - nx), initial=0.0), np.max(np.abs(ty - ny), initial=0.0))
                nx, ny = tx, ty
                if change <= self.solver_tol:
                    break
            else:
                raise IntegratorDivergence(
                    f"implicit midpoint solve did not converge in {self.max_iter} iterations (step {h:g})"
                )
            cx, cy = nx, ny
        return cx, cy + base

    def inverse(self) -> "HamiltonianBump":
        return HamiltonianBump(
            self.center, self.radius, self.strength, -self.time, self.step, self.solver_tol, self.max_iter
        )

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "center": list(self.center),
            "radius": self.radius,
            "strength": self.strength,
            "time": self.time,
            "step": self.step,
        }


@dataclass(frozen=True)
class Composition(LiftedMap):
    """Maps applied in list order: ``maps[0]`` first."""

    maps: Tuple[LiftedMap, ...] = field(default_factory=tuple)
    kind = "compose"

    def __post_init__(self) -> None:
        flat = []
        for m in self.maps:
            if isinstance(m, Composition):
                flat.extend(m.maps)
            else:
                flat.append(m)
        object.__setattr__(self, "maps", tuple(flat))

    @property
    def y_plus(self) -> float:
        return float(sum(m.y_plus for m in self.maps))

    @property
    def y_minus(self) -> float:
        return float(sum(m.y_minus for m in self.maps))

    @property
    def collars(self) -> Tuple[float, float]:
        if not self.maps:
            return (1.0, 1.0)
        return (min(m.collars[0] for m in self.maps), min(m.collars[1] for m in self.maps))

    @property
    def has_analytic_jacobian(self) -> bool:
        return all(m.has_analytic_jacobian for m in self.maps)

    def apply(self, x, y):
        x = np.asarray(x, dtype=float) + 0.0
        y = np.asarray(y, dtype=float) + 0.0
        for m in self.maps:
            x, y = m.apply(x, y)
        return x, y

    def jacobian_arrays(self, x, y, h=DEFAULT_FD_STEP):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        a = np.ones(x.shape)
        b = np.zeros(x.shape)
        c = np.zeros(x.shape)
        d = np.ones(x.shape)
        for m in self.maps:
            j00, j01, j10, j11 = m.jacobian_arrays(x, y, h)
            a, b, c, d = j00 * a + j01 * c, j00 * b + j01 * d, j10 * a + j11 * c, j10 * b + j11 * d
            x, y = m.apply(x, y)
        return a, b, c, d

    def inverse(self) -> "Composition":
        return Composition(tuple(m.inverse() for m in reversed(self.maps)))

    def to_spec(self) -> Dict[str, Any]:
        return {"compose": [m.to_spec() for m in self.maps]}


def power(m: LiftedMap, q: int) -> Composition:
    if q < 1:
        raise DomainError(f"power must be at least 1, got {q}")
    return Composition(tuple([m] * q))


IMAGE_TOL = 1e-9


def _image_point(x, y) -> AnnulusPoint:
    """Image as a point of A; overshoot past |x| = 1 within IMAGE_TOL is rounding and is clipped."""
    x, y = float(x), float(y)
    if abs(x) > 1.0 + IMAGE_TOL:
        raise DomainError(f"image ({x}, {y}) left the annulus")
    return AnnulusPoint(min(max(x, -1.0), 1.0), y)


def evaluate_lift(m: LiftedMap, p: AnnulusPoint) -> AnnulusPoint:
    x, y = m.apply(np.asarray(p.x), np.asarray(p.y))
    return _image_point(x, y)


def jacobian(m: LiftedMap, p: AnnulusPoint, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    j00, j01, j10, j11 = m.jacobian_arrays(np.asarray(p.x), np.asarray(p.y), h)
    return np.array([[float(j00), float(j01)], [float(j10), float(j11)]])


def iterate_lift(m: LiftedMap, q: int, p: AnnulusPoint) -> AnnulusPoint:
    if q < 1:
        raise DomainError(f"iteration count must be at least 1, got {q}")
    x, y = np.asarray(p.x, dtype=float), np.asarray(p.y, dtype=float)
    for _ in range(q):
        x, y = m.apply(x, y)
    return _image_point(x, y)


@dataclass(frozen=True)
class AdmissibilityReport:
    area_defect_max: float
    boundary_rotation_verified: bool
    measured_collars: Tuple[float, float]
    declared_collars: Tuple[float, float]
    admissible: bool
    area_defect_constant: Optional[float] = None

    def as_dict(self) -> Dict[str, Any]:
        out = {
            "area_defect_max": self.area_defect_max,
            "boundary_rotation_verified": self.boundary_rotation_verified,
            "measured_collars": {"plus": self.measured_collars[0], "minus": self.measured_collars[1]},
            "declared_collars": {"plus": self.declared_collars[0], "minus": self.declared_collars[1]},
            "admissible": self.admissible,
        }
        if self.area_defect_constant is not None:
            out["area_defect_constant"] = self.area_defect_constant
        return out


def _column_is_rotation(m: LiftedMap, x: float, ys: np.ndarray, rotation: float, tol: float) -> bool:
    xs = np.full_like(ys, x)
    X, Y = m.apply(xs, ys)
    return bool(np.all(np.abs(X - xs) <= tol) and np.all(np.abs(Y - ys - TWO_PI * rotation) <= tol))


def _measure_collar(m: LiftedMap, side: float, ys: np.ndarray, rotation: float, grid_n: int, tol: float) -> float:
    """Largest width w <= 1 such that the columns x = side*(1 - t), t <= w, are rotations."""
    if not _column_is_rotation(m, side, ys, rotation, tol):
        return 0.0
    widths = np.linspace(0.0, 1.0, max(grid_n, 2))
    good = 0.0
    for w in widths[1:]:
        if not _column_is_rotation(m, side * (1.0 - w), ys, rotation, tol):
            lo, hi = good, float(w)
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if _column_is_rotation(m, side * (1.0 - mid), ys, rotation, tol):
                    lo = mid
                else:
                    hi = mid
            return lo
        good = float(w)
    return 1.0


def _bump_steps(m: LiftedMap) -> Sequence[float]:
    if isinstance(m, HamiltonianBump):
        return [m.time / m.steps]
    if isinstance(m, Composition):
        return [h for inner in m.maps for h in _bump_steps(inner)]
    return []


def check_admissibility(m: LiftedMap, grid_n: int = 50, tol: float = 1e-10, h: float = DEFAULT_FD_STEP) -> AdmissibilityReport:
    if grid_n < 2:
        raise DomainError("admissibility grid needs at least 2 points per axis")
    xs = np.linspace(-1.0, 1.0, grid_n)
    ys = np.linspace(0.0, TWO_PI, grid_n, endpoint=False)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    j00, j01, j10, j11 = m.jacobian_arrays(gx, gy, h)
    defect = float(np.max(np.abs(j00 * j11 - j01 * j10 - 1.0)))

    declared = m.collars
    verified = True
    for side, rotation, width in ((1.0, m.y_plus, declared[0]), (-1.0, m.y_minus, declared[1])):
        if m.admissible:
            for t in np.linspace(0.0, width, grid_n):
                verified &= _column_is_rotation(m, side * (1.0 - t), ys, rotation, tol)
        else:
            verified &= _column_is_rotation(m, side, ys, rotation, tol)
    measured = (
        _measure_collar(m, 1.0, ys, m.y_plus, grid_n, tol),
        _measure_collar(m, -1.0, ys, m.y_minus, grid_n, tol),
    )
    steps = _bump_steps(m)
    constant = defect / max(abs(s) for s in steps) ** 2 if steps else None
    if not verified:
        LOGGER.info("Declared boundary rotation of %s map does not hold to %.1e", m.kind, tol)
    return AdmissibilityReport(defect, bool(verified), measured, declared, m.admissible, constant)
