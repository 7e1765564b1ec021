"""Flux, action function, orbit actions and the Calabi invariant for beta = x dy / 2pi."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .annulus_maps import TWO_PI, AnnulusPoint, LiftedMap, power
from .config import QuadratureSettings
from .errors import DomainError
from .profiles import Profile
from .quadrature import AreaRule, OneForm, area_rule, cumulative_from_right, line_integral, periodic_nodes
from .utils import chunked, parallel_map

LOGGER = logging.getLogger(__name__)

_SWEEP_CHUNK = 32


@dataclass(frozen=True)
class ActionContext:
    map: LiftedMap
    y_plus_offset: int = 0
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    threads: Optional[int] = None

    @property
    def normalization(self) -> float:
        """Value of f on the outer boundary x = 1."""
        return self.map.y_plus + self.y_plus_offset

    def with_map(self, m: LiftedMap, offset: Optional[int] = None) -> "ActionContext":
        return replace(self, map=m, y_plus_offset=self.y_plus_offset if offset is None else offset)


@dataclass(frozen=True)
class OrbitRecord:
    points: Tuple[AnnulusPoint, ...]
    period: int
    winding: int
    total_action: float
    mean_action: float
    residual: float
    family_suspected: bool = False

    def as_dict(self) -> Dict[str, Any]:
        return {
            "period": self.period,
            "winding": self.winding,
            "points": [[p.x, p.y] for p in self.points],
            "total_action": self.total_action,
            "mean_action": self.mean_action,
            "residual": self.residual,
            "family_suspected": self.family_suspected,
        }


class ScalarField:
    """Correction g with beta' = beta + dg; must be constant on each boundary circle."""

    def value(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class ZeroField(ScalarField):
    def value(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def gradient(self, x, y):
        zeros = np.zeros(np.broadcast(x, y).shape)
        return zeros, zeros


@dataclass(frozen=True)
class BumpField(ScalarField):
    """g = height * (1 - ((x - center)/width)^2)^3 * (1 + angular * sin y), supported in |x - center| < width."""

    center: float = 0.0
    width: float = 0.5
    height: float = 0.1
    angular: float = 0.0

    def _radial(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.width
        inside = np.abs(s) < 1.0
        base = np.where(inside, 1.0 - s * s, 0.0)
        return base**3, np.where(inside, -6.0 * s * base**2 / self.width, 0.0)

    def value(self, x, y):
        phi, _ = self._radial(x)
        return self.height * phi * (1.0 + self.angular * np.sin(y))

    def gradient(self, x, y):
        phi, dphi = self._radial(x)
        gx = self.height * dphi * (1.0 + self.angular * np.sin(y))
        gy = self.height * phi * self.angular * np.cos(y)
        return gx, gy


def pullback_form(m: LiftedMap, h: float, correction: Optional[ScalarField] = None) -> OneForm:
    """The exact one-form psi*beta - beta (plus psi*dg - dg for a correction g)."""

    def form(x, y, dx, dy):
        X, Y = m.apply(x, y)
        j00, j01, j10, j11 = m.jacobian_arrays(x, y, h)
        out = (X * (j10 * dx + j11 * dy) - x * dy) / TWO_PI
        if correction is not None:
            gX, gY = correction.gradient(X, Y)
            gx, gy = correction.gradient(x, y)
            out = out + gX * (j00 * dx + j01 * dy) + gY * (j10 * dx + j11 * dy) - gx * dx - gy * dy
        return out

    return form


def _radial_form(m: LiftedMap, h: float, correction: Optional[ScalarField] = None):
    form = pullback_form(m, h, correction)

    def form_x(x, y):
        return form(x, y, np.ones_like(x), np.zeros_like(x))

    return form_x


def action_values(ctx: ActionContext, xs, ys, correction: Optional[ScalarField] = None) -> np.ndarray:
    """f at many points, each integrated along the segment from (1, y) to (x, y)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if np.any(np.abs(xs) > 1.0):
        raise DomainError("action function evaluated outside the annulus")
    q = ctx.quadrature
    integral = line_integral(
        pullback_form(ctx.map, q.fd_step, correction),
        (np.ones_like(xs), ys),
        (xs, ys),
        order=q.line_order,
        tol=q.tol,
        max_refinements=q.max_refinements,
    )
    return ctx.normalization + integral


def action_function(ctx: ActionContext, p: AnnulusPoint) -> float:
    return float(action_values(ctx, [p.x], [p.y])[0])


def action_along_l_path(ctx: ActionContext, p: AnnulusPoint) -> float:
    """f(p) integrated from (1, 0) radially to (x_p, 0) and then angularly to p."""
    q = ctx.quadrature
    form = pullback_form(ctx.map, q.fd_step)
    kwargs = dict(order=q.line_order, tol=q.tol, max_refinements=q.max_refinements)
    radial = line_integral(form, ([1.0], [0.0]), ([p.x], [0.0]), **kwargs)
    angular = line_integral(form, ([p.x], [0.0]), ([p.x], [p.y]), **kwargs)
    return float(ctx.normalization + radial[0] + angular[0])


def path_independence_check(ctx: ActionContext, points: Sequence[AnnulusPoint]) -> float:
    """Largest disagreement between the straight and the L-shaped path."""
    straight = action_values(ctx, [p.x for p in points], [p.y for p in points])
    l_shaped = np.array([action_along_l_path(ctx, p) for p in points])
    return float(np.max(np.abs(straight - l_shaped), initial=0.0))


def flux(ctx: ActionContext) -> float:
    q = ctx.quadrature
    integral = line_integral(
        pullback_form(ctx.map, q.fd_step),
        ([-1.0], [0.0]),
        ([1.0], [0.0]),
        order=q.line_order,
        tol=q.tol,
        max_refinements=q.max_refinements,
    )
    return float(ctx.map.y_plus + ctx.map.y_minus - integral[0])


def boundary_values(ctx: ActionContext, samples: int = 8) -> Dict[str, float]:
    ys = periodic_nodes(samples)
    plus = action_values(ctx, np.ones(samples), ys)
    minus = action_values(ctx, -np.ones(samples), ys)
    F = flux(ctx)
    expected_plus = ctx.normalization
    expected_minus = -ctx.map.y_minus + F + ctx.y_plus_offset
    return {
        "plus": float(np.mean(plus)),
        "minus": float(np.mean(minus)),
        "expected_plus": expected_plus,
        "expected_minus": expected_minus,
        "max_deviation": float(max(np.max(np.abs(plus - expected_plus)), np.max(np.abs(minus - expected_minus)))),
    }


@dataclass(frozen=True)
class ActionGrid:
    rule: AreaRule
    y_nodes: np.ndarray
    values: np.ndarray  # shape (len(y_nodes), len(rule.nodes))

    @property
    def x_nodes(self) -> np.ndarray:
        return self.rule.nodes

    def omega_average(self) -> float:
        """Average over the annulus for omega = dx dy / 2pi (total area 2)."""
        return 0.5 * self.rule.integrate(self.values.mean(axis=0))


def action_sweep(ctx: ActionContext, x_nodes, y_nodes, correction: Optional[ScalarField] = None) -> np.ndarray:
    """f on the tensor grid, sweeping the radial integral from x = 1 once per y-line.

    ``x_nodes`` must be increasing; rows of the result follow ``y_nodes``.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    y_nodes = np.asarray(y_nodes, dtype=float)
    q = ctx.quadrature
    form_x = _radial_form(ctx.map, q.fd_step, correction)

    def sweep(rows: slice) -> np.ndarray:
        return cumulative_from_right(form_x, x_nodes, y_nodes[rows], q.sweep_order)

    tails = parallel_map(sweep, chunked(y_nodes.size, _SWEEP_CHUNK), ctx.threads)
    return ctx.normalization - np.concatenate(tails, axis=0)


def action_grid(ctx: ActionContext, correction: Optional[ScalarField] = None) -> ActionGrid:
    nx, ny = ctx.quadrature.area_grid
    rule = area_rule(ctx.quadrature.rule, nx)
    y_nodes = periodic_nodes(ny)
    return ActionGrid(rule, y_nodes, action_sweep(ctx, rule.nodes, y_nodes, correction))


def calabi(ctx: ActionContext) -> float:
    return action_grid(ctx).omega_average()


@dataclass(frozen=True)
class IndependenceReport:
    v_beta: float
    v_beta_prime: float
    diff: float
    total_action_diffs: Tuple[float, ...] = ()

    def as_dict(self) -> Dict[str, Any]:
        return {
            "v_beta": self.v_beta,
            "v_beta_prime": self.v_beta_prime,
            "diff": self.diff,
            "total_action_diffs": list(self.total_action_diffs),
        }


def _require_boundary_constant(g: ScalarField, samples: int = 64) -> None:
    ys = periodic_nodes(samples)
    for side in (-1.0, 1.0):
        values = g.value(np.full(samples, side), ys)
        if np.ptp(values) > 1e-12:
            raise DomainError(f"correction is not constant on the boundary circle x = {side:+.0f}")


def calabi_independence_check(
    ctx: ActionContext, g: ScalarField, orbits: Sequence[OrbitRecord] = ()
) -> IndependenceReport:
    _require_boundary_constant(g)
    v_beta = calabi(ctx)
    v_prime = action_grid(ctx, g).omega_average()
    diffs = []
    for orbit in orbits:
        xs = [p.x for p in orbit.points]
        ys = [p.y for p in orbit.points]
        diffs.append(
            float(abs(np.sum(action_values(ctx, xs, ys)) - np.sum(action_values(ctx, xs, ys, g))))
        )
    return IndependenceReport(v_beta, v_prime, abs(v_beta - v_prime), tuple(diffs))


def total_action(ctx: ActionContext, orbit: OrbitRecord) -> float:
    values = action_values(ctx, [p.x for p in orbit.points], [p.y for p in orbit.points])
    return float(np.sum(values))


def mean_action(ctx: ActionContext, orbit: OrbitRecord) -> float:
    return total_action(ctx, orbit) / orbit.period


def with_actions(ctx: ActionContext, orbit: OrbitRecord) -> OrbitRecord:
    total = total_action(ctx, orbit)
    return replace(orbit, total_action=total, mean_action=total / orbit.period)


@dataclass(frozen=True)
class PowerScalingReport:
    q: int
    calabi: float
    calabi_power: float
    ratio: Optional[float]
    flux: float
    flux_power: float
    orbit_checks: Tuple[Dict[str, float], ...]

    @property
    def max_orbit_diff(self) -> float:
        return max((c["diff"] for c in self.orbit_checks), default=0.0)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "calabi": self.calabi,
            "calabi_power": self.calabi_power,
            "ratio": self.ratio,
            "flux": self.flux,
            "flux_power": self.flux_power,
            "orbit_checks": list(self.orbit_checks),
            "max_orbit_diff": self.max_orbit_diff,
        }


def power_map_scaling_check(ctx: ActionContext, q: int, orbits: Sequence[OrbitRecord] = ()) -> PowerScalingReport:
    """Compare the q-th power against q times the invariants of the map (offset 0 on both sides)."""
    if q < 1:
        raise DomainError(f"power must be at least 1, got {q}")
    base = ctx.with_map(ctx.map, offset=0)
    powered = base if q == 1 else base.with_map(power(ctx.map, q))
    v1 = calabi(base)
    vq = v1 if q == 1 else calabi(powered)
    ratio = vq / v1 if v1 != 0.0 else None
    checks: List[Dict[str, float]] = []
    for orbit in orbits:
        period = orbit.period
        cycle = period // math.gcd(period, q)
        pts = [orbit.points[(j * q) % period] for j in range(cycle)]
        measured = float(np.mean(action_values(powered, [p.x for p in pts], [p.y for p in pts])))
        expected = q * mean_action(base, orbit)
        checks.append({"period": period, "expected": expected, "measured": measured, "diff": abs(measured - expected)})
    return PowerScalingReport(q, v1, vq, ratio, flux(base), flux(powered), tuple(checks))


@dataclass(frozen=True)
class ShearClosedForms:
    """Closed forms for (x, y) -> (x, y + 2 pi g(x)) with any profile g."""

    profile: Profile

    def action(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * self.profile.value(x) + self.profile.tail_integral(x)

    @property
    def flux(self) -> float:
        return self.profile.integral(-1.0, 1.0)

    @property
    def calabi(self) -> float:
        return self.profile.moment(-1.0, 1.0) + 0.5 * self.flux


def shear_composition_action(ctx: ActionContext, b: Profile, xs, ys) -> np.ndarray:
    """Action of (x, y + 2 pi b(x)) after the map, by the closed form f + H_b(psi)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    X, _ = ctx.map.apply(xs, ys)
    return action_values(ctx, xs, ys) + ShearClosedForms(b).action(X)


def collapsed_calabi(ctx: ActionContext) -> float:
    """Calabi invariant of the disk obtained by collapsing x = -1, via beta' = beta/2 + dy/4pi."""
    grid = action_grid(ctx)
    gx, gy = np.meshgrid(grid.x_nodes, grid.y_nodes)
    _, Y = ctx.map.apply(gx, gy)
    collapsed = ActionGrid(grid.rule, grid.y_nodes, 0.5 * grid.values + (Y - gy) / (2.0 * TWO_PI))
    return collapsed.omega_average()


def map_summary(ctx: ActionContext) -> Dict[str, Any]:
    F = flux(ctx)
    V = calabi(ctx)
    bounds = boundary_values(ctx)
    return {
        "y_plus": ctx.map.y_plus,
        "y_minus": ctx.map.y_minus,
        "offset": ctx.y_plus_offset,
        "flux": F,
        "calabi": V,
        "f_boundary": {"plus": bounds["plus"], "minus": bounds["minus"]},
    }
