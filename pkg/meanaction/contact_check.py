"""Contact form on the mapping torus of an admissible map with positive action.

The form is lambda0 = ((1 - eta') f + eta' f o psi) dtheta + beta + (theta - eta) df + eta d(f o psi)
for a blend eta with eta = 0 near theta = 0, eta = theta - 1 near theta = 1 and
-min f / max f < eta' <= 1. Any such eta gives a different lambda0 with the same contact condition,
return time and volume; ``build_eta`` picks one quintic-smoothstep blend.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .action_calabi import ActionContext, action_grid, action_sweep, action_values, calabi, flux, pullback_form
from .annulus_maps import TWO_PI, AnnulusPoint, LiftedMap, power
from .errors import InfeasibleEta, NonIntegerP, RationalityGuardTripped
from .profiles import smoothstep, smoothstep_integral
from .quadrature import gauss_legendre, periodic_nodes
from .utils import chunked, rationality_test

LOGGER = logging.getLogger(__name__)

SAFETY = 0.95
DIP_FRACTION = 0.5
FD_STEP = 1e-4
_THETA_ORDER = 8
_X_ORDER = 4
_POINT_CHUNK = 256


@dataclass(frozen=True)
class EtaProfile:
    """eta' = -k S((theta - a1)/w) + (1 + k) S((theta - a2)/w); ``drift`` adds drift * theta to eta."""

    k: float
    w: float
    a1: float
    a2: float
    lower_bound: float
    drift: float = 0.0

    @classmethod
    def with_dip(cls, k: float, lower_bound: float, width: Optional[float] = None) -> "EtaProfile":
        if not k > 0.0:
            raise InfeasibleEta(f"dip depth must be positive, got {k}")
        w = width if width is not None else min(0.1, k / (1.0 + 2.5 * k), 0.9 / (2.5 + k))
        a1 = w
        # chosen so that eta(1) = 0
        a2 = 1.0 - 0.5 * w - k * (1.0 - 1.5 * w) / (1.0 + k)
        if a2 < a1 + w or a2 + w >= 1.0:
            raise InfeasibleEta(f"no room for the blend: w={w:g}, a1={a1:g}, a2={a2:g}")
        return cls(k, w, a1, a2, lower_bound)

    def broken(self, drift: float) -> "EtaProfile":
        """Same profile with eta(1) = drift, for exercising the checks."""
        return EtaProfile(self.k, self.w, self.a1, self.a2, self.lower_bound, drift)

    @property
    def theta_a(self) -> float:
        return self.a1

    @property
    def theta_b(self) -> float:
        return self.a2 + self.w

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return (0.0, self.a1, self.a1 + self.w, self.a2, self.a2 + self.w, 1.0)

    def derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        u1 = (theta - self.a1) / self.w
        u2 = (theta - self.a2) / self.w
        return -self.k * smoothstep(u1) + (1.0 + self.k) * smoothstep(u2) + self.drift

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        u1 = (theta - self.a1) / self.w
        u2 = (theta - self.a2) / self.w
        return self.w * (-self.k * smoothstep_integral(u1) + (1.0 + self.k) * smoothstep_integral(u2)) + self.drift * theta

    def derivative_integral(self) -> float:
        """Gauss-Legendre integral of eta' over [0, 1], panel by panel."""
        thetas, weights = _theta_rule(self)
        return float(self.derivative(thetas) @ weights)

    def margins(self) -> Dict[str, float]:
        thetas = np.linspace(0.0, 1.0, 2001)
        slopes = self.derivative(thetas)
        return {
            "eta_prime_min": float(slopes.min()),
            "eta_prime_max": float(slopes.max()),
            "lower_margin": float(slopes.min() - self.lower_bound),
            "upper_margin": float(1.0 - slopes.max()),
            "eta_at_zero": float(self.value(0.0)),
            "eta_at_one": float(self.value(1.0)),
        }

    def as_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "w": self.w,
            "theta_a": self.theta_a,
            "theta_b": self.theta_b,
            "lower_bound": self.lower_bound,
            "drift": self.drift,
        }


def _offset_context(target: Union[ActionContext, LiftedMap], N: int) -> ActionContext:
    ctx = target if isinstance(target, ActionContext) else ActionContext(target)
    return ctx.with_map(ctx.map, offset=N)


def _action_range(ctx: ActionContext) -> Tuple[float, float]:
    values = action_grid(ctx).values
    return float(values.min()), float(values.max())


def _positive_range(ctx: ActionContext) -> Tuple[float, float]:
    f_min, f_max = _action_range(ctx)
    if not f_min > 0.0:
        raise InfeasibleEta(f"min(f + N) = {f_min:.6g} is not positive; raise the offset N")
    return f_min, f_max


def _eta_for_range(f_min: float, f_max: float) -> EtaProfile:
    lower = -f_min / f_max
    eta = EtaProfile.with_dip(DIP_FRACTION * SAFETY * abs(lower), lower)
    LOGGER.debug("Built eta with dip %.4g against bound %.4g (f in [%.4g, %.4g])", eta.k, lower, f_min, f_max)
    return eta


def build_eta(target: Union[ActionContext, LiftedMap], N: int = 0) -> EtaProfile:
    return _eta_for_range(*_positive_range(_offset_context(target, N)))


@dataclass(frozen=True)
class _PointData:
    x: np.ndarray
    f: np.ndarray
    f_psi: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    f_psi_x: np.ndarray
    f_psi_y: np.ndarray


@dataclass(frozen=True)
class MappingTorusForm:
    ctx: ActionContext
    eta: EtaProfile
    offset: int
    f_min: float
    f_max: float

    @property
    def map(self) -> LiftedMap:
        return self.ctx.map

    def point_data(self, xs, ys) -> _PointData:
        """Point data with f and f o psi integrated along segments from the outer circle."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        if xs.size > _POINT_CHUNK:
            parts = [self.point_data(xs[part], ys[part]) for part in chunked(xs.size, _POINT_CHUNK)]
            return _PointData(*(np.concatenate([getattr(p, f.name) for p in parts]) for f in fields(_PointData)))
        X, Y = self.map.apply(xs, ys)
        X = np.clip(X, -1.0, 1.0)
        return self._with_derivatives(xs, ys, X, Y, action_values(self.ctx, xs, ys), action_values(self.ctx, X, Y))

    def swept_data(self, xs, ys) -> _PointData:
        """Point data on the grid ys x xs, flattened row by row in y; ``xs`` must be increasing.

        f o psi is the action of psi^2 minus f, since d(f o psi) + df = (psi^2)* beta - beta and
        both sides equal 2 (y+ + N) on the outer circle.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        twice = self.ctx.with_map(power(self.map, 2), offset=2 * self.ctx.y_plus_offset)
        f = action_sweep(self.ctx, xs, ys)
        f_psi = action_sweep(twice, xs, ys) - f
        gx, gy = (g.ravel() for g in np.meshgrid(xs, ys))
        X, Y = self.map.apply(gx, gy)
        return self._with_derivatives(gx, gy, np.clip(X, -1.0, 1.0), Y, f.ravel(), f_psi.ravel())

    def _with_derivatives(self, xs, ys, X, Y, f, f_psi) -> _PointData:
        h = self.ctx.quadrature.fd_step
        df = pullback_form(self.map, h)
        j00, j01, j10, j11 = self.map.jacobian_arrays(xs, ys, h)
        ones, zeros = np.ones_like(xs), np.zeros_like(xs)
        return _PointData(
            x=xs,
            f=f,
            f_psi=f_psi,
            fx=df(xs, ys, ones, zeros),
            fy=df(xs, ys, zeros, ones),
            f_psi_x=df(X, Y, j00, j10),
            f_psi_y=df(X, Y, j01, j11),
        )

    def coefficients(self, theta: float, data: _PointData) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(dtheta, dx, dy) coefficients of lambda0 at one theta."""
        e, de = float(self.eta.value(theta)), float(self.eta.derivative(theta))
        lam_t = (1.0 - de) * data.f + de * data.f_psi
        lam_x = (theta - e) * data.fx + e * data.f_psi_x
        lam_y = data.x / TWO_PI + (theta - e) * data.fy + e * data.f_psi_y
        return lam_t, lam_x, lam_y

    def wedge_coefficient(self, theta, f, f_psi):
        """lambda0 ^ dlambda0 = this * dtheta ^ omega."""
        de = self.eta.derivative(theta)
        return (1.0 - de) * f + de * f_psi


def mapping_torus_form(target: Union[ActionContext, LiftedMap], N: int = 0, eta: Optional[EtaProfile] = None) -> MappingTorusForm:
    ctx = _offset_context(target, N)
    f_min, f_max = _positive_range(ctx)
    return MappingTorusForm(ctx, eta if eta is not None else _eta_for_range(f_min, f_max), N, f_min, f_max)


def _sample_points(count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, count), rng.uniform(0.0, TWO_PI, count)


@dataclass(frozen=True)
class _Stencil:
    """Point data at p and at p +- h along x and y."""

    center: _PointData
    x_plus: _PointData
    x_minus: _PointData
    y_plus: _PointData
    y_minus: _PointData
    h: float


def _stencil(form: MappingTorusForm, xs: np.ndarray, ys: np.ndarray, h: float = FD_STEP) -> _Stencil:
    return _Stencil(
        center=form.point_data(xs, ys),
        x_plus=form.point_data(xs + h, ys),
        x_minus=form.point_data(xs - h, ys),
        y_plus=form.point_data(xs, ys + h),
        y_minus=form.point_data(xs, ys - h),
        h=h,
    )


def _swept_stencil(form: MappingTorusForm, x_nodes: np.ndarray, y_nodes: np.ndarray, h: float = FD_STEP) -> _Stencil:
    """Stencil on the grid y_nodes x x_nodes from tensor sweeps; x_nodes must be more than 2h apart."""
    rows = form.swept_data((x_nodes[:, None] + np.array([-h, 0.0, h])).ravel(), y_nodes)

    def column(k: int) -> _PointData:
        return _PointData(*(getattr(rows, f.name).reshape(y_nodes.size, x_nodes.size, 3)[:, :, k].ravel() for f in fields(_PointData)))

    return _Stencil(
        center=column(1),
        x_plus=column(2),
        x_minus=column(0),
        y_plus=form.swept_data(x_nodes, y_nodes + h),
        y_minus=form.swept_data(x_nodes, y_nodes - h),
        h=h,
    )


@dataclass(frozen=True)
class _Partials:
    lam: Tuple[np.ndarray, np.ndarray, np.ndarray]
    d_theta: Tuple[np.ndarray, np.ndarray, np.ndarray]
    d_x: Tuple[np.ndarray, np.ndarray, np.ndarray]
    d_y: Tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def theta_x(self) -> np.ndarray:
        """dtheta ^ dx coefficient of dlambda0."""
        return self.d_theta[1] - self.d_x[0]

    @property
    def theta_y(self) -> np.ndarray:
        return self.d_theta[2] - self.d_y[0]

    @property
    def x_y(self) -> np.ndarray:
        return self.d_x[2] - self.d_y[1]

    @property
    def wedge(self) -> np.ndarray:
        """lambda0 ^ dlambda0 = this * dtheta ^ dx ^ dy."""
        lam_t, lam_x, lam_y = self.lam
        return lam_t * self.x_y - lam_x * self.theta_y + lam_y * self.theta_x


def _difference(above, below, step: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple((a - b) / step for a, b in zip(above, below))


def _partials(form: MappingTorusForm, theta: float, stencil: _Stencil) -> _Partials:
    """Central finite differences of the coefficients of lambda0, one-sided at theta = 0 and 1."""
    h = stencil.h
    lo, hi = max(theta - h, 0.0), min(theta + h, 1.0)
    return _Partials(
        lam=form.coefficients(theta, stencil.center),
        d_theta=_difference(form.coefficients(hi, stencil.center), form.coefficients(lo, stencil.center), hi - lo),
        d_x=_difference(form.coefficients(theta, stencil.x_plus), form.coefficients(theta, stencil.x_minus), 2.0 * h),
        d_y=_difference(form.coefficients(theta, stencil.y_plus), form.coefficients(theta, stencil.y_minus), 2.0 * h),
    )


def _theta_rule(eta: EtaProfile) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on each panel between the breakpoints of eta."""
    nodes, weights = gauss_legendre(_THETA_ORDER)
    spans = [(lo, hi) for lo, hi in zip(eta.breakpoints[:-1], eta.breakpoints[1:]) if hi > lo]
    thetas = np.concatenate([lo + (hi - lo) * nodes for lo, hi in spans])
    theta_weights = np.concatenate([(hi - lo) * weights for lo, hi in spans])
    return thetas, theta_weights


def _x_rule(panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre on [-1, 1]; every node is interior, so x +- h stays in the annulus."""
    nodes, weights = gauss_legendre(_X_ORDER)
    width = 2.0 / panels
    xs = -1.0 + width * (np.arange(panels)[:, None] + nodes[None, :])
    return xs.ravel(), np.tile(weights * width, panels)


def verify_contact(form: MappingTorusForm, grid: Tuple[int, int, int] = (33, 17, 16)) -> Dict[str, float]:
    """Minimum of the contact coefficient over a (theta, x, y) grid; positive means contact."""
    n_theta, nx, ny = grid
    thetas = np.union1d(np.linspace(0.0, 1.0, n_theta), form.eta.breakpoints)
    xs, ys = np.meshgrid(np.linspace(-1.0, 1.0, nx), periodic_nodes(ny), indexing="ij")
    data = form.point_data(xs.ravel(), ys.ravel())
    coeff = form.wedge_coefficient(thetas[:, None], data.f[None, :], data.f_psi[None, :])
    worst = np.unravel_index(int(np.argmin(coeff)), coeff.shape)
    return {
        "min_wedge_coeff": float(coeff.min()),
        "argmin_theta": float(thetas[worst[0]]),
        "argmin_x": float(data.x[worst[1]]),
    }


def verify_return_time(form: MappingTorusForm, sample_points: Union[int, Sequence[AnnulusPoint]] = 100, seed: int = 0) -> float:
    """Largest |integral over theta of the contact coefficient - f| at the sample points."""
    if isinstance(sample_points, int):
        xs, ys = _sample_points(sample_points, seed)
    else:
        xs = np.array([p.x for p in sample_points])
        ys = np.array([p.y for p in sample_points])
    data = form.point_data(xs, ys)
    q = form.eta.derivative_integral()
    flowed = (1.0 - q) * data.f + q * data.f_psi
    return float(np.max(np.abs(flowed - data.f)))


def verify_volume(
    form: MappingTorusForm,
    grid: Tuple[int, int] = (64, 128),
    calabi_reference: Optional[float] = None,
) -> Dict[str, float]:
    """Integral of lambda0 ^ dlambda0 over [0, 1] x A against 2 (V + N).

    The integrand is assembled from finite differences of the coefficients of lambda0, so it does
    not assume dlambda0 = omega, and f o psi comes from the action of psi^2 rather than from f.
    ``grid`` is (x panels, y nodes); V defaults to the area quadrature of the action and
    ``calabi_reference`` replaces it with a known value. ``wedge_deviation`` is the largest
    pointwise gap to ((1 - eta') f + eta' f o psi) / 2pi.
    """
    panels, ny = grid
    x_nodes, x_weights = _x_rule(panels)
    stencil = _swept_stencil(form, x_nodes, periodic_nodes(ny))
    thetas, theta_weights = _theta_rule(form.eta)
    volume = 0.0
    wedge_deviation = 0.0
    for theta, weight in zip(thetas, theta_weights):
        wedge = _partials(form, float(theta), stencil).wedge
        volume += float(weight) * TWO_PI * float(wedge.reshape(ny, x_nodes.size).mean(axis=0) @ x_weights)
        expected = form.wedge_coefficient(theta, stencil.center.f, stencil.center.f_psi) / TWO_PI
        wedge_deviation = max(wedge_deviation, float(np.max(np.abs(wedge - expected))))
    if calabi_reference is None:
        calabi_reference = calabi(form.ctx.with_map(form.map, offset=0))
    two_calabi = 2.0 * (calabi_reference + form.offset)
    return {
        "volume": volume,
        "two_calabi": two_calabi,
        "diff": abs(volume - two_calabi),
        "wedge_deviation": wedge_deviation,
    }


def verify_dlambda(form: MappingTorusForm, sample_points: int = 100, seed: int = 0) -> Dict[str, float]:
    """dlambda0 = omega: the dtheta terms cancel and the dx ^ dy coefficient is 1/2pi.

    Every partial derivative is a finite difference of the coefficients of lambda0.
    """
    xs, ys = _sample_points(sample_points, seed)
    xs = np.clip(xs, -1.0 + 2.0 * FD_STEP, 1.0 - 2.0 * FD_STEP)
    stencil = _stencil(form, xs, ys)
    theta_terms = 0.0
    area_term = 0.0
    for theta in np.linspace(0.0, 1.0, 11):
        partials = _partials(form, float(theta), stencil)
        theta_terms = max(
            theta_terms,
            float(np.max(np.abs(partials.theta_x))),
            float(np.max(np.abs(partials.theta_y))),
        )
        area_term = max(area_term, float(np.max(np.abs(partials.x_y - 1.0 / TWO_PI))))
    return {"theta_terms_max": theta_terms, "area_term_deviation": area_term}


def verify_gluing(form: MappingTorusForm, sample_points: int = 100, seed: int = 0) -> float:
    """Largest coefficient of lambda0(1, p) - psi* lambda0(0, p)."""
    xs, ys = _sample_points(sample_points, seed)
    data = form.point_data(xs, ys)
    top_t, top_x, top_y = form.coefficients(1.0, data)
    h = form.ctx.quadrature.fd_step
    X, Y = form.map.apply(xs, ys)
    j00, j01, j10, j11 = form.map.jacobian_arrays(xs, ys, h)
    # lambda0(0, .) = f dtheta + beta
    pulled_t = data.f_psi
    pulled_x = X * j10 / TWO_PI
    pulled_y = X * j11 / TWO_PI
    return float(
        max(
            np.max(np.abs(top_t - pulled_t)),
            np.max(np.abs(top_x - pulled_x)),
            np.max(np.abs(top_y - pulled_y)),
        )
    )


def binding_rotation_numbers(
    y_plus: float,
    y_minus: float,
    F: float,
    max_denominator: int = 1_000_000,
    tol: float = 1e-9,
) -> Dict[str, Tuple[float, float]]:
    """Rotation numbers of the two binding orbits: page, Seifert framing and the e+- normalisation."""
    inner = -y_minus + F
    p_tilde = y_plus - y_minus + F
    p = round(p_tilde)
    if p < 1 or abs(p_tilde - p) > tol:
        raise NonIntegerP(f"y+ - y- + F = {p_tilde!r} is not a positive integer")
    for name, value in (("y+", y_plus), ("-y- + F", inner)):
        verdict = rationality_test(value, max_denominator, tol)
        if verdict.rational_suspected:
            raise RationalityGuardTripped(
                f"{name} = {value!r} is within tolerance of {verdict.numerator}/{verdict.denominator}"
            )
    return {
        "rot_page": (1.0 / y_plus, 1.0 / inner),
        "rot_seifert": (p / y_plus - 1.0, p / inner - 1.0),
        "rot_e": (1.0 / y_plus - 1.0 / p, 1.0 / inner - 1.0 / p),
    }


@dataclass(frozen=True)
class ContactReport:
    offset: int
    eta: EtaProfile
    f_min: float
    f_max: float
    contact: Dict[str, float]
    return_time_deviation: float
    volume: Dict[str, float]
    dlambda: Dict[str, float]
    gluing_deviation: float
    binding: Optional[Dict[str, Tuple[float, float]]] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> Dict[str, Any]:
        out = {
            "offset": self.offset,
            "eta": self.eta.as_dict(),
            "eta_margins": self.eta.margins(),
            "f_min": self.f_min,
            "f_max": self.f_max,
            "contact": self.contact,
            "return_time_deviation": self.return_time_deviation,
            "volume": self.volume,
            "dlambda": self.dlambda,
            "gluing_deviation": self.gluing_deviation,
            "binding_rotation_numbers": (
                {key: list(value) for key, value in self.binding.items()} if self.binding else None
            ),
            "notes": list(self.notes),
        }
        return out


def contact_report(target: Union[ActionContext, LiftedMap], N: int = 0, samples: int = 100, seed: int = 0) -> ContactReport:
    form = mapping_torus_form(target, N)
    base = form.ctx.with_map(form.map, offset=0)
    notes = []
    binding = None
    try:
        binding = binding_rotation_numbers(form.map.y_plus + N, form.map.y_minus + N, flux(base) + 2 * N)
    except (NonIntegerP, RationalityGuardTripped) as exc:
        notes.append(f"binding rotation numbers skipped: {exc}")
    report = ContactReport(
        offset=N,
        eta=form.eta,
        f_min=form.f_min,
        f_max=form.f_max,
        contact=verify_contact(form),
        return_time_deviation=verify_return_time(form, samples, seed),
        volume=verify_volume(form),
        dlambda=verify_dlambda(form, samples, seed),
        gluing_deviation=verify_gluing(form, samples, seed),
        binding=binding,
        notes=tuple(notes),
    )
    LOGGER.info("Contact check: min coefficient %.6g, volume diff %.3g", report.contact["min_wedge_coeff"], report.volume["diff"])
    return report
