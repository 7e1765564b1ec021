"""Harmonic-mean bounds, the hypothesis case split and the disk-collapse criterion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from .action_calabi import ActionContext, ShearClosedForms, calabi, flux
from .errors import DomainError, NonPositiveInput
from .profiles import PiecewiseSmoothstep, collar_step
from .utils import rationality_test, require_positive

LOGGER = logging.getLogger(__name__)

CASE_LABELS = ("1a", "1b", "2a(i)", "2a(ii)", "2a(iii)", "2a(iv)", "2b")
_EQUAL_TOL = 1e-12


@dataclass(frozen=True)
class MapInvariants:
    y_plus: float
    y_minus: float
    F: float
    calabi: float

    @property
    def p_tilde(self) -> float:
        return self.y_plus - self.y_minus + self.F

    @property
    def outer(self) -> float:
        """Rotation number seen from the outer boundary, y_plus."""
        return self.y_plus

    @property
    def inner(self) -> float:
        """-y_minus + F, the value of the action function on the inner boundary."""
        return -self.y_minus + self.F

    @property
    def m(self) -> float:
        return min(self.outer, self.inner)

    @property
    def M(self) -> float:
        return max(self.outer, self.inner)

    def shifted(self, n: int) -> "MapInvariants":
        """Invariants of the lift composed with n full turns."""
        return MapInvariants(self.y_plus + n, self.y_minus + n, self.F + 2 * n, self.calabi + n)

    @classmethod
    def from_context(cls, ctx: ActionContext) -> "MapInvariants":
        return cls(ctx.map.y_plus, ctx.map.y_minus, flux(ctx), calabi(ctx.with_map(ctx.map, offset=0)))

    def as_dict(self) -> Dict[str, float]:
        return {
            "y_plus": self.y_plus,
            "y_minus": self.y_minus,
            "flux": self.F,
            "calabi": self.calabi,
            "p_tilde": self.p_tilde,
        }


def harmonic_mean(a: float, b: float) -> float:
    require_positive("a", a)
    require_positive("b", b)
    return 2.0 * a * b / (a + b)


@dataclass(frozen=True)
class PenultimateBound:
    N: int
    bound: float
    gap: float

    def as_dict(self) -> Dict[str, float]:
        return {"N": self.N, "bound": self.bound, "gap": self.gap}


def penultimate_bound(inv: MapInvariants, N: int) -> PenultimateBound:
    """sqrt(hm(y_plus + N, -y_minus + F + N) * (V + N)) and its gap over V + N."""
    shifted_calabi = require_positive("calabi + N", inv.calabi + N)
    bound = math.sqrt(harmonic_mean(inv.outer + N, inv.inner + N) * shifted_calabi)
    return PenultimateBound(N, bound, bound - shifted_calabi)


def penultimate_table(inv: MapInvariants, Ns: Sequence[int]) -> List[PenultimateBound]:
    return [penultimate_bound(inv, N) for N in Ns]


@dataclass(frozen=True)
class RationalFlags:
    """Explicit rationality of y_plus / y_minus; None means decide numerically."""

    y_plus_rational: Optional[bool] = None
    y_minus_rational: Optional[bool] = None


@dataclass(frozen=True)
class Classification:
    case: str
    hypothesis_holds: bool
    hypothesis_reason: str
    m: float
    M: float
    hm: Optional[float]
    y_m_side: str
    y_plus_rational: bool
    y_minus_rational: bool
    confidence: str

    def as_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "hypothesis_holds": self.hypothesis_holds,
            "hypothesis_reason": self.hypothesis_reason,
            "m": self.m,
            "M": self.M,
            "hm": self.hm,
            "y_m_side": self.y_m_side,
            "y_plus_rational": self.y_plus_rational,
            "y_minus_rational": self.y_minus_rational,
            "confidence": self.confidence,
        }


def _resolve_rationality(flags: RationalFlags, inv: MapInvariants, max_denominator: int, tol: float):
    confidence = []
    resolved = []
    for flag, value in ((flags.y_plus_rational, inv.y_plus), (flags.y_minus_rational, inv.y_minus)):
        if flag is None:
            resolved.append(rationality_test(value, max_denominator, tol).rational_suspected)
            confidence.append("numerical")
        else:
            resolved.append(bool(flag))
            confidence.append("user_flag")
    label = confidence[0] if confidence[0] == confidence[1] else "mixed"
    return resolved[0], resolved[1], label


def theorem_hypothesis(inv: MapInvariants, y_plus_rational: bool, y_minus_rational: bool):
    if inv.calabi < inv.M:
        return True, "calabi_below_max"
    if y_plus_rational or y_minus_rational:
        return True, "rational_boundary"
    return False, "none"


def hypothesis_classifier(
    inv: MapInvariants,
    rational_flags: RationalFlags = RationalFlags(),
    max_denominator: int = 1_000_000,
    tol: float = 1e-9,
) -> Classification:
    plus_rational, minus_rational, confidence = _resolve_rationality(rational_flags, inv, max_denominator, tol)
    m, M, V = inv.m, inv.M, inv.calabi
    y_m_side = "plus" if inv.outer <= inv.inner else "minus"
    y_m_rational = plus_rational if y_m_side == "plus" else minus_rational
    hm: Optional[float] = None
    if m > 0:
        hm = harmonic_mean(inv.outer, inv.inner)
    if y_m_rational:
        case = "1a" if V < m else "1b"
    elif V < m:
        case = "2a(i)" if abs(M - m) <= _EQUAL_TOL * max(1.0, abs(M)) else "2a(ii)"
    elif hm is not None and V < hm:
        case = "2a(iii)" if y_m_side == "minus" else "2a(iv)"
    else:
        case = "2b"
    holds, reason = theorem_hypothesis(inv, plus_rational, minus_rational)
    LOGGER.debug("Classified invariants %s as case %s (hypothesis %s)", inv, case, holds)
    return Classification(case, holds, reason, m, M, hm, y_m_side, plus_rational, minus_rational, confidence)


@dataclass(frozen=True)
class DiskCollapse:
    f_kappa_origin: float
    calabi_kappa: float
    criterion_12fv: bool
    classification: str
    swapped: bool
    inner_radius: float

    def as_dict(self) -> Dict[str, Any]:
        return {
            "f_kappa_origin": self.f_kappa_origin,
            "calabi_kappa": self.calabi_kappa,
            "criterion_12fv": self.criterion_12fv,
            "classification": self.classification,
            "swapped": self.swapped,
            "inner_radius": self.inner_radius,
        }


def _oriented_for_collapse(inv: MapInvariants):
    """Invariants with y_plus the larger boundary value, conjugating by (x, y) -> (-x, -y) if needed."""
    if inv.outer >= inv.inner:
        return inv, False
    swapped = MapInvariants(-inv.y_minus, -inv.y_plus, -inv.F, inv.calabi - inv.F)
    return swapped, True


def disk_collapse_stats(inv: MapInvariants, inner_radius: float = 0.0) -> DiskCollapse:
    if not 0.0 <= inner_radius < 1.0:
        raise DomainError(f"inner radius must lie in [0, 1), got {inner_radius}")
    oriented, swapped = _oriented_for_collapse(inv)
    F, V = oriented.F, oriented.calabi
    r2 = inner_radius * inner_radius
    lhs = 0.5 * (1.0 - r2) * F - 2.0 * r2 * oriented.inner
    criterion = lhs <= (1.0 - r2) * V + _EQUAL_TOL * max(1.0, abs(V))
    return DiskCollapse(
        f_kappa_origin=0.5 * F,
        calabi_kappa=0.5 * V + 0.25 * F,
        criterion_12fv=bool(criterion),
        classification="NewForAnnulus" if criterion else "MaybeReducible",
        swapped=swapped,
        inner_radius=inner_radius,
    )


@dataclass(frozen=True)
class FamilyReport:
    c: float
    n: int
    F: float
    V: float
    criterion: bool
    hypothesis_holds: bool

    def as_dict(self) -> Dict[str, Any]:
        return {"c": self.c, "n": self.n, "F": self.F, "V": self.V, "criterion": self.criterion, "hypothesis_holds": self.hypothesis_holds}


def appendix_family_report(c: float, n: int) -> FamilyReport:
    """Closed forms for the twist g(x) = c x^n."""
    if not c > 0:
        raise NonPositiveInput(f"c must be positive, got {c}")
    if n < 0:
        raise DomainError(f"g(x) = c x^n is singular on [-1, 1] for negative n={n}")
    even = n % 2 == 0
    F = c * 2.0 / (n + 1) if even else 0.0
    moment = 0.0 if even else c * 2.0 / (n + 2)
    V = moment + 0.5 * F
    y_plus, y_minus = c, c * (1.0 if even else -1.0)
    inv = MapInvariants(y_plus, y_minus, F, V)
    return FamilyReport(c, n, F, V, F <= 2.0 * V + _EQUAL_TOL, V < inv.M)


@dataclass(frozen=True)
class PerturbationPlan:
    """A radial shear composed after the map, with its exact and displayed Calabi shifts."""

    case: str
    profile: PiecewiseSmoothstep
    exact_calabi_shift: float
    displayed_shift: float
    flux_shift: float
    within_displayed: bool

    def as_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "profile": self.profile.to_spec(),
            "exact_calabi_shift": self.exact_calabi_shift,
            "displayed_shift": self.displayed_shift,
            "flux_shift": self.flux_shift,
            "within_displayed": self.within_displayed,
        }


def perturbation_plan(case: str, inv: MapInvariants, delta: float, epsilon: float, D: float = 0.0) -> PerturbationPlan:
    """Perturbing shear for one case of the case split.

    The case (2a)(i) displayed amount delta * (M - V - epsilon) bounds the exact shift from above;
    the other displayed amounts bound its magnitude.
    """
    V, m, M = inv.calabi, inv.m, inv.M
    plus_is_max = inv.outer >= inv.inner
    if case == "1a":
        left, right = (epsilon, -D - epsilon) if plus_is_max else (D + epsilon, -epsilon)
        # collar widths chosen so the shear has zero flux
        if abs(left) >= abs(right):
            profile = collar_step(left, right, delta, delta * abs(right) / abs(left))
        else:
            profile = collar_step(left, right, delta * abs(left) / abs(right), delta)
        displayed = 0.0
    elif case == "2a(i)":
        c = M - V - epsilon
        profile = collar_step(c, -c, delta)
        displayed = delta * c
    elif case == "2a(ii)":
        profile = collar_step(0.0, m - M, delta) if plus_is_max else collar_step(M - m, 0.0, delta)
        displayed = delta * (M - m)
    elif case == "2a(iii)":
        c = -inv.y_plus + V + epsilon
        profile = collar_step(0.0, c, delta)
        displayed = delta * abs(c)
    elif case == "2a(iv)":
        c = inv.inner - V - epsilon
        profile = collar_step(c, 0.0, delta)
        displayed = delta * abs(c)
    else:
        raise DomainError(f"no perturbation is built for case {case!r}")
    forms = ShearClosedForms(profile)
    exact = forms.calabi
    if case == "1a":
        within = exact <= _EQUAL_TOL
    elif case == "2a(i)":
        within = exact <= displayed + _EQUAL_TOL
    else:
        within = abs(exact) <= displayed + _EQUAL_TOL
    return PerturbationPlan(case, profile, exact, displayed, forms.flux, within)
