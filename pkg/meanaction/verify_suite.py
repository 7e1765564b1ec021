"""Acceptance suite behind ``meanaction verify-suite``."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from .action_calabi import ActionContext, ShearClosedForms, action_values, calabi, collapsed_calabi, flux
from .annulus_maps import Composition, HamiltonianBump, RadialShear, RigidRotation, TwistProfile
from .bounds import MapInvariants, appendix_family_report, disk_collapse_stats, perturbation_plan
from .config import AppConfig, SearchSettings
from .contact_check import mapping_torus_form, verify_contact, verify_return_time, verify_volume
from .ech_lattice import (
    SlopeData,
    ech_index_oracle,
    generators_by_index,
    nk_lower_bound_check,
    width,
    width_ranks,
)
from .errors import MeanActionError
from .orbit_search import SearchConfig, find_periodic_orbits, verify_main_inequality
from .profiles import PiecewiseSmoothstep, Polynomial

LOGGER = logging.getLogger(__name__)

EXPECTED_W = (0, 4, 5, 12, 13, 14, 15, 25, 26, 27, 28, 30)


def example_slopes(**kwargs: Any) -> SlopeData:
    a = 1.0 + math.e / 30.0
    return SlopeData(a, 3.0 - a, 3, **kwargs)


def slope_fixtures(guard_eps: float = 1e-9) -> List[SlopeData]:
    """Three fixtures with p = 1, 2, 3 and irrational a, plus two with a + b = 4 and 7."""
    fixtures = []
    for p, a in ((1, 1.0 / math.sqrt(5.0)), (2, math.sqrt(2.0)), (3, 1.0 + math.e / 30.0), (4, math.pi / 2.0), (7, 7.0 / math.sqrt(11.0))):
        fixtures.append(SlopeData(a, p - a, p, guard_eps))
    return fixtures


def smoothed_twist() -> RadialShear:
    """Collar-respecting shear close to y -> y + pi x: b rises from -1/2 to 1/2 over [-0.9, 0.9]."""
    return RadialShear(PiecewiseSmoothstep((-0.5, 0.5), (-0.9, 0.9)))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    details: Dict[str, Any]
    seconds: float

    def as_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "details": self.details}


@dataclass(frozen=True)
class SuiteReport:
    quick: bool
    checks: Tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> Dict[str, Any]:
        return {"quick": self.quick, "passed": self.passed, "checks": [c.as_dict() for c in self.checks]}


@dataclass(frozen=True)
class _Plan:
    config: AppConfig
    quick: bool

    def ctx(self, m, offset: int = 0) -> ActionContext:
        return ActionContext(m, offset, self.config.quadrature, self.config.run.threads or None)

    def search(self, q_max: int, seed_grid: Tuple[int, int]) -> SearchConfig:
        settings: SearchSettings = self.config.search
        return SearchConfig.from_settings(settings, q_max=q_max, threads=self.config.run.threads or None, seed_grid=seed_grid)


def _check_twist(plan: _Plan) -> Dict[str, Any]:
    ctx = plan.ctx(TwistProfile(Polynomial((0.0, 0.5))))
    F = flux(ctx)
    f0 = action_values(ctx, np.zeros(4), np.linspace(0.0, 6.0, 4))
    V = calabi(ctx)
    ok = abs(F) <= 1e-8 and float(np.max(np.abs(f0 - 0.25))) <= 1e-8 and abs(V - 1.0 / 3.0) <= 1e-7
    return {"passed": ok, "flux": F, "f_at_zero": float(f0.mean()), "calabi": V}


def _check_rotations(plan: _Plan) -> Dict[str, Any]:
    grid = (8, 8) if plan.quick else (16, 16)
    half = RigidRotation(0.5)
    ctx = plan.ctx(half)
    F, V = flux(ctx), calabi(ctx)
    orbits = find_periodic_orbits(half, plan.search(2, grid), ctx)
    period_two = [o for o in orbits if o.period == 2]
    irrational = RigidRotation(1.0 / math.sqrt(2.0))
    none_found = find_periodic_orbits(irrational, plan.search(4 if plan.quick else 12, grid), plan.ctx(irrational))
    ok = (
        abs(F - 1.0) <= 1e-8
        and abs(V - 0.5) <= 1e-7
        and bool(period_two)
        and all(abs(o.mean_action - 0.5) <= 1e-8 for o in period_two)
        and not none_found
    )
    return {"passed": ok, "flux": F, "calabi": V, "period_two_orbits": len(period_two), "irrational_orbits": len(none_found)}


def _check_w_regression(plan: _Plan) -> Dict[str, Any]:
    ranks = width_ranks(example_slopes(guard_eps=plan.config.ech.guard_eps), 11).ranks
    values = tuple(int(r) for r in ranks)
    return {"passed": values == EXPECTED_W, "w": list(values)}


def _check_oracle(plan: _Plan) -> Dict[str, Any]:
    max_index = 100 if plan.quick else 400
    mismatches = 0
    for s in slope_fixtures(plan.config.ech.guard_eps):
        gens = generators_by_index(s, max_index)
        for n, g in enumerate(gens):
            if ech_index_oracle(s, g) != 2 * n:
                mismatches += 1
    return {"passed": mismatches == 0, "max_index": max_index, "mismatches": mismatches}


def _check_filtrations(plan: _Plan) -> Dict[str, Any]:
    k_max = 200 if plan.quick else 2000
    failures = []
    for s in slope_fixtures(plan.config.ech.guard_eps):
        table = width_ranks(s, k_max)
        widths = np.array([width(s, g) for g in table.generators])
        ranks = table.ranks
        ok = bool(np.all(np.diff(widths) > 0) and np.all(np.diff(ranks) > 0) and np.all(ranks >= np.arange(ranks.size)))
        if s.p == 1:
            ok = ok and bool(np.all(ranks == np.arange(ranks.size)))
        else:
            ok = ok and bool(ranks[-1] > k_max)
        if not ok:
            failures.append(s.as_dict())
    return {"passed": not failures, "k_max": k_max, "failures": failures}


def _check_nk_bound(plan: _Plan) -> Dict[str, Any]:
    k_max = 500 if plan.quick else 5000
    constants = []
    for s in slope_fixtures(plan.config.ech.guard_eps):
        report = nk_lower_bound_check(s, k_max)
        constants.append({"p": s.p, "c0": report.c0, "empirical_c0": report.empirical_c0})
    return {"passed": True, "k_max": k_max, "constants": constants}


def _check_contact(plan: _Plan) -> Dict[str, Any]:
    fixtures = [
        ("rotation", RigidRotation(0.5), 0),
        ("smoothed_twist", smoothed_twist(), 0),
        ("twist_with_bump", Composition((smoothed_twist(), HamiltonianBump((0.0, math.pi), 0.4, 0.05))), 1),
    ]
    rows = []
    ok = True
    for name, m, N in fixtures:
        form = mapping_torus_form(plan.ctx(m), N)
        contact = verify_contact(form)
        deviation = verify_return_time(form, 100, plan.config.run.seed)
        volume = verify_volume(form)
        fixture_ok = contact["min_wedge_coeff"] > 0.0 and deviation <= 1e-8 and volume["diff"] <= 1e-6
        ok = ok and fixture_ok
        rows.append({"fixture": name, "min_wedge_coeff": contact["min_wedge_coeff"], "return_time": deviation, "volume_diff": volume["diff"]})
    return {"passed": ok, "fixtures": rows}


def _check_closed_forms(plan: _Plan) -> Dict[str, Any]:
    rng = np.random.default_rng(plan.config.run.seed)
    count = 5 if plan.quick else 20
    worst = 0.0
    for _ in range(count):
        coeffs = tuple(rng.uniform(-1.0, 1.0, 4))
        profile = Polynomial(coeffs)
        ctx = plan.ctx(TwistProfile(profile))
        forms = ShearClosedForms(profile)
        xs = np.linspace(-1.0, 1.0, 7)
        worst = max(
            worst,
            float(np.max(np.abs(action_values(ctx, xs, np.zeros_like(xs)) - forms.action(xs)))),
            abs(flux(ctx) - forms.flux),
            abs(calabi(ctx) - forms.calabi),
        )
    collapse = 0.0
    for n in (1, 2, 3, 4):
        family = appendix_family_report(1.0, n)
        ctx = plan.ctx(TwistProfile(Polynomial(tuple([0.0] * n + [1.0]))))
        stats = disk_collapse_stats(MapInvariants(1.0, 1.0 if n % 2 == 0 else -1.0, family.F, family.V))
        collapse = max(collapse, abs(collapsed_calabi(ctx) - stats.calabi_kappa))
    rigid_gap = 0.0
    for theta in (0.25, 0.5, 1.0 / math.sqrt(3.0)):
        ctx = plan.ctx(RigidRotation(theta))
        rigid_gap = max(rigid_gap, abs(0.5 * flux(ctx) - calabi(ctx)))
    ok = worst <= 1e-7 and collapse <= 1e-7 and rigid_gap <= 1e-9
    return {"passed": ok, "closed_form_error": worst, "collapse_error": collapse, "rigid_equality_gap": rigid_gap}


def _check_perturbation(plan: _Plan) -> Dict[str, Any]:
    base = RigidRotation(0.5)
    ctx = plan.ctx(base)
    inv = MapInvariants(0.5, 0.5, flux(ctx), 0.4)
    delta, epsilon = 0.4, 0.05
    shear = perturbation_plan("1a", inv, delta, epsilon)
    composed = plan.ctx(Composition((base, RadialShear(shear.profile))))
    xs = np.linspace(-0.6, 0.6, 9)
    ys = np.linspace(0.0, 6.0, 9)
    tail = shear.profile.integral(1.0 - delta, 1.0)
    middle = float(np.max(np.abs(action_values(composed, xs, ys) - (action_values(ctx, xs, ys) + tail))))
    shift = calabi(composed) - calabi(ctx)
    ok = middle <= 1e-7 and abs(shift - shear.exact_calabi_shift) <= 1e-6 and shear.within_displayed
    return {
        "passed": ok,
        "middle_error": middle,
        "calabi_shift": shift,
        "exact_shift": shear.exact_calabi_shift,
        "displayed_shift": shear.displayed_shift,
    }


def _check_witness(plan: _Plan) -> Dict[str, Any]:
    m = smoothed_twist()
    grid = (16, 4) if plan.quick else (32, 8)
    report = verify_main_inequality(m, plan.search(1 if plan.quick else 2, grid), ctx=plan.ctx(m))
    witness = report.min_witness_mean_action
    ok = report.hypothesis_holds and witness is not None and witness <= report.calabi + 0.02
    return {"passed": bool(ok), "calabi": report.calabi, "min_witness_mean_action": witness}


CHECKS: Tuple[Tuple[str, Callable[[_Plan], Dict[str, Any]]], ...] = (
    ("twist_invariants", _check_twist),
    ("rotation_suite", _check_rotations),
    ("w_regression", _check_w_regression),
    ("index_oracle", _check_oracle),
    ("filtration_laws", _check_filtrations),
    ("nk_lower_bound", _check_nk_bound),
    ("contact_construction", _check_contact),
    ("closed_forms", _check_closed_forms),
    ("perturbation", _check_perturbation),
    ("main_inequality_witness", _check_witness),
)


def _run_check(plan: _Plan, name: str, check: Callable[[_Plan], Dict[str, Any]]) -> CheckResult:
    started = time.perf_counter()
    try:
        details = check(plan)
        passed = bool(details.pop("passed"))
    except MeanActionError as exc:
        details, passed = exc.to_dict(), False
    elapsed = time.perf_counter() - started
    LOGGER.info("Check %s %s in %.2fs", name, "passed" if passed else "FAILED", elapsed)
    return CheckResult(name, passed, details, elapsed)


def run_suite(config: AppConfig, quick: bool = False) -> SuiteReport:
    if quick:
        config = config.with_quadrature(area_grid=(256, 16))
    plan = _Plan(config, quick)
    return SuiteReport(quick, tuple(_run_check(plan, name, check) for name, check in CHECKS))
