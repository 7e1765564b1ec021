import math

import numpy as np
import pytest

from meanaction.action_calabi import (
    ActionContext,
    BumpField,
    OrbitRecord,
    ShearClosedForms,
    ZeroField,
    action_function,
    action_grid,
    action_values,
    boundary_values,
    calabi,
    calabi_independence_check,
    collapsed_calabi,
    flux,
    map_summary,
    mean_action,
    path_independence_check,
    power_map_scaling_check,
    shear_composition_action,
    total_action,
    with_actions,
)
from meanaction.annulus_maps import AnnulusPoint, Composition, HamiltonianBump, RadialShear, RigidRotation, TwistProfile
from meanaction.bounds import MapInvariants, appendix_family_report, disk_collapse_stats
from meanaction.config import QuadratureSettings
from meanaction.errors import DomainError
from meanaction.profiles import PiecewiseSmoothstep, Polynomial

QUICK = QuadratureSettings(area_grid=(128, 16))


def _ctx(m, offset=0):
    return ActionContext(m, offset, QUICK)


@pytest.fixture()
def smoothed_twist():
    return RadialShear(PiecewiseSmoothstep((-0.5, 0.5), (-0.9, 0.9)))


def test_twist_map_invariants():
    ctx = _ctx(TwistProfile(Polynomial((0.0, 0.5))))

    assert flux(ctx) == pytest.approx(0.0, abs=1e-8)
    assert action_values(ctx, np.zeros(4), np.linspace(0.0, 6.0, 4)) == pytest.approx(np.full(4, 0.25), abs=1e-8)
    assert calabi(ctx) == pytest.approx(1.0 / 3.0, abs=1e-7)


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0 / math.sqrt(2.0)])
def test_rigid_rotation_invariants(theta):
    ctx = _ctx(RigidRotation(theta))

    assert flux(ctx) == pytest.approx(2.0 * theta)
    assert action_function(ctx, AnnulusPoint(-0.3, 2.0)) == pytest.approx(theta)
    assert calabi(ctx) == pytest.approx(theta)


def test_offset_shifts_action_by_whole_turns():
    ctx = _ctx(RigidRotation(0.5))

    assert calabi(ctx.with_map(ctx.map, offset=2)) == pytest.approx(2.5)
    assert action_function(ctx.with_map(ctx.map, offset=-1), AnnulusPoint(0.0, 0.0)) == pytest.approx(-0.5)


def test_closed_forms_match_quadrature():
    profile = Polynomial((0.2, -0.4, 0.3, 0.7))
    ctx = _ctx(TwistProfile(profile))
    forms = ShearClosedForms(profile)
    xs = np.linspace(-1.0, 1.0, 9)

    assert action_values(ctx, xs, np.ones_like(xs)) == pytest.approx(forms.action(xs), abs=1e-9)
    assert flux(ctx) == pytest.approx(forms.flux, abs=1e-9)
    assert calabi(ctx) == pytest.approx(forms.calabi, abs=1e-7)


def test_boundary_values(smoothed_twist):
    report = boundary_values(_ctx(smoothed_twist))

    assert report["plus"] == pytest.approx(0.5)
    assert report["minus"] == pytest.approx(report["expected_minus"], abs=1e-9)
    assert report["max_deviation"] < 1e-9


def test_smoothed_twist_summary(smoothed_twist):
    summary = map_summary(_ctx(smoothed_twist))

    assert summary["flux"] == pytest.approx(0.0, abs=1e-9)
    assert summary["calabi"] == pytest.approx(ShearClosedForms(smoothed_twist.profile).calabi, abs=1e-7)
    assert float(action_values(_ctx(smoothed_twist), [0.0], [0.0])[0]) == pytest.approx(0.359375, abs=1e-8)


def test_path_independence_with_bump(smoothed_twist):
    m = Composition((smoothed_twist, HamiltonianBump((0.0, math.pi), 0.4, 0.05)))
    points = [AnnulusPoint(0.1, math.pi), AnnulusPoint(-0.2, 2.5), AnnulusPoint(0.6, 5.0)]

    assert path_independence_check(_ctx(m), points) < 1e-6


def test_calabi_independent_of_primitive(smoothed_twist):
    ctx = _ctx(smoothed_twist)
    orbit = OrbitRecord((AnnulusPoint(0.0, 1.0),), 1, 0, 0.0, 0.0, 0.0)
    report = calabi_independence_check(ctx, BumpField(0.0, 0.5, 0.2, 0.5), [orbit])

    assert report.diff < 1e-6
    assert report.total_action_diffs[0] < 1e-8


def test_correction_must_be_constant_on_boundary(smoothed_twist):
    with pytest.raises(DomainError):
        calabi_independence_check(_ctx(smoothed_twist), BumpField(0.9, 0.5, 0.1, 0.5))


def test_zero_field_changes_nothing(smoothed_twist):
    ctx = _ctx(smoothed_twist)

    assert action_grid(ctx, ZeroField()).omega_average() == pytest.approx(calabi(ctx))


def test_power_scaling_for_rotation():
    ctx = _ctx(RigidRotation(0.25))
    orbit = with_actions(ctx, OrbitRecord((AnnulusPoint(0.2, 0.0),) * 4, 4, 1, 0.0, 0.0, 0.0))
    report = power_map_scaling_check(ctx, 2, [orbit])

    assert orbit.mean_action == pytest.approx(0.25)
    assert report.ratio == pytest.approx(2.0)
    assert report.flux_power == pytest.approx(2.0 * report.flux)
    assert report.max_orbit_diff < 1e-9


def test_shear_composition_matches_direct_quadrature():
    base = RigidRotation(0.3)
    b = PiecewiseSmoothstep((0.0, 0.1), (0.4, 0.8))
    composed = _ctx(Composition((base, RadialShear(b))))
    xs = np.linspace(-0.9, 0.9, 5)
    ys = np.linspace(0.5, 5.5, 5)

    direct = action_values(composed, xs, ys)
    assert shear_composition_action(_ctx(base), b, xs, ys) == pytest.approx(direct, abs=1e-8)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_collapsed_calabi_matches_closed_form(n):
    family = appendix_family_report(1.0, n)
    ctx = _ctx(TwistProfile(Polynomial(tuple([0.0] * n + [1.0]))))
    stats = disk_collapse_stats(MapInvariants(1.0, 1.0 if n % 2 == 0 else -1.0, family.F, family.V))

    assert calabi(ctx) == pytest.approx(family.V, abs=1e-7)
    assert collapsed_calabi(ctx) == pytest.approx(stats.calabi_kappa, abs=1e-7)


def test_action_outside_annulus_rejected():
    with pytest.raises(DomainError):
        action_values(_ctx(RigidRotation(0.1)), [1.2], [0.0])


def test_total_and_mean_action_of_rotation_orbit():
    ctx = _ctx(RigidRotation(0.25), offset=1)
    points = tuple(AnnulusPoint(0.4, 0.5 * math.pi * i) for i in range(4))
    orbit = OrbitRecord(points, 4, 5, 0.0, 0.0, 0.0)

    assert total_action(ctx, orbit) == pytest.approx(5.0)
    assert mean_action(ctx, orbit) == pytest.approx(1.25)
