import math

import numpy as np
import pytest

from meanaction import contact_check
from meanaction.action_calabi import ActionContext, ShearClosedForms
from meanaction.annulus_maps import AnnulusPoint, RadialShear, RigidRotation
from meanaction.config import QuadratureSettings
from meanaction.contact_check import (
    EtaProfile,
    binding_rotation_numbers,
    build_eta,
    contact_report,
    mapping_torus_form,
    verify_contact,
    verify_dlambda,
    verify_gluing,
    verify_return_time,
    verify_volume,
)
from meanaction.errors import InfeasibleEta, NonIntegerP, RationalityGuardTripped
from meanaction.profiles import PiecewiseSmoothstep

QUICK = QuadratureSettings(area_grid=(128, 16))


@pytest.fixture()
def twist_ctx():
    return ActionContext(RadialShear(PiecewiseSmoothstep((-0.5, 0.5), (-0.9, 0.9))), 0, QUICK)


def test_eta_profile_endpoints():
    eta = EtaProfile.with_dip(0.3, -0.6)
    margins = eta.margins()

    assert eta.value(0.0) == pytest.approx(0.0)
    assert eta.value(1.0) == pytest.approx(0.0, abs=1e-12)
    assert eta.derivative_integral() == pytest.approx(0.0, abs=1e-12)
    assert eta.derivative(0.0) == pytest.approx(0.0)
    assert eta.derivative(1.0) == pytest.approx(1.0)
    assert margins["eta_prime_min"] == pytest.approx(-0.3, abs=1e-6)
    assert margins["lower_margin"] > 0.0
    assert eta.theta_a < eta.theta_b


def test_eta_profile_drift():
    eta = EtaProfile.with_dip(0.3, -0.6).broken(0.1)

    assert eta.value(1.0) == pytest.approx(0.1)
    assert eta.derivative_integral() == pytest.approx(0.1)


def test_eta_needs_positive_dip():
    with pytest.raises(InfeasibleEta):
        EtaProfile.with_dip(0.0, -0.5)


def test_rotation_contact_form():
    form = mapping_torus_form(ActionContext(RigidRotation(0.5), 0, QUICK))

    assert form.f_min == pytest.approx(0.5)
    assert form.eta.lower_bound == pytest.approx(-1.0)
    assert verify_contact(form)["min_wedge_coeff"] == pytest.approx(0.5)
    assert verify_return_time(form, 20) == pytest.approx(0.0, abs=1e-12)
    volume = verify_volume(form)
    assert volume["volume"] == pytest.approx(1.0)
    assert volume["diff"] < 1e-9


def test_negative_action_needs_offset():
    ctx = ActionContext(RigidRotation(-0.2), 0, QUICK)

    with pytest.raises(InfeasibleEta):
        mapping_torus_form(ctx)
    form = mapping_torus_form(ctx, N=1)
    assert form.f_min == pytest.approx(0.8)
    assert verify_volume(form)["two_calabi"] == pytest.approx(1.6)


def test_smoothed_twist_contact_checks(twist_ctx):
    form = mapping_torus_form(twist_ctx)

    assert form.f_min > 0.35
    assert verify_contact(form)["min_wedge_coeff"] > 0.0
    assert verify_return_time(form, 50, seed=3) <= 1e-8
    assert verify_return_time(form, [AnnulusPoint(0.2, 1.0), AnnulusPoint(-0.95, 4.0)]) <= 1e-8
    assert verify_volume(form)["diff"] <= 1e-6
    dlambda = verify_dlambda(form, 20)
    assert dlambda["theta_terms_max"] < 1e-5
    assert dlambda["area_term_deviation"] < 1e-5
    assert verify_gluing(form, 20) < 1e-12


def test_offset_raises_volume(twist_ctx):
    base = verify_volume(mapping_torus_form(twist_ctx))
    shifted = verify_volume(mapping_torus_form(twist_ctx, N=2))

    assert shifted["two_calabi"] == pytest.approx(base["two_calabi"] + 4.0)
    assert shifted["diff"] <= 1e-6


def test_volume_against_closed_form_calabi(twist_ctx):
    form = mapping_torus_form(twist_ctx)
    volume = verify_volume(form, calabi_reference=ShearClosedForms(form.map.profile).calabi)

    assert volume["diff"] <= 1e-6
    assert volume["wedge_deviation"] < 1e-6


def test_swept_data_matches_segment_integrals(twist_ctx):
    form = mapping_torus_form(twist_ctx)
    xs = np.linspace(-0.99, 0.99, 199)
    ys = np.array([0.5, 2.0])

    swept = form.swept_data(xs, ys)
    direct = form.point_data(swept.x, np.repeat(ys, xs.size))

    assert swept.f == pytest.approx(direct.f, abs=1e-7)
    assert swept.f_psi == pytest.approx(direct.f_psi, abs=1e-7)
    assert swept.fx == pytest.approx(direct.fx)


def test_volume_catches_wrong_action(monkeypatch, twist_ctx):
    form = mapping_torus_form(twist_ctx)
    action_sweep = contact_check.action_sweep
    monkeypatch.setattr(contact_check, "action_sweep", lambda ctx, xs, ys: action_sweep(ctx, xs, ys) + 0.1)

    volume = verify_volume(form)

    assert volume["volume"] - volume["two_calabi"] == pytest.approx(0.2, abs=1e-5)
    assert volume["diff"] > 1e-6


def test_dlambda_catches_wrong_action_derivative(monkeypatch, twist_ctx):
    form = mapping_torus_form(twist_ctx)
    action_values = contact_check.action_values
    monkeypatch.setattr(contact_check, "action_values", lambda ctx, xs, ys: action_values(ctx, xs, ys) + 0.1 * xs)

    dlambda = verify_dlambda(form, 20)

    assert dlambda["theta_terms_max"] > 0.05
    assert dlambda["area_term_deviation"] < 1e-5


def test_build_eta_uses_action_range(twist_ctx):
    eta = build_eta(twist_ctx)
    form = mapping_torus_form(twist_ctx)

    assert eta == form.eta
    assert eta.lower_bound == pytest.approx(-form.f_min / form.f_max)
    assert -eta.k > eta.lower_bound


def test_binding_rotation_numbers():
    a = math.sqrt(2.0)
    b = 3.0 - a
    numbers = binding_rotation_numbers(a, 0.0, b)

    assert numbers["rot_page"] == pytest.approx((1.0 / a, 1.0 / b))
    assert numbers["rot_seifert"] == pytest.approx((3.0 / a - 1.0, 3.0 / b - 1.0))
    assert numbers["rot_e"] == pytest.approx((1.0 / a - 1.0 / 3.0, 1.0 / b - 1.0 / 3.0))


def test_binding_rotation_numbers_guards():
    with pytest.raises(NonIntegerP):
        binding_rotation_numbers(1.2, 0.0, 1.3)
    with pytest.raises(RationalityGuardTripped):
        binding_rotation_numbers(0.5, 0.0, 1.5)


def test_contact_report_notes_rational_binding():
    report = contact_report(ActionContext(RigidRotation(0.5), 0, QUICK), samples=10)
    payload = report.as_dict()

    assert payload["binding_rotation_numbers"] is None
    assert payload["notes"]
    assert payload["contact"]["min_wedge_coeff"] > 0.0
    assert payload["gluing_deviation"] < 1e-12
