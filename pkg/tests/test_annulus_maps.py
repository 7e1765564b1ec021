import json
import math

import numpy as np
import pytest

from meanaction.annulus_maps import (
    TWO_PI,
    AnnulusPoint,
    Composition,
    HamiltonianBump,
    LiftedMap,
    RadialShear,
    RigidRotation,
    TwistProfile,
    check_admissibility,
    evaluate_lift,
    iterate_lift,
    jacobian,
    power,
)
from meanaction.errors import DomainError, MapSpecError
from meanaction.mapspec import dump_map_spec, load_map_spec, map_from_spec
from meanaction.profiles import PiecewiseSmoothstep, Polynomial


@pytest.fixture()
def bump() -> HamiltonianBump:
    return HamiltonianBump((0.0, math.pi), 0.4, 0.05)


def test_point_outside_annulus_rejected():
    with pytest.raises(DomainError):
        AnnulusPoint(1.5, 0.0)
    with pytest.raises(DomainError):
        AnnulusPoint(0.0, float("nan"))


def test_rigid_rotation_and_power():
    rotation = RigidRotation(0.25)
    image = evaluate_lift(rotation, AnnulusPoint(0.3, 1.0))

    assert image.x == pytest.approx(0.3)
    assert image.y == pytest.approx(1.0 + 0.5 * math.pi)
    assert power(rotation, 4).y_plus == pytest.approx(1.0)
    assert rotation.admissible
    with pytest.raises(DomainError):
        power(rotation, 0)


def test_twist_boundary_values_and_jacobian():
    twist = TwistProfile(Polynomial((0.0, 0.5)))
    p = AnnulusPoint(0.5, 2.0)

    assert twist.y_plus == pytest.approx(0.5)
    assert twist.y_minus == pytest.approx(-0.5)
    assert not twist.admissible
    assert iterate_lift(twist, 3, p).y == pytest.approx(2.0 + 3 * 2.0 * math.pi * 0.25)
    assert jacobian(twist, p) == pytest.approx(np.array([[1.0, 0.0], [math.pi, 1.0]]))


class _Widening(LiftedMap):
    def apply(self, x, y):
        return 1.5 * np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def test_lift_leaving_annulus_rejected():
    assert evaluate_lift(_Widening(), AnnulusPoint(0.5, 1.0)).x == pytest.approx(0.75)
    with pytest.raises(DomainError):
        evaluate_lift(_Widening(), AnnulusPoint(0.9, 1.0))
    with pytest.raises(DomainError):
        iterate_lift(_Widening(), 2, AnnulusPoint(0.5, 1.0))


EVERY_KIND = [
    pytest.param(RigidRotation(0.3), id="rigid"),
    pytest.param(TwistProfile(Polynomial((0.1, 0.5, -0.2))), id="twist"),
    pytest.param(RadialShear(PiecewiseSmoothstep((0.0, 0.2), (0.2, 0.6))), id="radial_shear"),
    pytest.param(HamiltonianBump((0.0, math.pi), 0.4, 0.05), id="hamiltonian_bump"),
    pytest.param(
        Composition((RadialShear(PiecewiseSmoothstep((0.0, 0.2), (0.2, 0.6))), HamiltonianBump((0.1, 1.0), 0.3, 0.02))),
        id="composition",
    ),
]


@pytest.mark.slow
@pytest.mark.parametrize("m", EVERY_KIND)
def test_lift_commutes_with_deck_shift_and_preserves_area(m):
    rng = np.random.default_rng(11)
    x = rng.uniform(-1.0, 1.0, 1000)
    y = rng.uniform(0.0, TWO_PI, 1000)

    X, Y = m.apply(x, y)
    shifted_x, shifted_y = m.apply(x, y + TWO_PI)
    j00, j01, j10, j11 = m.jacobian_arrays(x, y)

    assert shifted_x == pytest.approx(X, abs=1e-10)
    assert shifted_y - Y == pytest.approx(np.full(1000, TWO_PI), abs=1e-10)
    assert np.max(np.abs(j00 * j11 - j01 * j10 - 1.0)) < 1e-6


def test_composition_flattens_and_inverts():
    shear = RadialShear(PiecewiseSmoothstep((0.0, 0.2), (0.2, 0.6)))
    inner = Composition((RigidRotation(0.1), shear))
    composed = Composition((inner, RigidRotation(0.3)))
    x = np.linspace(-1.0, 1.0, 7)
    y = np.linspace(0.0, 6.0, 7)

    X, Y = composed.apply(x, y)
    bx, by = composed.inverse().apply(X, Y)

    assert len(composed.maps) == 3
    assert composed.y_plus == pytest.approx(0.6)
    assert composed.y_minus == pytest.approx(0.4)
    assert bx == pytest.approx(x)
    assert by == pytest.approx(y)


def test_bump_fixes_points_outside_disk_and_preserves_area(bump):
    X, Y = bump.apply(np.array([0.9, -0.7]), np.array([1.0, 3.0]))

    assert X == pytest.approx([0.9, -0.7])
    assert Y == pytest.approx([1.0, 3.0])
    assert bump.collars == pytest.approx((0.6, 0.6))
    report = check_admissibility(bump, grid_n=20)
    assert report.area_defect_max < 1e-6
    assert report.boundary_rotation_verified
    assert report.area_defect_constant is not None


def test_bump_inverse_round_trip(bump):
    x = np.array([0.1, -0.2, 0.0])
    y = np.array([math.pi, math.pi + 0.1, math.pi - 0.25])

    X, Y = bump.apply(x, y)
    bx, by = bump.inverse().apply(X, Y)

    assert not np.allclose(X, x)
    assert bx == pytest.approx(x, abs=1e-10)
    assert by == pytest.approx(y, abs=1e-10)


def test_bump_disk_must_stay_inside():
    with pytest.raises(MapSpecError):
        HamiltonianBump((0.8, 0.0), 0.4, 0.1)


def test_admissibility_measures_collars():
    rigid = check_admissibility(RigidRotation(0.5), grid_n=10)
    twist = check_admissibility(TwistProfile(Polynomial((0.0, 0.5))), grid_n=10)

    assert rigid.admissible
    assert rigid.measured_collars == pytest.approx((1.0, 1.0))
    assert rigid.area_defect_max == pytest.approx(0.0)
    assert not twist.admissible
    assert twist.boundary_rotation_verified
    assert max(twist.measured_collars) < 1e-6


def test_admissibility_rejects_tiny_grid():
    with pytest.raises(DomainError):
        check_admissibility(RigidRotation(0.5), grid_n=1)


def test_map_spec_round_trip(tmp_path, bump):
    m = Composition((TwistProfile(PiecewiseSmoothstep((-0.5, 0.5), (-0.9, 0.9))), bump, RigidRotation(0.125)))
    path = tmp_path / "map.json"

    dump_map_spec(m, str(path))
    loaded = load_map_spec(str(path))

    assert loaded == m
    assert json.loads(path.read_text(encoding="utf-8"))["compose"][2] == {"kind": "rigid", "theta0": 0.125}


def test_map_spec_single_map_and_list():
    assert map_from_spec({"kind": "rigid", "theta0": 0.5}) == RigidRotation(0.5)
    assert map_from_spec([{"kind": "rigid", "theta0": 0.5}]) == Composition((RigidRotation(0.5),))


@pytest.mark.parametrize(
    "content",
    [
        "{not json",
        json.dumps({"kind": "spiral"}),
        json.dumps({"kind": "rigid"}),
        json.dumps({"kind": "twist", "profile": {"spline": []}}),
        json.dumps("rigid"),
    ],
)
def test_map_spec_errors(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content, encoding="utf-8")

    with pytest.raises(MapSpecError):
        load_map_spec(str(path))


def test_missing_map_spec(tmp_path):
    with pytest.raises(MapSpecError):
        load_map_spec(str(tmp_path / "absent.json"))
