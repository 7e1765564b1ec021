import math

import pytest

from meanaction.action_calabi import ActionContext
from meanaction.annulus_maps import RadialShear, RigidRotation, TwistProfile
from meanaction.config import NewtonSettings, QuadratureSettings, SearchSettings
from meanaction.errors import DomainError, NonAdmissibleMap
from meanaction.orbit_search import SearchConfig, find_periodic_orbits, search_periodic_orbits, verify_main_inequality
from meanaction.profiles import PiecewiseSmoothstep, Polynomial

QUICK = QuadratureSettings(area_grid=(128, 16))


@pytest.fixture()
def smoothed_twist():
    return RadialShear(PiecewiseSmoothstep((-0.5, 0.5), (-0.9, 0.9)))


def _search(q_max, seed_grid=(4, 4)):
    return SearchConfig(q_max=q_max, seed_grid=seed_grid, threads=1)


def test_half_rotation_has_period_two_family():
    m = RigidRotation(0.5)
    result = search_periodic_orbits(m, _search(2), ActionContext(m, 0, QUICK))

    assert result.orbits
    assert all(o.period == 2 and o.winding == 1 for o in result.orbits)
    assert all(o.mean_action == pytest.approx(0.5) for o in result.orbits)
    assert all(o.family_suspected for o in result.orbits)
    assert result.families == ((2, 1),)
    assert len(result.orbits) <= 4
    assert result.dropped_seeds > 0


def test_orbit_points_are_distinct_and_anchored():
    m = RigidRotation(0.5)
    orbit = find_periodic_orbits(m, _search(2), ActionContext(m, 0, QUICK))[0]

    first, second = orbit.points
    assert first.x == pytest.approx(second.x)
    assert abs(second.y - first.y) == pytest.approx(math.pi)
    assert orbit.residual <= 1e-11


def test_irrational_rotation_has_no_orbits():
    m = RigidRotation(1.0 / math.sqrt(2.0))

    assert find_periodic_orbits(m, _search(4), ActionContext(m, 0, QUICK)) == []


def test_smoothed_twist_fixed_circle(smoothed_twist):
    orbits = find_periodic_orbits(smoothed_twist, _search(1, (8, 4)), ActionContext(smoothed_twist, 0, QUICK))

    assert orbits
    for orbit in orbits:
        assert orbit.period == 1
        assert orbit.winding == 0
        assert orbit.points[0].x == pytest.approx(0.0, abs=1e-9)
        assert orbit.mean_action == pytest.approx(0.359375, abs=1e-8)


def test_main_inequality_witness(smoothed_twist):
    report = verify_main_inequality(smoothed_twist, _search(1, (8, 4)), ctx=ActionContext(smoothed_twist, 0, QUICK))
    payload = report.as_dict()

    assert report.hypothesis_holds
    assert report.inequality_holds
    assert report.min_witness_mean_action <= report.calabi
    assert payload["inf_mean_action"] == payload["min_witness_mean_action"]
    assert payload["witness_orbit"]["period"] == 1
    assert report.reverse_applicable


def test_main_inequality_needs_admissible_map():
    with pytest.raises(NonAdmissibleMap):
        verify_main_inequality(TwistProfile(Polynomial((0.0, 0.5))), _search(1))


def test_search_config_validation():
    with pytest.raises(DomainError):
        SearchConfig(q_max=0)
    with pytest.raises(DomainError):
        SearchConfig(dedupe_tol=1e-12, newton=NewtonSettings(tol=1e-11))


def test_search_config_from_settings_and_windings():
    cfg = SearchConfig.from_settings(SearchSettings(q_max=6, seed_grid=(10, 5)), q_max=2, threads=1)

    assert cfg.q_max == 2
    assert cfg.seed_grid == (10, 5)
    assert list(cfg.windings(RigidRotation(0.5), 2)) == [0, 1, 2]
    assert list(SearchConfig(winding_range=(3, 4)).windings(RigidRotation(0.5), 2)) == [3, 4]


def test_linear_twist_fixed_circle_has_action_one_quarter():
    m = TwistProfile(Polynomial((0.0, 0.5)))
    orbits = find_periodic_orbits(m, _search(1, (8, 4)), ActionContext(m, 0, QUICK))

    assert orbits
    for orbit in orbits:
        assert (orbit.period, orbit.winding) == (1, 0)
        assert orbit.points[0].x == pytest.approx(0.0, abs=1e-9)
        assert orbit.total_action == pytest.approx(0.25, abs=1e-8)
        assert orbit.mean_action == pytest.approx(0.25, abs=1e-8)
