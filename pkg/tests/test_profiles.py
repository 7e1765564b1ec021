import numpy as np
import pytest
from scipy.integrate import trapezoid

from meanaction.errors import MapSpecError, QuadratureNotConverged
from meanaction.profiles import (
    Constant,
    PiecewiseSmoothstep,
    Polynomial,
    collar_step,
    profile_from_spec,
    smoothstep,
    smoothstep_integral,
    smoothstep_moment,
)
from meanaction.quadrature import area_rule, cumulative_from_right, gauss_legendre, line_integral


def test_smoothstep_endpoints_and_integrals():
    assert smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])) == pytest.approx([0.0, 0.0, 0.5, 1.0, 1.0])
    assert float(smoothstep_integral(1.0)) == pytest.approx(0.5)
    assert float(smoothstep_integral(3.0)) == pytest.approx(2.5)
    assert float(smoothstep_moment(1.0)) == pytest.approx(5.0 / 14.0)


def test_piecewise_smoothstep_matches_numerical_integrals():
    profile = PiecewiseSmoothstep((-0.5, 0.5), (-0.9, 0.9))
    xs = np.linspace(-1.0, 1.0, 20001)
    values = profile.value(xs)

    assert float(profile.value(0.0)) == pytest.approx(0.0, abs=1e-15)
    assert profile.integral(-1.0, 1.0) == pytest.approx(trapezoid(values, xs), abs=1e-7)
    assert profile.moment(-1.0, 1.0) == pytest.approx(trapezoid(xs * values, xs), abs=1e-7)
    assert float(profile.tail_integral(0.0)) == pytest.approx(profile.integral(0.0, 1.0))
    assert profile.flat_collars() == pytest.approx((0.1, 0.1))


def test_collar_step_integral_and_support():
    profile = collar_step(0.3, -0.2, 0.4)

    assert profile.plateaus == (0.3, 0.0, -0.2)
    assert profile.integral(-1.0, 1.0) == pytest.approx(0.5 * (0.3 * 0.4 - 0.2 * 0.4))
    assert profile.value(np.linspace(-0.7, 0.7, 11)) == pytest.approx(np.zeros(11))
    assert float(profile.value(1.0)) == pytest.approx(-0.2)


def test_collar_step_rejects_wide_collars():
    with pytest.raises(MapSpecError):
        collar_step(0.1, 0.1, 1.5)


def test_polynomial_profile_closed_forms():
    profile = Polynomial((0.0, 0.5))

    assert profile.integral(-1.0, 1.0) == pytest.approx(0.0)
    assert profile.moment(-1.0, 1.0) == pytest.approx(1.0 / 3.0)
    assert float(profile.tail_integral(0.0)) == pytest.approx(0.25)
    assert profile.flat_collars() == (0.0, 0.0)
    assert Polynomial((2.0,)).flat_collars() == (1.0, 1.0)


def test_profile_from_spec():
    assert profile_from_spec({"constant": 0.25}) == Constant(0.25)
    assert profile_from_spec({"polynomial": [0, 1]}) == Polynomial((0.0, 1.0))
    assert profile_from_spec({"plateaus": [0, 1], "knots": [-0.5, 0.5]}) == PiecewiseSmoothstep((0.0, 1.0), (-0.5, 0.5))
    spec = collar_step(0.1, 0.0, 0.2).to_spec()
    assert profile_from_spec(spec) == collar_step(0.1, 0.0, 0.2)


@pytest.mark.parametrize(
    "spec",
    [
        {"spline": [1, 2]},
        {"plateaus": [0, 1], "knots": [0.5]},
        {"plateaus": [0, 1], "knots": [0.5, 0.2]},
        {"plateaus": [0, 1], "knots": [0.5, 1.5]},
        [1, 2],
    ],
)
def test_profile_from_spec_rejects_bad_input(spec):
    with pytest.raises(MapSpecError):
        profile_from_spec(spec)


def test_gauss_legendre_on_unit_interval():
    nodes, weights = gauss_legendre(6)

    assert weights.sum() == pytest.approx(1.0)
    assert np.all((nodes > 0.0) & (nodes < 1.0))
    assert float(weights @ nodes**5) == pytest.approx(1.0 / 6.0)


def test_line_integral_of_simple_forms():
    def x_dx(x, y, dx, dy):
        return x * dx

    def x_dy(x, y, dx, dy):
        return x * dy

    assert line_integral(x_dx, ([0.0], [0.0]), ([1.0], [5.0])) == pytest.approx([0.5])
    assert line_integral(x_dy, ([1.0, -1.0], [0.0, 0.0]), ([1.0, -1.0], [3.0, 3.0])) == pytest.approx([3.0, -3.0])


def test_line_integral_reports_non_convergence():
    def jump(x, y, dx, dy):
        return np.where(x > 1.0 / 3.0, 1.0, 0.0) * dx

    with pytest.raises(QuadratureNotConverged):
        line_integral(jump, ([0.0], [0.0]), ([1.0], [0.0]), order=4, tol=1e-15, max_refinements=2)


def test_area_rules_integrate_polynomials():
    xs_simpson = area_rule("simpson", 128)
    xs_gauss = area_rule("gauss-legendre", 16)

    assert xs_simpson.nodes.size == 129
    assert xs_simpson.integrate(np.ones(129)) == pytest.approx(2.0)
    assert xs_simpson.integrate(xs_simpson.nodes**2) == pytest.approx(2.0 / 3.0)
    assert xs_gauss.integrate(xs_gauss.nodes**4) == pytest.approx(0.4)


def test_cumulative_from_right():
    tails = cumulative_from_right(lambda x, y: np.ones_like(x), np.linspace(-1.0, 1.0, 5), np.array([0.0, 1.0]), 4)

    assert tails.shape == (2, 5)
    assert tails[0] == pytest.approx([2.0, 1.5, 1.0, 0.5, 0.0])
