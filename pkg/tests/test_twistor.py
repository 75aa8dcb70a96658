"""Tests for services/twistor.py: complex structures, g_lambda and J^+- on the twistor space."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import FiberChartError, FiberTangentError, NonOrthonormalFrameError
from services.geometry import ChartCurve, ManifoldModel, metric_at, parallel_transport, reference_frame
from services.twistor import (
    J1,
    J2,
    J3,
    FiberChart,
    HermitianPack,
    TwistorPoint,
    TwistorTangent,
    chart_metric,
    equator_J,
    fiber_basis,
    horizontal_lift,
    kahler_form,
    kahler_split,
    kahler_matrix,
    pfaffian,
    realize_J,
    triple_coordinates,
    twistor_acs,
    twistor_geodesic,
    twistor_local,
    twistor_metric,
)

BASE = np.array([0.2, -0.1, 0.3, 0.05])


def _unit(rng, n=3):
    x = rng.normal(size=n)
    return x / np.linalg.norm(x)


def _random_tangent(rng, j):
    dj = rng.normal(size=3)
    return TwistorTangent(dx=rng.normal(size=4), dj=dj - (dj @ j) * j)


points = st.lists(st.floats(min_value=-0.6, max_value=0.6), min_size=4, max_size=4).map(np.array)
fibers = (
    st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=3, max_size=3)
    .map(np.array)
    .filter(lambda x: np.linalg.norm(x) > 0.2)
    .map(lambda x: x / np.linalg.norm(x))
)
lambdas = st.floats(min_value=0.3, max_value=3.0)
components = st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=6, max_size=6).map(np.array)


def _tangent(local, c):
    return TwistorTangent(dx=c[:4], dj=c[4] * local.t1 + c[5] * local.t2)


# ---------------------------------------------------------------------------
# The quaternionic triple
# ---------------------------------------------------------------------------

class TestTriple:
    def test_quaternion_relations(self):
        for J in (J1, J2, J3):
            np.testing.assert_array_equal(J @ J, -np.eye(4))
            np.testing.assert_array_equal(J.T, -J)
        np.testing.assert_array_equal(J2 @ J3, J1)
        np.testing.assert_array_equal(J3 @ J1, J2)

    def test_triple_coordinates(self):
        np.testing.assert_allclose(triple_coordinates(0.6 * J2 - 0.8 * J3), [0.0, 0.6, -0.8], atol=1e-15)

    def test_pfaffian_of_pole_form(self):
        # omega(e_a, e_b) = g(J1 e_a, e_b) is J1 transposed; omega_12 = omega_34 = 1
        assert pfaffian(J1.T) == 1.0


# ---------------------------------------------------------------------------
# Realized complex structures
# ---------------------------------------------------------------------------

class TestRealizeJ:
    def test_pole_is_the_reference_structure(self, flat):
        J = realize_J(flat, BASE, np.eye(4), [1.0, 0.0, 0.0])
        e = np.eye(4)
        np.testing.assert_allclose(J, np.column_stack([e[1], -e[0], e[3], -e[2]]), atol=1e-15)

    def test_squares_to_minus_identity(self, any_model):
        rng = np.random.default_rng(2)
        frame = reference_frame(any_model, BASE)
        for _ in range(10):
            J = realize_J(any_model, BASE, frame, _unit(rng))
            np.testing.assert_allclose(J @ J, -np.eye(4), atol=1e-12)

    def test_compatible_and_positive(self, any_model):
        rng = np.random.default_rng(3)
        frame = reference_frame(any_model, BASE)
        g = metric_at(any_model, BASE)
        for _ in range(10):
            J = realize_J(any_model, BASE, frame, _unit(rng))
            np.testing.assert_allclose(J.T @ g @ J, g, atol=1e-12)
            assert pfaffian(kahler_matrix(any_model, BASE, frame, J)) > 0

    def test_rejects_non_orthonormal_frame(self, sphere):
        with pytest.raises(NonOrthonormalFrameError):
            realize_J(sphere, BASE, np.eye(4), [1.0, 0.0, 0.0])

    def test_rejects_reversed_orientation(self, flat):
        frame = np.diag([1.0, 1.0, 1.0, -1.0])
        with pytest.raises(NonOrthonormalFrameError):
            realize_J(flat, BASE, frame, [1.0, 0.0, 0.0])


class TestEquatorJ:
    def test_theta_zero(self):
        J = equator_J(np.eye(4), 0.0)
        e = np.eye(4)
        np.testing.assert_allclose(J, np.column_stack([e[2], -e[3], -e[0], e[1]]), atol=1e-15)

    @pytest.mark.parametrize("theta", np.linspace(0.0, 2 * np.pi, 9))
    def test_anticommutes_with_pole(self, theta):
        J = equator_J(np.eye(4), theta)
        np.testing.assert_allclose(J @ J1 + J1 @ J, 0.0, atol=1e-15)

    @pytest.mark.parametrize("theta", np.linspace(0.0, 2 * np.pi, 9))
    def test_tangent_plane_to_normal_plane(self, theta):
        J = equator_J(np.eye(4), theta)
        np.testing.assert_allclose(J[:2, :2], 0.0, atol=1e-15)
        np.testing.assert_allclose(J[2:, 2:], 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# Horizontal lift and fiber charts
# ---------------------------------------------------------------------------

class TestHorizontalLift:
    def test_flat_has_no_fiber_motion(self, flat):
        tp = TwistorPoint(BASE, [0.0, 0.6, 0.8])
        assert not np.any(horizontal_lift(flat, tp, [1.0, 2.0, 3.0, 4.0]).dj)

    def test_sphere_origin(self, sphere):
        tp = TwistorPoint(np.zeros(4), [0.0, 0.6, 0.8])
        np.testing.assert_allclose(horizontal_lift(sphere, tp, [1.0, 0.0, 0.0, 0.0]).dj, 0.0, atol=1e-9)

    def test_tangent_to_the_fiber_sphere(self, cp2):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        lifted = horizontal_lift(cp2, tp, [0.3, -1.0, 0.2, 0.7])
        assert lifted.dj @ tp.fiber == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("kind", ["RoundS4", "FubiniStudyCP2"])
    def test_matches_transport_of_J(self, kind):
        model = ManifoldModel(kind)
        j = np.array([0.48, 0.6, 0.64])
        X = np.array([0.3, -1.0, 0.2, 0.7])
        tp = TwistorPoint(BASE, j)
        predicted = horizontal_lift(model, tp, X).dj
        frame = reference_frame(model, BASE)
        J = realize_J(model, BASE, frame, j)

        def moved(step):
            end = BASE + step * X
            transported = parallel_transport(model, ChartCurve.polyline([BASE, end]), frame, steps=32)
            # transported J, read in the reference frame at the end point
            J_end = transported @ np.linalg.solve(frame, J @ frame) @ np.linalg.inv(transported)
            end_frame = reference_frame(model, end)
            return triple_coordinates(np.linalg.inv(end_frame) @ J_end @ end_frame)

        assert np.linalg.norm(predicted) > 1e-3
        for step in (1e-2, 5e-3):
            central = (moved(step) - moved(-step)) / (2 * step)
            assert np.linalg.norm(central - predicted) < 1e-3


class TestFiberChart:
    def test_stereographic_round_trip(self):
        rng = np.random.default_rng(4)
        for pole in ("north", "south"):
            chart = FiberChart(pole)
            for _ in range(5):
                j = _unit(rng)
                if chart._s * j[2] > 0.9:
                    continue
                np.testing.assert_allclose(chart.to_sphere(chart.from_sphere(j)), j, atol=1e-12)

    def test_jacobian_matches_finite_differences(self):
        chart = FiberChart("south")
        zeta = np.array([0.3, -0.7])
        h = 1e-6
        fd = np.column_stack([(chart.to_sphere(zeta + h * e) - chart.to_sphere(zeta - h * e)) / (2 * h) for e in np.eye(2)])
        np.testing.assert_allclose(chart.jacobian(zeta), fd, atol=1e-8)

    def test_pole_is_excluded(self):
        with pytest.raises(FiberChartError):
            FiberChart("north").from_sphere(np.array([0.0, 0.0, 1.0]))

    def test_choose_and_facing(self):
        assert FiberChart.choose(np.array([0.0, 0.0, 1.0])).pole == "south"
        assert FiberChart.choose(np.array([1.0, 0.0, 0.0])).pole == "north"
        assert FiberChart.facing(np.array([0.6, 0.0, 0.8])).pole == "south"
        assert FiberChart.facing(np.array([0.6, 0.0, -0.8])).pole == "north"

    def test_fiber_basis_is_oriented(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            j = _unit(rng)
            t1, t2 = fiber_basis(j)
            assert t1 @ j == pytest.approx(0.0, abs=1e-14)
            np.testing.assert_allclose(np.cross(t1, t2), j, atol=1e-14)


# ---------------------------------------------------------------------------
# g_lambda and J^+-
# ---------------------------------------------------------------------------

class TestTwistorMetric:
    def test_flat_block_diagonal(self, flat):
        tp = TwistorPoint(BASE, [0.0, 0.6, 0.8])
        np.testing.assert_allclose(twistor_metric(HermitianPack(1.0), flat, tp), np.eye(6), atol=1e-15)

    def test_positive_definite(self, any_model):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        for lam in (0.5, 1.0, 2.0):
            assert np.linalg.eigvalsh(twistor_metric(HermitianPack(lam), any_model, tp))[0] > 0

    def test_lambda_scaling(self, cp2):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        local = twistor_local(cp2, tp)
        horizontal = horizontal_lift(cp2, tp, [1.0, 0.5, -0.2, 0.3])
        vertical = TwistorTangent(dx=np.zeros(4), dj=local.t1)
        assert local.g_lambda(2.0, horizontal, horizontal) == pytest.approx(local.g_lambda(1.0, horizontal, horizontal))
        assert np.sqrt(local.g_lambda(2.0, vertical, vertical)) == pytest.approx(0.5 * np.sqrt(local.g_lambda(1.0, vertical, vertical)))

    def test_chart_metric_agrees(self, sphere):
        j = np.array([0.48, 0.6, 0.64])
        chart = FiberChart.facing(j)
        zeta = chart.from_sphere(j)
        y = np.concatenate([BASE, zeta])
        local = twistor_local(sphere, TwistorPoint(BASE, j))
        jac = chart.jacobian(zeta)
        rng = np.random.default_rng(8)
        for _ in range(3):
            a, b = rng.normal(size=6), rng.normal(size=6)
            V = TwistorTangent(dx=a[:4], dj=jac @ a[4:])
            W = TwistorTangent(dx=b[:4], dj=jac @ b[4:])
            assert a @ chart_metric(sphere, chart, y, 1.5) @ b == pytest.approx(local.g_lambda(1.5, V, W), rel=1e-10, abs=1e-10)


class TestAlmostComplexStructures:
    @pytest.mark.parametrize("sign", [1, -1])
    def test_square_to_minus_identity(self, any_model, sign):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        J = twistor_acs(HermitianPack(1.0, sign), any_model, tp)
        np.testing.assert_allclose(J @ J, -np.eye(6), atol=1e-12)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_orthogonal_for_g_lambda(self, any_model, sign):
        rng = np.random.default_rng(9)
        for lam in (0.5, 2.0):
            pack = HermitianPack(lam, sign)
            tp = TwistorPoint(BASE, _unit(rng))
            g = twistor_metric(pack, any_model, tp)
            J = twistor_acs(pack, any_model, tp)
            np.testing.assert_allclose(J.T @ g @ J, g, atol=1e-10)

    def test_signs_agree_horizontally_and_differ_vertically(self, sphere):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        local = twistor_local(sphere, tp)
        horizontal = horizontal_lift(sphere, tp, [0.1, 0.2, 0.3, 0.4])
        vertical = TwistorTangent(dx=np.zeros(4), dj=local.t2)
        plus_h, minus_h = local.apply_acs(1, horizontal), local.apply_acs(-1, horizontal)
        np.testing.assert_allclose(plus_h.dx, minus_h.dx)
        np.testing.assert_allclose(plus_h.dj, minus_h.dj)
        plus_v, minus_v = local.apply_acs(1, vertical), local.apply_acs(-1, vertical)
        np.testing.assert_allclose(plus_v.dj, -minus_v.dj)

    def test_apply_acs_matches_matrix(self, cp2):
        rng = np.random.default_rng(10)
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        local = twistor_local(cp2, tp)
        V = _random_tangent(rng, tp.fiber)
        for sign in (1, -1):
            by_matrix = local.from_coords(local.acs6(sign) @ local.to_coords(V))
            direct = local.apply_acs(sign, V)
            np.testing.assert_allclose(by_matrix.dx, direct.dx, atol=1e-12)
            np.testing.assert_allclose(by_matrix.dj, direct.dj, atol=1e-12)


class TestKahlerForm:
    def test_antisymmetric(self, any_model):
        rng = np.random.default_rng(12)
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        V, W = _random_tangent(rng, tp.fiber), _random_tangent(rng, tp.fiber)
        for sign in (1, -1):
            pack = HermitianPack(0.7, sign)
            assert kahler_form(pack, any_model, tp, V, V) == pytest.approx(0.0, abs=1e-12)
            assert kahler_form(pack, any_model, tp, V, W) == pytest.approx(-kahler_form(pack, any_model, tp, W, V), abs=1e-12)

    def test_sum_of_signs_is_twice_the_horizontal_part(self, cp2):
        rng = np.random.default_rng(13)
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        local = twistor_local(cp2, tp)
        V, W = _random_tangent(rng, tp.fiber), _random_tangent(rng, tp.fiber)
        horizontal, _ = local.kahler_split(HermitianPack(1.3), V, W)
        total = kahler_form(HermitianPack(1.3, 1), cp2, tp, V, W) + kahler_form(HermitianPack(1.3, -1), cp2, tp, V, W)
        assert total == pytest.approx(2.0 * horizontal, abs=1e-12)

    def test_flat_horizontal_is_base_form(self, flat):
        tp = TwistorPoint(BASE, [0.0, 0.6, 0.8])
        V = TwistorTangent(dx=np.array([1.0, 0.0, 2.0, 0.0]), dj=np.zeros(3))
        W = TwistorTangent(dx=np.array([0.0, 1.0, 0.0, -1.0]), dj=np.zeros(3))
        J = realize_J(flat, BASE, np.eye(4), tp.fiber)
        for sign in (1, -1):
            assert kahler_form(HermitianPack(2.0, sign), flat, tp, V, W) == pytest.approx((J @ V.dx) @ W.dx)


class TestFiberVelocity:
    def test_radial_fiber_velocity_is_rejected(self, sphere):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        local = twistor_local(sphere, tp)
        V = TwistorTangent(dx=np.zeros(4), dj=local.t1 + 0.1 * tp.fiber)
        with pytest.raises(FiberTangentError):
            local.g_lambda(1.0, V, V)
        with pytest.raises(FiberTangentError):
            local.to_coords(V)
        with pytest.raises(FiberTangentError):
            twistor_geodesic(sphere, HermitianPack(1.0), tp, V, steps=4)

    def test_rounding_sized_leak_is_accepted(self, cp2):
        tp = TwistorPoint(BASE, [0.48, 0.6, 0.64])
        local = twistor_local(cp2, tp)
        V = TwistorTangent(dx=np.zeros(4), dj=local.t1 + 1e-10 * tp.fiber)
        assert local.g_lambda(1.0, V, V) == pytest.approx(1.0)


class TestPacks:
    def test_lambda_must_be_positive(self):
        with pytest.raises(ValueError):
            HermitianPack(0.0)

    def test_sign_must_be_unit(self):
        with pytest.raises(ValueError):
            HermitianPack(1.0, 2)

    def test_parse(self):
        assert HermitianPack.parse(2, "-") == HermitianPack(2.0, -1)
        assert HermitianPack.parse(2, "-").label == "-"

    def test_fiber_must_be_unit(self):
        with pytest.raises(ValueError):
            TwistorPoint(BASE, [1.0, 1.0, 0.0])


# ---------------------------------------------------------------------------
# Geodesics of g_lambda
# ---------------------------------------------------------------------------

@pytest.mark.slow
class TestFiberGeodesics:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_vertical_geodesics_stay_in_the_fiber(self, any_model, lam):
        tp = TwistorPoint(BASE, [0.6, 0.0, 0.8])
        local = twistor_local(any_model, tp)
        start = TwistorTangent(dx=np.zeros(4), dj=0.5 * local.t1)
        end = twistor_geodesic(any_model, HermitianPack(lam), tp, start, duration=1.0, steps=32)
        assert np.linalg.norm(end.base - BASE) < 1e-6


# ---------------------------------------------------------------------------
# Randomized invariants over points, fibers and lambda
# ---------------------------------------------------------------------------

class TestRandomTwistorSamples:
    @given(points, fibers, lambdas)
    @settings(max_examples=100, deadline=None)
    def test_structures_are_g_lambda_hermitian(self, any_model, x, j, lam):
        tp = TwistorPoint(x, j)
        for sign in (1, -1):
            pack = HermitianPack(lam, sign)
            g = twistor_metric(pack, any_model, tp)
            J = twistor_acs(pack, any_model, tp)
            assert np.linalg.eigvalsh(g)[0] > 0
            np.testing.assert_allclose(J @ J, -np.eye(6), atol=1e-10)
            np.testing.assert_allclose(J.T @ g @ J, g, atol=1e-9)

    @given(points, fibers, lambdas, components, components)
    @settings(max_examples=100, deadline=None)
    def test_kahler_forms_split_by_sign(self, any_model, x, j, lam, a, b):
        tp = TwistorPoint(x, j)
        local = twistor_local(any_model, tp)
        V, W = _tangent(local, a), _tangent(local, b)
        h_plus, v_plus = kahler_split(HermitianPack(lam, 1), any_model, tp, V, W)
        h_minus, v_minus = kahler_split(HermitianPack(lam, -1), any_model, tp, V, W)
        assert h_plus == pytest.approx(h_minus, abs=1e-10)
        assert v_plus == pytest.approx(-v_minus, abs=1e-10)
        for sign, expected in ((1, h_plus + v_plus), (-1, h_minus + v_minus)):
            pack = HermitianPack(lam, sign)
            g = twistor_metric(pack, any_model, tp)
            J = twistor_acs(pack, any_model, tp)
            by_matrix = local.to_coords(W) @ g @ J @ local.to_coords(V)
            assert by_matrix == pytest.approx(expected, abs=1e-9)
