"""Hyperboloid-model geometry: forms, distances, geodesics, isometries."""

import numpy as np
import pytest

from hyptrap import geometry
from hyptrap.geometry import (
    GeometryError,
    HPoint,
    Isometry,
    TangentVector,
    apply_isometry,
    boost_from_origin,
    boost_to_origin,
    distance,
    exp_map,
    minkowski_dot,
    minkowski_matrix,
    origin,
    orthonormal_tangent_frame,
    rotation_to_axis,
)


def random_point(d, rng, r_scale=3.0):
    r = r_scale * rng.uniform()
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    z = np.concatenate([[np.cosh(r)], np.sinh(r) * u])
    return HPoint(z)


def random_rotation(d, rng):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    A = np.eye(d + 1)
    A[1:, 1:] = q
    return Isometry(A)


class TestMinkowskiDot:
    def test_basis_vectors(self):
        e0 = np.array([1.0, 0.0, 0.0])
        e1 = np.array([0.0, 1.0, 0.0])
        assert minkowski_dot(e0, e0) == -1.0
        assert minkowski_dot(e1, e1) == 1.0
        assert minkowski_dot(e0, e1) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(GeometryError):
            minkowski_dot(np.zeros(3), np.zeros(4))

    def test_too_small(self):
        with pytest.raises(GeometryError):
            minkowski_dot(np.zeros(2), np.zeros(2))


class TestHPoint:
    def test_origin_on_sheet(self):
        o = origin(2)
        assert o.d == 2
        assert abs(minkowski_dot(o.z, o.z) + 1.0) < 1e-15

    def test_off_sheet_rejected(self):
        with pytest.raises(GeometryError):
            HPoint(np.array([1.0, 0.5, 0.0]))

    def test_lower_sheet_rejected(self):
        with pytest.raises(GeometryError):
            HPoint(np.array([-1.0, 0.0, 0.0]))


class TestDistance:
    def test_coincident(self):
        o = origin(2)
        assert distance(o, o) == 0.0

    def test_axis_point(self):
        x = HPoint(np.array([np.cosh(1.0), np.sinh(1.0), 0.0]))
        assert abs(distance(origin(2), x) - 1.0) < 1e-12

    def test_symmetry_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            x, y = random_point(3, rng), random_point(3, rng)
            assert abs(distance(x, y) - distance(y, x)) < 1e-12

    def test_triangle_inequality(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            x, y, z = (random_point(2, rng) for _ in range(3))
            assert distance(x, z) <= distance(x, y) + distance(y, z) + 1e-10


class TestExpMap:
    def test_zero_vector(self):
        o = origin(2)
        t = TangentVector(o, np.zeros(3))
        assert exp_map(t) is o

    def test_axis_geodesic(self):
        o = origin(3)
        for t in (0.3, 1.0, 5.0):
            v = np.array([0.0, t, 0.0, 0.0])
            y = exp_map(TangentVector(o, v))
            expected = np.array([np.cosh(t), np.sinh(t), 0.0, 0.0])
            assert np.allclose(y.z, expected, atol=1e-10)

    def test_sheet_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            x = random_point(2, rng)
            frame = orthonormal_tangent_frame(x)
            v = sum(c * f.v for c, f in zip(rng.standard_normal(2), frame))
            y = exp_map(TangentVector(x, v))
            assert abs(minkowski_dot(y.z, y.z) + 1.0) < 1e-10

    def test_distance_consistency(self):
        # radii kept below ~9 so the quadratic-form check in HPoint stays
        # meaningful: the ambient sheet constraint loses digits like e^{2r}
        rng = np.random.default_rng(3)
        for _ in range(200):
            x = random_point(2, rng, r_scale=1.0)
            frame = orthonormal_tangent_frame(x)
            c = rng.standard_normal(2)
            c *= rng.uniform(0, 8) / np.linalg.norm(c)
            v = sum(ci * f.v for ci, f in zip(c, frame))
            y = exp_map(TangentVector(x, v))
            assert abs(distance(x, y) - np.linalg.norm(c)) < 1e-9

    def test_timelike_rejected(self):
        with pytest.raises(GeometryError):
            TangentVector(origin(2), np.array([1.0, 0.0, 0.0]))


class TestTangentFrame:
    def test_canonical_at_origin(self):
        frame = orthonormal_tangent_frame(origin(2))
        assert np.allclose(frame[0].v, [0.0, 1.0, 0.0])
        assert np.allclose(frame[1].v, [0.0, 0.0, 1.0])

    def test_gram_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            x = random_point(3, rng)
            frame = orthonormal_tangent_frame(x)
            G = np.array([[minkowski_dot(a.v, b.v) for b in frame] for a in frame])
            assert np.max(np.abs(G - np.eye(3))) < 1e-10

    def test_pushes_to_canonical_frame(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = random_point(2, rng)
            g = boost_to_origin(x)
            frame = orthonormal_tangent_frame(x)
            for i, f in enumerate(frame):
                pushed = geometry.push_tangent(g, f)
                e = np.zeros(3)
                e[i + 1] = 1.0
                assert np.max(np.abs(pushed.v - e)) < 1e-8


class TestIsometry:
    def test_identity(self):
        rng = np.random.default_rng(6)
        x = random_point(2, rng)
        y = apply_isometry(Isometry(np.eye(3)), x)
        assert np.allclose(y.z, x.z)

    def test_boost_moves_origin(self):
        s = 1.7
        g = boost_from_origin(HPoint(np.array([np.cosh(s), np.sinh(s), 0.0])))
        y = apply_isometry(g, origin(2))
        assert np.allclose(y.z, [np.cosh(s), np.sinh(s), 0.0], atol=1e-12)

    def test_distance_preserved(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            g = boost_from_origin(random_point(2, rng)).compose(random_rotation(2, rng))
            x, y = random_point(2, rng), random_point(2, rng)
            d1 = distance(x, y)
            d2 = distance(apply_isometry(g, x), apply_isometry(g, y))
            assert abs(d1 - d2) < 1e-10

    def test_group_closure(self):
        rng = np.random.default_rng(8)
        J = minkowski_matrix(3)
        for _ in range(100):
            g = boost_from_origin(random_point(3, rng))
            k = random_rotation(3, rng)
            A = g.compose(k).A
            assert np.max(np.abs(A.T @ J @ A - J)) < 1e-9

    def test_inverse(self):
        rng = np.random.default_rng(9)
        g = boost_from_origin(random_point(2, rng))
        assert np.allclose(g.compose(g.inverse()).A, np.eye(3), atol=1e-12)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(GeometryError):
            Isometry(2.0 * np.eye(3))


class TestBoostToOrigin:
    def test_origin_gives_identity(self):
        g = boost_to_origin(origin(2))
        assert np.allclose(g.A, np.eye(3), atol=1e-12)

    def test_axis_boost(self):
        s = 0.9
        x = HPoint(np.array([np.cosh(s), np.sinh(s), 0.0]))
        y = apply_isometry(boost_to_origin(x), x)
        assert distance(y, origin(2)) < 1e-10

    def test_random_points(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            x = random_point(2, rng)
            y = apply_isometry(boost_to_origin(x), x)
            assert distance(y, origin(2)) < 1e-9


class TestRotationToAxis:
    def test_moves_point_to_axis(self):
        rng = np.random.default_rng(11)
        for d in (2, 3):
            for _ in range(200):
                x = random_point(d, rng)
                k = rotation_to_axis(x)
                y = apply_isometry(k, x)
                # first spatial coordinate carries all the radius
                assert y.z[1] >= -1e-12
                assert np.max(np.abs(y.z[2:])) < 1e-9
                assert abs(distance(origin(d), y) - distance(origin(d), x)) < 1e-10

    def test_fixes_origin(self):
        rng = np.random.default_rng(12)
        x = random_point(3, rng)
        k = rotation_to_axis(x)
        assert distance(apply_isometry(k, origin(3)), origin(3)) < 1e-12

    def test_antipodal_axis_point(self):
        x = HPoint(np.array([np.cosh(1.0), -np.sinh(1.0), 0.0]))
        y = apply_isometry(rotation_to_axis(x), x)
        assert abs(y.z[1] - np.sinh(1.0)) < 1e-12


class TestBatchedKernels:
    def test_radius_batch(self):
        rng = np.random.default_rng(13)
        pts = [random_point(2, rng) for _ in range(50)]
        X = np.array([p.z for p in pts])
        r = geometry.radius_batch(X)
        expected = [distance(origin(2), p) for p in pts]
        assert np.allclose(r, expected, atol=1e-10)

    def test_distance_batch_matches_scalar(self):
        rng = np.random.default_rng(14)
        xs = [random_point(3, rng) for _ in range(10)]
        ys = [random_point(3, rng) for _ in range(7)]
        D = geometry.distance_batch(np.array([p.z for p in xs]),
                                    np.array([p.z for p in ys]))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                assert abs(D[i, j] - distance(x, y)) < 1e-10

    def test_frame_batch_matches_scalar(self):
        rng = np.random.default_rng(15)
        pts = [random_point(2, rng) for _ in range(20)]
        F = geometry.frame_batch(np.array([p.z for p in pts]))
        for i, p in enumerate(pts):
            frame = orthonormal_tangent_frame(p)
            for k, f in enumerate(frame):
                assert np.allclose(F[i, k], f.v, atol=1e-12)

    def test_tangent_from_components_norm(self):
        rng = np.random.default_rng(16)
        pts = np.array([random_point(2, rng).z for _ in range(30)])
        xi = rng.standard_normal((30, 2))
        V = geometry.tangent_from_components(pts, xi)
        norms = np.sqrt(geometry.minkowski_dot(V, V))
        assert np.allclose(norms, np.linalg.norm(xi, axis=1), atol=1e-10)
