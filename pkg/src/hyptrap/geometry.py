"""Hyperboloid-model geometry of H^d embedded in Minkowski space R^{1+d}.

Points live on the upper sheet {<z,z>_J = -1, z_0 >= 1} of the quadric for
the bilinear form J = diag(-1, 1, ..., 1).  All operations are pure; points
are re-normalized onto the sheet after every move to kill floating drift.

Scalar operations work on small wrapper types (HPoint, TangentVector,
Isometry); the `*_batch` helpers operate on (N, d+1) arrays and are what the
path samplers call in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHEET_TOL = 1e-8


class GeometryError(ValueError):
    """Raised when an input violates a hyperboloid-model invariant."""


def minkowski_dot(x, y):
    """Minkowski bilinear form -x_0 y_0 + sum_{i>=1} x_i y_i."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise GeometryError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if x.shape[-1] < 3:
        raise GeometryError("need ambient dimension d+1 >= 3 (d >= 2)")
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def minkowski_matrix(d):
    J = np.eye(d + 1)
    J[0, 0] = -1.0
    return J


def origin(d):
    """The base point o = e_0 of the upper sheet."""
    z = np.zeros(d + 1)
    z[0] = 1.0
    return HPoint(z)


def project_to_sheet(z):
    """Rescale z onto the sheet by dividing by sqrt(-<z,z>_J)."""
    q = minkowski_dot(z, z)
    if np.any(q >= 0):
        raise GeometryError("cannot project a non-timelike vector onto the sheet")
    return z / np.sqrt(-q)


@dataclass(frozen=True)
class HPoint:
    """A point on the upper sheet of the hyperboloid."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        object.__setattr__(self, "z", z)
        if z.ndim != 1 or z.shape[0] < 3:
            raise GeometryError("HPoint needs a flat coordinate array of length d+1 >= 3")
        if abs(minkowski_dot(z, z) + 1.0) > SHEET_TOL:
            raise GeometryError(f"point off the sheet: <z,z>_J = {minkowski_dot(z, z)}")
        if z[0] < 1.0 - SHEET_TOL:
            raise GeometryError("point not on the upper sheet (z_0 < 1)")

    @property
    def d(self):
        return self.z.shape[0] - 1


@dataclass(frozen=True)
class TangentVector:
    """A spacelike vector in the tangent space of `base`."""

    base: HPoint
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "v", v)
        if v.shape != self.base.z.shape:
            raise GeometryError("tangent vector and base point dimension mismatch")
        if abs(minkowski_dot(self.base.z, v)) > SHEET_TOL:
            raise GeometryError("vector not Minkowski-orthogonal to its base point")
        if minkowski_dot(v, v) < -SHEET_TOL:
            raise GeometryError("tangent vector must be spacelike")

    def norm(self):
        return float(np.sqrt(max(0.0, minkowski_dot(self.v, self.v))))


@dataclass(frozen=True)
class Isometry:
    """A J-orthogonal matrix preserving the upper sheet (A^T J A = J, det +1)."""

    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        n = A.shape[0]
        if A.shape != (n, n) or n < 3:
            raise GeometryError("Isometry must be a square (d+1)x(d+1) matrix, d >= 2")
        J = minkowski_matrix(n - 1)
        if np.max(np.abs(A.T @ J @ A - J)) > SHEET_TOL:
            raise GeometryError("matrix is not J-orthogonal")
        if A[0, 0] <= 0:
            raise GeometryError("matrix does not preserve the upper sheet")

    @property
    def d(self):
        return self.A.shape[0] - 1

    def inverse(self):
        # A^{-1} = J A^T J for J-orthogonal A
        J = minkowski_matrix(self.d)
        return Isometry(J @ self.A.T @ J)

    def compose(self, other: "Isometry") -> "Isometry":
        return Isometry(self.A @ other.A)


def distance(x: HPoint, y: HPoint) -> float:
    """Geodesic distance arccosh(-<x,y>_J)."""
    return float(np.arccosh(np.maximum(1.0, -minkowski_dot(x.z, y.z))))


def exp_map(t: TangentVector) -> HPoint:
    """Geodesic flow: follow the tangent vector for unit time."""
    n = t.norm()
    if n < 1e-12:
        return t.base
    z = np.cosh(n) * t.base.z + np.sinh(n) * (t.v / n)
    return HPoint(project_to_sheet(z))


def orthonormal_tangent_frame(x: HPoint):
    """Parallel transport of the canonical frame (e_1, ..., e_d) from o to x.

    f_i = e_i + x_i / (1 + x_0) * (x + e_0); deterministic, Minkowski-orthonormal.
    """
    d = x.d
    F = frame_batch(x.z[None, :])[0]
    return [TangentVector(x, F[i]) for i in range(d)]


def apply_isometry(g: Isometry, x: HPoint) -> HPoint:
    if g.d != x.d:
        raise GeometryError("isometry/point dimension mismatch")
    return HPoint(project_to_sheet(g.A @ x.z))


def push_tangent(g: Isometry, t: TangentVector) -> TangentVector:
    """Differential action dg on a tangent vector (just the matrix, dg = A)."""
    return TangentVector(apply_isometry(g, t.base), g.A @ t.v)


def boost_from_origin(x: HPoint) -> Isometry:
    """The canonical transvection g with g.o = x (rank-2 update of identity)."""
    z = x.z
    d = x.d
    e0 = np.zeros(d + 1)
    e0[0] = 1.0
    u = z + e0
    Ju = u.copy()
    Ju[0] = -Ju[0]
    Je0 = -e0
    A = np.eye(d + 1) + np.outer(u, Ju) / (1.0 + z[0]) - 2.0 * np.outer(z, Je0)
    return Isometry(A)


def boost_to_origin(x: HPoint) -> Isometry:
    """Deterministic transvection g with g.x = o (inverse of boost_from_origin)."""
    return boost_from_origin(x).inverse()


def rotation_to_axis(x: HPoint) -> Isometry:
    """A K-rotation (stabilizer of o, det +1) mapping x to (cosh r, sinh r, 0, ...).

    Planar rotation in span(u, e_1) of the spatial block; the identity when
    x is already on the positive e_1 axis or equals o.
    """
    d = x.d
    sp = x.z[1:]
    n = np.linalg.norm(sp)
    A = np.eye(d + 1)
    if n < 1e-14:
        return Isometry(A)
    u = sp / n
    e1 = np.zeros(d)
    e1[0] = 1.0
    c = float(u @ e1)
    p = u - c * e1
    s = np.linalg.norm(p)
    if s < 1e-14:
        if c > 0:
            return Isometry(A)
        # antipodal on the e_1 axis: rotate by pi in the (e_1, e_2) plane
        A[1, 1] = -1.0
        A[2, 2] = -1.0
        return Isometry(A)
    p /= s
    # rotation sending e_1 -> u in the (e_1, p) plane; we return its inverse
    R = np.eye(d) + (c - 1.0) * (np.outer(e1, e1) + np.outer(p, p)) + s * (
        np.outer(p, e1) - np.outer(e1, p)
    )
    A[1:, 1:] = R.T
    return Isometry(A)


# ---------------------------------------------------------------------------
# batched kernels (arrays of shape (N, d+1)); used by the path samplers
# ---------------------------------------------------------------------------


def sheet_defect_batch(X):
    """max |<z,z>_J + 1| over the batch."""
    X = np.asarray(X, dtype=float)
    q = -X[:, 0] ** 2 + np.sum(X[:, 1:] ** 2, axis=1)
    return float(np.max(np.abs(q + 1.0)))


def project_batch(X):
    q = X[:, 0] ** 2 - np.sum(X[:, 1:] ** 2, axis=1)
    return X / np.sqrt(q)[:, None]


def radius_batch(X):
    """Geodesic distance to o for each row."""
    return np.arccosh(np.maximum(1.0, X[:, 0]))


def distance_batch(X, Y):
    """Pairwise distances between rows of X (N, d+1) and rows of Y (m, d+1)."""
    inner = X[:, 0][:, None] * Y[:, 0][None, :] - X[:, 1:] @ Y[:, 1:].T
    return np.arccosh(np.maximum(1.0, inner))


def frame_batch(X):
    """Canonical orthonormal tangent frames, shape (N, d, d+1)."""
    N, dp1 = X.shape
    d = dp1 - 1
    F = np.zeros((N, d, dp1))
    u = X.copy()
    u[:, 0] += 1.0  # x + e_0
    coef = X[:, 1:] / (1.0 + X[:, 0])[:, None]  # x_i / (1 + x_0)
    for i in range(d):
        F[:, i, i + 1] = 1.0
        F[:, i, :] += coef[:, i][:, None] * u
    return F


def tangent_from_components(X, xi):
    """Map frame components xi (N, d) to ambient tangent vectors (N, d+1).

    Uses the canonical frame; the Minkowski norm of each output equals the
    Euclidean norm of the corresponding xi row.
    """
    coef = np.sum(xi * X[:, 1:], axis=1) / (1.0 + X[:, 0])
    V = np.empty_like(X)
    V[:, 0] = coef * (X[:, 0] + 1.0)
    V[:, 1:] = xi + coef[:, None] * X[:, 1:]
    return V


def exp_batch(X, V, norms):
    """exp_x(v) for each row; `norms` are the (exact) Minkowski norms of V."""
    n = np.asarray(norms)
    safe = np.maximum(n, 1e-300)
    out = np.cosh(n)[:, None] * X + np.sinh(n)[:, None] * (V / safe[:, None])
    small = n < 1e-12
    if np.any(small):
        out[small] = X[small]
    return project_batch(out)
