"""Concrete geometries: sphere, Stiefel, Grassmann, SPD (Bures-Wasserstein), Euclidean."""

from __future__ import annotations

import numpy as np

from .geometry import (
    DomainError,
    Geometry,
    ShapeDescriptor,
    SingularityError,
    StepTooLongError,
)

# R_+ / Y^T(U + eta) condition number above which transports refuse to invert
MAX_CONDITION = 1e14
# smallest admissible eigenvalue of I + L_X(xi) in the SPD exponential
SPD_STEP_GUARD = 1e-12


def qf(a):
    """Q-factor of the thin QR decomposition with positive diagonal R.

    Returns ``(Q, R)`` with ``a = Q @ R``.
    """
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, r * signs[:, None]


def rho_skew(a):
    """Skew-symmetric matrix sharing the strictly lower triangle of ``a``."""
    low = np.tril(a, -1)
    return low - low.T


def sym(a):
    return 0.5 * (a + a.T)


def _guarded_solve_right(b, s):
    """b @ inv(s), refusing numerically singular s."""
    if np.linalg.cond(s) > MAX_CONDITION:
        raise SingularityError("matrix to invert is numerically singular")
    return np.linalg.solve(s.T, b.T).T


class SphereGeometry(Geometry):
    """Unit sphere S^{n-1} in R^n with the induced metric.

    Retraction ``R_x(eta) = (x + eta) / ||x + eta||``.
    """

    supports_inverse_retraction = True

    def __init__(self, n: int):
        if n < 2:
            raise DomainError("sphere needs n >= 2")
        self.n = n
        self.shape = ShapeDescriptor("sphere", (n,))
        self.array_shape = (n,)

    def inner(self, x, xi, eta):
        return float(np.dot(xi, eta))

    def proj(self, x, d):
        return self._validated_tangent(x, d - x * np.dot(x, d))

    def retract(self, x, eta):
        v = x + eta
        return self._validated_point(v / np.linalg.norm(v))

    def diff_retraction(self, x, eta, xi):
        v = x + eta
        nv = np.linalg.norm(v)
        y = v / nv
        return self._validated_tangent(y, (xi - y * np.dot(y, xi)) / nv)

    def projection_transport(self, x, eta, xi):
        y = self.retract(x, eta)
        return self._validated_tangent(y, xi - y * np.dot(y, xi))

    def inverse_retraction(self, x, y):
        c = float(np.dot(x, y))
        if c <= 0:
            raise DomainError("antipodal-hemisphere: inverse retraction needs x^T y > 0")
        return self._validated_tangent(x, y / c - x)

    def random_point(self, rng):
        v = rng.standard_normal(self.n)
        return v / np.linalg.norm(v)

    def point_residual(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def tangent_residual(self, x, xi):
        return abs(float(np.dot(x, xi))) / max(1.0, float(np.linalg.norm(xi)))


class StiefelGeometry(Geometry):
    """St(p, n) with the Euclidean metric and the QR retraction."""

    def __init__(self, n: int, p: int):
        self.shape = ShapeDescriptor("stiefel", (n, p))
        self.n, self.p = n, p
        self.array_shape = (n, p)

    def inner(self, x, xi, eta):
        return float(np.sum(xi * eta))

    def proj(self, x, d):
        return self._validated_tangent(x, d - x @ sym(x.T @ d))

    def retract(self, x, eta):
        return self._validated_point(qf(x + eta)[0])

    def diff_retraction(self, x, eta, xi):
        xp, rp = qf(x + eta)
        b = _guarded_solve_right(xi, rp)
        out = xp @ rho_skew(xp.T @ b) + b - xp @ (xp.T @ b)
        return self._validated_tangent(xp, out)

    def random_point(self, rng):
        return qf(rng.standard_normal((self.n, self.p)))[0]

    def point_residual(self, x):
        return float(np.linalg.norm(x.T @ x - np.eye(self.p)))

    def tangent_residual(self, x, xi):
        a = x.T @ xi
        return float(np.linalg.norm(a + a.T)) / max(1.0, float(np.linalg.norm(xi)))


class GrassmannGeometry(Geometry):
    """Grass(p, n) via orthonormal n-by-p representatives and horizontal lifts.

    Polar retraction ``(U + eta)(I + eta^T eta)^{-1/2}``.
    """

    def __init__(self, n: int, p: int):
        self.shape = ShapeDescriptor("grassmann", (n, p))
        self.n, self.p = n, p
        self.array_shape = (n, p)

    def inner(self, x, xi, eta):
        return float(np.sum(xi * eta))

    def proj(self, x, d):
        return self._validated_tangent(x, d - x @ (x.T @ d))

    def retract(self, x, eta):
        # polar factor of U + eta; equals the formula above for exact inputs
        # and does not let orthonormality errors accumulate
        v = x + eta
        w, q = np.linalg.eigh(v.T @ v)
        return self._validated_point(v @ ((q / np.sqrt(w)) @ q.T))

    def diff_retraction(self, x, eta, xi):
        y = self.retract(x, eta)
        h = xi - y @ (y.T @ xi)
        return self._validated_tangent(y, _guarded_solve_right(h, y.T @ (x + eta)))

    def projection_transport(self, x, eta, xi):
        y = self.retract(x, eta)
        return self._validated_tangent(y, xi - y @ (y.T @ xi))

    def random_point(self, rng):
        return qf(rng.standard_normal((self.n, self.p)))[0]

    def point_residual(self, x):
        return float(np.linalg.norm(x.T @ x - np.eye(self.p)))

    def tangent_residual(self, x, xi):
        return float(np.linalg.norm(x.T @ xi)) / max(1.0, float(np.linalg.norm(xi)))

    @staticmethod
    def same_subspace(u1, u2, tol=1e-10) -> bool:
        """Point equality on the quotient: projector distance within ``tol``."""
        return float(np.linalg.norm(u1 @ u1.T - u2 @ u2.T)) <= tol


def spd_lyapunov_operator(x, xi):
    """Solve ``L X + X L = xi`` for symmetric L in the eigenbasis of X."""
    w, q = np.linalg.eigh(x)
    if w[0] <= 0:
        raise DomainError("Lyapunov operator needs a positive definite base point")
    return _lyap_eig(w, q, xi)


def _lyap_eig(w, q, xi):
    lt = (q.T @ xi @ q) / (w[:, None] + w[None, :])
    return q @ lt @ q.T


class SpdBwGeometry(Geometry):
    """SPD(n) with the Bures-Wasserstein metric ``g_X(xi, eta) = tr(L_X(xi) eta) / 2``.

    Retraction is the exponential ``(I + L) X (I + L)`` with ``L = L_X(xi)``;
    every tangent space is Sym(n).
    """

    shared_ambient_tangents = True

    def __init__(self, n: int):
        self.shape = ShapeDescriptor("spd", (n,))
        self.n = n
        self.array_shape = (n, n)

    def lyapunov(self, x, xi):
        return spd_lyapunov_operator(x, xi)

    def inner(self, x, xi, eta):
        return 0.5 * float(np.sum(self.lyapunov(x, xi) * eta))

    def proj(self, x, d):
        return sym(d)

    def _step_factor(self, x, xi):
        m = np.eye(self.n) + self.lyapunov(x, xi)
        if np.linalg.eigvalsh(m)[0] <= SPD_STEP_GUARD:
            raise StepTooLongError("I + L_X(xi) is not positive definite; shrink the step")
        return m

    def retract(self, x, xi):
        m = self._step_factor(x, xi)
        y = sym(m @ x @ m)
        # I + L positive definite is not enough once rounding eats a tiny eigenvalue
        w = np.linalg.eigvalsh(y)
        if w[0] <= w[-1] / MAX_CONDITION:
            raise StepTooLongError("step leaves the positive definite cone numerically")
        return self._validated_point(y)

    def diff_retraction(self, x, eta, xi):
        m = self._step_factor(x, eta)
        a = self.lyapunov(x, xi) @ x @ m
        return a + a.T

    def projection_transport(self, x, eta, xi):
        return sym(xi)

    def egrad2rgrad(self, x, egrad):
        g = sym(egrad)
        a = g @ x
        return 2.0 * (a + a.T)

    def random_point(self, rng):
        w = rng.standard_normal((self.n, self.n))
        return sym(w @ w.T / self.n + np.eye(self.n))

    def random_tangent(self, x, rng):
        v = sym(rng.standard_normal((self.n, self.n)))
        return v / self.norm(x, v)

    def point_residual(self, x):
        asym = float(np.linalg.norm(x - x.T)) / max(1.0, float(np.linalg.norm(x)))
        if np.linalg.eigvalsh(sym(x))[0] <= 0:
            return np.inf
        return asym

    def tangent_residual(self, x, xi):
        return float(np.linalg.norm(xi - xi.T)) / max(1.0, float(np.linalg.norm(xi)))


class EuclideanGeometry(Geometry):
    """R^shape with the dot product, ``R_x(eta) = x + eta`` and identity transports."""

    supports_inverse_retraction = True
    shared_ambient_tangents = True

    def __init__(self, *shape: int):
        self.shape = ShapeDescriptor("euclidean", tuple(shape))
        self.array_shape = tuple(shape)

    def inner(self, x, xi, eta):
        return float(np.sum(xi * eta))

    def proj(self, x, d):
        return d

    def retract(self, x, eta):
        return x + eta

    def diff_retraction(self, x, eta, xi):
        return xi

    def projection_transport(self, x, eta, xi):
        return xi

    def inverse_retraction(self, x, y):
        return y - x

    def random_point(self, rng):
        return rng.standard_normal(self.array_shape)

    def point_residual(self, x):
        return 0.0

    def tangent_residual(self, x, xi):
        return 0.0
