"""Manifold abstraction shared by every concrete geometry.

Points and tangent vectors are plain ``numpy`` arrays. Product manifolds use
:class:`ProductArray`, a tuple of arrays with elementwise vector-space
arithmetic, so solver code can write ``-g + beta * s * v`` for any geometry.

Invariant checks on produced points/tangents are off by default and enabled
with ``RCG_VALIDATE=1`` (or by setting :data:`VALIDATE`); the test suite turns
them on.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

VALIDATE = os.environ.get("RCG_VALIDATE", "0") not in ("", "0", "false", "no")

# tolerance ladder
CONSTRAINT_TOL = 1e-12
TANGENT_TOL = 1e-10
COMPARE_TOL = 1e-8


class GeometryError(ValueError):
    """Base error for contract violations on manifold operations."""


class ShapeMismatchError(GeometryError):
    pass


class SingularityError(GeometryError):
    """A matrix that must be inverted is numerically singular."""


class StepTooLongError(GeometryError):
    """The retraction is undefined (or leaves the manifold) for this step."""


class DomainError(GeometryError):
    pass


class InvariantViolation(GeometryError):
    """Raised by validation when a point or tangent breaks its constraint."""


KINDS = ("sphere", "stiefel", "grassmann", "spd", "euclidean", "product")


@dataclass(frozen=True)
class ShapeDescriptor:
    kind: str
    dims: tuple[int, ...] = ()
    components: tuple["ShapeDescriptor", ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        if any(int(d) <= 0 for d in self.dims):
            raise GeometryError(f"dims must be strictly positive, got {self.dims}")
        if self.kind in ("stiefel", "grassmann"):
            n, p = self.dims
            if p > n:
                raise GeometryError(f"{self.kind} requires p <= n, got n={n}, p={p}")
        if self.kind == "product" and len(self.components) < 2:
            raise GeometryError("product manifold needs at least two components")


class ProductArray(tuple):
    """Tuple of arrays behaving as a single vector."""

    # make numpy scalars defer to __rmul__ instead of building object arrays
    __array_ufunc__ = None

    def __new__(cls, parts):
        return super().__new__(cls, tuple(parts))

    def __add__(self, other):
        return ProductArray(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return ProductArray(a - b for a, b in zip(self, other))

    def __neg__(self):
        return ProductArray(-a for a in self)

    def __mul__(self, c):
        return ProductArray(c * a for a in self)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return ProductArray(a / c for a in self)

    def copy(self):
        return ProductArray(a.copy() for a in self)


class Geometry:
    """Metric, retraction, transports and gradient conversion for one manifold.

    Subclasses implement the abstract hooks; all operations are pure.
    """

    shape: ShapeDescriptor
    array_shape: tuple[int, ...]
    # transports available to :mod:`rcg.transports`
    supports_inverse_retraction = False
    shared_ambient_tangents = False

    def inner(self, x, xi, eta) -> float:
        raise NotImplementedError

    def norm(self, x, xi) -> float:
        return float(np.sqrt(max(self.inner(x, xi, xi), 0.0)))

    def proj(self, x, d):
        raise NotImplementedError

    def retract(self, x, eta):
        raise NotImplementedError

    def diff_retraction(self, x, eta, xi):
        """D R_x(eta)[xi], a tangent vector at R_x(eta)."""
        raise NotImplementedError

    def projection_transport(self, x, eta, xi):
        """Orthogonal projection of xi onto the tangent space at R_x(eta)."""
        return self.proj(self.retract(x, eta), xi)

    def inverse_retraction(self, x, y):
        raise GeometryError(f"no inverse retraction on {self.shape.kind}")

    def egrad2rgrad(self, x, egrad):
        return self.proj(x, egrad)

    def zero_vector(self, x):
        return np.zeros_like(x)

    def random_point(self, rng):
        raise NotImplementedError

    def random_tangent(self, x, rng):
        """Gaussian ambient sample projected to T_x and normalized."""
        v = self.proj(x, rng.standard_normal(np.shape(x)))
        return v / self.norm(x, v)

    # validation ---------------------------------------------------------
    def point_residual(self, x) -> float:
        raise NotImplementedError

    def tangent_residual(self, x, xi) -> float:
        raise NotImplementedError

    def check_point(self, x, tol=CONSTRAINT_TOL):
        self._check_shape(x)
        r = self.point_residual(x)
        if not r <= tol:
            raise InvariantViolation(f"{self.shape.kind}: point residual {r:.3e} > {tol:.0e}")

    def check_tangent(self, x, xi, tol=TANGENT_TOL):
        self._check_shape(xi)
        r = self.tangent_residual(x, xi)
        if not r <= tol:
            raise InvariantViolation(f"{self.shape.kind}: tangent residual {r:.3e} > {tol:.0e}")

    def _check_shape(self, a):
        expected = self.array_shape
        if np.shape(a) != expected:
            raise ShapeMismatchError(f"expected shape {expected}, got {np.shape(a)}")

    def _validated_point(self, x):
        if VALIDATE:
            self.check_point(x)
        return x

    def _validated_tangent(self, x, xi):
        if VALIDATE:
            self.check_tangent(x, xi)
        return xi


def inner(geometry: Geometry, x, xi, eta) -> float:
    return geometry.inner(x, xi, eta)


def norm(geometry: Geometry, x, xi) -> float:
    return geometry.norm(x, xi)


def project_to_tangent(geometry: Geometry, x, ambient):
    return geometry.proj(x, ambient)


class ProductGeometry(Geometry):
    """Cartesian product with componentwise operations and summed metric."""

    def __init__(self, geometries):
        geometries = list(geometries)
        if len(geometries) < 2:
            raise GeometryError("product_combine needs at least two geometries")
        self.components = tuple(geometries)
        self.shape = ShapeDescriptor("product", (), tuple(g.shape for g in geometries))
        self.supports_inverse_retraction = all(g.supports_inverse_retraction for g in geometries)
        self.shared_ambient_tangents = all(g.shared_ambient_tangents for g in geometries)

    def _split(self, *args):
        for a in args:
            if len(a) != len(self.components):
                raise ShapeMismatchError(
                    f"product of {len(self.components)} factors got {len(a)} parts")
        return zip(self.components, *args)

    def inner(self, x, xi, eta):
        return float(sum(g.inner(*a) for g, *a in self._split(x, xi, eta)))

    def proj(self, x, d):
        return ProductArray(g.proj(*a) for g, *a in self._split(x, d))

    def retract(self, x, eta):
        return ProductArray(g.retract(*a) for g, *a in self._split(x, eta))

    def diff_retraction(self, x, eta, xi):
        return ProductArray(g.diff_retraction(*a) for g, *a in self._split(x, eta, xi))

    def projection_transport(self, x, eta, xi):
        return ProductArray(g.projection_transport(*a) for g, *a in self._split(x, eta, xi))

    def inverse_retraction(self, x, y):
        return ProductArray(g.inverse_retraction(*a) for g, *a in self._split(x, y))

    def egrad2rgrad(self, x, egrad):
        return ProductArray(g.egrad2rgrad(*a) for g, *a in self._split(x, egrad))

    def zero_vector(self, x):
        return ProductArray(g.zero_vector(xc) for g, xc in self._split(x))

    def random_point(self, rng):
        return ProductArray(g.random_point(rng) for g in self.components)

    def random_tangent(self, x, rng):
        v = ProductArray(g.proj(xc, rng.standard_normal(np.shape(xc))) for g, xc in self._split(x))
        return v / self.norm(x, v)

    def point_residual(self, x):
        return max(g.point_residual(xc) for g, xc in self._split(x))

    def tangent_residual(self, x, xi):
        return max(g.tangent_residual(*a) for g, *a in self._split(x, xi))

    def _check_shape(self, a):
        for g, ac in self._split(a):
            g._check_shape(ac)


def product_combine(geometries) -> ProductGeometry:
    return ProductGeometry(geometries)
