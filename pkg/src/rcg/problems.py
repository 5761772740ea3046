"""Objectives, seeded instance generators, and instance archive I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import DomainError, Geometry, ProductArray, product_combine
from .manifolds import GrassmannGeometry, SphereGeometry, SpdBwGeometry, qf, sym

PROBLEM_KINDS = ("rayleigh", "svd", "lyapunov")


@dataclass
class Problem:
    """Smooth cost on a manifold with its Euclidean gradient.

    The Riemannian gradient is always the geometry's conversion of
    ``euclidean_gradient``.
    """

    geometry: Geometry
    cost: Callable
    euclidean_gradient: Callable
    kind: str = "custom"
    data: dict = field(default_factory=dict)
    seed: int | None = None
    initial_point: object = None

    def gradient(self, x):
        return self.geometry.egrad2rgrad(x, self.euclidean_gradient(x))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.get("dims", ()))


def rayleigh_problem(a) -> Problem:
    """``f(x) = x^T A x`` on the unit sphere; minimum is the smallest eigenvalue."""
    a = np.asarray(a, dtype=float)
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise DomainError("rayleigh_problem needs a symmetric matrix")
    n = a.shape[0]
    return Problem(
        geometry=SphereGeometry(n),
        cost=lambda x: float(x @ a @ x),
        euclidean_gradient=lambda x: 2.0 * (a @ x),
        kind="rayleigh",
        data={"A": a, "dims": (n,)},
    )


def svd_problem(a, p: int) -> Problem:
    """``f([U], [V]) = -||U^T A V||_F^2 / 2`` on Grass(p, m) x Grass(p, n)."""
    a = np.asarray(a, dtype=float)
    m, n = a.shape
    if not 1 <= p <= min(m, n):
        raise DomainError(f"svd_problem needs 1 <= p <= min(m, n), got p={p}, A {m}x{n}")

    def cost(x):
        u, v = x
        return -0.5 * float(np.sum((u.T @ a @ v) ** 2))

    def egrad(x):
        u, v = x
        av = a @ v
        atu = a.T @ u
        return ProductArray((-av @ (av.T @ u), -atu @ (atu.T @ v)))

    geometry = product_combine([GrassmannGeometry(m, p), GrassmannGeometry(n, p)])
    return Problem(geometry, cost, egrad, kind="svd", data={"A": a, "p": p, "dims": (m, n, p)})


def lyapunov_problem(a, c) -> Problem:
    """``f(X) = tr(XAX) - tr(XC)`` on SPD(n) with the Bures-Wasserstein metric.

    Stationary points solve ``AX + XA = C``.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.linalg.eigvalsh(sym(a))[0] <= 0:
        raise DomainError("lyapunov_problem needs a positive definite A")
    n = a.shape[0]

    def cost(x):
        return float(np.sum((x @ a) * x.T) - np.sum(x * c.T))

    def egrad(x):
        ax = a @ x
        return ax + ax.T - c

    return Problem(SpdBwGeometry(n), cost, egrad, kind="lyapunov",
                   data={"A": a, "C": c, "dims": (n,)})


def _parse_dims(kind, dims):
    dims = tuple(int(d) for d in dims)
    expected = {"rayleigh": 1, "svd": 3, "lyapunov": 1}[kind]
    if len(dims) != expected or any(d <= 0 for d in dims):
        raise DomainError(f"{kind} expects {expected} positive dims, got {dims}")
    if kind == "svd" and dims[2] > min(dims[0], dims[1]):
        raise DomainError(f"svd needs p <= min(m, n), got {dims}")
    if kind == "rayleigh" and dims[0] < 2:
        raise DomainError("rayleigh needs n >= 2")
    return dims


def generate_instance(kind: str, dims, seed: int, spectrum=(1e-2, 1e2)) -> Problem:
    """Deterministic instance of one of the built-in problems.

    rayleigh: symmetric Gaussian A, random unit x0.
    svd: standard normal A (m x n), orthonormalized Gaussian U0, V0.
    lyapunov: A = Q diag(lam) Q^T with lam log-uniform on ``spectrum``;
    C = A X* + X* A for a planted PD X*; X0 = I.
    """
    if kind not in PROBLEM_KINDS:
        raise DomainError(f"unknown problem {kind!r}; expected one of {PROBLEM_KINDS}")
    dims = _parse_dims(kind, dims)
    rng = np.random.default_rng(seed)
    if kind == "rayleigh":
        (n,) = dims
        b = rng.standard_normal((n, n))
        problem = rayleigh_problem((b + b.T) / 2.0)
        problem.initial_point = problem.geometry.random_point(rng)
    elif kind == "svd":
        m, n, p = dims
        problem = svd_problem(rng.standard_normal((m, n)), p)
        problem.initial_point = ProductArray(
            (qf(rng.standard_normal((m, p)))[0], qf(rng.standard_normal((n, p)))[0]))
    else:
        (n,) = dims
        lo, hi = np.log10(spectrum[0]), np.log10(spectrum[1])
        q = qf(rng.standard_normal((n, n)))[0]
        lam = 10.0 ** rng.uniform(lo, hi, n)
        a = sym((q * lam) @ q.T)
        q2 = qf(rng.standard_normal((n, n)))[0]
        mu = 10.0 ** rng.uniform(0.0, 0.5, n)
        x_star = sym((q2 * mu) @ q2.T)
        ax = a @ x_star
        problem = lyapunov_problem(a, ax + ax.T)
        problem.data["X_star"] = x_star
        problem.initial_point = np.eye(n)
    problem.seed = seed
    problem.data["dims"] = dims
    return problem


# instance archive ----------------------------------------------------------
#
# little-endian layout:
#   magic b"RCGI", u32 version, u32 kind-name length, kind name (utf-8),
#   i64 seed (-1 when unseeded), u32 ndims, ndims * u64 dims, u32 nmatrices,
#   then per matrix: u32 name length, name, u64 rows, u64 cols,
#   rows*cols f64 in row-major order.

MAGIC = b"RCGI"
ARCHIVE_VERSION = 1


def _archive_matrices(problem: Problem):
    mats = {k: v for k, v in problem.data.items() if isinstance(v, np.ndarray)}
    x0 = problem.initial_point
    if isinstance(x0, ProductArray):
        for i, part in enumerate(x0):
            mats[f"x0_{i}"] = part
    elif x0 is not None:
        mats["x0"] = x0
    return mats


def write_instance(problem: Problem, path) -> None:
    out = bytearray(MAGIC)
    kind = problem.kind.encode()
    out += struct.pack("<II", ARCHIVE_VERSION, len(kind)) + kind
    out += struct.pack("<q", -1 if problem.seed is None else int(problem.seed))
    dims = problem.dims
    out += struct.pack(f"<I{len(dims)}Q", len(dims), *dims)
    mats = _archive_matrices(problem)
    out += struct.pack("<I", len(mats))
    for name, m in mats.items():
        m2 = np.atleast_2d(np.asarray(m, dtype="<f8"))
        if np.ndim(m) == 1:
            m2 = m2.reshape(-1, 1)
        key = name.encode()
        out += struct.pack("<I", len(key)) + key
        out += struct.pack("<QQ", *m2.shape)
        out += np.ascontiguousarray(m2).tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def read_instance(path) -> Problem:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not an instance archive")
    pos = 4

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, buf, pos)
        pos += struct.calcsize(fmt)
        return vals

    version, klen = take("<II")
    if version != ARCHIVE_VERSION:
        raise ValueError(f"{path}: unsupported archive version {version}")
    kind = buf[pos:pos + klen].decode()
    pos += klen
    (seed,) = take("<q")
    (ndims,) = take("<I")
    dims = take(f"<{ndims}Q")
    (nmat,) = take("<I")
    mats = {}
    for _ in range(nmat):
        (nlen,) = take("<I")
        name = buf[pos:pos + nlen].decode()
        pos += nlen
        rows, cols = take("<QQ")
        count = rows * cols
        mats[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(rows, cols).copy()
        pos += 8 * count

    if kind == "rayleigh":
        problem = rayleigh_problem(mats["A"])
        x0 = mats.get("x0")
        problem.initial_point = None if x0 is None else x0.ravel()
    elif kind == "svd":
        problem = svd_problem(mats["A"], int(dims[2]))
        if "x0_0" in mats:
            problem.initial_point = ProductArray((mats["x0_0"], mats["x0_1"]))
    elif kind == "lyapunov":
        problem = lyapunov_problem(mats["A"], mats["C"])
        if "X_star" in mats:
            problem.data["X_star"] = mats["X_star"]
        problem.initial_point = mats.get("x0")
    else:
        raise ValueError(f"{path}: unknown problem kind {kind!r}")
    problem.seed = None if seed < 0 else seed
    problem.data["dims"] = tuple(int(d) for d in dims)
    return problem
