"""Independent numerical checks: finite differences, metric compatibility,
dense reference solutions and transport-bound sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import ProductArray
from .manifolds import StiefelGeometry
from .transports import TransportRule, assumption34_ratio

FD_STEP = 1e-5

# exact norm of the differentiated QR transport in the O(3) counterexample
EXAMPLE21_EXACT = 200.0 * math.sqrt(42849907.0) / 530553.0
# maximum of (sqrt(1+t^2) - 1) / (t (1+t^2)) over t > 0
SPHERE_SHARP_CONSTANT = 4.0 * math.sqrt(2.0 / (349.0 + 85.0 * math.sqrt(17.0)))


def relative_error(a: float, b: float, floor: float = 1e-300) -> float:
    scale = max(abs(a), abs(b))
    if scale <= floor:
        return 0.0
    return abs(a - b) / scale


def fd_gradient_check(problem, x, trials: int = 10, h: float = FD_STEP, rng=None,
                      gradient=None) -> float:
    """Max relative gap between ``<grad f(x), eta>`` and a central difference
    of ``f(R_x(+-h eta))`` over random unit tangents.

    ``gradient`` overrides the problem's Riemannian gradient (for calibration).
    """
    rng = np.random.default_rng(rng)
    geometry = problem.geometry
    grad = (gradient or problem.gradient)(x)
    worst = 0.0
    for _ in range(trials):
        eta = geometry.random_tangent(x, rng)
        fd = (problem.cost(geometry.retract(x, eta * h))
              - problem.cost(geometry.retract(x, eta * -h))) / (2.0 * h)
        analytic = geometry.inner(x, grad, eta)
        worst = max(worst, relative_error(analytic, fd))
    return worst


def _bw_inner_sylvester(x, xi, eta):
    # L solves X L + L X = xi; independent of the eigenbasis solver
    lx = scipy.linalg.solve_sylvester(x, x, xi)
    return 0.5 * float(np.trace(lx @ eta))


def metric_compat_check(geometry, x, trials: int = 10, rng=None, conversion=None) -> float:
    """Max relative gap between ``g_X(conv(G), xi)`` and ``tr(G xi)`` for random
    symmetric ``G`` and ``xi``; the metric is evaluated through a Sylvester solve."""
    rng = np.random.default_rng(rng)
    conv = conversion or geometry.egrad2rgrad
    n = x.shape[0]
    worst = 0.0
    for _ in range(trials):
        g = rng.standard_normal((n, n))
        g = g + g.T
        xi = rng.standard_normal((n, n))
        xi = xi + xi.T
        lhs = _bw_inner_sylvester(x, conv(x, g), xi)
        rhs = float(np.trace(g @ xi))
        worst = max(worst, relative_error(lhs, rhs))
    return worst


@dataclass
class Reference:
    value: float
    point: object = None


def reference_solution(problem) -> Reference:
    """Dense-linear-algebra optimum for the built-in problems."""
    kind = problem.kind
    a = problem.data["A"]
    if kind == "rayleigh":
        w, v = np.linalg.eigh(a)
        return Reference(float(w[0]), v[:, 0])
    if kind == "svd":
        p = problem.data["p"]
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        return Reference(-0.5 * float(np.sum(s[:p] ** 2)), ProductArray((u[:, :p], vt[:p].T)))
    if kind == "lyapunov":
        c = problem.data["C"]
        lam, q = np.linalg.eigh(a)
        ct = q.T @ c @ q
        x = q @ (ct / (lam[:, None] + lam[None, :])) @ q.T
        x = 0.5 * (x + x.T)
        value = float(np.trace(x @ a @ x) - np.trace(x @ c))
        return Reference(value, x)
    raise ValueError(f"no reference solver for problem kind {kind!r}")


def lyapunov_residual(problem, x) -> float:
    a, c = problem.data["A"], problem.data["C"]
    return float(np.linalg.norm(a @ x + x @ a - c) / np.linalg.norm(c))


@dataclass
class SurveyResult:
    max_ratio: float
    worst_t: float
    worst_x: object
    worst_eta: object
    ratios: np.ndarray


def transport_bound_survey(geometry, rule: TransportRule, samples: int = 1000,
                           t_range=(0.0, 10.0), rng=None, form: str = "linear") -> SurveyResult:
    """Sample ``assumption34_ratio`` at random points and unit directions with
    step length ``t ||eta||`` drawn from the half-open interval ``(lo, hi]``."""
    rng = np.random.default_rng(rng)
    lo, hi = t_range
    ratios = np.empty(samples)
    worst = (-np.inf, None, None, None)
    for i in range(samples):
        x = geometry.random_point(rng)
        eta = geometry.random_tangent(x, rng)
        t = hi - rng.uniform(0.0, hi - lo)
        r = assumption34_ratio(rule, geometry, x, t, eta, form)
        ratios[i] = r
        if r > worst[0]:
            worst = (r, t, x, eta)
    return SurveyResult(worst[0], worst[1], worst[2], worst[3], ratios)


def sphere_projection_ratio_exact(tau: float) -> float:
    """Closed form of the sphere projection-transport ratio at step length ``tau``."""
    return (math.sqrt(1.0 + tau * tau) - 1.0) / (tau * (1.0 + tau * tau))


def example21_norm() -> float:
    """Norm of the differentiated QR transport of eta at R_I(0.1 eta) on O(3)."""
    geometry = StiefelGeometry(3, 3)
    eta = np.array([[0.0, -1.0, -1.0], [1.0, 0.0, -1.0], [1.0, 1.0, 0.0]])
    x = np.eye(3)
    t = 0.1
    carried = geometry.diff_retraction(x, t * eta, eta)
    return geometry.norm(geometry.retract(x, t * eta), carried)


# (label, beta, line-search mode, c3) for each monitored theorem regime
REGIME_RUNS = (
    ("fr strong-wolfe", "fr", "strong-wolfe", 1000.0),
    ("dy wolfe", "dy", "wolfe", 1000.0),
    ("dy generalized-wolfe", "dy", "generalized-wolfe", 1000.0),
    ("cd generalized-wolfe c3=0", "cd", "generalized-wolfe", 0.0),
    ("prp-fr strong-wolfe", "prp-fr", "strong-wolfe", 1000.0),
    ("hs-dy wolfe", "hs-dy", "wolfe", 1000.0),
    ("ls-cd generalized-wolfe c3=0", "ls-cd", "generalized-wolfe", 0.0),
)


def invariant_suite(seed: int = 0, max_iters: int = 500, tol: float = 1e-6,
                    rules=("diff-retraction",)):
    """Monitored runs on a sphere and a Grassmann-product instance, one per regime.

    The differentiated retraction is the default rule because it is the one for
    which every Wolfe-type step is known to exist. Yields ``(label, trace)``.
    """
    from .linesearch import LineSearchConfig
    from .problems import generate_instance
    from .solver import SolverConfig, solve

    instances = (("rayleigh n=100", generate_instance("rayleigh", (100,), seed)),
                 ("svd 50,30,5", generate_instance("svd", (50, 30, 5), seed)))
    for name, problem in instances:
        for label, beta, mode, c3 in REGIME_RUNS:
            for rule in rules:
                cfg = SolverConfig(beta=beta, transport=TransportRule(rule),
                                   linesearch=LineSearchConfig(c2=0.1, c3=c3, mode=mode),
                                   tol=tol, max_iters=max_iters)
                yield f"{name} {label} {rule}", solve(problem, problem.initial_point, cfg)
