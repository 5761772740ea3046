"""Step-length selection along ``t -> R_x(t eta)``.

``search_armijo`` backtracks for sufficient decrease only. ``search_twolfe``
brackets and bisects for Armijo plus a curvature condition in which the
derivative of the retraction curve is replaced by the transported direction
(the "surrogate slope"); with the differentiated-retraction rule the
surrogate is exactly the derivative of ``phi(t) = f(R_x(t eta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import StepTooLongError
from .transports import TransportRule, transport

MODES = ("armijo", "wolfe", "strong-wolfe", "generalized-wolfe")

ARMIJO = "armijo"
TWOLFE = "twolfe"
STRONG_TWOLFE = "strong_twolfe"
GENERALIZED_TWOLFE = "generalized_twolfe"

# relative size of cost differences treated as rounding noise when comparing
# two trial points inside the bracket
COST_NOISE = 1e-13

# condition each mode must certify on top of Armijo
REQUIRED_FLAG = {"wolfe": TWOLFE, "strong-wolfe": STRONG_TWOLFE, "generalized-wolfe": GENERALIZED_TWOLFE}


class LineSearchError(RuntimeError):
    """No step satisfying the Armijo condition was found within budget."""


@dataclass(frozen=True)
class LineSearchConfig:
    c1: float = 1e-4
    c2: float = 0.1
    c3: float = 1000.0
    mode: str = "armijo"
    t_init: float = 1.0
    max_evals: int = 60
    contraction: float = 0.5
    expansion: float = 2.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown line-search mode {self.mode!r}; expected one of {MODES}")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if not self.c3 >= 0:
            raise ValueError(f"need c3 >= 0, got {self.c3}")
        if not self.t_init > 0:
            raise ValueError("t_init must be positive")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")


@dataclass
class CertifiedStep:
    t: float
    f0: float
    f_new: float
    slope0: float
    slope_t_surrogate: float | None
    certified: frozenset = field(default_factory=frozenset)
    evals: int = 0
    x_new: object = None
    grad_new: object = None
    transported: object = None


def certify(config: LineSearchConfig, t, f0, f_new, slope0, surrogate) -> frozenset:
    """Every condition that holds for the given quantities."""
    flags = set()
    if f_new - f0 <= config.c1 * t * slope0:
        flags.add(ARMIJO)
    if surrogate is not None:
        if surrogate >= config.c2 * slope0:
            flags.add(TWOLFE)
        if abs(surrogate) <= config.c2 * abs(slope0):
            flags.add(STRONG_TWOLFE)
        if config.c2 * slope0 <= surrogate <= -config.c3 * slope0:
            flags.add(GENERALIZED_TWOLFE)
    return frozenset(flags)


def slope_surrogate(geometry, rule: TransportRule, problem, x, eta, t, x_new=None, grad_new=None):
    """``<grad f(R_x(t eta)), T(eta)>`` at ``R_x(t eta)``.

    Returns ``(value, transported_eta)``.
    """
    if x_new is None:
        x_new = geometry.retract(x, t * eta)
    if grad_new is None:
        grad_new = problem.gradient(x_new)
    if t == 0:
        carried = eta
    else:
        carried = transport(rule, geometry, x, t, eta, eta, x_new=x_new)
    return geometry.inner(x_new, grad_new, carried), carried


def search_armijo(problem, x, eta, config: LineSearchConfig, f0=None, slope0=None,
                  grad0=None) -> CertifiedStep:
    """Backtrack ``t_init * contraction**j`` until sufficient decrease holds."""
    geometry = problem.geometry
    if f0 is None:
        f0 = problem.cost(x)
    if slope0 is None:
        grad0 = problem.gradient(x) if grad0 is None else grad0
        slope0 = geometry.inner(x, grad0, eta)
    t = config.t_init
    for evals in range(1, config.max_evals + 1):
        try:
            x_new = geometry.retract(x, t * eta)
            f_new = problem.cost(x_new)
        except StepTooLongError:
            t *= config.contraction
            continue
        if f_new - f0 <= config.c1 * t * slope0:
            return CertifiedStep(t, f0, f_new, slope0, None, frozenset({ARMIJO}), evals, x_new)
        t *= config.contraction
    raise LineSearchError(
        f"no step satisfying the Armijo condition within {config.max_evals} evaluations")


def search_twolfe(problem, x, eta, config: LineSearchConfig, rule: TransportRule,
                  f0=None, slope0=None, grad0=None) -> CertifiedStep:
    """Bracket/bisection search for Armijo plus the mode's curvature condition.

    If the budget runs out, the best Armijo point seen is returned with only
    the flags that actually hold.
    """
    if config.mode == "armijo":
        return search_armijo(problem, x, eta, config, f0, slope0, grad0)
    geometry = problem.geometry
    if f0 is None:
        f0 = problem.cost(x)
    if slope0 is None:
        grad0 = problem.gradient(x) if grad0 is None else grad0
        slope0 = geometry.inner(x, grad0, eta)
    lower = config.c2 * slope0
    if config.mode == "wolfe":
        upper = math.inf
    elif config.mode == "strong-wolfe":
        upper = -config.c2 * slope0
    else:
        upper = -config.c3 * slope0

    evals = 0
    best = None

    def evaluate(t):
        nonlocal evals, best
        evals += 1
        try:
            x_new = geometry.retract(x, t * eta)
            f_new = problem.cost(x_new)
        except StepTooLongError:
            return None
        if not f_new - f0 <= config.c1 * t * slope0:
            return (t, f_new, x_new, None, None, None)
        grad_new = problem.gradient(x_new)
        s, carried = slope_surrogate(geometry, rule, problem, x, eta, t, x_new, grad_new)
        point = (t, f_new, x_new, grad_new, s, carried)
        if best is None or f_new < best[1]:
            best = point
        return point

    def finish(point):
        t, f_new, x_new, grad_new, s, carried = point
        flags = certify(config, t, f0, f_new, slope0, s)
        return CertifiedStep(t, f0, f_new, slope0, s, flags, evals, x_new, grad_new, carried)

    def armijo_ok(point):
        return point is not None and point[4] is not None

    def worse(point, ref):
        return point[1] - ref[1] > COST_NOISE * max(1.0, abs(ref[1]))

    def zoom(lo, hi_t):
        # lo: Armijo point whose surrogate is still below the window (or t = 0);
        # hi_t: failed Armijo, no decrease over lo, or surrogate above the window
        while evals < config.max_evals:
            t = 0.5 * (lo[0] + hi_t)
            point = evaluate(t)
            if not armijo_ok(point) or worse(point, lo):
                hi_t = t
            elif point[4] < lower:
                lo = point
            elif point[4] > upper:
                hi_t = t
            else:
                return finish(point)
        return None

    start = (0.0, f0, x, None, slope0, eta)
    prev = start
    t = config.t_init
    step = None
    while evals < config.max_evals:
        point = evaluate(t)
        if not armijo_ok(point) or worse(point, prev) or point[4] > upper:
            step = zoom(prev, t)
            break
        if point[4] >= lower:
            return finish(point)
        prev = point
        t *= config.expansion
    if step is not None:
        return step
    if best is None:
        raise LineSearchError(
            f"no step satisfying the Armijo condition within {config.max_evals} evaluations")
    return finish(best)
