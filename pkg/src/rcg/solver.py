"""Riemannian conjugate-gradient iteration with pluggable beta, transport and scaling.

Each iteration takes a certified step ``x+ = R_x(t eta)``, carries the old
direction over with the configured transport rule, scales it by ``s`` and
forms ``eta+ = -grad f(x+) + beta * s * T(eta)``.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .linesearch import (
    ARMIJO,
    REQUIRED_FLAG,
    LineSearchConfig,
    LineSearchError,
    search_armijo,
    search_twolfe,
)
from .monitor import InvariantMonitor, MonitorReport
from .transports import (
    ConfigurationError,
    DegenerateDirectionError,
    ScalingPolicy,
    TransportRule,
    scale_factor,
    transport,
)

BETA_KINDS = ("sd", "fr", "dy", "cd", "prp", "hs", "ls", "prp-fr", "hs-dy", "ls-cd")
STANDARD_BETAS = ("fr", "dy", "cd", "prp", "hs", "ls")
# hybrid -> (aggressive, conservative)
HYBRIDS = {"prp-fr": ("prp", "fr"), "hs-dy": ("hs", "dy"), "ls-cd": ("ls", "cd")}
# denominators at or below this magnitude count as zero
DENOMINATOR_FLOOR = 1e-300


class BetaUndefinedError(ArithmeticError):
    pass


@dataclass(frozen=True)
class BetaInputs:
    """Scalars every beta formula is built from (new = k+1, old = k)."""

    grad_sq_new: float
    grad_sq_old: float
    dir_deriv_old: float  # <g_k, eta_k>
    grad_dot_transported: float  # <g_{k+1}, s_k T(eta_k)>
    grad_dot_grad_transported: float = 0.0  # <g_{k+1}, l_k S(g_k)>


def _ratio(num, den):
    if abs(den) <= DENOMINATOR_FLOOR:
        return None
    return num / den


def beta_candidates(inp: BetaInputs) -> dict:
    """All six standard values; ``None`` where the denominator vanishes."""
    dy_den = inp.grad_dot_transported - inp.dir_deriv_old
    diff_num = inp.grad_sq_new - inp.grad_dot_grad_transported
    return {
        "fr": _ratio(inp.grad_sq_new, inp.grad_sq_old),
        "dy": _ratio(inp.grad_sq_new, dy_den),
        "cd": _ratio(inp.grad_sq_new, -inp.dir_deriv_old),
        "prp": _ratio(diff_num, inp.grad_sq_old),
        "hs": _ratio(diff_num, dy_den),
        "ls": _ratio(diff_num, -inp.dir_deriv_old),
    }


def compute_beta(rule: str, inp: BetaInputs, candidates: dict | None = None) -> float:
    if rule not in BETA_KINDS:
        raise ConfigurationError(f"unknown beta rule {rule!r}; expected one of {BETA_KINDS}")
    if rule == "sd":
        return 0.0
    cands = beta_candidates(inp) if candidates is None else candidates
    parts = HYBRIDS.get(rule, (rule,))
    values = [cands[p] for p in parts]
    if any(v is None for v in values):
        raise BetaUndefinedError(f"beta {rule}: zero denominator")
    if rule in HYBRIDS:
        aggressive, conservative = values
        return max(0.0, min(aggressive, conservative))
    return values[0]


@dataclass(frozen=True)
class SolverConfig:
    beta: str = "fr"
    transport: TransportRule = TransportRule("diff-retraction")
    scaling: ScalingPolicy = ScalingPolicy("capped")
    # map/scaling for the gradient in the PRP/HS/LS numerators; None = derived
    gradient_transport: TransportRule | None = None
    gradient_scaling: ScalingPolicy | None = None
    linesearch: LineSearchConfig = LineSearchConfig()
    tol: float = 1e-6
    max_iters: int = 5000
    initial_step: str = "interpolate"
    monitor: bool = True
    keep_iterates: bool = False

    def __post_init__(self):
        if self.beta not in BETA_KINDS:
            raise ConfigurationError(f"unknown beta rule {self.beta!r}; expected one of {BETA_KINDS}")
        if (self.beta in ("fr", "prp-fr") and self.linesearch.mode == "strong-wolfe"
                and not self.linesearch.c2 < 0.5):
            raise ConfigurationError("FR-type beta with strong Wolfe steps needs c2 < 1/2")
        if self.max_iters < 0 or not self.tol > 0:
            raise ConfigurationError("need max_iters >= 0 and tol > 0")

    @property
    def grad_rule(self) -> TransportRule:
        if self.gradient_transport is not None:
            return self.gradient_transport
        if self.transport.kind == "inverse-retraction":
            # the inverse-retraction map only carries the step direction itself
            return TransportRule("diff-retraction")
        return self.transport

    @property
    def grad_scaling(self) -> ScalingPolicy:
        if self.gradient_scaling is not None:
            return self.gradient_scaling
        return ScalingPolicy("capped") if self.scaling.kind == "capped" else ScalingPolicy("unit")


@dataclass
class TraceRecord:
    """Iterate ``k`` and the transition to ``k+1`` (transition fields NaN on the last row)."""

    iter: int
    f: float
    grad_norm: float
    rel_grad_norm: float
    dir_deriv: float
    zoutendijk_term: float
    step: float = float("nan")
    beta: float = float("nan")
    s_k: float = float("nan")
    l_k: float = float("nan")
    restart: bool = False
    time_ms: float = 0.0
    certified: frozenset = frozenset()
    evals: int = 0
    betas: dict = field(default_factory=dict)
    event: str = ""


@dataclass
class SolverTrace:
    records: list
    termination: str
    x: object
    f: float
    grad_norm0: float
    monitor: MonitorReport | None = None
    iterates: list | None = None
    directions: list | None = None
    message: str = ""

    @property
    def iterations(self) -> int:
        return self.records[-1].iter

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def restarts(self) -> int:
        return sum(r.restart for r in self.records)

    @property
    def rel_grad_norm(self) -> float:
        return self.records[-1].rel_grad_norm


@dataclass
class SolverState:
    k: int
    x: object
    f: float
    grad: object
    grad_norm: float
    eta: object
    dir_deriv: float
    t_prev: float | None = None
    dir_deriv_prev: float | None = None
    f_prev: float | None = None
    evals_prev: int = 0


def initial_state(problem, x0) -> SolverState:
    g = problem.gradient(x0)
    gn = problem.geometry.norm(x0, g)
    return SolverState(0, x0, problem.cost(x0), g, gn, -g, -gn * gn)


def _line_search(problem, state: SolverState, config: SolverConfig, grad_norm0: float):
    # first step has unit length
    if state.t_prev is None:
        t_init = 1.0 / grad_norm0
    else:
        ratio = state.t_prev * state.dir_deriv_prev / state.dir_deriv
        if config.initial_step == "interpolate":
            t_init = 2.02 * (state.f - state.f_prev) / state.dir_deriv
            if not (np.isfinite(t_init) and t_init > 0):
                t_init = ratio
        elif config.initial_step == "adaptive":
            t_init = 2.0 * ratio if state.evals_prev == 1 else ratio
        else:
            t_init = ratio
    ls = dataclasses.replace(config.linesearch, t_init=t_init)
    if ls.mode == "armijo":
        return search_armijo(problem, state.x, state.eta, ls, state.f, state.dir_deriv)
    return search_twolfe(problem, state.x, state.eta, ls, config.transport, state.f,
                         state.dir_deriv)


def step(problem, state: SolverState, config: SolverConfig, grad_norm0: float | None = None,
         monitor: InvariantMonitor | None = None):
    """One iteration; returns ``(new_state, transition_info)``.

    Raises :class:`LineSearchError` when no Armijo step exists within budget.
    """
    geometry = problem.geometry
    if not state.grad_norm > 0:
        raise ValueError("step needs a nonzero gradient")
    gn0 = state.grad_norm if grad_norm0 is None else grad_norm0
    ls = _line_search(problem, state, config, gn0)
    x, eta, g, t = state.x, state.eta, state.grad, ls.t
    x_new = ls.x_new
    g_new = ls.grad_new if ls.grad_new is not None else problem.gradient(x_new)

    carried = ls.transported
    if carried is None:
        carried = transport(config.transport, geometry, x, t, eta, eta, x_new=x_new)
    norm_eta = geometry.norm(x, eta)
    norm_carried = geometry.norm(x_new, carried)
    event = ""
    try:
        s = scale_factor(config.scaling, norm_eta, norm_carried)
    except DegenerateDirectionError:
        s = 1.0
        event = "degenerate-transport"
    sT = carried * s

    needs_grad_transport = config.beta in ("prp", "hs", "ls", "prp-fr", "hs-dy", "ls-cd")
    l = float("nan")
    g_dot_lS = 0.0
    if needs_grad_transport:
        carried_g = transport(config.grad_rule, geometry, x, t, eta, g, x_new=x_new)
        try:
            l = scale_factor(config.grad_scaling, state.grad_norm,
                             geometry.norm(x_new, carried_g))
        except DegenerateDirectionError:
            l = 1.0
        g_dot_lS = l * geometry.inner(x_new, g_new, carried_g)

    gn_new = geometry.norm(x_new, g_new)
    inputs = BetaInputs(gn_new * gn_new, state.grad_norm ** 2, state.dir_deriv,
                        geometry.inner(x_new, g_new, sT), g_dot_lS)
    cands = beta_candidates(inputs)
    restart = False
    try:
        beta = float(compute_beta(config.beta, inputs, cands))
    except BetaUndefinedError:
        beta, restart, event = 0.0, True, "beta-undefined"
    eta_new = -g_new + sT * beta
    dd_new = geometry.inner(x_new, g_new, eta_new)
    mode = config.linesearch.mode
    if mode != "armijo" and REQUIRED_FLAG[mode] not in ls.certified:
        # budget fallback: the curvature condition behind beta's guarantees is missing
        restart = True
        event = event or "uncertified-step"
    elif dd_new >= 0:
        restart = True
        event = event or "non-descent"
    if restart:
        eta_new = -g_new
        dd_new = -gn_new * gn_new

    info = {
        "t": t, "beta": beta, "s": s, "l": l, "restart": restart, "event": event,
        "certified": ls.certified, "evals": ls.evals, "betas": cands,
        "f_new": ls.f_new, "norm_eta": norm_eta, "norm_sT": s * norm_carried,
        "grad_dot_sT": inputs.grad_dot_transported,
        "surrogate": ls.slope_t_surrogate,
        "dir_deriv_old": state.dir_deriv,
    }
    if monitor is not None:
        residual = geometry.norm(x_new, eta_new + g_new - sT * beta)
        scale = gn_new + abs(beta) * s * norm_carried
        info["recurrence_residual"] = residual / max(1.0, scale)
    new_state = SolverState(state.k + 1, x_new, ls.f_new, g_new, gn_new, eta_new, dd_new,
                            t, state.dir_deriv, state.f, ls.evals)
    return new_state, info


def solve(problem, x0=None, config: SolverConfig | None = None) -> SolverTrace:
    """Run until ``||grad f(x_k)|| / ||grad f(x_0)|| < tol``, the iteration cap,
    or a line-search failure."""
    config = config or SolverConfig()
    geometry = problem.geometry
    config.transport.validate_for(geometry)
    config.grad_rule.validate_for(geometry)
    if x0 is None:
        x0 = problem.initial_point
    state = initial_state(problem, x0)
    gn0 = state.grad_norm
    monitor = InvariantMonitor(config) if config.monitor else None
    iterates = [x0] if config.keep_iterates else None
    directions = [state.eta] if config.keep_iterates else None

    records = []
    start = time.perf_counter()
    termination, message = "converged", ""
    while True:
        gn = state.grad_norm
        rel = gn / gn0 if gn0 > 0 else 0.0
        eta_norm = geometry.norm(state.x, state.eta)
        zt = state.dir_deriv ** 2 / eta_norm ** 2 if eta_norm > 0 else 0.0
        rec = TraceRecord(state.k, state.f, gn, rel, state.dir_deriv, zt)
        rec.time_ms = (time.perf_counter() - start) * 1e3
        records.append(rec)
        if monitor is not None:
            monitor.observe_point(state.k, state.dir_deriv, gn, eta_norm)
        if gn0 <= config.tol or rel < config.tol:
            termination = "converged"
            break
        if state.k >= config.max_iters:
            termination = "max_iters"
            break
        try:
            new_state, info = step(problem, state, config, gn0, monitor)
        except LineSearchError as exc:
            termination, message = "linesearch_failure", str(exc)
            break
        rec.step, rec.beta, rec.s_k, rec.l_k = info["t"], info["beta"], info["s"], info["l"]
        rec.restart, rec.event = info["restart"], info["event"]
        rec.certified, rec.evals, rec.betas = info["certified"], info["evals"], info["betas"]
        if monitor is not None:
            monitor.observe_transition(state.k, state.f, info)
        state = new_state
        if iterates is not None:
            iterates.append(state.x)
            directions.append(state.eta)

    return SolverTrace(
        records=records,
        termination=termination,
        x=state.x,
        f=state.f,
        grad_norm0=gn0,
        monitor=monitor.report() if monitor is not None else None,
        iterates=iterates,
        directions=directions,
        message=message,
    )


def trace_rows(trace: SolverTrace):
    """Rows for the delimited trace format, timing last."""
    for r in trace.records:
        yield (r.iter, r.f, r.grad_norm, r.rel_grad_norm, r.step, r.beta, r.s_k,
               r.dir_deriv, r.zoutendijk_term, int(r.restart), r.time_ms)


def armijo_every_step(trace: SolverTrace) -> bool:
    return all(ARMIJO in r.certified for r in trace.records[:-1])


def final_point_array(x):
    return np.asarray(x) if not isinstance(x, tuple) else x
