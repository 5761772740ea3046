"""Runtime checks of the descent and boundedness guarantees of the CG theory.

The monitor never interrupts a run; it records one boolean per check and
iteration so tests (and ``rcg check invariants``) can count violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .linesearch import ARMIJO, REQUIRED_FLAG

# relative slack for floating-point comparison of non-strict bounds
SLACK = 1e-10
RECURRENCE_TOL = 1e-12


def active_regimes(config) -> tuple:
    """Theorem regimes whose hypotheses the configuration meets."""
    ls = config.linesearch
    regimes = []
    if config.beta in ("fr", "prp-fr") and ls.mode == "strong-wolfe" and ls.c2 < 0.5:
        regimes.append("fr")
    if config.beta in ("dy", "hs-dy") and ls.mode != "armijo":
        regimes.append("dy")
    if config.beta in ("cd", "ls-cd") and ls.mode == "generalized-wolfe" and ls.c3 == 0:
        regimes.append("cd")
    # the dy value can be negative after an Armijo-only step, and then no clamp
    # into [0, beta_dy] exists
    if config.beta in ("prp-fr", "ls-cd") or (config.beta == "hs-dy" and ls.mode != "armijo"):
        regimes.append("hybrid")
    if config.scaling.kind == "capped":
        regimes.append("cap")
    return tuple(regimes)


def _le(a, b):
    return a <= b + SLACK * max(1.0, abs(a), abs(b))


@dataclass
class MonitorReport:
    regimes: tuple
    checks: dict = field(default_factory=dict)  # name -> list of (k, ok)
    zoutendijk_partial_sums: list = field(default_factory=list)

    def violations(self) -> dict:
        out = {}
        for name, results in self.checks.items():
            bad = [k for k, ok in results if not ok]
            if bad:
                out[name] = bad
        return out

    @property
    def ok(self) -> bool:
        return not self.violations()

    @property
    def zoutendijk_sum(self) -> float:
        return self.zoutendijk_partial_sums[-1] if self.zoutendijk_partial_sums else 0.0

    def summary(self) -> str:
        lines = [f"regimes: {', '.join(self.regimes) or 'none'}"]
        for name, results in sorted(self.checks.items()):
            bad = sum(not ok for _, ok in results)
            lines.append(f"  {name}: {len(results) - bad}/{len(results)} ok")
        lines.append(f"  zoutendijk partial sum: {self.zoutendijk_sum:.6e}")
        return "\n".join(lines)


class InvariantMonitor:
    def __init__(self, config):
        self.config = config
        self.regimes = active_regimes(config)
        self.report_ = MonitorReport(self.regimes)
        self._zsum = 0.0

    def _record(self, name, k, ok):
        self.report_.checks.setdefault(name, []).append((k, bool(ok)))

    def observe_point(self, k, dir_deriv, grad_norm, eta_norm):
        """Bounds on ``<g_k, eta_k>`` and ``||g_k||`` at iterate ``k``."""
        if eta_norm > 0:
            self._zsum += dir_deriv ** 2 / eta_norm ** 2
        self.report_.zoutendijk_partial_sums.append(self._zsum)
        gsq = grad_norm * grad_norm
        if not gsq > 0:
            return
        ratio = dir_deriv / gsq
        c2, c3 = self.config.linesearch.c2, self.config.linesearch.c3
        if "fr" in self.regimes:
            lo, hi = -1.0 / (1.0 - c2), -(1.0 - 2.0 * c2) / (1.0 - c2)
            self._record("fr_ratio_bounds", k, _le(lo, ratio) and _le(ratio, hi))
            self._record("fr_grad_bound", k,
                         _le(grad_norm, (1.0 - c2) / (1.0 - 2.0 * c2) * eta_norm))
        if "dy" in self.regimes:
            self._record("dy_descent", k, dir_deriv < 0)
            if self.config.linesearch.mode == "generalized-wolfe":
                lo, hi = -1.0 / (1.0 - c2), -1.0 / (1.0 + c3)
                self._record("dy_ratio_bounds", k, _le(lo, ratio) and _le(ratio, hi))
                self._record("dy_grad_bound", k, _le(grad_norm, (1.0 + c3) * eta_norm))
        if "cd" in self.regimes:
            self._record("cd_sufficient_descent", k, _le(dir_deriv, -gsq))
            self._record("cd_ratio_lower", k, _le(-1.0 / (1.0 - c2), ratio))
            self._record("cd_grad_bound", k, _le(grad_norm, eta_norm))

    def observe_transition(self, k, f_old, info):
        """Checks tied to the step from ``x_k`` to ``x_{k+1}``."""
        certified = info["certified"]
        mode = self.config.linesearch.mode
        theorem_regime = any(r in self.regimes for r in ("fr", "dy", "cd"))
        if theorem_regime:
            self._record("step_certified", k, REQUIRED_FLAG[mode] in certified)
            self._record("no_restart", k, not info["restart"])
        if ARMIJO in certified:
            self._record("strict_decrease", k, info["f_new"] < f_old)
        if "cap" in self.regimes:
            self._record("scaling_cap", k, _le(info["norm_sT"], info["norm_eta"]))
        if not info["restart"] and "recurrence_residual" in info:
            self._record("direction_recurrence", k,
                         info["recurrence_residual"] <= RECURRENCE_TOL)

        betas = info["betas"]
        beta = info["beta"]
        if "dy" in self.regimes:
            bdy = betas.get("dy")
            self._record("dy_beta_positive", k, bdy is not None and bdy > 0)
            # <g_k, eta_k> < min{0, <g_{k+1}, s T(eta_k)>}
            self._record("dy_inequality", k,
                         info["dir_deriv_old"] < min(0.0, info["grad_dot_sT"]))
        if "cd" in self.regimes:
            bcd, bfr = betas.get("cd"), betas.get("fr")
            self._record("cd_beta_order", k,
                         bcd is not None and bfr is not None and 0 < bcd and _le(bcd, bfr))
        if "hybrid" in self.regimes and not info["restart"]:
            conservative = {"prp-fr": "fr", "hs-dy": "dy", "ls-cd": "cd"}[self.config.beta]
            bc = betas.get(conservative)
            self._record("hybrid_clamp", k, bc is not None and 0 <= beta and _le(beta, bc))

    def report(self) -> MonitorReport:
        return self.report_
