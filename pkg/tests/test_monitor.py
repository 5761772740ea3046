from rcg.linesearch import ARMIJO, STRONG_TWOLFE, LineSearchConfig
from rcg.monitor import InvariantMonitor, active_regimes
from rcg.solver import SolverConfig
from rcg.transports import ScalingPolicy


def cfg(beta, mode, c3=1000.0, scaling="capped"):
    return SolverConfig(beta=beta, scaling=ScalingPolicy(scaling),
                        linesearch=LineSearchConfig(mode=mode, c2=0.1, c3=c3))


def test_regime_selection():
    assert active_regimes(cfg("fr", "strong-wolfe")) == ("fr", "cap")
    assert active_regimes(cfg("fr", "wolfe")) == ("cap",)
    assert active_regimes(cfg("dy", "wolfe", scaling="unit")) == ("dy",)
    assert active_regimes(cfg("cd", "generalized-wolfe", c3=0.0)) == ("cd", "cap")
    assert active_regimes(cfg("cd", "generalized-wolfe", c3=1.0)) == ("cap",)
    assert "hybrid" in active_regimes(cfg("ls-cd", "armijo"))
    assert "hybrid" not in active_regimes(cfg("hs-dy", "armijo"))
    assert active_regimes(cfg("hs-dy", "wolfe")) == ("dy", "hybrid", "cap")


def _info(**kw):
    info = {"certified": frozenset({ARMIJO, STRONG_TWOLFE}), "restart": False, "f_new": 0.0,
            "norm_sT": 1.0, "norm_eta": 1.0, "recurrence_residual": 0.0,
            "betas": {"fr": 0.5, "dy": 0.5, "cd": 0.5, "prp": 0.2, "hs": 0.2, "ls": 0.2},
            "beta": 0.2, "dir_deriv_old": -1.0, "grad_dot_sT": 0.1}
    info.update(kw)
    return info


def test_clean_transition_passes():
    m = InvariantMonitor(cfg("prp-fr", "strong-wolfe"))
    m.observe_point(0, -1.0, 1.0, 1.0)
    m.observe_transition(0, 1.0, _info())
    assert m.report().ok


def test_violations_are_counted():
    m = InvariantMonitor(cfg("prp-fr", "strong-wolfe"))
    # ratio -2 is below -1/(1 - c2)
    m.observe_point(0, -2.0, 1.0, 1.0)
    m.observe_transition(0, 1.0, _info(beta=0.7, norm_sT=1.5, f_new=2.0))
    bad = m.report().violations()
    assert set(bad) == {"fr_ratio_bounds", "hybrid_clamp", "scaling_cap", "strict_decrease"}
    assert bad["hybrid_clamp"] == [0]


def test_dy_and_cd_checks():
    m = InvariantMonitor(cfg("dy", "wolfe"))
    m.observe_transition(3, 1.0, _info(betas={"dy": -0.1}, grad_dot_sT=-2.0))
    assert set(m.report().violations()) == {"dy_beta_positive", "dy_inequality", "step_certified"}
    m = InvariantMonitor(cfg("cd", "generalized-wolfe", c3=0.0))
    m.observe_point(0, -0.5, 1.0, 2.0)
    m.observe_transition(0, 1.0, _info(betas={"cd": 0.6, "fr": 0.5}))
    assert {"cd_sufficient_descent", "cd_beta_order"} <= set(m.report().violations())


def test_zoutendijk_partial_sums():
    m = InvariantMonitor(cfg("fr", "armijo"))
    m.observe_point(0, -2.0, 2.0, 2.0)
    m.observe_point(1, -1.0, 1.0, 2.0)
    assert m.report().zoutendijk_partial_sums == [1.0, 1.25]
    assert m.report().zoutendijk_sum == 1.25
