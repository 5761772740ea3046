"""Strategy layer for carrying the previous direction into the new tangent space.

A :class:`TransportRule` picks the map used in the direction update; a
:class:`ScalingPolicy` picks the scalar applied on top of it so the carried
vector never grows (``capped``) or is left untouched (``unit``/``fixed``).
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import Geometry, GeometryError

TRANSPORT_KINDS = ("diff-retraction", "projection", "inverse-retraction", "identity")
SCALING_KINDS = ("capped", "unit", "fixed")


class ConfigurationError(ValueError):
    """An option combination that the selected geometry cannot honour."""


class DegenerateDirectionError(GeometryError):
    pass


@dataclass(frozen=True)
class TransportRule:
    kind: str = "diff-retraction"
    # retraction inverted by the inverse-retraction rule; only the geometry's own one exists
    backward_retraction: str = "same"

    def __post_init__(self):
        if self.kind not in TRANSPORT_KINDS:
            raise ConfigurationError(
                f"unknown transport {self.kind!r}; expected one of {TRANSPORT_KINDS}")
        if self.backward_retraction != "same":
            raise ConfigurationError("only the forward retraction can be inverted")

    def validate_for(self, geometry: Geometry):
        if self.kind == "identity" and not geometry.shared_ambient_tangents:
            raise ConfigurationError(
                f"identity transport needs a shared tangent space (spd or euclidean), "
                f"not {geometry.shape.kind}")
        if self.kind == "inverse-retraction" and not geometry.supports_inverse_retraction:
            raise ConfigurationError(
                f"inverse-retraction transport is not implemented on {geometry.shape.kind}")

    @property
    def is_linear(self) -> bool:
        return self.kind != "inverse-retraction"


@dataclass(frozen=True)
class ScalingPolicy:
    kind: str = "capped"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in SCALING_KINDS:
            raise ConfigurationError(f"unknown scaling policy {self.kind!r}")
        if self.kind == "fixed" and not self.value > 0:
            raise ConfigurationError("fixed scaling needs a positive value")


def transport(rule: TransportRule, geometry: Geometry, x, t: float, eta, xi, x_new=None):
    """Carry ``xi`` from ``x`` to ``R_x(t * eta)`` according to ``rule``.

    The inverse-retraction rule is nonlinear and only defined for the search
    direction itself: it returns ``-(1/t) R_{x+}^{-1}(x)`` and ignores ``xi``.
    ``x_new`` may be passed to skip recomputing the retraction where it is used.
    """
    kind = rule.kind
    if kind == "identity":
        rule.validate_for(geometry)
        return xi
    step = t * eta
    if kind == "diff-retraction":
        return geometry.diff_retraction(x, step, xi)
    if kind == "projection":
        return geometry.projection_transport(x, step, xi)
    rule.validate_for(geometry)
    if not t > 0:
        raise ConfigurationError("inverse-retraction transport needs t > 0")
    if x_new is None:
        x_new = geometry.retract(x, step)
    return geometry.inverse_retraction(x_new, x) * (-1.0 / t)


def scale_factor(policy: ScalingPolicy, norm_eta: float, norm_transported: float) -> float:
    if policy.kind == "unit":
        return 1.0
    if policy.kind == "fixed":
        return float(policy.value)
    if not norm_transported > 0:
        raise DegenerateDirectionError("transported vector has zero norm")
    return min(1.0, norm_eta / norm_transported)


def assumption34_ratio(rule: TransportRule, geometry: Geometry, x, t: float, eta,
                       form: str = "linear") -> float:
    """Distance between the rule's image of ``eta`` and ``D R_x(t eta)[eta]``.

    Normalized by ``t ||eta||^2`` (``form="linear"``) or by
    ``(t + t^2) ||eta||^2`` (``form="quadratic"``).
    """
    if not t > 0:
        raise DegenerateDirectionError("ratio needs t > 0")
    n2 = geometry.inner(x, eta, eta)
    if not n2 > 0:
        raise DegenerateDirectionError("ratio needs a nonzero direction")
    x_new = geometry.retract(x, t * eta)
    diff = transport(rule, geometry, x, t, eta, eta, x_new=x_new) \
        - geometry.diff_retraction(x, t * eta, eta)
    denom = {"linear": t, "quadratic": t + t * t}[form] * n2
    return geometry.norm(x_new, diff) / denom
