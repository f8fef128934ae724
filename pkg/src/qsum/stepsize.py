"""Stepsize rules: constant, diminishing, and the two dynamic (Polyak-type) rules.

The dynamic rules need the optimal value ``f*`` and the Hoelder data of the
problem.  Their scale factors are

    C(p, m) = L_max^(-1/p) * min(1, (2m)^(1 - 1/p))     (deterministic cycle)
    R(p, m) = L_max^(-1/p) * min(1, m^(1 - 1/p))        (randomized step)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

from .errors import ConfigurationError, InvalidArgumentError
from .problem import OptimumMeta

Gamma = Union[float, Callable[[int], float]]


def c_pm(p: float, m: int, L_max: float) -> float:
    if not (p > 0 and m >= 1 and L_max > 0):
        raise InvalidArgumentError(f"c_pm needs p > 0, m >= 1, L_max > 0 (got {p}, {m}, {L_max})")
    return L_max ** (-1.0 / p) * min(1.0, (2.0 * m) ** (1.0 - 1.0 / p))


def r_pm(p: float, m: int, L_max: float) -> float:
    if not (p > 0 and m >= 1 and L_max > 0):
        raise InvalidArgumentError(f"r_pm needs p > 0, m >= 1, L_max > 0 (got {p}, {m}, {L_max})")
    return L_max ** (-1.0 / p) * min(1.0, float(m) ** (1.0 - 1.0 / p))


def incremental_error_bound(v: float, meta: OptimumMeta) -> float:
    """Asymptotic gap ``(m^2 v / (2 C))^p`` of the deterministic method with constant ``v``."""
    return (meta.m**2 * v / (2.0 * c_pm(meta.p, meta.m, meta.L_max))) ** meta.p


def randomized_error_bound(v: float, meta: OptimumMeta) -> float:
    """Asymptotic gap ``(m v / (2 R))^p`` of the randomized method with constant ``v``."""
    return (meta.m * v / (2.0 * r_pm(meta.p, meta.m, meta.L_max))) ** meta.p


def tolerance_ratio(p: float, m: int, L_max: float = 1.0, v: float = 1.0) -> float:
    """Randomized bound divided by deterministic bound for the same constant stepsize."""
    meta = OptimumMeta(p=p, L_max=L_max, m=m)
    return randomized_error_bound(v, meta) / incremental_error_bound(v, meta)


@dataclass(frozen=True)
class Constant:
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ConfigurationError(f"constant stepsize must be positive, got {self.v}")

    def label(self) -> str:
        return f"constant(v={self.v!r})"


@dataclass(frozen=True)
class Diminishing:
    """``v_k = v / (1 + rate * k) ** power``.

    With ``0 < power <= 1`` the sequence tends to zero and is not summable.
    The default is the ``v / (1 + 0.1 k)`` schedule.
    """

    v: float = 3.0
    rate: float = 0.1
    power: float = 1.0

    def __post_init__(self):
        if not (self.v > 0 and self.rate > 0 and 0 < self.power <= 1):
            raise ConfigurationError(
                f"diminishing schedule needs v > 0, rate > 0, 0 < power <= 1 (got {self.v}, {self.rate}, {self.power})"
            )

    def __call__(self, k: int) -> float:
        return self.v / (1.0 + self.rate * k) ** self.power

    def label(self) -> str:
        if self.power == 1.0:
            return f"diminishing(v={self.v!r},rate={self.rate!r})"
        return f"diminishing(v={self.v!r},rate={self.rate!r},power={self.power!r})"


def _gamma_at(gamma: Gamma, k: int) -> float:
    g = float(gamma(k)) if callable(gamma) else float(gamma)
    if not 0.0 < g < 2.0:
        raise ConfigurationError(f"relaxation gamma_k must lie in (0, 2), got {g} at k={k}")
    return g


@dataclass(frozen=True)
class _Dynamic:
    gamma: Gamma = 1.0
    f_star: Optional[float] = None

    def __post_init__(self):
        if not callable(self.gamma):
            _gamma_at(self.gamma, 0)

    def resolved(self, f_star: Optional[float]):
        """Fill in ``f_star`` from the problem when the rule leaves it open."""
        if self.f_star is not None:
            return self
        if f_star is None:
            raise ConfigurationError("dynamic stepsize requires a known optimal value f*")
        return replace(self, f_star=float(f_star))

    def _base(self, f_xk: float) -> Optional[float]:
        if self.f_star is None:
            raise ConfigurationError("dynamic stepsize requires a known optimal value f*")
        gap = f_xk - self.f_star
        return gap if gap > 0 else None

    def _gamma_label(self) -> str:
        return "gamma=schedule" if callable(self.gamma) else f"gamma={self.gamma!r}"


@dataclass(frozen=True)
class DynamicI(_Dynamic):
    """``v_k = gamma_k * C(p, m) / m^2 * (f(x_k) - f*)^(1/p)``, for the cyclic method."""

    def label(self) -> str:
        return f"dynamic1({self._gamma_label()})"


@dataclass(frozen=True)
class DynamicII(_Dynamic):
    """``v_k = gamma_k * R(p, m) / m * (f(x_k) - f*)^(1/p)``, for the randomized method."""

    def label(self) -> str:
        return f"dynamic2({self._gamma_label()})"


StepsizeRule = Union[Constant, Diminishing, DynamicI, DynamicII]


def next_stepsize(rule: StepsizeRule, k: int, f_xk: float, meta: OptimumMeta) -> float:
    """Stepsize for iteration ``k`` at current objective value ``f_xk``.

    Dynamic rules return 0.0 once ``f_xk <= f*``; the caller treats that as
    "target reached".
    """
    if isinstance(rule, Constant):
        return rule.v
    if isinstance(rule, Diminishing):
        return rule(k)
    if isinstance(rule, (DynamicI, DynamicII)):
        gap = rule._base(f_xk)
        if gap is None:
            return 0.0
        g = _gamma_at(rule.gamma, k)
        if isinstance(rule, DynamicI):
            scale = c_pm(meta.p, meta.m, meta.L_max) / meta.m**2
        else:
            scale = r_pm(meta.p, meta.m, meta.L_max) / meta.m
        return g * scale * gap ** (1.0 / meta.p)
    raise ConfigurationError(f"unknown stepsize rule {rule!r}")


def is_dynamic(rule: StepsizeRule) -> bool:
    return isinstance(rule, _Dynamic)


def rule_from_dict(spec: dict, path: str = "stepsize") -> StepsizeRule:
    """Build a rule from its JSON form, e.g. ``{"rule": "constant", "v": 1.5}``."""
    if not isinstance(spec, dict):
        raise ConfigurationError("must be an object", path)
    kind = spec.get("rule")
    params = {k: v for k, v in spec.items() if k != "rule"}
    classes = {"constant": Constant, "diminishing": Diminishing, "dynamic1": DynamicI, "dynamic2": DynamicII}
    if kind not in classes:
        raise ConfigurationError(f"unknown rule {kind!r}; expected one of {sorted(classes)}", f"{path}.rule")
    cls = classes[kind]
    allowed = {"constant": {"v"}, "diminishing": {"v", "rate", "power"}}.get(kind, {"gamma", "f_star"})
    for key, value in params.items():
        if key not in allowed:
            raise ConfigurationError(f"unexpected field for rule {kind!r}", f"{path}.{key}")
        if value is not None and not isinstance(value, (int, float)):
            raise ConfigurationError("must be a number", f"{path}.{key}")
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigurationError("must be finite", f"{path}.{key}")
    try:
        return cls(**params)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), path) from None
    except TypeError as exc:
        raise ConfigurationError(str(exc), path) from None
