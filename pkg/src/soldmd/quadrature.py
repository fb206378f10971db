"""Uniform time grids and weighted quadrature rules.

A rule of order ``m`` integrates ``h`` against ``(T - t)**(m-1) / (m-1)!``,
which by Cauchy's formula equals the ``m``-fold iterated integral of ``h``
evaluated at ``T``. The weight is folded into the base weights node by
node, so ``integrate(rule, h) == order_weights @ h``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "count", int(self.count))
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InputError(f"time step must be positive, got {self.dt}")
        if self.count < 2:
            raise InputError(f"a time grid needs at least 2 nodes, got {self.count}")

    @property
    def T(self) -> float:
        return self.dt * (self.count - 1)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.count)

    def matches(self, other: "TimeGrid", rtol=1e-9) -> bool:
        return self.count == other.count and abs(self.dt - other.dt) <= rtol * self.dt


class Method(str, enum.Enum):
    TRAPEZOID = "trapezoid"
    SIMPSON = "simpson"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    grid: TimeGrid
    order: int
    method: Method
    base_weights: np.ndarray = field(repr=False)
    order_weights: np.ndarray = field(repr=False)
    mixed: bool = False


def trapezoid_weights(count: int, dt: float) -> np.ndarray:
    w = np.full(count, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def simpson_weights(count: int, dt: float):
    """Composite Simpson weights; returns ``(weights, mixed)``.

    An even node count leaves one interval over, which is closed with the
    trapezoid rule and reported through ``mixed``.
    """
    if count < 3:
        return trapezoid_weights(count, dt), True
    mixed = count % 2 == 0
    n = count - 1 if mixed else count
    w = np.zeros(count)
    w[:n:2] = 2.0
    w[1:n:2] = 4.0
    w[0] = w[n - 1] = 1.0
    w *= dt / 3.0
    if mixed:
        w[-2] += 0.5 * dt
        w[-1] += 0.5 * dt
    return w, mixed


def make_rule(grid: TimeGrid, order: int = 2, method="trapezoid") -> QuadratureRule:
    order = int(order)
    if order < 1:
        raise InputError(f"quadrature order must be >= 1, got {order}")
    try:
        method = Method(str(getattr(method, "value", method)).lower())
    except ValueError:
        raise InputError(f"unknown quadrature method {method!r}") from None
    if method is Method.TRAPEZOID:
        base, mixed = trapezoid_weights(grid.count, grid.dt), False
    else:
        base, mixed = simpson_weights(grid.count, grid.dt)
    # exact zero at the last node for order >= 2
    lever = (grid.count - 1 - np.arange(grid.count)) * grid.dt
    weights = base * lever ** (order - 1) / math.factorial(order - 1)
    base.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(grid, order, method, base, weights, mixed)


def integrate(rule: QuadratureRule, samples) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != rule.grid.count:
        raise InputError(
            f"expected {rule.grid.count} samples, got {samples.shape[0]}"
        )
    return rule.order_weights @ samples
