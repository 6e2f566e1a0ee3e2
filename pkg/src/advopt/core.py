"""Domain types shared by every optimizer: points, feasible boxes,
step/momentum schedules, hyperparameters, run state, and the oracle
contract.

Points are plain 1-D float64 numpy arrays.  Images, when they appear,
are flattened first: every constraint here is coordinate-wise, so the
tensor layout carries no meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Union, runtime_checkable

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]

__all__ = [
    "Vector",
    "as_vector",
    "ConstantStep",
    "InvSqrtStep",
    "ConstantMomentum",
    "GeometricMomentum",
    "StepSchedule",
    "MomentumSchedule",
    "schedule_value",
    "HyperParams",
    "default_hyperparams",
    "FeasibleBox",
    "box_membership",
    "AttackState",
    "Oracle",
]


def as_vector(data) -> Vector:
    """Coerce to a finite 1-D float64 array, raising ValueError otherwise."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D coordinate vector, got shape {x.shape}")
    if x.size == 0:
        raise ValueError("coordinate vector must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("coordinate vector contains NaN or Inf")
    return x


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantStep:
    """Fixed step size alpha, the usual epsilon/T choice of iterative attacks."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("step size alpha must be > 0")

    def value(self, t: int) -> float:
        return self.alpha


@dataclass(frozen=True)
class InvSqrtStep:
    """Decaying step size alpha / sqrt(t); the choice the convergence
    guarantee for the momentum-adaptive method is stated under."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("step size alpha must be > 0")

    def value(self, t: int) -> float:
        return self.alpha / math.sqrt(t)


@dataclass(frozen=True)
class ConstantMomentum:
    """Fixed heavy-ball decay factor mu."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("momentum factor mu must be > 0")

    def value(self, t: int) -> float:
        return self.mu


@dataclass(frozen=True)
class GeometricMomentum:
    """Geometrically vanishing momentum mu * lam**(t-1), 0 < lam < 1.

    The vanishing tail is what keeps the accumulated momentum norm bounded
    by 1 + mu / (1 - lam).
    """

    mu: float
    lam: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("momentum factor mu must be > 0")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("decay lam must lie strictly in (0, 1)")

    def value(self, t: int) -> float:
        return self.mu * self.lam ** (t - 1)


StepSchedule = Union[ConstantStep, InvSqrtStep]
MomentumSchedule = Union[ConstantMomentum, GeometricMomentum]


def schedule_value(schedule, t: int) -> float:
    """Evaluate a step or momentum schedule at iteration t >= 1."""
    if t < 1:
        raise ValueError(f"schedules are defined for t >= 1, got t={t}")
    return schedule.value(t)


# ---------------------------------------------------------------------------
# hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperParams:
    """Everything an attack run is parameterized by besides the box.

    beta is the EMA memory of the adaptive accumulator, delta the floor
    added before inverting it, steps the iteration budget T.
    """

    step: StepSchedule
    momentum: MomentumSchedule
    beta: float = 0.9
    delta: float = 1e-20
    steps: int = 10

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def default_hyperparams(
    epsilon: float,
    steps: int = 10,
    alpha: float | None = None,
    beta: float = 0.9,
    delta: float = 1e-20,
    mu: float = 1.0,
    lam: float = 0.999,
    step_rule: str = "constant",
) -> HyperParams:
    """Build HyperParams with the conventional defaults.

    alpha defaults to epsilon / steps.  step_rule is "constant" or
    "invsqrt"; lam >= 1 selects constant momentum, otherwise geometric
    decay mu * lam**(t-1).
    """
    if alpha is None:
        alpha = epsilon / steps
    if step_rule == "constant":
        step: StepSchedule = ConstantStep(alpha)
    elif step_rule == "invsqrt":
        step = InvSqrtStep(alpha)
    else:
        raise ValueError(f"unknown step_rule {step_rule!r}; expected constant or invsqrt")
    momentum: MomentumSchedule = ConstantMomentum(mu) if lam >= 1.0 else GeometricMomentum(mu, lam)
    return HyperParams(step=step, momentum=momentum, beta=beta, delta=delta, steps=steps)


# ---------------------------------------------------------------------------
# feasible region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibleBox:
    """The search region: an L-infinity ball of radius epsilon around the
    anchor, intersected with the global value range [value_lo, value_hi].

    ``lower`` and ``upper`` hold the coordinate-wise bounds; membership
    and clipping both use exactly these arrays, so a clipped point is a
    member with no tolerance.
    """

    anchor: Vector
    epsilon: float
    value_lo: float = 0.0
    value_hi: float = 1.0
    lower: Vector = field(init=False, repr=False, compare=False)
    upper: Vector = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        anchor = as_vector(self.anchor)
        object.__setattr__(self, "anchor", anchor)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.value_lo < self.value_hi:
            raise ValueError("value_lo must be < value_hi")
        if np.any(anchor < self.value_lo) or np.any(anchor > self.value_hi):
            raise ValueError("anchor must lie within [value_lo, value_hi]")
        object.__setattr__(self, "lower", np.maximum(self.value_lo, anchor - self.epsilon))
        object.__setattr__(self, "upper", np.minimum(self.value_hi, anchor + self.epsilon))

    @property
    def dim(self) -> int:
        return self.anchor.shape[0]

    def contains(self, z: Vector) -> bool:
        if z.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: box has {self.dim}, point has {z.shape[0]}")
        return bool(np.all(z >= self.lower) and np.all(z <= self.upper))


def box_membership(box: FeasibleBox, z: Vector) -> bool:
    """True iff every coordinate of z satisfies both the ball and the range."""
    return box.contains(as_vector(z))


# ---------------------------------------------------------------------------
# run state and oracle contract
# ---------------------------------------------------------------------------

@dataclass
class AttackState:
    """Mutable per-run state: iterate x, momentum g, adaptive diagonal v,
    and the number of completed steps t.  Owned by exactly one run."""

    x: Vector
    g: Vector
    v: Vector
    t: int = 0

    @classmethod
    def fresh(cls, x0: Vector) -> "AttackState":
        x0 = as_vector(x0)
        d = x0.shape[0]
        return cls(x=x0.copy(), g=np.zeros(d), v=np.zeros(d), t=0)

    def __post_init__(self):
        if not (self.x.shape == self.g.shape == self.v.shape):
            raise ValueError("x, g and v must share one dimension")
        if np.any(self.v < 0):
            raise ValueError("adaptive diagonal v must be non-negative")


@runtime_checkable
class Oracle(Protocol):
    """Loss-and-gradient evaluator.  Attacks ascend: they maximize the loss.

    ``evaluate`` must be deterministic for a fixed x and safe to call from
    several threads at once.  Test problems with a closed-form maximizer
    additionally expose ``optimum_in(box) -> (x_star, loss_star)``.
    """

    @property
    def dim(self) -> int: ...

    def evaluate(self, x: Vector) -> tuple[float, Vector]: ...
