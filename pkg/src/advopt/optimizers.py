"""Step rules and full-run drivers for the attack family.

Every method is an ascent on the oracle loss constrained to a feasible
box.  The catalog:

* ``pgm``      -- projected gradient ascent with the raw gradient
* ``adagrad``  -- running-mean-of-squared-gradients diagonal scaling,
                  stepped with alpha / sqrt(t)
* ``fgsm``     -- single epsilon-sized sign step
* ``ifgsm``    -- iterated sign steps
* ``pgd``      -- iterated sign steps from a random start inside the ball
* ``l1ema``    -- EMA of absolute gradients, inverse (not inverse-sqrt)
                  scaling
* ``mifgsm``   -- heavy-ball momentum over L1-normalized gradients,
                  sign-scaled steps
* ``nifgsm``   -- the same with a Nesterov lookahead evaluation point
* ``adamig``   -- momentum direction, EMA of squared *gradients* as the
                  diagonal scaler
* ``adami``    -- momentum direction, EMA of squared *momentums* as the
                  diagonal scaler
* ``adani``    -- the momentum-adaptive wrapper applied to the Nesterov
                  direction rule

``ada_wrap`` turns any momentum direction rule into an adaptive method;
``adami`` is exactly the wrapper applied to the heavy-ball rule, sharing
its code path step for step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backend
from .core import (
    AttackState,
    FeasibleBox,
    HyperParams,
    Oracle,
    Vector,
    schedule_value,
)

__all__ = [
    "L1_GUARD",
    "sign_as_matrix",
    "l1_normalized",
    "pgm_step",
    "adagrad_step",
    "fgsm",
    "ifgsm_step",
    "pgd_init",
    "l1ema_step",
    "mi_step",
    "ni_step",
    "adamig_step",
    "adami_step",
    "heavy_ball_direction",
    "nesterov_direction",
    "ada_wrap",
    "AttackMethod",
    "AttackRunError",
    "RunTrace",
    "run_attack",
    "METHODS",
    "make_method",
]

# Below this L1 mass a gradient is treated as zero rather than normalized.
L1_GUARD = 1e-12


def sign_as_matrix(grad: Vector, delta: float) -> Vector:
    """Scale grad coordinate-wise by (grad**2 + delta)**-1/2.

    With delta = 0 and the 0/0 := 0 convention this equals sign(grad)
    exactly: dividing each coordinate by its own magnitude is the
    instantaneous special case of diagonal adaptive scaling.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    out = np.empty_like(grad)
    backend.K.sign_ratio(grad, delta, out)
    return out


def l1_normalized(grad: Vector) -> Vector:
    """grad / ||grad||_1, or the zero vector when the mass is below L1_GUARD."""
    l1 = backend.K.l1_norm(grad)
    if l1 < L1_GUARD:
        return np.zeros_like(grad)
    return grad / l1


# ---------------------------------------------------------------------------
# single-step updates
# ---------------------------------------------------------------------------

def pgm_step(state: AttackState, oracle: Oracle, box: FeasibleBox, alpha_t: float) -> AttackState:
    """x <- P(x + alpha_t * grad); momentum and v untouched."""
    _, grad = oracle.evaluate(state.x)
    backend.K.plain_step(state.x, grad, alpha_t, box.lower, box.upper)
    state.t += 1
    return state


def adagrad_step(state: AttackState, oracle: Oracle, box: FeasibleBox,
                 alpha: float, delta: float) -> AttackState:
    """One diagonal-scaled ascent step with the accumulated gradient average.

    v is the running arithmetic mean of squared gradients including the
    current one; the move is (alpha / sqrt(t)) * (v + delta)**-1/2 * grad.
    """
    t = state.t + 1
    _, grad = oracle.evaluate(state.x)
    backend.K.mean_square(state.v, grad, t)
    backend.K.adaptive_step(state.x, grad, state.v, alpha / math.sqrt(t), delta,
                            box.lower, box.upper)
    state.t = t
    return state


def fgsm(x: Vector, oracle: Oracle, box: FeasibleBox, epsilon: float) -> Vector:
    """One epsilon-sized sign step: clip(x + epsilon * sign(grad))."""
    _, grad = oracle.evaluate(x)
    out = x.copy()
    backend.K.sign_step(out, grad, epsilon, box.lower, box.upper)
    return out


def ifgsm_step(state: AttackState, oracle: Oracle, box: FeasibleBox, alpha: float) -> AttackState:
    """x <- clip(x + alpha * sign(grad))."""
    _, grad = oracle.evaluate(state.x)
    backend.K.sign_step(state.x, grad, alpha, box.lower, box.upper)
    state.t += 1
    return state


def pgd_init(box: FeasibleBox, rng: np.random.Generator) -> Vector:
    """Random start: anchor plus coordinate-wise Uniform[-eps, eps], clipped."""
    u = rng.uniform(-box.epsilon, box.epsilon, box.dim)
    out = box.anchor + u
    backend.K.clamp(out, box.lower, box.upper)
    return out


def l1ema_step(state: AttackState, oracle: Oracle, box: FeasibleBox,
               alpha_t: float, beta: float, delta: float) -> AttackState:
    """EMA of absolute gradients; step by alpha_t * (v + delta)**-1 * grad.

    The scaling power is -1, not -1/2, because v accumulates first powers:
    a constant gradient then recovers the plain sign direction.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("l1ema requires 0 < beta < 1")
    _, grad = oracle.evaluate(state.x)
    backend.K.ema_abs(state.v, grad, beta)
    backend.K.recip_step(state.x, grad, state.v, alpha_t, delta, box.lower, box.upper)
    state.t += 1
    return state


def heavy_ball_direction(state: AttackState, oracle: Oracle, box: FeasibleBox,
                         alpha_t: float, mu_t: float) -> Vector:
    """g <- mu_t * g + grad / ||grad||_1 evaluated at the current iterate."""
    _, grad = oracle.evaluate(state.x)
    l1 = backend.K.l1_norm(grad)
    scale = 1.0 / l1 if l1 >= L1_GUARD else 0.0
    backend.K.momentum(state.g, grad, mu_t, scale)
    return state.g


def nesterov_direction(state: AttackState, oracle: Oracle, box: FeasibleBox,
                       alpha_t: float, mu_t: float) -> Vector:
    """Heavy-ball update with the gradient taken at the lookahead point
    x + alpha_t * g.  The lookahead is evaluated as written, without
    projection, so oracles must accept slightly infeasible points."""
    x_nes = state.x + alpha_t * state.g
    _, grad = oracle.evaluate(x_nes)
    l1 = backend.K.l1_norm(grad)
    scale = 1.0 / l1 if l1 >= L1_GUARD else 0.0
    backend.K.momentum(state.g, grad, mu_t, scale)
    return state.g


def mi_step(state: AttackState, oracle: Oracle, box: FeasibleBox,
            alpha: float, mu_t: float) -> AttackState:
    """Momentum update followed by a sign-scaled clipped step."""
    heavy_ball_direction(state, oracle, box, alpha, mu_t)
    backend.K.sign_step(state.x, state.g, alpha, box.lower, box.upper)
    state.t += 1
    return state


def ni_step(state: AttackState, oracle: Oracle, box: FeasibleBox,
            alpha: float, mu_t: float) -> AttackState:
    """Nesterov-lookahead momentum update, then a sign-scaled clipped step."""
    nesterov_direction(state, oracle, box, alpha, mu_t)
    backend.K.sign_step(state.x, state.g, alpha, box.lower, box.upper)
    state.t += 1
    return state


def _momentum_adaptive_finish(state: AttackState, box: FeasibleBox,
                              alpha_t: float, beta: float, delta: float) -> None:
    # Shared tail of the momentum-adaptive family: EMA of squared momentum,
    # then an inverse-sqrt scaled projected step along the momentum.
    backend.K.ema_square(state.v, state.g, beta)
    backend.K.adaptive_step(state.x, state.g, state.v, alpha_t, delta,
                            box.lower, box.upper)
    state.t += 1


def adamig_step(state: AttackState, oracle: Oracle, box: FeasibleBox,
                alpha_t: float, mu_t: float, beta: float, delta: float) -> AttackState:
    """Momentum direction scaled by an EMA of squared *gradients*."""
    _, grad = oracle.evaluate(state.x)
    l1 = backend.K.l1_norm(grad)
    scale = 1.0 / l1 if l1 >= L1_GUARD else 0.0
    backend.K.momentum(state.g, grad, mu_t, scale)
    backend.K.ema_square(state.v, grad, beta)
    backend.K.adaptive_step(state.x, state.g, state.v, alpha_t, delta,
                            box.lower, box.upper)
    state.t += 1
    return state


def adami_step(state: AttackState, oracle: Oracle, box: FeasibleBox,
               alpha_t: float, mu_t: float, beta: float, delta: float) -> AttackState:
    """Momentum direction scaled by an EMA of squared *momentums*.

    At beta = 0 the accumulator equals the squared current momentum, the
    scaled direction collapses to sign(g), and the method coincides with
    the plain momentum sign attack.
    """
    heavy_ball_direction(state, oracle, box, alpha_t, mu_t)
    _momentum_adaptive_finish(state, box, alpha_t, beta, delta)
    return state


# ---------------------------------------------------------------------------
# method objects
# ---------------------------------------------------------------------------

DirectionRule = Callable[[AttackState, Oracle, FeasibleBox, float, float], Vector]


class AttackMethod:
    """A named step rule plus its hyperparameters.

    ``init_state`` builds the starting state (the anchor unless the
    method randomizes), ``step`` advances it by one iteration.  A single
    state must never be shared between runs.
    """

    name = "abstract"
    one_shot = False

    def __init__(self, hyper: HyperParams):
        self.hyper = hyper

    def init_state(self, box: FeasibleBox, rng: np.random.Generator) -> AttackState:
        return AttackState.fresh(box.anchor)

    def step(self, state: AttackState, oracle: Oracle, box: FeasibleBox) -> None:
        raise NotImplementedError

    def _alpha(self, t: int) -> float:
        return schedule_value(self.hyper.step, t)

    def _mu(self, t: int) -> float:
        return schedule_value(self.hyper.momentum, t)


class Pgm(AttackMethod):
    name = "pgm"

    def step(self, state, oracle, box):
        pgm_step(state, oracle, box, self._alpha(state.t + 1))


class AdaGradAttack(AttackMethod):
    """Accumulated-gradient diagonal scaling with its own 1/sqrt(t) decay.

    The decay is part of the update rule, so the base step must be a
    ConstantStep; it is divided by sqrt(t) internally.
    """

    name = "adagrad"

    def __init__(self, hyper: HyperParams):
        super().__init__(hyper)
        if not hasattr(hyper.step, "alpha") or hyper.step.value(4) != hyper.step.value(1):
            raise ValueError("adagrad applies its own 1/sqrt(t) decay; use a ConstantStep")

    def step(self, state, oracle, box):
        adagrad_step(state, oracle, box, self.hyper.step.alpha, self.hyper.delta)


class Fgsm(AttackMethod):
    name = "fgsm"
    one_shot = True

    def step(self, state, oracle, box):
        state.x = fgsm(state.x, oracle, box, box.epsilon)
        state.t += 1


class Ifgsm(AttackMethod):
    name = "ifgsm"

    def step(self, state, oracle, box):
        ifgsm_step(state, oracle, box, self._alpha(state.t + 1))


class Pgd(Ifgsm):
    name = "pgd"

    def init_state(self, box, rng):
        return AttackState.fresh(pgd_init(box, rng))


class L1Ema(AttackMethod):
    name = "l1ema"

    def step(self, state, oracle, box):
        l1ema_step(state, oracle, box, self._alpha(state.t + 1),
                   self.hyper.beta, self.hyper.delta)


class MiFgsm(AttackMethod):
    name = "mifgsm"

    def step(self, state, oracle, box):
        t = state.t + 1
        mi_step(state, oracle, box, self._alpha(t), self._mu(t))


class NiFgsm(AttackMethod):
    name = "nifgsm"

    def step(self, state, oracle, box):
        t = state.t + 1
        ni_step(state, oracle, box, self._alpha(t), self._mu(t))


class AdaMiG(AttackMethod):
    name = "adamig"

    def step(self, state, oracle, box):
        t = state.t + 1
        adamig_step(state, oracle, box, self._alpha(t), self._mu(t),
                    self.hyper.beta, self.hyper.delta)


class AdaMi(AttackMethod):
    name = "adami"

    def step(self, state, oracle, box):
        t = state.t + 1
        adami_step(state, oracle, box, self._alpha(t), self._mu(t),
                   self.hyper.beta, self.hyper.delta)


class AdaWrapped(AttackMethod):
    """Momentum-adaptive wrapper around an arbitrary direction rule.

    The rule updates and returns the momentum vector; the wrapper then
    applies the shared EMA-of-squared-momentum scaling and projected
    step.  Wrapping the heavy-ball rule reproduces ``adami`` exactly.
    """

    def __init__(self, rule: DirectionRule, hyper: HyperParams, name: str = "adawrap"):
        super().__init__(hyper)
        self.rule = rule
        self.name = name

    def step(self, state, oracle, box):
        t = state.t + 1
        alpha_t, mu_t = self._alpha(t), self._mu(t)
        g_new = self.rule(state, oracle, box, alpha_t, mu_t)
        if g_new.shape != state.x.shape:
            raise ValueError(
                f"direction rule returned shape {g_new.shape}, expected {state.x.shape}")
        if g_new is not state.g:
            state.g[:] = g_new
        _momentum_adaptive_finish(state, box, alpha_t, self.hyper.beta, self.hyper.delta)


def ada_wrap(rule: DirectionRule, hyper: HyperParams, name: str = "adawrap") -> AdaWrapped:
    """Build the momentum-adaptive method induced by a direction rule."""
    return AdaWrapped(rule, hyper, name)


METHODS: dict[str, Callable[[HyperParams], AttackMethod]] = {
    "pgm": Pgm,
    "adagrad": AdaGradAttack,
    "fgsm": Fgsm,
    "ifgsm": Ifgsm,
    "pgd": Pgd,
    "l1ema": L1Ema,
    "mifgsm": MiFgsm,
    "nifgsm": NiFgsm,
    "adamig": AdaMiG,
    "adami": AdaMi,
    "adani": lambda hyper: AdaWrapped(nesterov_direction, hyper, name="adani"),
}


def make_method(name: str, hyper: HyperParams) -> AttackMethod:
    try:
        factory = METHODS[name]
    except KeyError:
        valid = ", ".join(sorted(METHODS))
        raise ValueError(f"unknown method {name!r}; valid methods: {valid}") from None
    return factory(hyper)


# ---------------------------------------------------------------------------
# run driver
# ---------------------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-iteration record of one attack run plus the final and averaged
    iterates.  ald is the L-infinity distance of the iterate from the
    anchor; step_inf the L-infinity size of the move that produced it."""

    method: str
    steps: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    ald: np.ndarray
    step_inf: np.ndarray
    momentum_norm: np.ndarray
    final_x: Vector
    avg_x: Vector

    def __len__(self) -> int:
        return self.steps.shape[0]

    @property
    def final_loss(self) -> float:
        return float(self.loss[-1])

    @property
    def final_ald(self) -> float:
        return float(self.ald[-1])


class AttackRunError(RuntimeError):
    """Raised when the oracle fails mid-run; carries the partial trace."""

    def __init__(self, message: str, trace: RunTrace):
        super().__init__(message)
        self.trace = trace


def run_attack(
    method: AttackMethod,
    oracle: Oracle,
    box: FeasibleBox,
    steps: int,
    rng: np.random.Generator | None = None,
    record_loss: bool = True,
) -> RunTrace:
    """Drive ``method`` for up to ``steps`` iterations and record the trace.

    One-shot methods stop after a single step regardless of the budget.
    Feasibility of every iterate is enforced, not assumed: a violation
    raises immediately.  With record_loss=False the loss/gradient columns
    are skipped (NaN) to spare one oracle evaluation per iteration.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if oracle.dim != box.dim:
        raise ValueError(f"oracle dim {oracle.dim} != box dim {box.dim}")
    if rng is None:
        rng = np.random.default_rng(0)

    state = method.init_state(box, rng)
    total = 1 if method.one_shot else steps
    loss = np.full(total, np.nan)
    grad_norm = np.full(total, np.nan)
    ald = np.zeros(total)
    step_inf = np.zeros(total)
    momentum_norm = np.zeros(total)
    avg = np.zeros(box.dim)
    prev = np.empty(box.dim)

    def partial(done: int) -> RunTrace:
        return RunTrace(method.name, np.arange(1, done + 1), loss[:done],
                        grad_norm[:done], ald[:done], step_inf[:done],
                        momentum_norm[:done], state.x.copy(), avg.copy())

    for i in range(total):
        prev[:] = state.x
        try:
            method.step(state, oracle, box)
        except Exception as exc:
            raise AttackRunError(
                f"{method.name} aborted at iteration {i + 1}: {exc}",
                partial(i)) from exc
        if not box.contains(state.x):
            raise RuntimeError(
                f"{method.name} produced an infeasible iterate at t={state.t}")
        ald[i] = backend.K.linf_diff(state.x, box.anchor)
        step_inf[i] = backend.K.linf_diff(state.x, prev)
        momentum_norm[i] = backend.K.l2_norm(state.g)
        avg += (state.x - avg) / (i + 1)
        if record_loss:
            li, gi = oracle.evaluate(state.x)
            loss[i] = li
            grad_norm[i] = backend.K.l2_norm(gi)

    return RunTrace(method.name, np.arange(1, total + 1), loss, grad_norm,
                    ald, step_inf, momentum_norm, state.x.copy(), avg)
