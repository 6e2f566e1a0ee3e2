"""Attack-quality and convergence measurements."""

from __future__ import annotations

import numpy as np

from .core import FeasibleBox, Vector

__all__ = ["success_rate", "ald_inf", "convergence_gap", "rate_exponent"]


def success_rate(model, adversarial: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of adversarial inputs the model labels differently from the
    true label.  Argmax ties resolve to the lowest class index; a tie is a
    miss only when that index differs from the label."""
    adversarial = np.atleast_2d(np.asarray(adversarial, dtype=np.float64))
    labels = np.asarray(labels)
    if adversarial.shape[0] == 0:
        raise ValueError("success_rate needs at least one sample")
    if labels.shape[0] != adversarial.shape[0]:
        raise ValueError("one label per adversarial sample required")
    return float(np.mean(model.predict_batch(adversarial) != labels))


def ald_inf(adversarial: np.ndarray, anchors: np.ndarray) -> float:
    """Mean over samples of the L-infinity distortion ||x_adv - x||_inf.

    Unnormalized: the value is in raw coordinate units.
    """
    adversarial = np.atleast_2d(np.asarray(adversarial, dtype=np.float64))
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    if adversarial.shape != anchors.shape:
        raise ValueError(
            f"shape mismatch: {adversarial.shape} adversarial vs {anchors.shape} anchors")
    return float(np.abs(adversarial - anchors).max(axis=1).mean())


def convergence_gap(oracle, box: FeasibleBox, x_avg: Vector) -> float:
    """Optimality gap J(x*) - J(x_avg) against the oracle's closed-form
    maximizer over the box.  Tiny negative values (numerical noise) clamp
    to zero; anything beyond noise raises."""
    if not hasattr(oracle, "optimum_in"):
        raise ValueError("oracle does not expose a closed-form optimum")
    _, loss_star = oracle.optimum_in(box)
    loss_avg, _ = oracle.evaluate(x_avg)
    gap = loss_star - loss_avg
    if gap < 0.0:
        if gap < -1e-12:
            raise ValueError(f"averaged iterate beats the supposed optimum by {-gap:g}")
        return 0.0
    return float(gap)


def rate_exponent(gaps) -> tuple[float, float, float]:
    """Least-squares fit of log(gap) against log(T).

    ``gaps`` is a sequence of (T, gap) pairs with T strictly increasing.
    Non-positive gaps are dropped; fewer than 4 surviving points is an
    error.  Returns (slope, intercept, r_squared).
    """
    pts = [(float(T), float(g)) for T, g in gaps]
    horizons = [T for T, _ in pts]
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons T must be strictly increasing")
    pts = [(T, g) for T, g in pts if g > 0.0]
    if len(pts) < 4:
        raise ValueError(f"need >= 4 positive-gap points to fit, have {len(pts)}")
    logt = np.log([T for T, _ in pts])
    logg = np.log([g for _, g in pts])
    design = np.vstack([logt, np.ones_like(logt)]).T
    coef, *_ = np.linalg.lstsq(design, logg, rcond=None)
    resid = logg - design @ coef
    ss_tot = float(np.sum((logg - logg.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(coef[0]), float(coef[1]), r2
