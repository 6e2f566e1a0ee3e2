"""Vector kernels behind every optimizer step, in two interchangeable builds.

The hot path of an attack run is a handful of coordinate-wise updates on
small-to-medium float64 vectors.  Those kernels exist twice here:

* a numba ``@njit`` build (explicit loops, cached to disk), and
* a pure-numpy build (vectorized, allocation-free where possible).

The active build is chosen once at import from the ``ADVOPT_BACKEND``
environment variable: ``numba`` (required, raise if unavailable),
``numpy`` (force the fallback), or ``auto`` (default: numba when it
imports, numpy otherwise).  ``use()`` switches at runtime, which the
benchmark and the backend-equivalence tests rely on.

All kernels treat their first array argument as owned scratch and update
it in place unless noted.  Both builds compute the same expressions;
reductions may differ in the last ulp because numpy sums pairwise.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

__all__ = ["kernels", "use", "backend_name", "get_kernels", "available_backends"]


# ---------------------------------------------------------------------------
# pure-numpy build
# ---------------------------------------------------------------------------

def _np_clamp(x, lo, hi):
    """x <- min(hi, max(lo, x)), in place."""
    np.maximum(x, lo, out=x)
    np.minimum(x, hi, out=x)


def _np_plain_step(x, g, alpha, lo, hi):
    """x <- clamp(x + alpha * g), in place."""
    x += alpha * g
    _np_clamp(x, lo, hi)


def _np_sign_step(x, g, alpha, lo, hi):
    """x <- clamp(x + alpha * sign(g)), in place; sign(0) = 0."""
    x += alpha * np.sign(g)
    _np_clamp(x, lo, hi)


def _np_adaptive_step(x, g, v, alpha, delta, lo, hi):
    """x <- clamp(x + alpha * g / sqrt(v + delta)), in place."""
    x += alpha * g / np.sqrt(v + delta)
    _np_clamp(x, lo, hi)


def _np_recip_step(x, g, v, alpha, delta, lo, hi):
    """x <- clamp(x + alpha * g / (v + delta)), in place."""
    x += alpha * g / (v + delta)
    _np_clamp(x, lo, hi)


def _np_ema_square(v, g, beta):
    """v <- beta * v + (1 - beta) * g**2, in place."""
    v *= beta
    v += (1.0 - beta) * g * g


def _np_ema_abs(v, g, beta):
    """v <- beta * v + (1 - beta) * |g|, in place."""
    v *= beta
    v += (1.0 - beta) * np.abs(g)


def _np_mean_square(v, g, t):
    """Fold g**2 into the running mean of squares with count t, in place."""
    v *= (t - 1.0) / t
    v += g * g / t


def _np_momentum(g, grad, mu, scale):
    """g <- mu * g + scale * grad, in place."""
    g *= mu
    g += scale * grad


def _np_sign_ratio(g, delta, out):
    """out <- g / sqrt(g**2 + delta) with the 0/0 := 0 convention.

    Computed via hypot so the identity with sign(g) at delta == 0 is exact
    across the whole finite float range.
    """
    denom = np.hypot(g, math.sqrt(delta))
    out[:] = 0.0
    np.divide(g, denom, out=out, where=denom != 0.0)


def _np_l1_norm(g):
    return float(np.abs(g).sum())


def _np_l2_norm(g):
    return float(np.sqrt((g * g).sum()))


def _np_linf_diff(a, b):
    return float(np.abs(a - b).max())


_NUMPY = SimpleNamespace(
    name="numpy",
    clamp=_np_clamp,
    plain_step=_np_plain_step,
    sign_step=_np_sign_step,
    adaptive_step=_np_adaptive_step,
    recip_step=_np_recip_step,
    ema_square=_np_ema_square,
    ema_abs=_np_ema_abs,
    mean_square=_np_mean_square,
    momentum=_np_momentum,
    sign_ratio=_np_sign_ratio,
    l1_norm=_np_l1_norm,
    l2_norm=_np_l2_norm,
    linf_diff=_np_linf_diff,
)


# ---------------------------------------------------------------------------
# numba build: same kernels as explicit loops
# ---------------------------------------------------------------------------

_NUMBA_CACHE = None


def _build_numba():
    from numba import njit

    jit = lambda f: njit(cache=True)(f)  # noqa: E731

    @jit
    def clamp(x, lo, hi):
        for i in range(x.shape[0]):
            if x[i] < lo[i]:
                x[i] = lo[i]
            elif x[i] > hi[i]:
                x[i] = hi[i]

    @jit
    def plain_step(x, g, alpha, lo, hi):
        for i in range(x.shape[0]):
            xi = x[i] + alpha * g[i]
            if xi < lo[i]:
                xi = lo[i]
            elif xi > hi[i]:
                xi = hi[i]
            x[i] = xi

    @jit
    def sign_step(x, g, alpha, lo, hi):
        for i in range(x.shape[0]):
            s = 0.0
            if g[i] > 0.0:
                s = 1.0
            elif g[i] < 0.0:
                s = -1.0
            xi = x[i] + alpha * s
            if xi < lo[i]:
                xi = lo[i]
            elif xi > hi[i]:
                xi = hi[i]
            x[i] = xi

    @jit
    def adaptive_step(x, g, v, alpha, delta, lo, hi):
        for i in range(x.shape[0]):
            xi = x[i] + alpha * g[i] / math.sqrt(v[i] + delta)
            if xi < lo[i]:
                xi = lo[i]
            elif xi > hi[i]:
                xi = hi[i]
            x[i] = xi

    @jit
    def recip_step(x, g, v, alpha, delta, lo, hi):
        for i in range(x.shape[0]):
            xi = x[i] + alpha * g[i] / (v[i] + delta)
            if xi < lo[i]:
                xi = lo[i]
            elif xi > hi[i]:
                xi = hi[i]
            x[i] = xi

    @jit
    def ema_square(v, g, beta):
        for i in range(v.shape[0]):
            v[i] = beta * v[i] + (1.0 - beta) * g[i] * g[i]

    @jit
    def ema_abs(v, g, beta):
        for i in range(v.shape[0]):
            v[i] = beta * v[i] + (1.0 - beta) * abs(g[i])

    @jit
    def mean_square(v, g, t):
        keep = (t - 1.0) / t
        for i in range(v.shape[0]):
            v[i] = v[i] * keep + g[i] * g[i] / t

    @jit
    def momentum(g, grad, mu, scale):
        for i in range(g.shape[0]):
            g[i] = mu * g[i] + scale * grad[i]

    @jit
    def sign_ratio(g, delta, out):
        sq = math.sqrt(delta)
        for i in range(g.shape[0]):
            denom = math.hypot(g[i], sq)
            out[i] = g[i] / denom if denom != 0.0 else 0.0

    @jit
    def l1_norm(g):
        s = 0.0
        for i in range(g.shape[0]):
            s += abs(g[i])
        return s

    @jit
    def l2_norm(g):
        s = 0.0
        for i in range(g.shape[0]):
            s += g[i] * g[i]
        return math.sqrt(s)

    @jit
    def linf_diff(a, b):
        m = 0.0
        for i in range(a.shape[0]):
            d = abs(a[i] - b[i])
            if d > m:
                m = d
        return m

    return SimpleNamespace(
        name="numba",
        clamp=clamp,
        plain_step=plain_step,
        sign_step=sign_step,
        adaptive_step=adaptive_step,
        recip_step=recip_step,
        ema_square=ema_square,
        ema_abs=ema_abs,
        mean_square=mean_square,
        momentum=momentum,
        sign_ratio=sign_ratio,
        l1_norm=l1_norm,
        l2_norm=l2_norm,
        linf_diff=linf_diff,
    )


def get_kernels(name: str = "auto") -> SimpleNamespace:
    """Return the kernel namespace for ``name`` (auto | numba | numpy)."""
    global _NUMBA_CACHE
    name = name.lower()
    if name == "numpy":
        return _NUMPY
    if name in ("numba", "auto"):
        if _NUMBA_CACHE is None:
            try:
                _NUMBA_CACHE = _build_numba()
            except ImportError:
                if name == "numba":
                    raise
                return _NUMPY
        return _NUMBA_CACHE
    raise ValueError(f"unknown backend {name!r}; expected auto, numba or numpy")


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        get_kernels("numba")
        names.insert(0, "numba")
    except ImportError:
        pass
    return names


K = get_kernels(os.environ.get("ADVOPT_BACKEND", "auto"))


def use(name: str) -> str:
    """Switch the active backend; returns the name of the one now active."""
    global K
    K = get_kernels(name)
    return K.name


def kernels() -> SimpleNamespace:
    return K


def backend_name() -> str:
    return K.name
