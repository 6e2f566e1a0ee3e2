"""Clipping onto the feasible box.

Euclidean projection onto an axis-aligned box is coordinate-wise
clamping, so the familiar clip operator of iterative attacks and the
projection step of a projected gradient method are one computation.
Both names are exposed.
"""

from __future__ import annotations

from . import backend
from .core import FeasibleBox, Vector, as_vector

__all__ = ["clip_box", "project_q"]


def clip_box(box: FeasibleBox, z) -> Vector:
    """Clamp z into the box, coordinate by coordinate.

    result_i = min(upper_i, max(lower_i, z_i)) with lower/upper the
    precomputed bounds of ``box``.  Identity on feasible points.
    """
    z = as_vector(z)
    if z.shape[0] != box.dim:
        raise ValueError(f"dimension mismatch: box has {box.dim}, point has {z.shape[0]}")
    out = z.copy()
    backend.K.clamp(out, box.lower, box.upper)
    return out


def project_q(box: FeasibleBox, z) -> Vector:
    """Euclidean projection onto the box; identical to :func:`clip_box`."""
    return clip_box(box, z)
