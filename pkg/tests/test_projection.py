import numpy as np
import pytest

from advopt.core import FeasibleBox, box_membership
from advopt.projection import clip_box, project_q


def test_upper_face_clamp():
    box = FeasibleBox(np.array([0.5, 0.5]), 0.1)
    np.testing.assert_allclose(clip_box(box, np.array([0.75, 0.45])), [0.6, 0.45])


def test_identity_on_feasible_points(rng):
    box = FeasibleBox(rng.uniform(0.3, 0.7, 8), 0.2)
    for _ in range(50):
        z = rng.uniform(box.lower, box.upper)
        np.testing.assert_array_equal(clip_box(box, z), z)


def test_global_floor_dominates_ball():
    box = FeasibleBox(np.array([0.02]), 0.1)
    np.testing.assert_array_equal(clip_box(box, np.array([-0.5])), [0.0])


def test_projection_equals_clipping(rng):
    box = FeasibleBox(rng.uniform(0.2, 0.8, 12), 0.15)
    for _ in range(100):
        z = rng.uniform(-1.0, 2.0, 12)
        np.testing.assert_array_equal(project_q(box, z), clip_box(box, z))


def test_idempotence_exact(rng):
    box = FeasibleBox(rng.uniform(0.2, 0.8, 16), 0.3)
    for _ in range(100):
        once = project_q(box, rng.uniform(-2.0, 3.0, 16))
        np.testing.assert_array_equal(project_q(box, once), once)


def test_result_always_feasible(rng):
    box = FeasibleBox(rng.uniform(-0.4, 0.4, 10), 0.5, value_lo=-1.0, value_hi=1.0)
    for _ in range(200):
        assert box_membership(box, project_q(box, rng.uniform(-3.0, 3.0, 10)))


def test_non_expansive(rng):
    box = FeasibleBox(rng.uniform(0.3, 0.7, 24), 0.25)
    for _ in range(1000):
        z1 = rng.uniform(-2.0, 3.0, 24)
        z2 = rng.uniform(-2.0, 3.0, 24)
        d_proj = np.linalg.norm(project_q(box, z1) - project_q(box, z2))
        assert d_proj <= np.linalg.norm(z1 - z2) + 1e-12


def test_projection_moves_toward_feasible_points(rng):
    # distance to any feasible point never grows under projection
    box = FeasibleBox(rng.uniform(0.3, 0.7, 6), 0.2)
    for _ in range(1000):
        z = rng.uniform(-2.0, 3.0, 6)
        z_star = rng.uniform(box.lower, box.upper)
        assert (np.linalg.norm(project_q(box, z) - z_star)
                <= np.linalg.norm(z - z_star) + 1e-12)


def test_dimension_mismatch_is_usage_error():
    box = FeasibleBox(np.array([0.5, 0.5]), 0.1)
    with pytest.raises(ValueError, match="dimension"):
        clip_box(box, np.array([0.5, 0.5, 0.5]))
