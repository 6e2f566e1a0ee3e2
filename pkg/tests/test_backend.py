"""The numba kernel build and the pure-numpy fallback must agree."""

import numpy as np
import pytest

from advopt import backend

BACKENDS = backend.available_backends()


def _case(rng, dim=37):
    return {
        "x": rng.uniform(0.1, 0.9, dim),
        "g": rng.standard_normal(dim),
        "grad": rng.standard_normal(dim),
        "v": rng.uniform(0.0, 2.0, dim),
        "lo": np.full(dim, 0.0),
        "hi": np.full(dim, 1.0),
    }


def _run_all(kernels, case):
    c = {k: v.copy() for k, v in case.items()}
    out = np.empty_like(c["g"])
    kernels.clamp(c["x"], c["lo"], c["hi"])
    kernels.plain_step(c["x"], c["g"], 0.01, c["lo"], c["hi"])
    kernels.sign_step(c["x"], c["g"], 0.01, c["lo"], c["hi"])
    kernels.adaptive_step(c["x"], c["g"], c["v"], 0.01, 1e-20, c["lo"], c["hi"])
    kernels.recip_step(c["x"], c["g"], c["v"], 0.01, 1e-20, c["lo"], c["hi"])
    kernels.ema_square(c["v"], c["g"], 0.9)
    kernels.ema_abs(c["v"], c["g"], 0.9)
    kernels.mean_square(c["v"], c["g"], 3)
    kernels.momentum(c["g"], c["grad"], 0.9, 0.1)
    kernels.sign_ratio(c["g"], 1e-20, out)
    scalars = (kernels.l1_norm(c["g"]), kernels.l2_norm(c["g"]),
               kernels.linf_diff(c["x"], c["lo"]))
    return c["x"], c["v"], c["g"], out, scalars


@pytest.mark.skipif(len(BACKENDS) < 2, reason="only one backend available")
def test_backends_agree(rng):
    case = _case(rng)
    results = {name: _run_all(backend.get_kernels(name), case) for name in BACKENDS}
    ref = results["numpy"]
    for name in BACKENDS:
        got = results[name]
        for r, g in zip(ref[:4], got[:4]):
            np.testing.assert_allclose(g, r, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(got[4], ref[4], rtol=1e-12)


@pytest.mark.parametrize("name", BACKENDS)
def test_clamp_respects_bounds(name, rng):
    k = backend.get_kernels(name)
    x = rng.uniform(-5, 5, 64)
    lo = np.full(64, -0.25)
    hi = np.full(64, 0.75)
    k.clamp(x, lo, hi)
    assert np.all(x >= lo) and np.all(x <= hi)


@pytest.mark.parametrize("name", BACKENDS)
def test_sign_ratio_zero_maps_to_zero(name):
    k = backend.get_kernels(name)
    g = np.array([0.0, 2.0, -3.0])
    out = np.empty(3)
    k.sign_ratio(g, 0.0, out)
    assert out[0] == 0.0
    assert out[1] == 1.0 and out[2] == -1.0


@pytest.mark.parametrize("name", BACKENDS)
def test_sign_ratio_exact_over_wide_magnitudes(name):
    # hypot keeps the delta=0 identity exact even where g*g would
    # underflow or overflow
    k = backend.get_kernels(name)
    g = np.array([1e-300, -1e-300, 1e300, -1e300, 5e-324])
    out = np.empty(g.shape[0])
    k.sign_ratio(g, 0.0, out)
    np.testing.assert_array_equal(out, np.sign(g))


def test_use_switches_and_restores():
    original = backend.backend_name()
    try:
        assert backend.use("numpy") == "numpy"
        assert backend.backend_name() == "numpy"
    finally:
        backend.use(original)
    assert backend.backend_name() == original


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="unknown backend"):
        backend.get_kernels("cuda")
