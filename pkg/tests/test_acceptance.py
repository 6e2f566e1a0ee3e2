"""Acceptance suite: every release-gating criterion, one test each.

Each test prints one PASS/FAIL line with the measured values (visible
under ``pytest -s`` or on failure).  Criteria with a wall-clock budget
assert it after the session-wide kernel warmup, so jit compilation is
not billed to the checks themselves.
"""

import subprocess
import sys
import time

import pytest

from advopt.harness import ExperimentConfig, run_experiment
from advopt.verification import (
    check_beta_zero_reduction,
    check_feasibility,
    check_gradients,
    check_momentum_bound,
    check_oscillation,
    check_rate,
    check_sign_matrix_identity,
)

SEED = 0


def report(number: int, name: str, passed: bool, detail: str) -> None:
    print(f"[criterion {number}] {'PASS' if passed else 'FAIL'} {name}: {detail}")
    assert passed, f"criterion {number} ({name}): {detail}"


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def test_criterion_1_sign_matrix_identity():
    result, elapsed = timed(check_sign_matrix_identity, SEED, 10_000)
    detail = f"{result.detail}; {elapsed:.2f}s (budget 1s)"
    report(1, "sign-as-diagonal-matrix identity", result.passed and elapsed < 1.0, detail)


def test_criterion_2_beta_zero_reduction():
    result, elapsed = timed(check_beta_zero_reduction, SEED, 50, 10)
    detail = f"{result.detail}; {elapsed:.2f}s (budget 10s)"
    report(2, "beta=0 reduction to the momentum sign attack",
           result.passed and elapsed < 10.0, detail)


def test_criterion_3_momentum_bound():
    result, _ = timed(check_momentum_bound, SEED, 10_000)
    report(3, "momentum norm bound 1 + mu/(1-lam)", result.passed, result.detail)


def test_criterion_4_averaged_iterate_rate():
    result, elapsed = timed(check_rate, SEED)
    detail = f"{result.detail}; {elapsed:.2f}s (budget 30s)"
    report(4, "averaged-iterate gap decay exponent",
           result.passed and elapsed < 30.0, detail)


def test_criterion_5_feasibility():
    result, _ = timed(check_feasibility, SEED)
    report(5, "exact box membership of every iterate", result.passed, result.detail)


def test_criterion_6_sign_step_oscillation():
    result, _ = timed(check_oscillation, SEED)
    report(6, "sign-step 2-cycle vs adaptive convergence", result.passed, result.detail)


def test_criterion_7_gradient_correctness():
    result, _ = timed(check_gradients, SEED, 100)
    report(7, "analytic gradients vs central differences", result.passed, result.detail)


def test_criterion_8_desk_scale_transfer(tmp_path, capsys):
    cfg = ExperimentConfig(
        kind="transfer", out=str(tmp_path / "transfer.csv"), seed=SEED,
        epsilon=0.1, steps=10, samples=500, train_samples=1000, features=20,
        classes=5, methods=["fgsm", "mifgsm", "adami"])
    with capsys.disabled():
        summary, elapsed = timed(run_experiment, cfg)
    m = summary["metrics"]
    fgsm_wb = m["fgsm[beta=0.9]"]["white_box_success"]
    adami_wb = m["adami[beta=0.9]"]["white_box_success"]
    mi_tr = m["mifgsm[beta=0.9]"]["transfer_success"]
    adami_tr = m["adami[beta=0.9]"]["transfer_success"]
    ok = (fgsm_wb >= 0.5 and adami_wb >= fgsm_wb
          and adami_tr >= mi_tr - 0.02 and elapsed < 60.0)
    detail = (f"fgsm wb={fgsm_wb:.3f} (>=0.5), adami wb={adami_wb:.3f} (>=fgsm), "
              f"adami transfer={adami_tr:.3f} >= mifgsm {mi_tr:.3f} - 0.02; "
              f"{elapsed:.1f}s (budget 60s)")
    report(8, "desk-scale white-box and transfer ordering", ok, detail)


def _cli(args, cwd) -> None:
    proc = subprocess.run([sys.executable, "-m", "advopt.cli", *args],
                          cwd=cwd, capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stdout + proc.stderr


@pytest.mark.parametrize("label,args", [
    ("verify", ["verify", "--seed", "0", "--out", "verify.csv"]),
    ("attack", ["attack", "--seed", "3", "--epsilon", "0.1", "--steps", "5",
                "--samples", "40", "--train-samples", "200", "--features", "8",
                "--classes", "3", "--method", "adami,pgd,mifgsm",
                "--out", "attack.csv"]),
])
def test_criterion_9_byte_identical_reruns(label, args, tmp_path):
    outputs = []
    for _ in range(2):
        _cli(args, tmp_path)
        csv_path = tmp_path / args[-1]
        outputs.append((csv_path.read_bytes(),
                        csv_path.with_suffix(".json").read_bytes()))
    ok = outputs[0] == outputs[1]
    report(9, f"byte-identical re-run ({label})", ok,
           f"{len(outputs[0][0])} CSV bytes, {len(outputs[0][1])} JSON bytes compared")
