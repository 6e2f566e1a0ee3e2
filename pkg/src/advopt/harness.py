"""Experiment runner behind the CLI.

Every experiment is fully determined by its config: the master seed is
split into per-purpose sub-seeds through splitmix64 (documented in the
README) so serial and parallel executions agree, and result files never
contain wall-clock data -- re-running the same config must reproduce the
same bytes.  Wall times are printed to stdout instead.

Output contract per experiment kind:

* attack / transfer / beta_sweep -- CSV columns
  ``method,beta,seed,success_rate,ald_inf,final_loss,gap_avg_iterate,wall_ms``
  (one aggregate row per method and beta; wall_ms is fixed at 0 in files),
  plus a JSON metadata record echoing the config.
* convergence -- CSV columns
  ``method,seed,T,gap_avg_iterate,gap_final_iterate,slope,r2``.
* gradcheck -- CSV columns ``oracle,points,max_rel_error,tolerance,status``.
* verify -- CSV columns ``check,status,detail`` and a nonzero exit when
  any check fails.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, backend
from .core import FeasibleBox, HyperParams, default_hyperparams
from .metrics import ald_inf, convergence_gap, rate_exponent, success_rate
from .optimizers import METHODS, make_method, run_attack
from .oracles import ModelOracle, SyntheticDataset, train_model
from .verification import rate_problem, run_all_checks, gradient_check_points
from .oracles import fd_gradient

__all__ = ["ExperimentConfig", "run_experiment", "splitmix64", "sample_seed", "KINDS"]

KINDS = ("attack", "transfer", "convergence", "beta_sweep", "gradcheck", "verify")

_MASK64 = (1 << 64) - 1

# Sub-seed streams sit far above any plausible sample index.
_DATA_OFFSET = 1 << 32
_SURROGATE_OFFSET = (1 << 32) + 1
_TARGET_OFFSET = (1 << 32) + 2


def splitmix64(z: int) -> int:
    """One splitmix64 mixing round; the documented seed-derivation function."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def sample_seed(master: int, index: int) -> int:
    """Per-sample sub-seed: splitmix64 of master + sample index."""
    return splitmix64((master + index) & _MASK64)


@dataclass
class ExperimentConfig:
    """Resolved settings of one experiment; echoed verbatim into the JSON
    metadata record."""

    kind: str
    out: str | None = None
    methods: list[str] = field(default_factory=lambda: ["adami"])
    seed: int = 0
    epsilon: float = 8.0 / 255.0
    steps: int = 10
    alpha: float | None = None
    beta: float = 0.9
    mu: float = 1.0
    lam: float = 0.999
    delta: float = 1e-20
    step_rule: str = "constant"
    samples: int = 200
    train_samples: int = 1000
    features: int = 20
    classes: int = 5
    hidden: int = 32
    spread: float = 0.1
    dim: int = 10
    betas: list[float] | None = None
    horizons: list[int] = field(default_factory=lambda: [100, 400, 1600, 6400])
    gradcheck_points: int = 100
    trace: bool = False
    dataset_csv: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; valid: {', '.join(KINDS)}")
        for name in self.methods:
            if name not in METHODS:
                valid = ", ".join(sorted(METHODS))
                raise ValueError(f"unknown method {name!r}; valid methods: {valid}")
        if self.kind != "verify" and self.out is None:
            raise ValueError(f"experiment kind {self.kind!r} requires an output path")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.samples > self.train_samples:
            raise ValueError("samples cannot exceed train_samples")
        if self.betas is not None and any(not 0.0 <= b <= 1.0 for b in self.betas):
            raise ValueError("beta values must lie in [0, 1]")
        if len(self.horizons) != len(set(self.horizons)) or sorted(self.horizons) != self.horizons:
            raise ValueError("horizons must be strictly increasing")

    def hyper(self, beta: float | None = None) -> HyperParams:
        return default_hyperparams(
            epsilon=self.epsilon, steps=self.steps, alpha=self.alpha,
            beta=self.beta if beta is None else beta, delta=self.delta,
            mu=self.mu, lam=self.lam, step_rule=self.step_rule)


def _thread_count() -> int:
    raw = os.environ.get("ADVOPT_THREADS", "1").strip() or "1"
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def _map_samples(fn, items):
    """Apply fn to items, optionally on a thread pool; order is preserved
    so downstream aggregation is schedule-independent."""
    workers = _thread_count()
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(json.dumps(payload, sort_keys=True, indent=2))
        f.write("\n")


def _json_paths(out: Path) -> Path:
    return out.with_suffix(".json") if out.suffix != ".json" else out.with_suffix(".meta.json")


def _metadata(cfg: ExperimentConfig, per_method: dict) -> dict:
    return {
        "config": asdict(cfg),
        "version": __version__,
        "backend": backend.backend_name(),
        "metrics": per_method,
        "timing_note": "wall-clock timings are printed to stdout only; "
                       "files are byte-deterministic in the seed",
    }


# ---------------------------------------------------------------------------
# attack-style experiments
# ---------------------------------------------------------------------------

def _load_dataset(cfg: ExperimentConfig) -> SyntheticDataset:
    if cfg.dataset_csv is not None:
        return SyntheticDataset.from_csv(cfg.dataset_csv)
    return SyntheticDataset.blobs(
        seed=splitmix64(cfg.seed + _DATA_OFFSET), samples=cfg.train_samples,
        features=cfg.features, classes=cfg.classes, spread=cfg.spread)


def _attack_one(cfg: ExperimentConfig, surrogate, xs, ys, method_name: str,
                beta: float):
    """Attack every sample with one (method, beta) setting; returns the
    aggregate metrics and the stacked adversarial points."""
    hyper = cfg.hyper(beta=beta)
    n = xs.shape[0]

    def craft(i: int):
        box = FeasibleBox(xs[i], cfg.epsilon)
        oracle = ModelOracle(surrogate, int(ys[i]))
        method = make_method(method_name, hyper)
        rng = np.random.default_rng(sample_seed(cfg.seed, i))
        trace = run_attack(method, oracle, box, cfg.steps, rng=rng)
        return trace.final_x, trace.final_loss, trace.loss, trace.ald

    results = _map_samples(craft, range(n))
    x_adv = np.vstack([r[0] for r in results])
    final_losses = np.array([r[1] for r in results])
    mean_loss_curve = np.mean(np.vstack([r[2] for r in results]), axis=0)
    mean_ald_curve = np.mean(np.vstack([r[3] for r in results]), axis=0)
    return x_adv, final_losses, mean_loss_curve, mean_ald_curve


def _run_attack_suite(cfg: ExperimentConfig) -> dict:
    dataset = _load_dataset(cfg)
    surrogate = train_model(dataset, "linear",
                            np.random.default_rng(splitmix64(cfg.seed + _SURROGATE_OFFSET)))
    target = None
    if cfg.kind == "transfer":
        target = train_model(dataset, "mlp",
                             np.random.default_rng(splitmix64(cfg.seed + _TARGET_OFFSET)),
                             hidden=cfg.hidden)
    xs, ys = dataset.x[:cfg.samples], dataset.y[:cfg.samples]

    betas = cfg.betas if cfg.kind == "beta_sweep" and cfg.betas else [cfg.beta]
    rows = []
    per_method: dict[str, dict] = {}
    for method_name in cfg.methods:
        for beta in betas:
            started = time.perf_counter()
            x_adv, final_losses, loss_curve, ald_curve = _attack_one(
                cfg, surrogate, xs, ys, method_name, beta)
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            white = success_rate(surrogate, x_adv, ys)
            ald = ald_inf(x_adv, xs)
            if ald > cfg.epsilon + 1e-12:
                raise RuntimeError(
                    f"{method_name}: mean distortion {ald} exceeds epsilon {cfg.epsilon}")
            entry = {
                "white_box_success": white,
                "ald_inf": ald,
                "mean_final_loss": float(final_losses.mean()),
                "runtime_ms": 0.0,
            }
            if target is not None:
                entry["transfer_success"] = success_rate(target, x_adv, ys)
            if cfg.trace:
                entry["trace"] = {"mean_loss": loss_curve.tolist(),
                                  "mean_ald": ald_curve.tolist()}
            per_method[f"{method_name}[beta={_fmt(beta)}]"] = entry
            headline = entry.get("transfer_success", white)
            rows.append([method_name, beta, cfg.seed, headline, ald,
                         float(final_losses.mean()), None, 0])
            print(f"{cfg.kind} {method_name} beta={beta:g}: success={headline:.4f} "
                  f"ald={ald:.6f} ({elapsed_ms:.1f} ms)")

    rows.sort(key=lambda r: (r[0], r[1]))
    out = Path(cfg.out)
    _write_csv(out, ["method", "beta", "seed", "success_rate", "ald_inf",
                     "final_loss", "gap_avg_iterate", "wall_ms"], rows)
    _write_json(_json_paths(out), _metadata(cfg, per_method))
    return {"rows": rows, "metrics": per_method, "ok": True}


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def _run_convergence(cfg: ExperimentConfig) -> dict:
    oracle, box = rate_problem(cfg.seed)
    rows = []
    per_method: dict[str, dict] = {}
    for method_name in cfg.methods:
        started = time.perf_counter()
        gaps_avg, gaps_final = [], []
        traces = {}
        for horizon in cfg.horizons:
            hyper = default_hyperparams(
                epsilon=box.epsilon, steps=horizon, alpha=cfg.alpha, beta=cfg.beta,
                delta=cfg.delta, mu=cfg.mu, lam=cfg.lam, step_rule=cfg.step_rule)
            trace = run_attack(make_method(method_name, hyper), oracle, box,
                               horizon, rng=np.random.default_rng(sample_seed(cfg.seed, 0)),
                               record_loss=cfg.trace)
            gaps_avg.append((horizon, convergence_gap(oracle, box, trace.avg_x)))
            gaps_final.append((horizon, convergence_gap(oracle, box, trace.final_x)))
            if cfg.trace:
                traces[str(horizon)] = trace.loss.tolist()
        try:
            slope, _, r2 = rate_exponent(gaps_avg)
        except ValueError:
            slope, r2 = float("nan"), float("nan")
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        for (horizon, g_avg), (_, g_fin) in zip(gaps_avg, gaps_final):
            rows.append([method_name, cfg.seed, horizon, g_avg, g_fin, slope, r2])
        entry = {
            "gap_avg_iterate": {str(T): g for T, g in gaps_avg},
            "gap_final_iterate": {str(T): g for T, g in gaps_final},
            "slope": slope,
            "r2": r2,
            "runtime_ms": 0.0,
        }
        if cfg.trace:
            entry["trace"] = traces
        per_method[method_name] = entry
        print(f"convergence {method_name}: slope={slope:.4f} r2={r2:.4f} "
              f"({elapsed_ms:.1f} ms)")

    out = Path(cfg.out)
    _write_csv(out, ["method", "seed", "T", "gap_avg_iterate",
                     "gap_final_iterate", "slope", "r2"], rows)
    _write_json(_json_paths(out), _metadata(cfg, per_method))
    return {"rows": rows, "metrics": per_method, "ok": True}


# ---------------------------------------------------------------------------
# gradcheck and verify
# ---------------------------------------------------------------------------

def _run_gradcheck(cfg: ExperimentConfig) -> dict:
    tol = 1e-5
    worst: dict[str, float] = {}
    counts: dict[str, int] = {}
    for name, oracle, x in gradient_check_points(cfg.seed, cfg.gradcheck_points):
        _, grad = oracle.evaluate(x)
        approx = fd_gradient(oracle, x, 1e-5)
        rel = float(np.linalg.norm(approx - grad)) / max(float(np.linalg.norm(grad)), 1e-12)
        worst[name] = max(worst.get(name, 0.0), rel)
        counts[name] = counts.get(name, 0) + 1
    rows = [[name, counts[name], worst[name], tol,
             "PASS" if worst[name] < tol else "FAIL"] for name in sorted(worst)]
    ok = all(r[-1] == "PASS" for r in rows)
    for row in rows:
        print(f"gradcheck {row[0]}: max_rel={row[2]:.3e} -> {row[-1]}")
    out = Path(cfg.out)
    _write_csv(out, ["oracle", "points", "max_rel_error", "tolerance", "status"], rows)
    _write_json(_json_paths(out), _metadata(cfg, {
        name: {"points": counts[name], "max_rel_error": worst[name]} for name in worst}))
    return {"rows": rows, "ok": ok}


def _run_verify(cfg: ExperimentConfig) -> dict:
    results = run_all_checks(cfg.seed)
    for res in results:
        print(f"{res.status} {res.name}: {res.detail}")
    ok = all(r.passed for r in results)
    print(f"verify: {sum(r.passed for r in results)}/{len(results)} checks passed")
    if cfg.out is not None:
        out = Path(cfg.out)
        rows = [[r.name, r.status, r.detail] for r in results]
        _write_csv(out, ["check", "status", "detail"], rows)
        _write_json(_json_paths(out), _metadata(cfg, {
            r.name: {"status": r.status, "detail": r.detail} for r in results}))
    return {"results": results, "ok": ok}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; writes result files and returns a summary."""
    if cfg.kind in ("attack", "transfer", "beta_sweep"):
        return _run_attack_suite(cfg)
    if cfg.kind == "convergence":
        return _run_convergence(cfg)
    if cfg.kind == "gradcheck":
        return _run_gradcheck(cfg)
    return _run_verify(cfg)
