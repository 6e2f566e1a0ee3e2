"""Command-line interface.

Subcommands: ``attack``, ``transfer``, ``convergence``, ``sweep-beta``,
``gradcheck``, ``verify``.  Every subcommand accepts the shared flags
``--seed --epsilon --steps --alpha --beta --mu --lambda --delta
--method --out`` plus ``--config FILE``, a flat ``key = value`` text
file using the same keys as the long flags; explicit flags override the
file, the file overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ExperimentConfig, run_experiment
from .optimizers import METHODS

__all__ = ["main", "build_parser", "parse_config_file"]

_SUBCOMMAND_KIND = {
    "attack": "attack",
    "transfer": "transfer",
    "convergence": "convergence",
    "sweep-beta": "beta_sweep",
    "gradcheck": "gradcheck",
    "verify": "verify",
}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _methods(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


# key -> (argparse dest, converter applied to config-file strings)
_CONFIG_KEYS = {
    "seed": ("seed", int),
    "epsilon": ("epsilon", float),
    "steps": ("steps", int),
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "mu": ("mu", float),
    "lambda": ("lam", float),
    "delta": ("delta", float),
    "method": ("method", _methods),
    "out": ("out", str),
    "samples": ("samples", int),
    "train-samples": ("train_samples", int),
    "features": ("features", int),
    "classes": ("classes", int),
    "hidden": ("hidden", int),
    "spread": ("spread", float),
    "step-rule": ("step_rule", str),
    "betas": ("betas", _floats),
    "horizons": ("horizons", _ints),
    "points": ("gradcheck_points", int),
    "trace": ("trace", lambda v: v.lower() in ("1", "true", "yes", "on")),
    "dataset-csv": ("dataset_csv", str),
}


def parse_config_file(path: str) -> dict:
    """Read a flat ``key = value`` config file into argparse dest values."""
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip().replace("_", "-")
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            dest, conv = _CONFIG_KEYS[key]
            values[dest] = conv(value)
    return values


def _add_shared(sub: argparse.ArgumentParser, out_required: bool) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--epsilon", type=float, default=8.0 / 255.0,
                     help="L-infinity perturbation radius")
    sub.add_argument("--steps", type=int, default=10, help="iteration budget T")
    sub.add_argument("--alpha", type=float, default=None,
                     help="base step size (default: epsilon / steps)")
    sub.add_argument("--beta", type=float, default=0.9, help="EMA factor of the adaptive diagonal")
    sub.add_argument("--mu", type=float, default=1.0, help="momentum factor")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.999,
                     help="momentum decay per step (>= 1 keeps it constant)")
    sub.add_argument("--delta", type=float, default=1e-20, help="adaptive floor")
    sub.add_argument("--method", type=_methods, default=["adami"],
                     help="method name or comma-separated list "
                          f"({', '.join(sorted(METHODS))})")
    sub.add_argument("--out", required=out_required, default=None,
                     help="result CSV path (metadata JSON lands beside it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advopt",
        description="Box-constrained adversarial-perturbation optimizer benchmark",
        allow_abbrev=False)
    subs = parser.add_subparsers(dest="command", required=True)

    attack = subs.add_parser("attack", help="white-box attack suite on a surrogate model")
    transfer = subs.add_parser("transfer", help="attack a surrogate, score on a target model")
    sweep = subs.add_parser("sweep-beta", help="attack suite swept over the EMA factor beta")
    for sub in (attack, transfer, sweep):
        _add_shared(sub, out_required=True)
        sub.add_argument("--samples", type=int, default=200, help="attacked sample count")
        sub.add_argument("--train-samples", type=int, default=1000)
        sub.add_argument("--features", type=int, default=20)
        sub.add_argument("--classes", type=int, default=5)
        sub.add_argument("--hidden", type=int, default=32, help="target MLP hidden width")
        sub.add_argument("--spread", type=float, default=0.1, help="blob standard deviation")
        sub.add_argument("--step-rule", choices=("constant", "invsqrt"), default="constant")
        sub.add_argument("--trace", action="store_true", help="store per-iteration curves in JSON")
        sub.add_argument("--dataset-csv", default=None,
                         help="load samples from CSV instead of generating blobs")
    sweep.add_argument("--betas", type=_floats,
                       default=[0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.99])

    conv = subs.add_parser("convergence",
                           help="averaged-iterate gap decay on a seeded concave quadratic")
    _add_shared(conv, out_required=True)
    conv.add_argument("--horizons", type=_ints, default=[100, 400, 1600, 6400])
    conv.add_argument("--step-rule", choices=("constant", "invsqrt"), default="invsqrt")
    conv.add_argument("--trace", action="store_true")
    conv.set_defaults(alpha=0.8, beta=0.3)

    grad = subs.add_parser("gradcheck", help="finite-difference check of every oracle gradient")
    _add_shared(grad, out_required=True)
    grad.add_argument("--points", dest="gradcheck_points", type=int, default=100)

    verify = subs.add_parser("verify", help="run all theory checks; PASS/FAIL per invariant")
    _add_shared(verify, out_required=False)

    return parser


def _flag_given(argv: list[str], dest: str) -> bool:
    names = ["--" + key for key, (d, _) in _CONFIG_KEYS.items() if d == dest]
    return any(a in names or any(a.startswith(n + "=") for n in names) for a in argv)


def _resolve(args: argparse.Namespace, argv: list[str]) -> ExperimentConfig:
    if args.config:
        for dest, value in parse_config_file(args.config).items():
            if hasattr(args, dest) and not _flag_given(argv, dest):
                setattr(args, dest, value)
    fields = {
        "kind": _SUBCOMMAND_KIND[args.command],
        "out": args.out,
        "methods": args.method,
        "seed": args.seed,
        "epsilon": args.epsilon,
        "steps": args.steps,
        "alpha": args.alpha,
        "beta": args.beta,
        "mu": args.mu,
        "lam": args.lam,
        "delta": args.delta,
    }
    for dest in ("step_rule", "samples", "train_samples", "features", "classes",
                 "hidden", "spread", "betas", "horizons", "gradcheck_points",
                 "trace", "dataset_csv"):
        if hasattr(args, dest):
            fields[dest] = getattr(args, dest)
    return ExperimentConfig(**fields)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args, argv)
    except (ValueError, OSError) as exc:
        print(f"advopt: error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(cfg)
    except OSError as exc:
        print(f"advopt: error: {exc}", file=sys.stderr)
        return 1
    return 0 if summary["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
