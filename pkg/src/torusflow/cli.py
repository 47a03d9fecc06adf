"""Command-line entry point: ``torusflow <suite> [options]``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .verify import SUITES, ExperimentConfig, run_suite


def _k_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torusflow", description="Run verification suites for graph flows on the torus.")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--k", type=_k_list, dest="grids", help="comma-separated grid sizes")
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--delta", type=float)
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--tau", type=float)
    p.add_argument("--eps-prox", type=float, dest="eps_prox")
    p.add_argument("--quad-order", type=int, dest="quad_order")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--save-trajectories", action="store_true", default=None, dest="save_trajectories")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("config", "suite") and v is not None
    }
    overrides["suite"] = args.suite
    try:
        if args.config:
            cfg = ExperimentConfig.from_file(args.config, **overrides)
        else:
            cfg = ExperimentConfig(**overrides)
    except (ValueError, OSError) as exc:
        print(f"torusflow: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_suite(cfg)
    except OSError as exc:
        print(f"torusflow: cannot write results: {exc}", file=sys.stderr)
        return 2
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        k = "" if c.k is None else f" k={c.k}"
        print(f"{status} {c.name}{k} measured={c.measured:.3e} bound={c.bound:.3e}")
    print(f"{report.suite}: {len(report.checks) - len(report.failures())}/{len(report.checks)} checks passed")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
