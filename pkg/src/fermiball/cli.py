"""Batch front-end: config parsing, experiment orchestration, CSV/JSON output.

Exit codes: 0 success, 1 invalid configuration, 2 at least one experiment
failed (the remaining experiments still run and the manifest records the
failure).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from fractions import Fraction

import numpy as np

from .experiments import EXPERIMENTS, load_config, run_experiments

__all__ = ["main", "solve_kfermi_for_n"]

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "FERMIBALL_OUT"


def _cumulative_counts(norm_sq_max: int) -> np.ndarray:
    """counts[m] = number of lattice points with |p|^2 <= m."""
    r = int(math.isqrt(norm_sq_max))
    ax = np.arange(-r, r + 1, dtype=np.int64)
    hist = np.zeros(norm_sq_max + 1, dtype=np.int64)
    for x in ax.tolist():
        q0 = x * x
        if q0 > norm_sq_max:
            continue
        yy, zz = np.meshgrid(ax, ax, indexing="ij")
        q = q0 + yy * yy + zz * zz
        q = q[q <= norm_sq_max]
        hist += np.bincount(q.ravel(), minlength=norm_sq_max + 1)
    return np.cumsum(hist)


def _solve_ksq_for_n(n_target: int) -> tuple[Fraction, int]:
    """Smallest half-integer squared radius whose ball has n_target points,
    or the nearest attainable count."""
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    guess = (3.0 * n_target / (4.0 * math.pi)) ** (1.0 / 3.0)
    hi = int(math.ceil((guess + 2.0) ** 2)) + 2
    while True:
        cum = _cumulative_counts(hi)
        if cum[-1] >= n_target:
            break
        hi *= 2
    exact = np.nonzero(cum == n_target)[0]
    if len(exact):
        m = int(exact[0])
        return Fraction(2 * m + 1, 2), n_target
    m = int(np.argmin(np.abs(cum - n_target)))
    return Fraction(2 * m + 1, 2), int(cum[m])


def solve_kfermi_for_n(n_target: int) -> float:
    """Fermi radius whose ball holds n_target momenta (nearest match, warned)."""
    ksq, n_actual = _solve_ksq_for_n(n_target)
    if n_actual != n_target:
        log.warning(
            "no radius yields exactly N=%d; nearest attainable is N=%d at k_F^2=%s",
            n_target,
            n_actual,
            ksq,
        )
    return math.sqrt(float(ksq))


def _read_config(path: str, output_override=None):
    with open(path) as fh:
        doc = json.load(fh)
    return load_config(doc, output_override=output_override)


def _cmd_run(args) -> int:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV)
    try:
        config = _read_config(args.config, output_override=out)
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    if args.workers:
        config.workers = args.workers
    if not config.experiments:
        config.experiments = []
    manifest, all_ok = run_experiments(config)
    for name, entry in manifest["experiments"].items():
        status = entry["status"]
        extra = entry.get("file", entry.get("error", ""))
        print(f"{name}: {status} {extra}")
    print(f"manifest: {config.output_dir / 'manifest.json'}")
    return 0 if all_ok else 2


def _cmd_list(_args) -> int:
    for name in EXPERIMENTS:
        print(name)
    return 0


def _cmd_validate(args) -> int:
    try:
        config = _read_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(f"invalid: {err}", file=sys.stderr)
        return 1
    print(
        f"ok: k_fermi_sq={config.k_fermi_sq} m_patches={config.m_patches} "
        f"delta={config.delta} experiments={config.experiments}"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fermiball",
        description="Fermi-ball lattice experiments: counting, patches, kernels, RPA energies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiments named in a config")
    p_run.add_argument("--config", required=True, help="path to a JSON run config")
    p_run.add_argument("--workers", type=int, default=None, help="parallel experiment count")
    p_run.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or config)")
    p_run.set_defaults(fn=_cmd_run)

    p_list = sub.add_parser("list-experiments", help="print the experiment registry")
    p_list.set_defaults(fn=_cmd_list)

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
