"""Batch command line front end.

Subcommands::

    qunravel classify    --config cfg.json [--seed N]
    qunravel simulate    --config cfg.json [--seed N] [--workers N] [--out DIR]
    qunravel validate    --config cfg.json [--seed N] [--workers N] [--out DIR]
    qunravel list-models

Exit codes: 0 success/pass, 1 usage or configuration error, 2 scientific
failure (non-positive generator, failed validation, or a trajectory
hitting a state where the rate operator turns negative).

The run configuration is a JSON file; matrices and states are row-major
lists of [re, im] pairs.  Recognized keys::

    {
      "generator": {"name": "pauli", "params": {"g1": 1, "g2": 1, "g3": -0.4}},
                    # or {"file": "generator.json"}
      "unraveling": "qsd",        # "qsd" | "jump" | "cp-qsd"
                                  # or {"diffusive_s": "identity"}
                                  # or {"diffusive_s": [<pairs>]}
      "initial_state": [[re, im], ...],      # needed by simulate/validate
      "dt": 1e-3, "t_final": 2.0,
      "n_trajectories": 1000,
      "seed": 42,
      "record_stride": 20,
      "tolerance": 0.03,                     # validate only
      "classify": {"n_samples": 1000, "refine": true}   # classify only
    }

``simulate`` and ``validate`` re-emit the effective configuration next to
their outputs; re-running from that copy reproduces the results
bit-exactly on the same platform.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .ensemble import ensemble_average, mc_error_series, run_ensemble, validate_unraveling
from .generators import Liouvillian, check_positivity, load_generator, matrix_from_pairs
from .models import CATALOG, build_model
from .trajectories import CpQsd, Diffusive, Jump, NotPositiveAtState, TrajectoryConfig


class UsageError(Exception):
    """Configuration or argument problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc


def _generator_from_config(cfg: dict) -> Liouvillian:
    try:
        spec = cfg["generator"]
    except KeyError:
        raise UsageError("config is missing the 'generator' section")
    if "file" in spec:
        try:
            return load_generator(spec["file"])
        except (OSError, ValueError) as exc:
            raise UsageError(f"bad generator file: {exc}") from exc
    if "name" in spec:
        try:
            return build_model(spec["name"], spec.get("params"))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad generator spec: {exc}") from exc
    raise UsageError("generator section needs 'name' or 'file'")


def _unraveling_from_config(cfg: dict):
    u = cfg.get("unraveling", "qsd")
    if isinstance(u, str):
        key = u.lower()
        if key == "qsd":
            return Diffusive(None)
        if key == "jump":
            return Jump()
        if key in ("cp-qsd", "cp_qsd"):
            return CpQsd()
        raise UsageError(f"unknown unraveling {u!r}")
    if isinstance(u, dict) and "diffusive_s" in u:
        s = u["diffusive_s"]
        if isinstance(s, str):
            return Diffusive(s)
        try:
            m = int(round(np.sqrt(len(s))))
            return Diffusive(matrix_from_pairs(s, m, m))
        except ValueError as exc:
            raise UsageError(f"bad diffusive_s matrix: {exc}") from exc
    raise UsageError(f"unknown unraveling section {u!r}")


def _state_from_config(cfg: dict, dim: int) -> np.ndarray:
    if "initial_state" not in cfg:
        raise UsageError("config is missing 'initial_state'")
    vec = np.asarray(cfg["initial_state"], dtype=float)
    if vec.shape != (dim, 2):
        raise UsageError(f"initial_state must be {dim} [re, im] pairs")
    psi = vec[:, 0] + 1j * vec[:, 1]
    nrm = np.linalg.norm(psi)
    if nrm < 1e-12:
        raise UsageError("initial_state has zero norm")
    return psi / nrm


def _trajectory_config(cfg: dict, lv: Liouvillian, seed_override: int | None) -> TrajectoryConfig:
    seed = int(cfg.get("seed", 0)) if seed_override is None else seed_override
    try:
        return TrajectoryConfig(
            generator=lv,
            initial_state=_state_from_config(cfg, lv.dim),
            dt=float(cfg["dt"]),
            t_final=float(cfg["t_final"]),
            unraveling=_unraveling_from_config(cfg),
            seed=seed,
            record_stride=int(cfg.get("record_stride", 1)),
        )
    except KeyError as exc:
        raise UsageError(f"config is missing key {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"bad trajectory configuration: {exc}") from exc


def _effective_config(cfg: dict, seed_override: int | None) -> dict:
    out = dict(cfg)
    if seed_override is not None:
        out["seed"] = seed_override
    return out


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _density_header(dim: int) -> list[str]:
    cols = ["t"]
    for i in range(dim):
        for j in range(i, dim):
            cols.append(f"re_rho_{i}_{j}")
            cols.append(f"im_rho_{i}_{j}")
    if dim == 2:
        cols += ["bloch_x", "bloch_y", "bloch_z"]
    return cols


def _density_row(t: float, rho: np.ndarray) -> list[str]:
    dim = rho.shape[0]
    row = [_fmt(t)]
    for i in range(dim):
        for j in range(i, dim):
            row.append(_fmt(rho[i, j].real))
            row.append(_fmt(rho[i, j].imag))
    if dim == 2:
        row.append(_fmt(2.0 * rho[0, 1].real))
        row.append(_fmt(-2.0 * rho[0, 1].imag))
        row.append(_fmt((rho[0, 0] - rho[1, 1]).real))
    return row


def _write_density_csv(path: Path, series_times, series_mats) -> None:
    dim = series_mats[0].shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_density_header(dim))
        for t, rho in zip(series_times, series_mats):
            writer.writerow(_density_row(float(t), rho))


def cmd_classify(cfg: dict, seed_override: int | None) -> int:
    lv = _generator_from_config(cfg)
    opts = cfg.get("classify", {})
    seed = int(cfg.get("seed", 0)) if seed_override is None else seed_override
    verdict = check_positivity(
        lv,
        n_samples=int(opts.get("n_samples", 1000)),
        refine=bool(opts.get("refine", True)),
        seed=seed,
    )
    labels = {
        "cp": "completely positive (CP)",
        "positive_not_cp": "positive (not CP)",
        "not_positive": "NOT positive",
        "undetermined": "undetermined",
    }
    print(f"class:        {labels[verdict.tag]}")
    print(f"min rate eig: {verdict.min_eigenvalue:.6e}")
    print(f"choi verdict: {'CP' if verdict.cp else 'not CP'}")
    if verdict.witness is not None:
        comps = ", ".join(f"{z.real:+.6f}{z.imag:+.6f}j" for z in verdict.witness)
        print(f"witness:      [{comps}]")
    return 2 if verdict.tag == "not_positive" else 0


def cmd_simulate(cfg: dict, seed_override: int | None, workers: int | None, out_dir: Path) -> int:
    lv = _generator_from_config(cfg)
    tc = _trajectory_config(cfg, lv, seed_override)
    n_traj = int(cfg.get("n_trajectories", 1))
    records = run_ensemble(tc, n_traj, workers=workers)
    avg = ensemble_average(records)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_density_csv(out_dir / "ensemble.csv", avg.times, avg.matrices)
    (out_dir / "config.json").write_text(
        json.dumps(_effective_config(cfg, seed_override), indent=1)
    )
    print(f"wrote {out_dir / 'ensemble.csv'} ({n_traj} trajectories, "
          f"{len(avg.times)} recorded times, seed {tc.seed})")
    return 0


def cmd_validate(cfg: dict, seed_override: int | None, workers: int | None, out_dir: Path) -> int:
    lv = _generator_from_config(cfg)
    tc = _trajectory_config(cfg, lv, seed_override)
    n_traj = int(cfg.get("n_trajectories", 1000))
    tolerance = float(cfg.get("tolerance", 0.03))
    try:
        report = validate_unraveling(tc, n_traj, tolerance, workers=workers)
    except ValueError as exc:
        print(f"validation refused: {exc}", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "pass": report.passed,
        "max_trace_distance": report.max_trace_distance,
        "mc_error_estimate": report.mc_error_estimate,
        "n_trajectories": report.n_trajectories,
        "tolerance": tolerance,
    }
    (out_dir / "report.json").write_text(json.dumps(summary, indent=1))
    with open(out_dir / "distances.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "trace_distance", "mc_error"])
        for t, d, e in zip(report.times, report.distances, report.mc_errors):
            writer.writerow([_fmt(float(t)), _fmt(float(d)), _fmt(float(e))])
    (out_dir / "config.json").write_text(
        json.dumps(_effective_config(cfg, seed_override), indent=1)
    )
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: max trace distance {report.max_trace_distance:.5f} "
          f"(tolerance {tolerance}, MC error ~{report.mc_error_estimate:.5f}, "
          f"M = {report.n_trajectories})")
    return 0 if report.passed else 2


def cmd_list_models() -> int:
    for entry in CATALOG:
        params = ", ".join(f"{k}={v}" for k, v in entry.parameters.items())
        expected = entry.expected_class or "decided at runtime"
        print(f"{entry.name:18s} ({params}) expected: {expected:16s} {entry.notes}")
    return 0


def main(argv=None) -> int:
    parser = _Parser(prog="qunravel",
                     description="classify generators, run unravelings, validate ensembles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("classify", "simulate", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name != "classify":
            p.add_argument("--workers", type=int, default=None,
                           help="worker process cap (default: available cores)")
            p.add_argument("--out", default="qunravel-out", help="output directory")
    sub.add_parser("list-models")

    try:
        args = parser.parse_args(argv)
        if args.command == "list-models":
            return cmd_list_models()
        cfg = _load_config(args.config)
        if args.command == "classify":
            return cmd_classify(cfg, args.seed)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.seed, args.workers, Path(args.out))
        return cmd_validate(cfg, args.seed, args.workers, Path(args.out))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NotPositiveAtState as exc:
        comps = ", ".join(f"{z.real:+.6f}{z.imag:+.6f}j" for z in exc.psi)
        print(f"aborted: {exc}", file=sys.stderr)
        print(f"witness state: [{comps}]", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
