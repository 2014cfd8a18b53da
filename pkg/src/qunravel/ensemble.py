"""Master-equation integration, ensemble averaging and validation.

The deterministic integration of the vectorized master equation is the
ground truth: every unraveling must reproduce it in the ensemble average.
Validation runs an ensemble, averages the projectors, and compares against
the integrated density matrix in trace distance, with a Monte Carlo error
estimate for context.
"""
from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from . import _linalg as la
from .generators import Liouvillian, check_positivity
from .trajectories import TrajectoryConfig, TrajectoryRecord, run_batch, _warn_if_coarse


@dataclass
class DensitySeries:
    """Density matrices on a time grid."""

    times: np.ndarray
    matrices: np.ndarray

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(m)[0] for m in self.matrices))


@dataclass
class ValidationReport:
    """Outcome of comparing an ensemble against the master equation."""

    max_trace_distance: float
    distances: np.ndarray
    mc_error_estimate: float
    mc_errors: np.ndarray
    passed: bool
    n_trajectories: int
    times: np.ndarray


def integrate_master_equation(lv: Liouvillian, rho0: np.ndarray, dt: float, t_final: float,
                              record_stride: int = 1) -> DensitySeries:
    """Fixed-step RK4 integration of ``drho/dt = L rho``.

    The initial state must be Hermitian, positive semidefinite and of unit
    trace.  Trace and Hermiticity drift beyond 1e-10 abort the run (they
    indicate an unstable step size for this generator).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    n = lv.dim
    if rho0.shape != (n, n):
        raise ValueError(f"rho0 shape {rho0.shape} incompatible with dim {n}")
    if la.herm_defect(rho0) > 1e-10:
        raise ValueError("rho0 is not Hermitian")
    if abs(np.trace(rho0).real - 1.0) > 1e-10:
        raise ValueError("rho0 does not have unit trace")
    if float(np.linalg.eigvalsh(la.hermitize(rho0))[0]) < -1e-8:
        raise ValueError("rho0 is not positive semidefinite")
    if dt <= 0 or t_final <= 0 or dt > t_final:
        raise ValueError("need 0 < dt <= t_final")

    n_steps = max(int(round(t_final / dt)), 1)
    rec = list(range(0, n_steps + 1, record_stride))
    if rec[-1] != n_steps:
        rec.append(n_steps)
    rec_set = {k: pos for pos, k in enumerate(rec)}

    lmat = lv.matrix
    y = la.vec(rho0)
    out = np.empty((len(rec), n, n), dtype=complex)
    out[0] = rho0
    for k in range(n_steps):
        k1 = lmat @ y
        k2 = lmat @ (y + 0.5 * dt * k1)
        k3 = lmat @ (y + 0.5 * dt * k2)
        k4 = lmat @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        pos = rec_set.get(k + 1)
        if pos is not None:
            rho = la.unvec(y, n)
            if abs(np.trace(rho).real - 1.0) > 1e-10 or la.herm_defect(rho) > 1e-10:
                raise RuntimeError(
                    f"trace/Hermiticity drift at t = {(k + 1) * dt:.6g}: "
                    "step size unstable for this generator"
                )
            out[pos] = rho
    return DensitySeries(times=dt * np.asarray(rec, dtype=float), matrices=out)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the sum of absolute eigenvalues of the (Hermitian) difference."""
    diff = la.hermitize(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def ensemble_average(records: list[TrajectoryRecord], times: np.ndarray | None = None) -> DensitySeries:
    """Mean projector over trajectories; Hermitian with unit trace by
    construction, for any ensemble size."""
    if not records:
        raise ValueError("need at least one trajectory record")
    if times is None:
        times = records[0].times
    times = np.asarray(times, dtype=float)
    for rec in records:
        if rec.times.shape != times.shape or not np.array_equal(rec.times, times):
            raise ValueError("trajectory records do not share the recording grid")
    states = np.stack([rec.states for rec in records])  # (M, T, N)
    mats = np.einsum("mti,mtj->tij", states, np.conj(states)) / len(records)
    return DensitySeries(times=times, matrices=mats)


def _entrywise_se(states: np.ndarray) -> np.ndarray:
    """Standard error matrices of the mean projector, one per time.

    Entrywise variance of the projector entries (real plus imaginary
    parts) scaled by 1/M, returned as real symmetric matrices.
    """
    m = states.shape[0]
    mean = np.einsum("mti,mtj->tij", states, np.conj(states)) / m
    # |psi_i psi_j*|^2 = |psi_i|^2 |psi_j|^2
    amp2 = np.abs(states) ** 2
    second = np.einsum("mti,mtj->tij", amp2, amp2) / m
    var = np.clip(second - np.abs(mean) ** 2, 0.0, None)
    return np.sqrt(var / m)


def _aggregate_se(se_matrices: np.ndarray) -> np.ndarray:
    """Collapse per-entry standard errors with the eigenvalue-sum norm used
    for trace distances, one value per time."""
    return np.array([0.5 * np.abs(np.linalg.eigvalsh(s)).sum() for s in se_matrices])


def mc_error_series(records: list[TrajectoryRecord]) -> np.ndarray:
    """Monte Carlo error estimate of the ensemble average at each time."""
    states = np.stack([rec.states for rec in records])
    return _aggregate_se(_entrywise_se(states))


# ---------------------------------------------------------------------------
# Ensemble running
# ---------------------------------------------------------------------------

#: Trajectories per batch.  Fixed independently of the worker count so that
#: results are bit-identical for any scheduling.
CHUNK_SIZE = 1024


def _chunk_ranges(n_trajectories: int, chunk_size: int) -> list[range]:
    return [range(lo, min(lo + chunk_size, n_trajectories))
            for lo in range(0, n_trajectories, chunk_size)]


def _run_chunk(args):
    config, idx_range = args
    times, states, jumps = run_batch(config, idx_range)
    return times, states, jumps


def run_ensemble(config: TrajectoryConfig, n_trajectories: int, workers: int | None = None,
                 chunk_size: int = CHUNK_SIZE) -> list[TrajectoryRecord]:
    """Run ``n_trajectories`` independent trajectories.

    Trajectory ``i`` draws from the stream derived from
    ``(config.seed, i)``; the ensemble is therefore reproducible and
    independent of ``workers``.  Chunks are merged in index order.
    """
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be at least 1")
    _warn_if_coarse(config)
    if workers is None:
        workers = os.cpu_count() or 1
    chunks = _chunk_ranges(n_trajectories, chunk_size)
    args = [(config, idx_range) for idx_range in chunks]
    if workers > 1 and len(chunks) > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(min(workers, len(chunks))) as pool:
            results = pool.map(_run_chunk, args)
    else:
        results = [_run_chunk(a) for a in args]
    records: list[TrajectoryRecord] = []
    for (times, states, jumps), idx_range in zip(results, chunks):
        for row, idx in enumerate(idx_range):
            records.append(TrajectoryRecord(
                times=times,
                states=states[row],
                jump_times=np.asarray(jumps[row], dtype=float),
                seed=config.seed,
            ))
    return records


def validate_unraveling(config: TrajectoryConfig, n_trajectories: int, tolerance: float,
                        workers: int | None = None) -> ValidationReport:
    """Quantitative check that the ensemble reproduces the master equation.

    Runs the ensemble, averages, integrates the master equation from the
    same initial projector on the same grid, and reports the per-time and
    maximal trace distances together with a Monte Carlo error estimate
    (entrywise standard errors of the mean projector aggregated with the
    same eigenvalue-sum norm as the distance).
    """
    if n_trajectories < 100:
        raise ValueError("validation needs at least 100 trajectories")
    verdict = check_positivity(config.generator, n_samples=256, seed=config.seed)
    if verdict.tag == "not_positive":
        raise ValueError(
            f"generator is not positive (rate eigenvalue {verdict.min_eigenvalue:.3e}); "
            "no pure-state unraveling exists"
        )
    records = run_ensemble(config, n_trajectories, workers=workers)
    avg = ensemble_average(records)
    rho0 = la.outer(config.initial_state)
    exact = integrate_master_equation(config.generator, rho0, config.dt, config.t_final,
                                      record_stride=config.record_stride)
    if exact.times.shape != avg.times.shape or not np.allclose(exact.times, avg.times):
        raise RuntimeError("master-equation grid does not match the recording grid")
    distances = np.array([trace_distance(a, b) for a, b in zip(avg.matrices, exact.matrices)])
    errors = mc_error_series(records)
    max_dist = float(distances.max())
    return ValidationReport(
        max_trace_distance=max_dist,
        distances=distances,
        mc_error_estimate=float(errors.max()),
        mc_errors=errors,
        passed=bool(max_dist <= tolerance),
        n_trajectories=n_trajectories,
        times=avg.times,
    )
