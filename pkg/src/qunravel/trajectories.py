"""Stochastic pure-state trajectory integration.

Three unravelings of the same master equation are provided:

* ``Diffusive``: Euler-Maruyama integration of the invariant stochastic
  Schroedinger equation.  The deterministic part is the frictional drift
  plus the norm-compensation term, ``(L + w/2) psi``; the noise increment
  has covariance given by the transition rate operator and a free
  self-correlation chosen through an s-matrix policy (``None`` is quantum
  state diffusion).  Works for every positivity-preserving generator,
  Lindblad-representable or not.
* ``CpQsd``: the conventional quantum-state-diffusion equation written in
  terms of jump operators.  Requires jump-operator provenance; used as a
  cross-check of the invariant form on completely positive generators.
* ``Jump``: the piecewise-deterministic process.  The state follows the
  norm-conserving frictional flow ``dpsi/dt = (L + w) psi`` (integrated
  with classical RK4, renormalizing each step) while the jump hazard
  ``int w dt`` accumulates by the trapezoid rule; when it crosses an
  exponential threshold the state jumps into an eigenvector of the
  transition rate operator with probability proportional to its
  eigenvalue, at the step boundary.

All integrators operate on batches of trajectories (leading axis) for
speed; the single-trajectory functions are thin wrappers around batch
size 1.  Randomness is drawn from per-trajectory streams derived from
``(seed, trajectory_index)``, so ensemble results do not depend on how
trajectories are scheduled or chunked.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from . import noise as noise_mod
from .generators import EIG_TOL, LindbladData, Liouvillian


class NotPositiveAtState(RuntimeError):
    """Raised when the rate operator turns negative along a trajectory.

    Carries the offending state as a witness: the generator does not
    preserve positivity there.
    """

    def __init__(self, psi: np.ndarray, time: float, min_eigenvalue: float):
        super().__init__(
            f"transition rate operator has eigenvalue {min_eigenvalue:.3e} "
            f"< -{EIG_TOL:.0e} at t = {time:.6g}"
        )
        self.psi = np.asarray(psi)
        self.time = float(time)
        self.min_eigenvalue = float(min_eigenvalue)

    def __reduce__(self):  # survives pickling across worker processes
        return (type(self), (self.psi, self.time, self.min_eigenvalue))


@dataclass(frozen=True)
class Diffusive:
    """Diffusive unraveling; ``s`` selects the self-correlation policy.

    ``None`` or ``"qsd"`` is quantum state diffusion (S = 0), ``"identity"``
    applies s = I in the rate-operator eigenframe at each step, and an
    explicit symmetric matrix with spectral norm <= 1 is applied in that
    same frame.
    """

    s: object = None


@dataclass(frozen=True)
class Jump:
    """Piecewise-deterministic jump unraveling."""


@dataclass(frozen=True)
class CpQsd:
    """Jump-operator quantum state diffusion (needs Lindblad provenance)."""


def resolve_s_policy(s, dim: int) -> np.ndarray | None:
    """Normalize an s-policy argument to ``None`` or a validated matrix."""
    if s is None:
        return None
    m = dim - 1
    if isinstance(s, str):
        if s in ("qsd", "zero"):
            return None
        if s == "identity":
            return np.eye(m, dtype=complex)
        raise ValueError(f"unknown s-policy name {s!r}")
    s = np.asarray(s, dtype=complex)
    if s.shape != (m, m):
        raise ValueError(f"s matrix must be {m}x{m} for dimension {dim}, got {s.shape}")
    if np.abs(s - s.T).max() > 1e-12 * max(1.0, float(np.abs(s).max())):
        raise ValueError("s matrix must be symmetric")
    if la.spectral_norm(s) > 1.0 + 1e-12:
        raise ValueError(f"spectral norm of s is {la.spectral_norm(s):.6f} > 1")
    return s


# ---------------------------------------------------------------------------
# Batched stepping kernels
# ---------------------------------------------------------------------------


class _RatesMixin:
    """Batched local action L(psi psi^dag) and its expectation."""

    lmat_t: np.ndarray
    n: int

    def rates(self, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = la.outer(psi)
        loc = la.unvec(la.vec(p) @ self.lmat_t, self.n)
        exp_l = np.einsum("ci,cij,cj->c", np.conj(psi), loc, psi).real
        return loc, exp_l


class _DiffusiveKernel(_RatesMixin):
    def __init__(self, lv: Liouvillian, s: np.ndarray | None):
        self.lmat_t = np.ascontiguousarray(lv.matrix.T)
        self.n = lv.dim
        m = self.n - 1
        self.m = m
        self.noise_width = 2 * m
        if s is None:
            zeta_factor = np.sqrt(0.5) * np.eye(2 * m)
        else:
            sig = np.empty((2 * m, 2 * m))
            sig[:m, :m] = 0.5 * (np.eye(m) + s.real)
            sig[:m, m:] = 0.5 * s.imag
            sig[m:, :m] = 0.5 * s.imag.T
            sig[m:, m:] = 0.5 * (np.eye(m) - s.real)
            zeta_factor = noise_mod.factor_psd(sig)
        self.zeta_factor_t = zeta_factor.T

    def _transverse_frame(self, psi, loc, exp_l):
        """Eigenpairs of the rate operator orthogonal to psi (descending),
        plus the least eigenvalue encountered (for the positivity guard)."""
        if self.n == 2:
            # rank-one structure: the single transverse eigenvalue is the
            # total rate w = -<L>, its eigenvector the unique unit
            # complement of psi
            lam = -exp_l[:, None]
            phi = np.stack([-np.conj(psi[:, 1]), np.conj(psi[:, 0])], axis=1)
            return lam, phi[:, :, None], lam[:, 0]
        p = la.outer(psi)
        w_op = loc - loc @ p - p @ loc + exp_l[:, None, None] * p
        vals, vecs = np.linalg.eigh(w_op)
        # ascending order: the dropped smallest mode is the psi-null
        # direction whenever the dynamics is positive
        return vals[:, :0:-1], vecs[:, :, :0:-1], vals[:, 0]

    def step(self, t: float, psi: np.ndarray, dt: float, z: np.ndarray) -> np.ndarray:
        loc, exp_l = self.rates(psi)
        lam, frames, lowest = self._transverse_frame(psi, loc, exp_l)
        worst = float(lowest.min())
        if worst < -EIG_TOL:
            idx = int(np.argmin(lowest))
            raise NotPositiveAtState(psi[idx], t, worst)
        lam = np.clip(lam, 0.0, None)
        xy = z @ self.zeta_factor_t
        zeta = xy[:, : self.m] + 1j * xy[:, self.m :]
        amp = np.sqrt(lam * dt) * np.conj(zeta)
        dchi = np.einsum("cnm,cm->cn", frames, amp)
        dchi -= np.einsum("cn,cn->c", dchi, np.conj(psi))[:, None] * psi
        lpsi = (loc @ psi[:, :, None])[:, :, 0]
        drift = lpsi - 0.5 * exp_l[:, None] * psi  # (L + w/2) psi with w = -<L>
        return la.normalized(psi + drift * dt + dchi)


class _CpQsdKernel:
    def __init__(self, hamiltonian: np.ndarray, ops: tuple[np.ndarray, ...]):
        self.n = hamiltonian.shape[0]
        self.n_ops = len(ops)
        self.noise_width = 2 * self.n_ops
        self.ops = np.stack(ops) if ops else np.zeros((0, self.n, self.n), dtype=complex)
        fdf = sum((f.conj().T @ f for f in ops), np.zeros((self.n, self.n), dtype=complex))
        self.drift_const_t = (-1j * hamiltonian - 0.5 * fdf).T

    def step(self, t: float, psi: np.ndarray, dt: float, z: np.ndarray) -> np.ndarray:
        drift = psi @ self.drift_const_t
        dchi = 0.0
        if self.n_ops:
            fpsi = np.einsum("aij,cj->cai", self.ops, psi)
            f = np.einsum("ci,cai->ca", np.conj(psi), fpsi)
            drift = drift + np.einsum("ca,cai->ci", np.conj(f), fpsi)
            drift -= 0.5 * np.sum(np.abs(f) ** 2, axis=1)[:, None] * psi
            centered = fpsi - f[:, :, None] * psi[:, None, :]
            dxi_conj = np.sqrt(0.5 * dt) * (z[:, : self.n_ops] - 1j * z[:, self.n_ops :])
            dchi = np.einsum("cai,ca->ci", centered, dxi_conj)
        return la.normalized(psi + drift * dt + dchi)


class _JumpKernel(_RatesMixin):
    noise_width = 0

    def __init__(self, lv: Liouvillian):
        self.lmat_t = np.ascontiguousarray(lv.matrix.T)
        self.n = lv.dim

    def flow(self, psi_raw: np.ndarray) -> np.ndarray:
        """Frictional flow (L - <L>) psi, evaluated on the normalized state
        but applied to the raw RK4 stage vector."""
        unit = la.normalized(psi_raw)
        loc, exp_l = self.rates(unit)
        return (loc @ psi_raw[:, :, None])[:, :, 0] - exp_l[:, None] * psi_raw

    def rk4_step(self, psi: np.ndarray, dt: float, k1: np.ndarray) -> np.ndarray:
        k2 = self.flow(psi + 0.5 * dt * k1)
        k3 = self.flow(psi + 0.5 * dt * k2)
        k4 = self.flow(psi + dt * k3)
        return la.normalized(psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))

    def jump_targets(self, psi: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Eigen-decomposition of the rate operator at a single state.

        Returns clipped eigenvalues (jump weights) and eigenvectors as
        columns.  Raises if an eigenvalue is negative beyond tolerance.
        """
        loc, exp_l = self.rates(psi[None, :])
        p = la.outer(psi)
        w_op = loc[0] - loc[0] @ p - p @ loc[0] + exp_l[0] * p
        vals, vecs = np.linalg.eigh(w_op)
        if vals[0] < -EIG_TOL:
            raise NotPositiveAtState(psi, t, float(vals[0]))
        return np.clip(vals, 0.0, None), vecs


# ---------------------------------------------------------------------------
# Single-step contract functions
# ---------------------------------------------------------------------------


def diffusive_step(lv: Liouvillian, psi: np.ndarray, dt: float, policy=None,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """One Euler-Maruyama step of the invariant diffusive unraveling.

    ``policy`` selects the noise self-correlation (see :class:`Diffusive`).
    Returns the renormalized updated state.
    """
    psi = la.check_state(psi)
    if rng is None:
        raise ValueError("an rng is required")
    kernel = _DiffusiveKernel(lv, resolve_s_policy(policy, lv.dim))
    z = rng.standard_normal((1, kernel.noise_width))
    return kernel.step(0.0, psi[None, :], dt, z)[0]


def cp_qsd_step(hamiltonian, ops, psi: np.ndarray, dt: float,
                rng: np.random.Generator) -> np.ndarray:
    """One step of jump-operator quantum state diffusion."""
    psi = la.check_state(psi)
    ops = tuple(np.asarray(f, dtype=complex) for f in ops)
    kernel = _CpQsdKernel(np.asarray(hamiltonian, dtype=complex), ops)
    z = rng.standard_normal((1, kernel.noise_width))
    return kernel.step(0.0, psi[None, :], dt, z)[0]


@dataclass
class JumpAccumulator:
    """Carries the running hazard integral and its exponential threshold."""

    hazard: float = 0.0
    threshold: float | None = None


def jump_step(lv: Liouvillian, psi: np.ndarray, dt: float, rng: np.random.Generator,
              accumulator: JumpAccumulator) -> tuple[np.ndarray, bool]:
    """One deterministic-flow step plus jump bookkeeping.

    Integrates the frictional flow over ``dt`` (RK4), accumulates the
    hazard by the trapezoid rule and, when it crosses the threshold,
    replaces the state by a rate-operator eigenvector drawn with
    probability proportional to its eigenvalue.  Returns the new state and
    whether a jump occurred.
    """
    psi = la.check_state(psi)
    kernel = _JumpKernel(lv)
    if accumulator.threshold is None:
        accumulator.threshold = -np.log1p(-rng.random())
    loc, exp_l = kernel.rates(psi[None, :])
    w0 = -float(exp_l[0])
    k1 = (loc[0] @ psi) - exp_l[0] * psi
    new = kernel.rk4_step(psi[None, :], dt, k1[None, :])[0]
    _, exp_l1 = kernel.rates(new[None, :])
    w1 = -float(exp_l1[0])
    accumulator.hazard += 0.5 * (w0 + w1) * dt
    if accumulator.hazard < accumulator.threshold:
        return new, False
    lam, vecs = kernel.jump_targets(new, dt)
    total = float(lam.sum())
    if total <= 1e-300:  # hazard stalled at a dark state; nothing to jump to
        return new, False
    k = int(np.searchsorted(np.cumsum(lam), rng.random() * total, side="right"))
    k = min(k, len(lam) - 1)
    accumulator.hazard = 0.0
    accumulator.threshold = -np.log1p(-rng.random())
    return vecs[:, k], True


# ---------------------------------------------------------------------------
# Full trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryConfig:
    """Everything needed to reproduce one trajectory or an ensemble.

    ``seed`` is the master seed; trajectory ``i`` of an ensemble draws
    from the stream ``SeedSequence(entropy=seed, spawn_key=(i,))`` and a
    single trajectory is index 0.
    """

    generator: Liouvillian
    initial_state: np.ndarray
    dt: float
    t_final: float
    unraveling: Diffusive | Jump | CpQsd
    seed: int
    record_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "initial_state", la.check_state(self.initial_state))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        if isinstance(self.unraveling, Diffusive):
            resolve_s_policy(self.unraveling.s, self.generator.dim)
        if isinstance(self.unraveling, CpQsd) and not isinstance(
            self.generator.provenance, LindbladData
        ):
            raise ValueError("cp_qsd requires a generator with jump-operator provenance")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_final / self.dt))
        return max(n, 1)

    def record_steps(self) -> np.ndarray:
        ks = list(range(0, self.n_steps + 1, self.record_stride))
        if ks[-1] != self.n_steps:
            ks.append(self.n_steps)
        return np.asarray(ks, dtype=int)


@dataclass
class TrajectoryRecord:
    """Recorded states of one trajectory on a fixed time grid."""

    times: np.ndarray
    states: np.ndarray
    jump_times: np.ndarray
    seed: int


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Private noise stream of trajectory ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _make_kernel(config: TrajectoryConfig):
    u = config.unraveling
    if isinstance(u, Diffusive):
        return _DiffusiveKernel(config.generator, resolve_s_policy(u.s, config.generator.dim))
    if isinstance(u, CpQsd):
        prov = config.generator.provenance
        return _CpQsdKernel(np.asarray(prov.hamiltonian), tuple(np.asarray(f) for f in prov.ops))
    if isinstance(u, Jump):
        return _JumpKernel(config.generator)
    raise TypeError(f"unknown unraveling {u!r}")


def initial_total_rate(config: TrajectoryConfig) -> float:
    from .rate_structures import compute_rate_structure

    return compute_rate_structure(config.generator, config.initial_state).w


def _warn_if_coarse(config: TrajectoryConfig) -> None:
    w0 = initial_total_rate(config)
    if config.dt * w0 > 0.1:
        warnings.warn(
            f"dt * total rate = {config.dt * w0:.3f} > 0.1 at the initial state; "
            "the step size is coarse for this generator",
            stacklevel=3,
        )


def run_batch(config: TrajectoryConfig, indices) -> tuple[np.ndarray, np.ndarray, list[list[float]]]:
    """Integrate the trajectories with the given indices as one batch.

    Returns the recording times, a (len(indices), n_times, N) state array
    and per-trajectory jump time lists.  Each trajectory consumes only its
    own noise stream, so the output is independent of how indices are
    grouped into batches.
    """
    indices = list(indices)
    kernel = _make_kernel(config)
    n_traj = len(indices)
    n_steps = config.n_steps
    dt = config.dt
    rec = config.record_steps()
    rec_set = {int(k): pos for pos, k in enumerate(rec)}
    psi = np.tile(config.initial_state, (n_traj, 1))
    out = np.empty((n_traj, len(rec), config.generator.dim), dtype=complex)
    out[:, 0, :] = psi
    jump_times: list[list[float]] = [[] for _ in range(n_traj)]
    streams = [trajectory_stream(config.seed, i) for i in indices]

    if isinstance(kernel, _JumpKernel):
        _run_jump_batch(kernel, config, psi, streams, out, rec_set, jump_times)
        return dt * rec.astype(float), out, jump_times

    z_all = None
    if kernel.noise_width:
        z_all = np.stack([g.standard_normal((n_steps, kernel.noise_width)) for g in streams])
    for k in range(n_steps):
        z = z_all[:, k, :] if z_all is not None else np.zeros((n_traj, 0))
        psi = kernel.step(k * dt, psi, dt, z)
        pos = rec_set.get(k + 1)
        if pos is not None:
            out[:, pos, :] = psi
    return dt * rec.astype(float), out, jump_times


def _run_jump_batch(kernel, config, psi, streams, out, rec_set, jump_times) -> None:
    n_traj = psi.shape[0]
    dt = config.dt
    hazard = np.zeros(n_traj)
    thresholds = np.array([-np.log1p(-g.random()) for g in streams])
    loc, exp_l = kernel.rates(psi)
    for k in range(config.n_steps):
        t_next = (k + 1) * dt
        w0 = -exp_l
        k1 = (loc @ psi[:, :, None])[:, :, 0] - exp_l[:, None] * psi
        psi = kernel.rk4_step(psi, dt, k1)
        loc, exp_l = kernel.rates(psi)
        w1 = -exp_l
        worst = float(min(w0.min(), w1.min()))
        if worst < -EIG_TOL:
            idx = int(np.argmin(np.minimum(w0, w1)))
            raise NotPositiveAtState(psi[idx], t_next, worst)
        hazard += 0.5 * (w0 + w1) * dt
        crossed = np.nonzero(hazard >= thresholds)[0]
        for idx in crossed:
            lam, vecs = kernel.jump_targets(psi[idx], t_next)
            total = float(lam.sum())
            if total <= 1e-300:
                continue
            g = streams[idx]
            choice = int(np.searchsorted(np.cumsum(lam), g.random() * total, side="right"))
            choice = min(choice, len(lam) - 1)
            psi[idx] = vecs[:, choice]
            jump_times[idx].append(t_next)
            hazard[idx] = 0.0
            thresholds[idx] = -np.log1p(-g.random())
            loc_i, exp_i = kernel.rates(psi[idx][None, :])
            loc[idx] = loc_i[0]
            exp_l[idx] = exp_i[0]
        pos = rec_set.get(k + 1)
        if pos is not None:
            out[:, pos, :] = psi


def run_trajectory(config: TrajectoryConfig) -> TrajectoryRecord:
    """Integrate one trajectory; deterministic given (config, seed)."""
    _warn_if_coarse(config)
    times, states, jumps = run_batch(config, [0])
    return TrajectoryRecord(
        times=times,
        states=states[0],
        jump_times=np.asarray(jumps[0], dtype=float),
        seed=config.seed,
    )
