"""Matrix-free evolution of the residual-augmented accumulator flow.

State ``z = (x, r, s)`` obeys ``x' = r``, ``r' = -G^T s``, ``s' = G r - s``.
Along any trajectory started consistently, ``r + G^T (G x - s) - b`` stays
zero, i.e. ``r - G^T s`` is the algebraic residual ``b - A x``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ellq import kernels
from ellq.errors import DivergenceError, InvalidParameterError, UndefinedProbabilityError
from ellq.fem import EllipticSystem, spectral_summary
from ellq.linalg import check_dense, spmv, spmv_transpose

DEFAULT_THETA = 0.03
DEFAULT_STRIDE = 10


@dataclass
class RelaxState:
    t: float
    x: np.ndarray
    r: np.ndarray
    s: np.ndarray

    def copy(self) -> "RelaxState":
        return RelaxState(self.t, self.x.copy(), self.r.copy(), self.s.copy())

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.r, self.s])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.r, self.s])

    def norms(self) -> tuple[float, float]:
        """``(||x||, ||w||)``."""
        return float(np.linalg.norm(self.x)), math.hypot(np.linalg.norm(self.r), np.linalg.norm(self.s))


def _check_len(v, n, name):
    v = np.array(v, dtype=np.float64)
    if v.shape != (n,):
        raise InvalidParameterError(f"{name} must have length {n}, got shape {v.shape}")
    return v


def init_cold(system: EllipticSystem) -> RelaxState:
    return RelaxState(0.0, np.zeros(system.n_dof), system.b.copy(), np.zeros(system.n_flux))


def init_warm(system: EllipticSystem, x0, q0) -> RelaxState:
    """Warm start from a guess ``x0`` and flux ``q0``: ``r = b - G^T q0``, ``s = G x0 - q0``."""
    x0 = _check_len(x0, system.n_dof, "x0")
    q0 = _check_len(q0, system.n_flux, "q0")
    r = system.b - spmv_transpose(system.G, q0)
    s = spmv(system.G, x0) - q0
    return RelaxState(0.0, x0, r, s)


def apply_generator(system: EllipticSystem, state: RelaxState):
    """Time derivative ``(dx, dr, ds)`` at ``state``: two sparse products."""
    dx = state.r.copy()
    dr = -spmv(system.GT, state.s)
    ds = spmv(system.G, state.r) - state.s
    return dx, dr, ds


def _block_weights(state: RelaxState) -> tuple[float, float]:
    z = state.z
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    if scale == 0.0:
        raise UndefinedProbabilityError("residual probability is undefined for the zero state")
    # dividing by the largest entry keeps tiny states from underflowing to 0/0
    nd = state.x.size
    nx = float(np.linalg.norm(z[:nd] / scale))
    nw = float(np.linalg.norm(z[nd:] / scale))
    total = nx * nx + nw * nw
    return nx * nx / total, nw * nw / total


def residual_probability(state: RelaxState) -> float:
    """``||w||^2 / (||x||^2 + ||w||^2)``."""
    return _block_weights(state)[1]


def solution_block_weight(state: RelaxState) -> float:
    """``p_x = 1 - p_res``."""
    return _block_weights(state)[0]


def algebraic_residual(system: EllipticSystem, state: RelaxState) -> np.ndarray:
    """``r - G^T s``; equals ``b - A x`` on consistent trajectories."""
    return state.r - spmv(system.GT, state.s)


def recover_flux(system: EllipticSystem, state: RelaxState) -> np.ndarray:
    return spmv(system.G, state.x) - state.s


def invariant_residual(system: EllipticSystem, state: RelaxState) -> np.ndarray:
    """``r + G^T (G x - s) - b``, zero along consistent trajectories."""
    return state.r + spmv(system.GT, spmv(system.G, state.x) - state.s) - system.b


def time_step(system: EllipticSystem, theta: float = DEFAULT_THETA) -> float:
    """Fixed RK4 step ``theta / (1 + ||G||)``."""
    if not (0.0 < theta <= 1.0):
        raise InvalidParameterError(f"theta must lie in (0, 1], got {theta}")
    if "norm_G_est" not in system._cache:
        system._cache["norm_G_est"] = _norm_estimate(system)
    return theta / (1.0 + system._cache["norm_G_est"])


def _norm_estimate(system: EllipticSystem) -> float:
    try:
        return spectral_summary(system).norm_G
    except Exception:  # noqa: BLE001 - dense path refused; fall back to power iteration
        v = np.ones(system.n_dof)
        sigma = 0.0
        for _ in range(200):
            w = spmv(system.GT, spmv(system.G, v))
            sigma_new = math.sqrt(np.linalg.norm(w) / np.linalg.norm(v))
            v = w / np.linalg.norm(w)
            if abs(sigma_new - sigma) <= 1e-10 * sigma_new:
                break
            sigma = sigma_new
        return 1.01 * sigma_new


@dataclass
class Trajectory:
    """Sampled diagnostics of one evolution. ``rel_err`` is empty without a reference."""

    t: list = field(default_factory=list)
    norm_x: list = field(default_factory=list)
    norm_w: list = field(default_factory=list)
    p_res: list = field(default_factory=list)
    norm_rA: list = field(default_factory=list)
    rel_err: list = field(default_factory=list)
    states: list = field(default_factory=list)
    max_invariant: float = 0.0
    final: RelaxState | None = None

    COLUMNS = ("t", "norm_x", "norm_w", "p_res", "norm_rA", "rel_err")

    def record(self, system, state, reference=None, keep_state=False):
        nx, nw = state.norms()
        self.t.append(float(state.t))
        self.norm_x.append(nx)
        self.norm_w.append(nw)
        self.p_res.append(residual_probability(state))
        self.norm_rA.append(float(np.linalg.norm(algebraic_residual(system, state))))
        if reference is not None:
            self.rel_err.append(float(np.linalg.norm(reference - state.x) / np.linalg.norm(reference)))
        if keep_state:
            self.states.append(state.copy())

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for i in range(len(self.t)):
                rel = repr(self.rel_err[i]) if self.rel_err else ""
                w.writerow([repr(self.t[i]), repr(self.norm_x[i]), repr(self.norm_w[i]),
                            repr(self.p_res[i]), repr(self.norm_rA[i]), rel])
        return path


def _advance(system, state, dt, nsteps, backend):
    if nsteps <= 0:
        return
    G, GT = system.G, system.GT
    kernels.get_backend(backend).rk4_steps(
        G.indptr, G.indices, G.data, GT.indptr, GT.indices, GT.data,
        state.x, state.r, state.s, float(dt), int(nsteps),
    )


def _step_plan(t0: float, T: float, dt: float) -> tuple[int, float]:
    """Number of steps and the final (possibly shortened) step length."""
    span = T - t0
    if span <= 0:
        return 0, 0.0
    nsteps = max(1, math.ceil(span / dt - 1e-9))
    last = span - (nsteps - 1) * dt
    return nsteps, last


def _finite_or_raise(state: RelaxState, step: int):
    if not (np.isfinite(state.x).all() and np.isfinite(state.r).all() and np.isfinite(state.s).all()):
        raise DivergenceError(
            f"non-finite state at or before step {step} (t={state.t:.6g}); the step-size "
            "policy is outside the RK4 stability region"
        )


def evolve(system: EllipticSystem, state: RelaxState, T: float, theta: float = DEFAULT_THETA,
           backend: str | None = None) -> RelaxState:
    """Return the RK4 state at exactly time ``T`` (the input is not modified)."""
    return trajectory(system, state, T, theta=theta, stride=None, backend=backend).final


def trajectory(system: EllipticSystem, state: RelaxState, T: float, theta: float = DEFAULT_THETA,
               stride: int | None = DEFAULT_STRIDE, reference=None, keep_states: bool = False,
               track_invariant: bool = False, backend: str | None = None) -> Trajectory:
    """Evolve to ``T`` with fixed-step RK4, sampling every ``stride`` steps.

    With ``stride=None`` nothing is sampled except the final state. With
    ``track_invariant`` the linear invariant is evaluated after every step and
    its largest value relative to ``||b||`` is stored in ``max_invariant``.
    """
    if T < state.t:
        raise InvalidParameterError(f"target time {T} precedes the state time {state.t}")
    dt = time_step(system, theta)
    nsteps, last = _step_plan(state.t, T, dt)
    cur = state.copy()
    t0 = cur.t
    traj = Trajectory()
    sample = stride is not None
    if sample:
        traj.record(system, cur, reference, keep_states)
    bnorm = float(np.linalg.norm(system.b)) or 1.0

    def check_invariant():
        val = float(np.linalg.norm(invariant_residual(system, cur))) / bnorm
        traj.max_invariant = max(traj.max_invariant, val)

    if track_invariant:
        check_invariant()
    chunk = 1 if track_invariant else (stride if sample else max(nsteps - 1, 1))
    done = 0
    full = nsteps - 1
    while done < full:
        k = min(chunk, full - done)
        _advance(system, cur, dt, k, backend)
        done += k
        cur.t = t0 + done * dt
        _finite_or_raise(cur, done)
        if track_invariant:
            check_invariant()
        if sample and done % stride == 0:
            traj.record(system, cur, reference, keep_states)
    if nsteps:
        _advance(system, cur, last, 1, backend)
        cur.t = float(T)
        _finite_or_raise(cur, nsteps)
        if track_invariant:
            check_invariant()
        if sample:
            traj.record(system, cur, reference, keep_states)
    traj.final = cur
    return traj


def joint_generator(system: EllipticSystem) -> np.ndarray:
    """Dense ``L = [[0, P_r], [0, M]]`` acting on ``z = (x, r, s)``."""
    nd, nf = system.n_dof, system.n_flux
    size = 2 * nd + nf
    check_dense(size, "joint generator")
    g = system.dense_G()
    L = np.zeros((size, size))
    L[:nd, nd:2 * nd] = np.eye(nd)
    L[nd:2 * nd, 2 * nd:] = -g.T
    L[2 * nd:, nd:2 * nd] = g
    L[2 * nd:, 2 * nd:] = -np.eye(nf)
    return L


def residual_generator(system: EllipticSystem) -> np.ndarray:
    """Dense ``M = [[0, -G^T], [G, -I]]`` acting on ``w = (r, s)``."""
    nd = system.n_dof
    return joint_generator(system)[nd:, nd:]


def generator_diagnostics(system: EllipticSystem) -> dict[str, float]:
    """Norms of the Hermitian first-order part and the damping part of ``M``."""
    s = spectral_summary(system)
    return {"hermitian_norm": s.norm_G, "damping_norm": 1.0,
            "generator_bound": 2.0 + s.norm_G}

