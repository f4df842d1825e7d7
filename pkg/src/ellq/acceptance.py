"""The acceptance suite: fourteen end-to-end checks with fixed tolerances.

Each ``criterion_*`` takes an :class:`AcceptanceContext` (which memoizes the
expensive shared pieces) and returns a :class:`CriterionResult`.
"""
from __future__ import annotations

import filecmp
import math
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ellq.cases import CASE_LABELS, rhs_case, u_exact
from ellq.certificate import certify, empirical_decay, lyapunov_monitor
from ellq.dynamics import init_cold, init_warm, joint_generator, trajectory
from ellq.experiments import case_systems, time_sweep
from ellq.fem import assemble_system, l2_error, read_matrix_market
from ellq.filters import degree_sweep
from ellq.linalg import CSRMatrix, direct_solve, dense_expm_apply
from ellq.mesh import build_uniform_mesh, validate_mesh
from ellq.stopping import CheckpointRunner, default_config, run_dynamic_solve

EPSILON = 1e-3
SEEDS = tuple(range(20))


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


@dataclass
class AcceptanceContext:
    """Lazily built shared state; ``g_dump`` replaces the assembled G in criterion 2."""

    n: int = 16
    epsilon: float = EPSILON
    seeds: tuple = SEEDS
    g_dump: str | None = None
    _systems: dict = field(default_factory=dict)
    _certs: dict = field(default_factory=dict)

    def systems(self, n: int) -> dict:
        if n not in self._systems:
            self._systems[n] = case_systems(n)
        return self._systems[n]

    def cert(self, n: int):
        if n not in self._certs:
            self._certs[n] = certify(self.systems(n)["I"])
        return self._certs[n]

    @cached_property
    def solves(self) -> dict:
        """``label -> [SolveResult per seed]`` at the main mesh size."""
        cert = self.cert(self.n)
        out = {}
        for label, system in self.systems(self.n).items():
            runner = CheckpointRunner(system)
            x_ref = direct_solve(system)
            out[label] = [
                run_dynamic_solve(system, default_config(cert, epsilon=self.epsilon, seed=s), cert,
                                  runner=runner, reference=x_ref, label=label)
                for s in self.seeds
            ]
        return out

    @cached_property
    def long_trajectories(self) -> dict:
        """``label -> Trajectory`` to ``T = 30`` with stored snapshots at the main mesh size."""
        out = {}
        for label, system in self.systems(self.n).items():
            out[label] = trajectory(system, init_cold(system), 30.0, stride=50,
                                    reference=direct_solve(system), keep_states=True)
        return out


def _fmt(v) -> str:
    return f"{v:.4g}"


def criterion_1(ctx):
    mesh = build_uniform_mesh(16)
    system = ctx.systems(16)["I"]
    checks = validate_mesh(mesh)
    got = (mesh.n_triangles, mesh.n_dof, system.G.shape)
    ok = got == (512, 225, (1024, 225)) and all(checks.values())
    return CriterionResult(1, "mesh/DOF counts", ok,
                           f"triangles={got[0]} dofs={got[1]} G={got[2][0]}x{got[2][1]}")


def reference_stiffness(mesh) -> np.ndarray:
    """Normalized stiffness from per-element barycentric inversion and shoelace areas."""
    nd = mesh.n_dof
    a = np.zeros((nd, nd))
    mass = np.zeros(nd)
    for tri in mesh.triangles:
        pts = mesh.nodes[tri]
        vander = np.column_stack([np.ones(3), pts])
        coef = np.linalg.inv(vander)  # column k holds (c, gx, gy) of the k-th hat function
        grads = coef[1:, :].T
        (x0, y0), (x1, y1), (x2, y2) = pts
        area = 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
        ids = mesh.interior_index[tri]
        for p in range(3):
            if ids[p] < 0:
                continue
            mass[ids[p]] += area / 3.0
            for q in range(3):
                if ids[q] >= 0:
                    a[ids[p], ids[q]] += area * grads[p] @ grads[q]
    d = 1.0 / np.sqrt(mass)
    return a * d[:, None] * d[None, :]


def criterion_2(ctx):
    system = ctx.systems(16)["I"]
    G = read_matrix_market(ctx.g_dump) if ctx.g_dump else system.G
    oracle = reference_stiffness(system.mesh)
    rng = np.random.default_rng(2024)
    rows, cols = np.nonzero(oracle)
    pick = rng.choice(rows.size, size=10, replace=False)
    pairs = list(zip(rows[pick], cols[pick])) + [tuple(p) for p in rng.integers(0, system.n_dof, (10, 2))]
    gd = G.to_dense() if isinstance(G, CSRMatrix) else np.asarray(G)
    if gd.shape != system.G.shape:
        return CriterionResult(2, "Gram identity", False, f"G shape {gd.shape} != {system.G.shape}")
    scale = float(np.max(np.abs(np.diag(oracle))))
    worst = 0.0
    for i, j in pairs:
        got = float(gd[:, i] @ gd[:, j])
        ref = oracle[i, j]
        worst = max(worst, abs(got - ref) / (abs(ref) if ref != 0 else scale))
    return CriterionResult(2, "Gram identity", worst <= 1e-12, f"20 entries, max rel err {_fmt(worst)}")


def criterion_3(ctx):
    specs = [ctx.systems(n)["I"].spectral() for n in (4, 8, 16)]
    sig = [s.sigma_min_G for s in specs]
    norm_ratio = [specs[k + 1].norm_G / specs[k].norm_G for k in range(2)]
    kap_ratio = [specs[k + 1].kappa_A / specs[k].kappa_A for k in range(2)]
    spread = max(sig) / min(sig) - 1.0
    ok = (spread < 0.10 and all(1.8 <= r <= 2.2 for r in norm_ratio)
          and all(3.5 <= r <= 4.5 for r in kap_ratio))
    return CriterionResult(3, "spectral scaling", ok,
                           f"sigma_min spread {spread:.3%}, |G| ratios {[round(r, 3) for r in norm_ratio]}, "
                           f"kappa ratios {[round(r, 3) for r in kap_ratio]}")


def criterion_4(ctx):
    errs = {}
    for n in (8, 16, 32):
        s = assemble_system(n, rhs_case("manufactured"))
        errs[n] = l2_error(s, direct_solve(s), u_exact)
    ratios = [errs[8] / errs[16], errs[16] / errs[32]]
    ok = all(3.3 <= r <= 4.7 for r in ratios)
    return CriterionResult(4, "FEM convergence", ok, f"L2 error ratios {[round(r, 3) for r in ratios]}")


def criterion_5(ctx):
    worst = 0.0
    for system in ctx.systems(ctx.n).values():
        traj = trajectory(system, init_cold(system), 15.0, stride=None, track_invariant=True)
        worst = max(worst, traj.max_invariant)
    return CriterionResult(5, "linear invariant", worst <= 1e-11, f"max relative drift {_fmt(worst)} to T=15")


def criterion_6(ctx):
    system = ctx.systems(ctx.n)["III"]
    state = init_cold(system)
    got = trajectory(system, state, 10.0, stride=None).final.z
    ref = dense_expm_apply(joint_generator(system), 10.0, state.z)
    rel = float(np.linalg.norm(got - ref) / np.linalg.norm(ref))
    return CriterionResult(6, "integrator fidelity", rel <= 1e-7, f"relative gap to expm oracle {_fmt(rel)}")


def criterion_7(ctx):
    worst = 0.0
    fits = {}
    c_st = {}
    for n in (4, 8, 16):
        cert = ctx.cert(n)
        c_st[n] = cert.c_st
        fits[n] = empirical_decay(ctx.systems(n)["I"], 40.0, transient=10.0).c_hat
        for label, system in ctx.systems(n).items():
            if n == ctx.n:
                traj = ctx.long_trajectories[label]
            else:
                traj = trajectory(system, init_cold(system), 30.0, stride=50)
            t = np.asarray(traj.t)
            w = np.asarray(traj.norm_w)
            worst = max(worst, float(np.max(w / (cert.C_st * np.exp(-cert.c_st * t) * w[0]))))
    spread = max(c_st.values()) / min(c_st.values()) - 1.0
    ok = worst <= 1.0 and all(fits[n] >= c_st[n] for n in fits) and spread < 0.15
    return CriterionResult(7, "certificate soundness", ok,
                           f"max |w|/envelope {worst:.4f}, c_hat {[round(v, 4) for v in fits.values()]} vs "
                           f"c_st {[round(v, 4) for v in c_st.values()]}, c_st spread {spread:.2%}")


def criterion_8(ctx):
    n = 8
    cert = ctx.cert(n)
    worst = -math.inf
    equiv = True
    for system in ctx.systems(n).values():
        traj = trajectory(system, init_cold(system), 30.0, stride=50, keep_states=True)
        rep = lyapunov_monitor(system, cert, traj)
        worst = max(worst, rep.max_margin)
        equiv = equiv and rep.equivalence_ok
    ok = worst <= 1e-6 and equiv
    return CriterionResult(8, "Lyapunov monitor", ok,
                           f"max dE/dt + c0|w|^2 = {_fmt(worst)}, equivalence {'ok' if equiv else 'violated'}")


def criterion_9(ctx):
    cert = ctx.cert(ctx.n)
    worst = 0.0
    for label, system in ctx.systems(ctx.n).items():
        x_ref = direct_solve(system)
        for st in ctx.long_trajectories[label].states:
            wn = float(np.linalg.norm(st.w))
            gap = float(np.linalg.norm(x_ref - st.x))
            if wn > 0:
                worst = max(worst, gap / (cert.C_tail * wn))
    return CriterionResult(9, "tail bound", worst <= 1.0, f"max |x*-x|/(C_tail|w|) = {worst:.4f}")


def criterion_10(ctx):
    runs = [r for rs in ctx.solves.values() for r in rs]
    worst = max(r.final_rel_err for r in runs)
    false_rate = sum(r.false_accept for r in runs) / len(runs)
    ok = worst <= 1e-3 and false_rate <= 0.01
    return CriterionResult(10, "dynamic-stopping guarantee", ok,
                           f"{len(runs)} runs, max final rel err {_fmt(worst)}, false-accept rate {false_rate:.3f}")


def criterion_11(ctx):
    cert = ctx.cert(ctx.n)
    eps = ctx.epsilon
    runs = [r for rs in ctx.solves.values() for r in rs]
    p_cap = 2 * eps ** 2 / cert.C_tail ** 2 + 1e-8
    worst_p = max(r.p_res_final for r in runs)
    min_px = min(r.p_x_final for r in runs)
    ok = worst_p <= p_cap and min_px >= 1 - 10 * eps ** 2
    return CriterionResult(11, "end-state quality", ok,
                           f"max p_res {_fmt(worst_p)} (cap {_fmt(p_cap)}), min p_x {min_px:.10f}")


def criterion_12(ctx):
    eps = ctx.epsilon
    systems = ctx.systems(ctx.n)
    cert = ctx.cert(ctx.n)
    deg = degree_sweep(systems["I"], {k: s.b for k, s in systems.items()}, eps)
    tim = time_sweep(systems, cert, eps, 20.0)

    def ordered(cross):
        vals = [cross[k] for k in ("I", "II", "III")]
        return None not in vals and vals[0] <= vals[1] <= vals[2]

    deg_ok = ordered(deg.crossing) and all(c is not None and c <= deg.d_wc for c in deg.crossing.values())
    tim_ok = ordered(tim.crossing) and all(
        c is not None and c <= tim.T_wc[k] for k, c in tim.crossing.items())
    run_i = ctx.solves["I"][0]
    stop_ok = run_i.T_star < run_i.T_worst
    detail = (f"degrees {dict((k, int(v)) for k, v in deg.crossing.items() if v is not None)} (d_wc {deg.d_wc}); "
              f"times {dict((k, round(float(v), 2)) for k, v in tim.crossing.items() if v is not None)} "
              f"(T_wc {min(tim.T_wc.values()):.1f}..{max(tim.T_wc.values()):.1f}); "
              f"case I T_star {run_i.T_star:.2f} < T_worst {run_i.T_worst:.2f}")
    return CriterionResult(12, "instance dependence", deg_ok and tim_ok and stop_ok, detail)


def criterion_13(ctx):
    system = ctx.systems(ctx.n)["III"]
    cert = ctx.cert(ctx.n)
    x_ref = direct_solve(system)
    start = init_warm(system, x_ref, system.G.to_dense() @ x_ref)
    res = run_dynamic_solve(system, default_config(cert, epsilon=ctx.epsilon, seed=0), cert,
                            initial=start, reference=x_ref, label="III")
    ok = res.k_ent == 0 and res.final_rel_err <= 1e-10
    return CriterionResult(13, "warm start", ok,
                           f"accepted at checkpoint {res.k_ent}, final rel err {_fmt(res.final_rel_err)}")


def criterion_14(ctx):
    from ellq.cli import main

    args = ["--n", "8", "--rhs", "I,IV", "--seed", "7"]
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        codes = []
        for d in dirs:
            codes.append(main(["stop", *args, "--out", str(d)]))
            codes.append(main(["relax", "--n", "8", "--rhs", "II", "--t-max", "5", "--out", str(d)]))
        names = sorted(p.name for p in dirs[0].glob("*.csv"))
        same = bool(names) and all(filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False) for f in names)
    ok = same and not any(codes)
    return CriterionResult(14, "reproducibility", ok,
                           f"{len(names)} CSV files compared, {'identical' if same else 'differ'}, exit codes {codes}")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13, criterion_14)


def run_all(ctx: AcceptanceContext | None = None, echo=None) -> list[CriterionResult]:
    ctx = AcceptanceContext() if ctx is None else ctx
    out = []
    for crit in CRITERIA:
        try:
            res = crit(ctx)
        except Exception as exc:  # a crash is a failed criterion, reported like any other
            number = CRITERIA.index(crit) + 1
            res = CriterionResult(number, crit.__name__, False, f"{type(exc).__name__}: {exc}")
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out
