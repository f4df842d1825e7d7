"""Shared orchestration: per-case systems, the ODE-time sweep and their CSVs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ellq.cases import CASE_LABELS, rhs_case
from ellq.certificate import StabilityCertificate
from ellq.dynamics import DEFAULT_THETA, init_cold, trajectory
from ellq.fem import EllipticSystem, assemble_load, assemble_system
from ellq.filters import first_crossing
from ellq.linalg import direct_solve
from ellq.stopping import worst_case_time


def case_systems(n: int, labels=CASE_LABELS) -> dict[str, EllipticSystem]:
    """One system per right-hand side; all share the operator and its caches."""
    labels = list(labels)
    if not labels:
        return {}
    base = assemble_system(n, rhs_case(labels[0]))
    out = {}
    for label in labels:
        case = rhs_case(label)
        raw = assemble_load(base.mesh, case)
        out[label] = base.with_rhs(base.mass_sqrt_inv * raw)
    return out


def gamma_b(system: EllipticSystem, reference=None) -> float:
    """``|b| / |x_*|``, the instance factor entering the worst-case time."""
    x_ref = direct_solve(system) if reference is None else reference
    return float(np.linalg.norm(system.b) / np.linalg.norm(x_ref))


@dataclass
class TimeSweep:
    epsilon: float
    curves: dict = field(default_factory=dict)  # label -> (t, rel_err)
    crossing: dict = field(default_factory=dict)
    T_wc: dict = field(default_factory=dict)

    def write_curves(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "t", "rel_err"])
            for label, (t, err) in self.curves.items():
                for a, e in zip(t, err):
                    w.writerow([label, repr(float(a)), repr(float(e))])
        return path

    def write_summary(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "crossing_time", "T_wc"])
            for label, c in self.crossing.items():
                w.writerow([label, "" if c is None else repr(float(c)), repr(self.T_wc[label])])
        return path


def time_sweep(systems: dict, cert: StabilityCertificate, epsilon: float, t_max: float,
               theta: float = DEFAULT_THETA, stride: int = 10) -> TimeSweep:
    """Relative error of ``x(T)`` against the direct solve on a uniform ``T`` grid."""
    sweep = TimeSweep(epsilon)
    for label, system in systems.items():
        x_ref = direct_solve(system)
        traj = trajectory(system, init_cold(system), t_max, theta=theta, stride=stride, reference=x_ref)
        t = np.asarray(traj.t)
        err = np.asarray(traj.rel_err)
        sweep.curves[label] = (t, err)
        sweep.crossing[label] = first_crossing(t, err, epsilon)
        sweep.T_wc[label] = worst_case_time(cert, gamma_b(system, x_ref), epsilon)
    return sweep
