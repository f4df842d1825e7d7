"""Executable Lyapunov stability certificate for the residual block.

With ``gamma0 = sigma_min(G)`` and a coupling weight ``eta`` the functional
``E(r, s) = |r|^2 + |s|^2 - 2 eta <r, K s>`` (``K = A^{-1} G^T``) satisfies

    m_- |w|^2 <= E <= m_+ |w|^2,      m_pm = 1 pm eta / gamma0,
    dE/dt <= -c0 |w|^2,               c0 = min(eta, 2(1 - eta) - eta / gamma0^2),

hence ``|exp(tM)| <= C_st exp(-c_st t)`` with ``c_st = c0 / (2 m_+)`` and
``C_st = sqrt(m_+ / m_-)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ellq.dynamics import residual_generator
from ellq.errors import InvalidParameterError
from ellq.fem import EllipticSystem, spectral_summary
from ellq.linalg import check_dense, direct_solve, spmv_transpose


@dataclass(frozen=True)
class StabilityCertificate:
    gamma0: float
    eta: float
    c0: float
    C_st: float
    c_st: float

    @property
    def C_tail(self) -> float:
        return self.C_st / self.c_st

    @property
    def m_minus(self) -> float:
        return 1.0 - self.eta / self.gamma0

    @property
    def m_plus(self) -> float:
        return 1.0 + self.eta / self.gamma0


def poincare_constant(system: EllipticSystem) -> float:
    return spectral_summary(system).sigma_min_G


def eta_admissible(gamma0: float, eta: float) -> bool:
    return 0.0 < eta < gamma0 and 2.0 * (1.0 - eta) - eta / gamma0**2 > 0.0


def default_eta(gamma0: float) -> float:
    """Half of the binding upper limit on ``eta``."""
    return 0.5 * min(gamma0, 2.0 * gamma0**2 / (2.0 * gamma0**2 + 1.0))


def lyapunov_constants(gamma0: float, eta: float | None = None) -> StabilityCertificate:
    if not (gamma0 > 0 and math.isfinite(gamma0)):
        raise InvalidParameterError(f"gamma0 must be positive, got {gamma0}")
    if eta is None:
        eta = default_eta(gamma0)
    elif not eta_admissible(gamma0, eta):
        raise InvalidParameterError(
            f"eta={eta} violates 0 < eta < gamma0 or 2(1 - eta) - eta/gamma0^2 > 0 (gamma0={gamma0})"
        )
    c0 = min(eta, 2.0 * (1.0 - eta) - eta / gamma0**2)
    m_plus = 1.0 + eta / gamma0
    m_minus = 1.0 - eta / gamma0
    return StabilityCertificate(gamma0, eta, c0, math.sqrt(m_plus / m_minus), c0 / (2.0 * m_plus))


def certify(system: EllipticSystem, eta: float | None = None) -> StabilityCertificate:
    return lyapunov_constants(poincare_constant(system), eta)


DENSE_DECAY_LIMIT = 512


@dataclass(frozen=True)
class DecayFit:
    C_hat: float
    c_hat: float
    times: np.ndarray
    norms: np.ndarray


def semigroup_norms(generator, times) -> np.ndarray:
    """Spectral norms of ``exp(t M)`` on a uniform grid starting at 0 (dense)."""
    m = np.asarray(generator, dtype=np.float64)
    check_dense(m.shape[0], "semigroup norm")
    times = _uniform_grid(times)
    step = times[1] - times[0] if times.size > 1 else 0.0
    prop = sla.expm(step * m)
    power = np.eye(m.shape[0])
    out = np.empty(times.size)
    for i in range(times.size):
        out[i] = np.linalg.norm(power, 2)
        power = power @ prop
    return out


def block_semigroup_norms(singular_values, n_flux: int, times) -> np.ndarray:
    """Same norms for ``M = [[0, -G^T], [G, -I]]`` from the singular values of ``G``.

    In the singular bases of ``G`` the generator splits into 2x2 blocks
    ``[[0, -sigma], [sigma, -1]]`` plus ``-1`` on the cokernel of ``G^T``.
    """
    sv = np.asarray(singular_values, dtype=np.float64)
    times = _uniform_grid(times)
    out = np.exp(-times) if n_flux > sv.size else np.zeros(times.size)
    for sigma in np.unique(np.round(sv, 12)):
        block = np.array([[0.0, -sigma], [sigma, -1.0]])
        for i, t in enumerate(times):
            out[i] = max(out[i], np.linalg.norm(sla.expm(t * block), 2))
    return out


def _uniform_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=np.float64)
    if times[0] != 0 or (times.size > 1 and not np.allclose(np.diff(times), times[1] - times[0])):
        raise InvalidParameterError("semigroup norms need a uniform grid starting at t=0")
    return times


def empirical_decay(system_or_generator, horizon: float, samples: int = 41,
                    transient: float = 0.0, method: str = "auto") -> DecayFit:
    """Least-squares fit ``log|exp(tM)| ~ log C_hat - c_hat t`` over ``[transient, horizon]``.

    ``method`` is ``"dense"`` (matrix exponential of ``M``), ``"blocks"``
    (2x2 reduction, systems only) or ``"auto"`` (dense up to
    ``DENSE_DECAY_LIMIT`` unknowns).
    """
    if horizon <= 0 or samples < 2:
        raise InvalidParameterError("need horizon > 0 and at least two samples")
    times = np.linspace(0.0, horizon, samples)
    if isinstance(system_or_generator, EllipticSystem):
        system = system_or_generator
        size = system.n_dof + system.n_flux
        if method == "auto":
            method = "dense" if size <= DENSE_DECAY_LIMIT else "blocks"
        if method == "blocks":
            check_dense(max(system.G.shape), "singular values of G")
            sv = np.linalg.svd(system.dense_G(), compute_uv=False)
            norms = block_semigroup_norms(sv, system.n_flux, times)
        elif method == "dense":
            norms = semigroup_norms(residual_generator(system), times)
        else:
            raise InvalidParameterError(f"unknown decay method {method!r}")
    else:
        if method == "blocks":
            raise InvalidParameterError("the block method needs an assembled system")
        norms = semigroup_norms(system_or_generator, times)
    use = times >= transient
    if np.count_nonzero(use) < 4:
        raise InvalidParameterError(
            f"only {np.count_nonzero(use)} samples past the transient {transient}; need at least 4"
        )
    slope, intercept = np.polyfit(times[use], np.log(norms[use]), 1)
    return DecayFit(float(math.exp(intercept)), float(-slope), times, norms)


def apply_K(system: EllipticSystem, s) -> np.ndarray:
    """``K s = A^{-1} G^T s`` via the reference Cholesky solve."""
    return direct_solve(system, spmv_transpose(system.G, s))


def lyapunov_energy(system: EllipticSystem, cert: StabilityCertificate, r, s) -> float:
    return float(r @ r + s @ s - 2.0 * cert.eta * (r @ apply_K(system, s)))


@dataclass(frozen=True)
class MonitorReport:
    max_margin: float
    max_margin_exact: float
    equivalence_ok: bool
    min_ratio: float
    max_ratio: float
    margins: np.ndarray


def lyapunov_monitor(system: EllipticSystem, cert: StabilityCertificate, states,
                     dt_monitor: float = 1e-3) -> MonitorReport:
    """Worst signed margin of ``dE/dt + c0 |w|^2`` over stored snapshots (should be <= 0).

    ``dE/dt`` is a central difference over ``+-dt_monitor`` along the exact
    flow (dense exponential). ``max_margin_exact`` uses the derivative from
    the generator itself, which carries no differencing error.
    """
    if hasattr(states, "states"):
        states = states.states
    nd = system.n_dof
    m = residual_generator(system)
    fwd = sla.expm(dt_monitor * m)
    bwd = sla.expm(-dt_monitor * m)

    def energy(w):
        return lyapunov_energy(system, cert, w[:nd], w[nd:])

    margins, exact, ratios = [], [], []
    for st in states:
        w = np.concatenate([st.r, st.s])
        ww = float(w @ w)
        if ww == 0.0:
            margins.append(0.0)
            exact.append(0.0)
            continue
        e0 = energy(w)
        ratios.append(e0 / ww)
        de = (energy(fwd @ w) - energy(bwd @ w)) / (2.0 * dt_monitor)
        margins.append(de + cert.c0 * ww)
        wdot = m @ w
        r, s = w[:nd], w[nd:]
        rd, sd = wdot[:nd], wdot[nd:]
        de_exact = 2.0 * (r @ rd + s @ sd) - 2.0 * cert.eta * (rd @ apply_K(system, s) + r @ apply_K(system, sd))
        exact.append(de_exact + cert.c0 * ww)
    ratios = np.asarray(ratios) if ratios else np.array([1.0])
    slack = 1e-12
    ok = bool(np.all(ratios >= cert.m_minus - slack) and np.all(ratios <= cert.m_plus + slack))
    margins = np.asarray(margins)
    return MonitorReport(float(margins.max()), float(max(exact)), ok,
                         float(ratios.min()), float(ratios.max()), margins)


CERTIFICATE_COLUMNS = ["n", "gamma0", "eta", "c0", "C_st", "c_st", "C_tail", "c_hat", "C_hat"]


def write_certificate_csv(rows, path) -> Path:
    """``rows``: iterable of ``(n, StabilityCertificate, DecayFit | None)``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CERTIFICATE_COLUMNS)
        for n, cert, fit in rows:
            w.writerow([n, repr(cert.gamma0), repr(cert.eta), repr(cert.c0), repr(cert.C_st),
                        repr(cert.c_st), repr(cert.C_tail),
                        repr(fit.c_hat) if fit else "", repr(fit.C_hat) if fit else ""])
    return path
