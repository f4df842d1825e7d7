"""Spectral emulator of polynomial inverse filters (degree sweeps).

A least-squares Chebyshev fit ``p ~ 1/lambda`` on ``[lambda_lo, lambda_hi]``
is applied exactly through the eigendecomposition of ``A``, with the spectrum
normalized by ``lambda_max`` so the promised interval is ``[1/kappa, 1]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C

from ellq.errors import InvalidParameterError
from ellq.fem import EllipticSystem
from ellq.linalg import direct_solve


@dataclass(frozen=True)
class InversePolynomial:
    """Chebyshev expansion on the mapped interval; ``sup_error`` is ``max |p - 1/lambda|`` on a dense grid."""

    degree: int
    interval: tuple[float, float]
    coefficients: np.ndarray
    sup_error: float

    def _mapped(self, lam):
        lo, hi = self.interval
        lam = np.asarray(lam, dtype=np.float64)
        if hi == lo:
            return np.zeros_like(lam)
        return (2.0 * lam - (lo + hi)) / (hi - lo)

    def __call__(self, lam):
        return C.chebval(self._mapped(lam), self.coefficients)


def _dense_grid(lo, hi, size=4001):
    # Chebyshev-clustered plus uniform points so endpoint behaviour is resolved
    k = np.arange(size)
    cheb = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * k / (size - 1))
    return np.unique(np.concatenate([cheb, np.linspace(lo, hi, size)]))


def inverse_poly(interval, degree: int) -> InversePolynomial:
    lo, hi = (float(v) for v in interval)
    if not (lo > 0 and hi >= lo):
        raise InvalidParameterError(f"need 0 < lambda_lo <= lambda_hi, got [{lo}, {hi}]")
    if int(degree) != degree or degree < 0:
        raise InvalidParameterError(f"degree must be a non-negative integer, got {degree}")
    degree = int(degree)
    if hi == lo:
        coeffs = np.zeros(degree + 1)
        coeffs[0] = 1.0 / lo
        return InversePolynomial(degree, (lo, hi), coeffs, 0.0)
    m = 4 * (degree + 1)
    nodes = np.cos(np.pi * (np.arange(m) + 0.5) / m)  # first-kind Chebyshev points
    lam = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
    coeffs = C.chebfit(nodes, 1.0 / lam, degree)
    poly = InversePolynomial(degree, (lo, hi), coeffs, 0.0)
    grid = _dense_grid(lo, hi)
    sup = float(np.max(np.abs(poly(grid) - 1.0 / grid)))
    return InversePolynomial(degree, (lo, hi), coeffs, sup)


def _normalized_spectrum(system: EllipticSystem):
    evals, evecs = system.eig()
    lam_max = float(evals[-1])
    return evals / lam_max, evecs, lam_max


def spectral_interval(system: EllipticSystem) -> tuple[float, float]:
    mu, _, _ = _normalized_spectrum(system)
    return float(mu[0]), 1.0


def _unit(v):
    return v / np.linalg.norm(v)


def apply_filter(system: EllipticSystem, b, poly: InversePolynomial, reference=None):
    """Return ``(x_d, state_error)`` for ``x_d = p(A/lambda_max) b / lambda_max``."""
    mu, evecs, lam_max = _normalized_spectrum(system)
    lo, hi = poly.interval
    slack = 1e-12 * max(1.0, hi)
    if mu[0] < lo - slack or mu[-1] > hi + slack:
        raise InvalidParameterError(
            f"normalized spectrum [{mu[0]:.6g}, {mu[-1]:.6g}] leaves the promised interval [{lo}, {hi}]"
        )
    b = np.asarray(b, dtype=np.float64)
    coef = evecs.T @ b
    x_d = evecs @ (poly(mu) * coef) / lam_max
    x_ref = direct_solve(system, b) if reference is None else reference
    if not np.any(x_d):
        return x_d, float("inf")
    return x_d, float(np.linalg.norm(_unit(x_d) - _unit(x_ref)))


def matrix_polynomial_apply(system: EllipticSystem, b, poly: InversePolynomial) -> np.ndarray:
    """``p(A/lambda_max) b / lambda_max`` by Clenshaw recurrence on the dense matrix."""
    lo, hi = poly.interval
    a = system.dense_A()
    lam_max = float(system.eig()[0][-1])
    n = a.shape[0]
    if hi == lo:
        mapped = np.zeros((n, n))
    else:
        mapped = (2.0 * a / lam_max - (lo + hi) * np.eye(n)) / (hi - lo)
    b = np.asarray(b, dtype=np.float64)
    b1 = np.zeros(n)
    b2 = np.zeros(n)
    for c in poly.coefficients[:0:-1]:
        b1, b2 = c * b + 2.0 * (mapped @ b1) - b2, b1
    return (poly.coefficients[0] * b + mapped @ b1 - b2) / lam_max


def worst_case_degree(kappa: float, epsilon: float) -> int:
    """Conservative degree ``ceil(kappa ln(kappa/epsilon))``."""
    return math.ceil(kappa * math.log(kappa / epsilon))


def first_crossing(xs, errors, epsilon: float):
    """Smallest sampled ``x`` whose error is at or below ``epsilon`` (``None`` if never)."""
    hits = np.flatnonzero(np.asarray(errors) <= epsilon)
    return None if hits.size == 0 else xs[hits[0]]


@dataclass
class DegreeSweep:
    epsilon: float
    degrees: np.ndarray
    errors: dict = field(default_factory=dict)
    crossing: dict = field(default_factory=dict)
    kappa: float = 1.0
    d_wc: int = 0

    def write_curves(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "degree", "state_err"])
            for label, errs in self.errors.items():
                for d, e in zip(self.degrees, errs):
                    w.writerow([label, int(d), repr(float(e))])
        return path

    def write_summary(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "crossing_degree", "d_wc"])
            for label, d in self.crossing.items():
                w.writerow([label, "" if d is None else int(d), self.d_wc])
        return path


def degree_sweep(system: EllipticSystem, rhs: dict, epsilon: float, max_degree: int = 160) -> DegreeSweep:
    """State-error curves over ``0..max_degree`` for each named load vector."""
    mu, _, _ = _normalized_spectrum(system)
    kappa = 1.0 / float(mu[0])
    interval = (float(mu[0]), 1.0)
    degrees = np.arange(max_degree + 1)
    polys = [inverse_poly(interval, d) for d in degrees] if rhs else []
    sweep = DegreeSweep(epsilon, degrees, kappa=kappa, d_wc=worst_case_degree(kappa, epsilon))
    for label, b in rhs.items():
        x_ref = direct_solve(system, b)
        errs = np.array([apply_filter(system, b, p, x_ref)[1] for p in polys])
        sweep.errors[label] = errs
        sweep.crossing[label] = first_crossing(degrees, errs, epsilon)
    return sweep
