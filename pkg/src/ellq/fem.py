"""P1 assembly of the gradient factor, lumped mass and load, and mass normalization.

The normalized system is ``A = G^T G`` with ``G = G_raw M^{-1/2}`` and
``b = M^{-1/2} b_raw``, so Euclidean norms of nodal vectors are discrete L2
norms of the corresponding P1 functions (lumped mass).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ellq.errors import AssemblyError, InvalidParameterError
from ellq.linalg import CSRMatrix, check_dense, cholesky_factor, dense_eig_sym
from ellq.mesh import BOUNDARY, Mesh, build_uniform_mesh

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientField:
    """Isotropic diffusivity ``a(x, y) > 0``; the evaluator must accept arrays."""

    evaluator: Evaluator

    @classmethod
    def constant(cls, value: float = 1.0) -> "CoefficientField":
        return cls(lambda x, y: np.full(np.shape(x), float(value)))

    def __call__(self, x, y) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.evaluator(x, y), dtype=np.float64), np.shape(x))


@dataclass(frozen=True)
class SpectralSummary:
    sigma_min_G: float
    norm_G: float
    lambda_min_A: float
    lambda_max_A: float

    @property
    def kappa_A(self) -> float:
        return self.lambda_max_A / self.lambda_min_A


@dataclass
class EllipticSystem:
    """Mass-normalized P1 system: gradient factor ``G``, load ``b``, ``M^{-1/2}``.

    Dense helpers (``dense_A``, ``cholesky``, ``eig``, ``spectral``) are
    computed on first use and cached; the sparse data is treated as immutable.
    """

    mesh: Mesh
    G: CSRMatrix
    b: np.ndarray
    mass_sqrt_inv: np.ndarray
    mass_lumping: str = "lumped"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_dof(self) -> int:
        return self.G.shape[1]

    @property
    def n_flux(self) -> int:
        return self.G.shape[0]

    @property
    def GT(self) -> CSRMatrix:
        if "GT" not in self._cache:
            self._cache["GT"] = self.G.transpose()
        return self._cache["GT"]

    def with_rhs(self, b) -> "EllipticSystem":
        """Same operator, different load; dense caches are shared."""
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.n_dof,):
            raise InvalidParameterError(f"load must have length {self.n_dof}")
        other = EllipticSystem(self.mesh, self.G, b, self.mass_sqrt_inv, self.mass_lumping)
        other._cache = self._cache
        return other

    def dense_G(self) -> np.ndarray:
        if "G" not in self._cache:
            check_dense(max(self.G.shape), "dense G")
            self._cache["G"] = self.G.to_dense()
        return self._cache["G"]

    def dense_A(self) -> np.ndarray:
        if "A" not in self._cache:
            g = self.dense_G()
            self._cache["A"] = g.T @ g
        return self._cache["A"]

    def cholesky(self):
        if "chol" not in self._cache:
            self._cache["chol"] = cholesky_factor(self.dense_A())
        return self._cache["chol"]

    def eig(self):
        """Ascending eigenpairs of ``A``."""
        if "eig" not in self._cache:
            self._cache["eig"] = dense_eig_sym(self.dense_A())
        return self._cache["eig"]

    def spectral(self) -> SpectralSummary:
        return spectral_summary(self)


def p1_gradients(mesh: Mesh) -> np.ndarray:
    """Constant P1 basis gradients, shape ``(n_triangles, 3, 2)``."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.empty(p.shape)
    for j in range(3):
        a, b = (j + 1) % 3, (j + 2) % 3
        grads[:, j, 0] = (y[:, a] - y[:, b]) / det
        grads[:, j, 1] = (x[:, b] - x[:, a]) / det
    return grads


def _coefficient_at_centroids(mesh: Mesh, coeff: CoefficientField) -> np.ndarray:
    c = mesh.centroids()
    a = coeff(c[:, 0], c[:, 1])
    bad = np.flatnonzero(~(a > 0) | ~np.isfinite(a))
    if bad.size:
        k = int(bad[0])
        raise AssemblyError(
            f"coefficient a={a[k]!r} is not positive at the centroid of triangle {k} "
            f"({c[k, 0]:.6g}, {c[k, 1]:.6g})"
        )
    return a


def assemble_gradient_factor(mesh: Mesh, coeff: CoefficientField | None = None) -> CSRMatrix:
    """Raw factor: rows ``2K, 2K+1`` hold ``sqrt(|K| a(c_K)) grad(phi_j)`` on triangle ``K``."""
    coeff = CoefficientField.constant(1.0) if coeff is None else coeff
    a = _coefficient_at_centroids(mesh, coeff)
    weight = np.sqrt(mesh.signed_areas() * a)
    grads = p1_gradients(mesh) * weight[:, None, None]
    ntri = mesh.n_triangles
    cols = mesh.interior_index[mesh.triangles]  # (ntri, 3)
    rows = 2 * np.arange(ntri)[:, None, None] + np.arange(2)[None, None, :]  # (ntri, 1, 2)
    rows = np.broadcast_to(rows, grads.shape)
    cols = np.broadcast_to(cols[:, :, None], grads.shape)
    keep = cols != BOUNDARY
    return CSRMatrix.from_coo(rows[keep], cols[keep], grads[keep], (2 * ntri, mesh.n_dof))


def assemble_lumped_mass(mesh: Mesh, interior_only: bool = False) -> np.ndarray:
    """Row-sum lumped P1 mass, ``sum_{K ni i} |K| / 3``, for every node (or interior DOF)."""
    area = mesh.signed_areas()
    mass = np.bincount(mesh.triangles.ravel(), weights=np.repeat(area / 3.0, 3),
                       minlength=mesh.nodes.shape[0])
    if interior_only:
        return mass[mesh.interior_nodes]
    return mass


# barycentric coordinates of the edge midpoints, weights 1/3 each
_MIDEDGE = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def assemble_load(mesh: Mesh, f: Evaluator) -> np.ndarray:
    """Raw load ``int f phi_k`` over interior DOFs with the mid-edge rule (exact for quadratics)."""
    p = mesh.nodes[mesh.triangles]  # (ntri, 3, 2)
    qp = np.einsum("qj,tjd->tqd", _MIDEDGE, p)
    fq = np.asarray(f(qp[..., 0], qp[..., 1]), dtype=np.float64) * np.ones(qp.shape[:2])
    area = mesh.signed_areas()
    local = (area / 3.0)[:, None] * np.einsum("tq,qj->tj", fq, _MIDEDGE)
    idx = mesh.interior_index[mesh.triangles]
    keep = idx != BOUNDARY
    return np.bincount(idx[keep], weights=local[keep], minlength=mesh.n_dof)


def normalize_system(raw_factor: CSRMatrix, raw_load, mass, mesh: Mesh | None = None) -> EllipticSystem:
    mass = np.asarray(mass, dtype=np.float64)
    raw_load = np.asarray(raw_load, dtype=np.float64)
    if mass.shape != (raw_factor.shape[1],) or raw_load.shape != mass.shape:
        raise AssemblyError("mass and load must have one entry per interior DOF")
    if np.any(~(mass > 0)):
        k = int(np.flatnonzero(~(mass > 0))[0])
        raise AssemblyError(f"non-positive lumped mass {mass[k]!r} at DOF {k}")
    msi = 1.0 / np.sqrt(mass)
    return EllipticSystem(mesh, raw_factor.scale_columns(msi), msi * raw_load, msi)


def assemble_system(n: int, f: Evaluator, coeff: CoefficientField | None = None) -> EllipticSystem:
    """Mesh, assemble and normalize in one call."""
    mesh = build_uniform_mesh(n)
    return normalize_system(
        assemble_gradient_factor(mesh, coeff),
        assemble_load(mesh, f),
        assemble_lumped_mass(mesh, interior_only=True),
        mesh,
    )


def spectral_summary(system: EllipticSystem) -> SpectralSummary:
    """Extreme singular values of ``G`` (dense SVD); ``A``'s extremes are their squares."""
    if "spectral" not in system._cache:
        check_dense(max(system.G.shape), "spectral summary")
        sv = np.linalg.svd(system.dense_G(), compute_uv=False)
        smin, smax = float(sv[-1]), float(sv[0])
        system._cache["spectral"] = SpectralSummary(smin, smax, smin * smin, smax * smax)
    return system._cache["spectral"]


def interpolate(system: EllipticSystem, u: Evaluator) -> np.ndarray:
    """Normalized coordinates ``M^{1/2} u(nodes)`` of the nodal interpolant."""
    pts = system.mesh.nodes[system.mesh.interior_nodes]
    return np.asarray(u(pts[:, 0], pts[:, 1]), dtype=np.float64) / system.mass_sqrt_inv


def l2_error(system: EllipticSystem, x, u: Evaluator) -> float:
    """Discrete (lumped-mass) L2 distance between ``x`` and the interpolant of ``u``."""
    return float(np.linalg.norm(np.asarray(x) - interpolate(system, u)))


def write_matrix_market(m: CSRMatrix, path) -> Path:
    path = Path(path)
    rows = m.row_ids()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(rows, m.indices, m.data):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
    return path


def read_matrix_market(path) -> CSRMatrix:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("%")]
    nr, nc, nnz = map(int, lines[0].split())
    entries = np.array([ln.split() for ln in lines[1:1 + nnz]], dtype=np.float64).reshape(-1, 3)
    return CSRMatrix.from_coo(entries[:, 0].astype(np.int64) - 1, entries[:, 1].astype(np.int64) - 1,
                              entries[:, 2], (nr, nc))


def write_vector(v, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for value in np.asarray(v, dtype=np.float64):
            fh.write(f"{float(value)!r}\n")
    return path


def read_vector(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=1)


SPECTRAL_COLUMNS = ["n", "h", "sigma_min", "norm_G", "lambda_min", "lambda_max", "kappa"]


def spectral_rows(systems) -> list[list]:
    rows = []
    for system in systems:
        s = spectral_summary(system)
        rows.append([system.mesh.n, system.mesh.h, s.sigma_min_G, s.norm_G,
                     s.lambda_min_A, s.lambda_max_A, s.kappa_A])
    return rows


def write_spectral_csv(systems, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPECTRAL_COLUMNS)
        for row in spectral_rows(systems):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return path
