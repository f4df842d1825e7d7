"""Uniform triangulations of the unit square."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ellq.errors import InvalidParameterError

BOUNDARY = -1


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of ``[0, 1]^2`` with ``n`` cells per side.

    Nodes are numbered row-major (``y`` outer, ``x`` inner). Every square is
    split along its lower-left to upper-right diagonal and both triangles are
    stored counterclockwise. ``interior_index[i]`` is the DOF number of node
    ``i``, or ``BOUNDARY`` (-1) for boundary nodes.
    """

    n: int
    nodes: np.ndarray
    triangles: np.ndarray
    interior_index: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_dof(self) -> int:
        return int(np.count_nonzero(self.interior_index != BOUNDARY))

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        """Node ids of the interior DOFs, in DOF order."""
        ids = np.flatnonzero(self.interior_index != BOUNDARY)
        return ids[np.argsort(self.interior_index[ids], kind="stable")]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)


def build_uniform_mesh(n: int) -> Mesh:
    if int(n) != n or n < 2:
        raise InvalidParameterError(f"need n >= 2 cells per side (no interior DOF otherwise), got {n}")
    n = int(n)
    h = 1.0 / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    nodes = np.column_stack([ii.ravel() * h, jj.ravel() * h])

    ci, cj = np.meshgrid(np.arange(n), np.arange(n))
    ci, cj = ci.ravel(), cj.ravel()
    v00 = cj * (n + 1) + ci
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    interior = (ii.ravel() > 0) & (ii.ravel() < n) & (jj.ravel() > 0) & (jj.ravel() < n)
    interior_index = np.full(nodes.shape[0], BOUNDARY, dtype=np.int64)
    interior_index[interior] = np.arange(np.count_nonzero(interior))
    return Mesh(n=n, nodes=nodes, triangles=triangles.astype(np.int64), interior_index=interior_index)


def validate_mesh(mesh: Mesh, tol: float = 1e-14) -> dict[str, bool]:
    """Check the structural invariants; returns ``{check_name: passed}``."""
    n = mesh.n
    h = 1.0 / n
    areas = mesh.signed_areas()
    report = {
        "triangle_count": mesh.n_triangles == 2 * n * n,
        "dof_count": mesh.n_dof == (n - 1) ** 2,
        "positive_orientation": bool(np.all(areas > 0)),
        "uniform_area": bool(np.allclose(areas, 0.5 * h * h, rtol=0, atol=tol)),
        "area_sum": abs(float(np.abs(areas).sum()) - 1.0) <= tol * max(1, n),
    }

    # each consecutive pair of triangles must cover one square and share its
    # lower-left/upper-right diagonal
    same_diagonal = mesh.n_triangles % 2 == 0
    if same_diagonal:
        p = mesh.nodes[mesh.triangles].reshape(-1, 2, 3, 2)
        lo = p.min(axis=(1, 2))
        hi = p.max(axis=(1, 2))
        for k in (0, 1):
            ll = np.all(np.isclose(p[:, k], lo[:, None, :], atol=tol), axis=2).any(axis=1)
            ur = np.all(np.isclose(p[:, k], hi[:, None, :], atol=tol), axis=2).any(axis=1)
            same_diagonal &= bool(np.all(ll & ur))
    report["same_diagonal"] = same_diagonal

    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    on_boundary = (np.isclose(x, 0) | np.isclose(x, 1) | np.isclose(y, 0) | np.isclose(y, 1))
    idx = mesh.interior_index
    inner = idx[~on_boundary]
    report["interior_bijection"] = bool(
        np.all(idx[on_boundary] == BOUNDARY)
        and np.array_equal(np.sort(inner), np.arange((n - 1) ** 2))
    )
    return report


def write_mesh_csv(mesh: Mesh, directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nodes_path = directory / "mesh_nodes.csv"
    tris_path = directory / "mesh_triangles.csv"
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "interior_id"])
        for i, (px, py) in enumerate(mesh.nodes):
            k = mesh.interior_index[i]
            w.writerow([i, repr(float(px)), repr(float(py)), "" if k == BOUNDARY else int(k)])
    with open(tris_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "v0", "v1", "v2"])
        for k, tri in enumerate(mesh.triangles):
            w.writerow([k, *map(int, tri)])
    return nodes_path, tris_path
