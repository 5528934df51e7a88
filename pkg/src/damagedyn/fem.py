"""P1 finite elements on uniform triangulations of a rectangle.

Nodes are numbered row by row, ``node = j * (nx + 1) + i`` for the point
``(i * Lx / nx, j * Ly / ny)``.  Every cell is split along its lower-left to
upper-right diagonal, so cell ``(i, j)`` owns triangles ``2 * (j * nx + i)``
(lower-right) and ``2 * (j * nx + i) + 1`` (upper-left).

Matrices are assembled over *all* nodes; :meth:`Mesh.restrict` extracts the
block acting on the free (interior) nodes, which is what the solvers see.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, SolverError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Mesh:
    nx: int
    ny: int
    Lx: float
    Ly: float
    nodes: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray
    boundary_mask: np.ndarray
    free_dofs: np.ndarray
    # barycentric gradients, shape (n_triangles, 3, 2)
    shape_grads: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def measure(self) -> float:
        return self.Lx * self.Ly

    @property
    def h(self) -> float:
        return max(self.Lx / self.nx, self.Ly / self.ny)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def restrict(self, A):
        """Block of a full-node matrix acting on the free dofs."""
        idx = self.free_dofs
        return A.tocsr()[idx][:, idx].tocsr()

    def expand(self, x_free) -> np.ndarray:
        """Scatter free-dof values into a full nodal vector (zero on the boundary)."""
        u = np.zeros(self.n_nodes)
        u[self.free_dofs] = x_free
        return u

    def interpolate(self, func) -> np.ndarray:
        """Nodal values of ``func(x, y)``."""
        vals = np.asarray(func(self.nodes[:, 0], self.nodes[:, 1]), dtype=float)
        return np.broadcast_to(vals, (self.n_nodes,)).copy()

    def interpolate_h10(self, func) -> np.ndarray:
        """Nodal interpolant with boundary values forced to zero."""
        u = self.interpolate(func)
        u[self.boundary_mask] = 0.0
        return u


def _barycentric_gradients(nodes, triangles):
    p = nodes[triangles]  # (nt, 3, 2)
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty(p.shape)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        g[:, a, 0] = (y[:, b] - y[:, c]) / det
        g[:, a, 1] = (x[:, c] - x[:, b]) / det
    return 0.5 * det, g


def build_mesh(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0) -> Mesh:
    """Uniform triangulation of ``(0, Lx) x (0, Ly)`` with ``2 * nx * ny`` triangles."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ConfigError(f"cell counts must be positive integers, got nx={nx}, ny={ny}", "mesh")
    if not (Lx > 0 and Ly > 0 and np.isfinite(Lx) and np.isfinite(Ly)):
        raise ConfigError(f"side lengths must be positive, got Lx={Lx}, Ly={Ly}", "mesh")
    nx, ny = int(nx), int(ny)
    Lx, Ly = float(Lx), float(Ly)

    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    i, j = i.ravel(), j.ravel()
    nodes = np.column_stack([i * (Lx / nx), j * (Ly / ny)])
    # exact endpoints, no accumulated rounding
    nodes[i == nx, 0] = Lx
    nodes[j == ny, 1] = Ly

    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny))
    ci, cj = ci.ravel(), cj.ravel()
    n00 = cj * (nx + 1) + ci
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    tri = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tri[0::2] = np.column_stack([n00, n10, n11])
    tri[1::2] = np.column_stack([n00, n11, n01])

    areas, grads = _barycentric_gradients(nodes, tri)
    boundary = (i == 0) | (i == nx) | (j == 0) | (j == ny)
    free = np.flatnonzero(~boundary)
    return Mesh(nx, ny, Lx, Ly, nodes, tri, areas, boundary, free, grads)


def _assemble(mesh: Mesh, local: np.ndarray):
    """Sum per-triangle 3x3 blocks into a CSR matrix (fixed, deterministic order)."""
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


_P1_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_mass(mesh: Mesh, lumped: bool = False):
    """Full-node L2 Gram matrix of the hat functions (consistent by default)."""
    if lumped:
        diag = np.zeros(mesh.n_nodes)
        np.add.at(diag, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
        return sp.diags(diag, format="csr")
    local = mesh.areas[:, None, None] * _P1_MASS[None]
    return _assemble(mesh, local)


def assemble_stiffness(mesh: Mesh, coeff):
    """Full-node matrix of ``u -> sum_T coeff_T |grad u|_T^2 |T|``."""
    coeff = np.asarray(coeff, dtype=float)
    if coeff.ndim == 0:
        coeff = np.full(mesh.n_triangles, float(coeff))
    if coeff.shape != (mesh.n_triangles,):
        raise ValueError(
            f"coefficient must have one value per triangle ({mesh.n_triangles}), got shape {coeff.shape}"
        )
    G = mesh.shape_grads
    local = (coeff * mesh.areas)[:, None, None] * np.einsum("tad,tbd->tab", G, G)
    return _assemble(mesh, local)


def element_gradients(mesh: Mesh, u) -> np.ndarray:
    """Constant gradient of the P1 field ``u`` on each triangle, shape (n_triangles, 2)."""
    u = np.asarray(u, dtype=float)
    return np.einsum("ta,tad->td", u[mesh.triangles], mesh.shape_grads)


def gradient_norms(mesh: Mesh, u) -> np.ndarray:
    g = element_gradients(mesh, u)
    return np.hypot(g[:, 0], g[:, 1])


class SpdFactor:
    """Reusable solver for a fixed SPD matrix.

    ``method="direct"`` factorizes once (SuperLU, natural ordering kept fixed
    for reproducibility) and polishes with iterative refinement;
    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients.
    """

    def __init__(self, A, method: str = "direct", max_iter: int | None = None):
        self.A = sp.csc_matrix(A)
        self.method = method
        n = self.A.shape[0]
        self.max_iter = max_iter if max_iter is not None else max(10 * n, 100)
        if method == "direct":
            self._lu = spla.splu(self.A, permc_spec="MMD_AT_PLUS_A") if n else None
        elif method == "cg":
            d = self.A.diagonal()
            self._precond = sp.diags(1.0 / d) if n else None
        else:
            raise ConfigError(f"unknown solver method {method!r}", "solver.method")

    def solve(self, b, tol: float = DEFAULT_TOL) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.size == 0:
            return np.zeros(0)
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        if self.method == "direct":
            x = self._lu.solve(b)
            for _ in range(3):
                r = b - self.A @ x
                res = np.linalg.norm(r) / bnorm
                if res <= tol:
                    return x
                x = x + self._lu.solve(r)
        else:
            x, _ = spla.cg(self.A, b, rtol=tol, atol=0.0, maxiter=self.max_iter, M=self._precond)
        res = np.linalg.norm(b - self.A @ x) / bnorm
        if not res <= tol:
            raise SolverError(f"{self.method} solve did not converge", res)
        return x


def solve_spd(A, b, tol: float = DEFAULT_TOL, method: str = "direct", max_iter: int | None = None):
    """Solve ``A x = b`` for SPD ``A`` to relative residual ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return SpdFactor(A, method=method, max_iter=max_iter).solve(b, tol)


def l2_norm(M, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(max(u @ (M @ u), 0.0)))


# ---------------------------------------------------------------------------
# periodic unit cells


@dataclass(frozen=True, eq=False)
class PeriodicMesh:
    """An ``n x n`` mesh of the unit torus: a :class:`Mesh` plus a node identification."""

    mesh: Mesh
    # full node index -> periodic dof index
    dof_map: np.ndarray
    n_dofs: int

    @property
    def n_triangles(self) -> int:
        return self.mesh.n_triangles

    def identification(self):
        """Sparse (n_nodes x n_dofs) 0/1 matrix P with u_full = P u_periodic."""
        m = self.mesh
        return sp.csr_matrix(
            (np.ones(m.n_nodes), (np.arange(m.n_nodes), self.dof_map)), shape=(m.n_nodes, self.n_dofs)
        )


def build_periodic_mesh(n: int, m: int | None = None) -> PeriodicMesh:
    m = n if m is None else m
    mesh = build_mesh(n, m, 1.0, 1.0)
    i = np.rint(mesh.nodes[:, 0] * n).astype(np.int64) % n
    j = np.rint(mesh.nodes[:, 1] * m).astype(np.int64) % m
    return PeriodicMesh(mesh, j * n + i, n * m)
