"""Energy densities, their convex envelope, laminates and periodic cell problems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .damage import MaterialParams
from .errors import DomainError
from .fem import DEFAULT_TOL, PeriodicMesh, assemble_stiffness, solve_spd


def W_density(params: MaterialParams, t):
    """Unrelaxed density ``min(beta t^2 / 2, alpha t^2 / 2 + k)`` of the gradient magnitude."""
    t = np.asarray(t, dtype=float)
    out = np.minimum(0.5 * params.beta * t**2, 0.5 * params.alpha * t**2 + params.k)
    return float(out) if out.ndim == 0 else out


def W_relaxed(params: MaterialParams, t):
    """Convex envelope of :func:`W_density`.

    Quadratic in the strong phase up to ``lam``, affine with slope ``beta * lam``
    up to ``beta * lam / alpha``, quadratic in the weak phase beyond.
    """
    a, b, k, lam = params.alpha, params.beta, params.k, params.lam
    t = np.asarray(t, dtype=float)
    upper = b * lam / a
    out = np.where(
        t <= lam,
        0.5 * b * t**2,
        np.where(t <= upper, b * lam * t - 0.5 * b * lam**2, 0.5 * a * t**2 + k),
    )
    return float(out) if out.ndim == 0 else out


def W_relaxed_derivative(params: MaterialParams, t):
    a, b, lam = params.alpha, params.beta, params.lam
    t = np.asarray(t, dtype=float)
    out = np.where(t <= lam, b * t, np.where(t <= b * lam / a, b * lam, a * t))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LaminateSpec:
    """Simple laminate: weak-phase fraction ``d`` and the two layer slopes."""

    d: float
    normal: tuple
    slope_weak: float
    slope_strong: float

    @property
    def mean_gradient(self) -> float:
        return self.d * self.slope_weak + (1.0 - self.d) * self.slope_strong


def laminate_for_gradient(params: MaterialParams, t: float, normal=(1.0, 0.0)) -> LaminateSpec:
    """Weak/strong layering with mean slope ``t`` and flux-matched layer slopes.

    Defined for ``lam <= t <= beta * lam / alpha``; the weak layers carry slope
    ``beta * lam / alpha`` and the strong layers slope ``lam``.
    """
    a, b, lam = params.alpha, params.beta, params.lam
    upper = b * lam / a
    # allow a few ulps at the knees
    eps = 4 * np.finfo(float).eps * max(1.0, upper)
    if not (lam - eps <= t <= upper + eps):
        raise DomainError(f"t={t} outside the laminate range [{lam}, {upper}]")
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    d = (t - lam) * a / (lam * (b - a))
    d = min(max(d, 0.0), 1.0)
    return LaminateSpec(d, (float(n[0]), float(n[1])), upper, lam)


def laminate_energy(params: MaterialParams, lam_spec: LaminateSpec) -> float:
    """Average energy of the layered field: elastic energy in each layer plus ``k d``."""
    d = lam_spec.d
    return (
        d * (0.5 * params.alpha * lam_spec.slope_weak**2 + params.k)
        + (1.0 - d) * 0.5 * params.beta * lam_spec.slope_strong**2
    )


def harmonic_mean(params: MaterialParams, d):
    return 1.0 / (np.asarray(d) / params.alpha + (1.0 - np.asarray(d)) / params.beta)


def laminate_effective(params: MaterialParams, d: float, normal=(1.0, 0.0)) -> np.ndarray:
    """Effective tensor of a rank-one laminate with weak-phase fraction ``d``.

    Harmonic mean across the layers (along ``normal``), arithmetic mean along them.
    """
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"volume fraction must lie in [0, 1], got {d}")
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    across = float(harmonic_mean(params, d))
    along = d * params.alpha + (1.0 - d) * params.beta
    nn = np.outer(n, n)
    return across * nn + along * (np.eye(2) - nn)


def _laminate_objective(params, t):
    return lambda d: 0.5 * harmonic_mean(params, d) * t * t + params.k * d


def relaxed_via_lamination_oracle(params: MaterialParams, t: float, grid_size: int = 200, return_d: bool = False):
    """``min_d`` of laminate energy at mean gradient ``t`` (grid scan + ternary refinement)."""
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    g = _laminate_objective(params, t)
    ds = np.linspace(0.0, 1.0, grid_size + 1)
    vals = g(ds)
    i = int(np.argmin(vals))
    lo, hi = ds[max(i - 1, 0)], ds[min(i + 1, grid_size)]
    # objective is convex in d
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if g(m1) <= g(m2):
            hi = m2
        else:
            lo = m1
        if hi - lo < 1e-14:
            break
    d_best, v_best = ds[i], float(vals[i])
    d_mid = 0.5 * (lo + hi)
    v_mid = float(g(d_mid))
    if v_mid < v_best:
        d_best, v_best = d_mid, v_mid
    return (v_best, float(d_best)) if return_d else v_best


# ---------------------------------------------------------------------------
# periodic cell problems


def cell_coefficients_laminate(pmesh: PeriodicMesh, alpha, beta, d, orientation="horizontal"):
    """Layered cell: weak phase where the coordinate across the layers is below ``d``."""
    c = pmesh.mesh.centroids
    s = c[:, 1] if orientation == "horizontal" else c[:, 0]
    return np.where(s < d, float(alpha), float(beta))


def cell_coefficients_checkerboard(pmesh: PeriodicMesh, alpha, beta):
    c = pmesh.mesh.centroids
    weak = (c[:, 0] < 0.5) ^ (c[:, 1] < 0.5)
    return np.where(weak, float(alpha), float(beta))


def solve_cell_problem(pmesh: PeriodicMesh, coeff, xi, tol: float = DEFAULT_TOL) -> float:
    """``inf`` over periodic ``phi`` of ``int A (xi + grad phi).(xi + grad phi)`` on the unit cell."""
    mesh = pmesh.mesh
    coeff = np.asarray(coeff, dtype=float)
    xi = np.asarray(xi, dtype=float)
    P = pmesh.identification()
    K = (P.T @ assemble_stiffness(mesh, coeff) @ P).tocsr()
    w = coeff * mesh.areas
    # b_a = int A xi . grad(lambda_a)
    local = w[:, None] * np.einsum("tad,d->ta", mesh.shape_grads, xi)
    b_full = np.zeros(mesh.n_nodes)
    np.add.at(b_full, mesh.triangles.ravel(), local.ravel())
    b = P.T @ b_full
    base = float(w.sum() * (xi @ xi))
    # pin dof 0 to remove the constant null space
    phi = np.zeros(pmesh.n_dofs)
    phi[1:] = solve_spd(K[1:, 1:], -b[1:], tol=tol)
    phi -= phi.mean()
    return base + float(b @ phi)


def effective_tensor(pmesh: PeriodicMesh, coeff, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Full symmetric tensor from the cell problems at ``e1``, ``e2`` and ``(e1+e2)/sqrt 2``."""
    q1 = solve_cell_problem(pmesh, coeff, (1.0, 0.0), tol)
    q2 = solve_cell_problem(pmesh, coeff, (0.0, 1.0), tol)
    s = 1.0 / math.sqrt(2.0)
    q12 = solve_cell_problem(pmesh, coeff, (s, s), tol)
    off = q12 - 0.5 * (q1 + q2)
    return np.array([[q1, off], [off, q2]])
