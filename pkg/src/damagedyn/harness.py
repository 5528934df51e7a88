"""Refinement studies, the brute-force oracle battery, and tabulations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import Config, build_problem
from .damage import DamageState, repair_initial_damage, threshold_audit
from .dynamics import DamageDynamics, run_dynamics
from .energy import audit_trajectory
from .fem import build_mesh, build_periodic_mesh, element_gradients, gradient_norms, l2_norm
from .relaxation import (
    W_density,
    W_relaxed,
    cell_coefficients_checkerboard,
    cell_coefficients_laminate,
    effective_tensor,
    laminate_effective,
    laminate_for_gradient,
    relaxed_via_lamination_oracle,
)
from .scenarios import ForcingTerm

log = logging.getLogger(__name__)


def manufactured_solution(cfg: Config):
    """Exact solution ``u(t, x, y)`` for damage-free, force-free single-mode data, else ``None``.

    Requires ``k = inf``, zero forcing, empty initial damage, and ``u0``/``v0`` each
    either zero or a ``sines`` profile of one common mode.
    """
    if cfg.material.damage_enabled or not cfg.forcing.is_zero or cfg.D0.kind != "empty":
        return None
    modes = {(f.params["mx"], f.params["my"]) for f in (cfg.u0, cfg.v0) if f.kind == "sines"}
    if any(f.kind not in ("zero", "sines") for f in (cfg.u0, cfg.v0)) or len(modes) > 1:
        return None
    if not modes:
        return lambda t, x, y: np.zeros(np.broadcast(x, y).shape)
    mx, my = modes.pop()
    omega = math.sqrt(cfg.material.beta * ((mx * math.pi / cfg.Lx) ** 2 + (my * math.pi / cfg.Ly) ** 2))
    a = cfg.u0.params["amplitude"] if cfg.u0.kind == "sines" else 0.0
    b = cfg.v0.params["amplitude"] if cfg.v0.kind == "sines" else 0.0

    def exact(t, x, y):
        shape = np.sin(mx * math.pi * x / cfg.Lx) * np.sin(my * math.pi * y / cfg.Ly)
        return (a * math.cos(omega * t) + b / omega * math.sin(omega * t)) * shape

    return exact


@dataclass
class LevelResult:
    level: int
    nx: int
    ny: int
    steps: int
    dt: float
    h: float
    l2_error: float | None = None
    area_above_lambda: tuple = ()
    area_above_M: float | None = None
    max_area_above_M: float | None = None
    damage_volume: float | None = None
    max_grad_undamaged: float | None = None
    audit_passed: bool | None = None
    error: str | None = None


@dataclass
class ConvergenceReport:
    deltas: tuple
    levels: list = field(default_factory=list)
    orders: list = field(default_factory=list)

    @property
    def errors(self):
        return [lv.l2_error for lv in self.levels]


def converge_harness(base: Config, levels: int = 3) -> ConvergenceReport:
    """Run ``levels`` jointly refined copies of ``base`` (h and dt halved per level)."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    exact = manufactured_solution(base)
    report = ConvergenceReport(deltas=tuple(base.deltas))
    for lev in range(levels):
        cfg = base.refined(lev)
        res = LevelResult(lev, cfg.nx, cfg.ny, cfg.steps, cfg.dt, max(cfg.Lx / cfg.nx, cfg.Ly / cfg.ny))
        try:
            problem = build_problem(cfg)
            scheme = problem[0]
            traj = run_dynamics(cfg, problem=problem)
            final = traj.states[-1]
            if exact is not None:
                ue = scheme.mesh.interpolate_h10(lambda x, y: exact(final.t, x, y))
                res.l2_error = l2_norm(scheme.M_full, final.u_curr - ue)
            norms = gradient_norms(scheme.mesh, final.u_curr)
            ta = threshold_audit(cfg.material, final.damage, norms, cfg.deltas)
            res.area_above_lambda = ta.area_above_lambda
            res.area_above_M = ta.area_above_M
            res.max_area_above_M = max(
                threshold_audit(cfg.material, s.damage, gradient_norms(scheme.mesh, s.u_curr)).area_above_M
                for s in traj.states[1:]
            )
            res.damage_volume = final.damage.volume
            res.max_grad_undamaged = ta.max_grad_undamaged
            res.audit_passed = audit_trajectory(scheme, traj).passed
        except Exception as exc:  # noqa: BLE001 - recorded per level, harness continues
            log.error("level %d failed: %s", lev, exc)
            res.error = f"{type(exc).__name__}: {exc}"
        report.levels.append(res)
    for a, b in zip(report.levels[:-1], report.levels[1:]):
        if a.l2_error and b.l2_error:
            report.orders.append(math.log(a.l2_error / b.l2_error) / math.log(a.h / b.h))
        else:
            report.orders.append(None)
    return report


# ---------------------------------------------------------------------------
# brute-force oracle battery


@dataclass(frozen=True)
class OracleCase:
    case: int
    dt: float
    u0_amplitude: float
    v0_amplitude: float
    force: float
    volume_entry: float
    energy_alternating: float
    energy_oracle: float
    volume_alternating: float
    volume_oracle: float
    slack_bound: float

    @property
    def gap(self) -> float:
        return self.energy_alternating - self.energy_oracle

    def equal(self, tol=1e-9) -> bool:
        return abs(self.gap) <= tol


def _hat(mesh, rng):
    """Random P1 field on the free dofs with unit max amplitude."""
    u = np.zeros(mesh.n_nodes)
    u[mesh.free_dofs] = rng.uniform(-1.0, 1.0, mesh.free_dofs.size)
    m = np.abs(u).max()
    return u / m if m > 0 else u


def oracle_battery(cfg: Config, n: int = 30, seed: int = 0) -> list:
    """First steps from random admissible data: alternating fixed point vs exhaustive search.

    Per case: ``dt ~ U[0.05, 0.5]``, ``u0 = a * p``, ``v0 = b * q`` with random shapes
    ``p, q`` and ``a`` scaled so ``max |grad u0|`` is uniform on ``[0, 1.5 M]``,
    ``b ~ U[-10, 10]``, constant load ``c ~ U[-100, 100]``; ``D0`` is the minimal admissible set.
    """
    rng = np.random.default_rng(seed)
    mesh = build_mesh(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    params = cfg.material
    gscale = params.M if params.damage_enabled else 1.0
    cases = []
    for i in range(n):
        dt = float(rng.uniform(0.05, 0.5))
        p = _hat(mesh, rng)
        q = _hat(mesh, rng)
        gmax = float(gradient_norms(mesh, p).max()) or 1.0
        a = float(rng.uniform(0.0, 1.5)) * gscale / gmax * float(rng.choice([-1.0, 1.0]))
        b = float(rng.uniform(-10.0, 10.0))
        c = float(rng.uniform(-100.0, 100.0))
        u0, v0 = a * p, b * q
        D0 = repair_initial_damage(params, DamageState.empty(mesh.areas), element_gradients(mesh, u0), level=logging.DEBUG)
        forcing = ForcingTerm("separable", amplitude=c, time="const")
        scheme = DamageDynamics(mesh, params, dt, forcing=forcing, tol=cfg.tol, method=cfg.method)
        start = scheme.start_state(u0, v0, D0)
        alt, rep = scheme.advance(start)
        u_b, D_b, e_b = scheme.brute_force_step(start)
        cases.append(
            OracleCase(i, dt, a, b, c, D0.volume, rep.energy, e_b, alt.damage.volume, D_b.volume, dt * dt / 2.0)
        )
    return cases


# ---------------------------------------------------------------------------
# tabulations


def relaxation_table(params, t_max=None, points=200, grid_size=200):
    upper = params.beta * params.lam / params.alpha
    t_max = 2.0 * upper if t_max is None else t_max
    rows = []
    for t in np.linspace(0.0, t_max, points):
        oracle, d_opt = relaxed_via_lamination_oracle(params, t, grid_size, return_d=True)
        d_formula = laminate_for_gradient(params, t).d if params.lam <= t <= upper else (0.0 if t < params.lam else 1.0)
        rows.append((float(t), W_density(params, t), W_relaxed(params, t), oracle, d_formula, d_opt))
    return ("t", "W", "W_relaxed", "W_lamination_oracle", "d", "d_oracle"), rows


def homogenize_table(spec: dict, params):
    """Effective tensors for the microstructures listed in ``spec``.

    ``spec = {"n": 64, "cases": [{"type": "laminate", "d": 0.5, "orientation": "horizontal"},
    {"type": "checkerboard"}, {"type": "constant", "value": c}]}``; phases default to
    the configured alpha and beta.
    """
    n = int(spec.get("n", 64))
    pmesh = build_periodic_mesh(n)
    alpha = float(spec.get("alpha", params.alpha))
    beta = float(spec.get("beta", params.beta))
    cases = spec.get("cases") or [{"type": "laminate", "d": 0.5}, {"type": "checkerboard"}]
    rows = []
    for case in cases:
        kind = case.get("type")
        if kind == "laminate":
            d = float(case.get("d", 0.5))
            orient = case.get("orientation", "horizontal")
            coeff = cell_coefficients_laminate(pmesh, alpha, beta, d, orient)
            normal = (0.0, 1.0) if orient == "horizontal" else (1.0, 0.0)
            from .damage import MaterialParams

            ref = laminate_effective(MaterialParams(alpha, beta, 1.0), d, normal)
            label = f"laminate(d={d},{orient})"
        elif kind == "checkerboard":
            coeff = cell_coefficients_checkerboard(pmesh, alpha, beta)
            ref = math.sqrt(alpha * beta) * np.eye(2)
            label = "checkerboard"
        elif kind == "constant":
            c = float(case.get("value", beta))
            coeff = np.full(pmesh.n_triangles, c)
            ref = c * np.eye(2)
            label = f"constant({c})"
        else:
            raise ValueError(f"unknown microstructure {kind!r}")
        A = effective_tensor(pmesh, coeff)
        ev = np.linalg.eigvalsh(A)
        rows.append((label, n, A[0, 0], A[0, 1], A[1, 1], ev[0], ev[1], ref[0, 0], ref[0, 1], ref[1, 1]))
    header = ("case", "n", "A11", "A12", "A22", "eig_min", "eig_max", "ref_A11", "ref_A12", "ref_A22")
    return header, rows
