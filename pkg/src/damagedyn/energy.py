"""Energy bookkeeping and discrete energy audits for a trajectory.

Ledger row ``j`` describes time ``t_j`` with displacement ``u_j``, velocity
``(u_j - u_{j-1}) / dt`` (``v0`` for ``j = 0``) and damage ``D_j``.

The inequality slack compares the mechanical energy
``kinetic + elastic + dissipated`` against a reference at ``0+`` and the
cumulative work ``sum_{i<j} <f(t_{i+1}), u_{i+1} - u_i>``.  The reference uses
``(u0, v0, D1)``: damage from the first step, initial velocity.  With this
reference the summed one-step identity makes the slack a sum of non-positive
terms plus, for damage added after the first step, the mismatch
``k |D_{j+1} \\ D_j| - (beta - alpha)/2 int_{D_{j+1} \\ D_j} |grad u_j|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .damage import DamageState, threshold_audit
from .dynamics import DamageDynamics, DynamicState, Trajectory, dissipation
from .fem import gradient_norms


@dataclass(frozen=True)
class LedgerRow:
    step: int
    t: float
    kinetic: float
    elastic: float
    dissipated: float
    work_cum: float
    total: float
    identity_residual: float
    inequality_slack: float
    damage_fraction: float
    max_grad_undamaged: float

    FIELDS = (
        "step",
        "t",
        "kinetic",
        "elastic",
        "dissipated",
        "work_cum",
        "total",
        "identity_residual",
        "inequality_slack",
        "damage_fraction",
        "max_grad_undamaged",
    )

    def as_tuple(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


def _a(scheme: DamageDynamics, D: DamageState, u, w=None) -> float:
    K = scheme.stiffness(D)
    w = u if w is None else w
    return float(u @ (K @ w))


def _m(scheme: DamageDynamics, u, w=None) -> float:
    w = u if w is None else w
    return float(u @ (scheme.M_full @ w))


def energy_parts(scheme: DamageDynamics, u, v, D: DamageState):
    """``(kinetic, elastic, dissipated)`` for displacement ``u``, velocity ``v``, damage ``D``."""
    return 0.5 * _m(scheme, v), 0.5 * _a(scheme, D, u), dissipation(scheme.params, D.volume)


def total_energy(scheme: DamageDynamics, t: float, u, v, D: DamageState) -> float:
    kin, el, dis = energy_parts(scheme, u, v, D)
    return kin + el + dis - scheme.pairing(scheme.forcing_nodal(t), u)


def step_identity_terms(scheme: DamageDynamics, prev: DynamicState, nxt: DynamicState, f_next):
    """Both sides of the one-step energy identity, all stiffness terms using ``nxt.damage``."""
    dt = scheme.dt
    D = nxt.damage
    u0, u1, u2 = prev.u_prev, prev.u_curr, nxt.u_curr
    v_old = (u1 - u0) / dt
    v_new = (u2 - u1) / dt
    du = u2 - u1
    lhs = _m(scheme, v_new) + _m(scheme, v_new - v_old) + _a(scheme, D, u2) + _a(scheme, D, du)
    rhs = 2.0 * scheme.pairing(f_next, du) + _a(scheme, D, u1) + _m(scheme, v_old)
    return lhs, rhs


def step_identity_residual(scheme: DamageDynamics, prev: DynamicState, nxt: DynamicState, f_next=None) -> float:
    """``|LHS - RHS| / max(|LHS|, |RHS|, 1)`` of the one-step energy identity."""
    if f_next is None:
        f_next = scheme.forcing_nodal(nxt.t)
    lhs, rhs = step_identity_terms(scheme, prev, nxt, f_next)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)


def build_ledger(scheme: DamageDynamics, traj: Trajectory) -> list:
    states = traj.states
    area = scheme.mesh.measure
    rows = []
    work_cum = 0.0
    mech_ref = None
    if len(states) > 1:
        s0, s1 = states[0], states[1]
        v0 = traj.v0 if traj.v0 is not None else s0.velocity
        mech_ref = sum(energy_parts(scheme, s0.u_curr, v0, s1.damage))
    for j, s in enumerate(states):
        u = s.u_curr
        v = traj.v0 if (j == 0 and traj.v0 is not None) else s.velocity
        kin, el, dis = energy_parts(scheme, u, v, s.damage)
        f_t = scheme.forcing_nodal(s.t)
        if j == 0:
            ident = 0.0
            slack = 0.0
        else:
            prev = states[j - 1]
            work_cum += scheme.pairing(f_t, u - prev.u_curr)
            ident = step_identity_residual(scheme, prev, s, f_t)
            slack = kin + el + dis - mech_ref - work_cum
        norms = gradient_norms(scheme.mesh, u)
        undamaged = ~s.damage.damaged
        gmax = float(norms[undamaged].max()) if undamaged.any() else 0.0
        rows.append(
            LedgerRow(
                step=j,
                t=s.t,
                kinetic=kin,
                elastic=el,
                dissipated=dis,
                work_cum=work_cum,
                total=kin + el + dis - scheme.pairing(f_t, u),
                identity_residual=ident,
                inequality_slack=slack,
                damage_fraction=s.damage.volume / area,
                max_grad_undamaged=gmax,
            )
        )
    return rows


@dataclass(frozen=True)
class InequalityAudit:
    slack: tuple
    max_slack: float
    scale: float
    tolerance: float
    passed: bool
    # discrete counterpart of int_0^t <df/dt, u> minus its trapezoid quadrature
    work_quadrature_gap: tuple


def audit_inequality(scheme: DamageDynamics, traj: Trajectory, ledger=None, rtol: float | None = None) -> InequalityAudit:
    """Check ``slack(t_j) <= rtol * max(1, |E_tot(0)|)`` for every ``j``.

    ``rtol`` defaults to ten times the solver tolerance.
    """
    if ledger is None:
        ledger = build_ledger(scheme, traj)
    if rtol is None:
        rtol = 10.0 * scheme.tol
    slack = tuple(r.inequality_slack for r in ledger)
    scale = max(1.0, abs(ledger[0].total)) if ledger else 1.0
    tol = rtol * scale
    max_slack = max(slack) if slack else 0.0

    gaps = []
    quad = 0.0
    states = traj.states
    fd = scheme.forcing
    prev_val = None
    for j, (s, row) in enumerate(zip(states, ledger)):
        val = scheme.pairing(fd.nodal_dt(scheme.mesh, s.t), s.u_curr)
        if j > 0:
            quad += 0.5 * scheme.dt * (prev_val + val)
        prev_val = val
        f_t = scheme.forcing_nodal(s.t)
        discrete = scheme.pairing(f_t, s.u_curr) - scheme.pairing(scheme.forcing_nodal(0.0), states[0].u_curr) - row.work_cum
        gaps.append(discrete - quad)
    return InequalityAudit(slack, max_slack, scale, tol, bool(max_slack <= tol), tuple(gaps))


@dataclass(frozen=True)
class ThresholdRow:
    step: int
    t: float
    delta: float
    area_above_lambda_plus_delta: float
    area_above_M: float


def threshold_series(scheme: DamageDynamics, traj: Trajectory, deltas) -> list:
    rows = []
    for s in traj.states:
        norms = gradient_norms(scheme.mesh, s.u_curr)
        audit = threshold_audit(scheme.params, s.damage, norms, deltas)
        for d, a in zip(audit.deltas, audit.area_above_lambda):
            rows.append(ThresholdRow(s.step_index, s.t, d, a, audit.area_above_M))
        if not audit.deltas:
            rows.append(ThresholdRow(s.step_index, s.t, math.nan, math.nan, audit.area_above_M))
    return rows


@dataclass(frozen=True)
class TrajectoryAudit:
    identity_max: float
    identity_passed: bool
    inequality: InequalityAudit
    nested_violations: int
    threshold_M_violations: int
    dissipation_monotone: bool

    @property
    def passed(self) -> bool:
        return (
            self.identity_passed
            and self.inequality.passed
            and self.nested_violations == 0
            and self.threshold_M_violations == 0
            and self.dissipation_monotone
        )


def audit_trajectory(scheme: DamageDynamics, traj: Trajectory, ledger=None, rtol: float | None = None) -> TrajectoryAudit:
    """All per-trajectory checks: identity, inequality, irreversibility, M-threshold."""
    if ledger is None:
        ledger = build_ledger(scheme, traj)
    if rtol is None:
        rtol = 10.0 * scheme.tol
    ident = max((r.identity_residual for r in ledger[1:]), default=0.0)
    ineq = audit_inequality(scheme, traj, ledger, rtol)
    nested = sum(
        not b.damage.contains(a.damage) for a, b in zip(traj.states[:-1], traj.states[1:])
    )
    over_M = 0
    if scheme.params.damage_enabled:
        for s in traj.states[1:]:
            norms = gradient_norms(scheme.mesh, s.u_curr)
            over_M += int(np.count_nonzero((norms > scheme.params.M) & ~s.damage.damaged))
    dis = [r.dissipated for r in ledger]
    monotone = all(b >= a for a, b in zip(dis[:-1], dis[1:]))
    return TrajectoryAudit(ident, ident <= rtol, ineq, nested, over_M, monotone)
