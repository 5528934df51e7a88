import math

import numpy as np
import pytest

from damagedyn.config import build_problem, config_from_dict
from damagedyn.damage import DamageState, MaterialParams
from damagedyn.dynamics import DamageDynamics, DynamicState, Trajectory, run_dynamics
from damagedyn.energy import (
    audit_inequality,
    audit_trajectory,
    build_ledger,
    energy_parts,
    step_identity_residual,
    threshold_series,
    total_energy,
)
from damagedyn.fem import build_mesh, gradient_norms
from damagedyn.scenarios import ForcingTerm

P = MaterialParams(1.0, 2.0, 1.0)


def _hat_scheme():
    mesh = build_mesh(2, 2)
    return mesh, DamageDynamics(mesh, P, 0.1)


def test_total_energy_zero_state():
    mesh, scheme = _hat_scheme()
    z = np.zeros(mesh.n_nodes)
    assert total_energy(scheme, 0.0, z, z, DamageState.empty(mesh.areas)) == 0.0


def test_kinetic_energy_of_interior_velocity():
    mesh, scheme = _hat_scheme()
    v = np.zeros(mesh.n_nodes)
    v[4] = 3.0
    kin, el, dis = energy_parts(scheme, np.zeros(mesh.n_nodes), v, DamageState.empty(mesh.areas))
    # interior mass of the single hat is 1/8
    assert kin == pytest.approx(0.5 * 9.0 / 8.0, rel=1e-14)
    assert el == 0.0 and dis == 0.0


def test_total_energy_arithmetic_example():
    # damage the two triangles away from the interior node (|D| = 0.25), so the
    # elastic form of the hat is 4 * beta = 8; choose c with 8 c^2 = 0.8
    mesh, scheme = _hat_scheme()
    away = np.array([4 not in tri for tri in mesh.triangles])
    D = DamageState.from_flags(away, mesh.areas)
    assert D.volume == pytest.approx(0.25)
    u = np.zeros(mesh.n_nodes)
    u[4] = math.sqrt(0.1)
    e = total_energy(scheme, 0.0, u, np.zeros_like(u), D)
    assert e == pytest.approx(0.4 + 0.25, rel=1e-13)


def _wave_run(nx=12, steps=20, v_amp=0.0, u_amp=1.0, k=math.inf, forcing=None):
    doc = {
        "material": {"alpha": 1.0, "beta": 2.0, "k": "inf" if math.isinf(k) else k},
        "mesh": {"nx": nx},
        "time": {"T": 0.5, "steps": steps},
        "initial": {
            "u0": {"type": "sines", "amplitude": u_amp} if u_amp else {"type": "zero"},
            "v0": {"type": "sines", "amplitude": v_amp} if v_amp else {"type": "zero"},
        },
    }
    if forcing:
        doc["forcing"] = forcing
    cfg = config_from_dict(doc)
    problem = build_problem(cfg)
    return problem[0], run_dynamics(cfg, problem=problem)


def test_identity_residual_zero_trajectory():
    mesh, scheme = _hat_scheme()
    z = np.zeros(mesh.n_nodes)
    D = DamageState.empty(mesh.areas)
    a = DynamicState(z, z, D, 0, 0.1, 0.0)
    b = DynamicState(z, z, D, 1, 0.1, 0.1)
    assert step_identity_residual(scheme, a, b) == 0.0


def test_identity_residual_small_and_sensitive():
    scheme, traj = _wave_run(v_amp=2.0)
    res = [step_identity_residual(scheme, a, b) for a, b in zip(traj.states, traj.states[1:])]
    assert max(res) <= 1e-8
    # perturbation probe: add a 1e-3 bump to one accepted state
    a, b = traj.states[4], traj.states[5]
    bump = 1e-3 * scheme.mesh.interpolate_h10(lambda x, y: np.exp(-((x - 0.3) ** 2 + (y - 0.6) ** 2) / 0.02))
    bad = DynamicState(b.u_prev, b.u_curr + bump, b.damage, b.step_index, b.dt, b.t)
    assert step_identity_residual(scheme, a, bad) > 1e-5


def test_ledger_shape_and_row_zero():
    scheme, traj = _wave_run(steps=5)
    ledger = build_ledger(scheme, traj)
    assert len(ledger) == 6
    assert ledger[0].step == 0 and ledger[0].t == 0.0
    assert ledger[0].identity_residual == 0.0 and ledger[0].inequality_slack == 0.0
    assert all(r.kinetic >= 0 and r.elastic >= 0 and r.dissipated >= 0 for r in ledger)
    assert ledger[-1].t == pytest.approx(0.5)


def test_free_wave_energy_non_increasing_and_slack_nonpositive():
    scheme, traj = _wave_run(v_amp=3.0)
    ledger = build_ledger(scheme, traj)
    tot = [r.kinetic + r.elastic for r in ledger[1:]]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(tot, tot[1:]))
    audit = audit_inequality(scheme, traj, ledger)
    assert audit.passed
    assert max(audit.slack) <= 1e-12 * audit.scale


def test_zero_data_slack_identically_zero():
    scheme, traj = _wave_run(u_amp=0.0)
    audit = audit_inequality(scheme, traj)
    assert all(s == 0.0 for s in audit.slack)


def test_slack_decomposition_with_damage_events():
    # summing the one-step identity (stiffness of D_{j+1}) gives, for j >= 1,
    #   slack_{j+1} - slack_j = -(|v_{j+1} - v_j|^2 + a_{D_{j+1}}(u_{j+1} - u_j)) / 2
    #                           + k |D_{j+1} minus D_j| - (beta - alpha)/2 int_{D_{j+1} minus D_j} |grad u_j|^2
    scheme, traj = _wave_run(u_amp=0.0, v_amp=20.0, k=0.05)
    assert traj.states[-1].damage.volume > 0
    ledger = build_ledger(scheme, traj)
    p, dt, areas = scheme.params, scheme.dt, scheme.mesh.areas
    predicted = ledger[1].inequality_slack
    for j in range(1, len(traj.states) - 1):
        a, b = traj.states[j], traj.states[j + 1]
        dv = (b.u_curr - b.u_prev) / dt - (a.u_curr - a.u_prev) / dt
        du = b.u_curr - a.u_curr
        K = scheme.stiffness(b.damage)
        predicted -= 0.5 * (dv @ (scheme.M_full @ dv)) + 0.5 * (du @ (K @ du))
        new = b.damage.damaged & ~a.damage.damaged
        g = gradient_norms(scheme.mesh, a.u_curr)
        term = p.k * areas[new].sum() - 0.5 * (p.beta - p.alpha) * (areas[new] * g[new] ** 2).sum()
        predicted += term
        assert ledger[j + 1].inequality_slack == pytest.approx(predicted, rel=1e-9, abs=1e-9)
    audit = audit_trajectory(scheme, traj, ledger)
    assert audit.passed
    assert audit.nested_violations == 0 and audit.threshold_M_violations == 0 and audit.dissipation_monotone


def test_initial_velocity_reference():
    # the slack uses (u0, v0, D1) as reference; with the discrete first-step
    # velocity instead, the first-step numerical dissipation would show up as
    # a positive slack whenever v0 != 0
    scheme, traj = _wave_run(u_amp=0.0, v_amp=5.0)
    ledger = build_ledger(scheme, traj)
    assert ledger[1].inequality_slack <= 0
    s0, s1 = traj.states[0], traj.states[1]
    alt_ref = sum(energy_parts(scheme, s0.u_curr, s1.velocity, s1.damage))
    mech1 = ledger[1].kinetic + ledger[1].elastic + ledger[1].dissipated
    assert mech1 - alt_ref - ledger[1].work_cum > 0


def test_forced_run_and_work_quadrature_gap():
    forcing = {"type": "separable", "amplitude": 5.0, "time": "sin", "omega": 4.0}
    gaps = []
    for steps in (20, 40):
        scheme, traj = _wave_run(steps=steps, forcing=forcing)
        audit = audit_inequality(scheme, traj)
        assert audit.passed
        gaps.append(abs(audit.work_quadrature_gap[-1]))
    # endpoint sampling vs trapezoid: first-order agreement
    assert gaps[1] < gaps[0]


def test_threshold_series_rows():
    scheme, traj = _wave_run(steps=3)
    rows = threshold_series(scheme, traj, (0.0, 0.1))
    assert len(rows) == 4 * 2
    assert [r.step for r in rows[:4]] == [0, 0, 1, 1]
    empty = threshold_series(scheme, traj, ())
    assert len(empty) == 4 and math.isnan(empty[0].delta)


def test_trajectory_audit_detects_injected_violation():
    mesh = build_mesh(3, 3)
    scheme = DamageDynamics(mesh, P, 0.1, forcing=ForcingTerm("separable", amplitude=0.0))
    z = np.zeros(mesh.n_nodes)
    D1 = DamageState.from_flags(np.arange(mesh.n_triangles) == 0, mesh.areas)
    D2 = DamageState.empty(mesh.areas)
    traj = Trajectory(v0=z)
    traj.states += [
        DynamicState(z, z, DamageState.empty(mesh.areas), 0, 0.1, 0.0),
        DynamicState(z, z, D1, 1, 0.1, 0.1),
        DynamicState(z, z, D2, 2, 0.1, 0.2),
    ]
    audit = audit_trajectory(scheme, traj)
    assert audit.nested_violations == 1
    assert not audit.dissipation_monotone
    assert not audit.passed
