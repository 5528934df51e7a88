"""Implicit incremental scheme for elastodynamics with irreversible damage.

Each time step minimizes, over displacements ``u`` (zero on the boundary) and
damage sets ``D`` containing the damage at the start of the step,

    F(u, D) = 1/2 a_D(u, u) + k |D| - <f(t_next), u> + |u - w|^2 / (2 dt^2),

where ``a_D`` is the stiffness form with coefficient ``alpha`` on ``D`` and
``beta`` elsewhere, and ``w = 2 u_curr - u_prev`` is the inertial predictor.
The first step uses ``w = u0 + dt v0``; this is encoded by starting from the
virtual state ``(u0 - dt v0, u0)``.
"""

from __future__ import annotations

import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .damage import (
    DamageState,
    MaterialParams,
    coefficient_field,
    minimize_damage_given_u,
    repair_initial_damage,
    validate_initial_damage,
)
from .errors import InitialDamageError, OracleCapError, StepError
from .fem import DEFAULT_TOL, Mesh, SpdFactor, assemble_mass, assemble_stiffness, element_gradients
from .scenarios import ForcingTerm

log = logging.getLogger(__name__)

ORACLE_MAX_FREE = 20


@dataclass(frozen=True, eq=False)
class DynamicState:
    """Two consecutive displacements (full nodal vectors) and the current damage."""

    u_prev: np.ndarray
    u_curr: np.ndarray
    damage: DamageState
    step_index: int
    dt: float
    t: float

    @property
    def velocity(self) -> np.ndarray:
        return (self.u_curr - self.u_prev) / self.dt

    @property
    def predictor(self) -> np.ndarray:
        return 2.0 * self.u_curr - self.u_prev


@dataclass(frozen=True)
class StepReport:
    iterations: int
    energy: float
    # step functional after every half-step, starting with the first u-solve
    energies: tuple
    el_residual: float


@dataclass
class Trajectory:
    """States ``0..n``; entry 0 is the virtual start ``(u0 - dt v0, u0, D0)``."""

    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    v0: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def __len__(self):
        return len(self.states)


def dissipation(params: MaterialParams, volume: float) -> float:
    # with damage disabled D never changes, so k|D| is a dropped constant
    return params.k * volume if params.damage_enabled else 0.0


class DamageDynamics:
    """Time-stepping engine bound to a mesh, material and forcing."""

    def __init__(
        self,
        mesh: Mesh,
        params: MaterialParams,
        dt: float,
        forcing: ForcingTerm | None = None,
        tol: float = DEFAULT_TOL,
        method: str = "direct",
        max_iter: int | None = None,
        lumped_mass: bool = False,
        max_alternations: int = 50,
    ):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.mesh = mesh
        self.params = params
        self.dt = float(dt)
        self.forcing = forcing or ForcingTerm()
        self.tol = tol
        self.method = method
        self.max_iter = max_iter
        self.max_alternations = max_alternations
        self.M_full = assemble_mass(mesh, lumped=lumped_mass)
        self.M = mesh.restrict(self.M_full)
        self._stiff: OrderedDict = OrderedDict()
        self._factors: OrderedDict = OrderedDict()

    # -- linear algebra ---------------------------------------------------

    def stiffness(self, D: DamageState):
        """Full-node stiffness matrix for the coefficient field of ``D``."""
        key = D.key()
        K = self._stiff.get(key)
        if K is None:
            K = assemble_stiffness(self.mesh, coefficient_field(self.params, D))
            self._stiff[key] = K
            while len(self._stiff) > 8:
                self._stiff.popitem(last=False)
        else:
            self._stiff.move_to_end(key)
        return K

    def _system(self, D: DamageState):
        key = D.key()
        if key in self._factors:
            self._factors.move_to_end(key)
            return self._factors[key]
        K = self.mesh.restrict(self.stiffness(D))
        A = (K + self.M / self.dt**2).tocsr()
        entry = (K, A, SpdFactor(A, self.method, self.max_iter))
        self._factors[key] = entry
        while len(self._factors) > 4:
            self._factors.popitem(last=False)
        return entry

    def forcing_nodal(self, t: float) -> np.ndarray:
        return self.forcing.nodal(self.mesh, t)

    def pairing(self, f_nodal, u) -> float:
        """``<f, u>`` for nodal samples ``f`` and a P1 field ``u``."""
        return float(np.asarray(f_nodal) @ (self.M_full @ u))

    def _rhs(self, state: DynamicState, f_next) -> np.ndarray:
        free = self.mesh.free_dofs
        w = state.predictor[free]
        return self.M @ w / self.dt**2 + (self.M_full @ f_next)[free]

    def solve_displacement(self, state: DynamicState, D: DamageState, f_next) -> np.ndarray:
        """Minimizer over ``u`` for fixed ``D``: ``(K_D + M/dt^2) u = M w/dt^2 + M f``."""
        _, _, fac = self._system(D)
        x = fac.solve(self._rhs(state, f_next), self.tol)
        return self.mesh.expand(x)

    def el_residual(self, state: DynamicState, D: DamageState, u, f_next) -> float:
        """Relative residual of the discrete Euler-Lagrange equation on the free dofs."""
        _, A, _ = self._system(D)
        b = self._rhs(state, f_next)
        r = A @ u[self.mesh.free_dofs] - b
        return float(np.linalg.norm(r) / max(np.linalg.norm(b), 1e-300)) if np.any(b) else float(np.linalg.norm(r))

    # -- step functional --------------------------------------------------

    def step_functional(self, state: DynamicState, u, D: DamageState, f_next) -> float:
        K = self.stiffness(D)
        d = u - state.predictor
        return (
            0.5 * float(u @ (K @ u))
            + dissipation(self.params, D.volume)
            - self.pairing(f_next, u)
            + 0.5 * float(d @ (self.M_full @ d)) / self.dt**2
        )

    # -- steps ------------------------------------------------------------

    def start_state(self, u0, v0, D0: DamageState) -> DynamicState:
        u0 = np.asarray(u0, dtype=float)
        v0 = np.asarray(v0, dtype=float)
        return DynamicState(u0 - self.dt * v0, u0, D0, 0, self.dt, 0.0)

    def advance(self, state: DynamicState, t_next: float | None = None):
        """One alternating-minimization step; returns ``(new_state, report)``."""
        if t_next is None:
            t_next = state.t + self.dt
        f_next = self.forcing_nodal(t_next)
        D_entry = state.damage
        D = D_entry
        u = self.solve_displacement(state, D, f_next)
        energies = [self.step_functional(state, u, D, f_next)]
        seen = {D.key()}
        slack = 10.0 * self.tol

        def check_decrease(new):
            old = energies[-1]
            if new - old > slack * max(1.0, abs(old)):
                raise StepError(
                    f"step functional increased within the alternating loop ({old!r} -> {new!r})",
                    energies=(old, new),
                    step_index=state.step_index + 1,
                )
            energies.append(new)

        iterations = 0
        while True:
            iterations += 1
            D_new = minimize_damage_given_u(self.params, D_entry, element_gradients(self.mesh, u))
            check_decrease(self.step_functional(state, u, D_new, f_next))
            if D_new == D:
                break
            if D_new.key() in seen:
                raise StepError(
                    "alternating minimization entered a cycle of damage sets",
                    energies=energies[-2:],
                    step_index=state.step_index + 1,
                )
            if iterations >= self.max_alternations:
                raise StepError(
                    f"no fixed point after {self.max_alternations} alternations",
                    energies=energies[-2:],
                    step_index=state.step_index + 1,
                )
            seen.add(D_new.key())
            D = D_new
            u = self.solve_displacement(state, D, f_next)
            check_decrease(self.step_functional(state, u, D, f_next))

        new_state = DynamicState(state.u_curr, u, D, state.step_index + 1, self.dt, t_next)
        report = StepReport(
            iterations=iterations,
            energy=energies[-1],
            energies=tuple(energies),
            el_residual=self.el_residual(state, D, u, f_next),
        )
        return new_state, report

    def incremental_step(self, state: DynamicState, t_next: float | None = None) -> DynamicState:
        return self.advance(state, t_next)[0]

    def initial_step(self, u0, v0, D0: DamageState, auto_repair: bool = False) -> DynamicState:
        """First step from ``(u0, v0, D0)``; the result holds ``(u0, u1)``."""
        grads = element_gradients(self.mesh, u0)
        report = validate_initial_damage(self.params, D0, grads)
        if not report.ok:
            if not auto_repair:
                raise InitialDamageError(report.offending, report.lam)
            D0 = repair_initial_damage(self.params, D0, grads)
        return self.incremental_step(self.start_state(u0, v0, D0))

    def brute_force_step(self, state: DynamicState, t_next: float | None = None):
        """Exact minimizer of the step functional over every superset of the entry damage.

        Returns ``(u, D, energy)``.  Ties (relative 1e-12) go to the smaller damaged
        volume, then to the lexicographically smallest flag vector.
        """
        if t_next is None:
            t_next = state.t + self.dt
        f_next = self.forcing_nodal(t_next)
        D_entry = state.damage
        free = np.flatnonzero(~D_entry.damaged)
        if free.size > ORACLE_MAX_FREE:
            raise OracleCapError(
                f"{free.size} undamaged triangles; exhaustive search is capped at {ORACLE_MAX_FREE}"
            )
        best = None
        for bits in itertools.product((False, True), repeat=free.size):
            mask = np.zeros(len(D_entry), dtype=bool)
            mask[free[np.array(bits, dtype=bool)]] = True
            D = D_entry.union(mask)
            u = self.solve_displacement(state, D, f_next)
            e = self.step_functional(state, u, D, f_next)
            cand = (e, D.volume, tuple(D.damaged.tolist()), u, D)
            if best is None or _better(cand, best):
                best = cand
        # the factor cache is useless after an enumeration
        self._factors.clear()
        self._stiff.clear()
        return best[3], best[4], best[0]


def _better(a, b) -> bool:
    ea, eb = a[0], b[0]
    if abs(ea - eb) > 1e-12 * max(1.0, abs(ea), abs(eb)):
        return ea < eb
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2]


def run_dynamics(config, progress=None, problem=None) -> Trajectory:
    """Run the scheme described by a :class:`~damagedyn.config.Config`.

    ``problem`` may pass a prebuilt ``(scheme, u0, v0, D0)`` from
    :func:`~damagedyn.config.build_problem`.  On a step failure the raised
    :class:`StepError` (or solver error) carries the partial trajectory as
    ``.trajectory``.
    """
    if problem is None:
        from .config import build_problem

        problem = build_problem(config)
    scheme, u0, v0, D0 = problem
    traj = Trajectory(v0=v0)
    state = scheme.start_state(u0, v0, D0)
    traj.states.append(state)
    for i in range(config.steps):
        try:
            state, report = scheme.advance(state, (i + 1) * scheme.dt)
        except Exception as exc:
            exc.trajectory = traj
            raise
        traj.states.append(state)
        traj.reports.append(report)
        if progress is not None:
            progress(i + 1, state, report)
    return traj
