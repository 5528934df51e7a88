"""Two-phase brittle damage: material constants, coefficient field, damage update."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaterialParams:
    """Weak stiffness ``alpha``, strong stiffness ``beta``, damage cost ``k``.

    ``k = math.inf`` disables damage entirely.
    """

    alpha: float
    beta: float
    k: float

    def __post_init__(self):
        for name in ("alpha", "beta", "k"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or math.isnan(v):
                raise ConfigError(f"must be a real number, got {v!r}", f"material.{name}")
        if not (0 < self.alpha < self.beta):
            raise ConfigError(
                f"ordering constraint 0 < alpha < beta violated (alpha={self.alpha}, beta={self.beta})",
                "material",
            )
        if not math.isfinite(self.beta):
            raise ConfigError("beta must be finite", "material.beta")
        if not self.k > 0:
            raise ConfigError(f"k must be positive, got {self.k}", "material.k")

    @property
    def damage_enabled(self) -> bool:
        return math.isfinite(self.k)

    @property
    def M(self) -> float:
        """Gradient level above which damaging lowers the unrelaxed energy."""
        return math.sqrt(2.0 * self.k / (self.beta - self.alpha))

    @property
    def lam(self) -> float:
        """Threshold of the relaxed problem; equals ``M * sqrt(alpha / beta)``."""
        return math.sqrt(2.0 * self.alpha * self.k / (self.beta * (self.beta - self.alpha)))

    def scaled(self, c: float) -> "MaterialParams":
        return MaterialParams(c * self.alpha, c * self.beta, c * self.k)


@dataclass(frozen=True, eq=False)
class DamageState:
    """Per-triangle damage flags and the damaged area."""

    damaged: np.ndarray
    areas: np.ndarray
    volume: float

    @classmethod
    def from_flags(cls, damaged, areas) -> "DamageState":
        damaged = np.array(damaged, dtype=bool)
        areas = np.asarray(areas, dtype=float)
        if damaged.shape != areas.shape:
            raise ValueError(f"flag array shape {damaged.shape} does not match areas {areas.shape}")
        damaged.setflags(write=False)
        return cls(damaged, areas, float(areas[damaged].sum()))

    @classmethod
    def empty(cls, areas) -> "DamageState":
        return cls.from_flags(np.zeros(len(areas), dtype=bool), areas)

    @classmethod
    def full(cls, areas) -> "DamageState":
        return cls.from_flags(np.ones(len(areas), dtype=bool), areas)

    def __len__(self):
        return self.damaged.size

    def __eq__(self, other):
        if not isinstance(other, DamageState):
            return NotImplemented
        return np.array_equal(self.damaged, other.damaged)

    def __hash__(self):
        return hash(self.key())

    def key(self) -> bytes:
        return np.packbits(self.damaged).tobytes()

    def contains(self, other: "DamageState") -> bool:
        """Flag-wise ``self ⊇ other``."""
        return bool(np.all(self.damaged | ~other.damaged))

    def union(self, mask) -> "DamageState":
        return DamageState.from_flags(self.damaged | np.asarray(mask, dtype=bool), self.areas)

    def check(self, rtol: float = 1e-12) -> bool:
        fresh = float(self.areas[self.damaged].sum())
        return abs(fresh - self.volume) <= rtol * max(1.0, abs(fresh))


def coefficient_field(params: MaterialParams, D: DamageState) -> np.ndarray:
    return np.where(D.damaged, float(params.alpha), float(params.beta))


def _norms(grads) -> np.ndarray:
    g = np.asarray(grads, dtype=float)
    if g.ndim == 2:
        return np.hypot(g[:, 0], g[:, 1])
    return np.abs(g)


def minimize_damage_given_u(params: MaterialParams, D_prev: DamageState, grads) -> DamageState:
    """Exact minimizer over ``D ⊇ D_prev`` for a fixed displacement.

    ``grads`` may be per-triangle gradient vectors or their magnitudes.  A
    triangle is added when ``|grad u| > M``; ties stay undamaged.
    """
    if not params.damage_enabled:
        return D_prev
    norms = _norms(grads)
    if norms.shape != D_prev.damaged.shape:
        raise ValueError("one gradient per triangle expected")
    new = norms > params.M
    if not np.any(new & ~D_prev.damaged):
        return D_prev
    return D_prev.union(new)


@dataclass(frozen=True)
class InitialDamageReport:
    ok: bool
    lam: float
    offending: tuple


def validate_initial_damage(params: MaterialParams, D0: DamageState, grads) -> InitialDamageReport:
    """Check ``D0 ⊇ {|grad u0| >= lambda}`` (non-strict)."""
    norms = _norms(grads)
    if not params.damage_enabled:
        return InitialDamageReport(True, math.inf, ())
    bad = np.flatnonzero((norms >= params.lam) & ~D0.damaged)
    return InitialDamageReport(bad.size == 0, params.lam, tuple(int(i) for i in bad))


def repair_initial_damage(params: MaterialParams, D0: DamageState, grads, level=logging.WARNING) -> DamageState:
    """Smallest superset of ``D0`` satisfying the initial threshold condition."""
    report = validate_initial_damage(params, D0, grads)
    if report.ok:
        return D0
    log.log(
        level,
        "initial damage repaired: added %d element(s) with |grad u0| >= lambda=%.6g",
        len(report.offending),
        report.lam,
    )
    mask = np.zeros(len(D0), dtype=bool)
    mask[list(report.offending)] = True
    return D0.union(mask)


@dataclass(frozen=True)
class ThresholdAudit:
    deltas: tuple
    # area of undamaged triangles with |grad u| > lambda + delta, one per delta
    area_above_lambda: tuple
    area_above_M: float
    max_grad_undamaged: float


def threshold_audit(params: MaterialParams, D: DamageState, grads, deltas=()) -> ThresholdAudit:
    norms = _norms(grads)
    undamaged = ~D.damaged
    areas = D.areas
    above = []
    for delta in deltas:
        if delta < 0:
            raise ValueError(f"deltas must be non-negative, got {delta}")
        above.append(float(areas[undamaged & (norms > params.lam + delta)].sum()))
    area_M = float(areas[undamaged & (norms > params.M)].sum())
    gmax = float(norms[undamaged].max()) if undamaged.any() else 0.0
    return ThresholdAudit(tuple(float(d) for d in deltas), tuple(above), area_M, gmax)
