"""Closed catalog of initial fields and separable forcing terms.

Everything here is a plain description (a dict-backed dataclass) that can be
sampled on a mesh; configs round-trip through :meth:`to_dict`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

FIELD_KINDS = ("zero", "sines", "gaussian", "pyramid")
TIME_KINDS = ("const", "sin", "ramp")
SPACE_KINDS = ("const", "sines", "gaussian")


def _num(d, key, default, path):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", f"{path}.{key}")
    return float(v)


def _pair(d, key, default, path):
    v = d.get(key, default)
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"expected a pair of numbers, got {v!r}", f"{path}.{key}")
    return (float(v[0]), float(v[1]))


@dataclass(frozen=True)
class FieldSpec:
    """A spatial profile.

    * ``zero``
    * ``sines``: ``amplitude * sin(mx pi x / Lx) * sin(my pi y / Ly)``
    * ``gaussian``: ``amplitude * exp(-|x - center|^2 / (2 width^2))``
    * ``pyramid``: ``slope * max(0, min(x - x0, x1 - x, y - y0, y1 - y))`` on ``rect``;
      piecewise affine with gradient magnitude ``slope`` on each facet
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d, path="field") -> "FieldSpec":
        if d is None:
            return cls()
        if not isinstance(d, dict):
            raise ConfigError(f"expected an object, got {d!r}", path)
        kind = d.get("type", "zero")
        if kind not in FIELD_KINDS:
            raise ConfigError(f"unknown field type {kind!r}; expected one of {FIELD_KINDS}", f"{path}.type")
        p = {}
        if kind == "sines":
            p["amplitude"] = _num(d, "amplitude", 1.0, path)
            p["mx"] = int(_num(d, "mx", 1, path))
            p["my"] = int(_num(d, "my", 1, path))
        elif kind == "gaussian":
            p["amplitude"] = _num(d, "amplitude", 1.0, path)
            p["center"] = _pair(d, "center", (0.5, 0.5), path)
            p["width"] = _num(d, "width", 0.1, path)
            if p["width"] <= 0:
                raise ConfigError("width must be positive", f"{path}.width")
        elif kind == "pyramid":
            p["slope"] = _num(d, "slope", 1.0, path)
            rect = d.get("rect", [0.25, 0.25, 0.75, 0.75])
            if not (isinstance(rect, (list, tuple)) and len(rect) == 4):
                raise ConfigError("rect must be [x0, y0, x1, y1]", f"{path}.rect")
            p["rect"] = tuple(float(r) for r in rect)
        return cls(kind, p)

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        for key, v in self.params.items():
            out[key] = list(v) if isinstance(v, tuple) else v
        return out

    def evaluate(self, x, y, Lx=1.0, Ly=1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "zero":
            return np.zeros(np.broadcast(x, y).shape)
        if self.kind == "sines":
            return p["amplitude"] * np.sin(p["mx"] * math.pi * x / Lx) * np.sin(p["my"] * math.pi * y / Ly)
        if self.kind == "gaussian":
            cx, cy = p["center"]
            r2 = (x - cx) ** 2 + (y - cy) ** 2
            return p["amplitude"] * np.exp(-r2 / (2.0 * p["width"] ** 2))
        x0, y0, x1, y1 = p["rect"]
        dist = np.minimum(np.minimum(x - x0, x1 - x), np.minimum(y - y0, y1 - y))
        return p["slope"] * np.maximum(dist, 0.0)

    def sample(self, mesh) -> np.ndarray:
        """Nodal interpolant, zeroed on the Dirichlet boundary."""
        return mesh.interpolate_h10(lambda x, y: self.evaluate(x, y, mesh.Lx, mesh.Ly))


@dataclass(frozen=True)
class ForcingTerm:
    """``f(t, x) = g(t) * h(x)``, or identically zero.

    Time factors: ``const`` (1), ``sin`` (``sin(omega t)``), ``ramp``
    (``min(t / t_ramp, 1)``).  Space factors: ``const``, ``sines``, ``gaussian``
    (see :class:`FieldSpec`), scaled by ``amplitude``.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    time: str = "const"
    omega: float = 1.0
    t_ramp: float = 1.0
    space: FieldSpec = field(default_factory=lambda: FieldSpec("const"))

    @classmethod
    def from_dict(cls, d, path="forcing") -> "ForcingTerm":
        if d is None:
            return cls()
        if not isinstance(d, dict):
            raise ConfigError(f"expected an object, got {d!r}", path)
        kind = d.get("type", "zero")
        if kind == "zero":
            return cls()
        if kind != "separable":
            raise ConfigError(f"unknown forcing type {kind!r}; expected 'zero' or 'separable'", f"{path}.type")
        tk = d.get("time", "const")
        if tk not in TIME_KINDS:
            raise ConfigError(f"unknown time factor {tk!r}; expected one of {TIME_KINDS}", f"{path}.time")
        space = d.get("space", {"type": "const"})
        sk = space.get("type", "const") if isinstance(space, dict) else None
        if sk not in SPACE_KINDS:
            raise ConfigError(f"unknown space factor {sk!r}; expected one of {SPACE_KINDS}", f"{path}.space.type")
        sspec = FieldSpec("const") if sk == "const" else FieldSpec.from_dict(space, f"{path}.space")
        t_ramp = _num(d, "t_ramp", 1.0, path)
        if t_ramp <= 0:
            raise ConfigError("t_ramp must be positive", f"{path}.t_ramp")
        return cls(
            "separable",
            amplitude=_num(d, "amplitude", 1.0, path),
            time=tk,
            omega=_num(d, "omega", 1.0, path),
            t_ramp=t_ramp,
            space=sspec,
        )

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"type": "zero"}
        return {
            "type": "separable",
            "amplitude": self.amplitude,
            "time": self.time,
            "omega": self.omega,
            "t_ramp": self.t_ramp,
            "space": self.space.to_dict(),
        }

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    # analytic time derivative exists for the whole catalog (ramp: a.e.)
    has_time_derivative = True

    def time_factor(self, t: float) -> float:
        if self.time == "const":
            return 1.0
        if self.time == "sin":
            return math.sin(self.omega * t)
        return min(t / self.t_ramp, 1.0)

    def time_derivative(self, t: float) -> float:
        if self.time == "const":
            return 0.0
        if self.time == "sin":
            return self.omega * math.cos(self.omega * t)
        return 1.0 / self.t_ramp if t < self.t_ramp else 0.0

    def spatial(self, mesh) -> np.ndarray:
        """Nodal samples of ``amplitude * h(x)`` (not zeroed on the boundary)."""
        if self.is_zero:
            return np.zeros(mesh.n_nodes)
        if self.space.kind == "const":
            return np.full(mesh.n_nodes, self.amplitude)
        return self.amplitude * mesh.interpolate(lambda x, y: self.space.evaluate(x, y, mesh.Lx, mesh.Ly))

    def nodal(self, mesh, t: float) -> np.ndarray:
        if self.is_zero:
            return np.zeros(mesh.n_nodes)
        return self.time_factor(t) * self.spatial(mesh)

    def nodal_dt(self, mesh, t: float) -> np.ndarray:
        if self.is_zero:
            return np.zeros(mesh.n_nodes)
        return self.time_derivative(t) * self.spatial(mesh)


@dataclass(frozen=True)
class DamageSpec:
    """Initial damage: ``empty``, ``rectangles`` (centroid inside any rect), or ``elements``."""

    kind: str = "empty"
    rects: tuple = ()
    elements: tuple = ()

    @classmethod
    def from_dict(cls, d, path="initial.D0") -> "DamageSpec":
        if d is None:
            return cls()
        if not isinstance(d, dict):
            raise ConfigError(f"expected an object, got {d!r}", path)
        kind = d.get("type", "empty")
        if kind == "empty":
            return cls()
        if kind == "rectangles":
            rects = d.get("rects", [])
            if not all(isinstance(r, (list, tuple)) and len(r) == 4 for r in rects):
                raise ConfigError("each rectangle must be [x0, y0, x1, y1]", f"{path}.rects")
            return cls("rectangles", rects=tuple(tuple(float(v) for v in r) for r in rects))
        if kind == "elements":
            els = d.get("elements", [])
            if not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in els):
                raise ConfigError("elements must be non-negative integers", f"{path}.elements")
            return cls("elements", elements=tuple(els))
        raise ConfigError(f"unknown damage type {kind!r}", f"{path}.type")

    def to_dict(self) -> dict:
        if self.kind == "rectangles":
            return {"type": "rectangles", "rects": [list(r) for r in self.rects]}
        if self.kind == "elements":
            return {"type": "elements", "elements": list(self.elements)}
        return {"type": "empty"}

    def flags(self, mesh) -> np.ndarray:
        out = np.zeros(mesh.n_triangles, dtype=bool)
        if self.kind == "rectangles":
            c = mesh.centroids
            for x0, y0, x1, y1 in self.rects:
                out |= (c[:, 0] >= x0) & (c[:, 0] <= x1) & (c[:, 1] >= y0) & (c[:, 1] <= y1)
        elif self.kind == "elements":
            idx = np.asarray(self.elements, dtype=np.int64)
            if idx.size and idx.max() >= mesh.n_triangles:
                raise ConfigError(
                    f"element index {int(idx.max())} out of range (mesh has {mesh.n_triangles})",
                    "initial.D0.elements",
                )
            out[idx] = True
        return out
