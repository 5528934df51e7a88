"""JSON run configuration: parsing, validation, serialization, problem setup.

Minimal document::

    {"material": {"alpha": 1, "beta": 2, "k": 0.5},
     "mesh": {"nx": 32, "ny": 32},
     "time": {"T": 1.0, "steps": 100}}

``k`` may be the string ``"inf"`` to disable damage.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace

from .damage import DamageState, MaterialParams, validate_initial_damage
from .errors import ConfigError, InitialDamageError
from .fem import DEFAULT_TOL, build_mesh, element_gradients
from .scenarios import DamageSpec, FieldSpec, ForcingTerm

TOP_LEVEL = {
    "material",
    "mesh",
    "time",
    "initial",
    "forcing",
    "solver",
    "outputs",
    "audit",
    "seed",
    "relaxation",
    "homogenize",
}


@dataclass(frozen=True)
class Config:
    material: MaterialParams
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0
    T: float = 1.0
    steps: int = 1
    u0: FieldSpec = field(default_factory=FieldSpec)
    v0: FieldSpec = field(default_factory=FieldSpec)
    D0: DamageSpec = field(default_factory=DamageSpec)
    auto_repair: bool = False
    forcing: ForcingTerm = field(default_factory=ForcingTerm)
    tol: float = DEFAULT_TOL
    max_iter: int | None = None
    method: str = "direct"
    lumped_mass: bool = False
    max_alternations: int = 50
    directory: str = "out"
    snapshot_every: int = 1
    deltas: tuple = (0.05, 0.1, 0.2)
    seed: int = 0
    # free-form sections used only by the relaxation / homogenize subcommands
    relaxation: dict = field(default_factory=dict)
    homogenize: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.T / self.steps

    def refined(self, level: int) -> "Config":
        """Mesh and time step both halved ``level`` times."""
        f = 2**level
        return replace(self, nx=self.nx * f, ny=self.ny * f, steps=self.steps * f)

    def to_dict(self) -> dict:
        k = self.material.k
        return {
            "material": {
                "alpha": self.material.alpha,
                "beta": self.material.beta,
                "k": "inf" if math.isinf(k) else k,
            },
            "mesh": {"nx": self.nx, "ny": self.ny, "Lx": self.Lx, "Ly": self.Ly},
            "time": {"T": self.T, "steps": self.steps},
            "initial": {
                "u0": self.u0.to_dict(),
                "v0": self.v0.to_dict(),
                "D0": self.D0.to_dict(),
                "auto_repair": self.auto_repair,
            },
            "forcing": self.forcing.to_dict(),
            "solver": {
                "tol": self.tol,
                "max_iter": self.max_iter,
                "method": self.method,
                "lumped_mass": self.lumped_mass,
                "max_alternations": self.max_alternations,
            },
            "outputs": {"directory": self.directory, "snapshot_every": self.snapshot_every},
            "audit": {"deltas": list(self.deltas)},
            "seed": self.seed,
            "relaxation": copy.deepcopy(self.relaxation),
            "homogenize": copy.deepcopy(self.homogenize),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _section(doc, name, required=False):
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ConfigError("missing required section", name)
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"expected an object, got {type(sec).__name__}", name)
    return sec


def _number(sec, key, path, default=None, required=False, integer=False):
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError("missing required field", f"{path}.{key}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", f"{path}.{key}")
    if integer:
        if int(v) != v:
            raise ConfigError(f"expected an integer, got {v!r}", f"{path}.{key}")
        return int(v)
    return float(v)


def _k_value(sec):
    if "k" not in sec:
        raise ConfigError("missing required field", "material.k")
    v = sec["k"]
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        raise ConfigError(f"expected a number or 'inf', got {v!r}", "material.k")
    return _number(sec, "k", "material", required=True)


def config_from_dict(doc, check_initial: bool = True) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")

    mat = _section(doc, "material", required=True)
    params = MaterialParams(
        _number(mat, "alpha", "material", required=True),
        _number(mat, "beta", "material", required=True),
        _k_value(mat),
    )

    mesh = _section(doc, "mesh", required=True)
    nx = _number(mesh, "nx", "mesh", required=True, integer=True)
    ny = _number(mesh, "ny", "mesh", default=nx, integer=True)
    Lx = _number(mesh, "Lx", "mesh", default=1.0)
    Ly = _number(mesh, "Ly", "mesh", default=1.0)
    if nx < 1 or ny < 1:
        raise ConfigError("cell counts must be >= 1", "mesh")
    if not (Lx > 0 and Ly > 0):
        raise ConfigError("side lengths must be positive", "mesh")

    tsec = _section(doc, "time", required=True)
    T = _number(tsec, "T", "time", required=True)
    steps = _number(tsec, "steps", "time", required=True, integer=True)
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}", "time.T")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}", "time.steps")

    init = _section(doc, "initial")
    u0 = FieldSpec.from_dict(init.get("u0"), "initial.u0")
    v0 = FieldSpec.from_dict(init.get("v0"), "initial.v0")
    D0 = DamageSpec.from_dict(init.get("D0"), "initial.D0")
    auto_repair = bool(init.get("auto_repair", False))

    forcing = ForcingTerm.from_dict(doc.get("forcing"), "forcing")

    solver = _section(doc, "solver")
    tol = _number(solver, "tol", "solver", default=DEFAULT_TOL)
    if not tol > 0:
        raise ConfigError("tol must be positive", "solver.tol")
    max_iter = _number(solver, "max_iter", "solver", default=None, integer=True)
    method = solver.get("method", "direct")
    if method not in ("direct", "cg"):
        raise ConfigError(f"unknown method {method!r}; expected 'direct' or 'cg'", "solver.method")
    max_alt = _number(solver, "max_alternations", "solver", default=50, integer=True)
    if max_alt < 1:
        raise ConfigError("max_alternations must be >= 1", "solver.max_alternations")

    out = _section(doc, "outputs")
    directory = out.get("directory", "out")
    if not isinstance(directory, str):
        raise ConfigError("expected a string", "outputs.directory")
    snap = _number(out, "snapshot_every", "outputs", default=1, integer=True)
    if snap < 0:
        raise ConfigError("snapshot_every must be >= 0", "outputs.snapshot_every")

    audit = _section(doc, "audit")
    deltas = audit.get("deltas", [0.05, 0.1, 0.2])
    if not isinstance(deltas, list) or not all(
        isinstance(d, (int, float)) and not isinstance(d, bool) and d >= 0 for d in deltas
    ):
        raise ConfigError("deltas must be a list of non-negative numbers", "audit.deltas")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer", "seed")

    cfg = Config(
        material=params,
        nx=nx,
        ny=ny,
        Lx=Lx,
        Ly=Ly,
        T=T,
        steps=steps,
        u0=u0,
        v0=v0,
        D0=D0,
        auto_repair=auto_repair,
        forcing=forcing,
        tol=tol,
        max_iter=max_iter,
        method=method,
        lumped_mass=bool(solver.get("lumped_mass", False)),
        max_alternations=max_alt,
        directory=directory,
        snapshot_every=snap,
        deltas=tuple(float(d) for d in deltas),
        seed=seed,
        relaxation=dict(_section(doc, "relaxation")),
        homogenize=dict(_section(doc, "homogenize")),
    )
    if check_initial and not cfg.auto_repair:
        check_initial_damage(cfg)
    return cfg


def parse_config(text, check_initial: bool = True) -> Config:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(doc, check_initial=check_initial)


def load_config(path, check_initial: bool = True) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, check_initial=check_initial)


def initial_fields(cfg: Config, mesh=None):
    mesh = mesh if mesh is not None else build_mesh(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    u0 = cfg.u0.sample(mesh)
    v0 = cfg.v0.sample(mesh)
    D0 = DamageState.from_flags(cfg.D0.flags(mesh), mesh.areas)
    return mesh, u0, v0, D0


def check_initial_damage(cfg: Config):
    mesh, u0, _, D0 = initial_fields(cfg)
    report = validate_initial_damage(cfg.material, D0, element_gradients(mesh, u0))
    if not report.ok:
        raise InitialDamageError(report.offending, report.lam)


def build_problem(cfg: Config):
    """Engine plus initial data ``(scheme, u0, v0, D0)``; D0 repaired if configured."""
    from .damage import repair_initial_damage
    from .dynamics import DamageDynamics

    mesh, u0, v0, D0 = initial_fields(cfg)
    grads = element_gradients(mesh, u0)
    if cfg.auto_repair:
        D0 = repair_initial_damage(cfg.material, D0, grads)
    else:
        report = validate_initial_damage(cfg.material, D0, grads)
        if not report.ok:
            raise InitialDamageError(report.offending, report.lam)
    scheme = DamageDynamics(
        mesh,
        cfg.material,
        cfg.dt,
        forcing=cfg.forcing,
        tol=cfg.tol,
        method=cfg.method,
        max_iter=cfg.max_iter,
        lumped_mass=cfg.lumped_mass,
        max_alternations=cfg.max_alternations,
    )
    return scheme, u0, v0, D0
