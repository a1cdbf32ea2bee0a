"""Scenario configuration: YAML blocks resolved into validated dataclasses.

A scenario file looks like::

    model:      {m1: 1, m2: 1, a1: 1, a2: 1, p: 2, q: 2}
    grid:       {points: [128, 128], lengths: [20, 20]}
    potential:  {kind: zero}
    integrator: {dt: auto, t_end: 10}
    initial_data: {kind: gaussian_bumps, amplitudes: [0.1, 0.1], width: 0.1}
    output:     {directory: runs/demo}
    seed: 0

Missing optional keys take the defaults below; a missing required key raises
:class:`ConfigError` naming it.  ``to_dict`` returns the fully resolved
mapping, so parsing it again yields an equal config.
"""

from __future__ import annotations

from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError, KgelabError
from .evolve import IntegratorConfig
from .grid import Grid
from .groundstate import GroundStateOptions
from .model import ModelParams, PotentialPair

INITIAL_KINDS = (
    "gaussian_bumps",
    "gamma_perturbed",
    "file",
    "zero_energy_construct",
    "negative_energy_construct",
    "thm61_construct",
)
POTENTIAL_KINDS = ("zero", "harmonic", "gaussian_well", "file")


@dataclass
class ModelBlock:
    m1: float
    m2: float
    a1: float
    a2: float
    p: float
    q: float
    n: int | None = None
    linear_test_mode: bool = False
    outside_theorem_range: bool = False


@dataclass
class GridBlock:
    points: list[int]
    lengths: list[float]
    dim: int | None = None


@dataclass
class PotentialBlock:
    kind: str = "zero"
    strength: float = 1.0
    depth: float = 1.0
    width: float = 1.0
    file: str | None = None
    file2: str | None = None


@dataclass
class IntegratorBlock:
    dt: float | str = "auto"
    t_end: float = 10.0
    cfl_safety: float = 0.5
    blowup_threshold: float = 1e8
    sample_every: int = 10
    energy_tol: float = 1e-5


@dataclass
class InitialDataBlock:
    kind: str = "gaussian_bumps"
    amplitudes: list[float] = field(default_factory=lambda: [1.0, 1.0])
    width: float = 0.1
    velocity_scale: float = 0.0
    gamma: float = 1.1
    overshoot: float = 1.05
    position: float = 0.5
    phi_file: str | None = None
    psi_file: str | None = None
    u_file: str | None = None
    v_file: str | None = None
    ut_file: str | None = None
    vt_file: str | None = None


@dataclass
class GroundStateBlock:
    tol_residual: float = 1e-6
    max_iters: int = 5000
    starts: int = 3


@dataclass
class OutputBlock:
    directory: str = "kgelab-out"
    csv: str = "diagnostics.csv"
    snapshot_every: int = 0


_BLOCKS = {
    "model": ModelBlock,
    "grid": GridBlock,
    "potential": PotentialBlock,
    "integrator": IntegratorBlock,
    "initial_data": InitialDataBlock,
    "groundstate": GroundStateBlock,
    "output": OutputBlock,
}
_REQUIRED_BLOCKS = ("model", "grid")


def _parse_block(name: str, cls, raw) -> object:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(raw).__name__}", key=name)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown key {name}.{unknown[0]}", key=f"{name}.{unknown[0]}")
    missing = [f.name for f in fields(cls)
               if f.name not in raw and f.default is MISSING and f.default_factory is MISSING]
    if missing:
        raise ConfigError(f"missing required key {name}.{missing[0]}", key=f"{name}.{missing[0]}")
    return cls(**raw)


@dataclass
class ScenarioConfig:
    model: ModelBlock
    grid: GridBlock
    potential: PotentialBlock = field(default_factory=PotentialBlock)
    integrator: IntegratorBlock = field(default_factory=IntegratorBlock)
    initial_data: InitialDataBlock = field(default_factory=InitialDataBlock)
    groundstate: GroundStateBlock = field(default_factory=GroundStateBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    seed: int = 0
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> ScenarioConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping of blocks")
        unknown = sorted(set(raw) - set(_BLOCKS) - {"seed"})
        if unknown:
            raise ConfigError(f"unknown block {unknown[0]}", key=unknown[0])
        for name in _REQUIRED_BLOCKS:
            if name not in raw:
                raise ConfigError(f"missing required block {name}", key=name)
        blocks = {name: _parse_block(name, c, raw.get(name)) for name, c in _BLOCKS.items()}
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"seed must be an integer, got {seed!r}", key="seed")
        cfg = cls(**blocks, seed=seed, base_dir=Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {name: asdict(getattr(self, name)) for name in _BLOCKS}
        out["seed"] = self.seed
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    # -- resolution into library objects ---------------------------------------

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def make_grid(self) -> Grid:
        return Grid(tuple(self.grid.points), tuple(self.grid.lengths))

    def make_params(self) -> ModelParams:
        m = self.model
        n = m.n if m.n is not None else len(self.grid.points)
        return ModelParams(m.m1, m.m2, m.a1, m.a2, m.p, m.q, n,
                           linear_test_mode=m.linear_test_mode, outside_theorem_range=m.outside_theorem_range)

    def make_potential(self, grid: Grid) -> PotentialPair:
        pb = self.potential
        if pb.kind == "zero":
            return PotentialPair.zero(grid)
        if pb.kind == "harmonic":
            return PotentialPair.harmonic(grid, pb.strength)
        if pb.kind == "gaussian_well":
            return PotentialPair.gaussian_well(grid, pb.depth, pb.width)
        f2 = self.resolve_path(pb.file2) if pb.file2 else None
        return PotentialPair.from_files(grid, self.resolve_path(pb.file), f2)

    def make_integrator(self) -> IntegratorConfig:
        return IntegratorConfig(**asdict(self.integrator))

    def make_gs_options(self) -> GroundStateOptions:
        g = self.groundstate
        return GroundStateOptions(g.tol_residual, g.max_iters,
                                  outside_theorem_range=self.model.outside_theorem_range)

    def validate(self) -> None:
        """Run every block through its library validator; no computation happens."""
        if self.grid.dim is not None and self.grid.dim != len(self.grid.points):
            raise ConfigError(f"grid.dim={self.grid.dim} but {len(self.grid.points)} point counts given", key="grid.dim")
        try:
            grid = self.make_grid()
            params = self.make_params()
            if params.n != grid.dim and not params.outside_theorem_range:
                raise ConfigError(f"model.n={params.n} does not match the grid dimension {grid.dim}", key="model.n")
            if self.potential.kind not in POTENTIAL_KINDS:
                raise ConfigError(f"potential.kind must be one of {POTENTIAL_KINDS}", key="potential.kind")
            if self.potential.kind == "file" and not self.potential.file:
                raise ConfigError("potential.kind=file needs potential.file", key="potential.file")
            self.make_integrator()
            self.make_gs_options()
        except ConfigError:
            raise
        except (KgelabError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        ini = self.initial_data
        if ini.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial_data.kind must be one of {INITIAL_KINDS}", key="initial_data.kind")
        if len(ini.amplitudes) != 2:
            raise ConfigError("initial_data.amplitudes needs two entries", key="initial_data.amplitudes")
        if ini.kind == "file":
            for key in ("u_file", "v_file"):
                if not getattr(ini, key):
                    raise ConfigError(f"initial_data.kind=file needs initial_data.{key}", key=f"initial_data.{key}")
        if ini.kind == "gamma_perturbed" and not ini.gamma > 0:
            raise ConfigError("initial_data.gamma must be positive", key="initial_data.gamma")
        if (ini.phi_file is None) != (ini.psi_file is None):
            raise ConfigError("initial_data.phi_file and psi_file go together", key="initial_data.psi_file")
        if self.groundstate.starts < 1:
            raise ConfigError("groundstate.starts must be >= 1", key="groundstate.starts")
        if self.output.snapshot_every < 0:
            raise ConfigError("output.snapshot_every must be >= 0", key="output.snapshot_every")
        referenced = [self.potential.file, self.potential.file2] if self.potential.kind == "file" else []
        referenced += [ini.phi_file, ini.psi_file]
        if ini.kind == "file":
            referenced += [ini.u_file, ini.v_file, ini.ut_file, ini.vt_file]
        for p in referenced:
            if p and not self.resolve_path(p).is_file():
                raise ConfigError(f"referenced file {p} does not exist")
