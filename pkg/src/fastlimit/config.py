"""Run configuration: one TOML file per run, validated before anything runs.

Example::

    [problem]
    graph = "heaviside"          # or a table: knots, slopes, left_tail, right_tail, growth
    reaction = "canonical"       # canonical | evans | linear:r | custom:<expr>
    d1 = 1.0
    d2 = 0.5
    f1 = "0"
    f2 = "0"
    k = 100.0                    # used by run-rd and validate-init

    [grid]
    n_cells = 256
    x_min = 0.0
    x_max = 1.0

    [time]
    T = 0.2
    dt = 2e-4
    stride = 10
    splitting = "lie"

    [sweep]
    k = [10, 100, 1000, 10000]

    [initial]
    a = "1 + cos(2*pi*x)"
    b = "-2*x"
    project = true
    C5 = 1.0
    C6 = 100.0

    [output]
    directory = "out"
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import expr_dsl
from .errors import ConfigError, MissingConfig
from .grid import Grid1D, step_count
from .limit_solver import LimitProblemSpec
from .monotone_graph import graph_from_config
from .reaction_model import InitialData, ReactionSystemSpec, project_to_zero_set, reaction_from_config


@dataclass
class ProblemConfig:
    graph: object = "heaviside"
    reaction: str = "canonical"
    d1: float = 1.0
    d2: float = 0.5
    f1: str = "0"
    f2: str = "0"
    k: float = 100.0
    lipschitz_bound: float | None = None


@dataclass
class GridConfig:
    n_cells: int = 256
    x_min: float = 0.0
    x_max: float = 1.0


@dataclass
class TimeConfig:
    T: float = 0.2
    dt: float = 2e-4
    stride: int = 1
    splitting: str = "lie"


@dataclass
class SweepConfig:
    k: list = field(default_factory=lambda: [10.0, 100.0, 1000.0, 10000.0])
    s: float = 1.5
    tau_multiples: list = field(default_factory=lambda: [2, 4, 8])


@dataclass
class InitialConfig:
    a: str = "1 + cos(2*pi*x)"
    b: str = "-2*x"
    project: bool = True
    C5: float = 1.0
    C6: float = math.inf


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv"])


_SECTIONS = {
    "problem": ProblemConfig,
    "grid": GridConfig,
    "time": TimeConfig,
    "sweep": SweepConfig,
    "initial": InitialConfig,
    "output": OutputConfig,
}


@dataclass
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- loading ------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = {}
        for name, klass in _SECTIONS.items():
            block = dict(data.get(name, {}))
            known = set(klass.__dataclass_fields__)
            unknown = set(block) - known
            if unknown:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
            kwargs[name] = klass(**block)
        extra = set(data) - set(_SECTIONS)
        if extra:
            raise ConfigError(f"unknown sections: {sorted(extra)}")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise MissingConfig(f"config file not found: {path}")
        with path.open("rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}

    def with_overrides(self, **scalars) -> "RunConfig":
        """Copy with ``section.key`` scalars replaced (None values skipped)."""
        data = copy.deepcopy(self.to_dict())
        for dotted, value in scalars.items():
            if value is None:
                continue
            section, key = dotted.split(".", 1)
            data[section][key] = value
        return RunConfig.from_dict(data)

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()

    # -- validation -----------------------------------------------------------

    def validate(self):
        """Run every owning module's checks; raises ConfigError on the first failure."""
        try:
            graph = self.build_graph()
            self.build_reaction(graph)
            ReactionSystemSpec(self.problem.d1, self.problem.d2, self.problem.k, self.build_reaction(graph),
                               self.problem.f1, self.problem.f2)
            self.build_limit_spec()
            grid = self.build_grid()
            n_steps = step_count(self.time.T, self.time.dt)
        except (ValueError, expr_dsl.ExprError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.time.splitting not in ("lie", "strang"):
            raise ConfigError(f"splitting must be 'lie' or 'strang', got {self.time.splitting!r}")
        stride = self.time.stride
        if int(stride) != stride or stride < 1 or n_steps % stride:
            raise ConfigError(f"stride={stride} must divide the step count {n_steps}")
        n_snap = n_steps // stride + 1
        for m in self.sweep.tau_multiples:
            if int(m) != m or not 0 < m < n_snap - 1:
                raise ConfigError(f"tau multiple {m} must be an integer in (0, {n_snap - 1})")
        if not self.sweep.k or any(not float(k) > 0 for k in self.sweep.k):
            raise ConfigError("sweep.k must list positive rates")
        if not 1 <= self.sweep.s < 2:
            raise ConfigError("sweep.s must lie in [1, 2)")
        try:
            self.build_initial(grid)
        except (ValueError, expr_dsl.ExprError, ArithmeticError) as exc:
            raise ConfigError(f"initial data: {exc}") from exc

    # -- builders -------------------------------------------------------------

    def build_graph(self):
        return graph_from_config(self.problem.graph)

    def build_reaction(self, graph=None):
        graph = graph if graph is not None else self.build_graph()
        return reaction_from_config(self.problem.reaction, graph, self.problem.lipschitz_bound)

    def build_spec(self, k=None) -> ReactionSystemSpec:
        p = self.problem
        return ReactionSystemSpec(p.d1, p.d2, p.k if k is None else float(k), self.build_reaction(), p.f1, p.f2)

    def build_limit_spec(self) -> LimitProblemSpec:
        p = self.problem
        return LimitProblemSpec(self.build_reaction().graph, p.d1, p.d2, p.f1, p.f2)

    def build_grid(self) -> Grid1D:
        g = self.grid
        return Grid1D(int(g.n_cells), float(g.x_min), float(g.x_max))

    def build_initial(self, grid: Grid1D | None = None) -> InitialData:
        grid = grid or self.build_grid()
        x = grid.centers
        a = _eval_profile(self.initial.a, x)
        b = _eval_profile(self.initial.b, x)
        if self.initial.project:
            u0, v0 = project_to_zero_set(self.build_reaction().graph, a, b)
        else:
            u0, v0 = a, b
        return InitialData(u0, v0, grid.h, float(self.initial.C5), float(self.initial.C6))


def _eval_profile(src, x):
    e = expr_dsl.parse(str(src), variables=("x",))
    vals = np.broadcast_to(np.asarray(e(x=x), dtype=float), x.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"profile {src!r} is not finite on the grid")
    return vals
