"""Scenario files: JSON validated by pydantic, unknown keys rejected."""

import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .flow import SCHEMES, IntegratorConfig
from .grid import TorusGrid, mode_field, random_spectrum_field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    n: Literal[1, 2] = 1
    N: int = 64

    @field_validator("N")
    @classmethod
    def _even(cls, v):
        if v < 8 or v % 2:
            raise ValueError("N must be even and >= 8")
        return v

    def build(self):
        return TorusGrid(self.n, self.N)


class Mode(_Strict):
    k: list[int]
    amplitude: float
    phase: float = 0.0


class ZeroInit(_Strict):
    kind: Literal["zero"] = "zero"


class ModesInit(_Strict):
    kind: Literal["modes"]
    modes: list[Mode] = Field(min_length=1)


class RandomInit(_Strict):
    kind: Literal["random-spectrum"]
    decay: float
    amplitude: float = Field(gt=0)
    seed: int | None = None
    k_max: int | None = None


class SnapshotInit(_Strict):
    kind: Literal["snapshot"]
    path: str


Initial = Annotated[Union[ZeroInit, ModesInit, RandomInit, SnapshotInit], Field(discriminator="kind")]


class IntegratorSpec(_Strict):
    scheme: Literal[SCHEMES] = "imex-be"
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1.0
    splitting: float | None = None
    splitting_margin: float = 0.1
    rtol: float = 1e-6
    atol: float = 1e-12
    adaptive: bool = True
    t_end: float = 1.0
    record_interval: float | None = None
    halt_on_stationary: bool = True

    @model_validator(mode="after")
    def _consistent(self):
        self.build()
        return self

    def build(self):
        return IntegratorConfig(**self.model_dump())


class MonitorSpec(_Strict):
    tail_k_cut: int | None = None
    compactness: bool = True


class OutputSpec(_Strict):
    series: str = "series.csv"
    status: str = "status.json"
    snapshot_times: list[float] = []
    snapshot_prefix: str = "phi"


class SolverSpec(_Strict):
    green_tol: float = 1e-9
    eig_tol: float = 1e-6
    eig_maxiter: int = 200


class DiscPotential(_Strict):
    kind: Literal["zero", "quartic", "torus"] = "zero"
    flow_first: bool = False
    centre: tuple[float, float] = (float(np.pi), float(np.pi))


class DiscSpec(_Strict):
    N_d: int = 65
    puncture: bool = True
    Rbar: float = 0.0
    tol: float = 1e-10
    potential: DiscPotential = DiscPotential()


class CheckSpec(_Strict):
    conservation_rtol: float = 1e-10
    expected_decay_rate: float | None = None
    decay_rtol: float = 0.02
    decay_window: tuple[float, float] | None = None
    identity_tol: float | None = None


class Scenario(_Strict):
    grid: GridSpec = GridSpec()
    initial: Initial = ZeroInit()
    integrator: IntegratorSpec = IntegratorSpec()
    monitors: MonitorSpec = MonitorSpec()
    output: OutputSpec = OutputSpec()
    solver: SolverSpec = SolverSpec()
    disc: DiscSpec = DiscSpec()
    check: CheckSpec = CheckSpec()
    seed: int = 0

    @model_validator(mode="after")
    def _modes_match_grid(self):
        if isinstance(self.initial, ModesInit):
            for m in self.initial.modes:
                if len(m.k) != 2 * self.grid.n:
                    raise ValueError(f"mode wavevector {m.k} needs {2 * self.grid.n} entries")
        k = self.monitors.tail_k_cut
        if k is not None and not 0 < k < self.grid.N // 2:
            raise ValueError("tail_k_cut must lie in (0, N/2)")
        return self


def load_scenario(path):
    text = Path(path).read_text()
    return Scenario.model_validate(json.loads(text))


def initial_potential(sc, base_dir=None):
    """Sample the configured initial potential on the scenario grid."""
    from .io import read_snapshot

    g = sc.grid.build()
    ini = sc.initial
    if isinstance(ini, ZeroInit):
        return np.zeros(g.shape)
    if isinstance(ini, ModesInit):
        return sum(mode_field(g, m.k, m.amplitude, m.phase) for m in ini.modes)
    if isinstance(ini, RandomInit):
        seed = sc.seed if ini.seed is None else ini.seed
        return random_spectrum_field(g, ini.decay, seed, ini.amplitude, ini.k_max)
    path = Path(ini.path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    n, N, data = read_snapshot(path)
    if (n, N) != (g.n, g.N):
        raise ValueError(f"snapshot is n={n}, N={N}; scenario grid is n={g.n}, N={g.N}")
    return data
