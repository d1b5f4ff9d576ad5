"""Time integration of the Calabi flow ``d phi / dt = R_phi - Rbar``.

The stiff fourth-order principal part is modelled by ``c * Lap_c^2`` and
treated implicitly, everything else explicitly:

    d phi/dt = -c Lap_c^2 phi + E(phi),     E(phi) = R_phi - Rbar + c Lap_c^2 phi

The linearisation of ``R`` has principal symbol ``-g^{i jbar} g^{k lbar}``
times the fourth derivatives, whose largest coefficient is ``1/lambda^2``
(``lambda`` the smallest metric eigenvalue).  The default splitting
constant is therefore ``c = (1 + margin) / lambda^2``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import diagnose
from .errors import NonAdmissible, StepFailure
from .geometry import assemble_metric, equivalence_constants, global_integrals, scalar_curvature
from .grid import biharmonic_apply, biharmonic_shift_solve

SCHEMES = ("explicit-rk4", "imex-be", "imex-cn")
ORDER = {"imex-be": 1, "imex-cn": 2, "explicit-rk4": 4}


@dataclass
class IntegratorConfig:
    scheme: str = "imex-be"
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

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.splitting is not None and not self.splitting > 0:
            raise ValueError("splitting constant must be positive")
        if self.record_interval is not None and not self.record_interval > 0:
            raise ValueError("record_interval must be positive")


@dataclass
class FlowState:
    t: float
    phi: np.ndarray
    metric: object
    R: np.ndarray
    integrals: object
    last_dt: float = 0.0
    step_index: int = 0


def evaluate(grid, phi, t=0.0, last_dt=0.0, step_index=0):
    """Build a :class:`FlowState`; raises :class:`NonAdmissible` when ``phi`` leaves the cone."""
    m = assemble_metric(grid, phi)
    R = scalar_curvature(m)
    return FlowState(t, phi, m, R, global_integrals(m, R), last_dt, step_index)


def _velocity(grid, phi, Rbar):
    m = assemble_metric(grid, phi)
    return scalar_curvature(m) - Rbar


def advance(grid, phi, dt, scheme, c, Rbar, v0=None):
    """One step of size ``dt`` without error control.  ``v0`` is ``R - Rbar`` at ``phi`` if known."""
    if v0 is None:
        v0 = _velocity(grid, phi, Rbar)
    if scheme == "explicit-rk4":
        k1 = v0
        k2 = _velocity(grid, phi + 0.5 * dt * k1, Rbar)
        k3 = _velocity(grid, phi + 0.5 * dt * k2, Rbar)
        k4 = _velocity(grid, phi + dt * k3, Rbar)
        return phi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    stiff = biharmonic_apply(grid, phi, c) - phi  # c Lap^2 phi
    E0 = v0 + stiff
    if scheme == "imex-be":
        return biharmonic_shift_solve(grid, phi + dt * E0, dt * c)
    # Crank-Nicolson on the stiff part, Heun on the explicit part
    half = 0.5 * dt
    base = phi - half * stiff
    pred = biharmonic_shift_solve(grid, base + dt * E0, half * c)
    E1 = _velocity(grid, pred, Rbar) + biharmonic_apply(grid, pred, c) - pred
    return biharmonic_shift_solve(grid, base + half * (E0 + E1), half * c)


class Integrator:
    """Adaptive stepper: step doubling for the local error, PI step-size control."""

    def __init__(self, grid, config, Rbar=0.0):
        self.grid = grid
        self.config = config
        self.Rbar = Rbar
        self.dt_next = config.dt_init
        self.c = config.splitting
        self._lam_ref = None
        self._prev_ratio = 1.0
        self.rejected = 0

    def splitting_for(self, state):
        if self.config.splitting is not None:
            return self.config.splitting
        lam, _ = equivalence_constants(state.metric)
        if self._lam_ref is None or abs(lam - self._lam_ref) > 0.1 * self._lam_ref:
            self._lam_ref = lam
            self.c = (1.0 + self.config.splitting_margin) / lam**2
        return self.c

    def _try(self, state, dt, c):
        cfg = self.config
        v0 = state.R - self.Rbar
        if not cfg.adaptive:
            new = advance(self.grid, state.phi, dt, cfg.scheme, c, self.Rbar, v0)
            return new, 0.0
        full = advance(self.grid, state.phi, dt, cfg.scheme, c, self.Rbar, v0)
        mid = advance(self.grid, state.phi, 0.5 * dt, cfg.scheme, c, self.Rbar, v0)
        new = advance(self.grid, mid, 0.5 * dt, cfg.scheme, c, self.Rbar)
        p = ORDER[cfg.scheme]
        err = np.max(np.abs(full - new)) / (2**p - 1)
        scale = cfg.atol + cfg.rtol * np.max(np.abs(new))
        return new, err / scale

    def step(self, state, dt_cap=math.inf):
        """Advance ``state`` by one accepted step no longer than ``dt_cap``."""
        cfg = self.config
        c = self.splitting_for(state)
        dt_prop = self.dt_next
        while True:
            dt = min(dt_prop, cfg.dt_max, dt_cap)
            try:
                phi, ratio = self._try(state, dt, c)
                if not np.all(np.isfinite(phi)):
                    raise FloatingPointError("non-finite potential")
                new = evaluate(self.grid, phi, state.t + dt, dt, state.step_index + 1)
            except (NonAdmissible, FloatingPointError) as exc:
                self.rejected += 1
                dt_prop = 0.5 * dt
                if dt_prop < cfg.dt_min:
                    raise StepFailure(state.t, dt, f"dt_min reached: {exc}") from exc
                continue
            if ratio <= 1.0:
                break
            self.rejected += 1
            p = ORDER[cfg.scheme]
            dt_prop = dt * max(0.2, 0.9 * ratio ** (-1.0 / (p + 1)))
            if dt_prop < cfg.dt_min:
                raise StepFailure(state.t, dt, "local error above tolerance at dt_min")
        if cfg.adaptive:
            p = ORDER[cfg.scheme]
            r = max(ratio, 1e-10)
            fac = 0.9 * r ** (-0.7 / (p + 1)) * self._prev_ratio ** (0.4 / (p + 1))
            self._prev_ratio = r
            grown = dt_prop if dt < dt_prop else dt
            self.dt_next = min(cfg.dt_max, max(cfg.dt_min, grown * min(5.0, max(0.2, fac))))
        else:
            self.dt_next = dt_prop
        return new


def step(state, config, grid, Rbar=0.0):
    """One accepted step from ``state`` using a fresh :class:`Integrator`."""
    return Integrator(grid, config, Rbar).step(state, config.t_end - state.t)


@dataclass
class RunResult:
    records: list
    cause: str
    state: FlowState
    error: Exception | None = None
    steps: int = 0
    rejected: int = 0
    violations: list = field(default_factory=list)
    mean_phi: list = field(default_factory=list)


def run(grid, phi0, config, on_record=None, snapshot_times=(), on_snapshot=None, k_cut=None):
    """Integrate from ``phi0`` to ``config.t_end`` or until a halt.

    ``cause`` is one of ``t_end``, ``stationary``, ``non_admissible`` or
    ``step_failure``.  Every accepted step is checked for monotonicity of
    the modified Calabi energy; offending steps are listed in
    ``violations`` as ``(t, increase)``.  Records are pushed to
    ``on_record`` as they are produced so partial output survives a halt.
    """
    state = evaluate(grid, np.asarray(phi0, dtype=float))
    Rbar = state.integrals.mean_scalar
    integ = Integrator(grid, config, Rbar)
    cam0 = state.integrals.calabi_modified
    slack = 1e-10 * cam0
    records = []
    violations = []
    mean_phi = [(0.0, float(np.mean(state.phi)))]

    def emit(s):
        rec = diagnose(s, Rbar, k_cut)
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    emit(state)
    snaps = sorted(float(t) for t in snapshot_times)
    while snaps and snaps[0] <= 0.0:
        if on_snapshot is not None:
            on_snapshot(0.0, state.phi)
        snaps.pop(0)

    interval = config.record_interval
    next_record = interval if interval is not None else None
    cause, error = "t_end", None
    eps_t = 1e-12 * max(1.0, config.t_end)
    while state.t < config.t_end - eps_t:
        if config.halt_on_stationary and state.integrals.calabi_modified < 1e-16 * state.integrals.volume:
            cause = "stationary"
            break
        cap = config.t_end - state.t
        if next_record is not None:
            cap = min(cap, next_record - state.t)
        if snaps:
            cap = min(cap, snaps[0] - state.t)
        prev = state
        try:
            state = integ.step(state, cap)
        except NonAdmissible as exc:
            cause, error = "non_admissible", exc
            break
        except StepFailure as exc:
            cause, error = "step_failure", exc
            break
        mean_phi.append((state.t, float(np.mean(state.phi))))
        rise = state.integrals.calabi_modified - prev.integrals.calabi_modified
        if rise > slack:
            violations.append((state.t, rise))
        if next_record is None:
            emit(state)
        elif abs(state.t - next_record) <= eps_t:
            emit(state)
            next_record += interval
        if snaps and abs(state.t - snaps[0]) <= eps_t:
            if on_snapshot is not None:
                on_snapshot(state.t, state.phi)
            snaps.pop(0)
    if records[-1].t != state.t:
        emit(state)
    return RunResult(records, cause, state, error, state.step_index, integ.rejected, violations, mean_phi)
