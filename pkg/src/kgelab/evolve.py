"""Stormer-Verlet time integration with diagnostics and blow-up termination."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ParameterError
from .functionals import FunctionalReport, functional_report
from .grid import Grid
from .model import ModelParams, PotentialPair, StateVector, acceleration

COMPLETED = "completed"
BLOWUP_DETECTED = "blowup_detected"
OVERFLOW = "overflow"
UNSTABLE = "unstable"

CSV_COLUMNS = ("t", "E", "J", "I", "Q", "N", "kinetic", "G", "Gprime", "Gsecond", "l2w", "sup_u", "sup_v")


def max_frequency(grid: Grid, params: ModelParams, pot: PotentialPair) -> float:
    """Highest linear frequency resolved on the grid."""
    return math.sqrt(grid.k_max_sq + max(params.m1**2, params.m2**2) + pot.sup)


def stable_dt(grid: Grid, params: ModelParams, pot: PotentialPair, cfl_safety: float = 0.5) -> float:
    """Leapfrog stability bound ``cfl_safety * 2 / omega_max``."""
    return cfl_safety * 2.0 / max_frequency(grid, params, pot)


@dataclass
class IntegratorConfig:
    """Time-stepping controls.

    ``dt`` is either a positive float or ``"auto"``.  ``energy_tol`` is the
    relative energy drift that marks a run as unstable (blow-up tails are
    exempt, see :func:`simulate`).
    """

    dt: float | str = "auto"
    t_end: float = 10.0
    cfl_safety: float = 0.5
    blowup_threshold: float = 1e8
    sample_every: int = 10
    energy_tol: float = 1e-5

    def __post_init__(self):
        if not (0 < self.cfl_safety <= 1):
            raise ParameterError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.t_end > 0:
            raise ParameterError(f"t_end must be positive, got {self.t_end}")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ParameterError(f"dt must be positive or 'auto', got {self.dt!r}")
        if not self.blowup_threshold > 0:
            raise ParameterError("blowup_threshold must be positive")
        if int(self.sample_every) < 1:
            raise ParameterError("sample_every must be >= 1")
        self.sample_every = int(self.sample_every)

    def resolve_dt(self, grid: Grid, params: ModelParams, pot: PotentialPair) -> float:
        """Concrete step: the stability bound for ``auto``, else ``dt`` after checking it."""
        bound = stable_dt(grid, params, pot, self.cfl_safety)
        if self.dt == "auto":
            return bound
        dt = float(self.dt)
        if dt > bound * (1 + 1e-12):
            raise ParameterError(f"dt={dt:g} exceeds the stability limit {bound:g} (cfl_safety={self.cfl_safety})")
        return dt


@dataclass(frozen=True)
class Sample:
    t: float
    report: FunctionalReport
    G: float
    Gprime: float
    Gsecond: float
    sup_u: float
    sup_v: float

    def row(self) -> dict:
        r = self.report
        return {"t": self.t, "E": r.E, "J": r.J, "I": r.I, "Q": r.Q, "N": r.N, "kinetic": r.kinetic,
                "G": self.G, "Gprime": self.Gprime, "Gsecond": self.Gsecond, "l2w": r.l2_weighted,
                "sup_u": self.sup_u, "sup_v": self.sup_v}


@dataclass
class Trajectory:
    samples: list[Sample] = field(default_factory=list)
    terminal: str = COMPLETED
    t_final: float = 0.0
    t_terminal: float | None = None
    dt: float = 0.0
    e_drift: float = 0.0
    final_state: StateVector | None = field(default=None, repr=False)
    aux: object = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        return np.array([s.row()[name] for s in self.samples])


def _kdk(state: StateVector, acc, dt, params, pot, grid) -> tuple[StateVector, tuple | None]:
    utt, vtt = acc
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        ut = state.ut + half * utt
        vt = state.vt + half * vtt
        u = state.u + dt * ut
        v = state.v + dt * vt
    t = state.t + dt
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        return StateVector(u, ut, v, vt, t, overflowed=True), None
    new_acc = acceleration(StateVector(u, ut, v, vt, t), params, pot, grid)
    with np.errstate(over="ignore", invalid="ignore"):
        ut = ut + half * new_acc[0]
        vt = vt + half * new_acc[1]
    out = StateVector(u, ut, v, vt, t)
    if not out.is_finite():
        return replace(out, overflowed=True), None
    return out, new_acc


def step_leapfrog(state: StateVector, dt: float, params: ModelParams, pot: PotentialPair, grid: Grid) -> StateVector:
    """One kick-drift-kick Stormer-Verlet step (negative ``dt`` steps backwards)."""
    if state.overflowed:
        return state
    acc = acceleration(state, params, pot, grid)
    return _kdk(state, acc, dt, params, pot, grid)[0]


def simulate(state0: StateVector, config: IntegratorConfig, params: ModelParams, pot: PotentialPair, grid: Grid,
             aux=None, on_sample: Callable[[Sample], None] | None = None,
             on_step: Callable[[int, StateVector], None] | None = None) -> Trajectory:
    """Advance ``state0`` to ``config.t_end`` or until a terminal condition.

    Terminal states:

    * ``blowup_detected`` -- ``max(|u|, |v|)`` crossed ``blowup_threshold``;
    * ``overflow`` -- the step produced non-finite values;
    * ``unstable`` -- relative energy drift exceeded ``energy_tol`` while the
      diagnostics did not show a blow-up tail (``G''`` positive and increasing
      over the last three samples, or two right after the start).

    ``on_sample`` is called with every recorded sample as soon as it exists,
    ``on_step`` with every accepted state (step index, state).
    """
    from .blowup import g_diagnostics

    if not state0.is_finite():
        raise ParameterError("initial state is not finite")
    dt = config.resolve_dt(grid, params, pot)
    nsteps = max(1, math.ceil(config.t_end / dt - 1e-9))
    dt = config.t_end / nsteps

    traj = Trajectory(dt=dt, aux=aux)

    def record(state: StateVector) -> Sample:
        rep = functional_report(state, params, pot, grid)
        G, Gp, Gpp = g_diagnostics(state, params, pot, grid, aux, report=rep)
        su, sv = state.sup_norms()
        sample = Sample(state.t, rep, G, Gp, Gpp, su, sv)
        traj.samples.append(sample)
        if on_sample is not None:
            on_sample(sample)
        return sample

    state = replace(state0, t=float(state0.t))
    first = record(state)
    E0 = first.report.E
    r0 = first.report
    scale = abs(E0)
    term_scale = 0.5 * r0.kinetic + 0.5 * r0.Q + params.coupling * r0.N
    if scale <= 1e-8 * term_scale:
        scale = term_scale
    scale = scale or 1.0
    t0 = state.t

    acc = acceleration(state, params, pot, grid)
    threshold = config.blowup_threshold
    for n in range(1, nsteps + 1):
        new, acc = _kdk(state, acc, dt, params, pot, grid)
        new = replace(new, t=t0 + n * dt)
        if new.overflowed:
            traj.terminal = OVERFLOW
            traj.t_terminal = new.t
            inf = math.inf
            sample = Sample(new.t, FunctionalReport.overflowed(), inf, inf, inf, inf, inf)
            traj.samples.append(sample)
            if on_sample is not None:
                on_sample(sample)
            break
        su, sv = new.sup_norms()
        if max(su, sv) > threshold:
            traj.terminal = BLOWUP_DETECTED
            traj.t_terminal = new.t
            break
        state = new
        if on_step is not None:
            on_step(n, state)
        if n % config.sample_every == 0 or n == nsteps:
            sample = record(state)
            drift = abs(sample.report.E - E0) / scale
            traj.e_drift = max(traj.e_drift, drift)
            if drift > config.energy_tol and not _blowup_tail(traj.samples):
                traj.terminal = UNSTABLE
                traj.t_terminal = state.t
                break
    traj.t_final = state.t
    traj.final_state = state
    return traj


def _blowup_tail(samples: list[Sample], window: int = 3) -> bool:
    if len(samples) < 2:
        return False
    g2 = [s.Gsecond for s in samples[-window:]]
    return all(x > 0 for x in g2) and all(b > a for a, b in zip(g2, g2[1:]))
