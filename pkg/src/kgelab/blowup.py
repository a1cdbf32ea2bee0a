"""Concavity diagnostics, theorem-specific initial data and blow-up evidence.

The auxiliary function is ``G(t) = alpha ||u||^2 + ||v||^2 (+ b (t + T1)^2)``.
Its derivatives follow from the equations of motion without any numerical
differentiation:

    G'  = 2 int (alpha u u_t + v v_t) (+ 2 b (t + T1))
    G'' = 2 kinetic - 2 I(u, v)       (+ 2 b)

If ``G^{-(p+q)/4}`` is positive, decreasing and concave it must reach zero no
later than ``4 G(0) / ((p+q) G'(0))``, so ``G`` cannot stay finite.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InapplicableError
from .evolve import BLOWUP_DETECTED, OVERFLOW, UNSTABLE, Trajectory
from .functionals import FunctionalReport, cross_integral, functional_report
from .grid import Grid
from .model import ModelParams, PotentialPair, StateVector

SECTION4 = "section4"
SECTION5 = "section5"

# Margin used to make G'(0) strictly positive when choosing T1.
G1_MARGIN = 1e-6
# Strict margin required of the two Section-4 inequalities on the verification pass.
SECTION4_MARGIN = 1e-9
# |E(0)| below this fraction of the individual energy terms counts as zero energy.
ZERO_ENERGY_RTOL = 1e-12


@dataclass(frozen=True)
class AuxiliaryParams:
    b: float
    T1: float
    regime: str = SECTION5

    def __post_init__(self):
        if not (self.b > 0 and self.T1 > 0):
            raise ValueError(f"auxiliary parameters must be positive, got b={self.b}, T1={self.T1}")


def g_diagnostics(state: StateVector, params: ModelParams, pot: PotentialPair, grid: Grid,
                  aux: AuxiliaryParams | None = None, t: float | None = None,
                  report: FunctionalReport | None = None) -> tuple[float, float, float]:
    """Return ``(G, G', G'')`` at time ``t`` (defaults to ``state.t``)."""
    rep = report if report is not None else functional_report(state, params, pot, grid)
    if rep.overflow:
        return math.inf, math.inf, math.inf
    t = state.t if t is None else t
    G = rep.l2_weighted
    Gp = 2.0 * cross_integral(state, params, grid)
    Gpp = 2.0 * rep.kinetic - 2.0 * rep.I
    if aux is not None:
        s = t + aux.T1
        G += aux.b * s * s
        Gp += 2.0 * aux.b * s
        Gpp += 2.0 * aux.b
    return G, Gp, Gpp


def tmax_bound(G0: float, Gprime0: float, params: ModelParams) -> float:
    """Upper bound ``4 G(0) / ((p+q) G'(0))`` on the blow-up time."""
    if not G0 > 0:
        raise InapplicableError(f"bound needs G(0) > 0, got {G0}")
    if not Gprime0 > 0:
        raise InapplicableError(f"bound needs G'(0) > 0, got {Gprime0}")
    return 4.0 * G0 / (params.pq * Gprime0)


# -- initial data ------------------------------------------------------------------


def scaled_ground_state(Phi: np.ndarray, Psi: np.ndarray, gamma: float) -> StateVector:
    """``(gamma Phi, 0, gamma Psi, 0)`` for any ``gamma > 0``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return StateVector.at_rest(gamma * np.asarray(Phi, float), gamma * np.asarray(Psi, float))


def gamma_perturbed_data(Phi: np.ndarray, Psi: np.ndarray, gamma: float) -> StateVector:
    """Instability data ``(gamma Phi, 0, gamma Psi, 0)`` with ``gamma > 1``."""
    if not gamma > 1:
        raise ValueError(f"the instability construction needs gamma > 1, got {gamma}")
    return scaled_ground_state(Phi, Psi, gamma)


def _scale_state(shape: StateVector, A: float) -> StateVector:
    return StateVector(A * shape.u, A * shape.ut, A * shape.v, A * shape.vt, shape.t)


def zero_energy_amplitude(shape: StateVector, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    """Amplitude ``A`` at which ``E(A * shape) = 0``.

    With every component scaled by ``A`` the energy is
    ``A^2 (kinetic + Q)/2 - A^(p+q+2) a2' N``, which has one positive root.
    """
    rep = functional_report(shape, params, pot, grid)
    cN = params.coupling * rep.N
    if not cN > 0:
        raise InapplicableError("coupling integral of the base shape vanishes")
    return (0.5 * (rep.kinetic + rep.Q) / cN) ** (1.0 / params.pq)


def negative_energy_construct(shape: StateVector, params, pot, grid, overshoot: float = 1.05) -> StateVector:
    """Scale ``shape`` past the zero-energy amplitude so that ``E(0) < 0``."""
    if not overshoot > 1:
        raise ValueError("overshoot must exceed 1")
    A = zero_energy_amplitude(shape, params, pot, grid) * overshoot
    state = _scale_state(shape, A)
    if not functional_report(state, params, pot, grid).E < 0:
        raise InapplicableError("scaled data does not have negative energy")
    return state


def zero_energy_construct(shape: StateVector, params, pot, grid, max_bisections: int = 200) -> StateVector:
    """At-rest data with ``|E(0)| <= 1e-12`` times the size of its energy terms."""
    shape = StateVector.at_rest(shape.u, shape.v)
    A = zero_energy_amplitude(shape, params, pot, grid)

    def energy_and_scale(a):
        rep = functional_report(_scale_state(shape, a), params, pot, grid)
        return rep.E, 0.5 * rep.Q + params.coupling * rep.N

    E, scale = energy_and_scale(A)
    lo, hi = A * (1 - 1e-6), A * (1 + 1e-6)
    for _ in range(max_bisections):
        if abs(E) <= ZERO_ENERGY_RTOL * scale:
            break
        # E > 0 below the root, E < 0 above it
        if E > 0:
            lo = A
        else:
            hi = A
        A = 0.5 * (lo + hi)
        E, scale = energy_and_scale(A)
    else:
        raise InapplicableError("bisection did not reach the zero-energy tolerance")
    return _scale_state(shape, A)


@dataclass(frozen=True)
class PositiveEnergyWindow:
    """Admissible range of the coupling ratio ``rho = a2' N / Q`` for at-rest data."""

    lower: float
    upper: float
    rho: float
    amplitude: float


def thm61_window(shape: StateVector, params, pot, grid, position: float = 0.5) -> PositiveEnergyWindow:
    """Amplitude window with ``E > 0``, ``I < 0`` and the weighted-L2 threshold.

    For at-rest data scaled by ``A`` put ``rho = a2' N(A) / Q(A)``.  Then
    ``I < 0`` iff ``rho > 1/(p+q+2)``, ``E > 0`` iff ``rho < 1/2`` and the
    threshold ``alpha||u||^2 + ||v||^2 > 2(p+q+2)E/(min m^2 (p+q))`` iff
    ``rho > 1/2 - min m^2 (p+q) l2w / (2(p+q+2) Q)``.
    """
    rep = functional_report(StateVector.at_rest(shape.u, shape.v), params, pot, grid)
    cN = params.coupling * rep.N
    if not cN > 0:
        raise InapplicableError("coupling integral of the base shape vanishes")
    pq = params.pq
    lower = max(1.0 / (pq + 2), 0.5 - params.min_mass_sq * pq * rep.l2_weighted / (2 * (pq + 2) * rep.Q))
    upper = 0.5
    if not lower < upper:
        raise InapplicableError("empty positive-energy window")
    rho = lower + position * (upper - lower)
    # rho(A) = A^(p+q) * cN / Q for the unit shape
    amplitude = (rho * rep.Q / cN) ** (1.0 / pq)
    return PositiveEnergyWindow(lower, upper, rho, amplitude)


def thm61_construct(shape: StateVector, params, pot, grid, position: float = 0.5, min_width: float = 1e-3,
                    widen=None, max_retries: int = 5) -> StateVector:
    """At-rest data satisfying the four positive-energy blow-up conditions.

    ``widen(k)`` may supply a wider base shape for retry ``k`` when the
    window is narrower than ``min_width``.
    """
    for attempt in range(max_retries + 1):
        window = thm61_window(shape, params, pot, grid, position)
        if window.upper - window.lower >= min_width:
            break
        if widen is None or attempt == max_retries:
            raise InapplicableError(f"positive-energy window too narrow ({window.upper - window.lower:.3g})")
        shape = widen(attempt + 1)
    return _scale_state(StateVector.at_rest(shape.u, shape.v), window.amplitude)


# -- auxiliary parameters -------------------------------------------------------------


def choose_aux_params(state0: StateVector, E0: float, params: ModelParams, pot: PotentialPair, grid: Grid,
                      regime: str = SECTION5) -> AuxiliaryParams:
    """Pick ``(b, T1)`` for the quadratically-augmented ``G``.

    ``section5`` (negative energy): ``b = -2 E(0)`` and the smallest
    ``T1 >= 1`` making ``G'(0) > 0``.  ``section4``: ``b`` is half the admissible
    maximum of ``(p+q) min m^2 G(0) - 2(p+q+2) E(0) > (p+q+2) b``, with ``G(0)``
    re-evaluated once the chosen ``b, T1`` are known.  Raises
    :class:`InapplicableError` when no admissible pair exists.
    """
    cross0 = cross_integral(state0, params, grid)
    l2w0 = functional_report(state0, params, pot, grid).l2_weighted

    def t1_for(b):
        return max(1.0, (G1_MARGIN - cross0) / b)

    if regime == SECTION5:
        if not E0 < 0:
            raise InapplicableError(f"negative-energy regime needs E(0) < 0, got {E0}")
        b = -2.0 * E0
        return AuxiliaryParams(b, t1_for(b), SECTION5)

    if regime != SECTION4:
        raise ValueError(f"unknown regime {regime!r}")
    pq = params.pq
    mm = params.min_mass_sq

    def surplus(G0):
        return pq * mm * G0 - 2 * (pq + 2) * E0

    b = 0.5 * surplus(l2w0) / (pq + 2)
    if not b > 0:
        raise InapplicableError("(p+q) min m^2 G(0) - 2(p+q+2) E(0) is not positive")
    T1 = t1_for(b)
    # second pass: G(0) now includes b T1^2, which only enlarges the surplus
    G0 = l2w0 + b * T1**2
    Gp0 = 2 * cross0 + 2 * b * T1
    if not (Gp0 > SECTION4_MARGIN and surplus(G0) - (pq + 2) * b > SECTION4_MARGIN):
        raise InapplicableError("section-4 inequalities fail on the verification pass")
    return AuxiliaryParams(b, T1, SECTION4)


# -- classification ---------------------------------------------------------------------


@dataclass
class ClassificationReport:
    E0: float
    I0: float
    J0: float
    cross0: float
    l2w0: float
    threshold6: float
    verdicts: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    tmax_bound: float | None = None
    tmax_regime: str | None = None
    aux: dict | None = None
    d_used: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def classify_initial_data(state0: StateVector, params: ModelParams, pot: PotentialPair, grid: Grid,
                          d: float | None = None) -> ClassificationReport:
    """Evaluate the hypotheses of every blow-up / global-existence criterion.

    Verdicts are ``True``/``False``, or ``None`` (unknown) for the criteria
    that need the ground-state level ``d`` when it is not supplied.  All
    inequalities are strict; the criteria are sufficient conditions only.
    """
    rep = functional_report(state0, params, pot, grid)
    E0, I0, J0 = rep.E, rep.I, rep.J
    cross0 = cross_integral(state0, params, grid)
    l2w0 = rep.l2_weighted
    pq = params.pq
    threshold6 = 2 * (pq + 2) * E0 / (params.min_mass_sq * pq)
    nonzero = bool(np.any(state0.u) or np.any(state0.v))
    energy_scale = 0.5 * rep.kinetic + 0.5 * rep.Q + params.coupling * rep.N
    zero_energy = abs(E0) <= ZERO_ENERGY_RTOL * energy_scale

    report = ClassificationReport(E0, I0, J0, cross0, l2w0, threshold6, d_used=d)
    v = report.verdicts
    v["thm51_negative"] = bool(E0 < 0 and not zero_energy and nonzero)
    v["thm51_zero"] = bool(zero_energy and cross0 >= 0 and nonzero)
    v["thm51"] = v["thm51_negative"] or v["thm51_zero"]
    v["thm61"] = bool(E0 > 0 and I0 < 0 and cross0 >= 0 and l2w0 > threshold6)
    report.margins["thm61"] = {"E0": E0, "minus_I0": -I0, "cross0": cross0, "l2w_minus_threshold": l2w0 - threshold6}
    if d is None:
        v["thm41"] = v["gamma1"] = v["gamma2"] = None
        report.notes.append("ground-state level d not supplied; potential-well verdicts unknown")
    else:
        v["thm41"] = bool(E0 < d and I0 < 0)
        v["gamma1"] = bool(J0 < d and I0 < 0)
        v["gamma2"] = bool(E0 < d and I0 > 0)
        report.margins["thm41"] = {"d_minus_E0": d - E0, "minus_I0": -I0}

    # blow-up time bound, first regime that applies
    candidates = []
    if v["thm51_negative"]:
        candidates.append(SECTION5)
    if v["thm41"]:
        candidates.append(SECTION4)
    if v["thm51_zero"] or v["thm61"]:
        candidates.append("plain")
    for regime in candidates:
        try:
            if regime == "plain":
                aux = None
            else:
                aux = choose_aux_params(state0, E0, params, pot, grid, regime)
            G0, Gp0, _ = g_diagnostics(state0, params, pot, grid, aux, report=rep)
            report.tmax_bound = tmax_bound(G0, Gp0, params)
        except InapplicableError as exc:
            report.notes.append(f"{regime}: {exc}")
            continue
        report.tmax_regime = regime
        report.aux = asdict(aux) if aux is not None else None
        break

    if v.get("thm41"):
        report.notes.extend(_mass_convention_note(E0, l2w0, params))
    return report


def _mass_convention_note(E0, l2w0, params: ModelParams) -> list[str]:
    # The low-energy argument is stated once with min{m1, m2} and once with min{m1^2, m2^2}.
    pq = params.pq
    with_sq = pq * params.min_mass_sq * l2w0 - 2 * (pq + 2) * E0 > 0
    with_lin = pq * min(abs(params.m1), abs(params.m2)) * l2w0 - 2 * (pq + 2) * E0 > 0
    if with_sq != with_lin:
        return [f"section-4 applicability differs between min m^2 ({with_sq}) and min |m| ({with_lin})"]
    return []


# -- detection ------------------------------------------------------------------------


@dataclass
class BlowupDetection:
    g_increasing: bool
    g2_positive: bool
    h_decreasing: bool
    h_concave: bool
    max_h_curvature: float
    t_estimate: float | None
    threshold_crossed: bool
    t_threshold: float | None
    certified: bool
    excluded: bool
    summary: str

    def to_dict(self) -> dict:
        return asdict(self)


def detect_blowup(traj: Trajectory, params: ModelParams, concavity_rtol: float = 1e-8) -> BlowupDetection:
    """Collect the concavity evidence for blow-up from a sampled trajectory.

    Checks, over all finite samples: ``G`` strictly increasing and ``G'' > 0``;
    ``H = G^{-(p+q)/4}`` strictly decreasing with second differences at most
    ``concavity_rtol * |H|``.  The blow-up time estimate is the root of the
    secant of ``H`` through the first and last of the final ``max(5, 10%)``
    samples.  Trajectories that ended ``unstable`` are never certified.
    """
    samples = [s for s in traj.samples if math.isfinite(s.G)]
    if len(samples) < 10:
        raise ValueError(f"need at least 10 samples, got {len(samples)}")
    t = np.array([s.t for s in samples])
    G = np.array([s.G for s in samples])
    G2 = np.array([s.Gsecond for s in samples])
    H = G ** (-params.pq / 4.0)

    g_inc = bool(np.all(np.diff(G) > 0))
    g2_pos = bool(np.all(G2 > 0))
    h_dec = bool(np.all(np.diff(H) < 0))
    curv = H[2:] - 2 * H[1:-1] + H[:-2]
    rel = curv / np.abs(H[1:-1])
    max_curv = float(np.max(rel))
    h_conc = bool(max_curv <= concavity_rtol)

    tail = max(5, math.ceil(0.1 * len(samples)))
    ta, tb, Ha, Hb = t[-tail], t[-1], H[-tail], H[-1]
    t_est = None
    if Ha > Hb:
        t_est = float(tb + Hb * (tb - ta) / (Ha - Hb))

    crossed = traj.terminal in (BLOWUP_DETECTED, OVERFLOW)
    excluded = traj.terminal == UNSTABLE
    certified = (not excluded) and crossed and g_inc and g2_pos and h_dec and h_conc
    if excluded:
        summary = "run ended unstable; excluded from certification"
    elif certified:
        summary = f"consistent with finite-time blow-up (estimated time {t_est:.6g})"
    else:
        summary = "no blow-up signature"
    return BlowupDetection(g_inc, g2_pos, h_dec, h_conc, max_curv, t_est, crossed, traj.t_terminal,
                           certified, excluded, summary)
