"""Model parameters, potentials, state vectors and the evolution right-hand side.

The dynamics are integrated in the weighted form

    alpha (u_tt - Lap u + m1^2 u + K1 u) = a2' (p+1) |v|^{q+1} |u|^{p-1} u
          v_tt - Lap v + m2^2 v + K2 v   = a2' (q+1) |u|^{p+1} |v|^{q-1} v

with alpha = a2 (p+1) / (a1 (q+1)) and a2' = a2 / (q+1), which is the original
coupled system with its coefficients regrouped so that a single energy is
conserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FieldError, ParameterError
from .grid import Grid, load_field


@dataclass(frozen=True)
class ExponentVerdict:
    valid: bool
    ground_state_ok: bool
    reason: str

    def __bool__(self) -> bool:
        return self.valid


def validate_exponents(p: float, q: float, n: int) -> ExponentVerdict:
    """Check the admissible exponent range for dimension ``n``.

    ``valid`` covers the local theory: any ``p, q > 1`` for ``n <= 2`` and the
    two-sided subcritical conditions for ``n >= 3``.  ``ground_state_ok`` is the
    narrower window in which a ground state is guaranteed (``n = 2``: any
    ``p, q > 1``; ``n = 3``: ``1 < p, q < 2/(n-2)``).
    """
    if not (math.isfinite(p) and math.isfinite(q)):
        raise ParameterError("exponents must be finite")
    if n < 1:
        raise ParameterError(f"dimension must be positive, got {n}")
    if p <= 1 or q <= 1:
        return ExponentVerdict(False, False, f"need p > 1 and q > 1, got p={p}, q={q}")

    if n <= 2:
        valid, reason = True, "1 < p, q < inf for n <= 2"
    else:
        crit = (n + 2) / (n - 2)
        cond_q = (q < p + 1 < crit) or (p + 1 < q < crit)
        cond_p = (p < q + 1 < crit) or (q + 1 < p < crit)
        valid = cond_q and cond_p
        if valid:
            reason = f"subcritical coupling conditions hold (critical exponent {crit:g})"
        elif not cond_q:
            reason = f"need q < p+1 < {crit:g} or p+1 < q < {crit:g}"
        else:
            reason = f"need p < q+1 < {crit:g} or q+1 < p < {crit:g}"

    if n == 2:
        gs_ok = True
    elif n == 3:
        gs_ok = p < 2 / (n - 2) and q < 2 / (n - 2)
    else:
        gs_ok = False
    return ExponentVerdict(valid, valid and gs_ok, reason)


@dataclass(frozen=True)
class ModelParams:
    """Masses, couplings and exponents of the coupled system.

    ``outside_theorem_range`` relaxes the exponent requirement from ``p, q > 1``
    to ``p, q > 0`` and skips the dimension conditions; it exists for oracle
    checks such as the cubic ``sech`` profile.  ``linear_test_mode`` zeroes the
    coupling (integrator verification only).
    """

    m1: float
    m2: float
    a1: float
    a2: float
    p: float
    q: float
    n: int
    linear_test_mode: bool = False
    outside_theorem_range: bool = False

    def __post_init__(self):
        for name in ("m1", "m2", "a1", "a2", "p", "q"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"model.{name} must be finite, got {value}")
        if self.m1 == 0 or self.m2 == 0:
            raise ParameterError("masses must be nonzero")
        if self.a1 <= 0 or self.a2 <= 0:
            raise ParameterError("coupling constants a1, a2 must be positive")
        if self.outside_theorem_range:
            if self.p <= 0 or self.q <= 0:
                raise ParameterError("p and q must be positive")
        else:
            verdict = validate_exponents(self.p, self.q, self.n)
            if not verdict.valid:
                raise ParameterError(f"inadmissible exponents: {verdict.reason}")

    @property
    def alpha(self) -> float:
        return self.a2 * (self.p + 1) / (self.a1 * (self.q + 1))

    @property
    def a2prime(self) -> float:
        return self.a2 / (self.q + 1)

    @property
    def coupling(self) -> float:
        """Prefactor of the coupling integral in the energy (zero in linear mode)."""
        return 0.0 if self.linear_test_mode else self.a2prime

    @property
    def u_force(self) -> float:
        """Coefficient a2'(p+1)/alpha of the u-equation nonlinearity (equals a1)."""
        return 0.0 if self.linear_test_mode else self.a2prime * (self.p + 1) / self.alpha

    @property
    def v_force(self) -> float:
        """Coefficient a2'(q+1) of the v-equation nonlinearity (equals a2)."""
        return 0.0 if self.linear_test_mode else self.a2prime * (self.q + 1)

    @property
    def pq(self) -> float:
        return self.p + self.q

    @property
    def min_mass_sq(self) -> float:
        return min(self.m1**2, self.m2**2)

    def exponent_verdict(self) -> ExponentVerdict:
        return validate_exponents(self.p, self.q, self.n)


@dataclass(frozen=True)
class PotentialPair:
    """Nonnegative potentials ``K1``, ``K2`` sampled on a grid."""

    K1: np.ndarray
    K2: np.ndarray
    kind: str = "zero"

    def __post_init__(self):
        for name in ("K1", "K2"):
            K = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(K)):
                raise FieldError(f"potential {name} is not finite")
            if np.any(K < 0):
                raise FieldError(f"potential {name} must be nonnegative (min {K.min():g})")
            K = K.copy()
            K.flags.writeable = False
            object.__setattr__(self, name, K)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.K1) or np.any(self.K2))

    @property
    def sup(self) -> float:
        return float(max(self.K1.max(), self.K2.max()))

    @classmethod
    def zero(cls, grid: Grid) -> PotentialPair:
        return cls(grid.zeros(), grid.zeros(), "zero")

    @classmethod
    def harmonic(cls, grid: Grid, strength: float = 1.0, strength2: float | None = None) -> PotentialPair:
        r2 = grid.radius_sq()
        s2 = strength if strength2 is None else strength2
        return cls(strength * r2, s2 * r2, "harmonic")

    @classmethod
    def gaussian_well(cls, grid: Grid, depth: float = 1.0, width: float = 1.0) -> PotentialPair:
        # depth * (1 - exp(-|x|^2/w^2)): a well at the origin that stays nonnegative
        K = depth * (1.0 - np.exp(-grid.radius_sq() / width**2))
        return cls(K, K.copy(), "gaussian_well")

    @classmethod
    def from_files(cls, grid: Grid, path1: str | Path, path2: str | Path | None = None) -> PotentialPair:
        fields = []
        for path in (path1, path2 if path2 is not None else path1):
            g, K = load_field(path)
            if g.points != grid.points or g.lengths != grid.lengths:
                raise FieldError(f"potential file {path} is on grid {g.points}/{g.lengths}, expected {grid.points}/{grid.lengths}")
            fields.append(K)
        return cls(fields[0], fields[1], "file")


@dataclass(frozen=True)
class StateVector:
    """Positions and velocities of both fields at time ``t``."""

    u: np.ndarray
    ut: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    t: float = 0.0
    overflowed: bool = False
    _grid_shape: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        shapes = {np.shape(getattr(self, name)) for name in ("u", "ut", "v", "vt")}
        if len(shapes) != 1:
            raise FieldError(f"state components live on different grids: {shapes}")
        object.__setattr__(self, "_grid_shape", shapes.pop())

    @classmethod
    def at_rest(cls, u: np.ndarray, v: np.ndarray, t: float = 0.0) -> StateVector:
        return cls(np.asarray(u, float), np.zeros_like(u, dtype=float), np.asarray(v, float), np.zeros_like(v, dtype=float), t)

    @classmethod
    def zeros(cls, grid: Grid) -> StateVector:
        return cls(grid.zeros(), grid.zeros(), grid.zeros(), grid.zeros())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, n))) for n in ("u", "ut", "v", "vt"))

    def sup_norms(self) -> tuple[float, float]:
        return float(np.max(np.abs(self.u))), float(np.max(np.abs(self.v)))

    def negated(self) -> StateVector:
        return replace(self, u=-self.u, ut=-self.ut, v=-self.v, vt=-self.vt)


def signed_power(x: np.ndarray, p: float) -> np.ndarray:
    """``|x|^{p-1} x`` computed as ``sign(x) |x|^p`` (zero at the origin)."""
    return np.sign(x) * np.abs(x) ** p


def coupling_forces(u: np.ndarray, v: np.ndarray, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear terms ``(|v|^{q+1}|u|^{p-1}u, |u|^{p+1}|v|^{q-1}v)`` without coefficients."""
    au, av = np.abs(u), np.abs(v)
    with np.errstate(over="ignore", invalid="ignore"):
        fu = av ** (params.q + 1) * signed_power(u, params.p)
        fv = au ** (params.p + 1) * signed_power(v, params.q)
    return fu, fv


def acceleration(state: StateVector, params: ModelParams, pot: PotentialPair, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(u_tt, v_tt)`` for the given state.

    Overflow in the power terms is not raised; the returned arrays then carry
    non-finite entries, which the integrator turns into an overflow flag.
    """
    u, v = state.u, state.v
    fu, fv = coupling_forces(u, v, params)
    with np.errstate(over="ignore", invalid="ignore"):
        utt = grid.laplacian(u) - (params.m1**2 + pot.K1) * u
        vtt = grid.laplacian(v) - (params.m2**2 + pot.K2) * v
        if not params.linear_test_mode:
            utt += params.u_force * fu
            vtt += params.v_force * fv
    return utt, vtt
