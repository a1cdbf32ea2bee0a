"""Periodic box discretisation with spectral operators and quadrature.

Fields are plain ``numpy`` arrays of shape ``grid.shape`` (row-major over the
axes).  A field "belongs" to a grid when its shape matches; every operator
checks this before doing any work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FieldError

# Default memory budget, in grid points (2**24 doubles is 128 MiB per field).
DEFAULT_MAX_POINTS = 2**24

_HEADER_TAG = "KGELAB-FIELD v1"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the box ``prod_i [-L_i/2, L_i/2)``.

    Parameters
    ----------
    points : tuple of int
        Points per axis; each must be even and at least 8.
    lengths : tuple of float
        Box extent per axis.
    max_points : int
        Memory budget for the total number of grid points.
    """

    points: tuple[int, ...]
    lengths: tuple[float, ...]
    max_points: int = DEFAULT_MAX_POINTS
    _k2: np.ndarray = field(init=False, repr=False, compare=False)
    _kvec: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)
    _kderiv: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)
    _rweights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = tuple(int(n) for n in self.points)
        lengths = tuple(float(L) for L in self.lengths)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "lengths", lengths)
        if len(points) not in (1, 2, 3) or len(lengths) != len(points):
            raise ValueError(f"grid must be 1-, 2- or 3-dimensional, got points={points}, lengths={lengths}")
        for n in points:
            if n < 8 or n % 2:
                raise ValueError(f"points per axis must be even and >= 8, got {n}")
        for L in lengths:
            if not (L > 0 and math.isfinite(L)):
                raise ValueError(f"box lengths must be positive, got {L}")
        if math.prod(points) > self.max_points:
            raise ValueError(f"{math.prod(points)} grid points exceed the memory budget of {self.max_points}")

        # Wavenumbers laid out for rfftn: full axes first, half axis last.
        ks = []
        for axis, (n, L) in enumerate(zip(points, lengths)):
            if axis == len(points) - 1:
                k = 2 * np.pi * np.fft.rfftfreq(n, d=L / n)
            else:
                k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
            shape = [1] * len(points)
            shape[axis] = k.size
            ks.append(k.reshape(shape))
        k2 = sum(k**2 for k in ks)
        object.__setattr__(self, "_kvec", tuple(ks))
        # Odd derivatives cannot represent the Nyquist coefficient of a real field.
        kderiv = []
        for k, n in zip(ks, points):
            kd = k.copy()
            kd.reshape(-1)[n // 2] = 0.0
            kderiv.append(kd)
        object.__setattr__(self, "_kderiv", tuple(kderiv))
        object.__setattr__(self, "_k2", np.asarray(k2))

        # Hermitian multiplicity of each rfft coefficient (0 and Nyquist counted once).
        n_last = points[-1]
        w = np.full(n_last // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        object.__setattr__(self, "_rweights", w)

    @property
    def _axes(self) -> tuple[int, ...]:
        return tuple(range(len(self.points)))

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def size(self) -> int:
        return math.prod(self.points)

    @property
    def k2(self) -> np.ndarray:
        """``|k|^2`` on the rfft layout (read-only view)."""
        view = self._k2.view()
        view.flags.writeable = False
        return view

    @property
    def k_max_sq(self) -> float:
        """Largest resolved ``|k|^2``, i.e. ``sum_j (pi/h_j)^2``."""
        return sum((math.pi / h) ** 2 for h in self.spacing)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Broadcastable 1-D coordinate arrays, one per axis."""
        coords = []
        for axis, (n, L) in enumerate(zip(self.points, self.lengths)):
            x = -L / 2 + (L / n) * np.arange(n)
            shape = [1] * self.dim
            shape[axis] = n
            coords.append(x.reshape(shape))
        return tuple(coords)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.broadcast_to(x, self.shape) for x in self.coordinates())

    def radius_sq(self) -> np.ndarray:
        """``|x|^2`` sampled on the grid."""
        return np.broadcast_to(sum(x**2 for x in self.coordinates()), self.shape).copy()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check(self, f: np.ndarray, *, finite: bool = True) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise FieldError(f"field of shape {f.shape} does not live on grid {self.shape}")
        if finite and not np.all(np.isfinite(f)):
            raise FieldError("field contains non-finite values")
        return f

    # -- spectral operators ----------------------------------------------------

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Spectral Laplacian: multiply mode ``k`` by ``-|k|^2``."""
        f = self.check(f)
        fh = np.fft.rfftn(f)
        fh *= -self._k2
        return np.fft.irfftn(fh, s=self.shape, axes=self._axes)

    def solve_helmholtz(self, f: np.ndarray, shift: float) -> np.ndarray:
        """Return ``(-Delta + shift)^{-1} f`` for ``shift > 0``."""
        if not shift > 0:
            raise ValueError("Helmholtz shift must be positive")
        fh = np.fft.rfftn(self.check(f))
        fh /= self._k2 + shift
        return np.fft.irfftn(fh, s=self.shape, axes=self._axes)

    def gradient(self, f: np.ndarray) -> tuple[np.ndarray, ...]:
        """Spectral partial derivatives (Nyquist modes are dropped)."""
        fh = np.fft.rfftn(self.check(f))
        return tuple(np.fft.irfftn(fh * (1j * k), s=self.shape, axes=self._axes) for k in self._kderiv)

    # -- quadrature --------------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        """Periodic rectangle rule.  Non-finite fields integrate to ``+inf``."""
        f = self.check(f, finite=False)
        if not np.all(np.isfinite(f)):
            return math.inf
        return float(self.cell_volume * np.sum(f))

    def gradient_norm_sq(self, f: np.ndarray) -> float:
        """``int |grad f|^2 dx`` evaluated in Fourier space (Parseval)."""
        f = self.check(f, finite=False)
        if not np.all(np.isfinite(f)):
            return math.inf
        fh = np.fft.rfftn(f)
        power = (fh.real**2 + fh.imag**2) * self._k2 * self._rweights
        return float(self.cell_volume * np.sum(power) / self.size)

    def l2_sq(self, f: np.ndarray) -> float:
        f = self.check(f, finite=False)
        with np.errstate(over="ignore", invalid="ignore"):
            return self.integrate(f * f)

    # -- snapshot I/O ------------------------------------------------------------

    def header(self) -> str:
        pts = ",".join(str(n) for n in self.points)
        lens = ",".join(repr(L) for L in self.lengths)
        return f"{_HEADER_TAG}; dim={self.dim}; points={pts}; lengths={lens}; encoding=f64le"


def save_field(path: str | Path, grid: Grid, f: np.ndarray) -> None:
    """Write a field snapshot: one header line, then raw little-endian float64."""
    f = grid.check(f, finite=False)
    with open(path, "wb") as fh:
        fh.write((grid.header() + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes(order="C"))


def load_field(path: str | Path) -> tuple[Grid, np.ndarray]:
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii").strip()
        payload = fh.read()
    parts = [p.strip() for p in line.split(";")]
    if not parts or parts[0] != _HEADER_TAG:
        raise FieldError(f"{path}: not a KGELAB-FIELD v1 snapshot")
    meta = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        meta[key.strip()] = value.strip()
    try:
        dim = int(meta["dim"])
        points = tuple(int(x) for x in meta["points"].split(","))
        lengths = tuple(float(x) for x in meta["lengths"].split(","))
        encoding = meta["encoding"]
    except (KeyError, ValueError) as exc:
        raise FieldError(f"{path}: malformed header {line!r}") from exc
    if encoding != "f64le" or len(points) != dim:
        raise FieldError(f"{path}: unsupported header {line!r}")
    grid = Grid(points, lengths)
    if len(payload) != 8 * grid.size:
        raise FieldError(f"{path}: expected {grid.size} values, found {len(payload) // 8}")
    values = np.frombuffer(payload, dtype="<f8").astype(float).reshape(grid.shape)
    return grid, values
