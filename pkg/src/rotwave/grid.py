"""Truncated box grids and Fourier spectral operators.

The continuum problem lives on R^N.  Here it is truncated to the centered box
``[-L_1, L_1) x ... x [-L_N, L_N)`` with periodic spectral differentiation.
Multiplication by coordinates (potentials, vector potential, ``L_z``) is done
pointwise in physical space; the resulting periodicity error is controlled by
the decay of the states, which is monitored through :func:`boundary_mass`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "Grid",
    "ComplexField",
    "NonFiniteFieldError",
    "build_grid",
    "fourier_derivative",
    "magnetic_gradient",
    "apply_angular_operator",
    "integrate",
    "inner",
    "boundary_mass",
    "dealias",
    "fourier_shift",
    "random_smooth_field",
]

# Thread count for transforms.  One worker keeps reductions bit-reproducible.
FFT_WORKERS = int(os.environ.get("ROTWAVE_FFT_WORKERS", "1"))


def fftn(a, axes=None):
    return sfft.fftn(a, axes=axes, workers=FFT_WORKERS)


def ifftn(a, axes=None):
    return sfft.ifftn(a, axes=axes, workers=FFT_WORKERS)


def fft1(a, axis):
    return sfft.fft(a, axis=axis, workers=FFT_WORKERS)


def ifft1(a, axis):
    return sfft.ifft(a, axis=axis, workers=FFT_WORKERS)


class NonFiniteFieldError(FloatingPointError):
    """Raised when a field acquires NaN or Inf entries."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Box half-widths and point counts per axis.

    The box along axis ``j`` is ``[-L_j, L_j)`` sampled with ``n_j`` points,
    ``n_j`` a power of two and at least 8.
    """

    dim: int
    half_widths: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        half_widths = tuple(float(v) for v in np.broadcast_to(self.half_widths, (self.dim,)))
        points = tuple(int(v) for v in np.broadcast_to(self.points, (self.dim,)))
        object.__setattr__(self, "half_widths", half_widths)
        object.__setattr__(self, "points", points)
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        for j, (L, n) in enumerate(zip(half_widths, points)):
            if not L > 0:
                raise ValueError(f"half_widths[{j}] must be positive, got {L}")
            if n < 8 or not _is_power_of_two(n):
                raise ValueError(f"points[{j}] must be a power of two >= 8, got {n}")

    @classmethod
    def uniform(cls, dim: int, half_width: float, points: int) -> "GridSpec":
        return cls(dim, (half_width,) * dim, (points,) * dim)


class Grid:
    """Physical coordinates, wavenumbers and quadrature weight of a box grid."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.spacing = tuple(2.0 * L / n for L, n in zip(spec.half_widths, spec.points))
        self.coords = tuple(
            -L + h * np.arange(n) for L, n, h in zip(spec.half_widths, spec.points, self.spacing)
        )
        self.wavenumbers = tuple(
            2.0 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(spec.points, self.spacing)
        )
        self.quad_weight = float(np.prod(self.spacing))

    def __repr__(self):
        return f"Grid(dim={self.dim}, half_widths={self.half_widths}, points={self.shape})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.points

    @property
    def half_widths(self) -> tuple[float, ...]:
        return self.spec.half_widths

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def _bcast(self, vec: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.dim
        shape[axis] = vec.size
        return vec.reshape(shape)

    def x(self, axis: int) -> np.ndarray:
        """Coordinate along ``axis``, shaped to broadcast against fields."""
        return self._bcast(self.coords[axis], axis)

    def k(self, axis: int) -> np.ndarray:
        """Wavenumber along ``axis``, shaped to broadcast against fields."""
        return self._bcast(self.wavenumbers[axis], axis)

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(self.k(j) ** 2 for j in range(self.dim))

    @cached_property
    def r_squared(self) -> np.ndarray:
        return sum(self.x(j) ** 2 for j in range(self.dim))

    def zeros(self) -> "ComplexField":
        return ComplexField(self, np.zeros(self.shape, dtype=np.complex128))

    def field(self, values) -> "ComplexField":
        return ComplexField(self, np.broadcast_to(values, self.shape))


def build_grid(spec: GridSpec) -> Grid:
    """Build the grid described by ``spec``.

    Coordinates are ``x_j = -L_j + k h_j`` with ``h_j = 2 L_j / n_j``; the
    wavenumbers follow FFT ordering and include the Nyquist mode ``-pi/h_j``.
    """
    return Grid(spec)


class ComplexField:
    """Complex amplitudes sampled on a :class:`Grid`.

    Values are stored read-only, so a field can be shared freely.  Every
    construction checks that all entries are finite.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=np.complex128)
        if vals.shape != grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {grid.shape}")
        if not np.isfinite(vals).all():
            raise NonFiniteFieldError("field contains non-finite entries")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals

    def __repr__(self):
        return f"ComplexField({self.grid!r}, mass={self.mass():.6g})"

    def with_values(self, values) -> "ComplexField":
        return ComplexField(self.grid, values)

    def mass(self) -> float:
        return integrate(np.abs(self.values) ** 2, self.grid)

    def norm(self) -> float:
        return float(np.sqrt(self.mass()))

    def conj(self) -> "ComplexField":
        return self.with_values(np.conj(self.values))

    def normalized(self, mass: float = 1.0) -> "ComplexField":
        return self.with_values(self.values * np.sqrt(mass / self.mass()))

    def _other(self, other):
        if isinstance(other, ComplexField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_values(self.values / scalar)

    def __neg__(self):
        return self.with_values(-self.values)


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, ComplexField) else np.asarray(f)


def derivative_values(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Spectral derivative of a raw value array along one axis."""
    return ifft1(1j * grid.wavenumbers[axis][_axis_shape(grid, axis)] * fft1(values, axis), axis)


def _axis_shape(grid: Grid, axis: int):
    idx = [np.newaxis] * grid.dim
    idx[axis] = slice(None)
    return tuple(idx)


def gradient_values(values: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """All spectral partial derivatives from a single forward transform."""
    spec = fftn(values)
    return [ifftn(1j * grid.k(j) * spec) for j in range(grid.dim)]


def fourier_derivative(f: ComplexField, axis: int) -> ComplexField:
    """Spectral derivative ``d f / d x_axis``.

    Exact for fields band-limited to the grid.  The multiplier ``i k`` is
    purely imaginary, so the discrete operator is anti-self-adjoint.
    """
    if not 0 <= axis < f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {f.grid.dim}")
    return f.with_values(derivative_values(f.values, f.grid, axis))


def vector_potential(grid: Grid, gamma: float) -> list[np.ndarray]:
    """Components of ``A(x) = gamma (-x_2, x_1, 0, ..., 0)``, broadcastable."""
    comps = [-gamma * grid.x(1), gamma * grid.x(0)]
    comps += [np.zeros(1).reshape([1] * grid.dim)] * (grid.dim - 2)
    return comps


def magnetic_gradient_values(values: np.ndarray, grid: Grid, gamma: float) -> list[np.ndarray]:
    grads = gradient_values(values, grid)
    A = vector_potential(grid, gamma)
    grads[0] = grads[0] - 1j * A[0] * values
    grads[1] = grads[1] - 1j * A[1] * values
    return grads


def magnetic_gradient(f: ComplexField, gamma: float) -> list[ComplexField]:
    """Components of ``(grad - iA) f`` with ``A = gamma (-x_2, x_1, 0, ...)``.

    Components beyond the first two are plain derivatives.
    """
    return [f.with_values(v) for v in magnetic_gradient_values(f.values, f.grid, gamma)]


def angular_values(values: np.ndarray, grid: Grid, grads=None) -> np.ndarray:
    if grads is None:
        d1 = derivative_values(values, grid, 0)
        d2 = derivative_values(values, grid, 1)
    else:
        d1, d2 = grads[0], grads[1]
    return 1j * (grid.x(1) * d1 - grid.x(0) * d2)


def apply_angular_operator(f: ComplexField) -> ComplexField:
    """``L_z f = i (x_2 d_1 f - x_1 d_2 f)``; derivatives are spectral."""
    return f.with_values(angular_values(f.values, f.grid))


def integrate(density, grid: Grid) -> float:
    """Rectangle-rule integral of a real density (cell volume times sum)."""
    return float(np.sum(np.real(_values(density))) * grid.quad_weight)


def inner(f, g, grid: Grid | None = None) -> complex:
    """``<f, g> = integral of conj(f) g``."""
    if grid is None:
        grid = f.grid
    return complex(np.vdot(_values(f), _values(g)) * grid.quad_weight)


def boundary_mass(f, grid: Grid | None = None, shell: float = 0.1) -> float:
    """Fraction of the mass sitting in the outer ``shell`` of the box.

    A point belongs to the shell when ``|x_j| > (1 - shell) L_j`` for some axis.
    """
    if grid is None:
        grid = f.grid
    dens = np.abs(_values(f)) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    mask = np.zeros(grid.shape, dtype=bool)
    for j, L in enumerate(grid.half_widths):
        mask |= np.abs(grid.x(j)) > (1.0 - shell) * L
    return float(dens[mask].sum() / total)


def dealias(f: ComplexField, fraction: float = 2.0 / 3.0) -> ComplexField:
    """Zero every Fourier mode with ``|k_j| > fraction * k_nyquist`` on some axis."""
    return f.with_values(dealias_values(f.values, f.grid, fraction))


def band_mask(grid: Grid, fraction: float) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for j, h in enumerate(grid.spacing):
        mask &= np.abs(grid.k(j)) <= fraction * np.pi / h
    return mask


def dealias_values(values: np.ndarray, grid: Grid, fraction: float = 2.0 / 3.0) -> np.ndarray:
    return ifftn(fftn(values) * band_mask(grid, fraction))


def fourier_shift(values: np.ndarray, grid: Grid, shift) -> np.ndarray:
    """Sample ``f(x + shift)`` by Fourier phase shifting.

    ``shift`` may have fewer entries than the dimension; missing ones are 0.
    """
    shift = list(shift) + [0.0] * (grid.dim - len(shift))
    out = np.asarray(values)
    for j, s in enumerate(shift):
        if s != 0.0:
            phase = np.exp(1j * grid.wavenumbers[j] * s)[_axis_shape(grid, j)]
            out = ifft1(phase * fft1(out, j), j)
    return out


def random_smooth_field(
    grid: Grid,
    rng: np.random.Generator,
    band: float = 0.25,
    widths=None,
    center=None,
) -> ComplexField:
    """Band-limited complex Gaussian random field under a Gaussian envelope.

    Modes with ``|k_j| > band * k_nyquist`` are removed before and after the
    envelope is applied, so the result stays band-limited.  ``widths`` sets the
    envelope standard deviation per axis (default: a quarter of the box).
    """
    if widths is None:
        widths = [L / 4.0 for L in grid.half_widths]
    if center is None:
        center = [0.0] * grid.dim
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    mask = band_mask(grid, band)
    noise = ifftn(fftn(noise) * mask)
    env = np.ones(grid.shape)
    for j in range(grid.dim):
        env = env * np.exp(-((grid.x(j) - center[j]) ** 2) / (2.0 * widths[j] ** 2))
    vals = ifftn(fftn(noise * env) * mask)
    return ComplexField(grid, vals)
