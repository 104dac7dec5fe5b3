"""Mass, energies, norms and inequality checks for the critical-rotation model.

With ``A(x) = gamma (-x_2, x_1, 0, ..., 0)`` and partial trap
``V_gamma = 1/2 sum_{j>=3} gamma_j^2 x_j^2`` the rotating energy at
``Omega = gamma`` coincides with the magnetic energy

    E_gamma(f) = 1/2 ||(grad - iA) f||^2 + int V_gamma |f|^2 - 2/(p+1) ||f||_{p+1}^{p+1}.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .grid import (
    ComplexField,
    Grid,
    NonFiniteFieldError,
    derivative_values,
    fftn,
    fourier_shift,
    ifftn,
    integrate,
    vector_potential,
)

__all__ = [
    "ModelParams",
    "EnergyBreakdown",
    "NormEquivalenceConstants",
    "DiamagneticReport",
    "evaluate",
    "sigma_gamma_norm",
    "sigma_gamma_inner",
    "check_diamagnetic",
    "norm_equivalence_constants",
    "symmetry_distance",
    "gauge_translate",
    "density_centroid",
    "ground_gaussian",
    "magnetic_hamiltonian",
    "full_potential",
    "partial_potential",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the model.

    Parameters
    ----------
    dim : int
        Space dimension N (2 or 3).
    p : float
        Nonlinearity exponent, ``|u|^{p-1} u``.
    omega : float
        Rotation speed.
    gamma_perp : float
        Planar trap frequency ``gamma = gamma_1``.
    gamma_rest : tuple of float
        Frequencies ``gamma_3, ..., gamma_N``.
    interaction_on : bool
        Switch for the focusing nonlinearity.
    gamma_perp2 : float, optional
        Second planar frequency ``gamma_2`` for anisotropic traps; only the
        dynamics supports it, and then requires ``omega < min(gamma_1, gamma_2)``.
    """

    dim: int
    p: float
    omega: float
    gamma_perp: float = 1.0
    gamma_rest: tuple[float, ...] = ()
    interaction_on: bool = True
    gamma_perp2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "gamma_rest", tuple(float(g) for g in self.gamma_rest))
        N = self.dim
        if N not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {N}")
        if len(self.gamma_rest) != N - 2:
            raise ValueError(f"gamma_rest needs {N - 2} entries for dim={N}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if N >= 3 and not self.p < 1 + 4 / (N - 2):
            raise ValueError(f"p must be below {1 + 4 / (N - 2)} for dim={N}, got {self.p}")
        gams = (self.gamma_perp, self.gamma_2, *self.gamma_rest)
        if min(gams) <= 0:
            raise ValueError("all trap frequencies must be positive")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if self.isotropic:
            if self.omega > self.gamma_perp * (1 + 1e-14):
                raise ValueError(f"omega={self.omega} exceeds gamma={self.gamma_perp}")
        elif not self.omega < min(self.gamma_perp, self.gamma_2):
            raise ValueError("anisotropic planar trap requires omega < min(gamma_1, gamma_2)")

    @property
    def gamma_2(self) -> float:
        return self.gamma_perp if self.gamma_perp2 is None else float(self.gamma_perp2)

    @property
    def isotropic(self) -> bool:
        return self.gamma_perp2 is None or self.gamma_perp2 == self.gamma_perp

    @property
    def critical(self) -> bool:
        return self.isotropic and self.omega == self.gamma_perp

    @property
    def gammas(self) -> tuple[float, ...]:
        return (self.gamma_perp, self.gamma_2, *self.gamma_rest)

    @property
    def omega0(self) -> float:
        """Bottom of the spectrum of the magnetic harmonic operator, 1/2 sum gamma_j."""
        return 0.5 * sum(self.gammas)

    @property
    def mass_critical_p(self) -> float:
        return 1.0 + 4.0 / self.dim

    @property
    def regime(self) -> str:
        pc = self.mass_critical_p
        if np.isclose(self.p, pc, rtol=0, atol=1e-12):
            return "critical"
        return "subcritical" if self.p < pc else "supercritical"

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)


def _require_isotropic(params: ModelParams):
    if not params.isotropic:
        raise ValueError("the magnetic formulation needs gamma_1 = gamma_2")


def partial_potential(grid: Grid, params: ModelParams) -> np.ndarray:
    """``V_gamma = 1/2 sum_{j>=3} gamma_j^2 x_j^2`` (broadcastable array)."""
    V = np.zeros([1] * grid.dim)
    for j, g in enumerate(params.gamma_rest, start=2):
        V = V + 0.5 * g**2 * grid.x(j) ** 2
    return V


def full_potential(grid: Grid, params: ModelParams) -> np.ndarray:
    """Full trap ``V = 1/2 sum_j gamma_j^2 x_j^2``."""
    V = 0.5 * params.gamma_perp**2 * grid.x(0) ** 2 + 0.5 * params.gamma_2**2 * grid.x(1) ** 2
    return V + partial_potential(grid, params)


def ground_gaussian(grid: Grid, params: ModelParams, mass: float = 1.0) -> ComplexField:
    """Ground state ``Phi`` of ``-1/2 Delta + V``, scaled to the given mass."""
    vals = np.ones(grid.shape)
    for j, g in enumerate(params.gammas):
        vals = vals * (g / np.pi) ** 0.25 * np.exp(-0.5 * g * grid.x(j) ** 2)
    return ComplexField(grid, np.sqrt(mass) * vals)


def _check_grid(f: ComplexField, params: ModelParams):
    if f.grid.dim != params.dim:
        raise ValueError(f"field has dim {f.grid.dim}, params have dim {params.dim}")


def magnetic_hamiltonian(values: np.ndarray, grid: Grid, params: ModelParams) -> np.ndarray:
    """Apply ``H = -1/2 (grad - iA)^2 + V_gamma``.

    Expanded as ``-1/2 Delta + i A.grad + 1/2 |A|^2 + V_gamma`` (``div A = 0``).
    The discrete operator is Hermitian and ``<f, H f>`` equals
    ``1/2 ||(grad - iA) f||^2 + int V_gamma |f|^2`` to rounding.
    """
    g = params.gamma_perp
    spec = fftn(values)
    lap = ifftn(-grid.k_squared * spec)
    d1 = ifftn(1j * grid.k(0) * spec)
    d2 = ifftn(1j * grid.k(1) * spec)
    x1, x2 = grid.x(0), grid.x(1)
    out = -0.5 * lap + 1j * g * (x1 * d2 - x2 * d1)
    out += (0.5 * g**2 * (x1**2 + x2**2) + partial_potential(grid, params)) * values
    return out


@dataclass(frozen=True)
class EnergyBreakdown:
    """Itemized functional values of a single field."""

    mass: float
    kinetic: float
    magnetic_kinetic: float
    potential_full: float
    potential_partial: float
    interaction: float
    angular: float
    H_gamma: float
    E_rot: float
    E_mag: float
    angular_im_residual: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _gradients(values, grid):
    spec = fftn(values)
    return [ifftn(1j * grid.k(j) * spec) for j in range(grid.dim)]


def evaluate(f: ComplexField, params: ModelParams) -> EnergyBreakdown:
    """Evaluate every conserved quantity and energy of ``f``.

    The angular term ``L_Omega = Omega int conj(f) L_z f`` is returned as a real
    number; the discarded imaginary part is kept as ``angular_im_residual``.

    Raises
    ------
    NonFiniteFieldError
        If any result is not finite.
    """
    _check_grid(f, params)
    grid, u = f.grid, f.values
    dens = np.abs(u) ** 2
    grads = _gradients(u, grid)
    mass = integrate(dens, grid)
    kinetic = 0.5 * sum(integrate(np.abs(d) ** 2, grid) for d in grads)
    A = vector_potential(grid, params.gamma_perp)
    mag = 0.5 * sum(integrate(np.abs(grads[j] - 1j * A[j] * u) ** 2, grid) for j in range(grid.dim))
    vfull = integrate(full_potential(grid, params) * dens, grid)
    vpart = integrate(partial_potential(grid, params) * dens, grid)
    if params.interaction_on:
        inter = 2.0 / (params.p + 1) * integrate(dens ** ((params.p + 1) / 2), grid)
    else:
        inter = 0.0
    Lz = 1j * (grid.x(1) * grads[0] - grid.x(0) * grads[1])
    ang_c = params.omega * np.vdot(u, Lz) * grid.quad_weight
    angular = float(ang_c.real)
    out = EnergyBreakdown(
        mass=mass,
        kinetic=kinetic,
        magnetic_kinetic=mag,
        potential_full=vfull,
        potential_partial=vpart,
        interaction=inter,
        angular=angular,
        H_gamma=2.0 * mag + 2.0 * vpart,
        E_rot=kinetic + vfull - angular - inter,
        E_mag=mag + vpart - inter,
        angular_im_residual=abs(float(ang_c.imag)),
    )
    if not all(np.isfinite(v) for v in asdict(out).values()):
        raise NonFiniteFieldError("non-finite functional value (boundary contamination?)")
    return out


def sigma_gamma_inner(f: ComplexField, g: ComplexField, params: ModelParams) -> complex:
    """Inner product inducing the Sigma_gamma norm."""
    return complex(np.vdot(f.values, _sigma_operator(g.values, g.grid, params)) * f.grid.quad_weight)


def _sigma_operator(values, grid, params):
    # S = -(grad - iA)^2 + V_gamma + 1 = 2H - V_gamma + 1
    return 2.0 * magnetic_hamiltonian(values, grid, params) + (1.0 - partial_potential(grid, params)) * values


def sigma_gamma_norm(f: ComplexField, params: ModelParams) -> float:
    """Squared norm ``||(grad - iA) f||^2 + int V_gamma |f|^2 + ||f||^2``."""
    _check_grid(f, params)
    e = evaluate(f, params)
    return 2.0 * e.magnetic_kinetic + e.potential_partial + e.mass


@dataclass(frozen=True)
class NormEquivalenceConstants:
    C1: float
    C2: float


def norm_equivalence_constants(params: ModelParams) -> NormEquivalenceConstants:
    """Constants of ``C2 ||f||_Sigma^2 <= quadratic rotating form <= C1 ||f||_Sigma^2``.

    Valid only below critical rotation.
    """
    g, W = params.gamma_perp, params.omega
    if not W < g:
        raise ValueError(f"norm equivalence needs omega < gamma (got omega={W}, gamma={g})")
    rest = [gj**2 for gj in params.gamma_rest]
    C1 = 2.0 + max([g**2 + W**2, *rest])
    C2 = min([(g**2 - W**2) / (g**2 + W**2), (g**2 - W**2) / 2.0, *rest])
    return NormEquivalenceConstants(C1=C1, C2=C2)


@dataclass(frozen=True)
class DiamagneticReport:
    """Pointwise comparison of ``|grad|f||`` against ``|(grad - iA) f|``."""

    max_excess: float
    tolerance: float
    passed: bool
    min_slack: float
    points_checked: int

    def to_dict(self):
        return asdict(self)


def check_diamagnetic(f: ComplexField, params: ModelParams, rel_tol: float = 1e-8) -> DiamagneticReport:
    """Check the diamagnetic inequality at every grid point.

    ``grad|f|`` is evaluated through the chain rule ``Re(conj(f) grad f)/|f|``
    at points where ``f != 0``.  Differentiating ``|f|`` spectrally would add
    Gibbs oscillations at the kinks of ``|f|`` that are unrelated to the
    inequality.

    ``min_slack`` is the smallest ``|(grad - iA) f| - |grad|f||`` over points
    where ``|f|`` exceeds 1e-3 of its maximum.
    """
    _check_grid(f, params)
    grid, u = f.grid, f.values
    grads = _gradients(u, grid)
    A = vector_potential(grid, params.gamma_perp)
    mod = np.abs(u)
    nz = mod > 0
    safe = np.where(nz, mod, 1.0)
    grad_abs_sq = sum((np.real(np.conj(u) * d) / safe) ** 2 for d in grads)
    mag_sq = sum(np.abs(grads[j] - 1j * A[j] * u) ** 2 for j in range(grid.dim))
    grad_abs = np.sqrt(grad_abs_sq)[nz]
    mag = np.sqrt(mag_sq)[nz]
    grad_max = float(np.sqrt(sum(np.abs(d) ** 2 for d in grads)).max())
    tol = rel_tol * grad_max
    excess = float(np.max(grad_abs - mag, initial=0.0))
    bulk = (mod > 1e-3 * mod.max())[nz] if nz.any() else np.zeros(0, bool)
    slack = float(np.min((mag - grad_abs)[bulk], initial=np.inf))
    return DiamagneticReport(
        max_excess=max(excess, 0.0),
        tolerance=tol,
        passed=bool(excess <= tol),
        min_slack=slack,
        points_checked=int(nz.sum()),
    )


# --- symmetry group ------------------------------------------------------------


def gauge_translate(f: ComplexField, y, gamma: float) -> ComplexField:
    """Magnetic translation ``(g_y f)(x) = exp(-i A(y).x) f(x + y)``.

    ``y = (y_1, y_2)`` is a planar shift.  With this sign ``g_y`` commutes with
    ``grad - iA``, so it preserves the magnetic energy and the Sigma_gamma
    norm; ``g_{-y}`` inverts ``g_y`` and ``g_a g_b`` equals ``g_{a+b}`` up to a
    constant phase.
    """
    grid = f.grid
    y1, y2 = float(y[0]), float(y[1])
    shifted = fourier_shift(f.values, grid, (y1, y2))
    phase = np.exp(-1j * gamma * (-y2 * grid.x(0) + y1 * grid.x(1)))
    return ComplexField(grid, phase * shifted)


def density_centroid(f: ComplexField) -> np.ndarray:
    """Planar centroid of ``|f|^2``."""
    dens = np.abs(f.values) ** 2
    tot = dens.sum()
    return np.array([float((dens * f.grid.x(j)).sum() / tot) for j in (0, 1)])


def _gauge_jacobian(w, g, grid, gamma, y):
    """Derivatives of ``g_y u`` in y.  ``w = u(. + y)`` and ``g = g_y u``."""
    phase = np.exp(-1j * gamma * (-y[1] * grid.x(0) + y[0] * grid.x(1)))
    d1 = derivative_values(w, grid, 0)
    d2 = derivative_values(w, grid, 1)
    J1 = phase * d1 - 1j * gamma * grid.x(1) * g
    J2 = phase * d2 + 1j * gamma * grid.x(0) * g
    return J1, J2


def symmetry_distance(
    u: ComplexField,
    phi: ComplexField,
    params: ModelParams,
    tol: float = 1e-6,
    polish: int = 4,
) -> tuple[float, np.ndarray]:
    """Sigma_gamma distance from ``u`` to the orbit of ``phi``.

    Minimizes ``|| e^{i theta} g_y u - phi ||_{Sigma_gamma}`` over planar shifts
    ``|y| <= L/2`` and global phases ``theta``.  The minimizer set is invariant
    under both, so the phase is optimized in closed form.

    The shift starts at the density-centroid offset, is refined by a compass
    search down to step ``tol``, then polished by a few Gauss-Newton steps in
    the Sigma_gamma inner product.  The distance itself is evaluated from the
    difference field, not from the expanded quadratic form, to avoid
    cancellation.

    Returns
    -------
    distance : float
        The (unsquared) Sigma_gamma distance.
    best_shift : ndarray, shape (2,)
    """
    _require_isotropic(params)
    if u.grid != phi.grid:
        raise ValueError("fields live on different grids")
    grid, gamma = u.grid, params.gamma_perp
    radius = 0.5 * min(grid.half_widths[:2])
    S_phi = _sigma_operator(phi.values, grid, params)
    w8 = grid.quad_weight
    nu = sigma_gamma_norm(u, params)
    nphi = float(np.vdot(phi.values, S_phi).real * w8)

    def clip(y):
        r = np.hypot(*y)
        return y if r <= radius else y * (radius / r)

    def cheap(y):
        g = gauge_translate(u, y, gamma).values
        return nu + nphi - 2.0 * abs(np.vdot(g, S_phi) * w8)

    y = clip(density_centroid(u) - density_centroid(phi))
    best = cheap(y)
    step = max(0.25 * max(grid.spacing[:2]), 8 * tol)
    dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    while step >= tol:
        moved = False
        for d in dirs:
            cand = clip(y + step * d)
            val = cheap(cand)
            if val < best:
                y, best, moved = cand, val, True
                break
        if not moved:
            step *= 0.5

    def direct(y):
        w = fourier_shift(u.values, grid, y)
        g = np.exp(-1j * gamma * (-y[1] * grid.x(0) + y[0] * grid.x(1))) * w
        ov = np.vdot(g, S_phi) * w8
        theta = np.angle(ov) if abs(ov) > 0 else 0.0
        r = np.exp(1j * theta) * g - phi.values
        d2 = float(np.vdot(r, _sigma_operator(r, grid, params)).real * w8)
        return np.sqrt(max(d2, 0.0)), w, g, theta, r

    dist, w, g, theta, r = direct(y)
    for _ in range(polish):
        J1, J2 = _gauge_jacobian(w, g, grid, gamma, y)
        cols = [np.exp(1j * theta) * J1, np.exp(1j * theta) * J2, 1j * np.exp(1j * theta) * g]
        Scols = [_sigma_operator(c, grid, params) for c in cols]
        G = np.array([[np.vdot(a, Sb).real for Sb in Scols] for a in cols]) * w8
        b = -np.array([np.vdot(Sa, r).real for Sa in Scols]) * w8
        try:
            delta = np.linalg.solve(G, b)
        except np.linalg.LinAlgError:
            break
        y_new = clip(y + delta[:2])
        trial = direct(y_new)
        if not trial[0] < dist:
            break
        y = y_new
        dist, w, g, theta, r = trial
    if np.hypot(*y) >= radius * (1 - 1e-9):
        warnings.warn(
            f"symmetry search hit the boundary |y| = {radius:g}; the distance is an upper bound",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(dist), np.asarray(y, dtype=float)
