"""Prescribed-mass minimization of the magnetic energy.

Global problem: minimize ``E_gamma`` on ``S(c) = {||f||^2 = c}``.  Local
problem (mass-supercritical ``p``): minimize on ``S(c)`` intersected with
``B_gamma(m) = {H_gamma(f) <= m}``, ``H_gamma = ||(grad - iA) f||^2 +
2 int V_gamma |f|^2``.

The descent is a preconditioned normalized gradient flow on the sphere.  With
``g = H f - |f|^{p-1} f + omega(f) f`` the Euler-Lagrange defect, one step is

    f <- sqrt(c) (f + s d) / ||f + s d||,   d = -P g (+ conjugate-gradient memory),

where ``P`` is the symmetric split resolvent
``(1 + V_eff)^{-1/2} (1 - Delta/2)^{-1} (1 + V_eff)^{-1/2}`` and
``V_eff = |A|^2/2 + V_gamma``.  This is semi-implicit backward Euler for the
stiff quadratic part written in residual-correction form, so its fixed points
are exactly the constrained critical points.  Steps that raise the energy are
rejected and the step length halved.
"""

from __future__ import annotations

import enum
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .functionals import (
    ModelParams,
    density_centroid,
    gauge_translate,
    ground_gaussian,
    magnetic_hamiltonian,
    partial_potential,
)
from .grid import ComplexField, Grid, GridSpec, band_mask, boundary_mass, build_grid, fftn, ifftn
from .qsolver import critical_mass, sharp_gn_constant, solve_ground_profile

__all__ = [
    "InitKind",
    "Status",
    "MinimizeSpec",
    "MinimizerResult",
    "BoundsReport",
    "default_grid",
    "make_initial",
    "dilate",
    "minimize_global",
    "minimize_local_ball",
    "lagrange_multiplier",
    "euler_lagrange_residual",
    "analytic_bounds",
    "gaussian_product_energy",
    "nonexistence_probe",
    "fit_concentration_coefficients",
    "predicted_concentration_coefficient",
    "canonicalize",
    "default_probe_grid",
]

log = logging.getLogger(__name__)


class InitKind(str, enum.Enum):
    GAUSSIAN_PRODUCT = "gaussian_product"
    VORTEX_SEEDED = "vortex_seeded"
    CONCENTRATION = "concentration"
    DILATION = "dilation"


class Status(str, enum.Enum):
    CONVERGED = "CONVERGED"
    NOT_CONVERGED = "NOT_CONVERGED"
    NO_MINIMIZER_EVIDENCE = "NO_MINIMIZER_EVIDENCE"
    BOUNDARY_ATTACHED = "BOUNDARY_ATTACHED"
    INFEASIBLE = "INFEASIBLE"


@dataclass(frozen=True)
class MinimizeSpec:
    """Controls for one minimization run.

    ``m`` switches on the ball constraint ``H_gamma <= m``.  Convergence needs
    both ``residual < tol_residual`` and an energy change below ``tol_energy``
    over the last ``energy_window`` iterations.
    """

    c: float
    m: float | None = None
    step: float = 1e-2
    max_iters: int = 5000
    tol_residual: float = 1e-8
    tol_energy: float = 1e-12
    init: InitKind = InitKind.GAUSSIAN_PRODUCT
    energy_window: int = 50
    conjugate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "init", InitKind(self.init))
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.m is not None and not self.m > 0:
            raise ValueError("m must be positive")
        for name in ("step", "tol_residual", "tol_energy"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.energy_window < 1:
            raise ValueError("max_iters and energy_window must be positive")


@dataclass(eq=False)
class MinimizerResult:
    """Outcome of a minimization run.

    ``trace`` maps column names (energy, residual, h_gamma, kinetic,
    potential, mass, step) to per-iteration arrays of accepted iterates.
    """

    field: ComplexField
    energy: float
    mass: float
    multiplier: float
    residual: float
    h_gamma: float
    boundary_flag: bool
    status: Status
    iterations: int
    trace: dict = field(default_factory=dict)
    boundary_mass: float = 0.0
    message: str = ""
    c: float = float("nan")
    m: float | None = None

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "c": self.c,
            "m": self.m,
            "energy": self.energy,
            "mass": self.mass,
            "multiplier": self.multiplier,
            "residual": self.residual,
            "h_gamma": self.h_gamma,
            "boundary_flag": self.boundary_flag,
            "boundary_mass": self.boundary_mass,
            "iterations": self.iterations,
            "message": self.message,
        }

    def to_json(self, **kw) -> str:
        d = self.summary()
        d["trace"] = {k: [float(x) for x in v] for k, v in self.trace.items()}
        return json.dumps(d, **kw)


def default_grid(params: ModelParams, points=None) -> Grid:
    """Box with ``L_j = 8 max_j gamma_j^{-1/2}`` on every axis."""
    L = 8.0 * max(g**-0.5 for g in params.gammas)
    if points is None:
        points = 128 if params.dim == 2 else 64
    return build_grid(GridSpec.uniform(params.dim, L, points))


# --- core operator bundle -------------------------------------------------------


class _Problem:
    """Precomputed arrays for the magnetic energy on one grid."""

    def __init__(self, grid: Grid, params: ModelParams):
        if grid.dim != params.dim:
            raise ValueError("grid and params disagree on the dimension")
        if not params.isotropic:
            raise ValueError("minimization needs gamma_1 = gamma_2")
        self.grid, self.params = grid, params
        self.w = grid.quad_weight
        self.Vg = partial_potential(grid, params) * np.ones(grid.shape)
        g = params.gamma_perp
        self.Veff = 0.5 * g**2 * (grid.x(0) ** 2 + grid.x(1) ** 2) + self.Vg
        self.root = 1.0 / np.sqrt(1.0 + self.Veff)
        self.kin = 1.0 / (1.0 + 0.5 * grid.k_squared)
        self.q = params.p + 1.0
        self.on = params.interaction_on

    def dot(self, a, b) -> float:
        return float(np.vdot(a, b).real * self.w)

    def state(self, f):
        """Energy-related quantities of raw values ``f``."""
        Hf = magnetic_hamiltonian(f, self.grid, self.params)
        dens = np.abs(f) ** 2
        mass = float(dens.sum() * self.w)
        quad = self.dot(f, Hf)
        pot = float((self.Vg * dens).sum() * self.w)
        if self.on:
            mod_p = dens ** ((self.params.p - 1) / 2)
            lp = float((mod_p * dens).sum() * self.w)
        else:
            mod_p, lp = 0.0, 0.0
        energy = quad - 2.0 / self.q * lp
        omega = (lp - quad) / mass
        g = Hf - mod_p * f + omega * f
        sigma_sq = 2.0 * quad - pot + mass
        res = float(np.sqrt(np.vdot(g, g).real * self.w / sigma_sq))
        return {
            "f": f, "g": g, "energy": energy, "omega": omega, "mass": mass,
            "h_gamma": 2.0 * quad, "kinetic": quad - pot, "potential": pot, "residual": res,
        }

    def precondition(self, g):
        return self.root * ifftn(self.kin * fftn(self.root * g))

    def tangent(self, f, d):
        return d - (self.dot(f, d) / self.dot(f, f)) * f


def _nyquist_fraction(values: np.ndarray, grid: Grid) -> float:
    """Fraction of spectral mass beyond two thirds of the Nyquist band."""
    spec = np.abs(fftn(values)) ** 2
    tot = spec.sum()
    if tot == 0:
        return 0.0
    return float(spec[~band_mask(grid, 2.0 / 3.0)].sum() / tot)


# --- public quantities -----------------------------------------------------------


def lagrange_multiplier(phi: ComplexField, params: ModelParams) -> float:
    """``omega = (||phi||_{p+1}^{p+1} - 1/2 ||D phi||^2 - int V_gamma |phi|^2) / M(phi)``."""
    st = _Problem(phi.grid, params).state(np.asarray(phi.values))
    if not st["mass"] > 0:
        raise ValueError("the field has zero mass")
    return st["omega"]


def euler_lagrange_residual(phi: ComplexField, omega: float, params: ModelParams) -> float:
    """``|| H phi - |phi|^{p-1} phi + omega phi ||_{L^2} / ||phi||_{Sigma_gamma}``."""
    pb = _Problem(phi.grid, params)
    f = np.asarray(phi.values)
    Hf = magnetic_hamiltonian(f, phi.grid, params)
    nl = np.abs(f) ** (params.p - 1) * f if params.interaction_on else 0.0
    g = Hf - nl + omega * f
    dens = np.abs(f) ** 2
    sigma_sq = 2.0 * pb.dot(f, Hf) - float((pb.Vg * dens).sum() * pb.w) + float(dens.sum() * pb.w)
    if sigma_sq == 0:
        return 0.0
    return float(np.sqrt(pb.dot(g, g) / sigma_sq))


def canonicalize(phi: ComplexField, params: ModelParams) -> ComplexField:
    """Fix the symmetry degeneracy: centroid at the origin, phase real positive
    at the density maximum."""
    y = density_centroid(phi)
    out = gauge_translate(phi, y, params.gamma_perp) if np.hypot(*y) > 1e-12 else phi
    v = out.values
    k = np.argmax(np.abs(v))
    z = v.flat[k]
    return out.with_values(v * (abs(z) / z))


# --- initial data ---------------------------------------------------------------


def _smooth_cutoff(rho, r1, r2):
    """1 for rho <= r1, 0 for rho >= r2, C-infinity in between."""
    t = np.clip((rho - r1) / (r2 - r1), 0.0, 1.0)

    def psi(s):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    return psi(1.0 - t) / (psi(1.0 - t) + psi(t))


def _interp_matrix(grid: Grid, axis: int, points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of axis samples at ``points`` (zero outside the box)."""
    n = grid.shape[axis]
    L = grid.half_widths[axis]
    k = grid.wavenumbers[axis]
    s = points[:, None] + L
    B = np.exp(1j * k[None, :] * s)
    B[:, n // 2] = np.cos(k[n // 2] * s[:, 0])
    B /= n
    M = B @ np.fft.fft(np.eye(n), axis=0)
    outside = (points >= L) | (points < -L)
    M[outside] = 0.0
    return M


def dilate(f: ComplexField, lam: float, support_tol: float = 1e-10) -> ComplexField:
    """``lam^{N/2} f(lam x)`` by separable trigonometric interpolation.

    Raises
    ------
    ValueError
        When ``lam < 1`` would push the (numerical) support of ``f`` out of
        the box.
    """
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    grid = f.grid
    vals = np.asarray(f.values)
    mod = np.abs(vals)
    big = mod > support_tol * mod.max()
    for j, L in enumerate(grid.half_widths):
        reach = float(np.max(np.abs(np.broadcast_to(grid.x(j), grid.shape)[big]), initial=0.0))
        if reach / lam > L:
            raise ValueError(
                f"dilation by {lam:g} moves the support (|x_{j + 1}| <= {reach:.3g}) outside the box"
            )
    out = vals
    for j in range(grid.dim):
        M = _interp_matrix(grid, j, lam * grid.coords[j])
        out = np.moveaxis(np.tensordot(M, np.moveaxis(out, j, 0), axes=(1, 0)), 0, j)
    return ComplexField(grid, lam ** (grid.dim / 2) * out)


def gaussian_product(grid: Grid, params: ModelParams, c: float) -> ComplexField:
    """``g(x_perp) h(x_rest)`` with ``g`` the unit-mass planar Gaussian and
    ``h = sqrt(c) Phi_0`` the transverse harmonic ground state."""
    base = ground_gaussian(grid, params, 1.0)
    return base.normalized(c)


def make_initial(
    kind,
    c: float,
    params: ModelParams,
    grid: Grid | None = None,
    lam: float = 1.0,
    base: ComplexField | None = None,
    cutoff: tuple[float, float] | None = None,
) -> ComplexField:
    """Initial data and test functions of mass ``c``.

    Parameters
    ----------
    kind : InitKind or str
        ``gaussian_product``, ``vortex_seeded`` (Gaussian product with a
        displaced unit vortex admixed), ``concentration`` (cut-off mass-critical
        profile ``Q_0(lam x)``) or ``dilation`` (``lam^{N/2} base(lam x)``).
    grid : Grid, optional
        Defaults to :func:`default_grid`.
    lam : float
        Scale for the concentration and dilation families.
    base : ComplexField, optional
        Profile for ``dilation``; defaults to the Gaussian product.
    cutoff : (R1, R2), optional
        Radii of the smooth cutoff used by ``concentration``.
    """
    kind = InitKind(kind)
    if grid is None:
        grid = default_grid(params)
    if kind is InitKind.GAUSSIAN_PRODUCT:
        f = gaussian_product(grid, params, c)
    elif kind is InitKind.VORTEX_SEEDED:
        g0 = gaussian_product(grid, params, 1.0).values
        z = np.sqrt(params.gamma_perp) * (grid.x(0) + 1j * grid.x(1))
        f = ComplexField(grid, g0 * (1.0 + 0.5 * z))
    elif kind is InitKind.CONCENTRATION:
        if not lam > 0:
            raise ValueError("lam must be positive")
        N = grid.dim
        prof = solve_ground_profile(N, 2.0 + 4.0 / N)
        Lmin = min(grid.half_widths)
        r1, r2 = cutoff if cutoff is not None else (0.5 * Lmin, 0.9 * Lmin)
        rho = np.sqrt(grid.r_squared)
        f = ComplexField(grid, _smooth_cutoff(rho, r1, r2) * prof(lam * rho))
    else:
        if base is None:
            base = gaussian_product(grid, params, c)
        f = dilate(base, lam)
    return f.normalized(c)


# --- flows -----------------------------------------------------------------------


def _divergent(st) -> bool:
    return st["energy"] < -1e6 or st["h_gamma"] > 1e6


def _line_search(pb: _Problem, f, st, d, s, c, ball):
    """Backtrack along ``d``; returns ``(accepted, step, trial, trial_state)``."""
    # below the rounding floor of E the residual decides
    noise = 1e-13 * max(1.0, abs(st["energy"]))
    trial = st_t = None
    for _ in range(40):
        trial = f + s * d
        trial *= np.sqrt(c / pb.dot(trial, trial))
        st_t = pb.state(trial)
        dE = st_t["energy"] - st["energy"]
        ok = dE < -noise or (dE <= noise and st_t["residual"] < st["residual"])
        if ok and ball is not None and st_t["h_gamma"] > ball:
            ok = False
        if ok:
            return True, s, trial, st_t
        s *= 0.5
    return False, s, trial, st_t


def _descend(
    pb: _Problem,
    f0: np.ndarray,
    spec: MinimizeSpec,
    ball: float | None = None,
    observer: Callable | None = None,
):
    """Shared flow loop.  Returns (state, status, iterations, trace, message)."""
    c = spec.c
    f = f0 * np.sqrt(c / pb.dot(f0, f0))
    st = pb.state(f)
    cols = ("energy", "residual", "h_gamma", "kinetic", "potential", "mass", "step")
    trace = {k: [] for k in cols}

    def record(s, step):
        for k in cols[:-1]:
            trace[k].append(s[k])
        trace["step"].append(step)
        if observer is not None:
            observer(s)

    record(st, 0.0)
    s = spec.step
    s_max = 50.0
    d_old = pg_old = g_old = None
    status, msg = Status.NOT_CONVERGED, "iteration limit reached"
    win = spec.energy_window
    it = 0
    for it in range(1, spec.max_iters + 1):
        g = st["g"]
        pg = pb.tangent(f, pb.precondition(g))
        d = -pg
        conj = False
        if spec.conjugate and d_old is not None:
            denom = pb.dot(g_old, pg_old)
            beta = max(0.0, pb.dot(g, pg - pg_old) / denom) if denom > 0 else 0.0
            cand = d + beta * pb.tangent(f, d_old)
            if pb.dot(g, cand) < 0:
                d, conj = cand, True
        accepted, s, trial, st_t = _line_search(pb, f, st, d, s, c, ball)
        if not accepted and conj:
            # conjugate direction exhausted: retry along steepest descent
            d = -pg
            accepted, s, trial, st_t = _line_search(pb, f, st, d, spec.step, c, ball)
        slope = pb.dot(g, d)
        if not accepted:
            d_old = None
            if st["residual"] < spec.tol_residual:
                # no descent step survives rounding: a numerical fixed point
                status, msg = Status.CONVERGED, "residual met; no further descent resolvable"
                break
            if ball is not None:
                # ball retraction by dilation, then continue from there
                moved = _retract_to_ball(pb, f + spec.step * d, c, 0.95 * ball)
                if moved is None:
                    status, msg = Status.BOUNDARY_ATTACHED, "could not retract into the ball"
                    break
                f = moved
                st = pb.state(f)
                record(st, 0.0)
                s = spec.step
                d_old = None
                continue
            msg = "step length collapsed"
            break
        f, d_prev = trial, d
        g_old, pg_old = g, pg
        d_old = d_prev if slope < 0 else None
        st = st_t
        record(st, s)
        s = min(1.5 * s, s_max)
        if not np.isfinite(st["energy"]) or _divergent(st):
            status, msg = Status.NO_MINIMIZER_EVIDENCE, "energy unbounded along the flow"
            break
        if _nyquist_fraction(f, pb.grid) > 1e-6 and it % 10 == 0:
            status, msg = Status.NO_MINIMIZER_EVIDENCE, "flow concentrates at the grid scale"
            break
        E = trace["energy"]
        if st["residual"] < spec.tol_residual and len(E) > win and abs(E[-1] - E[-1 - win]) < spec.tol_energy:
            status, msg = Status.CONVERGED, "residual and energy tolerances met"
            break
    return st, status, it, {k: np.asarray(v) for k, v in trace.items()}, msg


def _retract_to_ball(pb: _Problem, f: np.ndarray, c: float, target: float):
    """Dilate ``f`` so that ``H_gamma = target``; ``None`` when impossible."""
    base = ComplexField(pb.grid, f).normalized(c)

    def H(lam):
        return pb.state(dilate(base, lam).normalized(c).values)["h_gamma"] - target

    try:
        if H(1.0) <= 0:
            return base.values
        lams = np.linspace(1.0, 0.3, 15)[1:]
        for lo in lams:
            if H(lo) < 0:
                lam = optimize.brentq(H, lo, 1.0, xtol=1e-12)
                return dilate(base, lam).normalized(c).values
    except ValueError:
        return None
    return None


def _result(pb, st, status, it, trace, msg, spec, canonical=True):
    phi = ComplexField(pb.grid, st["f"])
    if canonical and status == Status.CONVERGED:
        phi = canonicalize(phi, pb.params)
    bflag = spec.m is not None and st["h_gamma"] >= 0.95 * spec.m
    return MinimizerResult(
        field=phi,
        energy=st["energy"],
        mass=st["mass"],
        multiplier=st["omega"],
        residual=st["residual"],
        h_gamma=st["h_gamma"],
        boundary_flag=bool(bflag),
        status=status,
        iterations=it,
        trace=trace,
        boundary_mass=boundary_mass(phi),
        message=msg,
        c=spec.c,
        m=spec.m,
    )


def minimize_global(
    spec: MinimizeSpec,
    params: ModelParams,
    grid: Grid | None = None,
    initial: ComplexField | None = None,
    observer: Callable | None = None,
) -> MinimizerResult:
    """Minimize ``E_gamma`` on ``S(c)``.

    For ``p = 1 + 4/N`` and ``c > M(Q)`` the energy is unbounded below.  The
    flow then concentrates until it reaches the grid scale; that event, or an
    energy below ``-1e6`` or ``H_gamma`` above ``1e6``, ends the run with
    status ``NO_MINIMIZER_EVIDENCE``.
    """
    if grid is None:
        grid = initial.grid if initial is not None else default_grid(params)
    pb = _Problem(grid, params)
    if initial is None:
        initial = make_initial(spec.init, spec.c, params, grid)
    st, status, it, trace, msg = _descend(pb, np.asarray(initial.values), spec, observer=observer)
    if status is Status.NO_MINIMIZER_EVIDENCE:
        log.info("minimize_global(c=%g): %s", spec.c, msg)
    return _result(pb, st, status, it, trace, msg, spec)


def minimize_local_ball(
    spec: MinimizeSpec,
    params: ModelParams,
    grid: Grid | None = None,
    initial: ComplexField | None = None,
    observer: Callable | None = None,
) -> MinimizerResult:
    """Minimize ``E_gamma`` on ``S(c)`` within ``H_gamma <= m``.

    Steps that leave the ball are backtracked; if backtracking fails the
    iterate is dilated back to ``H_gamma = 0.95 m``.  Since
    ``H_gamma >= 2 omega0 c`` on ``S(c)``, the constraint set is empty when
    ``2 omega0 c > m`` and the run reports ``INFEASIBLE``.  A converged state
    that still touches the ball (``H_gamma >= 0.95 m``) is reported as
    ``BOUNDARY_ATTACHED``.
    """
    if spec.m is None:
        raise ValueError("minimize_local_ball needs spec.m")
    if grid is None:
        grid = initial.grid if initial is not None else default_grid(params)
    pb = _Problem(grid, params)
    m, c = spec.m, spec.c
    if 2.0 * params.omega0 * c > m:
        f = make_initial(InitKind.GAUSSIAN_PRODUCT, c, params, grid)
        st = pb.state(np.asarray(f.values))
        msg = (
            f"S(c) and B(m) do not meet: H_gamma >= 2 omega0 c = {2 * params.omega0 * c:g} > m = {m:g};"
            " reduce c"
        )
        return _result(pb, st, Status.INFEASIBLE, 0, {}, msg, spec, canonical=False)
    if initial is None:
        initial = make_initial(spec.init, c, params, grid)
    f0 = np.asarray(initial.values)
    f0 = f0 * np.sqrt(c / pb.dot(f0, f0))
    if pb.state(f0)["h_gamma"] > m:
        moved = _retract_to_ball(pb, f0, c, 0.95 * m)
        if moved is None:
            st = pb.state(f0)
            return _result(pb, st, Status.BOUNDARY_ATTACHED, 0, {}, "initial datum outside the ball", spec)
        f0 = moved
    st, status, it, trace, msg = _descend(pb, f0, spec, ball=m, observer=observer)
    if st["h_gamma"] >= 0.95 * m and status in (Status.CONVERGED, Status.NOT_CONVERGED):
        status = Status.BOUNDARY_ATTACHED
        msg = f"minimizer sits on the ball boundary (H_gamma={st['h_gamma']:.4g}, m={m:g}); reduce c"
    return _result(pb, st, status, it, trace, msg, spec)


# --- analytic bounds ------------------------------------------------------------


def gaussian_product_energy(c: float, params: ModelParams) -> float:
    """Closed-form ``E_gamma`` of the Gaussian-product test function."""
    g = params.gamma_perp
    q = params.p + 1.0
    Ig = (g / np.pi) ** (q / 2) * 2 * np.pi / (q * g)
    Ih = c ** (q / 2)
    for gj in params.gamma_rest:
        Ih *= (gj / np.pi) ** (q / 4) * np.sqrt(2 * np.pi / (q * gj))
    lin = (g + 0.5 * sum(params.gamma_rest)) * c
    return lin - (2.0 / q * Ig * Ih if params.interaction_on else 0.0)


@dataclass(frozen=True)
class BoundsReport:
    """Closed-form bounds for the ball-constrained problem.

    ``g_c(lam) = lam/2 - B c^beta lam^alpha`` and ``h_c(lam) = lam/2`` bracket
    ``E_gamma`` as functions of ``H_gamma``, with ``B = 2 C_{p+1}/(p+1)``,
    ``alpha = N(p-1)/4`` and ``beta = (4 - (N-2)(p-1))/4``.  The multiplier
    window uses ``B_window = 2^{1-kappa} C_{p+1}``, ``kappa = alpha - 1``.
    """

    c: float
    m: float
    omega0: float
    upper_I: float
    B_const: float
    B_window: float
    alpha: float
    beta: float
    gap_holds: bool
    c0: float
    quarter_ball_nonempty: bool
    omega_window: tuple[float, float]

    def g_c(self, lam):
        lam = np.asarray(lam, dtype=float)
        return 0.5 * lam - self.B_const * self.c**self.beta * lam**self.alpha

    def h_c(self, lam):
        return 0.5 * np.asarray(lam, dtype=float)

    def to_dict(self):
        d = asdict(self)
        d["omega_window"] = list(self.omega_window)
        return d


def _gap(c, m, B, alpha, beta):
    g = lambda lam: 0.5 * lam - B * c**beta * lam**alpha
    return 0.125 * m < min(g(0.5 * m), g(m))


def analytic_bounds(c: float, m: float, params: ModelParams) -> BoundsReport:
    """Evaluate the sandwich functions, the gap test and the multiplier window.

    ``g_c`` is concave, so its infimum over ``(m/2, m)`` sits at an endpoint.
    The comparison value ``h_c(m/4)`` is only available when ``S(c)`` meets
    ``B_gamma(m/4)``, i.e. ``2 omega0 c <= m/4``.  ``c0`` is the largest mass
    for which both hold; the gap part is found by bisection.
    """
    if not params.regime == "supercritical":
        raise ValueError("analytic_bounds needs a mass-supercritical exponent")
    N, p = params.dim, params.p
    C = sharp_gn_constant(N, p + 1.0)
    alpha = N * (p - 1) / 4
    beta = (4 - (N - 2) * (p - 1)) / 4
    kappa = alpha - 1
    B = 2.0 * C / (p + 1)
    Bw = 2.0 ** (1 - kappa) * C
    lo, hi = 0.0, 1.0
    while _gap(hi, m, B, alpha, beta):
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _gap(mid, m, B, alpha, beta):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    w0 = params.omega0
    c_quarter = m / (8.0 * w0)
    return BoundsReport(
        c=c,
        m=m,
        omega0=w0,
        upper_I=gaussian_product_energy(c, params),
        B_const=B,
        B_window=Bw,
        alpha=alpha,
        beta=beta,
        gap_holds=bool(_gap(c, m, B, alpha, beta) and c <= c_quarter),
        c0=min(lo, c_quarter),
        quarter_ball_nonempty=bool(c <= c_quarter),
        omega_window=(-w0, -w0 * (1.0 - Bw * m**kappa * c**beta)),
    )


# --- nonexistence families --------------------------------------------------------


def predicted_concentration_coefficient(c: float, N: int) -> float:
    """``(c/2) ||grad Q_0||^2 (1 - (c/M)^{2/N})`` with ``||grad Q_0||^2 = N``."""
    M = critical_mass(N)
    return 0.5 * c * N * (1.0 - (c / M) ** (2.0 / N))


def fit_concentration_coefficients(points) -> tuple[float, float]:
    """Least-squares fit of ``E = a lam^2 + b lam^{-2}``; returns ``(a, b)``."""
    lam = np.array([p[0] for p in points], dtype=float)
    E = np.array([p[1] for p in points], dtype=float)
    X = np.stack([lam**2, lam**-2], axis=1)
    (a, b), *_ = np.linalg.lstsq(X, E, rcond=None)
    return float(a), float(b)


def default_probe_grid(N: int, lambdas) -> Grid:
    """Box for :func:`nonexistence_probe`, fine enough for the largest ``lam``."""
    if N == 2:
        return build_grid(GridSpec.uniform(2, 4.0, 512 if max(lambdas) > 4 else 256))
    return build_grid(GridSpec.uniform(3, 6.0, 128))


def nonexistence_probe(
    c: float,
    params: ModelParams,
    lambdas,
    grid: Grid | None = None,
    family: str | None = None,
    base: ComplexField | None = None,
) -> list[tuple[float, float]]:
    """Energies ``E_gamma(f_lam)`` along a family that concentrates as ``lam`` grows.

    Mass-critical ``p`` uses the cut-off profile family ``Q_0(lam x)``;
    supercritical ``p`` uses the dilation family ``lam^{N/2} f(lam x)`` of
    ``base`` (default: Gaussian product).  A ``RuntimeWarning`` is issued for
    every ``lam`` whose test function is not resolved by the grid.
    """
    regime = params.regime
    N = params.dim
    if regime == "subcritical":
        raise ValueError("the energy is bounded below for mass-subcritical p")
    if family is None:
        family = "concentration" if regime == "critical" else "dilation"
    if grid is None:
        grid = default_probe_grid(N, lambdas)
    pb = _Problem(grid, params)
    if family == "dilation" and base is None:
        base = gaussian_product(grid, params, c)
    out = []
    for lam in lambdas:
        f = make_initial(family, c, params, grid, lam=float(lam), base=base)
        if _nyquist_fraction(f.values, grid) > 1e-14 or boundary_mass(f) > 1e-10:
            warnings.warn(f"test function at lambda={lam:g} is truncated by the grid", RuntimeWarning, stacklevel=2)
        out.append((float(lam), pb.state(np.asarray(f.values))["energy"]))
    return out
