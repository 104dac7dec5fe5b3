"""Radial ground states of ``-1/2 Delta W + W - W^{r-1} = 0``.

The profile ``Q`` for ``r = 2 + 4/N`` fixes the critical mass ``M(Q)``; general
``r`` gives the sharp Gagliardo-Nirenberg constant

    ||f||_r^r <= C_r ||grad f||^{N(r-2)/2} ||f||^{(2r-N(r-2))/2}.

The radial ODE ``W'' + (N-1) W'/rho = 2 (W - W^{r-1})`` is shot from the origin
and ``W(0)`` bisected to machine precision.  Past the point where the two
bracketing trajectories separate, the profile is continued by the decaying
solution of the linearized equation, ``C rho^{-nu} K_nu(sqrt(2) rho)`` with
``nu = (N-2)/2``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate as sint
from scipy import interpolate
from scipy import special

from .grid import Grid, fftn, ifftn

__all__ = [
    "RadialProfile",
    "ShootingError",
    "solve_ground_profile",
    "critical_mass",
    "sharp_gn_constant",
    "gn_quotient",
    "gradient_flow_critical_mass",
    "write_profile",
]


class ShootingError(RuntimeError):
    """Bisection on ``W(0)`` did not converge.  Carries the final bracket."""

    def __init__(self, msg, lo, hi, iterations):
        super().__init__(f"{msg} (bracket [{lo!r}, {hi!r}] after {iterations} bisections)")
        self.lo, self.hi, self.iterations = lo, hi, iterations


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * np.pi ** (N / 2) / special.gamma(N / 2)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial ground state sampled on a graded mesh, with its quadratures.

    ``mass``, ``grad_sq`` and ``lp_norm`` are ``int W^2``, ``int |grad W|^2``
    and ``int W^r`` over R^N.
    """

    r_nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    dim: int
    exponent: float
    mass: float
    grad_sq: float
    lp_norm: float
    w0: float
    match_radius: float
    bisections: int

    @property
    def pohozaev_residuals(self) -> tuple[float, float]:
        """Relative defects of the two integral identities.

        ``a/2 + b - c = 0`` (pairing with W) and
        ``(N-2) a/4 + N b/2 - N c/r = 0`` (dilation), for ``a = grad_sq``,
        ``b = mass``, ``c = lp_norm``.  At ``r = 2 + 4/N`` they are equivalent
        to ``a = N b`` and ``a = 2N/(N+2) c``.
        """
        a, b, c, N, r = self.grad_sq, self.mass, self.lp_norm, self.dim, self.exponent
        scale = max(a, b, c)
        return (abs(0.5 * a + b - c) / scale, abs((N - 2) * a / 4 + N * b / 2 - N * c / r) / scale)

    @property
    def gn_constant(self) -> float:
        return gn_quotient(self.dim, self.exponent, self.grad_sq, self.mass, self.lp_norm)

    @cached_property
    def _spline(self):
        return interpolate.CubicHermiteSpline(self.r_nodes, self.values, self.slopes)

    def __call__(self, rho):
        """Evaluate ``W`` at radii ``rho``; exact decaying tail beyond the mesh."""
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(rho)
        tail = rho > self.r_nodes[-1]
        out[~tail] = self._spline(rho[~tail])
        if np.any(tail):
            nu = (self.dim - 2) / 2
            r_end = self.r_nodes[-1]
            out[tail] = self.values[-1] * _tail_shape(rho[tail], nu) / _tail_shape(r_end, nu)
        return out

    def certificate(self) -> dict:
        p1, p2 = self.pohozaev_residuals
        return {
            "dim": self.dim,
            "exponent": self.exponent,
            "w0": self.w0,
            "mass": self.mass,
            "grad_sq": self.grad_sq,
            "lp_norm": self.lp_norm,
            "gn_constant": self.gn_constant,
            "pohozaev_residual_pairing": p1,
            "pohozaev_residual_dilation": p2,
            "match_radius": self.match_radius,
            "bisections": self.bisections,
        }


def gn_quotient(N: int, r: float, grad_sq: float, mass: float, lp_norm: float) -> float:
    """``||f||_r^r / (||grad f||^{N(r-2)/2} ||f||^{(2r-N(r-2))/2})`` from squared norms."""
    return lp_norm / (grad_sq ** (N * (r - 2) / 4) * mass ** ((2 * r - N * (r - 2)) / 4))


def _tail_shape(rho, nu):
    return rho ** (-nu) * special.kv(nu, np.sqrt(2.0) * rho)


def _check_exponent(N, r):
    if N < 1:
        raise ValueError("dimension must be positive")
    if not r > 2:
        raise ValueError(f"exponent r must exceed 2, got {r}")
    if N >= 3 and not r < 2 * N / (N - 2):
        raise ValueError(f"exponent r must be below {2 * N / (N - 2)} for N={N}")


class _Shooter:
    def __init__(self, N, r, r_max, rtol, max_step):
        self.N, self.r, self.r_max = N, r, r_max
        self.rtol, self.max_step = rtol, max_step
        self.area = sphere_area(N)
        self.rho0 = 1e-4

    def rhs(self, rho, y):
        W, dW = y[0], y[1]
        N, r = self.N, self.r
        ddW = 2.0 * (W - np.abs(W) ** (r - 2) * W) - (N - 1) * dW / rho
        if len(y) == 2:
            return [dW, ddW]
        w = self.area * rho ** (N - 1)
        return [dW, ddW, w * W * W, w * dW * dW, w * np.abs(W) ** r]

    def start(self, w0):
        N, r, rho = self.N, self.r, self.rho0
        a = (w0 - w0 ** (r - 1)) / N
        W = w0 + a * rho**2
        dW = 2 * a * rho
        s = self.area
        # integrals over the tiny ball of radius rho0
        m = s * w0**2 * rho**N / N
        g = s * 4 * a**2 * rho ** (N + 2) / (N + 2)
        lp = s * w0**r * rho**N / N
        return [W, dW, m, g, lp]

    def shoot(self, w0, dense=False):
        """Return (kind, solution) with kind in {'over', 'under', 'none'}.

        The quadrature integrals are only carried along for the dense final
        runs; during bisection the two-component system is cheaper and its
        pure relative error control behaves better.
        """
        y0 = self.start(w0)
        if dense:
            atol = [1e-22, 1e-22, 1e-18, 1e-18, 1e-18]
        else:
            y0, atol = y0[:2], 1e-22

        def cross(rho, y):
            return y[0]

        cross.terminal, cross.direction = True, -1

        def turn(rho, y):
            return y[1]

        turn.terminal, turn.direction = True, 1
        sol = sint.solve_ivp(
            self.rhs,
            (self.rho0, self.r_max),
            y0,
            method="DOP853",
            rtol=self.rtol,
            atol=atol,
            events=(cross, turn),
            dense_output=dense,
            max_step=self.max_step,
        )
        if sol.t_events[0].size:
            return "over", sol
        if sol.t_events[1].size:
            return "under", sol
        return "none", sol


@lru_cache(maxsize=64)
def solve_ground_profile(
    N: int,
    r: float,
    tol: float = 1e-15,
    r_max: float = 30.0,
    rtol: float = 1e-12,
    max_step: float = np.inf,
    max_bisections: int = 200,
    mesh_points: int = 4001,
) -> RadialProfile:
    """Shoot the positive radial ground state of ``-1/2 Delta W + W = W^{r-1}``.

    Parameters
    ----------
    N : int
        Dimension.
    r : float
        Exponent; ``2 < r`` and ``r < 2N/(N-2)`` for ``N >= 3``.
    tol : float
        Bisection stops once ``hi - lo < tol * W(0)`` (or at machine precision).
    r_max : float
        Outer radius of the returned mesh.
    rtol, max_step : float
        Integrator controls, for convergence studies.

    Returns
    -------
    RadialProfile

    Raises
    ------
    ShootingError
        If the bracket cannot be set up or does not shrink to ``tol``.
    """
    _check_exponent(N, r)
    sh = _Shooter(N, r, r_max, rtol, max_step)
    lo, hi = 1.0 + 1e-3, 2.0
    kind, _ = sh.shoot(lo)
    if kind != "under":
        raise ShootingError("lower bracket end does not undershoot", lo, hi, 0)
    for _ in range(60):
        kind, _ = sh.shoot(hi)
        if kind == "over":
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ShootingError("no overshooting initial value found", lo, hi, 0)
    count = 0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        kind, _ = sh.shoot(mid)
        count += 1
        if kind == "over":
            hi = mid
        else:
            lo = mid
        if count >= max_bisections:
            raise ShootingError("bisection did not converge", lo, hi, count)
    if hi - lo > max(tol, 64 * np.finfo(float).eps) * hi:
        raise ShootingError("bracket stalled above tolerance", lo, hi, count)

    _, s_lo = sh.shoot(lo, dense=True)
    _, s_hi = sh.shoot(hi, dense=True)
    # match where the two trajectories still agree and W is in the linear regime
    t_end = min(s_lo.t[-1], s_hi.t[-1])
    probe = np.linspace(sh.rho0, t_end, 20001)
    W_lo = s_lo.sol(probe)[0]
    W_hi = s_hi.sol(probe)[0]
    ok = (np.abs(W_hi - W_lo) <= 1e-7 * np.abs(W_lo)) & (W_lo > 0)
    bad = np.flatnonzero(~ok)
    idx = (bad[0] - 1) if bad.size else probe.size - 1
    # prefer a point where the nonlinearity is negligible
    lin = np.flatnonzero(np.abs(W_lo[: idx + 1]) ** (r - 2) < 1e-10)
    if lin.size:
        idx = lin[0]
    rho_m = float(probe[idx])
    if rho_m < 2.0:
        raise ShootingError("trajectories separate too early to match the tail", lo, hi, count)
    y_m = s_lo.sol(rho_m)
    nu = (N - 2) / 2
    C = y_m[0] / _tail_shape(rho_m, nu)
    area = sphere_area(N)

    def tail_w(x):
        return C * _tail_shape(x, nu)

    def tail_dw(x):
        # d/dx [x^{-nu} K_nu(k x)] = -k x^{-nu} K_{nu+1}(k x)
        k = np.sqrt(2.0)
        return -C * k * x ** (-nu) * special.kv(nu + 1, k * x)

    quad = lambda fn: sint.quad(fn, rho_m, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    mass = y_m[2] + quad(lambda x: area * x ** (N - 1) * tail_w(x) ** 2)
    grad = y_m[3] + quad(lambda x: area * x ** (N - 1) * tail_dw(x) ** 2)
    lp = y_m[4] + quad(lambda x: area * x ** (N - 1) * tail_w(x) ** r)

    u = np.linspace(0.0, 1.0, mesh_points)
    nodes = sh.rho0 + (r_max - sh.rho0) * u**1.5
    vals = np.empty_like(nodes)
    slopes = np.empty_like(nodes)
    inner = nodes <= rho_m
    ys = s_lo.sol(nodes[inner])
    vals[inner], slopes[inner] = ys[0], ys[1]
    vals[~inner] = tail_w(nodes[~inner])
    slopes[~inner] = tail_dw(nodes[~inner])
    nodes = np.concatenate([[0.0], nodes])
    vals = np.concatenate([[lo], vals])
    slopes = np.concatenate([[0.0], slopes])
    for arr in (nodes, vals, slopes):
        arr.flags.writeable = False
    return RadialProfile(
        r_nodes=nodes,
        values=vals,
        slopes=slopes,
        dim=N,
        exponent=float(r),
        mass=float(mass),
        grad_sq=float(grad),
        lp_norm=float(lp),
        w0=float(lo),
        match_radius=rho_m,
        bisections=count,
    )


def critical_mass(N: int) -> float:
    """``M(Q) = ||Q||^2`` for the mass-critical profile ``r = 2 + 4/N``."""
    if N < 2:
        raise ValueError("N must be at least 2")
    return solve_ground_profile(N, 2.0 + 4.0 / N).mass


def sharp_gn_constant(N: int, r: float, **solver_kw) -> float:
    """Sharp constant ``C_r``, the GN quotient evaluated at the ground state."""
    return solve_ground_profile(N, float(r), **solver_kw).gn_constant


def gradient_flow_critical_mass(
    grid: Grid,
    r: float | None = None,
    tau: float = 1.0,
    tol: float = 1e-13,
    max_iters: int = 20000,
) -> float:
    """Independent estimate of ``||W||^2`` on a Cartesian grid.

    Minimizes ``<f, (-1/2 Delta + 1) f>`` on ``int |f|^r = 1`` by the
    normalized flow ``f <- (1 + tau K)^{-1} (f + tau mu f^{r-1})`` with
    ``mu = <f, K f>``.  The minimizer satisfies ``K f = mu f^{r-1}``, so
    ``W = mu^{1/(r-2)} f`` and ``||W||^2 = mu^{2/(r-2)} ||f||^2``.
    """
    N = grid.dim
    if r is None:
        r = 2.0 + 4.0 / N
    w = grid.quad_weight
    symbol = 0.5 * grid.k_squared + 1.0
    f = np.exp(-grid.r_squared)
    f /= (np.sum(f**r) * w) ** (1 / r)
    mu_old = np.inf
    for _ in range(max_iters):
        fh = fftn(f)
        mu = float(np.real(np.vdot(f, ifftn(symbol * fh))) * w)
        f = np.real(ifftn(fftn(f + tau * mu * f ** (r - 1)) / (1.0 + tau * symbol)))
        f = np.abs(f)
        f /= (np.sum(f**r) * w) ** (1 / r)
        if abs(mu - mu_old) < tol * mu:
            break
        mu_old = mu
    else:
        raise RuntimeError("gradient-flow oracle did not converge")
    return mu ** (2 / (r - 2)) * float(np.sum(f**2) * w)


def write_profile(profile: RadialProfile, stem) -> list[Path]:
    """Write ``<stem>.csv`` (r, W) and ``<stem>.json`` (certificate)."""
    stem = Path(stem)
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["r", "W"])
        for a, b in zip(profile.r_nodes, profile.values):
            wr.writerow([repr(float(a)), repr(float(b))])
    json_path.write_text(json.dumps(profile.certificate(), indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]
