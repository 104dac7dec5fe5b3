"""Time integration of the rotating equation

    i u_t = -1/2 Delta u + V u - Omega L_z u - |u|^{p-1} u,

conservation monitors, and orbital-stability experiments.

Two second-order Strang integrators are provided.  ``rotating_frame`` evolves
``v(t, x) = u(t, R_{Omega t} x)``, which solves the same equation without the
rotation term when the planar trap is isotropic, and maps back by a Fourier
three-shear rotation.  ``direct_split`` splits ``-Omega L_z`` into its two
one-axis pieces, which are diagonal after a single-axis Fourier transform.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .functionals import ModelParams, evaluate, full_potential, sigma_gamma_norm, symmetry_distance
from .grid import ComplexField, Grid, NonFiniteFieldError, fft1, fftn, ifft1, ifftn, random_smooth_field
from .minimizer import MinimizerResult
from .qsolver import sharp_gn_constant

__all__ = [
    "Method",
    "EvolutionTrace",
    "StabilityReport",
    "ConservationSummary",
    "GlobalExistenceCheck",
    "BlowUpError",
    "rotate_frame",
    "propagate",
    "evolve_field",
    "conservation_report",
    "stability_experiment",
    "global_existence_monitor",
    "smooth_perturbation",
    "write_trace_csv",
]


class Method(str, enum.Enum):
    ROTATING_FRAME = "rotating_frame"
    DIRECT_SPLIT = "direct_split"


class BlowUpError(RuntimeError):
    def __init__(self, time, ratio):
        super().__init__(f"Sigma_gamma norm grew by {ratio:.3g} at t={time:g}")
        self.time, self.ratio = time, ratio


# --- rotation ----------------------------------------------------------------------


def _shear(values: np.ndarray, grid: Grid, axis: int, other: int, a: float) -> np.ndarray:
    """``f(x + a x_other e_axis)`` by a Fourier phase along ``axis``."""
    k = grid.k(axis)
    x = grid.x(other)
    return ifft1(np.exp(1j * k * a * x) * fft1(values, axis), axis)


def _quarter_turns(values: np.ndarray, q: int) -> np.ndarray:
    """``f(Rot(q pi/2) x)`` on a square planar grid (axes 0, 1)."""
    out = values
    n = values.shape[0]
    idx = (-np.arange(n)) % n
    for _ in range(q % 4):
        # g(x1, x2) = f(-x2, x1)
        out = np.swapaxes(out[idx], 0, 1)
    return out


def rotate_frame(f: ComplexField, t: float, omega: float) -> ComplexField:
    """Resample ``g(x) = f(R_{Omega t} x)``.

    ``R_theta x = (x1 cos theta + x2 sin theta, -x1 sin theta + x2 cos theta)``.
    Exact quarter turns are index permutations; the remaining angle in
    ``[-pi/4, pi/4]`` is done by three Fourier shears.  Every stage is
    unitary, so the L^2 norm is preserved to rounding.  The two planar axes
    must carry identical points and half widths.
    """
    grid = f.grid
    if grid.dim < 2:
        raise ValueError("rotation needs at least two axes")
    if grid.shape[0] != grid.shape[1] or grid.half_widths[0] != grid.half_widths[1]:
        raise ValueError("rotate_frame needs a square planar grid")
    theta = omega * t
    if theta == 0.0:
        return f
    phi = -theta  # R_theta is the counterclockwise rotation by -theta
    q = int(np.round(phi / (np.pi / 2)))
    rest = phi - q * np.pi / 2
    vals = np.asarray(f.values)
    if rest != 0.0:
        a = -np.tan(rest / 2)
        b = np.sin(rest)
        vals = _shear(vals, grid, 0, 1, a)
        vals = _shear(vals, grid, 1, 0, b)
        vals = _shear(vals, grid, 0, 1, a)
    vals = _quarter_turns(vals, q)
    return ComplexField(grid, vals)


# --- integrators ---------------------------------------------------------------------


class _Stepper:
    """One Strang step of either method on raw arrays."""

    def __init__(self, grid: Grid, params: ModelParams, dt: float, method: Method):
        self.grid, self.params, self.dt, self.method = grid, params, dt, method
        self.V = full_potential(grid, params) * np.ones(grid.shape)
        self.p = params.p
        self.on = params.interaction_on
        W = params.omega
        if method is Method.ROTATING_FRAME:
            if not params.isotropic:
                raise ValueError("rotating_frame needs gamma_1 = gamma_2")
            self.kin = np.exp(-0.5j * dt * grid.k_squared)
        else:
            k1, k2 = grid.k(0), grid.k(1)
            x1, x2 = grid.x(0), grid.x(1)
            self.a1 = np.exp(-0.5j * dt * (0.5 * k1**2 + W * x2 * k1))
            self.a2 = np.exp(-0.5j * dt * (0.5 * k2**2 - W * x1 * k2))
            self.rest = [np.exp(-0.5j * dt * grid.k(j) ** 2) for j in range(2, grid.dim)]

    def potential(self, u, tau):
        e = self.V
        if self.on:
            e = e - np.abs(u) ** (self.p - 1)
        return u * np.exp(-1j * tau * e)

    def step(self, u):
        h = self.dt
        u = self.potential(u, 0.5 * h)
        if self.method is Method.ROTATING_FRAME:
            u = ifftn(self.kin * fftn(u))
        else:
            u = ifft1(self.a1 * fft1(u, 0), 0)
            u = ifft1(self.a2 * fft1(u, 1), 1)
            for j, ph in enumerate(self.rest, start=2):
                u = ifft1(ph * ph * fft1(u, j), j)
            u = ifft1(self.a2 * fft1(u, 1), 1)
            u = ifft1(self.a1 * fft1(u, 0), 0)
        return self.potential(u, 0.5 * h)


def _lab_field(v: np.ndarray, grid: Grid, t: float, params: ModelParams, method: Method) -> ComplexField:
    f = ComplexField(grid, v)
    if method is Method.ROTATING_FRAME:
        return rotate_frame(f, -t, params.omega)
    return f


def evolve_field(u0: ComplexField, params: ModelParams, T: float, dt: float, method="rotating_frame") -> ComplexField:
    """Field at time ``T`` (either sign) without monitoring.

    Strang splitting is symmetric, so evolving by ``-T`` undoes ``+T`` up to
    rounding.
    """
    method = Method(method)
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(abs(T) / dt))
    if n == 0:
        return u0
    h = np.sign(T) * abs(T) / n
    st = _Stepper(u0.grid, params, h, method)
    v = np.asarray(u0.values)
    for _ in range(n):
        v = st.step(v)
    return _lab_field(v, u0.grid, T, params, method)


@dataclass
class EvolutionTrace:
    """Sampled observables of one evolution.

    ``momentum_identity_residual`` is
    ``L_Omega(u(t)) + Omega int_0^t int i |u|^2 L_z V - L_Omega(u_0)``
    with the time integral accumulated by the trapezoid rule at every step.
    """

    times: np.ndarray
    mass_series: np.ndarray
    energy_series: np.ndarray
    angular_series: np.ndarray
    h_gamma_series: np.ndarray
    momentum_identity_residual: np.ndarray
    sigma_series: np.ndarray
    field_snapshots: list | None = None
    method: str = "rotating_frame"
    dt: float = 0.0
    blowup_time: float | None = None
    final_field: ComplexField | None = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("mass_series", "energy_series", "angular_series", "h_gamma_series",
                     "momentum_identity_residual", "sigma_series"):
            if len(getattr(self, name)) != n:
                raise ValueError("trace series lengths differ")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trace times must increase strictly")

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None

    def rows(self):
        for row in zip(self.times, self.mass_series, self.energy_series, self.angular_series,
                       self.h_gamma_series, self.momentum_identity_residual):
            yield [float(x) for x in row]


def write_trace_csv(trace: EvolutionTrace, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mass", "energy", "angular", "h_gamma", "identity_residual"])
        for row in trace.rows():
            w.writerow([repr(x) for x in row])
    return path


def _lzv_density(grid: Grid, params: ModelParams) -> np.ndarray:
    """``i L_z V = -(x2 d1 V - x1 d2 V)``, real; zero for isotropic planar traps."""
    g1, g2 = params.gamma_perp, params.gamma_2
    return -(g1**2 - g2**2) * grid.x(0) * grid.x(1)


def propagate(
    u0: ComplexField,
    params: ModelParams,
    T: float,
    dt: float,
    method="rotating_frame",
    samples: int = 50,
    observer: Callable | None = None,
    snapshots: bool = False,
    blowup_factor: float = 1e6,
) -> EvolutionTrace:
    """Evolve ``u0`` to time ``T`` and record observables at ``samples + 1`` times.

    Parameters
    ----------
    method : {"rotating_frame", "direct_split"}
    samples : int
        Number of uniform sampling intervals.
    observer : callable, optional
        Called as ``observer(t, u)`` with the lab-frame field at every sample.
    blowup_factor : float
        Halt when ``||u||_{Sigma_gamma}`` exceeds this multiple of its
        initial value; the trace is truncated and ``blowup_time`` set.
    """
    method = Method(method)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T > 0:
        raise ValueError("T must be positive; use evolve_field for backward runs")
    grid = u0.grid
    n = max(int(round(T / dt)), 1)
    h = T / n
    samples = max(1, min(samples, n))
    sample_at = {int(round(k * n / samples)) for k in range(samples + 1)}
    st = _Stepper(grid, params, h, method)
    lzv = _lzv_density(grid, params)
    w8 = grid.quad_weight

    def corr_density(v):
        # correction integrand is rotation-covariant, so the frame field serves
        return float((np.abs(v) ** 2 * lzv).sum() * w8)

    cols = {k: [] for k in ("t", "mass", "E", "L", "H", "res", "sig")}
    snaps = [] if snapshots else None
    v = np.asarray(u0.values)  # the two frames agree at t = 0
    L0 = None
    sig0 = None
    integral = 0.0
    q_prev = corr_density(v)
    blowup_time = None
    u = u0
    for k in range(n + 1):
        if k > 0:
            v = st.step(v)
            q = corr_density(v)
            integral += 0.5 * h * (q_prev + q)
            q_prev = q
            if k % 10 == 0 and not np.isfinite(q):
                blowup_time = k * h
                break
        if k in sample_at:
            t = k * h
            try:
                u = _lab_field(v, grid, t, params, method)
            except NonFiniteFieldError:
                blowup_time = t
                break
            e = evaluate(u, params)
            sig = np.sqrt(2 * e.magnetic_kinetic + e.potential_partial + e.mass)
            if L0 is None:
                L0, sig0 = e.angular, sig
            cols["t"].append(t)
            cols["mass"].append(e.mass)
            cols["E"].append(e.E_rot)
            cols["L"].append(e.angular)
            cols["H"].append(e.H_gamma)
            cols["res"].append(e.angular + params.omega * integral - L0)
            cols["sig"].append(sig)
            if snaps is not None:
                snaps.append(u)
            if observer is not None:
                observer(t, u)
            if sig > blowup_factor * sig0:
                blowup_time = t
                break
    return EvolutionTrace(
        times=np.asarray(cols["t"]),
        mass_series=np.asarray(cols["mass"]),
        energy_series=np.asarray(cols["E"]),
        angular_series=np.asarray(cols["L"]),
        h_gamma_series=np.asarray(cols["H"]),
        momentum_identity_residual=np.asarray(cols["res"]),
        sigma_series=np.asarray(cols["sig"]),
        field_snapshots=snaps,
        method=method.value,
        dt=h,
        blowup_time=blowup_time,
        final_field=u,
    )


# --- reports -----------------------------------------------------------------------


@dataclass(frozen=True)
class ConservationSummary:
    mass_drift: float
    mass_drift_rate: float
    energy_drift: float
    angular_drift: float
    identity_residual: float
    axisymmetric: bool

    def to_dict(self):
        return asdict(self)


def conservation_report(trace: EvolutionTrace, params: ModelParams) -> ConservationSummary:
    """Maximum drifts over the trace.

    ``mass_drift`` and ``energy_drift`` are relative to the initial values
    (energy relative to ``max(|E_0|, M_0)`` so a vanishing energy does not
    blow up the ratio); ``angular_drift`` is absolute.  For an isotropic
    planar trap ``L_z V = 0`` and the identity reduces to conservation of
    ``L_Omega``.
    """
    if len(trace.times) == 0:
        raise ValueError("empty trace")
    M0, E0, L0 = trace.mass_series[0], trace.energy_series[0], trace.angular_series[0]
    span = trace.times[-1] - trace.times[0]
    md = float(np.max(np.abs(trace.mass_series - M0)) / M0)
    return ConservationSummary(
        mass_drift=md,
        mass_drift_rate=md / span if span > 0 else 0.0,
        energy_drift=float(np.max(np.abs(trace.energy_series - E0)) / max(abs(E0), M0)),
        angular_drift=float(np.max(np.abs(trace.angular_series - L0))),
        identity_residual=float(np.max(np.abs(trace.momentum_identity_residual))),
        axisymmetric=params.isotropic,
    )


def smooth_perturbation(phi: ComplexField, params: ModelParams, seed) -> ComplexField:
    """Seeded band-limited random field (half-Nyquist cutoff) under a Gaussian
    envelope matched to the trap, scaled to ``||eta||_Sigma = ||phi||_Sigma``."""
    rng = np.random.default_rng(seed)
    grid = phi.grid
    widths = [g**-0.5 for g in params.gammas]
    eta = random_smooth_field(grid, rng, band=0.5, widths=widths)
    scale = np.sqrt(sigma_gamma_norm(phi, params) / sigma_gamma_norm(eta, params))
    return eta * scale


@dataclass
class StabilityReport:
    """``max_distance`` is the largest symmetry distance over the samples,
    relative to ``||phi||_Sigma``; ``lower_bound`` is the ``t = 0`` ratio."""

    delta: float
    max_distance: float
    ratio: float
    verdict: str
    lower_bound: float
    T: float
    seed: object
    times: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    blowup_time: float | None = None
    monitor: dict | None = None

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), default=float, **kw)


def stability_experiment(
    phi: MinimizerResult,
    delta: float,
    T: float,
    params: ModelParams,
    perturbation_seed=0,
    dt: float = 1e-2,
    samples: int = 50,
    method="rotating_frame",
    threshold: float = 10.0,
) -> StabilityReport:
    """Perturb a minimizer, evolve, and track its distance to the orbit.

    ``u0 = phi + delta eta`` renormalized to the mass of ``phi``, with ``eta``
    from :func:`smooth_perturbation`.  The verdict is ``STABLE_AT_SCALE`` when
    the maximal relative distance stays within ``threshold * delta``.  For
    mass-supercritical ``p`` the global-existence monitor is attached.
    """
    if not 0 <= delta <= 0.1:
        raise ValueError("delta must lie in [0, 0.1]")
    if not phi.converged:
        raise ValueError(f"phi is not a converged minimizer ({phi.status.value})")
    base = phi.field
    c = phi.mass
    eta = smooth_perturbation(base, params, perturbation_seed)
    u0 = (base + delta * eta).normalized(c)
    norm_phi = np.sqrt(sigma_gamma_norm(base, params))
    times, dists = [], []

    def obs(t, u):
        d, _ = symmetry_distance(u, base, params)
        times.append(t)
        dists.append(d / norm_phi)

    trace = propagate(u0, params, T, dt, method=method, samples=samples, observer=obs)
    max_d = float(max(dists))
    monitor = None
    if params.regime == "supercritical":
        monitor = global_existence_monitor(trace, params).to_dict()
    if trace.blew_up:
        verdict = "GROWTH_DETECTED"
    else:
        verdict = "STABLE_AT_SCALE" if max_d <= threshold * delta else "GROWTH_DETECTED"
    return StabilityReport(
        delta=delta,
        max_distance=max_d,
        ratio=max_d / delta if delta > 0 else float("inf") if max_d > 0 else 0.0,
        verdict=verdict,
        lower_bound=dists[0] / delta if delta > 0 else 0.0,
        T=T,
        seed=perturbation_seed,
        times=times,
        distances=dists,
        blowup_time=trace.blowup_time,
        monitor=monitor,
    )


@dataclass(frozen=True)
class GlobalExistenceCheck:
    """``a = 2|E(u0)| + H(u0)/2``, ``b = 4 C_{p+1} M^beta/(p+1)``; the
    contradiction argument closes when ``b <= b0 = 1/(2^alpha a^{alpha-1})``."""

    status: str
    a: float
    b: float
    b0: float
    b_below_threshold: bool
    max_h_gamma: float

    def to_dict(self):
        return asdict(self)


def global_existence_monitor(trace: EvolutionTrace, params: ModelParams) -> GlobalExistenceCheck:
    """Check ``H_gamma(u(t)) <= 2a`` on every sample (supercritical ``p`` only)."""
    nan = float("nan")
    if params.regime != "supercritical":
        return GlobalExistenceCheck("SKIPPED", nan, nan, nan, False, nan)
    N, p = params.dim, params.p
    alpha = N * (p - 1) / 4
    beta = (4 - (N - 2) * (p - 1)) / 4
    C = sharp_gn_constant(N, p + 1.0)
    E0, H0, M0 = trace.energy_series[0], trace.h_gamma_series[0], trace.mass_series[0]
    a = 2 * abs(E0) + 0.5 * H0
    b = 4 * C / (p + 1) * M0**beta
    b0 = 1.0 / (2**alpha * a ** (alpha - 1))
    hmax = float(np.max(trace.h_gamma_series))
    ok = hmax <= 2 * a and not trace.blew_up
    return GlobalExistenceCheck("PASS" if ok else "FAIL", a, b, b0, bool(b < b0), hmax)
