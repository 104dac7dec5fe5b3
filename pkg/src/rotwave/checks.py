"""Inequality battery over random smooth fields.

Every check takes its tolerance from :class:`VerifyTolerances`; there are no
thresholds hidden in the code.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .functionals import (
    ModelParams,
    check_diamagnetic,
    evaluate,
    ground_gaussian,
    norm_equivalence_constants,
    sigma_gamma_norm,
)
from .grid import Grid, GridSpec, build_grid, derivative_values, integrate, random_smooth_field
from .qsolver import gn_quotient, sharp_gn_constant

__all__ = [
    "VerifyTolerances",
    "CheckResult",
    "sample_fields",
    "check_gaussian_identities",
    "check_norm_sandwich",
    "check_sigma_equivalence",
    "check_diamagnetic_battery",
    "check_magnetic_gn",
    "check_magnetic_lower_bound",
    "check_linear_lower_bound",
    "run_battery",
]


@dataclass(frozen=True)
class VerifyTolerances:
    """Declared tolerances of the battery.

    ``identity`` applies to the Gaussian equalities, ``inequality`` is the
    allowed negative slack (relative to the larger side) of the sampled
    inequalities, and ``diamagnetic`` is relative to ``max |grad f|``.
    """

    samples: int = 200
    seed: int = 0
    identity: float = 1e-8
    inequality: float = 1e-8
    diamagnetic: float = 1e-8

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be positive")
        for name in ("identity", "inequality", "diamagnetic"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    samples: int
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} n={self.samples}"


def sample_fields(grid: Grid, count: int, seed: int = 0, unit_mass: bool = True, gamma: float = 1.0):
    """Yield ``count`` random smooth fields from three families, in turn.

    * band-limited noise under a random Gaussian envelope;
    * lowest-Landau-level states ``P(x1 + i x2) exp(-gamma |x_perp|^2 / 2)``
      with a random cubic ``P``, which attain the ``2 gamma`` bound;
    * the ground Gaussian with a small smooth random admixture.

    Transverse axes carry a Gaussian of random width in the last two families.
    """
    rng = np.random.default_rng(seed)
    for i in range(count):
        kind = i % 3
        if kind == 0:
            widths = [rng.uniform(0.08, 0.2) * L for L in grid.half_widths]
            center = [rng.uniform(-0.15, 0.15) * L for L in grid.half_widths]
            f = random_smooth_field(grid, rng, band=rng.uniform(0.1, 0.3), widths=widths, center=center)
        else:
            z = grid.x(0) + 1j * grid.x(1)
            planar = np.exp(-0.5 * gamma * (grid.x(0) ** 2 + grid.x(1) ** 2))
            trans = np.ones(grid.shape)
            for j in range(2, grid.dim):
                trans = trans * np.exp(-0.5 * grid.x(j) ** 2 / rng.uniform(0.5, 1.5) ** 2)
            if kind == 1:
                coef = rng.standard_normal(4) + 1j * rng.standard_normal(4)
                poly = sum(c * (np.sqrt(gamma) * z) ** k / np.sqrt(np.prod(range(1, k + 1))) for k, c in enumerate(coef))
                vals = poly * planar * trans
            else:
                bump = random_smooth_field(grid, rng, band=0.15, widths=[2.0] * grid.dim).values
                vals = planar * trans * (1.0 + rng.uniform(1e-3, 0.3) * bump / np.abs(bump).max())
            f = grid.field(vals)
        yield f.normalized(1.0) if unit_mass else f


def _moment(f, grid):
    return integrate(grid.r_squared * np.abs(f.values) ** 2, grid)


def check_gaussian_identities(grid: Grid, params: ModelParams, tol: VerifyTolerances) -> CheckResult:
    """Equalities attained by the unit-mass Gaussian: the ``2 gamma`` bound, ``omega0`` and (2D) the Sigma norm."""
    g = ground_gaussian(grid, params, 1.0)
    lin = params.replace(interaction_on=False, omega=0.0)
    e = evaluate(g, lin)
    mag_planar = 2.0 * e.magnetic_kinetic - 2.0 * _transverse_kinetic(g)
    errs = {
        "two_gamma": abs(mag_planar - 2.0 * params.gamma_perp) / (2.0 * params.gamma_perp),
        "omega0": abs(e.magnetic_kinetic + e.potential_partial - params.omega0) / params.omega0,
        "mass": abs(e.mass - 1.0),
    }
    if params.dim == 2:
        errs["sigma_norm"] = abs(sigma_gamma_norm(g, lin) - (2.0 * params.gamma_perp + 1.0))
    worst = max(errs.values())
    return CheckResult("gaussian_identities", worst <= tol.identity, worst, tol.identity, 1, errs)


def _transverse_kinetic(f) -> float:
    grid = f.grid
    return 0.5 * sum(integrate(np.abs(derivative_values(f.values, grid, j)) ** 2, grid) for j in range(2, grid.dim))


def _battery_loop(name, grid, params, tol, fn) -> CheckResult:
    worst = -np.inf
    extra = {}
    n = 0
    for f in sample_fields(grid, tol.samples, tol.seed, gamma=params.gamma_perp):
        val, info = fn(f)
        n += 1
        if val > worst:
            worst, extra = val, info
    return CheckResult(name, bool(worst <= tol.inequality), float(worst), tol.inequality, n, extra)


def check_norm_sandwich(grid: Grid, params: ModelParams, tol: VerifyTolerances) -> CheckResult:
    """``C2 (|grad f|^2 + |x f|^2) <= |grad f|^2 + 2 V(f) - 2 L_Omega(f) <= C1 (...)``.

    ``worst`` is the largest violation relative to the middle term.
    """
    C = norm_equivalence_constants(params)

    def one(f):
        e = evaluate(f, params.replace(interaction_on=False))
        base = 2.0 * e.kinetic + _moment(f, grid)
        middle = 2.0 * e.kinetic + 2.0 * e.potential_full - 2.0 * e.angular
        low = (C.C2 * base - middle) / middle
        high = (middle - C.C1 * base) / middle
        return max(low, high), {"C1": C.C1, "C2": C.C2}

    return _battery_loop("norm_sandwich", grid, params, tol, one)


def check_sigma_equivalence(grid: Grid, params: ModelParams, tol: VerifyTolerances) -> CheckResult:
    """``|D f|^2 <= 6 (|grad f|^2 + |x f|^2)`` and ``|grad f|^2 <= 2 (|D f|^2 + |x f|^2)``."""

    def one(f):
        e = evaluate(f, params.replace(interaction_on=False))
        grad, mag, mom = 2.0 * e.kinetic, 2.0 * e.magnetic_kinetic, _moment(f, grid)
        a = (mag - 6.0 * (grad + mom)) / mag
        b = (grad - 2.0 * (mag + mom)) / grad
        return max(a, b), {}

    return _battery_loop("sigma_equivalence", grid, params, tol, one)


def check_diamagnetic_battery(grid: Grid, params: ModelParams, tol: VerifyTolerances) -> CheckResult:
    """Pointwise diamagnetic excess relative to ``max |grad f|``."""
    worst = 0.0
    n = 0
    fails = 0
    for f in sample_fields(grid, tol.samples, tol.seed, gamma=params.gamma_perp):
        rep = check_diamagnetic(f, params, rel_tol=tol.diamagnetic)
        n += 1
        fails += not rep.passed
        worst = max(worst, rep.max_excess / max(rep.tolerance / tol.diamagnetic, 1e-300))
    return CheckResult("diamagnetic", fails == 0, worst, tol.diamagnetic, n, {"failures": fails})


def check_magnetic_gn(grid: Grid, params: ModelParams, tol: VerifyTolerances, constant: float | None = None) -> CheckResult:
    """``|f|_r^r <= C_r |D f|^{N(r-2)/2} |f|^{(2r-N(r-2))/2}`` with ``r = p + 1`` and the sharp ``C_r``.

    ``worst`` is ``quotient / C_r - 1``; the inequality is expected to be strict.
    """
    N, r = grid.dim, params.p + 1.0
    if constant is None:
        constant = sharp_gn_constant(N, r)

    def one(f):
        e = evaluate(f, params.replace(interaction_on=False))
        lp = integrate(np.abs(f.values) ** r, grid)
        q = gn_quotient(N, r, 2.0 * e.magnetic_kinetic, e.mass, lp)
        return q / constant - 1.0, {"C_r": constant, "r": r}

    res = _battery_loop("magnetic_gn", grid, params, tol, one)
    res.detail["strict"] = bool(res.worst < 0.0)
    res.passed = res.passed and res.detail["strict"]
    return res


def check_magnetic_lower_bound(grid: Grid, params: ModelParams, tol: VerifyTolerances) -> CheckResult:
    """``sum_j |(d_j - i A_j) f|^2 >= 2 gamma |f|^2``; ``worst`` is the relative deficit."""
    g = params.gamma_perp

    def one(f):
        e = evaluate(f, params.replace(interaction_on=False))
        return (2.0 * g * e.mass - 2.0 * e.magnetic_kinetic) / (2.0 * g * e.mass), {}

    return _battery_loop("two_gamma_bound", grid, params, tol, one)


def check_linear_lower_bound(grid: Grid, params: ModelParams, tol: VerifyTolerances) -> CheckResult:
    """``1/2 |D f|^2 + int V_gamma |f|^2 >= omega0`` for unit mass; ``worst`` is the deficit."""
    w0 = params.omega0

    def one(f):
        e = evaluate(f, params.replace(interaction_on=False))
        return w0 * e.mass - (e.magnetic_kinetic + e.potential_partial), {}

    return _battery_loop("omega0_lower_bound", grid, params, tol, one)


def default_verify_grid(params: ModelParams) -> Grid:
    n = 128 if params.dim == 2 else 32
    L = (8.0 if params.dim == 2 else 6.0) * max(g**-0.5 for g in params.gammas)
    return build_grid(GridSpec.uniform(params.dim, L, n))


def run_battery(params: ModelParams, tol: VerifyTolerances | None = None, grid: Grid | None = None) -> list[CheckResult]:
    """Run all checks; the sandwich is skipped at critical rotation where it does not hold."""
    tol = tol or VerifyTolerances()
    grid = grid or default_verify_grid(params)
    out = [
        check_gaussian_identities(grid, params, tol),
        check_magnetic_lower_bound(grid, params, tol),
        check_linear_lower_bound(grid, params, tol),
        check_sigma_equivalence(grid, params, tol),
        check_diamagnetic_battery(grid, params, tol),
        check_magnetic_gn(grid, params, tol),
    ]
    if params.omega < params.gamma_perp and params.isotropic:
        out.insert(1, check_norm_sandwich(grid, params, tol))
    return out
