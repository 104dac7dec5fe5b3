"""Configuration-driven runner.

Usage::

    rotwave [CONFIG.json] [--dotted.path=value ...]

One experiment per invocation.  Every run writes ``resolved_config.json``
(all defaults filled in) and ``manifest.json`` (sha256 of every produced
file) into ``output_dir``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, field_validator, model_validator

from . import grid as _grid
from .checks import VerifyTolerances, default_verify_grid, run_battery
from .dynamics import BlowUpError, conservation_report, propagate, smooth_perturbation, stability_experiment, write_trace_csv
from .functionals import ModelParams
from .grid import GridSpec, NonFiniteFieldError, build_grid
from .io import read_field, sha256_file, write_field
from .minimizer import (
    InitKind,
    MinimizeSpec,
    Status,
    analytic_bounds,
    default_grid,
    default_probe_grid,
    fit_concentration_coefficients,
    gaussian_product_energy,
    make_initial,
    minimize_global,
    minimize_local_ball,
    nonexistence_probe,
    predicted_concentration_coefficient,
)
from .qsolver import ShootingError, critical_mass, gradient_flow_critical_mass, solve_ground_profile, write_profile

__all__ = ["RunConfig", "RunOutcome", "run_config", "load_config", "main", "EXIT_OK", "EXIT_INVALID", "EXIT_NUMERICAL", "EXIT_VERIFY"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4

Experiment = Literal["ground", "local_ground", "q", "verify", "evolve", "stability", "sweep", "nonexistence"]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelBlock(_Block):
    dim: Literal[2, 3] = 2
    p: float = 3.0
    omega: float = 0.0
    gamma_perp: PositiveFloat = 1.0
    gamma_perp2: Optional[PositiveFloat] = None
    gamma_rest: list[PositiveFloat] = Field(default_factory=list)
    interaction_on: bool = True

    @model_validator(mode="after")
    def _check(self):
        self.to_params()
        return self

    def to_params(self) -> ModelParams:
        return ModelParams(
            dim=self.dim,
            p=self.p,
            omega=self.omega,
            gamma_perp=self.gamma_perp,
            gamma_rest=tuple(self.gamma_rest),
            interaction_on=self.interaction_on,
            gamma_perp2=self.gamma_perp2,
        )


class GridBlock(_Block):
    """``None`` entries fall back to the minimizer's default box."""

    half_width: Optional[PositiveFloat] = None
    points: Optional[PositiveInt] = None

    @field_validator("points")
    @classmethod
    def _power_of_two(cls, n):
        if n is not None and (n < 8 or n & (n - 1)):
            raise ValueError(f"points must be a power of two >= 8, got {n}")
        return n


class MinimizeBlock(_Block):
    c: PositiveFloat = 1.0
    m: Optional[PositiveFloat] = None
    step: PositiveFloat = 1e-2
    max_iters: PositiveInt = 5000
    tol_residual: PositiveFloat = 1e-8
    tol_energy: PositiveFloat = 1e-12
    init: InitKind = InitKind.GAUSSIAN_PRODUCT
    energy_window: PositiveInt = 50
    conjugate: bool = True

    def to_spec(self, **changes) -> MinimizeSpec:
        d = self.model_dump()
        d.update(changes)
        return MinimizeSpec(**d)


class DynamicsBlock(_Block):
    T: PositiveFloat = 1.0
    dt: PositiveFloat = 1e-2
    method: Literal["rotating_frame", "direct_split"] = "rotating_frame"
    delta: float = Field(default=1e-2, ge=0.0, le=0.1)
    seed: int = 0
    seeds: Optional[list[int]] = None
    samples: PositiveInt = 50
    threshold: PositiveFloat = 10.0
    blowup_factor: PositiveFloat = 1e6
    initial_field: Optional[str] = None

    def seed_list(self) -> list[int]:
        return list(self.seeds) if self.seeds is not None else [self.seed]


class VerifyBlock(_Block):
    samples: PositiveInt = 200
    seed: int = 0
    identity: PositiveFloat = 1e-8
    inequality: PositiveFloat = 1e-8
    diamagnetic: PositiveFloat = 1e-8

    def to_tolerances(self) -> VerifyTolerances:
        return VerifyTolerances(**self.model_dump())


class QBlock(_Block):
    """``exponent=None`` selects the mass-critical ``2 + 4/N``."""

    dim: Optional[Literal[2, 3]] = None
    exponent: Optional[float] = None
    tol: PositiveFloat = 1e-15
    r_max: PositiveFloat = 30.0
    oracle: bool = True
    oracle_tol: PositiveFloat = 1e-3
    pohozaev_tol: PositiveFloat = 1e-6


class SweepBlock(_Block):
    """Masses are ``c_values``, or ``fractions`` times ``M(Q)`` when ``c_values`` is empty."""

    c_values: list[PositiveFloat] = Field(default_factory=list)
    fractions: list[PositiveFloat] = Field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    m_values: list[Optional[PositiveFloat]] = Field(default_factory=lambda: [None])
    workers: PositiveInt = 1


class NonexistenceBlock(_Block):
    """Mass ``c``, or ``c_fraction * M(Q)`` when ``c`` is unset."""

    c: Optional[PositiveFloat] = None
    c_fraction: PositiveFloat = 1.2
    lambdas: list[PositiveFloat] = Field(default_factory=lambda: [2.0, 4.0, 8.0])
    family: Optional[Literal["concentration", "dilation"]] = None


_REQUIRED = {
    "ground": ("minimize",),
    "local_ground": ("minimize",),
    "q": ("q",),
    "verify": ("verify",),
    "evolve": ("dynamics",),
    "stability": ("minimize", "dynamics"),
    "sweep": ("minimize", "sweep"),
    "nonexistence": ("nonexistence",),
}


class RunConfig(_Block):
    experiment: Experiment
    model: ModelBlock = Field(default_factory=ModelBlock)
    grid: GridBlock = Field(default_factory=GridBlock)
    minimize: Optional[MinimizeBlock] = None
    dynamics: Optional[DynamicsBlock] = None
    verify: Optional[VerifyBlock] = None
    q: Optional[QBlock] = None
    sweep: Optional[SweepBlock] = None
    nonexistence: Optional[NonexistenceBlock] = None
    output_dir: str = "rotwave_out"
    tag: str = ""
    fft_workers: PositiveInt = 1

    @model_validator(mode="before")
    @classmethod
    def _fill_blocks(cls, data):
        # Blocks whose defaults fully specify the experiment may be omitted.
        if isinstance(data, dict):
            exp = data.get("experiment")
            for name in _REQUIRED.get(exp, ()):
                if name in ("q", "verify", "nonexistence", "sweep") and data.get(name) is None:
                    data = {**data, name: {}}
        return data

    @model_validator(mode="after")
    def _check_blocks(self):
        for name in _REQUIRED[self.experiment]:
            if getattr(self, name) is None:
                raise ValueError(f"experiment {self.experiment!r} needs a {name!r} block")
        if self.experiment == "local_ground" and self.minimize.m is None:
            raise ValueError("experiment 'local_ground' needs minimize.m")
        return self

    def params(self) -> ModelParams:
        return self.model.to_params()

    def default_grid(self):
        params = self.params()
        if self.experiment == "verify":
            return default_verify_grid(params)
        if self.experiment == "nonexistence":
            return default_probe_grid(params.dim, self.nonexistence.lambdas)
        return default_grid(params)

    def resolved(self) -> "RunConfig":
        """Copy with the grid block filled in from the experiment default."""
        g = self.default_grid()
        hw = self.grid.half_width if self.grid.half_width is not None else g.half_widths[0]
        n = self.grid.points if self.grid.points is not None else g.shape[0]
        return self.model_copy(update={"grid": GridBlock(half_width=hw, points=n)})

    def build_grid(self):
        if self.grid.half_width is None or self.grid.points is None:
            return self.resolved().build_grid()
        return build_grid(GridSpec.uniform(self.model.dim, self.grid.half_width, self.grid.points))


# --- config loading -----------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``--a.b.c=value`` overrides; values are parsed as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ValueError(f"override {item!r} is not of the form --dotted.path=value")
        path, value = item[2:].split("=", 1)
        keys = path.replace("-", "_").split(".")
        node = data
        for k in keys[:-1]:
            if node.get(k) is None:
                node[k] = {}
            node = node[k]
            if not isinstance(node, dict):
                raise ValueError(f"override {item!r}: {k!r} is not a block")
        node[keys[-1]] = _parse_value(value)
    return data


def load_config(path=None, overrides=()) -> RunConfig:
    data = {} if path is None else json.loads(Path(path).read_text())
    return RunConfig.model_validate(apply_overrides(data, list(overrides)))


# --- outputs ------------------------------------------------------------------------


class RunOutcome:
    """Exit status, produced files and a short human summary."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[Path] = []
        self.status = EXIT_OK
        self.summary: dict = {}
        self.error: str | None = None

    def add(self, *paths):
        for p in paths:
            if isinstance(p, (list, tuple)):
                self.add(*p)
            else:
                self.files.append(Path(p))

    def write_json(self, name, obj) -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
        self.add(path)
        return path

    def fail(self, code, message):
        self.status = max(self.status, code)
        self.error = message if self.error is None else f"{self.error}; {message}"

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / "manifest.json"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write_manifest(cfg: RunConfig, out: RunOutcome) -> Path:
    files = sorted({p.resolve() for p in out.files if p.exists()})
    root = out.out_dir.resolve()
    entries = [
        {"path": str(p.relative_to(root)), "sha256": sha256_file(p), "bytes": p.stat().st_size}
        for p in files
    ]
    manifest = {
        "schema": "rotwave-manifest-1",
        "experiment": cfg.experiment,
        "tag": cfg.tag,
        "exit_status": out.status,
        "error": out.error,
        "files": entries,
    }
    out.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out.manifest_path


_NUMERICAL_STATUS = {Status.NOT_CONVERGED, Status.NO_MINIMIZER_EVIDENCE, Status.BOUNDARY_ATTACHED}


def _minimize(cfg: RunConfig, params, grid, spec):
    if spec.m is None:
        return minimize_global(spec, params, grid)
    return minimize_local_ball(spec, params, grid)


def _record_minimizer(out: RunOutcome, res, params, stem="ground"):
    out.add(out.write_json(f"{stem}.json", json.loads(res.to_json())))
    out.add(write_field(res.field, out.out_dir / f"{stem}.rwf", params))
    if res.status is Status.INFEASIBLE:
        out.fail(EXIT_INVALID, res.message)
    elif res.status in _NUMERICAL_STATUS:
        out.fail(EXIT_NUMERICAL, f"{res.status.value}: {res.message}")


# --- experiments --------------------------------------------------------------------


def _run_ground(cfg: RunConfig, out: RunOutcome):
    params, grid = cfg.params(), cfg.build_grid()
    spec = cfg.minimize.to_spec()
    res = _minimize(cfg, params, grid, spec)
    _record_minimizer(out, res, params)
    summary = res.summary()
    summary["omega0_c"] = params.omega0 * spec.c
    if params.interaction_on:
        summary["gaussian_product_energy"] = gaussian_product_energy(spec.c, params)
    if cfg.experiment == "local_ground":
        b = analytic_bounds(spec.c, spec.m, params)
        out.write_json("bounds.json", b.to_dict())
        lo, hi = b.omega_window
        summary["omega_in_window"] = bool(lo < res.multiplier < hi)
    out.summary = summary


def _run_q(cfg: RunConfig, out: RunOutcome):
    qb = cfg.q
    N = qb.dim or cfg.model.dim
    r = qb.exponent if qb.exponent is not None else 2.0 + 4.0 / N
    prof = solve_ground_profile(N, r, tol=qb.tol, r_max=qb.r_max)
    out.add(write_profile(prof, out.out_dir / "profile"))
    cert = prof.certificate()
    summary = {"mass": prof.mass, "gn_constant": prof.gn_constant, "pohozaev_residuals": list(prof.pohozaev_residuals)}
    if max(prof.pohozaev_residuals) >= qb.pohozaev_tol:
        out.fail(EXIT_VERIFY, f"Pohozaev residuals {prof.pohozaev_residuals} exceed {qb.pohozaev_tol}")
    if qb.oracle and N == 2:
        g = build_grid(GridSpec.uniform(2, 16.0, 256))
        M_flow = gradient_flow_critical_mass(g, r=r)
        rel = abs(M_flow - prof.mass) / prof.mass
        summary.update(oracle_mass=M_flow, oracle_rel_diff=rel)
        cert.update(oracle_mass=M_flow, oracle_rel_diff=rel)
        if rel >= qb.oracle_tol:
            out.fail(EXIT_VERIFY, f"gradient-flow oracle differs by {rel:.3g}")
    out.write_json("certificate_summary.json", cert)
    out.summary = summary


def _run_verify(cfg: RunConfig, out: RunOutcome):
    params = cfg.params()
    results = run_battery(params, cfg.verify.to_tolerances(), cfg.build_grid())
    out.write_json("verify.json", [r.to_dict() for r in results])
    for r in results:
        print(r.line())
        if not r.passed:
            out.fail(EXIT_VERIFY, f"{r.name} failed")
    out.summary = {r.name: r.passed for r in results}


def _initial_for_dynamics(cfg: RunConfig, params, grid):
    dyn = cfg.dynamics
    if dyn.initial_field:
        f, _ = read_field(dyn.initial_field)
        return f
    mb = cfg.minimize or MinimizeBlock()
    f = make_initial(mb.init, mb.c, params, grid)
    if dyn.delta > 0:
        f = (f + dyn.delta * smooth_perturbation(f, params, dyn.seed)).normalized(mb.c)
    return f


def _run_evolve(cfg: RunConfig, out: RunOutcome):
    params = cfg.params()
    u0 = _initial_for_dynamics(cfg, params, cfg.build_grid())
    dyn = cfg.dynamics
    trace = propagate(u0, params, dyn.T, dyn.dt, method=dyn.method, samples=dyn.samples, blowup_factor=dyn.blowup_factor)
    out.add(write_trace_csv(trace, out.out_dir / "trace.csv"))
    rep = conservation_report(trace, params).to_dict()
    rep["blowup_time"] = trace.blowup_time
    out.write_json("conservation.json", rep)
    out.add(write_field(trace.final_field, out.out_dir / "final.rwf", params))
    if trace.blew_up:
        out.fail(EXIT_NUMERICAL, f"blow-up alternative triggered at t={trace.blowup_time:g}")
    out.summary = rep


def _run_stability(cfg: RunConfig, out: RunOutcome):
    params, grid = cfg.params(), cfg.build_grid()
    res = _minimize(cfg, params, grid, cfg.minimize.to_spec())
    _record_minimizer(out, res, params)
    if not res.converged:
        return
    dyn = cfg.dynamics
    summary = {}
    for seed in dyn.seed_list():
        rep = stability_experiment(
            res, dyn.delta, dyn.T, params, perturbation_seed=seed, dt=dyn.dt,
            samples=dyn.samples, method=dyn.method, threshold=dyn.threshold,
        )
        out.write_json(f"stability_seed{seed}.json", rep.to_dict())
        summary[seed] = {"verdict": rep.verdict, "ratio": rep.ratio}
        if rep.verdict != "STABLE_AT_SCALE":
            out.fail(EXIT_VERIFY, f"seed {seed}: {rep.verdict} (ratio {rep.ratio:.3g})")
        if rep.monitor is not None:
            summary[seed]["monitor"] = rep.monitor["status"]
            if rep.monitor["status"] != "PASS":
                out.fail(EXIT_VERIFY, f"seed {seed}: global-existence monitor {rep.monitor['status']}")
    out.summary = summary


def _sweep_job(job: dict) -> dict:
    """Worker entry point: one minimization in its own output directory."""
    cfg = RunConfig.model_validate(job["config"])
    _grid.FFT_WORKERS = cfg.fft_workers
    params, grid = cfg.params(), cfg.build_grid()
    spec = cfg.minimize.to_spec(c=job["c"], m=job["m"])
    sub = Path(job["dir"])
    sub.mkdir(parents=True, exist_ok=True)
    try:
        res = _minimize(cfg, params, grid, spec)
    except (NonFiniteFieldError, FloatingPointError) as exc:
        return {"c": job["c"], "m": job["m"], "status": "NUMERICAL_ERROR", "error": str(exc), "files": []}
    files = [sub / "result.json"]
    files[0].write_text(json.dumps(json.loads(res.to_json()), indent=2, sort_keys=True) + "\n")
    files += write_field(res.field, sub / "field.rwf", params)
    return {
        "c": spec.c,
        "m": spec.m,
        "energy": res.energy,
        "omega": res.multiplier,
        "h_gamma": res.h_gamma,
        "residual": res.residual,
        "boundary_flag": res.boundary_flag,
        "status": res.status.value,
        "files": [str(f) for f in files],
    }


def _run_sweep(cfg: RunConfig, out: RunOutcome):
    params = cfg.params()
    sw = cfg.sweep
    if sw.c_values:
        cs = list(sw.c_values)
    else:
        cs = [f * critical_mass(params.dim) for f in sw.fractions]
    base = cfg.model_dump(mode="json")
    jobs = []
    for i, (c, m) in enumerate(itertools.product(cs, sw.m_values)):
        jobs.append({"config": base, "c": float(c), "m": m, "dir": str(out.out_dir / f"job_{i:03d}")})
    if sw.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=sw.workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    cols = ["c", "m", "energy", "omega", "h_gamma", "residual", "boundary_flag"]
    path = out.out_dir / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r.get(k) is None else repr(r.get(k)) for k in cols])
    out.add(path)
    for r in rows:
        out.add(*r.pop("files"))
    ok = sorted((r for r in rows if r["status"] == Status.CONVERGED.value), key=lambda r: r["c"])
    per_mass = [r["energy"] / r["c"] for r in ok]
    diag = {
        "jobs": rows,
        "all_converged": len(ok) == len(rows),
        "energy_per_mass": per_mass,
        "energy_per_mass_nonincreasing": bool(np.all(np.diff(per_mass) <= 1e-12)),
        "below_linear_bound": bool(all(r["energy"] < params.omega0 * r["c"] for r in ok)),
    }
    out.write_json("sweep_summary.json", diag)
    if len(ok) != len(rows):
        bad = [f"c={r['c']:g}: {r['status']}" for r in rows if r["status"] != Status.CONVERGED.value]
        out.fail(EXIT_NUMERICAL, "; ".join(bad))
    out.summary = {k: v for k, v in diag.items() if k != "jobs"}


def _run_nonexistence(cfg: RunConfig, out: RunOutcome):
    params = cfg.params()
    nb = cfg.nonexistence
    c = nb.c if nb.c is not None else nb.c_fraction * critical_mass(params.dim)
    pts = nonexistence_probe(c, params, nb.lambdas, grid=cfg.build_grid(), family=nb.family)
    path = out.out_dir / "probe.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "energy"])
        for lam, e in pts:
            w.writerow([repr(lam), repr(e)])
    out.add(path)
    summary = {"c": c, "points": pts}
    if params.regime == "critical" and len(pts) >= 2:
        a, b = fit_concentration_coefficients(pts)
        pred = predicted_concentration_coefficient(c, params.dim)
        summary.update(fitted_lambda2=a, fitted_lambda_minus2=b, predicted_lambda2=pred,
                       relative_error=abs(a - pred) / abs(pred))
    out.write_json("nonexistence.json", summary)
    out.summary = summary


_RUNNERS = {
    "ground": _run_ground,
    "local_ground": _run_ground,
    "q": _run_q,
    "verify": _run_verify,
    "evolve": _run_evolve,
    "stability": _run_stability,
    "sweep": _run_sweep,
    "nonexistence": _run_nonexistence,
}


def run_config(cfg: RunConfig) -> RunOutcome:
    """Run one experiment and write ``resolved_config.json`` and ``manifest.json``."""
    cfg = cfg.resolved()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = RunOutcome(out_dir)
    _grid.FFT_WORKERS = cfg.fft_workers
    out.write_json("resolved_config.json", cfg.model_dump(mode="json"))
    try:
        _RUNNERS[cfg.experiment](cfg, out)
    except (ShootingError, BlowUpError, NonFiniteFieldError, FloatingPointError) as exc:
        out.fail(EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        out.fail(EXIT_INVALID, f"{type(exc).__name__}: {exc}")
    _write_manifest(cfg, out)
    return out


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(prog="rotwave", description="Run one rotwave experiment from a JSON config.")
    parser.add_argument("config", nargs="?", help="JSON configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    known, overrides = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if known.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(known.config, overrides)
    except ValidationError as exc:
        print(_format_validation(exc), file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = run_config(cfg)
    print(json.dumps({"experiment": cfg.experiment, "exit_status": out.status, "summary": out.summary,
                      "error": out.error, "manifest": str(out.manifest_path)}, default=_json_default, indent=2))
    if out.error:
        print(out.error, file=sys.stderr)
    return out.status


if __name__ == "__main__":
    sys.exit(main())
