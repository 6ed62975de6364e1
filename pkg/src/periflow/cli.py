"""Experiment runner: config parsing, scenario dispatch, reproducible output.

Configs are INI files with sections [surface] [problem] [discretization]
[output]; unknown keys are rejected.  Every run writes CSV data files plus a
manifest listing the resolved configuration, per-check pass/fail lines and
content digests of the outputs.  Identical configs and seeds produce
byte-identical data files.

Exit codes: 0 all checks passed, 1 a check or solver failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    compatibility_check,
    holder_estimate,
    interpolation_check,
    mass_ledger,
)
from .errors import ConfigError, ContractionBoundError, PeriflowError
from .evolution import IVPConfig, solve_ivp
from .expressions import compile_expression
from .fields import ParameterGrid, ScalarField, SpaceTimeField
from .metric import (
    assemble_metric,
    greens_formula_check,
    pullback_identity_check,
    trace_identity,
)
from .narrowband import (
    band_average_extract,
    band_field_csv,
    build_band,
    eikonal_residual,
    extended_operator_apply,
    flat_strip_step_equivalence,
    lift_field,
    os_operator_equivalence,
)
from .periodic import (
    PeriodicProblem,
    contraction_estimate,
    fixed_point_solve,
    make_propagator,
    monodromy_solve,
    periodicity_residuals,
)
from .fields import AmbientField, AnalyticField
from .surfaces import FAMILIES, SurfaceFamily, build_frame, commutator_check

SCENARIOS = {
    "ivp": "initial value solve with mass ledger",
    "ivp_decay": "ivp preset: cosine initial data, no forcing, no zero-order term",
    "periodic-fixed": "relaxed-periodic solve by the contraction iteration",
    "periodic-monodromy": "relaxed-periodic solve by the dense end-map system",
    "contraction": "measure end-map contraction ratios against the decay bound",
    "band-check": "narrow-band extension identity suite",
    "identities": "operator identity residuals across the shipped families",
    "holder": "Hölder estimator suite on a reference field",
}

_SURFACE_KEYS = {
    "circle": {"family", "period", "radius"},
    "breathing": {"family", "period", "amplitude", "r0"},
    "ellipse": {"family", "period", "a", "b"},
    "bean": {"family", "period", "dent", "pulse", "skew"},
}
_PROBLEM_KEYS = {
    "scenario",
    "zero_order",
    "c0",
    "alpha",
    "forcing",
    "u0",
    "target_mean",
    "tol",
    "max_iter",
    "band_time",
}
_DISCRETIZATION_KEYS = {"n_nodes", "n_steps", "scheme", "band_h", "band_delta"}
_OUTPUT_KEYS = {"directory", "seed"}


@dataclass
class ExperimentConfig:
    scenario: str
    surface_family: str
    surface_params: dict
    period: float
    n_nodes: int = 256
    n_steps: int = 512
    scheme: str = "crank_nicolson"
    zero_order: str = "zero"
    c0: float | None = None
    alpha: float | None = None
    forcing_expr: str | None = None
    u0_expr: str | None = None
    target_mean: float = 1.0
    tol: float = 1e-10
    max_iter: int = 40
    band_time: float = 0.0
    band_h: float = 1.0 / 128.0
    band_delta: float = 0.2
    out_dir: str = "periflow-out"
    seed: int = 0

    def build_surface(self) -> SurfaceFamily:
        return FAMILIES[self.surface_family](period=self.period, **self.surface_params)

    def build_ivp_config(self) -> IVPConfig:
        coefficient = 0.0
        if self.zero_order == "constant":
            coefficient = self.c0 if self.c0 is not None else 0.0
        elif self.zero_order == "divergence_plus_constant":
            coefficient = self.alpha if self.alpha is not None else 0.0
        return IVPConfig(
            n_nodes=self.n_nodes,
            n_steps=self.n_steps,
            scheme=self.scheme,
            zero_order=self.zero_order,
            coefficient=coefficient,
        )

    def grid(self) -> ParameterGrid:
        return ParameterGrid(self.n_nodes, self.n_steps, self.period)

    def forcing(self):
        if self.forcing_expr is None:
            return None
        return compile_expression(self.forcing_expr, self.period)

    def initial_values(self, grid: ParameterGrid) -> np.ndarray:
        expr = self.u0_expr if self.u0_expr is not None else "cos(theta)"
        return compile_expression(expr, self.period)(grid.nodes, 0.0)


def _get_float(raw: dict, key: str, default: float | None) -> float | None:
    if key not in raw:
        return default
    try:
        return float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"value of {key!r} is not a number: {raw[key]!r}") from exc


def _get_int(raw: dict, key: str, default: int) -> int:
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"value of {key!r} is not an integer: {raw[key]!r}") from exc


def parse_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment config; raises ConfigError with the
    offending line or key on malformed input."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    known_sections = {"surface", "problem", "discretization", "output"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown config section [{section}]")

    surface = dict(parser["surface"]) if parser.has_section("surface") else {}
    problem = dict(parser["problem"]) if parser.has_section("problem") else {}
    disc = dict(parser["discretization"]) if parser.has_section("discretization") else {}
    output = dict(parser["output"]) if parser.has_section("output") else {}

    family = surface.get("family", "circle")
    if family not in FAMILIES:
        raise ConfigError(f"unknown surface family {family!r}; choose from {sorted(FAMILIES)}")
    allowed = _SURFACE_KEYS[family]
    for key in surface:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [surface] for family {family!r}")
    for section_name, raw, allowed_keys in (
        ("problem", problem, _PROBLEM_KEYS),
        ("discretization", disc, _DISCRETIZATION_KEYS),
        ("output", output, _OUTPUT_KEYS),
    ):
        for key in raw:
            if key not in allowed_keys:
                raise ConfigError(f"unknown key {key!r} in [{section_name}]")

    scenario = problem.get("scenario", "ivp")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; see `periflow list-scenarios`")

    period = _get_float(surface, "period", 1.0)
    surface_params = {
        k: float(v) for k, v in surface.items() if k not in ("family", "period")
    }

    cfg = ExperimentConfig(
        scenario=scenario,
        surface_family=family,
        surface_params=surface_params,
        period=period,
        n_nodes=_get_int(disc, "n_nodes", 256),
        n_steps=_get_int(disc, "n_steps", 512),
        scheme=disc.get("scheme", "crank_nicolson"),
        zero_order=problem.get("zero_order", "zero"),
        c0=_get_float(problem, "c0", None),
        alpha=_get_float(problem, "alpha", None),
        forcing_expr=problem.get("forcing"),
        u0_expr=problem.get("u0"),
        target_mean=_get_float(problem, "target_mean", 1.0),
        tol=_get_float(problem, "tol", 1e-10),
        max_iter=_get_int(problem, "max_iter", 40),
        band_time=_get_float(problem, "band_time", 0.0),
        band_h=_get_float(disc, "band_h", 1.0 / 128.0),
        band_delta=_get_float(disc, "band_delta", 0.2),
        out_dir=output.get("directory", "periflow-out"),
        seed=_get_int(output, "seed", 0),
    )
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: ExperimentConfig) -> None:
    if cfg.n_nodes < 8:
        raise ConfigError("n_nodes must be >= 8")
    if cfg.n_steps < 4:
        raise ConfigError("n_steps must be >= 4")
    if cfg.scheme not in ("backward_euler", "crank_nicolson"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    if cfg.zero_order not in ("zero", "constant", "divergence", "divergence_plus_constant"):
        raise ConfigError(f"unknown zero_order mode {cfg.zero_order!r}")
    if cfg.tol <= 0.0:
        raise ConfigError("tol must be positive")
    if cfg.scenario == "contraction":
        c0 = cfg.c0 if cfg.c0 is not None else 0.0
        threshold = math.log(2.0) / cfg.period
        if c0 <= threshold:
            raise ConfigError(
                f"c0 must exceed ln2/T ≈ {threshold:.4f} for the contraction "
                f"scenario (got c0 = {c0})"
            )
    if cfg.scenario == "periodic-monodromy" and cfg.n_nodes > 2048:
        raise ConfigError("monodromy assembly requires n_nodes <= 2048")
    if cfg.forcing_expr is not None:
        compile_expression(cfg.forcing_expr, cfg.period)
    if cfg.u0_expr is not None:
        compile_expression(cfg.u0_expr, cfg.period)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"check {self.name}: {status} (value={self.value:.6e}, tol={self.threshold:.6e})"


@dataclass
class RunManifest:
    scenario: str
    resolved: dict
    checks: list[CheckResult] = field(default_factory=list)
    outputs: list[tuple[str, str]] = field(default_factory=list)  # (name, sha256)
    wall_clock_s: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def write(self, path: Path) -> None:
        lines = ["periflow run manifest", f"scenario: {self.scenario}"]
        lines += [f"  {k} = {v}" for k, v in sorted(self.resolved.items())]
        lines.append(f"versions: periflow={__version__} numpy={np.__version__} "
                     f"python={sys.version.split()[0]}")
        lines += [c.line() for c in self.checks]
        lines += [f"output {name} sha256={digest}" for name, digest in self.outputs]
        lines.append(f"wall_clock_s: {self.wall_clock_s:.3f}")
        tmp = path.with_suffix(".tmp")
        tmp.write_text("\n".join(lines) + "\n", newline="\n")
        tmp.replace(path)


def emit_field_csv(field_obj: ScalarField | SpaceTimeField, path: str | Path) -> None:
    """Write (t, theta, u) rows, sorted by time then theta, 17 significant
    digits, LF separators, locale independent."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write("t,theta,u\n")
        if isinstance(field_obj, ScalarField):
            levels = [(field_obj.time, field_obj.values)]
        else:
            levels = [(float(field_obj.times[k]), field_obj.values[k])
                      for k in range(field_obj.n_levels)]
        for t, values in levels:
            n = values.shape[0]
            theta = np.arange(n) * (2.0 * np.pi / n)
            for i in range(n):
                fh.write(f"{t:.17g},{theta[i]:.17g},{values[i]:.17g}\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _resolved_dict(cfg: ExperimentConfig) -> dict:
    keys = (
        "scenario surface_family period n_nodes n_steps scheme zero_order c0 alpha "
        "forcing_expr u0_expr target_mean tol max_iter band_time band_h band_delta seed"
    ).split()
    out = {k: getattr(cfg, k) for k in keys}
    out.update({f"surface.{k}": v for k, v in cfg.surface_params.items()})
    return out


# --- scenario bodies ---------------------------------------------------------


def _scenario_ivp(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    if cfg.scenario == "ivp_decay":
        cfg.u0_expr = cfg.u0_expr or "cos(theta)"
        cfg.forcing_expr = None
        cfg.zero_order = "zero"
    surface = cfg.build_surface()
    grid = cfg.grid()
    forcing = cfg.forcing()
    traj = solve_ivp(surface, grid, cfg.build_ivp_config(), cfg.initial_values(grid), forcing)
    emit_field_csv(traj, out / "trajectory.csv")
    ledger = mass_ledger(traj, surface, grid, cfg.build_ivp_config(), forcing)
    ledger.write_csv(out / "mass_ledger.csv")
    manifest.checks.append(
        CheckResult("finite_trajectory", bool(np.all(np.isfinite(traj.values))), 0.0, 0.0)
    )
    if cfg.zero_order == "divergence" and forcing is None:
        drift = abs(ledger.masses[-1] - ledger.masses[0]) / max(abs(ledger.masses[0]), 1e-300)
        manifest.checks.append(CheckResult("relative_mass_drift", drift <= 1e-8, drift, 1e-8))


def _scenario_periodic(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    surface = cfg.build_surface()
    problem = PeriodicProblem(
        surface=surface,
        config=cfg.build_ivp_config(),
        forcing=cfg.forcing(),
        target_mean=cfg.target_mean,
    )
    prop = make_propagator(problem)
    measure0 = prop.measures[0]
    if cfg.scenario == "periodic-fixed":
        report = fixed_point_solve(problem, cfg.tol, cfg.max_iter, propagator=prop)
        traj = report.trajectory
        with open(out / "iteration_ledger.csv", "w", newline="\n") as fh:
            fh.write("iterate,residual,ratio\n")
            for k, res in enumerate(report.residuals):
                ratio = report.ratios[k - 1] if 0 < k <= len(report.ratios) else float("nan")
                fh.write(f"{k},{res:.17g},{ratio:.17g}\n")
        manifest.checks.append(
            CheckResult("fixed_point_converged", report.converged,
                        report.final_residual, cfg.tol)
        )
    else:
        traj, solve_report = monodromy_solve(problem, propagator=prop)
        manifest.checks.append(
            CheckResult("injectivity_indicator",
                        solve_report.smallest_singular_value >= 1e-8,
                        solve_report.smallest_singular_value, 1e-8)
        )
    emit_field_csv(traj, out / "trajectory.csv")
    residuals = periodicity_residuals(traj, measure0)
    tol = max(10.0 * cfg.tol, 1e-8)
    manifest.checks.append(
        CheckResult("relaxed_residual", residuals.relaxed <= tol, residuals.relaxed, tol)
    )
    mean0 = float(np.dot(measure0.weights, traj.values[0]) / measure0.total)
    mean_err = abs(mean0 - cfg.target_mean)
    manifest.checks.append(CheckResult("initial_mean", mean_err <= 1e-12, mean_err, 1e-12))
    compat = compatibility_check(problem.forcing, surface, problem.grid)
    if cfg.zero_order == "divergence" and abs(compat) <= 1e-10:
        manifest.checks.append(
            CheckResult("strict_residual", residuals.strict <= tol, residuals.strict, tol)
        )
    ledger = mass_ledger(traj, surface, problem.grid, problem.config, problem.forcing)
    ledger.write_csv(out / "mass_ledger.csv")


def _scenario_contraction(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    surface = cfg.build_surface()
    if cfg.zero_order != "constant":
        cfg.zero_order = "constant"
    problem = PeriodicProblem(
        surface=surface,
        config=cfg.build_ivp_config(),
        forcing=cfg.forcing(),
        target_mean=cfg.target_mean,
    )
    prop = make_propagator(problem)
    try:
        est = contraction_estimate(problem, seed=cfg.seed, propagator=prop)
        bound_ok, worst, bound = True, est.end_map_ratio, est.bound or float("inf")
    except ContractionBoundError as exc:
        bound_ok, worst, bound = False, exc.ratio, exc.bound
        est = None
    manifest.checks.append(CheckResult("end_map_ratio_bound", bound_ok, worst, bound))
    if est is not None:
        with open(out / "contraction_ledger.csv", "w", newline="\n") as fh:
            fh.write("probe,end_map_ratio,adjusted_ratio\n")
            for k, (jr, kr) in enumerate(est.pair_ratios):
                fh.write(f"{k},{jr:.17g},{kr:.17g}\n")
        manifest.checks.append(
            CheckResult("adjusted_ratio_below_one", est.adjusted_ratio < 1.0,
                        est.adjusted_ratio, 1.0)
        )
    report = fixed_point_solve(problem, cfg.tol, cfg.max_iter, propagator=prop)
    manifest.checks.append(
        CheckResult("fixed_point_converged", report.converged, report.final_residual, cfg.tol)
    )


def _scenario_band(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    surface = cfg.build_surface()
    t = cfg.band_time
    h, delta = cfg.band_h, cfg.band_delta
    grid, dist = build_band(surface, t, h, delta)
    href = h / (1.0 / 128.0)

    eik = eikonal_residual(grid, dist)
    manifest.checks.append(
        CheckResult("eikonal_residual", eik <= 1e-4 * max(1.0, href**2), eik,
                    1e-4 * max(1.0, href**2))
    )

    # surface sampling fine enough that lift interpolation stays below the
    # band truncation error at every h in the refinement study
    n_surface = 1024
    theta = np.arange(n_surface) * (2.0 * np.pi / n_surface)
    u_surface = surface.positions(theta, t)[:, 0]  # first ambient coordinate
    lifted = lift_field(u_surface, theta, grid, dist)
    extracted = band_average_extract(lifted, grid, dist, surface, t, theta)
    rt = float(np.max(np.abs(extracted - u_surface)))
    rt_tol = 1e-6 * max(1.0, href**3) * max(1.0, float(np.max(np.abs(u_surface))))
    manifest.checks.append(CheckResult("lift_extract_roundtrip", rt <= rt_tol, rt, rt_tol))

    # identity-metric extension against the exact image of the first
    # coordinate: its surface Laplacian is -curvature * normal_x at the foot
    def identity_error(band_grid, band_dist):
        lift = band_dist.foot[..., 0]
        exact = -band_dist.curvature * band_dist.normal[..., 0]
        applied = extended_operator_apply(lift, band_grid, band_dist)
        return float(np.nanmax(np.abs((applied - exact)[band_grid.interior_mask])))

    grid2, dist2 = build_band(surface, t, 2.0 * h, delta)
    err, err2 = identity_error(grid, dist), identity_error(grid2, dist2)
    order = math.log2(err2 / err) if err > 0 else float("inf")
    manifest.checks.append(
        CheckResult("extension_identity_order", 1.4 <= order <= 2.7, order, 2.0)
    )

    os_res = os_operator_equivalence(dist.foot[..., 0], grid, dist)
    os_res2 = os_operator_equivalence(dist2.foot[..., 0], grid2, dist2)
    os_order = math.log2(os_res2 / os_res) if os_res > 0 else float("inf")
    manifest.checks.append(
        CheckResult("os_equivalence_order", 1.4 <= os_order <= 2.7, os_order, 2.0)
    )

    flat = flat_strip_step_equivalence()
    manifest.checks.append(CheckResult("flat_strip_step", flat <= 1e-10, flat, 1e-10))
    band_field_csv(grid, dist, lifted, out / "band_field.csv")


def _scenario_identities(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    t = 0.3 * cfg.period
    rows = []
    for name in ("circle", "breathing", "ellipse", "bean"):
        surface = FAMILIES[name](period=cfg.period)
        grid = ParameterGrid(cfg.n_nodes, cfg.n_steps, cfg.period)
        frame = build_frame(surface, grid, t)
        metric = assemble_metric(surface, grid, t)

        fld = AnalyticField(
            fn=lambda th, s, srf=surface: srf.positions(th, s)[:, 0],
            dtheta=lambda th, s, srf=surface: np.asarray(srf.chart_dtheta(th, s))[:, 0],
            dtheta2=lambda th, s, srf=surface: np.asarray(srf.chart_dtheta2(th, s))[:, 0],
        )
        comm = commutator_check(frame, fld)
        _, _, trace_diff = trace_identity(metric, frame)
        green = greens_formula_check(metric, np.cos(grid.nodes), np.sin(2.0 * grid.nodes))
        x1 = AmbientField(
            fn=lambda p: p[..., 0],
            grad=lambda p: np.broadcast_to(np.array([1.0, 0.0]), p.shape).copy(),
            hess=lambda p: np.zeros(p.shape + (2,)),
        )
        errors = [
            pullback_identity_check(surface, ParameterGrid(n, 4, cfg.period), t, x1)
            for n in (64, 128, 256, 512)
        ]
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(3)]
        rows.append((name, comm, trace_diff, green, float(np.mean(orders))))
        manifest.checks.append(CheckResult(f"commutator_{name}", comm <= 1e-9, comm, 1e-9))
        manifest.checks.append(CheckResult(f"trace_{name}", trace_diff <= 1e-9, trace_diff, 1e-9))
        manifest.checks.append(CheckResult(f"greens_{name}", green <= 1e-9, green, 1e-9))
        manifest.checks.append(
            CheckResult(f"pullback_order_{name}", abs(rows[-1][4] - 2.0) <= 0.3,
                        rows[-1][4], 2.0)
        )
    with open(out / "identities.csv", "w", newline="\n") as fh:
        fh.write("family,commutator,trace,greens,pullback_order\n")
        for name, comm, tr, gr, order in rows:
            fh.write(f"{name},{comm:.17g},{tr:.17g},{gr:.17g},{order:.17g}\n")


def _scenario_holder(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    surface = cfg.build_surface()
    grid = ParameterGrid(min(cfg.n_nodes, 64), min(cfg.n_steps, 32), cfg.period)
    theta = grid.nodes
    values = np.stack([np.cos(theta) * math.exp(-t) for t in grid.times])
    fld = SpaceTimeField(values, grid.times)
    rows = []
    for alpha in (0.5, 1.0):
        est = holder_estimate(fld, surface, alpha, seed=cfg.seed)
        rows.append((alpha, est))
    with open(out / "holder.csv", "w", newline="\n") as fh:
        fh.write("alpha,sup,holder_coefficient,time_holder,norm_alpha,norm_1_alpha,norm_2_alpha\n")
        for alpha, est in rows:
            fh.write(
                f"{alpha},{est.sup_norm:.17g},{est.holder_coefficient:.17g},"
                f"{est.time_holder:.17g},{est.norm_alpha:.17g},"
                f"{est.norm_1_alpha:.17g},{est.norm_2_alpha:.17g}\n"
            )
    checks = interpolation_check(fld, surface, 0.5, [0.5, 0.25, 0.125], seed=cfg.seed)
    worst = max(lhs - rhs for _, lhs, rhs in checks)
    manifest.checks.append(CheckResult("interpolation_inequality", worst <= 0.0, worst, 0.0))


_SCENARIO_RUNNERS = {
    "ivp": _scenario_ivp,
    "ivp_decay": _scenario_ivp,
    "periodic-fixed": _scenario_periodic,
    "periodic-monodromy": _scenario_periodic,
    "contraction": _scenario_contraction,
    "band-check": _scenario_band,
    "identities": _scenario_identities,
    "holder": _scenario_holder,
}


def run_scenario(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunManifest:
    """Dispatch a parsed config, write outputs and the manifest."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(scenario=cfg.scenario, resolved=_resolved_dict(cfg))
    started = time.perf_counter()
    _SCENARIO_RUNNERS[cfg.scenario](cfg, out, manifest)
    manifest.wall_clock_s = time.perf_counter() - started
    for file in sorted(out.iterdir()):
        if file.suffix == ".csv":
            manifest.outputs.append((file.name, _sha256(file)))
    manifest.write(out / "manifest.txt")
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="periflow",
        description="Time-periodic advection-diffusion experiments on moving closed curves.",
        epilog=(
            "Config defaults: n_nodes=256, n_steps=512, scheme=crank_nicolson, "
            "zero_order=zero, target_mean=1.0, tol=1e-10, max_iter=40, "
            "band_h=1/128, band_delta=0.2, seed=0."
        ),
    )
    sub = parser.add_subparsers(dest="command")
    run_p = sub.add_parser("run", help="run one scenario from a config file")
    run_p.add_argument("--config", required=True, help="path to the INI config")
    run_p.add_argument("--out", default=None, help="output directory (overrides config)")
    run_p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    sub.add_parser("list-scenarios", help="list scenario names")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "list-scenarios":
        for name, desc in SCENARIOS.items():
            print(f"{name:20s} {desc}")
        return 0
    if args.command != "run":
        parser.print_usage()
        return 2

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        manifest = run_scenario(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PeriflowError as exc:
        print(f"scenario {getattr(args, 'config', '?')} failed: {exc}", file=sys.stderr)
        return 1

    for check in manifest.checks:
        print(check.line())
    return 0 if manifest.all_passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
