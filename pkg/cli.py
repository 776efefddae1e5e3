"""
Command-line front end for the Beltrami lab.

    python3 cli.py mesh --domain cube --n 8 --out cube8.mesh
    python3 cli.py star --mesh cube8.mesh
    python3 cli.py identity --check green --field poly:x2,-x1,0 --domain cube --n 2
    python3 cli.py eig --problem maxwell --domain cube --n 6 --k 4 --traces
    python3 cli.py probe --mode defect --bc normal --domain ball --n 2 --iters 200
    python3 cli.py converge --suite eig --problem dirichlet --domain disk --levels 3
    python3 cli.py compare --domain ball --n 2
    python3 cli.py calibrate --out calibration.json
    python3 cli.py history

Exit codes: 0 when every check passes, 1 when a numerical check fails,
2 for usage or input errors.
"""

import argparse
import datetime
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from eig2d import (ORDERING_MARGIN, agreement_report, laplace_eigs, laplace_neumann_eigs,
                   maxwell_eigs_2d, ordering_report, planar_spectrum, refinement_errors, stokes_eigs_2d)
from eig3d import (beta_duality_check, boundary_trace_report, edge_eigenfield, maxwell_eigs_3d,
                   spectrum_3d, stokes_eigenfield, stokes_eigs_3d)
from fem import P2Field, EdgeField
from fields import parse_field, parse_weight
from geometry import (generate_mesh, grid_margin_search, load_or_generate, star_kernel,
                      write_mesh)
from identity import (FD_WIDENING, check_curl_cross_pointwise, check_green_curl,
                      check_lagrange_pointwise, check_weighted)
from linalg import fit_observed_order, richardson_extrapolate
from probe import (beltrami_defect_min, spheromak_verify, vainshtein_check,
                   write_trajectory_csv)
from special import oracle_for
from utils import (FieldError, LabError, LinalgError, MeshError, UsageError, fetch_checks,
                   fetch_runs, get_settings, is_truthy, load_calibration, parse_seed, read_config_file,
                   record_run, save_calibration)

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

EIG_TOLERANCES = {
    ("dirichlet", 2): 0.01, ("neumann", 2): 0.01, ("stokes", 2): 0.02, ("maxwell", 2): 0.02,
    ("dirichlet", 3): 0.03, ("neumann", 3): 0.03, ("stokes", 3): 0.03, ("maxwell", 3): 0.03,
}
ESSENTIAL_TRACE_TOL = 1e-8
DIV_RESIDUAL_TOL = 1e-8
DUALITY_TOL = 0.1
BC_TOL = 1e-12
NORM_TOL = 1e-10
SPHEROMAK_TOL = 1e-3
SPHERE_TRACE_TOL = 1e-6
VAINSHTEIN_GRID = "1,3,4.49,7"
EXTRAPOLATION_TOL = 0.003
BC_NAMES = {"tangent": "tangent-zero", "normal": "normal-zero"}


# ─── reports ──────────────────────────────────────────────────────

@dataclass
class ResultEntry:
    name: str
    value: float
    tolerance: Optional[float]
    passed: bool
    oracle: Optional[float] = None
    provenance: Optional[str] = None
    relation: str = "<="

    def to_dict(self) -> dict:
        out = {"name": self.name, "value": self.value, "tolerance": self.tolerance,
               "pass": bool(self.passed), "relation": self.relation}
        if self.oracle is not None:
            out["oracle"] = self.oracle
        if self.provenance is not None:
            out["provenance"] = self.provenance
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ResultEntry":
        return cls(data["name"], data["value"], data.get("tolerance"), data["pass"],
                   data.get("oracle"), data.get("provenance"), data.get("relation", "<="))


@dataclass
class RunReport:
    command: str
    mesh: Optional[dict] = None
    results: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    timing_ms: float = 0.0
    version: str = VERSION

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def check(self, name: str, value, tolerance=None, relation: str = "<=", oracle=None,
              provenance=None, passed: Optional[bool] = None) -> ResultEntry:
        """Add a result; unless ``passed`` is given it is value <= tolerance (or >=)."""
        value = float(value)
        if passed is None:
            if tolerance is None:
                passed = math.isfinite(value)
            elif relation == ">=":
                passed = value >= tolerance
            else:
                passed = value <= tolerance
        entry = ResultEntry(name, value, None if tolerance is None else float(tolerance),
                            bool(passed), oracle, provenance, relation)
        self.results.append(entry)
        return entry

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "mesh": self.mesh,
            "results": [r.to_dict() for r in self.results],
            "info": self.info,
            "timing_ms": self.timing_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(command=data["command"], mesh=data.get("mesh"),
                   results=[ResultEntry.from_dict(r) for r in data.get("results", [])],
                   info=data.get("info", {}), timing_ms=data.get("timing_ms", 0.0),
                   version=data.get("version", VERSION))


def _mesh_info(mesh) -> dict:
    return mesh.describe()


def _load_mesh(args):
    return load_or_generate(args.mesh, args.domain, args.n, args.r0, args.r1)


# ─── commands ─────────────────────────────────────────────────────

def cmd_mesh(args) -> RunReport:
    if not args.domain:
        raise UsageError("--domain is required")
    mesh = generate_mesh(args.domain, args.n, args.r0, args.r1)
    if args.out:
        write_mesh(mesh, args.out)
        print(f"Wrote {args.out}")
    print(f"vertices={mesh.n_vertices} cells={mesh.n_cells} facets={mesh.n_facets} "
          f"origin_excluded={int(mesh.origin_excluded)}")
    report = RunReport(command="mesh", mesh=_mesh_info(mesh))
    closure = np.abs(np.sum(mesh.facet_normals * mesh.facet_measures[:, None], axis=0)).max()
    report.check("boundary_closure", closure, 1e-10)
    return report


def cmd_star(args) -> RunReport:
    mesh = _load_mesh(args)
    report = RunReport(command="star", mesh=_mesh_info(mesh))
    kernel = star_kernel(mesh)
    if kernel is None:
        _, grid_margin, spacing = grid_margin_search(mesh)
        print("not star-shaped at facet resolution")
        report.check("star_margin", grid_margin, 0.0, relation=">=", passed=False)
        report.info.update(grid_margin=grid_margin, grid_spacing=spacing)
        return report
    center, margin = kernel
    print(f"center={np.array2string(center, precision=6)} margin={margin:.6g}")
    report.check("star_margin", margin, 0.0, relation=">=")
    report.info["center"] = [float(x) for x in center]
    if args.oracle:
        _, grid_margin, spacing = grid_margin_search(mesh)
        # the grid never beats the LP optimum and finds a positive margin when one exists
        report.check("grid_oracle_gap", margin - grid_margin, -1e-9, relation=">=")
        report.check("grid_margin", grid_margin, 0.0, relation=">=")
        report.info.update(grid_margin=grid_margin, grid_spacing=spacing)
    return report


def _widened(tol: float, source: str) -> float:
    return tol * FD_WIDENING if source != "analytic" else tol


def cmd_identity(args) -> RunReport:
    report = RunReport(command="identity")
    rng = np.random.default_rng(args.seed)
    if args.check == "lagrange":
        n = args.samples
        u, x, nu = (rng.standard_normal((n, 3)) for _ in range(3))
        scale = (np.sum(u * u, axis=1) * np.linalg.norm(x, axis=1) * np.linalg.norm(nu, axis=1))
        rel = check_lagrange_pointwise(u, x, nu) / np.maximum(scale, 1e-300)
        report.check("lagrange_max_rel", float(np.max(rel)), args.tol or 1e-13)
        return report

    field_a = parse_field(args.field)
    if args.check == "curlcross":
        field_b = parse_field(args.field2)
        pts = rng.uniform(-1.0, 1.0, size=(args.samples, 3))
        residual = check_curl_cross_pointwise(field_a, field_b, pts)
        report.check("curl_cross_max", float(np.max(residual)), args.tol or 1e-6)
        return report

    mesh = _load_mesh(args)
    report.mesh = _mesh_info(mesh)
    if args.check == "green":
        phi = parse_weight(args.phi, mesh.dimension)
        result = check_green_curl(field_a, phi, mesh, args.order)
        tol = _widened(args.tol or 1e-10, result.derivative_source)
        report.check("green_rel_residual", result.rel_residual, tol)
    else:
        result = check_weighted(field_a, args.alpha, mesh, args.order)
        tol = _widened(args.tol or 1e-4, result.derivative_source)
        report.check("E1-E2_rel", result.residuals["E1-E2_rel"], tol)
        report.check("E2-E3_rel", result.residuals["E2-E3_rel"], 1e-12)
    report.info["identity"] = result.to_dict()
    return report


def _first_index(problem: str) -> int:
    return 1 if problem == "neumann" else 0


def solve_problem(problem: str, mesh, k: int, seed: int, shift=None):
    if problem == "dirichlet":
        return laplace_eigs(mesh, k, True, shift, seed=seed)
    if problem == "neumann":
        if mesh.dimension == 2:
            return laplace_neumann_eigs(mesh, k, shift, seed=seed)
        return laplace_eigs(mesh, max(k, 2), False, shift, seed=seed)
    kwargs = {"seed": seed}
    if shift is not None:
        kwargs["shift"] = shift
    if problem == "maxwell":
        return (maxwell_eigs_2d if mesh.dimension == 2 else maxwell_eigs_3d)(mesh, k, **kwargs)
    if problem == "stokes":
        return (stokes_eigs_2d if mesh.dimension == 2 else stokes_eigs_3d)(mesh, k, **kwargs)
    raise UsageError("unknown eigenproblem", problem=problem)


def cmd_eig(args) -> RunReport:
    mesh = _load_mesh(args)
    report = RunReport(command=f"eig {args.problem}", mesh=_mesh_info(mesh))
    result = solve_problem(args.problem, mesh, args.k, args.seed, args.shift)
    index = _first_index(args.problem)
    value = float(result.eigenvalues[index])
    report.info["eigen"] = result.summary()
    report.check("converged", float(result.converged), passed=result.converged)

    oracle = oracle_for(mesh.domain_tag, args.problem)
    if oracle is not None:
        target, provenance = oracle
        tol = args.rel_tol or EIG_TOLERANCES[(args.problem, mesh.dimension)]
        report.check("first_eigenvalue_rel_error", abs(value - target) / target, tol,
                     oracle=target, provenance=provenance)
    else:
        report.check("first_eigenvalue", value, 0.0, relation=">=")
    print(f"first eigenvalue: {value:.8g}")

    if args.problem == "neumann":
        zero = float(result.eigenvalues[0])
        report.check("zero_mode", abs(zero), 1e-8 * max(1.0, value))
    if args.problem in ("stokes", "maxwell"):
        report.check("div_residual", result.details["div_residuals"][index], DIV_RESIDUAL_TOL)

    if args.traces and args.problem in ("maxwell", "stokes"):
        floor = load_calibration(args.calibration)["trace_floor"]
        eigenfield = (edge_eigenfield if args.problem == "maxwell" else stokes_eigenfield)(mesh, result)
        traces = boundary_trace_report(eigenfield, mesh)
        report.info["traces"] = traces
        report.check("norm_u_cross_nu", traces["norm_u_cross_nu"], ESSENTIAL_TRACE_TOL)
        report.check("norm_curlu_cross_nu", traces["norm_curlu_cross_nu"], floor, relation=">=",
                     provenance="calibration")
        if args.problem == "maxwell":
            report.check("norm_u_dot_nu", traces["norm_u_dot_nu"], floor, relation=">=",
                         provenance="calibration")
        else:
            report.check("norm_u_dot_nu", traces["norm_u_dot_nu"], ESSENTIAL_TRACE_TOL)
    if args.duality and args.problem == "maxwell":
        duality = beta_duality_check(result, mesh)
        report.info["duality"] = duality
        report.check("duality_witness_rel_gap", duality["witness_rel_gap"],
                     args.duality_tol or DUALITY_TOL)
    return report


def _check_descent(report: RunReport, result, prefix: str = "") -> None:
    increase = float(np.max(np.diff(result.trajectory), initial=0.0))
    report.check(f"{prefix}max_increase", increase, 0.0)
    report.check(f"{prefix}bc_violation", result.details["bc_violation"], BC_TOL)
    report.check(f"{prefix}norm_error", abs(result.norm - 1.0), NORM_TOL)


def _defect_contrast(args, thresholds: dict) -> RunReport:
    """Normal-zero ball at n against tangent-zero cube at 2n; the two have comparable dof counts."""
    ball = generate_mesh("ball", args.n)
    cube = generate_mesh("cube", 2 * args.n)
    report = RunReport(command="probe contrast",
                       mesh={"mesh_id": ball.mesh_id, "cube": cube.mesh_id})
    common = {"iters": args.iters, "seed": args.seed, "restarts": args.restarts,
              "threads": args.threads}
    normal = beltrami_defect_min(ball, bc="normal-zero", **common)
    tangent = beltrami_defect_min(cube, bc="tangent-zero", **common)
    report.info["normal"] = normal.summary()
    report.info["tangent"] = tangent.summary()
    _check_descent(report, normal, "normal_")
    _check_descent(report, tangent, "tangent_")
    ratio = tangent.J / max(normal.J, 1e-300)
    report.check("normal_below_tangent", normal.J, tangent.J, relation="<",
                 passed=normal.J < tangent.J)
    floor = thresholds.get("probe_contrast_ratio")
    if floor is None:
        report.check("contrast_ratio", ratio, 1.0, relation=">=", passed=ratio > 1.0,
                     provenance="uncalibrated")
    else:
        report.check("contrast_ratio", ratio, floor, relation=">=", provenance="calibration")
    print(f"J normal ball={normal.J:.6e} tangent cube={tangent.J:.6e} ratio={ratio:.4g}")
    return report


def cmd_probe(args) -> RunReport:
    thresholds = load_calibration(args.calibration)
    if args.mode == "contrast":
        return _defect_contrast(args, thresholds)
    mesh = _load_mesh(args)
    report = RunReport(command=f"probe {args.mode}", mesh=_mesh_info(mesh))

    if args.mode == "spheromak":
        res = spheromak_verify(mesh, args.lam, order=args.order)
        report.info["spheromak"] = res
        report.check("curl_cross_rel", res["curl_cross_rel"], SPHEROMAK_TOL)
        report.check("div_rel", res["div_rel"], SPHEROMAK_TOL)
        report.check("trace_sphere_abs", res["trace_sphere_abs"], SPHERE_TRACE_TOL)
        return report

    bc = BC_NAMES[args.bc]
    if args.mode == "vainshtein":
        lams = [float(v) for v in args.lambdas.split(",") if v.strip()]
        res = vainshtein_check(lams, mesh, bc=bc, seed=args.seed)
        report.info["vainshtein"] = res
        floor = thresholds.get("vainshtein_floor")
        if floor is None:
            report.check("vainshtein_floor", res["floor"], 0.0, relation=">=",
                         passed=res["floor"] > 0.0, provenance="uncalibrated")
        else:
            report.check("vainshtein_floor", res["floor"], floor, relation=">=",
                         provenance="calibration")
        return report

    result = beltrami_defect_min(mesh, bc=bc, iters=args.iters, seed=args.seed,
                                 restarts=args.restarts, threads=args.threads, init=args.init)
    report.info["probe"] = result.summary()
    report.info["trajectory"] = [float(v) for v in result.trajectory]
    if args.csv:
        write_trajectory_csv(args.csv, result.trajectory)
        print(f"Wrote {args.csv}")
    _check_descent(report, result)
    ceiling, provenance = None, None
    if bc == "normal-zero" and mesh.domain_tag.startswith("ball"):
        key = "spheromak_init_J_ceiling" if args.init == "spheromak" else "normal_ball_J_ceiling"
        ceiling = thresholds.get(key)
        provenance = "uncalibrated" if ceiling is None else "calibration"
    report.check("J_min", result.J, ceiling, provenance=provenance)
    print(f"J_min={result.J:.6e} after {len(result.trajectory) - 1} steps")
    return report


def _identity_level_error(args, mesh) -> float:
    field_a = parse_field(args.field)
    if args.check == "weighted":
        return check_weighted(field_a, args.alpha, mesh, args.order).residuals["E1-E2"]
    return check_green_curl(field_a, parse_weight(args.phi, mesh.dimension), mesh, args.order).abs_residual


def cmd_converge(args) -> RunReport:
    if args.levels < 2:
        raise UsageError("≥ 2 levels required", levels=args.levels)
    if not args.domain:
        raise UsageError("--domain is required")
    report = RunReport(command=f"converge {args.suite}")
    levels = [args.base * 2 ** i for i in range(args.levels)]
    hs = [1.0 / n for n in levels]
    values = []
    for n in levels:
        mesh = generate_mesh(args.domain, n, args.r0, args.r1)
        if args.suite == "identity":
            values.append(_identity_level_error(args, mesh))
        elif args.suite == "duality":
            result = solve_problem("maxwell", mesh, max(args.k, 3), args.seed)
            values.append(beta_duality_check(result, mesh)["witness_rel_gap"])
        else:
            result = solve_problem(args.problem, mesh, args.k, args.seed)
            values.append(float(result.eigenvalues[_first_index(args.problem)]))
        print(f"n={n:<4d} h={1.0 / n:<10.5g} value={values[-1]:.10g}")
    report.mesh = {"domain": args.domain, "levels": levels}
    report.info["table"] = [{"n": n, "h": h, "value": v} for n, h, v in zip(levels, hs, values)]

    if args.suite == "identity":
        order = fit_observed_order(hs, values)
        report.check("observed_order", order, args.min_order or 2.0, relation=">=")
        return report
    if args.suite == "duality":
        worst = max(b - a for a, b in zip(values, values[1:]))
        report.check("gap_max_increase", worst, 0.0, relation="<", passed=worst < 0.0)
        report.check("final_witness_rel_gap", values[-1], args.duality_tol or DUALITY_TOL)
        return report

    mesh0 = generate_mesh(args.domain, levels[0], args.r0, args.r1)
    oracle = oracle_for(mesh0.domain_tag, args.problem)
    if oracle is not None:
        target, provenance = oracle
        errors = [abs(v - target) for v in values]
        order = fit_observed_order(hs, errors)
    else:
        if len(values) < 3:
            raise UsageError("≥ 3 levels required without an oracle", levels=len(values))
        errors = [abs(b - a) for a, b in zip(values, values[1:])]
        order = fit_observed_order(hs[1:], errors)
        target, provenance = None, None
    report.check("observed_order", order, args.min_order or 1.5, relation=">=")
    extrapolated = richardson_extrapolate(values[-2], values[-1], 2.0, max(order, 1.0))
    report.info["extrapolated"] = extrapolated
    if target is not None:
        report.check("extrapolated_rel_error", abs(extrapolated - target) / target,
                     EXTRAPOLATION_TOL, oracle=target, provenance=provenance)
    print(f"observed order {order:.3f}, extrapolated {extrapolated:.10g}")
    return report


def _check_ordering(report: RunReport, ordering: dict) -> None:
    for step in ordering["steps"]:
        report.check(f"{step['lower']}<{step['upper']}", step["gap"], step["budget"], relation=">",
                     passed=step["pass"])


def cmd_compare(args) -> RunReport:
    """First eigenvalues at n and 2n, compared within their refinement error estimates."""
    if not args.domain:
        raise UsageError("--domain is required")
    coarse_mesh = generate_mesh(args.domain, args.n, args.r0, args.r1)
    fine_mesh = generate_mesh(args.domain, 2 * args.n, args.r0, args.r1)
    spectrum = planar_spectrum if coarse_mesh.dimension == 2 else spectrum_3d
    coarse = spectrum(coarse_mesh, seed=args.seed)
    fine = spectrum(fine_mesh, seed=args.seed)
    errors = refinement_errors(coarse, fine)
    report = RunReport(command="compare", mesh={"mesh_id": fine_mesh.mesh_id,
                                                "coarse": coarse_mesh.mesh_id})
    report.info.update(coarse=coarse, fine=fine, errors=errors)
    for name in fine:
        print(f"{name:<8s} n={args.n}: {coarse[name]:.8g}  n={2 * args.n}: {fine[name]:.8g}  "
              f"err~{errors[name]:.2g}")

    if coarse_mesh.dimension == 2:
        agreement = agreement_report(fine["alpha1"], fine["mu2"], errors["alpha1"] + errors["mu2"],
                                     args.margin)
        report.check("alpha1~mu2", agreement["gap"], agreement["budget"], passed=agreement["pass"])
        _check_ordering(report, ordering_report(fine, errors, ("mu2", "gamma1"), args.margin))
    else:
        _check_ordering(report, ordering_report(fine, errors, ("mu2", "alpha1", "gamma1"),
                                                args.margin))
        oracle = oracle_for(fine_mesh.domain_tag, "maxwell")
        if oracle is not None:
            target, provenance = oracle
            report.check("alpha1_rel_error", abs(fine["alpha1"] - target) / target,
                         EIG_TOLERANCES[("maxwell", 3)], oracle=target, provenance=provenance)
    return report


def cmd_calibrate(args) -> RunReport:
    """Measure the thresholds on the fixture meshes and freeze them."""
    report = RunReport(command="calibrate")
    cube = generate_mesh("cube", args.cube_n)
    ball = generate_mesh("ball", args.ball_n)
    measured = {}

    maxwell = maxwell_eigs_3d(cube, k=3, seed=args.seed)
    m_traces = boundary_trace_report(EdgeField(cube, maxwell.eigenvectors[:, 0]), cube)
    stokes = stokes_eigs_3d(cube, k=1, seed=args.seed)
    s_traces = boundary_trace_report(P2Field(cube, stokes.eigenvectors[:, 0]), cube)
    measured["trace_min"] = min(m_traces["norm_u_dot_nu"], m_traces["norm_curlu_cross_nu"],
                                s_traces["norm_curlu_cross_nu"])

    common = {"iters": args.iters, "seed": args.seed, "restarts": args.restarts,
              "threads": args.threads}
    # random starts on both; the ball at n and the cube at 2n carry comparable dof counts
    normal = beltrami_defect_min(ball, bc="normal-zero", **common)
    tangent = beltrami_defect_min(generate_mesh("cube", 2 * args.ball_n), bc="tangent-zero",
                                  **common)
    seeded = beltrami_defect_min(ball, bc="normal-zero", init="spheromak", iters=0, seed=args.seed)
    measured["normal_ball_J"] = normal.J
    measured["tangent_cube_J"] = tangent.J
    measured["contrast_ratio"] = tangent.J / max(normal.J, 1e-300)
    measured["spheromak_init_J"] = seeded.J

    lams = [float(v) for v in VAINSHTEIN_GRID.split(",")]
    measured["vainshtein_min"] = vainshtein_check(lams, cube, seed=args.seed)["floor"]

    thresholds = {
        "trace_floor": 0.5 * measured["trace_min"],
        "probe_contrast_ratio": 0.5 * measured["contrast_ratio"],
        "normal_ball_J_ceiling": 2.0 * measured["normal_ball_J"],
        "spheromak_init_J_ceiling": 2.0 * measured["spheromak_init_J"],
        "vainshtein_floor": 0.5 * measured["vainshtein_min"],
    }
    stamp = datetime.date.today().isoformat()
    provenance = f"calibrated {stamp} on {cube.mesh_id},{ball.mesh_id}"
    out = args.out or args.calibration or get_settings().calibration_path
    save_calibration(out, thresholds, measured, provenance)
    print(f"Wrote {out}")
    for name, value in measured.items():
        report.check(name, value, 0.0, relation=">=", passed=math.isfinite(value) and value > 0.0)
    report.info.update(thresholds=thresholds, provenance=provenance)
    return report


def cmd_history(args) -> Optional[RunReport]:
    db = args.db or get_settings().results_db
    if args.run:
        checks = fetch_checks(db, args.run)
        if not checks:
            raise UsageError("no checks recorded for this run", run_id=args.run, db=db)
        for row in checks:
            tol = "" if row["tolerance"] is None else f" ({row['relation']} {row['tolerance']:.3g})"
            status = "PASS" if row["passed"] else "FAIL"
            print(f"  {row['name']}: {row['value']:.6g}{tol} {status}")
        return None
    rows = fetch_runs(db, args.limit)
    if not rows:
        print(f"No runs recorded in {db}")
    for row in rows:
        stamp = datetime.datetime.fromtimestamp(row["created_at"]).strftime("%Y-%m-%d %H:%M:%S")
        status = "PASS" if row["passed"] else "FAIL"
        print(f"{row['run_id']}  {stamp}  {status} {row['n_failed']}/{row['n_checks']} failed  "
              f"{row['command']}  {row['mesh_id'] or '-'}")
    return None


COMMANDS = {
    "mesh": cmd_mesh,
    "star": cmd_star,
    "identity": cmd_identity,
    "eig": cmd_eig,
    "probe": cmd_probe,
    "converge": cmd_converge,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
    "history": cmd_history,
}


# ─── argument parsing ─────────────────────────────────────────────

class _Options:
    """Subcommand parser plus the flags it accepts (dest -> is boolean)."""

    def __init__(self, parser):
        self.parser = parser
        self.flags = {}

    def add(self, *names, **kwargs):
        action = self.parser.add_argument(*names, **kwargs)
        self.flags[action.dest] = kwargs.get("action") == "store_true"
        return action


def _common(opts: _Options, settings) -> None:
    opts.add("--config", help="key = value file with default flag values")
    opts.add("--seed", type=parse_seed, default=settings.seed)
    opts.add("--threads", type=int, default=settings.threads)
    opts.add("--json", help="write the JSON report to this path")
    opts.add("--db", help="record the run in this sqlite database")
    opts.add("--record", action="store_true", help="record the run in the default database")
    opts.add("--calibration", default=settings.calibration_path)
    opts.add("--verbose", action="store_true")


def _mesh_source(opts: _Options) -> None:
    opts.add("--mesh", help="mesh file")
    opts.add("--domain", help="square|disk|lshape|annulus|cube|ball|shell")
    opts.add("--n", type=int, default=4)
    opts.add("--r0", type=float)
    opts.add("--r1", type=float)


def build_parser(settings=None):
    settings = settings or get_settings()
    parser = argparse.ArgumentParser(prog="beltrami-lab", description="Beltrami lab verification tool")
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", metavar="command")
    options = {}

    def command(name, help_text):
        opts = _Options(sub.add_parser(name, help=help_text))
        _common(opts, settings)
        options[name] = opts
        return opts

    opts = command("mesh", "generate a mesh")
    _mesh_source(opts)
    opts.add("--out")

    opts = command("star", "star-kernel center and margin")
    _mesh_source(opts)
    opts.add("--oracle", action="store_true", help="cross-check against a grid search")

    opts = command("identity", "integral identity checks")
    _mesh_source(opts)
    opts.add("--check", choices=("green", "weighted", "lagrange", "curlcross"), default="green")
    opts.add("--field", default="trig:1.0")
    opts.add("--field2", default="poly:x2,-x1,x3")
    opts.add("--phi", default="r2")
    opts.add("--alpha", type=float, default=1.0)
    opts.add("--order", type=int, default=4)
    opts.add("--samples", type=int, default=100000)
    opts.add("--tol", type=float)

    opts = command("eig", "first eigenvalues")
    _mesh_source(opts)
    opts.add("--problem", choices=("dirichlet", "neumann", "stokes", "maxwell"), default="dirichlet")
    opts.add("--k", type=int, default=6)
    opts.add("--shift", type=float)
    opts.add("--rel-tol", type=float)
    opts.add("--traces", action="store_true")
    opts.add("--duality", action="store_true")
    opts.add("--duality-tol", type=float)

    opts = command("probe", "Beltrami uniqueness probes")
    _mesh_source(opts)
    opts.add("--mode", choices=("defect", "contrast", "vainshtein", "spheromak"), default="defect")
    opts.add("--bc", choices=tuple(BC_NAMES), default="tangent")
    opts.add("--iters", type=int, default=500)
    opts.add("--restarts", type=int, default=5)
    opts.add("--init", choices=("random", "spheromak"), default="random")
    opts.add("--lambdas", default=VAINSHTEIN_GRID)
    opts.add("--lam", type=float)
    opts.add("--order", type=int, default=4)
    opts.add("--csv", help="write the J trajectory as iter,J")

    opts = command("converge", "refinement studies")
    opts.add("--suite", choices=("identity", "eig", "duality"), default="identity")
    opts.add("--domain")
    opts.add("--r0", type=float)
    opts.add("--r1", type=float)
    opts.add("--levels", type=int, default=3)
    opts.add("--base", type=int, default=2)
    opts.add("--problem", choices=("dirichlet", "neumann", "stokes", "maxwell"), default="dirichlet")
    opts.add("--k", type=int, default=3)
    opts.add("--check", choices=("green", "weighted"), default="green")
    opts.add("--field", default="trig:1.0")
    opts.add("--phi", default="r2")
    opts.add("--alpha", type=float, default=1.0)
    opts.add("--order", type=int, default=4)
    opts.add("--min-order", type=float)
    opts.add("--duality-tol", type=float)

    opts = command("compare", "first eigenvalues at n and 2n against their error estimates")
    _mesh_source(opts)
    opts.add("--margin", type=float, default=ORDERING_MARGIN)

    opts = command("calibrate", "measure and freeze thresholds")
    opts.add("--cube-n", type=int, default=4)
    opts.add("--ball-n", type=int, default=2)
    opts.add("--iters", type=int, default=500)
    opts.add("--restarts", type=int, default=3)
    opts.add("--out")

    opts = command("history", "list recorded runs")
    opts.add("--limit", type=int, default=20)
    opts.add("--run", help="print the stored checks of this run")
    return parser, options


def parse_args(argv, settings=None):
    """Parse argv; a --config file supplies defaults that the command line overrides."""
    parser, options = build_parser(settings)
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a command is required")
    if args.config:
        opts = options[args.command]
        config = read_config_file(args.config)
        unknown = sorted(k for k in config if k not in opts.flags or k == "config")
        if unknown:
            raise UsageError("unknown config keys", keys=unknown)
        defaults = {k: is_truthy(v) if opts.flags[k] else v for k, v in config.items()}
        opts.parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _emit(report: RunReport, args) -> None:
    for entry in report.results:
        tol = "" if entry.tolerance is None else f" ({entry.relation} {entry.tolerance:.3g})"
        print(f"  {entry.name}: {entry.value:.6g}{tol} {'PASS' if entry.passed else 'FAIL'}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            f.write(report.to_json() + "\n")
        print(f"Wrote {args.json}")
    if args.db or args.record:
        run_id = record_run(args.db or get_settings().results_db, report.to_dict())
        print(f"Recorded run {run_id}")


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(asctime)s %(name)s %(levelname)s %(message)s")

    print(f"--- Starting: {args.command} ---")
    start_time = time.time()
    try:
        report = COMMANDS[args.command](args)
    except (UsageError, MeshError, FieldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LinalgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    elapsed = time.time() - start_time

    if report is None:
        return EXIT_PASS
    report.timing_ms = round(elapsed * 1000.0, 3)
    _emit(report, args)
    print(f"--- Finished: {args.command} (Took {elapsed:.2f}s) ---")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
