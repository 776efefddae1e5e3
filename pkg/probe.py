"""
Optimization probes of Beltrami uniqueness and existence on P1 vector fields.

beltrami_defect_min minimizes J(u) = int |curl u x u|^2 + |div u|^2 over
unit L2-norm fields with either u x nu = 0 (tangent-zero) or u.nu = 0
(normal-zero) at boundary vertices. vainshtein_check reports the smallest
eigenvalue of the least-squares form ||curl u - lam u||^2 + ||div u||^2.
spheromak_verify checks the analytic spheromak by quadrature.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from eig2d import require_dimension
from fem import (NodalField, assemble_p1, boundary_samples, interpolate_p1_vector, l2_norm,
                 p1_geometry, volume_samples)
from fields import FieldSampler, fd_curl, fd_div, make_spheromak
from geometry import SimplicialMesh, volume_quadrature
from linalg import csr_from_arrays, factorize, gen_eig_smallest
from special import spheromak_root
from utils import DEFAULT_SEED, FieldError, UsageError

logger = logging.getLogger(__name__)

BOUNDARY_CONDITIONS = ("tangent-zero", "normal-zero")
INIT_MODES = ("random", "spheromak")
ARMIJO_SLOPE = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 40
GRAD_TOL = 1e-12
DEFECT_QUAD_ORDER = 2


@dataclass
class ProbeResult:
    J: float
    coefficients: np.ndarray
    trajectory: list
    bc: str
    mesh_id: str
    seed: int
    stopped: bool = False
    restart: int = 0
    restarts: int = 1
    init: str = "random"
    norm: float = 1.0
    details: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "J": float(self.J),
            "bc": self.bc,
            "mesh_id": self.mesh_id,
            "seed": self.seed,
            "stopped": self.stopped,
            "iterations": len(self.trajectory) - 1,
            "restart": self.restart,
            "restarts": self.restarts,
            "init": self.init,
            "norm": float(self.norm),
            "J_initial": float(self.trajectory[0]),
            **self.details,
        }


def write_trajectory_csv(path, trajectory) -> None:
    with open(path, mode="w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(["iter", "J"])
        for i, value in enumerate(trajectory):
            writer.writerow([i, repr(float(value))])


# ─── constrained nodal frames ─────────────────────────────────────

def nodal_normals(mesh: SimplicialMesh) -> np.ndarray:
    """Area-weighted average of adjacent facet normals, unit length at boundary vertices."""
    normals = np.zeros((mesh.n_vertices, mesh.dimension))
    weighted = mesh.facet_normals * mesh.facet_measures[:, None]
    for j in range(mesh.boundary_facets.shape[1]):
        np.add.at(normals, mesh.boundary_facets[:, j], weighted)
    bv = mesh.boundary_vertices
    normals[bv] /= np.linalg.norm(normals[bv], axis=1, keepdims=True)
    return normals


def _tangents(n: np.ndarray):
    axis = np.argmin(np.abs(n), axis=1)
    e = np.zeros_like(n)
    e[np.arange(n.shape[0]), axis] = 1.0
    t1 = e - np.sum(e * n, axis=1, keepdims=True) * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    return t1, np.cross(n, t1)


def constraint_frames(mesh: SimplicialMesh, bc: str):
    """
    Orthonormal reduced basis T (3 nv x m) of the constrained nodal space, with
    dofs ordered 3 * vertex + component, and the vertex owning each column.
    """
    if bc not in BOUNDARY_CONDITIONS:
        raise UsageError("unknown boundary condition", bc=bc, allowed=list(BOUNDARY_CONDITIONS))
    require_dimension(mesh, 3)
    nv = mesh.n_vertices
    normals = nodal_normals(mesh)
    is_boundary = np.zeros(nv, dtype=bool)
    is_boundary[mesh.boundary_vertices] = True
    t1, t2 = _tangents(normals[mesh.boundary_vertices])
    tangent = {int(v): (a, b) for v, a, b in zip(mesh.boundary_vertices, t1, t2)}

    rows, cols, vals, owner = [], [], [], []
    col = 0
    for v in range(nv):
        if not is_boundary[v]:
            directions = np.eye(3)
        elif bc == "tangent-zero":
            directions = normals[v][None, :]
        else:
            directions = np.stack(tangent[v])
        for direction in directions:
            rows.extend(3 * v + np.arange(3))
            cols.extend([col] * 3)
            vals.extend(direction)
            owner.append(v)
            col += 1
    T = csr_from_arrays(rows, cols, vals, (3 * nv, col))
    return T, np.asarray(owner), normals


def bc_violation(mesh: SimplicialMesh, nodal: np.ndarray, bc: str, normals=None) -> float:
    """Largest forbidden boundary component of a nodal field (nv, 3)."""
    if normals is None:
        normals = nodal_normals(mesh)
    bv = mesh.boundary_vertices
    n, u = normals[bv], nodal[bv]
    normal_part = np.sum(u * n, axis=1)
    if bc == "normal-zero":
        return float(np.max(np.abs(normal_part), initial=0.0))
    tangential = u - normal_part[:, None] * n
    return float(np.max(np.linalg.norm(tangential, axis=1), initial=0.0))


# ─── defect functional ────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DefectFunctional:
    """J(U) and its gradient for nodal P1 vector fields U of shape (nv, 3)."""

    mesh: SimplicialMesh

    def _setup(self):
        geo = p1_geometry(self.mesh)
        _, wts, bary = volume_quadrature(self.mesh, DEFECT_QUAD_ORDER)
        return geo.grads, geo.volumes, wts, bary

    def cell_terms(self, nodal: np.ndarray):
        grads, vol, wts, bary = self._setup()
        local = nodal[self.mesh.cells]                      # (nc, 4, 3)
        omega = np.sum(np.cross(grads, local), axis=1)      # (nc, 3)
        div = np.einsum("cad,cad->c", grads, local)
        u = np.einsum("qa,cad->cqd", bary, local)            # (nc, q, 3)
        r = np.cross(omega[:, None, :], u)
        return grads, vol, wts, bary, local, omega, div, u, r

    def value(self, nodal: np.ndarray) -> float:
        _, vol, wts, _, _, _, div, _, r = self.cell_terms(nodal)
        return float(np.sum(wts * np.einsum("cqd,cqd->cq", r, r)) + np.sum(vol * div * div))

    def value_and_gradient(self, nodal: np.ndarray):
        grads, vol, wts, bary, _, omega, div, u, r = self.cell_terms(nodal)
        value = float(np.sum(wts * np.einsum("cqd,cqd->cq", r, r)) + np.sum(vol * div * div))
        p_cell = np.einsum("cq,cqd->cd", wts, np.cross(u, r))
        rxw = np.cross(r, omega[:, None, :])
        local = 2.0 * (np.cross(p_cell[:, None, :], grads)
                       + np.einsum("cq,qa,cqd->cad", wts, bary, rxw)
                       + (vol * div)[:, None, None] * grads)
        grad = np.zeros_like(nodal)
        for a in range(self.mesh.cells.shape[1]):
            np.add.at(grad, self.mesh.cells[:, a], local[:, a, :])
        return value, grad


# ─── projected gradient descent ───────────────────────────────────

def sphere_metric(mesh: SimplicialMesh, T) -> sp.csr_matrix:
    """Consistent P1 mass in constrained coordinates: ||T c||_L2^2 = c^T G c."""
    _, M = assemble_p1(mesh)
    return sp.csr_matrix(T.T @ sp.kron(M, sp.identity(3), format="csr") @ T)


def _descend(functional: DefectFunctional, T, metric, c0, iters: int):
    nv = functional.mesh.n_vertices
    riesz = factorize(metric)

    def nodal_of(c):
        return (T @ c).reshape(nv, 3)

    def retract(x):
        return x / np.sqrt(x @ (metric @ x))

    c = retract(c0)
    value, grad = functional.value_and_gradient(nodal_of(c))
    trajectory = [value]
    step = 1.0
    stopped = False
    for _ in range(iters):
        g_c = T.T @ grad.ravel()
        # L2 gradient projected onto the tangent space of the sphere
        g_t = riesz.solve(g_c) - (c @ g_c) * c
        slope = float(g_t @ (metric @ g_t))
        if slope <= GRAD_TOL * max(1.0, value):
            break
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = retract(c - step * g_t)
            trial_value = functional.value(nodal_of(trial))
            if trial_value <= value - ARMIJO_SLOPE * step * slope:
                accepted = True
                break
            step *= BACKTRACK_FACTOR
        if not accepted:
            stopped = True
            break
        c = trial
        value, grad = functional.value_and_gradient(nodal_of(c))
        trajectory.append(value)
        step *= 2.0
    return c, trajectory, stopped


def _initial(mesh: SimplicialMesh, T, init: str, rng, lam: Optional[float]):
    if init == "spheromak":
        field = make_spheromak(spheromak_root() if lam is None else lam)
        return T.T @ interpolate_p1_vector(mesh, field).ravel()
    return rng.standard_normal(T.shape[1])


def beltrami_defect_min(mesh: SimplicialMesh, bc: str = "tangent-zero", iters: int = 500,
                        seed: int = DEFAULT_SEED, restarts: int = 5, threads: int = 1,
                        init: str = "random", lam: Optional[float] = None) -> ProbeResult:
    """
    Minimum of J over P1 fields with ||u||_L2 = 1 (consistent mass) satisfying
    ``bc`` at boundary vertices, by projected L2-gradient descent with Armijo
    backtracking. Restart r starts from default_rng([seed, r]); the lowest J
    wins, ties by restart index. A spheromak start is deterministic and uses
    one restart. ``norm`` is re-measured by quadrature.
    """
    require_dimension(mesh, 3)
    if init not in INIT_MODES:
        raise UsageError("unknown probe initialization", init=init, allowed=list(INIT_MODES))
    if iters < 0 or restarts < 1:
        raise UsageError("iters must be >= 0 and restarts >= 1", iters=iters, restarts=restarts)
    if init == "spheromak":
        restarts = 1
    T, _, normals = constraint_frames(mesh, bc)
    metric = sphere_metric(mesh, T)
    functional = DefectFunctional(mesh)

    def run(r):
        rng = np.random.default_rng([seed, r])
        c0 = _initial(mesh, T, init, rng, lam)
        c, trajectory, stopped = _descend(functional, T, metric, c0, iters)
        logger.info("probe %s restart %d: J %.3e -> %.3e in %d steps%s", bc, r, trajectory[0],
                    trajectory[-1], len(trajectory) - 1, " (stopped)" if stopped else "")
        return r, c, trajectory, stopped

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            runs = list(executor.map(run, range(restarts)))
    else:
        runs = [run(r) for r in range(restarts)]

    best = min(runs, key=lambda item: (item[2][-1], item[0]))
    r, c, trajectory, stopped = best
    nodal = (T @ c).reshape(mesh.n_vertices, 3)
    return ProbeResult(
        J=float(trajectory[-1]), coefficients=nodal, trajectory=trajectory, bc=bc,
        mesh_id=mesh.mesh_id, seed=seed, stopped=stopped, restart=r, restarts=restarts,
        init=init, norm=l2_norm(mesh, NodalField(mesh, nodal), order=2),
        details={"bc_violation": bc_violation(mesh, nodal, bc, normals),
                 "restart_J": [float(item[2][-1]) for item in runs]},
    )


# ─── least-squares Beltrami form ──────────────────────────────────

def _cross_matrices(g: np.ndarray) -> np.ndarray:
    """[g]_x with [g]_x v = g x v, stacked over leading axes."""
    out = np.zeros(g.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -g[..., 2], g[..., 1]
    out[..., 1, 0], out[..., 1, 2] = g[..., 2], -g[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -g[..., 1], g[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class BeltramiForms:
    """Sparse forms on nodal P1 vectors, dofs 3 * vertex + component."""

    curl: sp.csr_matrix    # (curl u, curl w)
    cross: sp.csr_matrix   # (curl u, w)
    mass: sp.csr_matrix    # (u, w)
    div: sp.csr_matrix     # (div u, div w)

    def quadratic(self, lam: float) -> sp.csr_matrix:
        """||curl u - lam u||^2 + ||div u||^2."""
        sym = self.cross + self.cross.T
        return sp.csr_matrix(self.curl - lam * sym + lam * lam * self.mass + self.div)


def assemble_beltrami_forms(mesh: SimplicialMesh) -> BeltramiForms:
    require_dimension(mesh, 3)
    geo = p1_geometry(mesh)
    vol = geo.volumes
    nl = mesh.cells.shape[1]
    C = _cross_matrices(geo.grads)                                   # (nc, 4, 3, 3)
    curl_local = vol[:, None, None, None, None] * np.einsum("caki,cbkj->cabij", C, C)
    div_local = vol[:, None, None, None, None] * np.einsum("cai,cbj->cabij", geo.grads, geo.grads)
    # (curl u, w): w index a, u index b; int w_a = vol / 4
    cross_local = (vol / nl)[:, None, None, None, None] * np.broadcast_to(
        C[:, None, :, :, :], (C.shape[0], nl, nl, 3, 3))

    dofs = 3 * mesh.cells[:, :, None] + np.arange(3)[None, None, :]  # (nc, 4, 3)
    rows = np.broadcast_to(dofs[:, :, None, :, None], curl_local.shape)
    cols = np.broadcast_to(dofs[:, None, :, None, :], curl_local.shape)
    n = 3 * mesh.n_vertices

    def build(local):
        return csr_from_arrays(rows, cols, local, (n, n))

    _, M = assemble_p1(mesh)
    return BeltramiForms(curl=build(curl_local), cross=build(cross_local),
                         mass=sp.kron(M, sp.identity(3), format="csr"), div=build(div_local))


def vainshtein_quotient(mesh: SimplicialMesh, nodal: np.ndarray, lam: float,
                        forms: Optional[BeltramiForms] = None) -> float:
    """Q_lam(u) / ||u||^2 for a nodal field without boundary constraint."""
    forms = forms or assemble_beltrami_forms(mesh)
    x = np.asarray(nodal, dtype=float).ravel()
    Q = forms.quadratic(lam)
    return float(x @ (Q @ x)) / float(x @ (forms.mass @ x))


def vainshtein_check(lambda_grid, mesh: SimplicialMesh, bc: str = "tangent-zero",
                     seed: int = DEFAULT_SEED, tol: float = 1e-8) -> dict:
    """
    Smallest eigenvalue of Q_lam against the mass matrix on the constrained
    nodal space for each lam. A positive floor means no discrete
    eigenfield curl u = lam u satisfies the boundary condition.
    """
    lams = [float(v) for v in lambda_grid]
    if not lams:
        raise FieldError("empty lambda grid")
    if any(v == 0.0 for v in lams):
        raise FieldError("lambda must be nonzero", lambdas=lams)
    T, _, _ = constraint_frames(mesh, bc)
    forms = assemble_beltrami_forms(mesh)
    Mr = sp.csr_matrix(T.T @ forms.mass @ T)
    values, converged = [], []
    for lam in lams:
        Qr = sp.csr_matrix(T.T @ forms.quadratic(lam) @ T)
        res = gen_eig_smallest(Qr, Mr, 1, shift=-1.0, tol=tol, pencil_kind=f"vainshtein lam={lam:g}",
                               mesh_id=mesh.mesh_id, seed=seed)
        values.append(float(res.eigenvalues[0]))
        converged.append(bool(res.converged))
        logger.info("vainshtein %s lam=%g: %.6e", bc, lam, values[-1])
    return {"lambdas": lams, "min_eigenvalues": values, "converged": converged,
            "floor": float(min(values)), "bc": bc, "mesh_id": mesh.mesh_id}


# ─── spheromak ────────────────────────────────────────────────────

def spheromak_verify(mesh: SimplicialMesh, lam: Optional[float] = None, scale: float = 1.0,
                     order: int = 4, h: float = 1e-4) -> dict:
    """
    Quadrature residuals of the analytic spheromak on a ball mesh:
    ||curl u x u|| and ||div u|| with central-difference derivatives, and
    ||u.nu|| on the polygonal boundary and on the exact unit sphere. The
    relative values divide by ||u||, and the cross term by ||u|| max|u|.
    """
    require_dimension(mesh, 3)
    lam = spheromak_root() if lam is None else float(lam)
    field: FieldSampler = make_spheromak(lam)
    if scale != 1.0:
        field = field.scaled(scale)
    _, pts, wts = volume_samples(mesh, order)
    u = field.eval(pts)
    norm_u = float(np.sqrt(np.sum(wts * np.einsum("ni,ni->n", u, u))))
    cross = np.cross(fd_curl(field, pts, h), u)
    div = fd_div(field, pts, h)
    cross_abs = float(np.sqrt(np.sum(wts * np.einsum("ni,ni->n", cross, cross))))
    div_abs = float(np.sqrt(np.sum(wts * div * div)))

    def trace(sphere_radius):
        _, bpts, bwts, nu = boundary_samples(mesh, order + 1, sphere_radius=sphere_radius)
        un = np.einsum("ni,ni->n", field.eval(bpts), nu)
        return float(np.sqrt(np.sum(bwts * un * un)))

    polygonal, sphere = trace(None), trace(1.0)
    peak = abs(scale)
    return {
        "lambda": lam,
        "scale": scale,
        "norm_u": norm_u,
        "curl_cross_abs": cross_abs,
        "div_abs": div_abs,
        "trace_polygonal_abs": polygonal,
        "trace_sphere_abs": sphere,
        "curl_cross_rel": cross_abs / (norm_u * peak),
        "div_rel": div_abs / norm_u,
        "trace_polygonal_rel": polygonal / norm_u,
        "trace_sphere_rel": sphere / norm_u,
        "mesh_id": mesh.mesh_id,
    }
