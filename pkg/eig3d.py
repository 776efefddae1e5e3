"""
Maxwell (edge elements, tangential trace zero) and Stokes (Taylor-Hood)
eigenvalues on tetrahedral meshes, boundary traces of the first
eigenfields, and the curl-duality witness that the normal-trace Maxwell
eigenvalue equals the tangential one.
"""

import logging
from dataclasses import dataclass

import numpy as np

from eig2d import laplace_eigs, maxwell_pencil_eigs, require_dimension, stokes_pencil_eigs
from fem import (AnalyticField, CellField, EdgeField, FemSpace, NodalField, P2Field,
                 boundary_samples, l2_norm, volume_samples)
from fields import FieldSampler, embed_points
from geometry import SimplicialMesh
from linalg import EigenResult
from utils import DEFAULT_SEED, FieldError

logger = logging.getLogger(__name__)

EdgeSpace3d = FemSpace

ZERO_FIELD_TOL = 1e-14


def maxwell_eigs_3d(mesh: SimplicialMesh, k: int = 6, shift: float = 0.0, tol: float = 1e-8,
                    seed: int = DEFAULT_SEED) -> EigenResult:
    """
    alpha_1 with lowest-order edge elements, u x nu = 0, Kikuchi multiplier.
    On the unit cube the first eigenvalue 2 pi^2 is triple, so k >= 3 sees
    the whole cluster.
    """
    require_dimension(mesh, 3)
    return maxwell_pencil_eigs(mesh, k, shift, tol, seed)


def stokes_eigs_3d(mesh: SimplicialMesh, k: int = 4, shift: float = 0.0, tol: float = 1e-8,
                   seed: int = DEFAULT_SEED) -> EigenResult:
    require_dimension(mesh, 3)
    return stokes_pencil_eigs(mesh, k, shift, tol, seed)


def edge_eigenfield(mesh: SimplicialMesh, result: EigenResult, index: int = 0) -> EdgeField:
    return EdgeField(mesh, np.asarray(result.eigenvectors[:, index], dtype=float))


def stokes_eigenfield(mesh: SimplicialMesh, result: EigenResult, index: int = 0) -> P2Field:
    return P2Field(mesh, np.asarray(result.eigenvectors[:, index], dtype=float))


# ─── boundary traces ──────────────────────────────────────────────

def _as_cell_field(field, mesh: SimplicialMesh) -> CellField:
    if isinstance(field, FieldSampler):
        if mesh.dimension == 2 and field.dimension == 3:
            field = field.planar()
        return AnalyticField(field)
    return field


def boundary_trace_report(field, mesh: SimplicialMesh, order: int = 3,
                          sphere_radius=None) -> dict:
    """
    Boundary L2 norms of u.nu, curl u x nu, u x nu and curl u.nu, each divided
    by ||u||_L2(Omega). Traces are taken from the owner cell of each facet.
    With ``sphere_radius`` the facet quadrature points are projected onto that
    sphere and the normal is x/|x|; meaningful for analytic fields only.
    """
    field = _as_cell_field(field, mesh)
    norm_u = l2_norm(mesh, field, order)
    if norm_u <= ZERO_FIELD_TOL:
        raise FieldError("trace report of a zero field", mesh_id=mesh.mesh_id)
    cells, pts, wts, nu = boundary_samples(mesh, order + 1, sphere_radius=sphere_radius)
    nu3 = embed_points(nu)
    u = field.values(cells, pts)
    c = field.curls(cells, pts)

    def norm(values):
        values = np.asarray(values, dtype=float)
        sq = values * values if values.ndim == 1 else np.einsum("ni,ni->n", values, values)
        return float(np.sqrt(np.sum(wts * sq)) / norm_u)

    return {
        "norm_u_dot_nu": norm(np.einsum("ni,ni->n", u, nu3)),
        "norm_curlu_cross_nu": norm(np.cross(c, nu3)),
        "norm_u_cross_nu": norm(np.cross(u, nu3)),
        "norm_curlu_dot_nu": norm(np.einsum("ni,ni->n", c, nu3)),
        "norm_u": norm_u,
    }


# ─── curl duality ─────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class CellConstantField:
    """One vector per cell; its elementwise curl is zero."""

    cell_values: np.ndarray

    def values(self, cells, points):
        return self.cell_values[cells]

    def curls(self, cells, points=None):
        return np.zeros((len(cells), 3))


def _nodal_average(mesh: SimplicialMesh, cell_values: np.ndarray) -> np.ndarray:
    weights = np.zeros(mesh.n_vertices)
    acc = np.zeros((mesh.n_vertices, 3))
    vol = mesh.cell_volumes
    for j in range(mesh.cells.shape[1]):
        np.add.at(weights, mesh.cells[:, j], vol)
        np.add.at(acc, mesh.cells[:, j], vol[:, None] * cell_values)
    return acc / weights[:, None]


def beta_duality_check(result: EigenResult, mesh: SimplicialMesh, index: int = 0,
                       order: int = 3) -> dict:
    """
    Witness that v = curl u of a tangential-trace eigenfield u is a
    normal-trace eigenfield with the same eigenvalue.

    v is piecewise constant with zero flux through the boundary facets. It is
    recovered as a continuous P1 field w by volume-weighted nodal averaging,
    with w.nu left free, and the witness is the Rayleigh quotient
    ||curl w||^2 / ||w||^2 against alpha; the gap shrinks under refinement.
    Also reported: ||v.nu|| and ||v x nu|| on the boundary relative to ||v||,
    ||w.nu|| relative to ||w||, and ||curl w.nu|| / (alpha ||u.nu||), which
    tends to 1 because curl v = alpha u.
    """
    alpha, u = result.pair(index)
    if np.linalg.norm(u) <= ZERO_FIELD_TOL:
        raise FieldError("duality check of a zero eigenfield", mesh_id=mesh.mesh_id)
    field_u = EdgeField(mesh, u)
    v_cells = field_u.cell_curls
    v = CellConstantField(v_cells)
    norm_v = l2_norm(mesh, v, order)
    if norm_v <= ZERO_FIELD_TOL:
        raise FieldError("curl of the eigenfield vanishes", mesh_id=mesh.mesh_id)

    recovered = NodalField(mesh, _nodal_average(mesh, v_cells))
    cells, pts, wts = volume_samples(mesh, order)
    w_vals = recovered.values(cells, pts)
    w_curl = recovered.curls(cells)
    norm_w_sq = float(np.sum(wts * np.einsum("ni,ni->n", w_vals, w_vals)))
    if norm_w_sq <= ZERO_FIELD_TOL ** 2:
        raise FieldError("recovered curl vanishes", mesh_id=mesh.mesh_id)
    quotient = float(np.sum(wts * np.einsum("ni,ni->n", w_curl, w_curl))) / norm_w_sq

    bcells, bpts, bwts, nu = boundary_samples(mesh, order + 1)
    nu3 = embed_points(nu)

    def bnorm(scalar_or_vec):
        a = np.asarray(scalar_or_vec)
        sq = a * a if a.ndim == 1 else np.einsum("ni,ni->n", a, a)
        return float(np.sqrt(np.sum(bwts * sq)))

    vb = v.values(bcells, bpts)
    u_dot = bnorm(np.einsum("ni,ni->n", field_u.values(bcells, bpts), nu3))
    w_dot = bnorm(np.einsum("ni,ni->n", recovered.values(bcells, bpts), nu3))
    curl_w_dot = bnorm(np.einsum("ni,ni->n", recovered.curls(bcells), nu3))

    report = {
        "alpha": float(alpha),
        "witness": quotient,
        "witness_rel_gap": abs(quotient - alpha) / abs(alpha),
        "norm_v_dot_nu": bnorm(np.einsum("ni,ni->n", vb, nu3)) / norm_v,
        "norm_v_cross_nu": bnorm(np.cross(vb, nu3)) / norm_v,
        "norm_w_dot_nu": w_dot / np.sqrt(norm_w_sq),
        "curl_trace_ratio": curl_w_dot / (alpha * u_dot) if u_dot > ZERO_FIELD_TOL else float("nan"),
    }
    logger.debug("beta duality on %s: %s", mesh.mesh_id, report)
    return report


# ─── 3D spectrum ──────────────────────────────────────────────────

def spectrum_3d(mesh: SimplicialMesh, seed: int = DEFAULT_SEED) -> dict:
    """mu_2, alpha_1 and gamma_1 on one tetrahedral mesh."""
    require_dimension(mesh, 3)
    return {
        "mu2": float(laplace_eigs(mesh, 2, False, seed=seed).eigenvalues[1]),
        "alpha1": float(maxwell_eigs_3d(mesh, k=3, seed=seed).eigenvalues[0]),
        "gamma1": float(stokes_eigs_3d(mesh, k=2, seed=seed).eigenvalues[0]),
    }
