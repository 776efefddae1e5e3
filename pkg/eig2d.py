"""
First eigenvalues of the Laplacian, Stokes and Maxwell operators on planar
meshes: Dirichlet lambda_1 and Neumann mu_2 with P1 elements, Stokes gamma_1
with Taylor-Hood P2/P1, Maxwell alpha_1 with edge elements in the Kikuchi
mixed form. The pencil builders are dimension-independent; eig3d reuses them.
"""

import logging

import numpy as np
import scipy.sparse as sp

from fem import (FemSpace, assemble_p1, assemble_taylor_hood, assemble_whitney, edge_space,
                 p1_space, taylor_hood_space)
from geometry import SimplicialMesh, topology_check
from linalg import EigenResult, gen_eig_smallest
from utils import DEFAULT_SEED, MeshError

logger = logging.getLogger(__name__)

Fem2dSpace = FemSpace

NEUMANN_SHIFT = -1.0
SMOOTH_DOMAINS = ("disk", "ball", "annulus", "shell")
ORDERING_MARGIN = 3.0


def require_dimension(mesh: SimplicialMesh, dimension: int) -> None:
    if mesh.dimension != dimension:
        raise MeshError(f"a {dimension}D mesh is required", dimension=mesh.dimension,
                        mesh_id=mesh.mesh_id)


def hypothesis_flags(mesh: SimplicialMesh) -> dict:
    """Topology heuristics plus whether the domain is one of the smooth test domains."""
    flags = topology_check(mesh)
    name = mesh.domain_tag.split()[0].split("(")[0] if mesh.domain_tag else ""
    flags["formal_hypothesis_met"] = name in SMOOTH_DOMAINS
    if not flags["topology_verified"]:
        logger.warning("%s: topology not verified; harmonic fields are not excluded", mesh.domain_tag)
    return flags


def _restrict(A, rows, cols=None):
    cols = rows if cols is None else cols
    return sp.csr_matrix(A)[rows][:, cols]


def _finish(result: EigenResult, space: FemSpace, mesh: SimplicialMesh, **details) -> EigenResult:
    result.eigenvectors = space.extend(result.eigenvectors)
    result.details.update(space=space, dimension=mesh.dimension, dofs=int(space.n_dofs), **details)
    return result


# ─── Laplacian ────────────────────────────────────────────────────

def laplace_eigs(mesh: SimplicialMesh, k: int, dirichlet: bool, shift=None,
                 tol: float = 1e-8, seed: int = DEFAULT_SEED) -> EigenResult:
    K, M = assemble_p1(mesh)
    space = p1_space(mesh, dirichlet)
    free = space.free
    if shift is None:
        shift = 0.0 if dirichlet else NEUMANN_SHIFT
    kind = "laplace-dirichlet" if dirichlet else "laplace-neumann"
    result = gen_eig_smallest(_restrict(K, free), _restrict(M, free), k, shift=shift, tol=tol,
                              pencil_kind=kind, mesh_id=mesh.mesh_id, seed=seed)
    return _finish(result, space, mesh)


def laplace_dirichlet_eigs(mesh: SimplicialMesh, k: int = 6, shift=None, tol: float = 1e-8,
                           seed: int = DEFAULT_SEED) -> EigenResult:
    """P1 Dirichlet Laplacian; boundary rows eliminated. eigenvalues[0] is lambda_1."""
    require_dimension(mesh, 2)
    return laplace_eigs(mesh, k, True, shift, tol, seed)


def laplace_neumann_eigs(mesh: SimplicialMesh, k: int = 6, shift=None, tol: float = 1e-8,
                         seed: int = DEFAULT_SEED) -> EigenResult:
    """
    P1 Neumann Laplacian. eigenvalues[0] is the constant mode (about 0) and is
    kept; mu_2 is eigenvalues[1]. The default shift of -1 keeps the shifted
    pencil definite.
    """
    require_dimension(mesh, 2)
    result = laplace_eigs(mesh, max(k, 2), False, shift, tol, seed)
    result.details["zero_mode"] = float(result.eigenvalues[0])
    result.details["mu2"] = float(result.eigenvalues[1])
    return result


# ─── Maxwell (edge elements, Kikuchi multiplier) ──────────────────

def maxwell_pencil_eigs(mesh: SimplicialMesh, k: int, shift: float = 0.0, tol: float = 1e-8,
                        seed: int = DEFAULT_SEED) -> EigenResult:
    """
    [[K, B^T], [B, 0]] x = alpha [[M, 0], [0, 0]] x on interior edges and
    interior vertices. The multiplier removes discrete gradients, so every
    finite eigenvalue is a positive Maxwell eigenvalue with tangential trace zero.
    """
    wm = assemble_whitney(mesh)
    space = edge_space(mesh)
    fe = space.free
    fv = p1_space(mesh, dirichlet=True).free
    K = _restrict(wm.curl, fe)
    M = _restrict(wm.mass, fe)
    B = _restrict(wm.coupling, fv, fe)
    zero = sp.csr_matrix((fv.size, fv.size))
    A = sp.bmat([[K, B.T], [B, zero]], format="csr")
    Mb = sp.bmat([[M, None], [None, zero]], format="csr")
    result = gen_eig_smallest(A, Mb, k, shift=shift, tol=tol, pencil_kind="maxwell-kikuchi",
                              mesh_id=mesh.mesh_id, seed=seed)
    n_e = fe.size
    multipliers = result.eigenvectors[n_e:]
    result.eigenvectors = result.eigenvectors[:n_e]
    flags = hypothesis_flags(mesh)
    return _finish(result, space, mesh, multiplier_norms=[
        float(np.linalg.norm(multipliers[:, i])) for i in range(multipliers.shape[1])],
        div_residuals=[float(np.linalg.norm(B @ result.eigenvectors[:, i]))
                       for i in range(result.eigenvectors.shape[1])], **flags)


def maxwell_eigs_2d(mesh: SimplicialMesh, k: int = 6, shift: float = 0.0, tol: float = 1e-8,
                    seed: int = DEFAULT_SEED) -> EigenResult:
    """alpha_1 under u_T = 0 with the scalar 2D curl; equals mu_2 on simply connected domains."""
    require_dimension(mesh, 2)
    return maxwell_pencil_eigs(mesh, k, shift, tol, seed)


# ─── Stokes (Taylor-Hood) ─────────────────────────────────────────

def stokes_pencil_eigs(mesh: SimplicialMesh, k: int, shift: float = 0.0, tol: float = 1e-8,
                       seed: int = DEFAULT_SEED) -> EigenResult:
    """
    [[A, B^T], [B, 0]] x = gamma [[M, 0], [0, 0]] x with P2 velocity vanishing
    on the boundary and P1 pressure with vertex 0 pinned.
    """
    th = assemble_taylor_hood(mesh)
    space = taylor_hood_space(mesh, th)
    fu = space.free
    fp = np.arange(1, mesh.n_vertices)
    A = _restrict(th.stiffness, fu)
    M = _restrict(th.mass, fu)
    B = _restrict(th.divergence, fp, fu)
    zero = sp.csr_matrix((fp.size, fp.size))
    saddle = sp.bmat([[A, B.T], [B, zero]], format="csr")
    mass = sp.bmat([[M, None], [None, zero]], format="csr")
    result = gen_eig_smallest(saddle, mass, k, shift=shift, tol=tol, pencil_kind="stokes-taylor-hood",
                              mesh_id=mesh.mesh_id, seed=seed)
    result.eigenvectors = result.eigenvectors[:fu.size]
    result = _finish(result, space, mesh, **hypothesis_flags(mesh))
    full_b = sp.csr_matrix(th.divergence)
    residuals = []
    for i in range(result.eigenvectors.shape[1]):
        u = result.eigenvectors[:, i]
        residuals.append(float(np.linalg.norm(full_b @ u) / max(np.linalg.norm(u), 1e-300)))
    result.details["div_residuals"] = residuals
    return result


def stokes_eigs_2d(mesh: SimplicialMesh, k: int = 4, shift: float = 0.0, tol: float = 1e-8,
                   seed: int = DEFAULT_SEED) -> EigenResult:
    """gamma_1 with Taylor-Hood elements; details['div_residuals'] holds ||B u|| / ||u||."""
    require_dimension(mesh, 2)
    return stokes_pencil_eigs(mesh, k, shift, tol, seed)


# ─── ordering ─────────────────────────────────────────────────────

def refinement_error(fine: float, coarse: float, order: float = 2.0, ratio: float = 2.0) -> float:
    """Richardson estimate of the error in ``fine``."""
    return abs(fine - coarse) / (ratio ** order - 1.0)


def refinement_errors(coarse: dict, fine: dict, order: float = 2.0, ratio: float = 2.0) -> dict:
    return {name: refinement_error(fine[name], coarse[name], order, ratio) for name in fine}


def ordering_report(values: dict, errors: dict, chain, margin: float = ORDERING_MARGIN) -> dict:
    """
    Check values[chain[0]] < values[chain[1]] < ... with each gap larger than
    ``margin`` times the summed error estimates of its two ends.
    """
    steps = []
    for lo, hi in zip(chain, chain[1:]):
        gap = values[hi] - values[lo]
        budget = margin * (errors.get(lo, 0.0) + errors.get(hi, 0.0))
        steps.append({"lower": lo, "upper": hi, "gap": float(gap), "budget": float(budget),
                      "pass": bool(gap > budget)})
    return {"chain": list(chain), "steps": steps, "pass": all(s["pass"] for s in steps)}


def agreement_report(a: float, b: float, error: float, margin: float = ORDERING_MARGIN) -> dict:
    """|a - b| within ``margin`` times the error estimate."""
    gap = abs(a - b)
    return {"gap": float(gap), "budget": float(margin * error), "pass": bool(gap <= margin * error)}


def planar_spectrum(mesh: SimplicialMesh, seed: int = DEFAULT_SEED) -> dict:
    """lambda_1, mu_2, alpha_1 and gamma_1 on one planar mesh."""
    require_dimension(mesh, 2)
    return {
        "lambda1": float(laplace_dirichlet_eigs(mesh, k=2, seed=seed).eigenvalues[0]),
        "mu2": float(laplace_neumann_eigs(mesh, k=3, seed=seed).eigenvalues[1]),
        "alpha1": float(maxwell_eigs_2d(mesh, k=2, seed=seed).eigenvalues[0]),
        "gamma1": float(stokes_eigs_2d(mesh, k=2, seed=seed).eigenvalues[0]),
    }
