"""
Finite-element kernels shared by the eigen solvers, identity checks and the
probe: P1 Lagrange, lowest-order edge (Whitney) elements with the Kikuchi
coupling, Taylor-Hood P2/P1, and cell-wise evaluable discrete fields.
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Protocol

import numpy as np
import scipy.sparse as sp

from fields import FieldSampler, curl_from_jacobian, embed_points
from geometry import SimplicialMesh, boundary_quadrature, volume_quadrature
from linalg import csr_from_arrays

TH_QUAD_ORDER = 4


def _pad3(vectors: np.ndarray) -> np.ndarray:
    if vectors.shape[-1] == 3:
        return vectors
    return np.concatenate([vectors, np.zeros(vectors.shape[:-1] + (3 - vectors.shape[-1],))], axis=-1)


def _scatter(row_ids, col_ids, local, shape):
    rows = np.broadcast_to(row_ids[:, :, None], local.shape)
    cols = np.broadcast_to(col_ids[:, None, :], local.shape)
    return csr_from_arrays(rows, cols, local, shape)


# ─── P1 ───────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class P1Geometry:
    grads: np.ndarray    # (nc, d+1, d)
    consts: np.ndarray   # (nc, d+1)
    volumes: np.ndarray  # (nc,)

    def barycentric(self, cells, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)[:, :self.grads.shape[2]]
        return self.consts[cells] + np.einsum("nkd,nd->nk", self.grads[cells], points)


@lru_cache(maxsize=16)
def p1_geometry(mesh: SimplicialMesh) -> P1Geometry:
    """Barycentric coordinate functions lambda_i(x) = consts_i + grads_i . x per cell."""
    v = mesh.vertices[mesh.cells]
    nc, nl = v.shape[0], v.shape[1]
    system = np.concatenate([np.ones((nc, nl, 1)), v], axis=2)
    coef = np.linalg.inv(system)
    return P1Geometry(np.transpose(coef[:, 1:, :], (0, 2, 1)), coef[:, 0, :], mesh.cell_volumes)


def assemble_p1(mesh: SimplicialMesh):
    """P1 stiffness and consistent mass matrices."""
    geo = p1_geometry(mesh)
    d = mesh.dimension
    vol = geo.volumes[:, None, None]
    k_local = vol * np.einsum("cid,cjd->cij", geo.grads, geo.grads)
    m_ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    m_local = vol * m_ref[None, :, :]
    shape = (mesh.n_vertices, mesh.n_vertices)
    return (_scatter(mesh.cells, mesh.cells, k_local, shape),
            _scatter(mesh.cells, mesh.cells, m_local, shape))


# ─── edges ────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class EdgeTopology:
    edges: np.ndarray        # (ne, 2), ascending vertex pairs
    cell_edges: np.ndarray   # (nc, nl)
    cell_signs: np.ndarray   # (nc, nl), +1 when the local pair runs low -> high
    local_pairs: np.ndarray  # (nl, 2)
    boundary: np.ndarray     # (ne,) bool

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]


def _edge_index(edges, nv, pairs):
    keys = edges[:, 0] * nv + edges[:, 1]
    wanted = pairs[..., 0] * nv + pairs[..., 1]
    return np.searchsorted(keys, wanted)


@lru_cache(maxsize=16)
def build_edges(mesh: SimplicialMesh) -> EdgeTopology:
    """Global edges oriented by ascending vertex index, per-cell maps and the boundary mask."""
    d = mesh.dimension
    local_pairs = np.array(list(itertools.combinations(range(d + 1), 2)))
    ends = mesh.cells[:, local_pairs]
    signs = np.where(ends[..., 0] < ends[..., 1], 1, -1)
    edges = mesh.edges
    cell_edges = _edge_index(edges, mesh.n_vertices, np.sort(ends, axis=2))

    facet_pairs = list(itertools.combinations(range(d), 2))
    bends = np.sort(mesh.boundary_facets[:, facet_pairs], axis=2).reshape(-1, 2)
    boundary = np.zeros(edges.shape[0], dtype=bool)
    boundary[_edge_index(edges, mesh.n_vertices, bends)] = True
    return EdgeTopology(edges, cell_edges, signs, local_pairs, boundary)


def local_edge_curls(mesh: SimplicialMesh) -> np.ndarray:
    """Signed curls of the edge basis per cell, (nc, nl, 3); 2D curls sit in the third slot."""
    geo = p1_geometry(mesh)
    topo = build_edges(mesh)
    a, b = topo.local_pairs[:, 0], topo.local_pairs[:, 1]
    ga, gb = geo.grads[:, a, :], geo.grads[:, b, :]
    if mesh.dimension == 3:
        curls = 2.0 * np.cross(ga, gb)
    else:
        scalar = 2.0 * (ga[..., 0] * gb[..., 1] - ga[..., 1] * gb[..., 0])
        curls = np.zeros(scalar.shape + (3,))
        curls[..., 2] = scalar
    return curls * topo.cell_signs[..., None]


@dataclass(frozen=True, eq=False)
class WhitneyMatrices:
    curl: sp.csr_matrix      # (ne, ne)
    mass: sp.csr_matrix      # (ne, ne)
    coupling: sp.csr_matrix  # (nv, ne), B[p, e] = (w_e, grad lambda_p)
    topology: EdgeTopology


def assemble_whitney(mesh: SimplicialMesh) -> WhitneyMatrices:
    geo = p1_geometry(mesh)
    topo = build_edges(mesh)
    d = mesh.dimension
    A, B = topo.local_pairs[:, 0], topo.local_pairs[:, 1]
    vol = geo.volumes[:, None, None]
    signs = topo.cell_signs.astype(float)
    sign2 = signs[:, :, None] * signs[:, None, :]

    curls = local_edge_curls(mesh)
    k_local = vol * np.einsum("cik,cjk->cij", curls, curls)

    G = np.einsum("cpd,cqd->cpq", geo.grads, geo.grads)
    L = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    Ai, Aj, Bi, Bj = A[:, None], A[None, :], B[:, None], B[None, :]
    m_local = (L[Ai, Aj] * G[:, Bi, Bj] - L[Ai, Bj] * G[:, Bi, Aj]
               - L[Bi, Aj] * G[:, Ai, Bj] + L[Bi, Bj] * G[:, Ai, Aj])
    m_local = vol * sign2 * m_local

    diff = geo.grads[:, B, :] - geo.grads[:, A, :]
    b_local = (geo.volumes / (d + 1))[:, None, None] * np.einsum("cid,cpd->cpi", diff, geo.grads)
    b_local = b_local * signs[:, None, :]

    ne, nv = topo.n_edges, mesh.n_vertices
    return WhitneyMatrices(
        curl=_scatter(topo.cell_edges, topo.cell_edges, k_local, (ne, ne)),
        mass=_scatter(topo.cell_edges, topo.cell_edges, m_local, (ne, ne)),
        coupling=_scatter(mesh.cells, topo.cell_edges, b_local, (nv, ne)),
        topology=topo,
    )


def edge_interpolate_gradient(mesh: SimplicialMesh, nodal: np.ndarray) -> np.ndarray:
    """Edge coefficients of grad(P1 function): the difference along each oriented edge."""
    edges = build_edges(mesh).edges
    return nodal[edges[:, 1]] - nodal[edges[:, 0]]


# ─── Taylor-Hood ──────────────────────────────────────────────────

def p2_basis(lam: np.ndarray) -> np.ndarray:
    """P2 basis values from barycentric coordinates (N, d+1): vertices then local edges."""
    nl = lam.shape[1]
    pairs = list(itertools.combinations(range(nl), 2))
    verts = lam * (2.0 * lam - 1.0)
    edges = np.stack([4.0 * lam[:, a] * lam[:, b] for a, b in pairs], axis=1)
    return np.concatenate([verts, edges], axis=1)


def p2_basis_derivs(lam: np.ndarray) -> np.ndarray:
    """d phi_n / d lambda_k, shape (N, n_basis, d+1)."""
    n, nl = lam.shape
    pairs = list(itertools.combinations(range(nl), 2))
    out = np.zeros((n, nl + len(pairs), nl))
    for i in range(nl):
        out[:, i, i] = 4.0 * lam[:, i] - 1.0
    for j, (a, b) in enumerate(pairs):
        out[:, nl + j, a] = 4.0 * lam[:, b]
        out[:, nl + j, b] = 4.0 * lam[:, a]
    return out


def p2_cell_nodes(mesh: SimplicialMesh) -> np.ndarray:
    topo = build_edges(mesh)
    return np.concatenate([mesh.cells, mesh.n_vertices + topo.cell_edges], axis=1)


@dataclass(frozen=True, eq=False)
class TaylorHoodMatrices:
    stiffness: sp.csr_matrix   # vector Laplacian, (d*n2, d*n2)
    mass: sp.csr_matrix        # (d*n2, d*n2)
    divergence: sp.csr_matrix  # (nv, d*n2), B[p, v] = -(q_p, div v)
    n_p2: int
    boundary_nodes: np.ndarray


def assemble_taylor_hood(mesh: SimplicialMesh) -> TaylorHoodMatrices:
    geo = p1_geometry(mesh)
    topo = build_edges(mesh)
    d, nv = mesh.dimension, mesh.n_vertices
    n2 = nv + topo.n_edges
    _, wts, bary = volume_quadrature(mesh, TH_QUAD_ORDER)
    phi = p2_basis(bary)
    dlam = p2_basis_derivs(bary)
    dphi = np.einsum("qnk,ckd->cqnd", dlam, geo.grads)

    ks = np.einsum("cq,cqid,cqjd->cij", wts, dphi, dphi)
    ms = np.einsum("cq,qi,qj->cij", wts, phi, phi)
    nodes = p2_cell_nodes(mesh)
    k_scalar = _scatter(nodes, nodes, ks, (n2, n2))
    m_scalar = _scatter(nodes, nodes, ms, (n2, n2))
    eye = sp.identity(d, format="csr")

    blocks = []
    for comp in range(d):
        local = -np.einsum("cq,qp,cqn->cpn", wts, bary, dphi[..., comp])
        blocks.append(_scatter(mesh.cells, nodes + comp * n2, local, (nv, d * n2)))
    divergence = blocks[0]
    for block in blocks[1:]:
        divergence = divergence + block
    divergence = sp.csr_matrix(divergence)

    boundary_nodes = np.concatenate([mesh.boundary_vertices,
                                     nv + np.flatnonzero(topo.boundary)])
    return TaylorHoodMatrices(
        stiffness=sp.kron(eye, k_scalar, format="csr"),
        mass=sp.kron(eye, m_scalar, format="csr"),
        divergence=divergence,
        n_p2=n2,
        boundary_nodes=boundary_nodes,
    )


# ─── spaces ───────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FemSpace:
    """A discrete space with its essential-boundary mask; kind is p1, p2p1 or edge."""

    mesh: SimplicialMesh
    kind: str
    n_dofs: int
    essential: np.ndarray

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.essential)

    def extend(self, x_free: np.ndarray) -> np.ndarray:
        full = np.zeros((self.n_dofs,) + np.shape(x_free)[1:])
        full[self.free] = x_free
        return full


def p1_space(mesh: SimplicialMesh, dirichlet: bool) -> FemSpace:
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    if dirichlet:
        mask[mesh.boundary_vertices] = True
    return FemSpace(mesh, "p1", mesh.n_vertices, mask)


def edge_space(mesh: SimplicialMesh) -> FemSpace:
    topo = build_edges(mesh)
    return FemSpace(mesh, "edge", topo.n_edges, topo.boundary.copy())


def taylor_hood_space(mesh: SimplicialMesh, th: TaylorHoodMatrices) -> FemSpace:
    d = mesh.dimension
    mask = np.zeros(d * th.n_p2, dtype=bool)
    for comp in range(d):
        mask[comp * th.n_p2 + th.boundary_nodes] = True
    return FemSpace(mesh, "p2p1", d * th.n_p2, mask)


# ─── cell-wise fields ─────────────────────────────────────────────

class CellField(Protocol):
    def values(self, cells: np.ndarray, points: np.ndarray) -> np.ndarray: ...

    def curls(self, cells: np.ndarray, points: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class AnalyticField:
    """A FieldSampler seen through the cell-wise interface (cells are ignored)."""

    field: FieldSampler

    def values(self, cells, points):
        return self.field.eval(embed_points(points))

    def curls(self, cells, points):
        return self.field.curl_vector(embed_points(points))


@dataclass(frozen=True, eq=False)
class EdgeField:
    mesh: SimplicialMesh
    coeffs: np.ndarray

    def values(self, cells, points):
        geo = p1_geometry(self.mesh)
        topo = build_edges(self.mesh)
        lam = geo.barycentric(cells, points)
        g = geo.grads[cells]
        a, b = topo.local_pairs[:, 0], topo.local_pairs[:, 1]
        w = lam[:, a, None] * g[:, b, :] - lam[:, b, None] * g[:, a, :]
        c = self.coeffs[topo.cell_edges[cells]] * topo.cell_signs[cells]
        return _pad3(np.einsum("ni,nid->nd", c, w))

    @property
    def cell_curls(self) -> np.ndarray:
        topo = build_edges(self.mesh)
        return np.einsum("ci,cik->ck", self.coeffs[topo.cell_edges], local_edge_curls(self.mesh))

    def curls(self, cells, points=None):
        return self.cell_curls[cells]


@dataclass(frozen=True, eq=False)
class P2Field:
    """Vector P2 field with block ordering comp * n_p2 + node."""

    mesh: SimplicialMesh
    coeffs: np.ndarray

    def _local(self, cells, points):
        geo = p1_geometry(self.mesh)
        lam = geo.barycentric(cells, points)
        nodes = p2_cell_nodes(self.mesh)[cells]
        d = self.mesh.dimension
        n2 = self.coeffs.size // d
        c = np.stack([self.coeffs[comp * n2 + nodes] for comp in range(d)], axis=1)
        return geo, lam, c

    def values(self, cells, points):
        _, lam, c = self._local(cells, points)
        return _pad3(np.einsum("ncm,nm->nc", c, p2_basis(lam)))

    def jacobian(self, cells, points):
        geo, lam, c = self._local(cells, points)
        dphi = np.einsum("nmk,nkd->nmd", p2_basis_derivs(lam), geo.grads[cells])
        jac = np.einsum("ncm,nmd->ncd", c, dphi)
        out = np.zeros((jac.shape[0], 3, 3))
        d = self.mesh.dimension
        out[:, :d, :d] = jac
        return out

    def curls(self, cells, points):
        return curl_from_jacobian(self.jacobian(cells, points))


@dataclass(frozen=True, eq=False)
class NodalField:
    """P1 vector field from nodal values U (nv, 3)."""

    mesh: SimplicialMesh
    nodal: np.ndarray

    def values(self, cells, points):
        lam = p1_geometry(self.mesh).barycentric(cells, points)
        return np.einsum("nk,nkc->nc", lam, self.nodal[self.mesh.cells[cells]])

    @property
    def cell_jacobians(self) -> np.ndarray:
        geo = p1_geometry(self.mesh)
        grads = _pad3(geo.grads)
        return np.einsum("cki,ckj->cij", self.nodal[self.mesh.cells], grads)

    def curls(self, cells, points=None):
        return curl_from_jacobian(self.cell_jacobians[cells])


def interpolate_p1_vector(mesh: SimplicialMesh, field: FieldSampler) -> np.ndarray:
    return np.asarray(field.eval(embed_points(mesh.vertices)), dtype=float)


# ─── field norms and traces ───────────────────────────────────────

def volume_samples(mesh: SimplicialMesh, order: int):
    """Flattened volume quadrature: (cells, points, weights)."""
    pts, wts, _ = volume_quadrature(mesh, order)
    cells = np.repeat(np.arange(mesh.n_cells), wts.shape[1])
    return cells, pts.reshape(-1, mesh.dimension), wts.ravel()


def boundary_samples(mesh: SimplicialMesh, order: int, sphere_radius: Optional[float] = None):
    """
    Flattened boundary quadrature: (owner cells, points, weights, normals).
    With ``sphere_radius`` the points are pushed radially onto that sphere and
    the normals become x/|x|.
    """
    pts, wts, normals = boundary_quadrature(mesh, order)
    q = wts.shape[1]
    cells = np.repeat(mesh.facet_cells, q)
    pts = pts.reshape(-1, mesh.dimension)
    nu = np.repeat(normals, q, axis=0)
    if sphere_radius is not None:
        r = np.linalg.norm(pts, axis=1, keepdims=True)
        nu = pts / r
        pts = sphere_radius * nu
    return cells, pts, wts.ravel(), nu


def l2_norm(mesh: SimplicialMesh, field: CellField, order: int = 3) -> float:
    cells, pts, wts = volume_samples(mesh, order)
    vals = field.values(cells, pts)
    return float(np.sqrt(np.sum(wts * np.einsum("ni,ni->n", vals, vals))))
