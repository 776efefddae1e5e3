"""
Simplicial meshes of the test domains, boundary facets with outward normals,
simplex quadrature, star-kernel detection and the ASCII mesh format.
"""

import itertools
import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_jacobi

from linalg import LpProblem, lp_max_margin
from utils import MeshError, short_hash

DOMAINS_2D = ("square", "disk", "lshape", "annulus")
DOMAINS_3D = ("cube", "ball", "shell")
STAR_TOL = 1e-9
MAX_QUAD_ORDER = 8


# ─── mesh type ────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray
    domain_tag: str = "custom"
    origin_excluded: bool = False

    def __post_init__(self):
        for name, dtype in (("vertices", float), ("cells", np.int64), ("boundary_facets", np.int64)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.boundary_facets.shape[0]

    @cached_property
    def mesh_id(self) -> str:
        return short_hash(self.vertices.tobytes(), self.cells.tobytes(),
                          self.boundary_facets.tobytes(), self.domain_tag)

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return _signed_volumes(self.vertices, self.cells)

    @property
    def cell_volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def cell_centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @cached_property
    def facet_centroids(self) -> np.ndarray:
        return self.vertices[self.boundary_facets].mean(axis=1)

    @cached_property
    def facet_cells(self) -> np.ndarray:
        """Owning cell of each boundary facet."""
        owners = _facet_owners(self.cells, self.boundary_facets)
        missing = np.flatnonzero(owners < 0)
        if missing.size:
            raise MeshError("boundary facet is not a face of any cell", facet=int(missing[0]))
        return owners

    @cached_property
    def _facet_geometry(self):
        raw, measures = _facet_raw_normals(self.vertices, self.boundary_facets)
        normals = raw / measures[:, None] / (1.0 if self.dimension == 2 else 2.0)
        outward = np.einsum("ij,ij->i", normals,
                            self.facet_centroids - self.cell_centroids[self.facet_cells])
        normals = np.where(outward[:, None] < 0, -normals, normals)
        return normals, measures

    @property
    def facet_normals(self) -> np.ndarray:
        return self._facet_geometry[0]

    @property
    def facet_measures(self) -> np.ndarray:
        return self._facet_geometry[1]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_facets)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique vertex pairs (ascending within each pair), lexicographically sorted."""
        pairs = np.sort(self.cells[:, list(itertools.combinations(range(self.dimension + 1), 2))], axis=2)
        return np.unique(pairs.reshape(-1, 2), axis=0)

    def translated(self, shift) -> "SimplicialMesh":
        shift = np.asarray(shift, dtype=float)
        return SimplicialMesh(self.vertices - shift, self.cells, self.boundary_facets,
                              self.domain_tag, self.origin_excluded)

    def describe(self) -> dict:
        return {
            "domain_tag": self.domain_tag,
            "mesh_id": self.mesh_id,
            "dimension": self.dimension,
            "vertices": self.n_vertices,
            "cells": self.n_cells,
            "boundary_facets": self.n_facets,
            "origin_excluded": self.origin_excluded,
        }


def _signed_volumes(vertices, cells) -> np.ndarray:
    d = vertices.shape[1]
    v = vertices[cells]
    edges = v[:, 1:, :] - v[:, :1, :]
    return np.linalg.det(edges) / math.factorial(d)


def _facet_raw_normals(vertices, facets):
    v = vertices[facets]
    if vertices.shape[1] == 2:
        t = v[:, 1] - v[:, 0]
        raw = np.stack([t[:, 1], -t[:, 0]], axis=1)
        measures = np.linalg.norm(raw, axis=1)
        return raw, measures
    raw = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    measures = 0.5 * np.linalg.norm(raw, axis=1)
    return raw, measures


def _cell_faces(cells):
    """All faces of all cells as sorted tuples, with the owning cell index."""
    n_local = cells.shape[1]
    faces = np.concatenate([np.delete(cells, i, axis=1) for i in range(n_local)])
    owners = np.tile(np.arange(cells.shape[0]), n_local)
    return np.sort(faces, axis=1), owners


def _facet_owners(cells, facets) -> np.ndarray:
    faces, owners = _cell_faces(cells)
    lookup = {tuple(f): int(c) for f, c in zip(faces.tolist(), owners.tolist())}
    return np.array([lookup.get(tuple(sorted(f)), -1) for f in facets.tolist()], dtype=np.int64)


def find_boundary_facets(cells) -> np.ndarray:
    """Faces used by exactly one cell, in sorted order."""
    faces, _ = _cell_faces(np.asarray(cells))
    unique, counts = np.unique(faces, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: a face is shared by more than two cells",
                        face=unique[np.argmax(counts > 2)].tolist())
    return unique[counts == 1]


def build_mesh(vertices, cells, domain_tag="custom", origin_excluded=False) -> SimplicialMesh:
    """Orient cells positively, drop unused vertices and extract boundary facets."""
    vertices = np.asarray(vertices, dtype=float)
    cells = np.array(cells, dtype=np.int64)
    used = np.unique(cells)
    if used.size < vertices.shape[0]:
        remap = -np.ones(vertices.shape[0], dtype=np.int64)
        remap[used] = np.arange(used.size)
        vertices, cells = vertices[used], remap[cells]
    vol = _signed_volumes(vertices, cells)
    flip = vol < 0
    cells[flip, 0], cells[flip, 1] = cells[flip, 1].copy(), cells[flip, 0].copy()
    return SimplicialMesh(vertices, cells, find_boundary_facets(cells), domain_tag, origin_excluded)


def validate_mesh(mesh: SimplicialMesh, line_of_cell: Optional[list] = None,
                  line_of_facet: Optional[list] = None) -> None:
    """Reject inverted cells and boundaries that do not close."""
    vol = mesh.signed_volumes
    bad = np.flatnonzero(vol <= 0)
    if bad.size:
        c = int(bad[0])
        extra = {"line": line_of_cell[c]} if line_of_cell else {}
        raise MeshError("cell has non-positive signed volume", cell=c, **extra)

    expected = {tuple(f) for f in find_boundary_facets(mesh.cells).tolist()}
    given = [tuple(sorted(f)) for f in mesh.boundary_facets.tolist()]
    for i, f in enumerate(given):
        if f not in expected:
            extra = {"line": line_of_facet[i]} if line_of_facet else {}
            raise MeshError("listed facet is not a boundary face of the cells", facet=i, **extra)
    if len(set(given)) != len(given) or len(given) != len(expected):
        missing = sorted(expected - set(given))
        raise MeshError("non-watertight boundary: facets missing or repeated",
                        missing=len(missing), first=list(missing[0]) if missing else None)


# ─── generators ───────────────────────────────────────────────────

@dataclass(frozen=True)
class DomainSpec:
    name: str
    r0: float = 1.0
    r1: float = 2.0

    @property
    def dimension(self) -> int:
        return 2 if self.name in DOMAINS_2D else 3

    def describe(self) -> str:
        if self.name in ("annulus", "shell"):
            return f"{self.name}({self.r0:g},{self.r1:g})"
        return self.name


_DOMAIN_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(\s*([^,]+)\s*,\s*([^)]+)\s*\))?\s*$")


def parse_domain(text: str, r0: Optional[float] = None, r1: Optional[float] = None) -> DomainSpec:
    """Parse ``square``, ``annulus(1,2)``, ``shell`` (radii from keywords) and so on."""
    if isinstance(text, DomainSpec):
        return text
    match = _DOMAIN_RE.match(str(text).lower())
    if not match or match.group(1) not in DOMAINS_2D + DOMAINS_3D:
        raise MeshError("unknown domain descriptor", domain=text)
    name = match.group(1)
    if match.group(2) is not None:
        if name not in ("annulus", "shell"):
            raise MeshError("only annulus and shell take radii", domain=text)
        try:
            r0, r1 = float(match.group(2)), float(match.group(3))
        except ValueError:
            raise MeshError("radii must be numbers", domain=text) from None
    spec = DomainSpec(name, 1.0 if r0 is None else float(r0), 2.0 if r1 is None else float(r1))
    if name in ("annulus", "shell") and not (0.0 < spec.r0 < spec.r1):
        raise MeshError("r0 < r1 required", r0=spec.r0, r1=spec.r1)
    return spec


def _kuhn_offsets(d: int):
    """Vertex offsets of the d! simplices of a unit hypercube sharing the main diagonal."""
    out = []
    for perm in itertools.permutations(range(d)):
        corner = np.zeros(d, dtype=np.int64)
        chain = [corner.copy()]
        for axis in perm:
            corner[axis] = 1
            chain.append(corner.copy())
        out.append(chain)
    return np.array(out)


def _structured_grid(d: int, counts: int, lower: float, upper: float,
                     keep: Optional[Callable] = None, reflect: bool = False):
    """
    Kuhn-split box grid with ``counts`` cells per side. With ``reflect`` the
    split in each cell runs from the corner nearest the box center.
    """
    axis = np.linspace(lower, upper, counts + 1)
    mesh_axes = np.meshgrid(*([axis] * d), indexing="ij")
    vertices = np.stack([m.ravel() for m in mesh_axes], axis=1)
    strides = np.array([(counts + 1) ** (d - 1 - k) for k in range(d)])
    offsets = _kuhn_offsets(d)
    mid = 0.5 * (lower + upper)
    cells = []
    for index in itertools.product(range(counts), repeat=d):
        index = np.array(index)
        lo = axis[index]
        hi = axis[index + 1]
        if keep is not None and not keep(lo, hi):
            continue
        local = offsets
        if reflect:
            mirror = (0.5 * (lo + hi)) < mid
            local = np.where(mirror, 1 - offsets, offsets)
        cells.append(((index + local) * strides).sum(axis=-1))
    return vertices, np.concatenate(cells)


def _radial_disk_map(vertices):
    inf = np.abs(vertices).max(axis=1)
    two = np.linalg.norm(vertices, axis=1)
    scale = np.divide(inf, two, out=np.ones_like(inf), where=two > 0)
    return vertices * scale[:, None]


def _shell_map(vertices, a, r0, r1):
    inf = np.abs(vertices).max(axis=1)
    two = np.linalg.norm(vertices, axis=1)
    r = r0 + (r1 - r0) * (inf - a) / (1.0 - a)
    return vertices / two[:, None] * r[:, None]


def generate_mesh(domain, n: int, r0: Optional[float] = None,
                  r1: Optional[float] = None) -> SimplicialMesh:
    """
    Mesh one of the test domains at refinement level n.

    square/cube: [0,1]^d, n cells per side. disk/ball: [-1,1]^d with 2n cells
    per side, split from the center outwards, mapped radially onto the unit
    disk/ball. annulus/shell: the same grid with the inner box of half-width
    ceil(n/2)/n removed, mapped onto r0 <= |x| <= r1 (n >= 2). lshape:
    [0,2]^2 minus (1,2)^2 with step 1/n.
    """
    spec = parse_domain(domain, r0, r1)
    if int(n) != n or n < 1:
        raise MeshError("refinement level must be a positive integer", n=n)
    n = int(n)
    d = spec.dimension
    tag = f"{spec.describe()} n={n}"

    if spec.name in ("square", "cube"):
        vertices, cells = _structured_grid(d, n, 0.0, 1.0)
        return build_mesh(vertices, cells, tag)

    if spec.name == "lshape":
        vertices, cells = _structured_grid(
            2, 2 * n, 0.0, 2.0, keep=lambda lo, hi: not (lo[0] >= 1.0 - 1e-12 and lo[1] >= 1.0 - 1e-12))
        return build_mesh(vertices, cells, tag)

    if spec.name in ("disk", "ball"):
        vertices, cells = _structured_grid(d, 2 * n, -1.0, 1.0, reflect=True)
        return build_mesh(_radial_disk_map(vertices), cells, tag)

    if n < 2:
        raise MeshError("annulus and shell meshes need n >= 2", n=n)
    a = math.ceil(n / 2) / n
    vertices, cells = _structured_grid(
        d, 2 * n, -1.0, 1.0, reflect=True,
        keep=lambda lo, hi: not (np.all(lo >= -a - 1e-12) and np.all(hi <= a + 1e-12)))
    used = np.unique(cells)
    mapped = vertices.copy()
    mapped[used] = _shell_map(vertices[used], a, spec.r0, spec.r1)
    return build_mesh(mapped, cells, tag, origin_excluded=True)


# ─── quadrature ───────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray   # barycentric, (q, d+1)
    weights: np.ndarray  # sum to 1/d!
    order: int

    @property
    def dimension(self) -> int:
        return self.points.shape[1] - 1


def _gauss_jacobi_unit(m: int, power: int):
    """Nodes/weights on [0,1] for the weight (1-t)**power."""
    x, w = roots_jacobi(m, power, 0)
    return 0.5 * (1.0 + x), w * 0.5 ** (power + 1)


@lru_cache(maxsize=None)
def quad_rule(simplex_dim: int, order: int) -> QuadratureRule:
    """
    Positive-weight rule on the reference simplex exact to ``order``.

    Order 1 is the centroid rule; order 2 uses the edge-midpoint triangle
    rule and the symmetric 4-point tetrahedron rule; higher orders use
    collapsed-coordinate Gauss-Jacobi products.
    """
    if simplex_dim not in (1, 2, 3):
        raise MeshError("simplex dimension must be 1, 2 or 3", simplex_dim=simplex_dim)
    if int(order) != order or not 1 <= order <= MAX_QUAD_ORDER:
        raise MeshError("unsupported quadrature order", order=order, max=MAX_QUAD_ORDER)
    d = simplex_dim
    measure = 1.0 / math.factorial(d)

    if order == 1:
        return QuadratureRule(np.full((1, d + 1), 1.0 / (d + 1)), np.array([measure]), 1)
    if order == 2 and d == 2:
        pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        return QuadratureRule(pts, np.full(3, measure / 3), 2)
    if order == 2 and d == 3:
        a, b = 0.5854101966249685, 0.1381966011250105
        pts = np.full((4, 4), b)
        np.fill_diagonal(pts, a)
        return QuadratureRule(pts, np.full(4, measure / 4), 2)

    m = math.ceil((order + 1) / 2)
    factors = [_gauss_jacobi_unit(m, d - 1 - k) for k in range(d)]
    points, weights = [], []
    for combo in itertools.product(range(m), repeat=d):
        t = [factors[k][0][combo[k]] for k in range(d)]
        w = math.prod(factors[k][1][combo[k]] for k in range(d))
        x, remaining = [], 1.0
        for k in range(d):
            x.append(remaining * t[k])
            remaining *= 1.0 - t[k]
        points.append([1.0 - sum(x)] + x)
        weights.append(w)
    return QuadratureRule(np.array(points), np.array(weights), int(order))


def volume_quadrature(mesh: SimplicialMesh, order: int):
    """Physical points (nc, q, dim), weights (nc, q) and barycentric coordinates (q, dim+1)."""
    rule = quad_rule(mesh.dimension, order)
    pts = np.einsum("qk,ckd->cqd", rule.points, mesh.vertices[mesh.cells])
    wts = mesh.cell_volumes[:, None] * rule.weights[None, :] * math.factorial(mesh.dimension)
    return pts, wts, rule.points


def boundary_quadrature(mesh: SimplicialMesh, order: int):
    """Physical points (nf, q, dim), weights (nf, q) and facet normals (nf, dim)."""
    fdim = mesh.dimension - 1
    rule = quad_rule(fdim, order)
    pts = np.einsum("qk,fkd->fqd", rule.points, mesh.vertices[mesh.boundary_facets])
    wts = mesh.facet_measures[:, None] * rule.weights[None, :] * math.factorial(fdim)
    return pts, wts, mesh.facet_normals


def integrate_volume(mesh: SimplicialMesh, f: Callable, order: int = 2) -> float:
    """Integral of a vectorized scalar f(points (N, dim)) -> (N,) over the mesh."""
    pts, wts, _ = volume_quadrature(mesh, order)
    vals = np.asarray(f(pts.reshape(-1, mesh.dimension)), dtype=float).reshape(wts.shape)
    return float(np.sum(np.sum(vals * wts, axis=1)))


def integrate_boundary(mesh: SimplicialMesh, g: Callable, order: int = 2) -> float:
    """Integral of a vectorized g(points, normals) over the boundary facets."""
    pts, wts, normals = boundary_quadrature(mesh, order)
    nu = np.repeat(normals[:, None, :], wts.shape[1], axis=1)
    vals = np.asarray(g(pts.reshape(-1, mesh.dimension), nu.reshape(-1, mesh.dimension)),
                      dtype=float).reshape(wts.shape)
    return float(np.sum(np.sum(vals * wts, axis=1)))


# ─── star kernel ──────────────────────────────────────────────────

def star_problem(mesh: SimplicialMesh) -> LpProblem:
    return LpProblem.from_facets(mesh.facet_normals, mesh.facet_centroids)


def star_kernel(mesh: SimplicialMesh, tol: float = STAR_TOL):
    """Center maximizing min_f nu_f . (c_f - x0), or None if that margin is negative."""
    return lp_max_margin(star_problem(mesh), tol=tol)


def grid_margin_search(mesh: SimplicialMesh, resolution: Optional[int] = None,
                       chunk: int = 4096):
    """Brute-force best margin over a grid on the bounding box."""
    if resolution is None:
        resolution = 81 if mesh.dimension == 2 else 21
    problem = star_problem(mesh)
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(mesh.dimension)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    best_point, best_margin = None, -np.inf
    for start in range(0, grid.shape[0], chunk):
        block = grid[start:start + chunk]
        margins = problem.margins(block)
        i = int(np.argmax(margins))
        if margins[i] > best_margin:
            best_point, best_margin = block[i], float(margins[i])
    spacing = float(np.max((hi - lo) / (resolution - 1)))
    return best_point, best_margin, spacing


def contains_point(mesh: SimplicialMesh, point, tol: float = 1e-12) -> bool:
    """Exact containment in the closed mesh, after a bounding-box prefilter."""
    point = np.asarray(point, dtype=float)
    v = mesh.vertices[mesh.cells]
    inside_box = np.all((v.min(axis=1) - tol <= point) & (point <= v.max(axis=1) + tol), axis=1)
    candidates = np.flatnonzero(inside_box)
    if candidates.size == 0:
        return False
    vc = v[candidates]
    edges = np.transpose(vc[:, 1:, :] - vc[:, :1, :], (0, 2, 1))
    rhs = point[None, :] - vc[:, 0, :]
    lam = np.linalg.solve(edges, rhs[..., None])[..., 0]
    bary = np.concatenate([1.0 - lam.sum(axis=1, keepdims=True), lam], axis=1)
    return bool(np.any(np.all(bary >= -1e-10, axis=1)))


# ─── topology ─────────────────────────────────────────────────────

def euler_characteristic(mesh: SimplicialMesh) -> int:
    chi = mesh.n_vertices - mesh.edges.shape[0]
    if mesh.dimension == 2:
        return chi + mesh.n_cells
    faces, _ = _cell_faces(mesh.cells)
    n_faces = np.unique(faces, axis=0).shape[0]
    return chi + n_faces - mesh.n_cells


def boundary_components(mesh: SimplicialMesh) -> int:
    """Connected components of the boundary (facets linked through shared vertices)."""
    parent = {int(v): int(v) for v in mesh.boundary_vertices}

    def root(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for facet in mesh.boundary_facets.tolist():
        r0 = root(facet[0])
        for v in facet[1:]:
            rv = root(v)
            if rv != r0:
                parent[rv] = r0
    return len({root(v) for v in parent})


def topology_check(mesh: SimplicialMesh) -> dict:
    """
    Heuristic simple-connectivity check: chi = 1 in 2D; chi = 1 with a
    connected boundary in 3D. Domains failing it carry nontrivial harmonic
    fields and the discrete spaces omit that constraint.
    """
    chi = euler_characteristic(mesh)
    components = boundary_components(mesh)
    verified = chi == 1 and (mesh.dimension == 2 or components == 1)
    return {"euler_characteristic": chi, "boundary_components": components,
            "topology_verified": bool(verified)}


# ─── mesh file format ─────────────────────────────────────────────

def write_mesh(mesh: SimplicialMesh, path) -> None:
    lines = [f"mesh {mesh.dimension} {mesh.n_vertices} {mesh.n_cells} {mesh.n_facets}",
             f"# domain_tag {mesh.domain_tag}",
             f"# origin_excluded {int(mesh.origin_excluded)}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.cells]
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.boundary_facets]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> SimplicialMesh:
    """Parse and validate a mesh file; errors carry the 1-based line number."""
    text = Path(path).read_text()
    tag, origin_excluded = "custom", False
    body = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].strip().split(None, 1)
            if parts and parts[0] == "domain_tag" and len(parts) == 2:
                tag = parts[1]
            elif parts and parts[0] == "origin_excluded" and len(parts) == 2:
                origin_excluded = parts[1].strip() in ("1", "true")
            continue
        body.append((number, line.split()))

    if not body or body[0][1][0] != "mesh" or len(body[0][1]) != 5:
        raise MeshError("expected header 'mesh <dim> <nv> <nc> <nbf>'",
                        line=body[0][0] if body else 1)
    header_line = body[0][0]
    try:
        dim, nv, nc, nbf = (int(t) for t in body[0][1][1:])
    except ValueError:
        raise MeshError("header counts must be integers", line=header_line) from None
    if dim not in (2, 3) or min(nv, nc, nbf) < 0:
        raise MeshError("bad header values", line=header_line)
    rows = body[1:]
    if len(rows) != nv + nc + nbf:
        at = rows[nv + nc + nbf][0] if len(rows) > nv + nc + nbf else (rows[-1][0] if rows else header_line)
        raise MeshError("line count does not match header", line=at,
                        expected=nv + nc + nbf, found=len(rows))

    def parse_block(block, width, kind, convert):
        out = []
        for number, tokens in block:
            if len(tokens) != width:
                raise MeshError(f"{kind} line needs {width} entries", line=number)
            try:
                out.append([convert(t) for t in tokens])
            except ValueError:
                raise MeshError(f"bad {kind} entry", line=number) from None
        return out

    vertices = parse_block(rows[:nv], dim, "vertex", float)
    cells = parse_block(rows[nv:nv + nc], dim + 1, "cell", int)
    facets = parse_block(rows[nv + nc:], dim, "facet", int)
    for block, start, kind in ((cells, nv, "cell"), (facets, nv + nc, "facet")):
        for i, row in enumerate(block):
            if min(row) < 0 or max(row) >= nv:
                raise MeshError(f"{kind} vertex index out of range", line=rows[start + i][0])

    mesh = SimplicialMesh(np.array(vertices, dtype=float).reshape(nv, dim),
                          np.array(cells, dtype=np.int64).reshape(nc, dim + 1),
                          np.array(facets, dtype=np.int64).reshape(nbf, dim),
                          tag, origin_excluded)
    validate_mesh(mesh,
                  line_of_cell=[rows[nv + i][0] for i in range(nc)],
                  line_of_facet=[rows[nv + nc + i][0] for i in range(nbf)])
    return mesh


def load_or_generate(mesh_path=None, domain=None, n=None, r0=None, r1=None) -> SimplicialMesh:
    if mesh_path:
        return read_mesh(mesh_path)
    if domain is None or n is None:
        raise MeshError("either a mesh file or a domain with n is required")
    return generate_mesh(domain, n, r0, r1)
