"""
Numerical checks of the div-curl integral identities: the Green-curl
formula, its power-weighted form, the Lagrange and curl-of-cross-product
identities, the star-shaped energy functional and the eigenfield identity.

Both sides of each identity are evaluated on the same quadrature points;
residuals are reported relative to the largest single term.
"""

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from fem import AnalyticField, CellField, boundary_samples, volume_samples
from fields import FieldSampler, WeightFunction, embed_points, fd_curl, fd_div, fd_jacobian
from geometry import SimplicialMesh, contains_point
from utils import DomainHypothesisError, FieldError

FD_WIDENING = 1e3


@dataclass
class IdentityReport:
    name: str
    terms: dict
    lhs_total: float
    rhs_totals: dict
    abs_residual: float
    rel_residual: float
    mesh_id: str = ""
    field_tag: str = ""
    order: int = 0
    derivative_source: str = "analytic"
    residuals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _relative(abs_residual: float, terms: dict) -> float:
    largest = max((abs(v) for v in terms.values()), default=0.0)
    return float(abs_residual / max(1e-30, largest))


def _finite(terms: dict) -> None:
    bad = [k for k, v in terms.items() if not np.isfinite(v)]
    if bad:
        raise FieldError("identity term is not finite", terms=bad)


def _pad_vectors(v: np.ndarray) -> np.ndarray:
    return embed_points(v)


def _pad_hessian(h: np.ndarray) -> np.ndarray:
    if h.shape[-1] == 3:
        return h
    out = np.zeros(h.shape[:-2] + (3, 3))
    out[..., :h.shape[-2], :h.shape[-1]] = h
    return out


def _for_mesh(field: FieldSampler, mesh: SimplicialMesh) -> FieldSampler:
    return field.planar() if mesh.dimension == 2 and field.dimension == 3 else field


def _volume_terms(field, phi, mesh, order):
    cells, pts, wts = volume_samples(mesh, order)
    u = field.eval(pts)
    curl = field.curl_vector(pts)
    div = field.div(pts)
    grad = _pad_vectors(phi.grad(pts))
    hess = _pad_hessian(phi.hessian(pts))
    lap = phi.laplacian(pts)
    uu = np.einsum("ni,ni->n", u, u)
    return {
        "curl_cross": float(np.sum(wts * np.einsum("ni,ni->n", np.cross(curl, u), grad))),
        "div": float(np.sum(wts * div * np.einsum("ni,ni->n", u, grad))),
        "laplacian": float(np.sum(wts * 0.5 * uu * lap)),
        "hessian": float(np.sum(wts * np.einsum("ni,nij,nj->n", u, hess, u))),
    }


def check_green_curl(field: FieldSampler, phi: WeightFunction, mesh: SimplicialMesh,
                     order: int = 4) -> IdentityReport:
    """
    int (curl u x u).grad phi + (div u)(u.grad phi)
      = int |u|^2/2 lap phi - u_i u_j phi_ij
        + oint |u|^2/2 grad phi.nu - (u x grad phi).(u x nu)

    Boundary integrals use one quadrature order more than volume integrals.
    """
    field = _for_mesh(field, mesh)
    terms = _volume_terms(field, phi, mesh, order)
    _, pts, wts, nu = boundary_samples(mesh, order + 1)
    u = field.eval(pts)
    grad = _pad_vectors(phi.grad(pts))
    nu3 = _pad_vectors(nu)
    uu = np.einsum("ni,ni->n", u, u)
    terms["boundary_grad"] = float(np.sum(wts * 0.5 * uu * np.einsum("ni,ni->n", grad, nu3)))
    terms["boundary_cross"] = float(np.sum(
        wts * np.einsum("ni,ni->n", np.cross(u, grad), np.cross(u, nu3))))
    _finite(terms)

    lhs = terms["curl_cross"] + terms["div"]
    rhs = terms["laplacian"] - terms["hessian"] + terms["boundary_grad"] - terms["boundary_cross"]
    abs_residual = abs(lhs - rhs)
    return IdentityReport(
        name="green_curl", terms=terms, lhs_total=lhs, rhs_totals={"rhs": rhs},
        abs_residual=abs_residual, rel_residual=_relative(abs_residual, terms),
        mesh_id=mesh.mesh_id, field_tag=field.tag, order=order,
        derivative_source=field.derivative_source,
    )


def _require_origin_outside(mesh: SimplicialMesh) -> None:
    if contains_point(mesh, np.zeros(mesh.dimension)):
        raise DomainHypothesisError(
            "origin lies in the closed domain; the power-weighted identity needs 0 outside it",
            mesh_id=mesh.mesh_id)


def check_weighted(field: FieldSampler, alpha: float, mesh: SimplicialMesh,
                   order: int = 4) -> IdentityReport:
    """
    Power-weighted identity with w = x/|x|^alpha, three ways:

      E1 = int (curl u x u).w + (div u)(u.w)
      E2 = V + oint (u.w)(u.nu) - |u|^2/2 w.nu
      E3 = V + oint |u|^2/2 w.nu - (u x w).(u x nu)

    with V = int |x|^-alpha [((d - alpha)/2 - 1)|u|^2 + alpha (u.x/|x|)^2].
    E2 and E3 differ only through the Lagrange identity.
    """
    alpha = float(alpha)
    if alpha < 0.0:
        raise FieldError("alpha must be non-negative", alpha=alpha)
    if alpha > 0.0:
        _require_origin_outside(mesh)
    field = _for_mesh(field, mesh)
    d = mesh.dimension

    cells, pts, wts = volume_samples(mesh, order)
    x3 = _pad_vectors(pts)
    r = np.linalg.norm(pts, axis=1)
    ra = r ** alpha if alpha > 0.0 else np.ones_like(r)
    w = x3 / ra[:, None]
    u = field.eval(pts)
    curl = field.curl_vector(pts)
    div = field.div(pts)
    uu = np.einsum("ni,ni->n", u, u)
    ux = np.einsum("ni,ni->n", u, x3)
    radial2 = np.divide(ux * ux, r * r, out=np.zeros_like(r), where=r > 0)

    terms = {
        "curl_cross": float(np.sum(wts * np.einsum("ni,ni->n", np.cross(curl, u), w))),
        "div": float(np.sum(wts * div * np.einsum("ni,ni->n", u, w))),
        "volume": float(np.sum(wts * (((d - alpha) / 2.0 - 1.0) * uu + alpha * radial2) / ra)),
    }

    _, bpts, bwts, nu = boundary_samples(mesh, order + 1)
    bx = _pad_vectors(bpts)
    br = np.linalg.norm(bpts, axis=1)
    bw = bx / (br ** alpha if alpha > 0.0 else np.ones_like(br))[:, None]
    nu3 = _pad_vectors(nu)
    bu = field.eval(bpts)
    buu = np.einsum("ni,ni->n", bu, bu)
    w_nu = np.einsum("ni,ni->n", bw, nu3)
    terms["boundary_normal"] = float(np.sum(
        bwts * np.einsum("ni,ni->n", bu, bw) * np.einsum("ni,ni->n", bu, nu3)))
    terms["boundary_half"] = float(np.sum(bwts * 0.5 * buu * w_nu))
    terms["boundary_cross"] = float(np.sum(
        bwts * np.einsum("ni,ni->n", np.cross(bu, bw), np.cross(bu, nu3))))
    _finite(terms)

    e1 = terms["curl_cross"] + terms["div"]
    e2 = terms["volume"] + terms["boundary_normal"] - terms["boundary_half"]
    e3 = terms["volume"] + terms["boundary_half"] - terms["boundary_cross"]
    scale = max(abs(v) for v in terms.values()) if terms else 0.0
    residuals = {
        "E1-E2": abs(e1 - e2),
        "E2-E3": abs(e2 - e3),
        "E1-E2_rel": abs(e1 - e2) / max(1e-30, scale),
        "E2-E3_rel": abs(e2 - e3) / max(1e-30, scale),
    }
    return IdentityReport(
        name="weighted", terms=terms, lhs_total=e1, rhs_totals={"E2": e2, "E3": e3},
        abs_residual=residuals["E1-E2"], rel_residual=residuals["E1-E2_rel"],
        mesh_id=mesh.mesh_id, field_tag=f"{field.tag} alpha={alpha:g}", order=order,
        derivative_source=field.derivative_source, residuals=residuals,
    )


def check_lagrange_pointwise(u, x, nu):
    """|(u x x).(u x nu) - (|u|^2 (x.nu) - (u.x)(u.nu))|, vectorized over rows."""
    u, x, nu = (np.asarray(a, dtype=float) for a in (u, x, nu))
    lhs = np.sum(np.cross(u, x) * np.cross(u, nu), axis=-1)
    rhs = (np.sum(u * u, axis=-1) * np.sum(x * nu, axis=-1)
           - np.sum(u * x, axis=-1) * np.sum(u * nu, axis=-1))
    return np.abs(lhs - rhs)


def check_curl_cross_pointwise(a: FieldSampler, b: FieldSampler, x, h: float = 1e-4):
    """
    |curl(a x b) - [(div b) a - (div a) b + (b.grad) a - (a.grad) b]|,
    every derivative by central differences.
    """
    product = FieldSampler(
        tag=f"({a.tag})x({b.tag})",
        value_fn=lambda p: np.cross(a.eval(p), b.eval(p)),
    )
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    lhs = np.atleast_2d(fd_curl(product, pts, h))
    ja, jb = fd_jacobian(a, pts, h), fd_jacobian(b, pts, h)
    av, bv = np.atleast_2d(a.eval(pts)), np.atleast_2d(b.eval(pts))
    diva = np.trace(ja, axis1=-2, axis2=-1)
    divb = np.trace(jb, axis1=-2, axis2=-1)
    rhs = (divb[:, None] * av - diva[:, None] * bv
           + np.einsum("nij,nj->ni", ja, bv) - np.einsum("nij,nj->ni", jb, av))
    out = np.linalg.norm(lhs - rhs, axis=1)
    return float(out[0]) if single else out


class EnergyTerms(NamedTuple):
    volume_term: float
    boundary_term: float
    tangential_trace_norm: float


def energy_functional(field: FieldSampler, mesh: SimplicialMesh, order: int = 4,
                      center=None) -> EnergyTerms:
    """
    int |u|^2/2, oint |u|^2/2 (x.nu) and ||u x nu||_L2(boundary), with x
    measured from ``center`` (the origin by default).
    """
    field = _for_mesh(field, mesh)
    shift = np.zeros(mesh.dimension) if center is None else np.asarray(center, dtype=float)
    _, pts, wts = volume_samples(mesh, order)
    u = field.eval(pts)
    volume = float(np.sum(wts * 0.5 * np.einsum("ni,ni->n", u, u)))

    _, bpts, bwts, nu = boundary_samples(mesh, order + 1)
    bu = field.eval(bpts)
    nu3 = _pad_vectors(nu)
    x_nu = np.einsum("ni,ni->n", _pad_vectors(bpts - shift), nu3)
    boundary = float(np.sum(bwts * 0.5 * np.einsum("ni,ni->n", bu, bu) * x_nu))
    cross = np.cross(bu, nu3)
    trace = float(np.sqrt(np.sum(bwts * np.einsum("ni,ni->n", cross, cross))))
    return EnergyTerms(volume, boundary, trace)


def eigen_identity_check(u: CellField, curl_u: Optional[CellField], beta: float,
                         mesh: SimplicialMesh, order: int = 3, center=None,
                         form: str = "normal") -> IdentityReport:
    """
    Eigenfield identity terms for a field with curl curl u = beta u:

      normal:  int |curl u|^2 + beta |u|^2 + oint |curl u|^2 (x.nu) - beta oint |u|^2 (x.nu)
      tangent: int |curl u|^2 + beta |u|^2 + beta oint |u|^2 (x.nu) - oint |curl u|^2 (x.nu)

    The residual is the absolute value of the combination; it can vanish for
    nonzero u only if the boundary traces the identity assumes hold.
    """
    if form not in ("normal", "tangent"):
        raise FieldError("form must be 'normal' or 'tangent'", form=form)
    if isinstance(u, FieldSampler):
        u = AnalyticField(_for_mesh(u, mesh))
    if isinstance(curl_u, FieldSampler):
        curl_u = AnalyticField(_for_mesh(curl_u, mesh))
    shift = np.zeros(mesh.dimension) if center is None else np.asarray(center, dtype=float)

    def curl_values(cells, pts):
        if curl_u is None:
            return u.curls(cells, pts)
        return curl_u.values(cells, pts)

    cells, pts, wts = volume_samples(mesh, order)
    uv, cv = u.values(cells, pts), curl_values(cells, pts)
    bcells, bpts, bwts, nu = boundary_samples(mesh, order + 1)
    buv, bcv = u.values(bcells, bpts), curl_values(bcells, bpts)
    x_nu = np.einsum("nd,nd->n", bpts - shift, nu)

    terms = {
        "curl_sq": float(np.sum(wts * np.einsum("ni,ni->n", cv, cv))),
        "u_sq": float(np.sum(wts * np.einsum("ni,ni->n", uv, uv))),
        "boundary_curl_sq": float(np.sum(bwts * np.einsum("ni,ni->n", bcv, bcv) * x_nu)),
        "boundary_u_sq": float(np.sum(bwts * np.einsum("ni,ni->n", buv, buv) * x_nu)),
    }
    _finite(terms)
    beta = float(beta)
    if form == "normal":
        total = (terms["curl_sq"] + beta * terms["u_sq"]
                 + terms["boundary_curl_sq"] - beta * terms["boundary_u_sq"])
    else:
        total = (terms["curl_sq"] + beta * terms["u_sq"]
                 + beta * terms["boundary_u_sq"] - terms["boundary_curl_sq"])
    weighted = {"curl_sq": terms["curl_sq"], "beta_u_sq": beta * terms["u_sq"],
                "boundary_curl_sq": terms["boundary_curl_sq"],
                "beta_boundary_u_sq": beta * terms["boundary_u_sq"]}
    return IdentityReport(
        name=f"eigen_{form}", terms=terms, lhs_total=total, rhs_totals={"zero": 0.0},
        abs_residual=abs(total), rel_residual=_relative(abs(total), weighted),
        mesh_id=mesh.mesh_id, field_tag=f"beta={beta:g}", order=order,
    )


def fd_consistency(field: FieldSampler, points, h: float = 1e-4) -> dict:
    """Max deviation of analytic curl/div from central differences at the given points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    curl_gap = np.max(np.abs(np.atleast_2d(field.curl(pts)) - np.atleast_2d(fd_curl(field, pts, h))))
    div_gap = np.max(np.abs(np.asarray(field.div(pts)) - np.asarray(fd_div(field, pts, h))))
    return {"curl": float(curl_gap), "div": float(div_gap)}
