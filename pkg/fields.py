"""
Analytic vector fields and scalar weights with their derivatives, plus the
central-difference oracles used to check them.

Fields are 3-vector valued and vectorized over points of shape (N, 3). A
field with ``dimension == 2`` takes (N, 2) points, embeds them at x3 = 0 and
differentiates in-plane only; its curl is the scalar d1 u2 - d2 u1.
"""

import math
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from special import spherical_jn_over_pow
from utils import FieldError

FD_STEP = 1e-4
ORIGIN_TOL = 1e-14

Terms = Dict[Tuple[int, ...], float]


def embed_points(x, dimension: int = 3) -> np.ndarray:
    """(N, 2) or (N, 3) points -> (N, 3), padding x3 = 0 for planar input."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 3:
        return x
    if x.shape[-1] == 2:
        pad = np.zeros(x.shape[:-1] + (1,))
        return np.concatenate([x, pad], axis=-1)
    raise FieldError("points must have 2 or 3 coordinates", shape=x.shape)


def curl_from_jacobian(jac: np.ndarray) -> np.ndarray:
    """jac[..., i, j] = d u_i / d x_j."""
    return np.stack([jac[..., 2, 1] - jac[..., 1, 2],
                     jac[..., 0, 2] - jac[..., 2, 0],
                     jac[..., 1, 0] - jac[..., 0, 1]], axis=-1)


# ─── vector fields ────────────────────────────────────────────────

@dataclass(frozen=True)
class FieldSampler:
    tag: str
    value_fn: Callable
    curl_fn: Optional[Callable] = None
    div_fn: Optional[Callable] = None
    jacobian_fn: Optional[Callable] = None
    dimension: int = 3
    scale: float = 1.0

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = embed_points(np.atleast_2d(x))
        if self.dimension == 2:
            pts = pts.copy()
            pts[:, 2] = 0.0
        return pts, single

    @staticmethod
    def _shape(out, single):
        return out[0] if single else out

    def planar(self) -> "FieldSampler":
        return replace(self, dimension=2)

    def scaled(self, factor: float) -> "FieldSampler":
        return replace(self, scale=self.scale * factor, tag=f"{self.tag}*{factor:g}")

    @property
    def derivative_source(self) -> str:
        if self.dimension == 2:
            return "analytic" if self.jacobian_fn is not None else "finite-difference"
        if self.curl_fn is not None and (self.div_fn is not None or self.jacobian_fn is not None):
            return "analytic"
        return "finite-difference"

    def eval(self, x) -> np.ndarray:
        pts, single = self._points(x)
        return self._shape(self.scale * self.value_fn(pts), single)

    def jacobian(self, x) -> np.ndarray:
        pts, single = self._points(x)
        if self.jacobian_fn is not None:
            jac = self.scale * self.jacobian_fn(pts)
        else:
            jac = fd_jacobian(self, pts, FD_STEP, planar=self.dimension == 2)
        if self.dimension == 2:
            jac = jac.copy()
            jac[..., 2] = 0.0
        return self._shape(jac, single)

    def curl_vector(self, x) -> np.ndarray:
        pts, single = self._points(x)
        if self.dimension == 3 and self.curl_fn is not None:
            return self._shape(self.scale * self.curl_fn(pts), single)
        return self._shape(curl_from_jacobian(self.jacobian(pts)), single)

    def curl(self, x):
        c = self.curl_vector(x)
        return c[..., 2] if self.dimension == 2 else c

    def div(self, x):
        pts, single = self._points(x)
        if self.dimension == 3 and self.div_fn is not None:
            return self._shape(self.scale * self.div_fn(pts), single)
        jac = self.jacobian(pts)
        return self._shape(np.trace(jac, axis1=-2, axis2=-1), single)


def make_trig_beltrami(lam: float) -> FieldSampler:
    """u = (sin lam x3, cos lam x3, 0) with curl u = lam u."""
    lam = float(lam)
    if lam == 0.0:
        raise FieldError("lambda must be nonzero")

    def value(x):
        z = lam * x[:, 2]
        return np.stack([np.sin(z), np.cos(z), np.zeros_like(z)], axis=1)

    def jacobian(x):
        z = lam * x[:, 2]
        jac = np.zeros((x.shape[0], 3, 3))
        jac[:, 0, 2] = lam * np.cos(z)
        jac[:, 1, 2] = -lam * np.sin(z)
        return jac

    return FieldSampler(
        tag=f"trig:{lam:g}",
        value_fn=value,
        curl_fn=lambda x: lam * value(x),
        div_fn=lambda x: np.zeros(x.shape[0]),
        jacobian_fn=jacobian,
    )


# ─── polynomials ──────────────────────────────────────────────────

def _poly_eval(terms: Terms, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[0])
    for exps, coeff in terms.items():
        out = out + coeff * np.prod(x[:, :len(exps)] ** np.array(exps), axis=1)
    return out


def _poly_diff(terms: Terms, k: int) -> Terms:
    out = {}
    for exps, coeff in terms.items():
        if exps[k] == 0:
            continue
        lowered = list(exps)
        lowered[k] -= 1
        key = tuple(lowered)
        out[key] = out.get(key, 0.0) + coeff * exps[k]
    return out


def _normalize_table(table) -> Dict[int, Terms]:
    if isinstance(table, (list, tuple)):
        table = dict(enumerate(table))
    out = {}
    for comp, terms in table.items():
        if comp not in (0, 1, 2):
            raise FieldError("component index must be 0, 1 or 2", component=comp)
        clean = {}
        for exps, coeff in terms.items():
            exps = tuple(int(e) for e in exps) + (0,) * (3 - len(exps))
            if len(exps) != 3 or min(exps) < 0:
                raise FieldError("bad exponent tuple", exponents=exps)
            clean[exps] = clean.get(exps, 0.0) + float(coeff)
        out[comp] = clean
    return out


def make_polynomial_field(table, max_degree: int = 2) -> FieldSampler:
    """
    Polynomial field from {component: {(a, b, c): coeff}} meaning
    u_i = sum coeff * x1**a x2**b x3**c. Degrees above ``max_degree`` are rejected.
    """
    comps = _normalize_table(table)
    for comp, terms in comps.items():
        for exps in terms:
            if sum(exps) > max_degree:
                raise FieldError("polynomial degree too high", component=comp,
                                 degree=sum(exps), max_degree=max_degree)
    rows = [comps.get(i, {}) for i in range(3)]
    derivs = [[_poly_diff(rows[i], j) for j in range(3)] for i in range(3)]

    def value(x):
        return np.stack([_poly_eval(rows[i], x) for i in range(3)], axis=1)

    def jacobian(x):
        jac = np.zeros((x.shape[0], 3, 3))
        for i in range(3):
            for j in range(3):
                if derivs[i][j]:
                    jac[:, i, j] = _poly_eval(derivs[i][j], x)
        return jac

    def curl(x):
        return curl_from_jacobian(jacobian(x))

    def div(x):
        return np.trace(jacobian(x), axis1=1, axis2=2)

    return FieldSampler(tag=f"poly:{_describe_table(rows)}", value_fn=value,
                        curl_fn=curl, div_fn=div, jacobian_fn=jacobian)


def _describe_table(rows) -> str:
    parts = []
    for terms in rows:
        items = [f"{c:g}*x^{e}" for e, c in sorted(terms.items()) if c != 0.0]
        parts.append("+".join(items) or "0")
    return ",".join(parts)


_TERM_RE = re.compile(r"([+-]?)\s*([^+-]+)")
_FACTOR_RE = re.compile(r"^x([123])(?:\^(\d+))?$")


def parse_polynomial(text: str) -> Terms:
    """Parse a sum of terms like ``2*x1*x3 - x2^2 + 0.5``."""
    terms: Terms = {}
    source = text.replace(" ", "")
    if not source:
        raise FieldError("empty polynomial")
    if source[0] not in "+-":
        source = "+" + source
    pos = 0
    for match in _TERM_RE.finditer(source):
        if match.start() != pos:
            raise FieldError("cannot parse polynomial", text=text)
        pos = match.end()
        sign = -1.0 if match.group(1) == "-" else 1.0
        coeff, exps = sign, [0, 0, 0]
        for factor in match.group(2).split("*"):
            fm = _FACTOR_RE.match(factor)
            if fm:
                exps[int(fm.group(1)) - 1] += int(fm.group(2) or 1)
                continue
            try:
                coeff *= float(factor)
            except ValueError:
                raise FieldError("cannot parse polynomial factor", factor=factor) from None
        key = tuple(exps)
        terms[key] = terms.get(key, 0.0) + coeff
    if pos != len(source):
        raise FieldError("cannot parse polynomial", text=text)
    return terms


def parse_polynomial_field(spec: str) -> FieldSampler:
    """Three comma-separated component polynomials, e.g. ``x2,-x1,0``."""
    parts = [p for p in spec.split(",")]
    if len(parts) != 3:
        raise FieldError("polynomial field needs three components", spec=spec)
    return make_polynomial_field({i: parse_polynomial(p) for i, p in enumerate(parts)})


# ─── spheromak ────────────────────────────────────────────────────

def _spheromak_raw(lam: float, x: np.ndarray) -> np.ndarray:
    s = lam * np.linalg.norm(x, axis=1)
    s0 = spherical_jn_over_pow(0, s)
    s1 = spherical_jn_over_pow(1, s)
    s2 = spherical_jn_over_pow(2, s)
    X, Y, Z = x[:, 0], x[:, 1], x[:, 2]
    lam2 = lam * lam
    return np.stack([lam2 * s2 * X * Z - lam * s1 * Y,
                     lam2 * s2 * Y * Z + lam * s1 * X,
                     s0 - s1 + lam2 * s2 * Z * Z], axis=1)


def _meridian_points(r, theta):
    r, theta = np.atleast_1d(r), np.atleast_1d(theta)
    return np.stack([r * np.sin(theta), np.zeros_like(r), r * np.cos(theta)], axis=1)


@lru_cache(maxsize=32)
def spheromak_peak(lam: float) -> float:
    """max |u| over the closed unit ball: meridian grid search, then L-BFGS-B polish."""
    r = np.linspace(0.0, 1.0, 101)
    theta = np.linspace(0.0, np.pi, 181)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    mags = np.linalg.norm(_spheromak_raw(lam, _meridian_points(rr.ravel(), tt.ravel())), axis=1)
    i = int(np.argmax(mags))

    def objective(p):
        return -float(np.sum(_spheromak_raw(lam, _meridian_points(p[0], p[1])) ** 2))

    res = minimize(objective, x0=[rr.ravel()[i], tt.ravel()[i]], method="L-BFGS-B",
                   bounds=[(0.0, 1.0), (0.0, np.pi)])
    return float(max(mags[i], np.sqrt(max(-res.fun, 0.0))))


def make_spheromak(lam: float, normalize: bool = True) -> FieldSampler:
    """
    Axisymmetric force-free field on the unit ball with curl u = lam u,

        u = lam^2 S2 z x + lam S1 (-y, x, 0) + (S0 - S1) e_z,  S_n(s) = j_n(s)/s^n, s = lam|x|,

    tangent to the unit sphere exactly when j_1(lam) = 0. Scaled to max |u| = 1
    on the ball unless ``normalize`` is False.
    """
    lam = float(lam)
    if lam <= 0.0:
        raise FieldError("spheromak lambda must be positive", lam=lam)
    norm = 1.0 / spheromak_peak(lam) if normalize else 1.0

    def value(x):
        return norm * _spheromak_raw(lam, x)

    return FieldSampler(
        tag=f"spheromak:{lam:.7f}",
        value_fn=value,
        curl_fn=lambda x: lam * value(x),
        div_fn=lambda x: np.zeros(x.shape[0]),
    )


def parse_field(text: str) -> FieldSampler:
    """``trig:<lam>``, ``poly:<p1>,<p2>,<p3>`` or ``spheromak[:<lam>]``."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "trig":
            return make_trig_beltrami(float(arg or 1.0))
        if kind == "spheromak":
            if arg:
                return make_spheromak(float(arg))
            from special import spheromak_root
            return make_spheromak(spheromak_root())
    except ValueError:
        raise FieldError("bad field parameter", field=text) from None
    if kind == "poly":
        return parse_polynomial_field(arg)
    raise FieldError("unknown field", field=text)


# ─── weights ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class WeightFunction:
    """Scalar phi on d-dimensional points with gradient, Hessian and Laplacian."""

    tag: str
    value_fn: Callable
    grad_fn: Callable
    hessian_fn: Callable
    laplacian_fn: Callable
    dimension: int = 3

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dimension:
            raise FieldError("weight evaluated at points of the wrong dimension",
                             expected=self.dimension, got=pts.shape[1])
        return pts, single

    def eval(self, x):
        pts, single = self._points(x)
        out = self.value_fn(pts)
        return out[0] if single else out

    def grad(self, x):
        pts, single = self._points(x)
        out = self.grad_fn(pts)
        return out[0] if single else out

    def hessian(self, x):
        pts, single = self._points(x)
        out = self.hessian_fn(pts)
        return out[0] if single else out

    def laplacian(self, x):
        pts, single = self._points(x)
        out = self.laplacian_fn(pts)
        return out[0] if single else out


def make_power_weight(alpha: float, dimension: int = 3) -> WeightFunction:
    """
    phi with grad phi = x/|x|^alpha: |x|^(2-alpha)/(2-alpha), or ln|x| at
    alpha = 2. Laplacian (d - alpha)/|x|^alpha. Undefined at 0 for alpha > 0.
    """
    alpha = float(alpha)
    if alpha < 0.0:
        raise FieldError("alpha must be non-negative", alpha=alpha)
    d = int(dimension)

    def radius(x):
        r = np.linalg.norm(x, axis=1)
        if alpha > 0.0 and np.any(r <= ORIGIN_TOL):
            raise FieldError("power weight evaluated at the origin", alpha=alpha)
        return r

    def value(x):
        r = radius(x)
        if alpha == 2.0:
            return np.log(r)
        return r ** (2.0 - alpha) / (2.0 - alpha)

    def grad(x):
        r = radius(x)
        return x / (r ** alpha)[:, None]

    def hessian(x):
        r = radius(x)
        eye = np.eye(d)[None, :, :] / (r ** alpha)[:, None, None]
        outer = np.einsum("ni,nj->nij", x, x) * (alpha / r ** (alpha + 2.0))[:, None, None] \
            if alpha > 0.0 else 0.0
        return eye - outer

    def laplacian(x):
        r = radius(x)
        return (d - alpha) / r ** alpha

    return WeightFunction(f"power:{alpha:g}", value, grad, hessian, laplacian, d)


def make_polynomial_weight(terms, dimension: int = 3) -> WeightFunction:
    """phi = sum coeff * prod x_k**e_k, exponents of length ``dimension``."""
    d = int(dimension)
    terms = {tuple(int(e) for e in k): float(v) for k, v in dict(terms).items()}
    if any(len(k) != d for k in terms):
        raise FieldError("exponent tuples must match the dimension", dimension=d)
    grads = [_poly_diff(terms, k) for k in range(d)]
    hess = [[_poly_diff(grads[i], j) for j in range(d)] for i in range(d)]

    def grad(x):
        return np.stack([_poly_eval(g, x) for g in grads], axis=1)

    def hessian(x):
        out = np.zeros((x.shape[0], d, d))
        for i in range(d):
            for j in range(d):
                out[:, i, j] = _poly_eval(hess[i][j], x)
        return out

    return WeightFunction(
        tag="poly-weight",
        value_fn=lambda x: _poly_eval(terms, x),
        grad_fn=grad,
        hessian_fn=hessian,
        laplacian_fn=lambda x: np.trace(hessian(x), axis1=1, axis2=2),
        dimension=d,
    )


# ─── finite-difference oracles ────────────────────────────────────

def fd_jacobian(field: FieldSampler, x, h: float = FD_STEP, planar: bool = False) -> np.ndarray:
    """Central-difference Jacobian, jac[..., i, j] = d u_i / d x_j."""
    if h <= 0:
        raise FieldError("finite-difference step must be positive", h=h)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = embed_points(np.atleast_2d(x))
    jac = np.zeros(pts.shape[:1] + (3, 3))
    for j in range(2 if planar else 3):
        step = np.zeros(3)
        step[j] = h
        jac[:, :, j] = (field.scale * field.value_fn(pts + step)
                        - field.scale * field.value_fn(pts - step)) / (2.0 * h)
    return jac[0] if single else jac


def fd_curl(field: FieldSampler, x, h: float = FD_STEP):
    jac = fd_jacobian(field, x, h, planar=field.dimension == 2)
    curl = curl_from_jacobian(jac)
    return curl[..., 2] if field.dimension == 2 else curl


def fd_div(field: FieldSampler, x, h: float = FD_STEP):
    jac = fd_jacobian(field, x, h, planar=field.dimension == 2)
    return np.trace(jac, axis1=-2, axis2=-1)


def fd_richardson_gap(field: FieldSampler, x, h: float = FD_STEP) -> float:
    """max |fd_curl(h) - fd_curl(h/2)|, an estimate of the FD truncation error."""
    return float(np.max(np.abs(np.asarray(fd_curl(field, x, h)) - np.asarray(fd_curl(field, x, h / 2)))))


def parse_weight(text: str, dimension: int = 3) -> WeightFunction:
    """``r2`` (|x|^2/2), ``power:<alpha>`` or ``poly:<expr>`` in the mesh dimension."""
    d = int(dimension)
    kind, _, arg = text.partition(":")
    if kind == "r2":
        return make_polynomial_weight({tuple(2 if k == i else 0 for k in range(d)): 0.5
                                       for i in range(d)}, d)
    if kind == "power":
        try:
            return make_power_weight(float(arg), d)
        except ValueError:
            raise FieldError("bad weight parameter", weight=text) from None
    if kind == "poly":
        terms = {}
        for exps, coeff in parse_polynomial(arg).items():
            if any(exps[d:]):
                raise FieldError("weight uses a coordinate beyond the mesh dimension", weight=text)
            terms[exps[:d]] = terms.get(exps[:d], 0.0) + coeff
        return make_polynomial_weight(terms, d)
    raise FieldError("unknown weight", weight=text)
