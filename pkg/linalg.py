"""
Sparse symmetric linear algebra for the lab: deterministic CSR assembly,
sparse LU solves, shift-invert generalized eigensolves, bracketed roots
and the small max-margin LP used by the star-kernel check.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import brentq, linprog
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from utils import DEFAULT_SEED, LinalgError

logger = logging.getLogger(__name__)

SparseMat = sp.csr_matrix

PIVOT_TOL = 1e-14
DENSE_PIVOT_LIMIT = 4000
MAX_SHIFT_RETRIES = 3


# ─── assembly ─────────────────────────────────────────────────────

def csr_from_arrays(rows, cols, vals, shape) -> SparseMat:
    """
    Sum triplets into a canonical CSR matrix.

    Triplets are sorted by (row, col, value) before accumulation, so the
    result is bit-identical for any permutation of the input.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    n_rows, n_cols = int(shape[0]), int(shape[1])
    if not (rows.size == cols.size == vals.size):
        raise LinalgError("triplet arrays differ in length",
                          rows=rows.size, cols=cols.size, vals=vals.size)

    bad = np.flatnonzero((rows < 0) | (rows >= n_rows) | (cols < 0) | (cols >= n_cols))
    if bad.size:
        i = int(bad[0])
        raise LinalgError("triplet index out of bounds", index=i,
                          row=int(rows[i]), col=int(cols[i]), shape=(n_rows, n_cols))

    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        keys = rows * n_cols + cols
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]

    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(rows, minlength=n_rows))
    mat = sp.csr_matrix((vals, cols, indptr), shape=(n_rows, n_cols))
    mat.has_sorted_indices = True
    return mat


def assemble_csr(triplets: Sequence, shape: Optional[tuple] = None) -> SparseMat:
    """Assemble a list of (row, col, value) triplets; shape defaults to the index extent."""
    if len(triplets) == 0:
        arr = np.zeros((0, 3))
    else:
        arr = np.asarray(triplets, dtype=float).reshape(-1, 3)
    rows, cols = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
    if shape is None:
        extent = int(max(rows.max(initial=-1), cols.max(initial=-1))) + 1
        shape = (extent, extent)
    return csr_from_arrays(rows, cols, arr[:, 2], shape)


# ─── factorization ────────────────────────────────────────────────

def _dense_pivot_index(A) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, _ = scipy.linalg.lu_factor(A.toarray(), check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(diag.max(initial=0.0), 1.0)
    small = np.flatnonzero(diag <= PIVOT_TOL * scale)
    return int(small[0]) if small.size else -1


def factorize(A):
    """
    Sparse LU with a symmetric minimum-degree ordering.

    Raises:
        LinalgError: on a zero pivot; ``details["pivot"]`` is the elimination step
    """
    A = sp.csc_matrix(A)
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        pivot = _dense_pivot_index(A) if A.shape[0] <= DENSE_PIVOT_LIMIT else -1
        raise LinalgError("singular pivot in factorization", pivot=pivot,
                          reason=str(exc)) from None
    diag = np.abs(lu.U.diagonal())
    scale = max(diag.max(initial=0.0), 1.0)
    small = np.flatnonzero(diag <= PIVOT_TOL * scale)
    if small.size:
        step = int(small[0])
        raise LinalgError("singular pivot in factorization", pivot=step,
                          column=int(lu.perm_c[step]))
    return lu


# ─── eigensolver ──────────────────────────────────────────────────

@dataclass
class SolverStats:
    iterations: int
    residuals: list
    shift: float
    method: str
    retries: int = 0


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    pencil_kind: str
    mesh_id: str
    stats: SolverStats
    converged: bool = True
    details: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def pair(self, index: int = 0):
        return float(self.eigenvalues[index]), self.eigenvectors[:, index]

    def summary(self) -> dict:
        return {
            "pencil_kind": self.pencil_kind,
            "mesh_id": self.mesh_id,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "converged": self.converged,
            "iterations": self.stats.iterations,
            "residuals": [float(r) for r in self.stats.residuals],
            "shift": self.stats.shift,
            "method": self.stats.method,
            **{k: v for k, v in self.details.items() if _is_plain(v)},
        }


def _is_plain(value) -> bool:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return True
    if isinstance(value, (list, tuple)):
        return all(_is_plain(v) for v in value)
    if isinstance(value, dict):
        return all(isinstance(k, str) and _is_plain(v) for k, v in value.items())
    return False


def _residuals(A, M, vals, vecs) -> list:
    out = []
    for i, lam in enumerate(vals):
        x = vecs[:, i]
        mnorm = np.sqrt(max(float(x @ (M @ x)), 0.0))
        r = A @ x - lam * (M @ x)
        out.append(float(np.linalg.norm(r) / max(mnorm, 1e-300)))
    return out


def _dense_eigs(A, M, k):
    Ad, Md = A.toarray(), M.toarray()
    try:
        vals, vecs = scipy.linalg.eigh(Ad, Md)
    except np.linalg.LinAlgError:
        vals, vecs = scipy.linalg.eig(Ad, Md)
        keep = np.isfinite(vals)
        vals, vecs = vals[keep].real, vecs[:, keep].real
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return vals[:k], vecs[:, :k]


def gen_eig_smallest(A, M, k: int, shift: float = 0.0, tol: float = 1e-8,
                     pencil_kind: str = "", mesh_id: str = "",
                     seed: int = DEFAULT_SEED, max_iter: Optional[int] = None) -> EigenResult:
    """
    k eigenpairs of A x = lam M x nearest above ``shift``, ascending.

    Shift-invert Lanczos (ARPACK) on (A - shift M)^-1 M with a sparse LU of
    the shifted pencil; the start vector comes from ``seed``. When the shift
    hits a singular factorization it is perturbed and retried. Pencils too
    small for ARPACK (k >= n - 1) are solved densely. Iterations count
    applications of the shifted inverse.
    """
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    n = A.shape[0]
    if A.shape != M.shape or A.shape[0] != A.shape[1]:
        raise LinalgError("pencil matrices must be square and the same size",
                          a_shape=A.shape, m_shape=M.shape)
    if k < 1 or k > n:
        raise LinalgError("requested eigenpair count out of range", k=k, n=n)

    if k >= n - 1:
        vals, vecs = _dense_eigs(A, M, k)
        stats = SolverStats(iterations=0, residuals=_residuals(A, M, vals, vecs),
                            shift=float(shift), method="dense")
        return EigenResult(vals, vecs, pencil_kind, mesh_id, stats)

    sigma = float(shift)
    retries = 0
    while True:
        try:
            lu = factorize(A - sigma * M)
            break
        except LinalgError:
            if retries >= MAX_SHIFT_RETRIES:
                raise LinalgError("shifted pencil factorization failed; choose a different shift",
                                  shift=sigma, pencil=pencil_kind) from None
            retries += 1
            sigma -= 1e-3 * max(1.0, abs(sigma)) * retries
            logger.info("shift retry %d for %s: sigma=%.6e", retries, pencil_kind, sigma)

    applications = [0]

    def apply_inverse(x):
        applications[0] += 1
        return lu.solve(np.asarray(x, dtype=float).ravel())

    op_inv = LinearOperator((n, n), matvec=apply_inverse, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    converged = True
    try:
        vals, vecs = eigsh(A, k=k, M=M, sigma=sigma, which="LM", OPinv=op_inv,
                           v0=v0, tol=0.0, maxiter=max_iter)
    except ArpackNoConvergence as exc:
        converged = False
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        logger.warning("%s: ARPACK returned %d of %d pairs", pencil_kind, len(vals), k)

    order = np.argsort(vals)
    vals, vecs = np.asarray(vals)[order], np.asarray(vecs)[:, order]
    residuals = _residuals(A, M, vals, vecs)
    scale = np.maximum(np.abs(vals), 1.0)
    if np.any(np.asarray(residuals) > tol * scale):
        converged = False
    logger.debug("%s: %d pairs, %d inverse applications", pencil_kind, len(vals), applications[0])
    stats = SolverStats(iterations=applications[0], residuals=residuals,
                        shift=sigma, method="shift-invert-lanczos", retries=retries)
    return EigenResult(vals, vecs, pencil_kind, mesh_id, stats, converged=converged)


# ─── scalar roots ─────────────────────────────────────────────────

def find_root_bracketed(f: Callable[[float], float], a: float, b: float,
                        tol: float = 1e-15) -> float:
    """
    Root of f in [a, b] given a sign change. Brent's method, with plain
    bisection if Brent fails to converge.
    """
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return float(a)
    if fb == 0.0:
        return float(b)
    if np.sign(fa) == np.sign(fb):
        raise LinalgError("no sign change on bracket", a=a, b=b, fa=fa, fb=fb)
    try:
        return float(brentq(f, a, b, xtol=tol, maxiter=200))
    except RuntimeError:
        logger.info("brentq failed on [%g, %g]; bisecting", a, b)
    lo, hi, flo = float(a), float(b), fa
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = float(f(mid))
        if fmid == 0.0 or hi - lo <= tol:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ─── max-margin LP ────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class LpProblem:
    """Half-spaces nu_f . x + t <= offset_f with offset_f = nu_f . c_f."""

    normals: np.ndarray
    offsets: np.ndarray
    dimension: int

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float).ravel()
        if self.dimension not in (2, 3):
            raise LinalgError("LP dimension must be 2 or 3", dimension=self.dimension)
        if normals.ndim != 2 or normals.shape[1] != self.dimension:
            raise LinalgError("normals must be an (m, d) array", shape=normals.shape)
        if normals.shape[0] != offsets.size:
            raise LinalgError("one offset per normal required",
                              normals=normals.shape[0], offsets=offsets.size)
        if normals.shape[0] < self.dimension + 1:
            raise LinalgError("at least d+1 constraints required",
                              constraints=normals.shape[0], dimension=self.dimension)
        lengths = np.linalg.norm(normals, axis=1)
        bad = np.flatnonzero(np.abs(lengths - 1.0) > 1e-9)
        if bad.size:
            raise LinalgError("constraint normals must be unit length", index=int(bad[0]))
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_facets(cls, normals, centroids) -> "LpProblem":
        normals = np.asarray(normals, dtype=float)
        offsets = np.einsum("ij,ij->i", normals, np.asarray(centroids, dtype=float))
        return cls(normals, offsets, normals.shape[1])

    def margins(self, points) -> np.ndarray:
        """Worst-case margin min_f nu_f . (c_f - x) for each candidate point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return (self.offsets[None, :] - points @ self.normals.T).min(axis=1)


def lp_max_margin(problem: LpProblem, tol: float = 1e-9):
    """
    Maximize t subject to nu_f . (c_f - x) >= t over (x, t).

    Returns:
        (x, t) or None when the optimum t is below -tol
    """
    d = problem.dimension
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([problem.normals, np.ones((problem.normals.shape[0], 1))])
    res = linprog(cost, A_ub=a_ub, b_ub=problem.offsets,
                  bounds=[(None, None)] * (d + 1), method="highs")
    if res.status == 3:
        raise LinalgError("unbounded margin LP; facet normals do not enclose a region",
                          constraints=problem.normals.shape[0])
    if res.status != 0:
        raise LinalgError("margin LP failed", status=int(res.status), message=res.message)
    margin = float(-res.fun)
    if margin < -tol:
        return None
    return np.asarray(res.x[:d], dtype=float), margin


# ─── convergence helpers ──────────────────────────────────────────

def fit_observed_order(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.abs(np.asarray(errors, dtype=float))
    if hs.size < 2:
        raise LinalgError("at least two levels required for an order fit", levels=hs.size)
    errors = np.maximum(errors, 1e-300)
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def richardson_extrapolate(coarse: float, fine: float, ratio: float, order: float) -> float:
    """Extrapolated limit from two levels with h_coarse / h_fine = ratio."""
    factor = ratio ** order
    return float((factor * fine - coarse) / (factor - 1.0))
