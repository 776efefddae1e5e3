"""
Tests for linalg.py
Tests: CSR assembly, sparse LU, generalized eigensolver, bracketed roots, margin LP, order fits
"""
import math
import os
import sys
import unittest

import numpy as np
import scipy.linalg
import scipy.sparse as sp

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from linalg import (LpProblem, assemble_csr, csr_from_arrays, factorize,
                    find_root_bracketed, fit_observed_order, gen_eig_smallest, lp_max_margin,
                    richardson_extrapolate)
from utils import LinalgError


def laplacian_1d(n):
    """Dirichlet second-difference matrix and identity mass."""
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr"), sp.identity(n, format="csr")


# ─── assembly ─────────────────────────────────────────────────────

class TestCsrAssembly(unittest.TestCase):

    def test_duplicates_summed(self):
        A = assemble_csr([(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)], shape=(2, 2))
        np.testing.assert_array_equal(A.toarray(), [[3.0, 0.0], [-1.0, 0.0]])

    def test_bit_identical_under_permutation(self):
        rng = np.random.default_rng(1)
        rows = rng.integers(0, 20, 500)
        cols = rng.integers(0, 20, 500)
        vals = rng.standard_normal(500)
        perm = rng.permutation(500)
        A = csr_from_arrays(rows, cols, vals, (20, 20))
        B = csr_from_arrays(rows[perm], cols[perm], vals[perm], (20, 20))
        self.assertEqual(A.data.tobytes(), B.data.tobytes())
        np.testing.assert_array_equal(A.indices, B.indices)
        np.testing.assert_array_equal(A.indptr, B.indptr)

    def test_out_of_bounds(self):
        with self.assertRaises(LinalgError) as ctx:
            csr_from_arrays([0, 3], [0, 0], [1.0, 1.0], (3, 3))
        self.assertEqual(ctx.exception.details["index"], 1)

    def test_length_mismatch(self):
        with self.assertRaises(LinalgError):
            csr_from_arrays([0, 1], [0], [1.0, 1.0], (2, 2))

    def test_shape_from_extent(self):
        A = assemble_csr([(2, 1, 5.0)])
        self.assertEqual(A.shape, (3, 3))


# ─── factorization ────────────────────────────────────────────────

class TestFactorize(unittest.TestCase):

    def test_solve(self):
        A, _ = laplacian_1d(30)
        x = np.linspace(0.0, 1.0, 30)
        np.testing.assert_allclose(factorize(A).solve(A @ x), x, atol=1e-10)

    def test_singular_pivot_reported(self):
        A = sp.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]))
        with self.assertRaises(LinalgError) as ctx:
            factorize(A)
        self.assertIn("pivot", ctx.exception.details)


# ─── eigensolver ──────────────────────────────────────────────────

class TestGenEig(unittest.TestCase):

    def test_matches_dense(self):
        A, M = laplacian_1d(60)
        res = gen_eig_smallest(A, M, 4, pencil_kind="lap1d")
        dense = scipy.linalg.eigh(A.toarray(), M.toarray(), eigvals_only=True)[:4]
        np.testing.assert_allclose(res.eigenvalues, dense, rtol=1e-10)
        self.assertTrue(res.converged)
        self.assertEqual(res.stats.method, "shift-invert-lanczos")
        self.assertTrue(all(r < 1e-8 for r in res.stats.residuals))

    def test_non_identity_mass(self):
        A, _ = laplacian_1d(40)
        M = sp.diags(np.linspace(1.0, 2.0, 40), format="csr")
        res = gen_eig_smallest(A, M, 3)
        dense = scipy.linalg.eigh(A.toarray(), M.toarray(), eigvals_only=True)[:3]
        np.testing.assert_allclose(res.eigenvalues, dense, rtol=1e-9)

    def test_deterministic_for_seed(self):
        A, M = laplacian_1d(50)
        a = gen_eig_smallest(A, M, 2, seed=3)
        b = gen_eig_smallest(A, M, 2, seed=3)
        np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)

    def test_small_pencil_dense_path(self):
        A, M = laplacian_1d(3)
        res = gen_eig_smallest(A, M, 2)
        self.assertEqual(res.stats.method, "dense")
        self.assertAlmostEqual(res.eigenvalues[0], 2.0 - math.sqrt(2.0), places=12)

    def test_shift_on_eigenvalue_is_retried(self):
        A = sp.diags([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], format="csr")
        M = sp.identity(6, format="csr")
        res = gen_eig_smallest(A, M, 2, shift=1.0)
        self.assertGreaterEqual(res.stats.retries, 1)
        np.testing.assert_allclose(sorted(res.eigenvalues), [1.0, 2.0], rtol=1e-10)

    def test_bad_k(self):
        A, M = laplacian_1d(5)
        with self.assertRaises(LinalgError):
            gen_eig_smallest(A, M, 0)
        with self.assertRaises(LinalgError):
            gen_eig_smallest(A, M, 6)

    def test_summary_is_json_plain(self):
        A, M = laplacian_1d(20)
        res = gen_eig_smallest(A, M, 2, pencil_kind="lap1d", mesh_id="m")
        res.details["space"] = object()
        summary = res.summary()
        self.assertNotIn("space", summary)
        self.assertEqual(summary["pencil_kind"], "lap1d")


# ─── roots ────────────────────────────────────────────────────────

class TestFindRoot(unittest.TestCase):

    def test_cosine(self):
        self.assertAlmostEqual(find_root_bracketed(math.cos, 1.0, 2.0), math.pi / 2, places=14)

    def test_endpoint_root(self):
        self.assertEqual(find_root_bracketed(lambda x: x, 0.0, 1.0), 0.0)

    def test_no_sign_change(self):
        with self.assertRaises(LinalgError):
            find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)


# ─── margin LP ────────────────────────────────────────────────────

def square_problem():
    normals = [[1, 0], [-1, 0], [0, 1], [0, -1]]
    centroids = [[1, 0.5], [0, 0.5], [0.5, 1], [0.5, 0]]
    return LpProblem.from_facets(normals, centroids)


class TestLpMaxMargin(unittest.TestCase):

    def test_unit_square(self):
        center, margin = lp_max_margin(square_problem())
        np.testing.assert_allclose(center, [0.5, 0.5], atol=1e-9)
        self.assertAlmostEqual(margin, 0.5, places=9)

    def test_margins_of_points(self):
        margins = square_problem().margins([[0.5, 0.5], [0.1, 0.5], [2.0, 0.5]])
        np.testing.assert_allclose(margins, [0.5, 0.1, -1.0])

    def test_negative_margin_is_none(self):
        # two facing half-planes that exclude each other
        normals = [[1, 0], [-1, 0], [0, 1], [0, -1]]
        offsets = [-1.0, -1.0, 1.0, 1.0]
        self.assertIsNone(lp_max_margin(LpProblem(normals, offsets, 2)))

    def test_unbounded(self):
        normals = [[1, 0], [1, 0], [0, 1]]
        with self.assertRaises(LinalgError):
            lp_max_margin(LpProblem(normals, [1.0, 2.0, 1.0], 2))

    def test_validation(self):
        with self.assertRaises(LinalgError):
            LpProblem([[2.0, 0.0], [0, 1], [1, 0]], [0, 0, 0], 2)
        with self.assertRaises(LinalgError):
            LpProblem([[1.0, 0.0]], [0.0], 2)


# ─── convergence helpers ──────────────────────────────────────────

class TestOrderFit(unittest.TestCase):

    def test_second_order(self):
        hs = [0.5, 0.25, 0.125]
        self.assertAlmostEqual(fit_observed_order(hs, [3 * h ** 2 for h in hs]), 2.0, places=10)

    def test_needs_two_levels(self):
        with self.assertRaises(LinalgError):
            fit_observed_order([0.5], [1.0])

    def test_richardson(self):
        exact, c = 4.0, 1.5
        coarse, fine = exact + c * 0.5 ** 2, exact + c * 0.25 ** 2
        self.assertAlmostEqual(richardson_extrapolate(coarse, fine, 2.0, 2.0), exact, places=12)


if __name__ == "__main__":
    unittest.main()
