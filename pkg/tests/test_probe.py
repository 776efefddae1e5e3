"""
Tests for probe.py
Tests: constrained frames, defect functional, sphere metric, projected descent, least-squares form,
spheromak checks
Set BELTRAMI_LAB_SLOW=1 for the boundary-condition contrast run.
"""
import csv
import os
import sys
import tempfile
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fields import make_trig_beltrami
from fem import NodalField, interpolate_p1_vector, l2_norm
from geometry import generate_mesh
from probe import (DefectFunctional, assemble_beltrami_forms, bc_violation, beltrami_defect_min,
                   constraint_frames, nodal_normals, sphere_metric, spheromak_verify,
                   vainshtein_check, vainshtein_quotient, write_trajectory_csv)
from special import spheromak_root
from utils import FieldError, MeshError, UsageError, is_truthy, load_calibration

SLOW = is_truthy(os.environ.get("BELTRAMI_LAB_SLOW"))


# ─── frames ───────────────────────────────────────────────────────

class TestConstraintFrames(unittest.TestCase):

    def setUp(self):
        self.mesh = generate_mesh("cube", 2)

    def test_column_counts(self):
        # 26 boundary vertices and one interior vertex
        T, owner, _ = constraint_frames(self.mesh, "tangent-zero")
        self.assertEqual(T.shape, (81, 26 + 3))
        self.assertEqual(owner.size, T.shape[1])
        T, _, _ = constraint_frames(self.mesh, "normal-zero")
        self.assertEqual(T.shape[1], 2 * 26 + 3)

    def test_orthonormal_columns(self):
        for bc in ("tangent-zero", "normal-zero"):
            T, _, _ = constraint_frames(self.mesh, bc)
            gram = (T.T @ T).toarray()
            np.testing.assert_allclose(gram, np.eye(T.shape[1]), atol=1e-14)

    def test_constrained_fields_satisfy_bc(self):
        rng = np.random.default_rng(0)
        for bc in ("tangent-zero", "normal-zero"):
            T, _, normals = constraint_frames(self.mesh, bc)
            nodal = (T @ rng.standard_normal(T.shape[1])).reshape(-1, 3)
            self.assertLessEqual(bc_violation(self.mesh, nodal, bc, normals), 1e-12, bc)

    def test_free_field_violates(self):
        nodal = np.ones((self.mesh.n_vertices, 3))
        self.assertGreater(bc_violation(self.mesh, nodal, "normal-zero"), 0.5)
        self.assertGreater(bc_violation(self.mesh, nodal, "tangent-zero"), 0.5)

    def test_unknown_bc(self):
        with self.assertRaises(UsageError):
            constraint_frames(self.mesh, "slip")

    def test_requires_tetrahedra(self):
        with self.assertRaises(MeshError):
            constraint_frames(generate_mesh("square", 2), "tangent-zero")

    def test_ball_normals_are_radial(self):
        mesh = generate_mesh("ball", 2)
        bv = mesh.boundary_vertices
        normals = nodal_normals(mesh)[bv]
        radial = mesh.vertices[bv] / np.linalg.norm(mesh.vertices[bv], axis=1, keepdims=True)
        np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-14)
        self.assertGreater(np.min(np.sum(normals * radial, axis=1)), 0.8)


# ─── defect functional ────────────────────────────────────────────

class TestDefectFunctional(unittest.TestCase):

    def test_gradient_matches_finite_differences(self):
        mesh = generate_mesh("cube", 1)
        rng = np.random.default_rng(1)
        nodal = rng.standard_normal((mesh.n_vertices, 3))
        direction = rng.standard_normal(nodal.shape)
        functional = DefectFunctional(mesh)
        _, grad = functional.value_and_gradient(nodal)
        h = 1e-6
        fd = (functional.value(nodal + h * direction)
              - functional.value(nodal - h * direction)) / (2 * h)
        self.assertAlmostEqual(fd, float(np.sum(grad * direction)),
                               delta=1e-6 * max(1.0, abs(fd)))

    def test_value_agrees(self):
        mesh = generate_mesh("cube", 2)
        nodal = np.random.default_rng(2).standard_normal((mesh.n_vertices, 3))
        functional = DefectFunctional(mesh)
        value, _ = functional.value_and_gradient(nodal)
        self.assertEqual(value, functional.value(nodal))

    def test_beltrami_interpolant_is_small(self):
        mesh = generate_mesh("cube", 4)
        functional = DefectFunctional(mesh)
        beltrami = interpolate_p1_vector(mesh, make_trig_beltrami(1.0))
        noise = np.random.default_rng(3).standard_normal(beltrami.shape)
        self.assertLess(functional.value(beltrami), functional.value(noise))

    def test_constant_field_has_zero_defect(self):
        mesh = generate_mesh("cube", 2)
        self.assertAlmostEqual(DefectFunctional(mesh).value(np.ones((mesh.n_vertices, 3))), 0.0,
                               places=20)


class TestSphereMetric(unittest.TestCase):

    def test_metric_measures_l2_norm(self):
        mesh = generate_mesh("ball", 2)
        T, _, _ = constraint_frames(mesh, "normal-zero")
        G = sphere_metric(mesh, T)
        self.assertLess(abs(G - G.T).max(), 1e-14)
        c = np.random.default_rng(5).standard_normal(T.shape[1])
        field = NodalField(mesh, (T @ c).reshape(-1, 3))
        self.assertAlmostEqual(c @ (G @ c), l2_norm(mesh, field, order=2) ** 2, places=10)


# ─── projected descent ────────────────────────────────────────────

class TestDescent(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = generate_mesh("cube", 2)
        cls.result = beltrami_defect_min(cls.mesh, "tangent-zero", iters=30, seed=7, restarts=2)

    def test_trajectory_never_increases(self):
        trajectory = np.asarray(self.result.trajectory)
        self.assertTrue(np.all(np.diff(trajectory) <= 0.0))
        self.assertEqual(self.result.J, trajectory[-1])
        self.assertGreaterEqual(self.result.J, 0.0)

    def test_unit_norm_and_bc(self):
        self.assertAlmostEqual(self.result.norm, 1.0, places=12)
        self.assertLessEqual(self.result.details["bc_violation"], 1e-12)
        self.assertEqual(self.result.coefficients.shape, (self.mesh.n_vertices, 3))

    def test_quadrature_norm_is_one(self):
        field = NodalField(self.mesh, self.result.coefficients)
        self.assertAlmostEqual(l2_norm(self.mesh, field, order=2), 1.0, delta=1e-10)
        ball = generate_mesh("ball", 2)
        normal = beltrami_defect_min(ball, "normal-zero", iters=10, seed=3, restarts=1)
        field = NodalField(ball, normal.coefficients)
        self.assertAlmostEqual(l2_norm(ball, field, order=2), 1.0, delta=1e-10)

    def test_best_restart_wins(self):
        restart_J = self.result.details["restart_J"]
        self.assertEqual(len(restart_J), 2)
        self.assertEqual(self.result.J, min(restart_J))
        self.assertEqual(restart_J[self.result.restart], self.result.J)

    def test_reproducible(self):
        again = beltrami_defect_min(self.mesh, "tangent-zero", iters=30, seed=7, restarts=2,
                                    threads=2)
        self.assertEqual(again.trajectory, self.result.trajectory)
        np.testing.assert_array_equal(again.coefficients, self.result.coefficients)

    def test_summary(self):
        summary = self.result.summary()
        self.assertEqual(summary["bc"], "tangent-zero")
        self.assertEqual(summary["iterations"], len(self.result.trajectory) - 1)
        self.assertIn("bc_violation", summary)

    def test_zero_iterations(self):
        result = beltrami_defect_min(self.mesh, "normal-zero", iters=0, restarts=1)
        self.assertEqual(len(result.trajectory), 1)
        self.assertLessEqual(result.details["bc_violation"], 1e-12)

    def test_spheromak_start_uses_one_restart(self):
        mesh = generate_mesh("ball", 2)
        result = beltrami_defect_min(mesh, "normal-zero", iters=3, restarts=4, init="spheromak")
        self.assertEqual(result.restarts, 1)
        self.assertEqual(result.init, "spheromak")
        self.assertEqual(len(result.details["restart_J"]), 1)

    def test_spheromak_start_refines(self):
        ceiling = load_calibration()["spheromak_init_J_ceiling"]
        starts = []
        for n in (3, 6):
            mesh = generate_mesh("ball", n)
            start = beltrami_defect_min(mesh, "normal-zero", iters=0, init="spheromak")
            starts.append(start.J)
            if ceiling is not None:
                self.assertLessEqual(start.J, ceiling, n)
        self.assertLess(starts[1], starts[0])
        mesh = generate_mesh("ball", 3)
        descended = beltrami_defect_min(mesh, "normal-zero", iters=20, init="spheromak")
        self.assertLessEqual(descended.J, starts[0])
        self.assertTrue(np.all(np.diff(descended.trajectory) <= 0.0))

    def test_bad_arguments(self):
        with self.assertRaises(UsageError):
            beltrami_defect_min(self.mesh, init="zeros")
        with self.assertRaises(UsageError):
            beltrami_defect_min(self.mesh, restarts=0)
        with self.assertRaises(UsageError):
            beltrami_defect_min(self.mesh, iters=-1)

    def test_trajectory_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "trajectory.csv")
            write_trajectory_csv(path, self.result.trajectory)
            with open(path, newline="", encoding="utf-8") as file:
                rows = list(csv.reader(file))
        self.assertEqual(rows[0], ["iter", "J"])
        self.assertEqual(len(rows), len(self.result.trajectory) + 1)
        self.assertEqual(float(rows[-1][1]), self.result.trajectory[-1])


# ─── least-squares form ───────────────────────────────────────────

class TestBeltramiForms(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = generate_mesh("cube", 2)
        cls.forms = assemble_beltrami_forms(cls.mesh)

    def test_rotation_field(self):
        # u = (-x2, x1, 0): curl u = 2 e3, div u = 0 on the unit cube
        v = self.mesh.vertices
        x = np.stack([-v[:, 1], v[:, 0], np.zeros(len(v))], axis=1).ravel()
        self.assertAlmostEqual(x @ (self.forms.curl @ x), 4.0, places=12)
        self.assertAlmostEqual(x @ (self.forms.div @ x), 0.0, places=12)

    def test_constant_field_quotient(self):
        nodal = np.ones((self.mesh.n_vertices, 3))
        self.assertAlmostEqual(vainshtein_quotient(self.mesh, nodal, 2.0, self.forms), 4.0,
                               places=10)

    def test_positive_semidefinite(self):
        Q = self.forms.quadratic(1.5)
        self.assertLess(abs(Q - Q.T).max(), 1e-12)
        x = np.random.default_rng(4).standard_normal(Q.shape[0])
        self.assertGreaterEqual(x @ (Q @ x), -1e-10)

    def test_interpolant_prefers_its_lambda(self):
        mesh = generate_mesh("cube", 4)
        forms = assemble_beltrami_forms(mesh)
        nodal = interpolate_p1_vector(mesh, make_trig_beltrami(2.0))
        matched = vainshtein_quotient(mesh, nodal, 2.0, forms)
        flipped = vainshtein_quotient(mesh, nodal, -2.0, forms)
        self.assertLess(matched, 5.0)
        self.assertLess(matched, 0.1 * flipped)

    def test_interpolant_quotient_shrinks_without_bc(self):
        quotients = []
        for n in (4, 8):
            mesh = generate_mesh("cube", n)
            nodal = interpolate_p1_vector(mesh, make_trig_beltrami(3.0))
            quotients.append(vainshtein_quotient(mesh, nodal, 3.0, assemble_beltrami_forms(mesh)))
        self.assertLess(quotients[1], 0.5 * quotients[0])


class TestVainshteinCheck(unittest.TestCase):

    def test_floor_is_nonnegative(self):
        mesh = generate_mesh("cube", 2)
        report = vainshtein_check([3.0, 4.5], mesh, "tangent-zero")
        self.assertEqual(len(report["min_eigenvalues"]), 2)
        self.assertEqual(report["floor"], min(report["min_eigenvalues"]))
        self.assertGreaterEqual(report["floor"], -1e-8)
        self.assertEqual(report["bc"], "tangent-zero")

    def test_normal_ball_at_spheromak_lambda(self):
        # the spheromak is an exact normal-zero eigenfield of the unit ball
        lam = spheromak_root()
        coarse = vainshtein_check([lam], generate_mesh("ball", 3), "normal-zero")
        fine = vainshtein_check([lam], generate_mesh("ball", 6), "normal-zero")
        self.assertLess(fine["floor"], coarse["floor"])
        self.assertGreaterEqual(fine["floor"], -1e-8)

    def test_bad_grid(self):
        mesh = generate_mesh("cube", 1)
        with self.assertRaises(FieldError):
            vainshtein_check([], mesh)
        with self.assertRaises(FieldError):
            vainshtein_check([1.0, 0.0], mesh)


# ─── spheromak ────────────────────────────────────────────────────

class TestSpheromakVerify(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = generate_mesh("ball", 3)
        cls.report = spheromak_verify(cls.mesh)

    def test_residuals(self):
        self.assertLessEqual(self.report["trace_sphere_abs"], 1e-6)
        self.assertLessEqual(self.report["curl_cross_rel"], 1e-3)
        self.assertLessEqual(self.report["div_rel"], 1e-3)
        self.assertAlmostEqual(self.report["lambda"], spheromak_root(), places=12)

    def test_polygonal_trace_is_coarser(self):
        self.assertGreater(self.report["trace_polygonal_abs"], self.report["trace_sphere_abs"])

    def test_scale_invariance(self):
        scaled = spheromak_verify(self.mesh, scale=3.0)
        self.assertAlmostEqual(scaled["norm_u"], 3.0 * self.report["norm_u"], places=10)
        for key in ("curl_cross_rel", "div_rel", "trace_sphere_rel"):
            self.assertAlmostEqual(scaled[key], self.report[key], delta=1e-9, msg=key)

    def test_perturbed_lambda_leaves_sphere(self):
        perturbed = spheromak_verify(self.mesh, lam=1.05 * spheromak_root())
        self.assertGreater(perturbed["trace_sphere_abs"], 1e-4)
        self.assertLessEqual(perturbed["curl_cross_rel"], 1e-3)


@unittest.skipUnless(SLOW, "BELTRAMI_LAB_SLOW not set")
class TestContrastSlow(unittest.TestCase):

    def test_tangent_cube_against_normal_ball(self):
        # random starts on both; the ball at n = 2 and the cube at n = 4 carry comparable dofs
        ratio = load_calibration()["probe_contrast_ratio"]
        tangent = beltrami_defect_min(generate_mesh("cube", 4), "tangent-zero", iters=500,
                                      restarts=3)
        normal = beltrami_defect_min(generate_mesh("ball", 2), "normal-zero", iters=500,
                                     restarts=3)
        self.assertEqual(normal.init, "random")
        self.assertLess(normal.J, tangent.J)
        if ratio is not None:
            self.assertGreaterEqual(tangent.J, ratio * normal.J)

    def test_normal_ball_minimum_refines(self):
        values = [beltrami_defect_min(generate_mesh("ball", n), "normal-zero", iters=500,
                                      restarts=3).J for n in (2, 3)]
        self.assertLess(values[1], values[0])

    def test_vainshtein_floor_on_cube(self):
        report = vainshtein_check([1.0, 3.0, 4.49, 7.0], generate_mesh("cube", 4))
        self.assertGreater(report["floor"], 0.0)


if __name__ == "__main__":
    unittest.main()
