"""
Tests for special.py
Tests: Bessel series, zeros, spheromak root, oracle table
"""
import math
import os
import sys
import unittest

import numpy as np
import scipy.special

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from special import (bessel_j, bessel_j_prime, bessel_zero, oracle_for, oracle_values,
                     spherical_jn_over_pow, spheromak_root)
from utils import FieldError

# ─── series ───────────────────────────────────────────────────────

class TestBesselSeries(unittest.TestCase):

    def test_against_scipy(self):
        x = np.linspace(0.0, 10.0, 41)
        for n in (0, 1, 2):
            np.testing.assert_allclose(bessel_j(n, x), scipy.special.jv(n, x), atol=1e-12)
            np.testing.assert_allclose(bessel_j_prime(n, x), scipy.special.jvp(n, x), atol=1e-12)

    def test_spherical_over_power(self):
        s = np.linspace(0.1, 8.0, 30)
        for n in (0, 1, 2):
            np.testing.assert_allclose(spherical_jn_over_pow(n, s),
                                       scipy.special.spherical_jn(n, s) / s ** n, atol=1e-12)

    def test_spherical_at_zero(self):
        self.assertAlmostEqual(spherical_jn_over_pow(0, 0.0), 1.0)
        self.assertAlmostEqual(spherical_jn_over_pow(1, 0.0), 1.0 / 3.0)
        self.assertAlmostEqual(spherical_jn_over_pow(2, 0.0), 1.0 / 15.0)

    def test_out_of_range(self):
        with self.assertRaises(FieldError):
            bessel_j(0, 20.0)
        with self.assertRaises(FieldError):
            bessel_j(-1, 1.0)


# ─── zeros ────────────────────────────────────────────────────────

class TestZeros(unittest.TestCase):

    def test_known_zeros(self):
        self.assertAlmostEqual(bessel_zero(0, 1), 2.4048255577, places=9)
        self.assertAlmostEqual(bessel_zero(1, 1, derivative=True), 1.8411837813, places=9)
        self.assertAlmostEqual(bessel_zero(1, 1), 3.8317059702, places=9)

    def test_against_scipy_table(self):
        np.testing.assert_allclose([bessel_zero(0, i) for i in (1, 2, 3)],
                                   scipy.special.jn_zeros(0, 3), atol=1e-12)

    def test_spheromak_root(self):
        root = spheromak_root()
        self.assertAlmostEqual(root, 4.4934094579, places=9)
        self.assertAlmostEqual(math.tan(root), root, places=8)

    def test_zero_beyond_range(self):
        with self.assertRaises(FieldError):
            bessel_zero(0, 10)


# ─── oracles ──────────────────────────────────────────────────────

class TestOracles(unittest.TestCase):

    def test_disk_values(self):
        table = oracle_values()
        self.assertAlmostEqual(table["disk.dirichlet"][0], 2.4048255577 ** 2, places=8)
        self.assertAlmostEqual(table["disk.neumann"][0], 1.8411837813 ** 2, places=8)
        self.assertEqual(table["disk.maxwell"][0], table["disk.neumann"][0])
        self.assertAlmostEqual(table["disk.stokes"][0], 3.8317059702 ** 2, places=8)

    def test_lookup_by_domain_tag(self):
        value, provenance = oracle_for("cube n=8", "maxwell")
        self.assertAlmostEqual(value, 2 * math.pi ** 2)
        self.assertTrue(provenance)
        self.assertIsNone(oracle_for("annulus(1,2) n=4", "dirichlet"))
        self.assertIsNone(oracle_for("lshape n=4", "neumann"))


if __name__ == "__main__":
    unittest.main()
