"""
Bessel-type functions by ascending power series and the oracle table used
by the eigenvalue and spheromak checks.
"""

import math
from functools import lru_cache

import numpy as np

from linalg import find_root_bracketed
from utils import FieldError

SERIES_LIMIT = 12.0
SERIES_TERMS = 60
SCAN_STEP = 0.1


def _check_range(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > SERIES_LIMIT):
        raise FieldError("argument outside the ascending-series range", limit=SERIES_LIMIT)
    return x


def bessel_j(n: int, x):
    """J_n(x) for integer n >= 0 and |x| <= 12."""
    if n < 0:
        raise FieldError("order must be non-negative", order=n)
    x = _check_range(x)
    half = 0.5 * x
    term = half ** n / math.factorial(n)
    total = np.array(term, dtype=float)
    q = -half * half
    for m in range(SERIES_TERMS):
        term = term * q / ((m + 1) * (m + 1 + n))
        total = total + term
    return total if total.ndim else float(total)


def bessel_j_prime(n: int, x):
    if n == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))


def spherical_jn_over_pow(n: int, s):
    """S_n(s) = j_n(s) / s**n, regular at s = 0 (S_n(0) = 1/(2n+1)!!)."""
    s = _check_range(s)
    term = np.full_like(s, 1.0 / _double_factorial(2 * n + 1), dtype=float)
    total = term.copy()
    q = -0.5 * s * s
    for m in range(SERIES_TERMS):
        term = term * q / ((m + 1) * (2 * n + 2 * m + 3))
        total = total + term
    return total if total.ndim else float(total)


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def bessel_zero(n: int, index: int = 1, derivative: bool = False) -> float:
    """index-th positive zero of J_n (or J_n'), bracketed by a sign scan."""
    f = (lambda x: bessel_j_prime(n, x)) if derivative else (lambda x: bessel_j(n, x))
    found = 0
    a = SCAN_STEP
    fa = f(a)
    while a + SCAN_STEP <= SERIES_LIMIT:
        b = a + SCAN_STEP
        fb = f(b)
        if fa == 0.0 or fa * fb < 0.0:
            found += 1
            if found == index:
                return find_root_bracketed(f, a, b)
        a, fa = b, fb
    raise FieldError("zero not found below the series limit", order=n, index=index)


def spheromak_root() -> float:
    """First positive root of tan x = x (first zero of j_1)."""
    return find_root_bracketed(lambda x: math.tan(x) - x,
                               math.pi + 0.01, 1.5 * math.pi - 0.01)


@lru_cache(maxsize=1)
def oracle_values() -> dict:
    """Named oracle values as {name: (value, provenance)}."""
    j01 = bessel_zero(0, 1)
    jp11 = bessel_zero(1, 1, derivative=True)
    j11 = bessel_zero(1, 1)
    pi2 = math.pi ** 2
    return {
        "j0_1": (j01, "bessel series root"),
        "jp1_1": (jp11, "bessel series root"),
        "j1_1": (j11, "bessel series root"),
        "spheromak_lambda": (spheromak_root(), "root of tan x = x"),
        "disk.dirichlet": (j01 ** 2, "j0_1 squared"),
        "disk.neumann": (jp11 ** 2, "jp1_1 squared"),
        "disk.maxwell": (jp11 ** 2, "equals the neumann value in 2D"),
        "disk.stokes": (j11 ** 2, "j1_1 squared"),
        "square.dirichlet": (2 * pi2, "separation of variables"),
        "square.neumann": (pi2, "separation of variables"),
        "square.maxwell": (pi2, "equals the neumann value in 2D"),
        "square.stokes": (52.3446911, "published reference value"),
        "cube.maxwell": (2 * pi2, "cavity modes pi^2 (m^2+n^2+p^2), two nonzero indices"),
        "cube.neumann": (pi2, "separation of variables"),
        "cube.dirichlet": (3 * pi2, "separation of variables"),
    }


def oracle_for(domain_tag: str, problem: str):
    """Oracle (value, provenance) for a generated domain, or None."""
    name = domain_tag.split()[0].split("(")[0]
    return oracle_values().get(f"{name}.{problem}")
