"""Distance- and orientation-dependent collective coupling of two dipoles.

The complex rate between the atoms, in units of the single-atom line width,
is ``mu + 1j*nu`` where ``mu`` modulates collective spontaneous emission and
``nu`` is the dipole-dipole level shift.  Both depend on the dimensionless
distance ``x = k0 * r`` and on ``varsigma = sin(theta)**2``, theta being the
angle between the interatomic vector and the dipole moment.

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DistanceBelowCutoff

X_BRANCH = 0.1
X_MIN = 1e-3
DEFAULT_VARSIGMA = 1.0

_N_SERIES = 12
# (cos x/x^2 - sin x/x^3) = sum_k (-1)^k 2k x^(2k-2) / (2k+1)!,  k >= 1
_F_COEF = np.array([(-1) ** k * 2 * k / math.factorial(2 * k + 1) for k in range(1, _N_SERIES + 1)])
# sin x / x = sum_k (-1)^k x^(2k) / (2k+1)!,  k >= 0
_S_COEF = np.array([(-1) ** k / math.factorial(2 * k + 1) for k in range(_N_SERIES)])


@dataclass(frozen=True)
class DipoleGeometry:
    """Point geometry: dimensionless distance and orientation factor."""

    x: float
    varsigma: float = DEFAULT_VARSIGMA

    def __post_init__(self):
        if not 0.0 <= self.varsigma <= 1.0:
            raise ValueError(f"varsigma must lie in [0, 1], got {self.varsigma}")
        if not self.x >= 0.0:
            raise ValueError(f"x must be non-negative, got {self.x}")

    @classmethod
    def from_angle(cls, x: float, theta: float) -> "DipoleGeometry":
        return cls(x, math.sin(theta) ** 2)


@dataclass(frozen=True)
class ComplexRate:
    """Complex rate ``mu + i nu`` in units of the natural line width."""

    mu: float
    nu: float

    def __complex__(self):
        return complex(self.mu, self.nu)


def _poly_x2(coef, x2):
    # Horner in x**2
    out = np.zeros_like(x2)
    for c in coef[::-1]:
        out = out * x2 + c
    return out


def radial_parts_mu(x):
    """Return ``(f, s)`` with ``f = cos x/x^2 - sin x/x^3`` and ``s = sin x/x``.

    For ``x < X_BRANCH`` both are taken from their Taylor series, which avoids
    the cancellation between the two terms of ``f``.
    """
    x = np.asarray(x, dtype=float)
    small = x < X_BRANCH
    xs = np.where(small, x, 0.0)
    xl = np.where(small, 1.0, x)
    x2 = xs * xs
    f = np.where(small, _poly_x2(_F_COEF, x2), np.cos(xl) / xl**2 - np.sin(xl) / xl**3)
    s = np.where(small, _poly_x2(_S_COEF, x2), np.sin(xl) / xl)
    return f, s


def radial_parts_nu(x):
    """Return ``(g, h)`` with ``g = sin x/x^2 + cos x/x^3`` and ``h = cos x/x``.

    No series branch: both diverge at the origin and callers keep ``x >= X_MIN``.
    """
    x = np.asarray(x, dtype=float)
    c, s = np.cos(x), np.sin(x)
    return s / x**2 + c / x**3, c / x


def _mu_unchecked(x, varsigma):
    f, s = radial_parts_mu(x)
    return 1.5 * ((3.0 * varsigma - 2.0) * f + varsigma * s)


def _nu_unchecked(x, varsigma):
    g, h = radial_parts_nu(x)
    return 0.75 * ((3.0 * varsigma - 2.0) * g - varsigma * h)


def _check_varsigma(varsigma):
    vs = np.asarray(varsigma, dtype=float)
    if np.any((vs < 0.0) | (vs > 1.0)):
        raise ValueError("varsigma must lie in [0, 1]")
    return vs


def mu(x, varsigma=DEFAULT_VARSIGMA):
    """Collective-decay coupling ``mu(x, varsigma)``; equals 1 at ``x = 0``."""
    vs = _check_varsigma(varsigma)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    out = _mu_unchecked(x, vs)
    return float(out) if out.ndim == 0 else out


def nu(x, varsigma=DEFAULT_VARSIGMA, x_min=X_MIN):
    """Dipole-dipole coupling ``nu(x, varsigma)``.

    Raises
    ------
    DistanceBelowCutoff
        If any ``x < x_min``; ``nu`` grows like ``1/x**3`` there.
    """
    vs = _check_varsigma(varsigma)
    x = np.asarray(x, dtype=float)
    if np.any(x < x_min):
        raise DistanceBelowCutoff(f"x={np.min(x):.3g} is below the cutoff x_min={x_min:g}")
    out = _nu_unchecked(x, vs)
    return float(out) if out.ndim == 0 else out


def nu_with_cutoff(x, varsigma, x_min=X_MIN):
    """``nu`` with the region ``x < x_min`` set to zero (for averaging)."""
    x = np.asarray(x, dtype=float)
    inside = x < x_min
    return np.where(inside, 0.0, _nu_unchecked(np.where(inside, 1.0, x), varsigma))


def gamma_rate(x, varsigma=DEFAULT_VARSIGMA, x_min=X_MIN):
    """Complex rate ``mu + i nu`` at a point geometry."""
    n = nu(x, varsigma, x_min)
    return ComplexRate(mu(x, varsigma), n)


def mu_nodes(varsigma, x_lo, x_hi, step=1e-2):
    """All roots of ``mu(., varsigma)`` in ``[x_lo, x_hi]``, ascending.

    Roots are bracketed by sign changes on a grid of spacing ``step`` and
    refined with Brent's method.
    """
    if not 0 < x_lo < x_hi:
        raise ValueError("need 0 < x_lo < x_hi")
    _check_varsigma(varsigma)
    n = max(int(math.ceil((x_hi - x_lo) / step)), 1)
    grid = np.linspace(x_lo, x_hi, n + 1)
    vals = _mu_unchecked(grid, varsigma)
    fn = lambda t: float(_mu_unchecked(np.float64(t), varsigma))
    roots = []
    for i in range(n):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots
