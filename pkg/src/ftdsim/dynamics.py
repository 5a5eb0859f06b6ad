"""Reduced electronic state of the two atoms after a single excitation.

Time is dimensionless, ``tau = gamma0 * t``.  The coherence ``z`` is the
element between "atom - excited" and "atom + excited" in the basis
``|1/2,1/2>, |1/2,-1/2>, |-1/2,1/2>, |-1/2,-1/2>`` (first label: atom -).

Sign convention: the exact coherence follows

    z = < sum_a (a/2)|Phi_a|^2 exp(-2 tau (1 + a mu)) + i Im[Phi+ Phi-* exp(-2 tau (1 - i nu))] >

as written, i.e. the dipole-dipole phase enters as ``exp(+2 i nu tau)``.
Re-deriving ``z`` from the amplitude solution with rate ``mu + i nu`` gives
the opposite phase; the two differ by ``nu -> -nu`` (see
``z_from_amplitudes``).  Populations are built from amplitudes in the
convention that matches the coherence above, so the 2x2 single-excitation
block stays positive.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

from functools import lru_cache

import numpy as np
from scipy.integrate import quad_vec

from .coupling import X_MIN, radial_parts_mu, radial_parts_nu
from .ensemble import CONTACT_MASS, CouplingMoments, GeometryConfig, contact_radius, hermite_average, polar_weight
from .ensemble import moments as compute_moments
from .errors import InvalidPreparation, InvalidState, PositivityViolation, QuadratureNotConverged

NORM_TOL = 1e-9
POSITIVITY_TOL = 1e-9
CUMULANT_VALIDITY = 0.3
_SQRT2 = math.sqrt(2.0)
_SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]])
_SIGMA_Y2 = np.kron(_SIGMA_Y, _SIGMA_Y)


@dataclass(frozen=True)
class ElectronicPreparation:
    """Single-excitation electronic amplitudes ``Psi+`` (atom + excited) and ``Psi-``."""

    psi_plus: complex
    psi_minus: complex

    def __post_init__(self):
        norm = abs(self.psi_plus) ** 2 + abs(self.psi_minus) ** 2
        if not abs(norm - 1.0) <= NORM_TOL:
            raise InvalidPreparation(f"|psi+|^2 + |psi-|^2 = {norm!r}, expected 1")

    @property
    def phi_plus(self) -> complex:
        return (self.psi_plus + self.psi_minus) / _SQRT2

    @property
    def phi_minus(self) -> complex:
        return (self.psi_plus - self.psi_minus) / _SQRT2

    @property
    def phase(self) -> float:
        """``arg(Phi+ conj(Phi-))``."""
        return cmath.phase(self.phi_plus * self.phi_minus.conjugate())

    @property
    def magnitude_ratio(self) -> float:
        """``|Phi+| / |Phi-|`` (``inf`` when ``Phi- = 0``)."""
        a, b = abs(self.phi_plus), abs(self.phi_minus)
        return math.inf if b == 0 else a / b

    @classmethod
    def from_phi(cls, phi_plus_abs: float, phase: float) -> "ElectronicPreparation":
        """Build from ``|Phi+|`` and the relative phase ``arg(Phi+ Phi-*)``."""
        if not 0.0 <= phi_plus_abs <= 1.0:
            raise InvalidPreparation("|Phi+| must lie in [0, 1]")
        a = complex(phi_plus_abs)
        b = math.sqrt(max(1.0 - phi_plus_abs**2, 0.0)) * cmath.exp(-1j * phase)
        return cls((a + b) / _SQRT2, (a - b) / _SQRT2)

    @classmethod
    def balanced(cls, phase: float) -> "ElectronicPreparation":
        """``cos(phase/2)|atom + excited> + i sin(phase/2)|atom - excited>``.

        Equal ``|Phi+| = |Phi-|`` with relative phase ``phase``.
        """
        return cls(complex(math.cos(phase / 2)), 1j * math.sin(phase / 2))

    def swapped(self) -> "ElectronicPreparation":
        return ElectronicPreparation(self.psi_minus, self.psi_plus)


@dataclass(frozen=True)
class DensityMatrixSnapshot:
    tau: float
    p_plus: float
    p_minus: float
    p_ground: float
    z: complex
    concurrence: float
    mode: str = "exact"

    def matrix(self) -> np.ndarray:
        """4x4 reduced density matrix in the standard basis."""
        rho = np.zeros((4, 4), dtype=complex)
        rho[1, 1] = self.p_minus
        rho[2, 2] = self.p_plus
        rho[1, 2] = self.z
        rho[2, 1] = np.conj(self.z)
        rho[3, 3] = self.p_ground
        return rho


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise ValueError("tau must be finite and non-negative")
    return tau


# ------------------------------------------------------------------- exact mode


@dataclass(frozen=True)
class ExactAverages:
    """Packet averages ``<exp(-2 tau mu)>``, ``<exp(2 tau mu)>``, ``<exp(2 i tau nu)>``.

    They do not depend on the electronic preparation; :meth:`state` combines
    them with one.
    """

    taus: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    rotation: np.ndarray

    def state(self, prep: ElectronicPreparation):
        """``(z, p_plus, p_minus)`` at each tau."""
        a2 = abs(prep.phi_plus) ** 2
        b2 = abs(prep.phi_minus) ** 2
        rot = prep.phi_plus * prep.phi_minus.conjugate() * self.rotation
        decay = np.exp(-2.0 * self.taus)
        pop = 0.5 * decay * (a2 * self.e_plus + b2 * self.e_minus)
        z = 0.5 * decay * (a2 * self.e_plus - b2 * self.e_minus) + 1j * decay * rot.imag
        return z, pop + decay * rot.real, pop - decay * rot.real


def _average_terms(mu, nu, tau):
    """Integrands of :class:`ExactAverages` stacked as ``(4 n_tau, n_nodes)``."""
    t = tau[:, None]
    ph = 2.0 * t * nu
    return np.concatenate([np.exp(-2.0 * t * mu), np.exp(2.0 * t * mu), np.cos(ph), np.sin(ph)])


def _split(taus, flat):
    n = taus.size
    return ExactAverages(taus, flat[:n], flat[n : 2 * n], flat[2 * n : 3 * n] + 1j * flat[3 * n :])


@lru_cache(maxsize=8)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _radial_exact(g, taus, tol, x_cut):
    """Averages by adaptive radial quadrature times a Legendre rule in ``c``.

    Robust where the packet reaches the strongly varying near-contact region.
    """

    def fn(x):
        kappa = x * g.x0 / g.dx0**2
        n_c = 64 + 32 * int(math.ceil(math.sqrt(kappa) / 4))
        c, w = _legendre(min(n_c, 1024))
        wt = w * polar_weight(x, c, g)
        c2 = c * c
        f, sx = radial_parts_mu(x)
        mu_v = 1.5 * (f + sx) - 1.5 * (3.0 * f + sx) * c2
        if x < x_cut:
            nu_v = np.zeros_like(c)
        else:
            gg, h = radial_parts_nu(x)
            nu_v = 0.75 * (gg - h) - 0.75 * (3.0 * gg - h) * c2
        return _average_terms(mu_v, nu_v, taus) @ wt

    lo = max(0.0, g.x0 - 12.0 * g.dx0)
    hi = g.x0 + 12.0 * g.dx0
    pts = [p for p in (x_cut, 2 * x_cut, 4 * x_cut) if lo < p < hi]
    res, err, info = quad_vec(fn, lo, hi, epsabs=tol / 4, epsrel=0.0, norm="max", points=pts or None, limit=5000, full_output=True)
    if info.status != 0 and err > tol:
        raise QuadratureNotConverged(f"radial exact quadrature status {info.status}, error {err:.3g}")
    return _split(taus, res)


def averages_evaluator(g, tol=1e-10, x_min=X_MIN, probe=(0.0, 0.1, 0.3), contact_mass=CONTACT_MASS, method="auto"):
    """Return ``taus -> ExactAverages``.

    ``method="hermite"`` fixes the Gauss-Hermite order by requiring
    convergence at the ``probe`` times and reuses it for every later call.
    ``"radial"`` integrates each requested grid adaptively.  ``"auto"`` tries
    Gauss-Hermite and falls back to radial.  ``nu`` is zero inside
    ``contact_radius(g, x_min, contact_mass)``.
    """
    if method not in ("auto", "hermite", "radial"):
        raise ValueError(f"unknown method {method!r}")
    x_cut = contact_radius(g, x_min, contact_mass)
    radial = lambda taus: _radial_exact(g, _check_tau(np.atleast_1d(taus)), tol, x_cut)
    if method == "radial":
        return radial
    probe = _check_tau(np.atleast_1d(np.asarray(probe, dtype=float)))
    try:
        _, _, ns = hermite_average(lambda ns: _average_terms(ns.mu, ns.nu, probe), g, tol, x_cut)
    except QuadratureNotConverged:
        if method == "hermite":
            raise
        return radial

    def hermite(taus):
        taus = _check_tau(np.atleast_1d(taus))
        # keep the (tau, node) work arrays around 1e7 elements
        step = max(1, int(2.5e6 // ns.weights.size))
        parts = [_average_terms(ns.mu, ns.nu, taus[i : i + step]) @ ns.weights for i in range(0, taus.size, step)]
        flat = np.concatenate([p.reshape(4, -1) for p in parts], axis=1).ravel()
        return _split(taus, flat)

    return hermite


def exact_evaluator(prep, g, tol=1e-10, x_min=X_MIN, probe=(0.0, 0.1, 0.3), contact_mass=CONTACT_MASS, method="auto"):
    """Return ``taus -> (z, p_plus, p_minus)``; see :func:`averages_evaluator`."""
    ev = averages_evaluator(g, tol, x_min, probe, contact_mass, method)
    return lambda taus: ev(taus).state(prep)


def exact_averages(prep, g, taus, tol=1e-10, x_min=X_MIN, probe=None, contact_mass=CONTACT_MASS, method="auto"):
    """Gaussian-averaged ``(z, p_plus, p_minus)`` at each ``tau``.

    ``probe`` defaults to up to 9 points spread over ``taus``; see
    :func:`exact_evaluator` for the engines.
    """
    taus = _check_tau(np.atleast_1d(taus))
    if probe is None:
        idx = np.unique(np.linspace(0, taus.size - 1, min(taus.size, 9)).astype(int))
        probe = taus[idx]
    return exact_evaluator(prep, g, tol, x_min, probe, contact_mass, method)(taus)


def z_exact(prep: ElectronicPreparation, g: GeometryConfig, tau: float, tol: float = 1e-10, x_min: float = X_MIN, contact_mass: float = CONTACT_MASS) -> complex:
    """Exact Gaussian-averaged coherence ``z(tau)``."""
    z, _, _ = exact_averages(prep, g, [tau], tol, x_min, contact_mass=contact_mass)
    return complex(z[0])


def z_from_amplitudes(prep, g, tau, tol=1e-10, x_min=X_MIN, contact_mass=CONTACT_MASS):
    """Coherence re-derived from ``psi_+-`` with rate ``mu + i nu``, i.e. ``<psi_- psi_+*>``.

    Differs from :func:`z_exact` by the sign of the dipole-dipole phase.
    """
    taus = np.atleast_1d(_check_tau(tau))

    def amps(ns):
        t = taus[:, None]
        rate = ns.mu + 1j * ns.nu
        fwd = prep.phi_plus * np.exp(-rate * t)
        bwd = prep.phi_minus * np.exp(rate * t)
        env = np.exp(-t)
        psi_p = env * (fwd + bwd) / _SQRT2
        psi_m = env * (fwd - bwd) / _SQRT2
        prod = psi_m * np.conj(psi_p)
        return np.concatenate([prod.real, prod.imag])

    val, _, _ = hermite_average(amps, g, tol, contact_radius(g, x_min, contact_mass))
    n = taus.size
    out = val[:n] + 1j * val[n:]
    return complex(out[0]) if np.ndim(tau) == 0 else out


# ---------------------------------------------------------------- cumulant mode


def _cumulant_terms(prep, m: CouplingMoments, tau):
    a2 = abs(prep.phi_plus) ** 2
    b2 = abs(prep.phi_minus) ** 2
    mag = abs(prep.phi_plus) * abs(prep.phi_minus)
    ep = np.exp(-2.0 * m.mu_bar * tau)
    em = np.exp(2.0 * m.mu_bar * tau)
    env_r = np.exp(-2.0 * (tau - (m.d_mu * tau) ** 2))
    env_i = np.exp(-2.0 * (tau + (m.d_nu * tau) ** 2))
    angle = 2.0 * m.nu_bar * tau + prep.phase
    zr = 0.5 * (a2 * ep - b2 * em) * env_r
    zi = mag * np.sin(angle) * env_i
    pop = 0.5 * (a2 * ep + b2 * em) * env_r
    osc = mag * np.cos(angle) * env_i
    return zr, zi, pop + osc, pop - osc


def z_cumulant(prep: ElectronicPreparation, m: CouplingMoments, tau, warn: bool = True):
    """Second-order cumulant coherence ``z_r + i z_i``.

    Warns (``RuntimeWarning``) for ``tau > 0.3`` where the expansion in
    ``gamma0 t`` is no longer trustworthy.
    """
    tau_arr = _check_tau(tau)
    if warn and np.any(tau_arr > CUMULANT_VALIDITY):
        warnings.warn(f"cumulant expansion used beyond tau={CUMULANT_VALIDITY}", RuntimeWarning, stacklevel=2)
    zr, zi, _, _ = _cumulant_terms(prep, m, tau_arr)
    z = zr + 1j * zi
    return complex(z) if z.ndim == 0 else z


# -------------------------------------------------------------------- snapshots


def concurrence_from_z(z) -> float:
    return 2.0 * max(0.0, abs(z))


def _make_snapshot(tau, z, pp, pm, mode, strict=True):
    pp, pm = float(max(pp, 0.0)), float(max(pm, 0.0))
    z = complex(z)
    if strict and abs(z) ** 2 > pp * pm + POSITIVITY_TOL:
        raise PositivityViolation(f"|z|^2={abs(z) ** 2:.3g} exceeds p+ p-={pp * pm:.3g} at tau={tau}")
    # same summation order as the trace of matrix(), so the trace is exactly 1
    p_ground = 1.0 - (pm + pp)
    return DensityMatrixSnapshot(float(tau), pp, pm, p_ground, z, concurrence_from_z(z), mode)


def trajectory(prep, g, tau_grid, tol=1e-10, mode="exact", m=None, x_min=X_MIN, contact_mass=CONTACT_MASS):
    """Snapshots on an ascending grid of non-negative times.

    ``mode`` is ``"exact"`` (packet quadrature) or ``"cumulant"``; in cumulant
    mode ``m`` may be passed to skip recomputing the moments.
    """
    taus = _check_tau(np.atleast_1d(np.asarray(tau_grid, dtype=float)))
    if np.any(np.diff(taus) < 0):
        raise ValueError("tau_grid must be sorted ascending")
    if mode == "exact":
        z, pp, pm = exact_averages(prep, g, taus, tol, x_min, contact_mass=contact_mass)
    elif mode == "cumulant":
        if m is None:
            m = compute_moments(g, max(tol, 1e-9), x_min=x_min, contact_mass=contact_mass)
        if np.any(taus > CUMULANT_VALIDITY):
            warnings.warn(f"cumulant expansion used beyond tau={CUMULANT_VALIDITY}", RuntimeWarning, stacklevel=2)
        zr, zi, pp, pm = _cumulant_terms(prep, m, taus)
        z = zr + 1j * zi
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return [_make_snapshot(t, zz, a, b, mode) for t, zz, a, b in zip(taus, z, pp, pm)]


def snapshot(prep, g, tau, tol=1e-10, mode="exact", m=None, x_min=X_MIN, contact_mass=CONTACT_MASS) -> DensityMatrixSnapshot:
    """Reduced density matrix at a single time.

    Raises
    ------
    PositivityViolation
        If ``|z|^2 > p+ p- + 1e-9``.
    """
    return trajectory(prep, g, [tau], tol, mode, m, x_min, contact_mass)[0]


# -------------------------------------------------------------------- wootters


def wootters_concurrence(rho, atol: float = 1e-9) -> float:
    """Wootters concurrence of an arbitrary two-qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidState(f"expected a 4x4 matrix, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise InvalidState("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise InvalidState(f"trace {np.trace(rho).real!r} is not 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise InvalidState("density matrix is not positive semidefinite")
    # lambda_i are the singular values of W^T (sy x sy) W for any rho = W W^+.
    # Working with W avoids square roots of the eigenvalues of rho rho~, which
    # turn rounding noise of size eps into errors of size sqrt(eps).
    w, v = np.linalg.eigh(rho)
    w = np.where(w > 64 * np.finfo(float).eps * max(w.max(), 1.0), w, 0.0)
    W = v * np.sqrt(w)
    lam = np.linalg.svd(W.T @ _SIGMA_Y2 @ W, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
