"""Finite-time disentanglement: closed-form conditions, numeric search, regimes.

Concurrence of the single-excitation state is ``2 |z|``, so disentanglement
happens when both ``z_r`` and ``z_i`` vanish at the same finite time.  In the
cumulant model that needs

* ``|Phi+| exp(-mu_bar tau) = |Phi-| exp(mu_bar tau)``, and
* ``2 nu_bar tau + phase = n pi``.

When ``mu_bar = 0`` the first condition is time independent and, with
``|Phi+| = |Phi-|``, the second one produces an equidistant series of times.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .coupling import X_MIN
from .dynamics import CUMULANT_VALIDITY, ElectronicPreparation, _cumulant_terms, exact_evaluator
from .ensemble import CONTACT_MASS, CouplingMoments, GeometryConfig, moments as compute_moments
from .errors import DegenerateMuBar, PreconditionError

DEGENERATE_TOL = 1e-9
MAGNITUDE_TOL = 1e-9
PHASE_TOL = 1e-6
REGIME_THRESHOLD = 1e-3
FAR_FIELD_X0 = 20 * math.pi
WASHED_OUT_DX0 = 2 * math.pi
COINCIDENCE_TOL = 1e-9


class FtdKind(str, enum.Enum):
    NONE = "NONE"
    SINGLE = "SINGLE"
    SERIES = "SERIES"
    SEPARABLE = "SEPARABLE"


class Regime(str, enum.Enum):
    FAR_FIELD_NO_FTD = "FAR_FIELD_NO_FTD"
    WASHED_OUT_NO_FTD = "WASHED_OUT_NO_FTD"
    NODE_SERIES_FTD = "NODE_SERIES_FTD"
    SINGLE_FTD = "SINGLE_FTD"
    NO_FTD = "NO_FTD"


@dataclass(frozen=True)
class FtdResult:
    """Disentanglement times found in a window.

    Times past ``validity_limit`` are kept; ``beyond_validity`` marks them
    because the cumulant model is not trustworthy there.
    """

    kind: FtdKind
    times: tuple = ()
    phase_required: float | None = None
    validity_limit: float = CUMULANT_VALIDITY

    @property
    def beyond_validity(self) -> tuple:
        return tuple(t > self.validity_limit for t in self.times)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "times": list(self.times),
            "phase_required": self.phase_required,
            "validity_limit": self.validity_limit,
            "beyond_validity": list(self.beyond_validity),
        }


@dataclass(frozen=True)
class RegimeResult:
    label: Regime
    rationale: str
    moments: CouplingMoments = field(repr=False)


def wrap_phase(phi: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w <= -math.pi else w


def _magnitudes(prep: ElectronicPreparation):
    return abs(prep.phi_plus), abs(prep.phi_minus)


# ----------------------------------------------------------------- closed form


def td_single(prep: ElectronicPreparation, m: CouplingMoments, degenerate_tol: float = DEGENERATE_TOL):
    """Time at which the two decaying populations balance, ``ln(|Phi+|/|Phi-|) / (2 mu_bar)``.

    This is the only candidate disentanglement time when ``mu_bar != 0``; it
    is an actual one only if the phase also satisfies :func:`phase_condition`.
    Returns ``None`` when the time is not positive or a ``Phi`` vanishes.

    Raises
    ------
    DegenerateMuBar
        If ``|mu_bar| < degenerate_tol``.
    """
    if abs(m.mu_bar) < degenerate_tol:
        raise DegenerateMuBar(f"|mu_bar|={abs(m.mu_bar):.3g} is below {degenerate_tol:g}")
    a, b = _magnitudes(prep)
    if a == 0.0 or b == 0.0:
        return None
    tau = math.log(a / b) / (2.0 * m.mu_bar)
    return tau if tau > 0 else None


def phase_condition(prep: ElectronicPreparation, m: CouplingMoments, degenerate_tol: float = DEGENERATE_TOL) -> list[float]:
    """Relative phases ``arg(Phi+ Phi-*)`` that make ``td_single`` a zero of ``z``.

    Returned sorted and wrapped to ``(-pi, pi]``; the set is ``{phi, phi - pi}``
    modulo ``2 pi``.
    """
    if abs(m.mu_bar) < degenerate_tol:
        raise DegenerateMuBar(f"|mu_bar|={abs(m.mu_bar):.3g} is below {degenerate_tol:g}")
    a, b = _magnitudes(prep)
    if a == 0.0 or b == 0.0:
        raise PreconditionError("both |Phi+| and |Phi-| must be non-zero")
    base = -m.nu_bar / m.mu_bar * math.log(a / b)
    return sorted({wrap_phase(base + n * math.pi) for n in (0, 1)})


def td_series(
    prep: ElectronicPreparation,
    m: CouplingMoments,
    tau_max: float,
    degenerate_tol: float = DEGENERATE_TOL,
    magnitude_tol: float = MAGNITUDE_TOL,
    phase_tol: float = PHASE_TOL,
) -> FtdResult:
    """Series of disentanglement times at a node of ``mu_bar``.

    Requires ``|mu_bar| < degenerate_tol`` and ``|Phi+| = |Phi-|``.  Times are
    ``(n pi - phase) / (2 nu_bar)`` inside ``(0, tau_max]``.  With
    ``nu_bar = 0`` as well, a phase that is a multiple of ``pi`` keeps the
    atoms separable forever and any other phase never disentangles.
    """
    if abs(m.mu_bar) >= degenerate_tol:
        raise PreconditionError(f"|mu_bar|={abs(m.mu_bar):.3g} is not below {degenerate_tol:g}")
    a, b = _magnitudes(prep)
    if abs(a - b) >= magnitude_tol:
        raise PreconditionError(f"| |Phi+| - |Phi-| | = {abs(a - b):.3g} is not below {magnitude_tol:g}")
    phi = prep.phase
    if abs(m.nu_bar) < degenerate_tol:
        off = abs(math.remainder(phi, math.pi))
        kind = FtdKind.SEPARABLE if off < phase_tol else FtdKind.NONE
        return FtdResult(kind)
    step = math.pi / (2.0 * abs(m.nu_bar))
    # n pi - phi must share the sign of nu_bar
    sgn = 1.0 if m.nu_bar > 0 else -1.0
    n0 = math.floor(sgn * phi / math.pi) + 1
    first = (sgn * n0 * math.pi - phi) / (2.0 * m.nu_bar)
    if first <= 0:  # phi exactly on a multiple of pi
        first += step
    times = []
    k = 0
    limit = tau_max * (1.0 + 1e-12)
    while first + k * step <= limit:
        times.append(first + k * step)
        k += 1
    return FtdResult(FtdKind.SERIES, tuple(times))


# ------------------------------------------------------------------ numerical


def coherence_function(prep, g, mode="cumulant", tol=1e-10, m=None, x_min=X_MIN, contact_mass=CONTACT_MASS, tau_max=CUMULANT_VALIDITY):
    """Vectorized ``tau -> z(tau)`` in the chosen mode.

    In exact mode the quadrature is fixed once, checked on ``[0, tau_max]``.
    """
    if mode == "cumulant":
        if m is None:
            m = compute_moments(g, max(tol, 1e-9), x_min=x_min, contact_mass=contact_mass)

        def z_of(taus):
            zr, zi, _, _ = _cumulant_terms(prep, m, np.asarray(taus, dtype=float))
            return zr + 1j * zi

        return z_of
    if mode == "exact":
        probe = np.linspace(0.0, tau_max, 9)
        ev = exact_evaluator(prep, g, tol, x_min, probe, contact_mass)
        return lambda taus: ev(taus)[0]
    raise ValueError(f"unknown mode {mode!r}")


def _sign_roots(fn, grid, vals):
    roots = []
    for i in range(grid.size - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def td_numeric(
    prep: ElectronicPreparation,
    g: GeometryConfig,
    tau_window=(0.0, CUMULANT_VALIDITY),
    tol: float = 1e-9,
    mode: str = "cumulant",
    m: CouplingMoments | None = None,
    n_scan: int | None = None,
    x_min: float = X_MIN,
    contact_mass: float = CONTACT_MASS,
) -> FtdResult:
    """Search ``tau_window`` for common zeros of ``z_r`` and ``z_i``.

    Each component is scanned for sign changes and refined with Brent's
    method.  A component whose magnitude never exceeds ``tol * |z(0)|`` on the
    scan counts as identically zero; if both do the state is separable.
    Otherwise the zeros of the two components are matched within
    ``1e-9`` and kept if ``|z| < tol * |z(0)|`` there.  For ``z(0) = 0`` the
    reference scale is ``1/2``.
    """
    lo, hi = map(float, tau_window)
    if not 0.0 <= lo < hi:
        raise ValueError("tau_window must satisfy 0 <= lo < hi")
    if m is None:
        m = compute_moments(g, 1e-9, x_min=x_min, contact_mass=contact_mass)
    z_of = coherence_function(prep, g, mode, max(tol, 1e-12), m, x_min, contact_mass, hi)
    if n_scan is None:
        # about 30 points per unit phase advance, never fewer than the floor
        rate = abs(m.nu_bar) + abs(m.mu_bar) + m.d_nu + 1.0
        floor = 2001 if mode == "cumulant" else 201
        n_scan = int(min(max(floor, 60 * (hi - lo) * rate), 200001))
    grid = np.linspace(lo, hi, n_scan)
    z = z_of(grid)
    # a product state starts at z = 0; fall back to the largest possible |z|
    scale = abs(complex(z_of(np.array([0.0]))[0])) or 0.5
    thresh = tol * scale
    zero_r = bool(np.max(np.abs(z.real)) <= thresh)
    zero_i = bool(np.max(np.abs(z.imag)) <= thresh)
    if zero_r and zero_i:
        return FtdResult(FtdKind.SEPARABLE)

    comp_r = lambda t: float(z_of(np.array([t]))[0].real)
    comp_i = lambda t: float(z_of(np.array([t]))[0].imag)
    if zero_r:
        cands = _sign_roots(comp_i, grid, z.imag)
    elif zero_i:
        cands = _sign_roots(comp_r, grid, z.real)
    else:
        roots_i = np.array(_sign_roots(comp_i, grid, z.imag))
        cands = [
            t for t in _sign_roots(comp_r, grid, z.real)
            if roots_i.size and np.min(np.abs(roots_i - t)) <= COINCIDENCE_TOL * max(1.0, t)
        ]
    times = []
    for t in cands:
        if t <= 0.0:
            continue
        if abs(complex(z_of(np.array([t]))[0])) < thresh:
            times.append(t)
    if not times:
        return FtdResult(FtdKind.NONE)
    kind = FtdKind.SINGLE if len(times) == 1 else FtdKind.SERIES
    return FtdResult(kind, tuple(times))


# -------------------------------------------------------------------- regimes


def classify_regime(
    prep: ElectronicPreparation,
    g: GeometryConfig,
    m: CouplingMoments | None = None,
    threshold: float = REGIME_THRESHOLD,
    far_field_x0: float = FAR_FIELD_X0,
    washed_out_dx0: float = WASHED_OUT_DX0,
    magnitude_tol: float = MAGNITUDE_TOL,
    phase_tol: float = PHASE_TOL,
) -> RegimeResult:
    """Label the geometry and preparation by the disentanglement they allow."""
    if m is None:
        m = compute_moments(g)
    small_mu = abs(m.mu_bar) < threshold
    small_nu = abs(m.nu_bar) < threshold
    if small_mu and small_nu:
        if g.x0 >= far_field_x0:
            return RegimeResult(Regime.FAR_FIELD_NO_FTD, f"x0={g.x0:.4g} is in the far field: both averaged couplings vanish", m)
        if g.dx0 > washed_out_dx0:
            return RegimeResult(Regime.WASHED_OUT_NO_FTD, f"dx0={g.dx0:.4g} averages both couplings to zero", m)
        return RegimeResult(Regime.NO_FTD, "both averaged couplings are below threshold", m)
    if small_mu:
        a, b = _magnitudes(prep)
        if abs(a - b) < magnitude_tol:
            return RegimeResult(Regime.NODE_SERIES_FTD, "mu_bar vanishes and |Phi+| = |Phi-|: periodic zeros driven by nu_bar", m)
        return RegimeResult(Regime.NO_FTD, "mu_bar vanishes but |Phi+| != |Phi-|: z_r never reaches zero", m)
    tau = td_single(prep, m, degenerate_tol=0.0)
    if tau is None:
        return RegimeResult(Regime.NO_FTD, "population balance is never reached at positive time", m)
    phases = phase_condition(prep, m, degenerate_tol=0.0)
    off = min(abs(wrap_phase(prep.phase - p)) for p in phases)
    if off < phase_tol:
        return RegimeResult(Regime.SINGLE_FTD, f"z vanishes once at tau={tau:.6g}", m)
    return RegimeResult(Regime.NO_FTD, f"phase misses the required value by {off:.3g} rad", m)
