"""Dimensional checks that two trapped atoms stay distinguishable.

A packet of rms width ``dr0`` spreads during one lifetime ``tau0`` to
``dr0 * sqrt(1 + (l/dr0)**4)`` with the dispersion length
``l = sqrt(hbar tau0 / m)``.  The atoms stay distinguishable while the spread
is much smaller than their separation, which bounds ``dr0`` from both sides.
"much smaller" is a configurable factor ``strictness``.

Lengths are in metres, rates in s^-1, energies in J.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0, hbar, physical_constants

AMU = physical_constants["atomic mass constant"][0]
DEFAULT_STRICTNESS = 10.0


@dataclass(frozen=True)
class PhysicalSpecies:
    """Atom mass, transition wavelength and natural line width."""

    mass: float
    lambda0: float
    gamma0: float
    name: str = ""

    def __post_init__(self):
        for key in ("mass", "lambda0", "gamma0"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{key} must be positive and finite, got {v!r}")

    @property
    def tau0(self) -> float:
        return 2 * math.pi / self.gamma0

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.lambda0

    @property
    def recoil_energy(self) -> float:
        return (hbar * self.k0) ** 2 / (2 * self.mass)

    @property
    def dispersion_length(self) -> float:
        return math.sqrt(hbar * self.tau0 / self.mass)

    @property
    def recoil_ratio(self) -> float:
        """``E_r / (hbar gamma0)``."""
        return self.recoil_energy / (hbar * self.gamma0)


# D2 lines
SPECIES = {
    "Rb87": PhysicalSpecies(86.909180527 * AMU, 780.241209686e-9, 38.117e6, "Rb87"),
    "Cs133": PhysicalSpecies(132.905451931 * AMU, 852.347275820e-9, 32.889e6, "Cs133"),
    "Na23": PhysicalSpecies(22.9897692807 * AMU, 589.158326e-9, 61.542e6, "Na23"),
}


def gamma0_from_dipole(d: float, omega0: float) -> float:
    """Spontaneous emission rate ``omega0**3 d**2 / (3 pi eps0 hbar c**3)``.

    ``d`` is the transition dipole moment in C m, ``omega0`` the angular
    transition frequency in rad/s.
    """
    if d <= 0 or omega0 <= 0:
        raise ValueError("d and omega0 must be positive")
    return omega0**3 * d**2 / (3 * math.pi * epsilon_0 * hbar * C_LIGHT**3)


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v!r}")


def dispersed_spread(s: PhysicalSpecies, dr0: float) -> float:
    """Packet width after one lifetime, ``dr0 sqrt(1 + (l/dr0)^4)``."""
    _positive(dr0=dr0)
    return dr0 * math.sqrt(1.0 + (s.dispersion_length / dr0) ** 4)


def min_dispersed_spread(s: PhysicalSpecies) -> tuple[float, float]:
    """``(dr0, spread)`` minimizing :func:`dispersed_spread`: ``(l, sqrt(2) l)``."""
    l = s.dispersion_length
    return l, math.sqrt(2.0) * l


def min_spread(s: PhysicalSpecies, r0: float) -> float:
    """Smallest admissible initial width ``l**2 / r0``."""
    _positive(r0=r0)
    return s.dispersion_length**2 / r0


def quartic_condition(s: PhysicalSpecies, r0: float, dr0: float) -> float:
    """``dr0^4 - dr0^2 r0^2 + l^4``; negative when the spread fits inside ``r0``."""
    _positive(r0=r0, dr0=dr0)
    l = s.dispersion_length
    return dr0**4 - dr0**2 * r0**2 + l**4


def quartic_roots(s: PhysicalSpecies, r0: float) -> tuple[float, ...]:
    """Widths ``dr0`` at which :func:`quartic_condition` changes sign, ascending.

    Empty when ``r0 < sqrt(2) l`` (the condition is never met).  The smaller
    root uses the cancellation-free form ``2 l^4 / (r0^2 + sqrt(r0^4 - 4 l^4))``.
    """
    _positive(r0=r0)
    l4 = s.dispersion_length**4
    disc = r0**4 - 4.0 * l4
    if disc < 0:
        return ()
    root = math.sqrt(disc)
    y_hi = 0.5 * (r0**2 + root)
    y_lo = 2.0 * l4 / (r0**2 + root)
    return (math.sqrt(y_lo), math.sqrt(y_hi))


@dataclass(frozen=True)
class DistinguishabilityReport:
    """Outcome of :func:`check`.

    Each margin is ``(larger side) / (strictness * smaller side)`` of one
    inequality, so a margin of at least 1 means it holds.
    """

    r0: float
    dr0: float
    strictness: float
    dr_t: float
    dr_min: float
    dispersion_length: float
    margin_lower: float
    margin_upper: float
    margin_dispersed: float
    margin_r0: float
    recoil_ratio: float
    dr_min_over_recoil_scale: float
    quartic: float
    ok: bool

    @property
    def failures(self) -> list[str]:
        names = ("margin_lower", "margin_upper", "margin_dispersed", "margin_r0")
        return [n for n in names if getattr(self, n) < 1.0]

    def as_dict(self) -> dict:
        out = asdict(self)
        out["failures"] = self.failures
        return out


def check(s: PhysicalSpecies, r0: float, dr0: float, strictness: float = DEFAULT_STRICTNESS) -> DistinguishabilityReport:
    """Check ``dr_min << dr0 << r0``, ``dr_t << r0`` and ``r0 >> l``.

    ``dr_min_over_recoil_scale`` compares ``dr_min`` with
    ``lambda0 sqrt(E_r / (hbar gamma0))``, which equals ``sqrt(pi) l``.
    """
    _positive(r0=r0, dr0=dr0)
    if not strictness >= 1.0:
        raise ValueError("strictness must be at least 1")
    l = s.dispersion_length
    dr_t = dispersed_spread(s, dr0)
    dr_min = min_spread(s, r0)
    k = strictness
    margins = (dr0 / (k * dr_min), r0 / (k * dr0), r0 / (k * dr_t), r0 / (k * l))
    recoil_scale = s.lambda0 * math.sqrt(s.recoil_ratio)
    return DistinguishabilityReport(
        r0, dr0, k, dr_t, dr_min, l, *margins,
        recoil_ratio=s.recoil_ratio,
        dr_min_over_recoil_scale=dr_min / recoil_scale,
        quartic=quartic_condition(s, r0, dr0),
        ok=all(m >= 1.0 for m in margins),
    )
