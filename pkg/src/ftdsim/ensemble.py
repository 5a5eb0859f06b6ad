"""Averages of the coupling functions over the relative-position wave packet.

The interatomic vector is distributed as an isotropic 3D Gaussian with mean
``r0`` (length ``x0``) and per-axis standard deviation ``dx0``, all in units
of ``1/k0``.  The integration frame puts ``r0`` on the z axis and the dipole
moment in the x-z plane at angle ``theta0`` from ``r0``.

Two quadrature engines are provided:

* ``"radial"`` integrates the azimuthal and polar angles in closed form and
  leaves an adaptive Gauss-Kronrod integral over the distance.  This works
  for packets of any width, including ones spanning many wavelengths.
* ``"hermite"`` is a tensor-product Gauss-Hermite rule with order doubling.
  It is also the engine behind the exact coherence in :mod:`ftdsim.dynamics`,
  whose integrand is not polynomial in the angles.

``moments_mc`` is an independent seeded Monte-Carlo estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.integrate import quad, quad_vec
from scipy.optimize import brentq
from scipy.special import ive

from .coupling import X_MIN, _mu_unchecked, nu_with_cutoff, radial_parts_mu, radial_parts_nu
from .errors import ExcessiveCutoffMass, QuadratureNotConverged

HERMITE_START = 16
HERMITE_CAP = 256
CUTOFF_MASS_LIMIT = 1e-6
CONTACT_MASS = 1e-7
CONTACT_CAP = 1.0
_PRUNE = 1e-22
_TAIL_SIGMAS = 12.0
_MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class GeometryConfig:
    """Gaussian relative-position packet.

    Attributes
    ----------
    x0 : float
        Mean distance ``k0 * r0``.
    dx0 : float
        Per-axis rms spread ``k0 * dr0``.  For ``dx0 << x0`` this is also the
        rms spread of the distance itself.
    theta0 : float
        Angle (radians) between the mean distance vector and the dipole.
    """

    x0: float
    dx0: float
    theta0: float = math.pi / 2

    def __post_init__(self):
        if not (self.x0 > 0 and self.dx0 > 0):
            raise ValueError(f"x0 and dx0 must be positive, got x0={self.x0}, dx0={self.dx0}")
        if not 0.0 <= self.theta0 <= math.pi:
            raise ValueError(f"theta0 must lie in [0, pi], got {self.theta0}")

    @property
    def varsigma0(self) -> float:
        return math.sin(self.theta0) ** 2

    @property
    def indistinguishable(self) -> bool:
        """Advisory flag: spread not small compared with the mean distance."""
        return self.dx0 >= self.x0

    def frame(self, convention: str = "r0_z"):
        """Return ``(r0_vec, d_hat)`` in the requested frame.

        ``"r0_z"`` puts ``r0`` on z with the dipole in the x-z plane;
        ``"dipole_z"`` puts the dipole on z and ``r0`` in the x-z plane.
        """
        s, c = math.sin(self.theta0), math.cos(self.theta0)
        if convention == "r0_z":
            return np.array([0.0, 0.0, self.x0]), np.array([s, 0.0, c])
        if convention == "dipole_z":
            return self.x0 * np.array([s, 0.0, c]), np.array([0.0, 0.0, 1.0])
        raise ValueError(f"unknown frame convention {convention!r}")


@dataclass(frozen=True)
class CouplingMoments:
    """Gaussian-averaged coupling statistics.

    ``err_est`` maps each of ``mu_bar``, ``d_mu``, ``nu_bar``, ``d_nu`` to an
    absolute error estimate (quadrature error, or standard error for
    Monte-Carlo).
    """

    mu_bar: float
    d_mu: float
    nu_bar: float
    d_nu: float
    err_est: dict = field(default_factory=dict)
    weight_below_cutoff: float = 0.0
    method: str = "radial"

    def as_dict(self) -> dict:
        return {
            "mu_bar": self.mu_bar,
            "d_mu": self.d_mu,
            "nu_bar": self.nu_bar,
            "d_nu": self.d_nu,
            "err_est": dict(self.err_est),
            "weight_below_cutoff": self.weight_below_cutoff,
            "method": self.method,
        }


def density_at(g: GeometryConfig, x_vec) -> float:
    """Normalized packet density at ``x_vec`` (integration frame ``"r0_z"``)."""
    r0, _ = g.frame()
    d = np.asarray(x_vec, dtype=float) - r0
    norm = (2.0 * math.pi * g.dx0**2) ** -1.5
    return norm * np.exp(-0.5 * np.sum(d * d, axis=-1) / g.dx0**2)


def coupling_at_points(points, d_hat, x_min=X_MIN):
    """``(mu, nu)`` at an ``(N, 3)`` array of relative positions.

    ``nu`` is zero inside ``x < x_min``.
    """
    pts = np.asarray(points, dtype=float)
    x = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    proj = pts @ d_hat
    safe = np.where(x > 0, x, 1.0)
    vs = np.clip(1.0 - (proj / safe) ** 2, 0.0, 1.0)
    return _mu_unchecked(x, vs), nu_with_cutoff(x, vs, x_min), x


def _center_values(g, x_min):
    vs = g.varsigma0
    m = float(_mu_unchecked(np.float64(g.x0), vs))
    n = float(nu_with_cutoff(np.float64(g.x0), vs, x_min))
    return m, n


def _finish(raw, errs, g, tol, method, mass, x_min):
    """Assemble moments from shifted raw averages.

    ``raw`` holds ``<mu-m>, <(mu-m)^2>, <nu-n>, <(nu-n)^2>`` with ``m, n`` the
    point values at ``r0``; shifting removes most of the cancellation in the
    variance of narrow packets.
    """
    m, n = _center_values(g, x_min)
    e1, e2, e3, e4 = errs
    mu_bar = m + raw[0]
    nu_bar = n + raw[2]
    var_mu = max(raw[1] - raw[0] ** 2, 0.0)
    var_nu = max(raw[3] - raw[2] ** 2, 0.0)
    d_mu, d_nu = math.sqrt(var_mu), math.sqrt(var_nu)
    ev_mu = e2 + 2 * abs(raw[0]) * e1
    ev_nu = e4 + 2 * abs(raw[2]) * e3
    err = {
        "mu_bar": e1,
        "d_mu": _sd_error(d_mu, ev_mu),
        "nu_bar": e3,
        "d_nu": _sd_error(d_nu, ev_nu),
    }
    if mass > CUTOFF_MASS_LIMIT * (1 + 1e-5):
        raise ExcessiveCutoffMass(f"probability {mass:.3g} inside the cutoff exceeds {CUTOFF_MASS_LIMIT:g}")
    values = {"mu_bar": mu_bar, "d_mu": d_mu, "nu_bar": nu_bar, "d_nu": d_nu}
    for key, e in err.items():
        if not e <= tol * max(1.0, abs(values[key])):
            raise QuadratureNotConverged(f"{method}: error estimate {e:.3g} for {key} exceeds tol={tol:g}")
    return CouplingMoments(mu_bar, d_mu, nu_bar, d_nu, err, mass, method)


def _sd_error(sd, var_err):
    # |sqrt(a) - sqrt(b)| <= min(sqrt|a-b|, |a-b| / sqrt(max(a,b)))
    if sd > 0:
        return min(math.sqrt(var_err), var_err / sd)
    return math.sqrt(var_err)


# ---------------------------------------------------------------- radial engine


def _u_moments(kappa):
    """``M_n = int_{-1}^{1} u^n exp(kappa (u - 1)) du`` for n = 0, 2, 4."""
    kappa = np.asarray(kappa, dtype=float)
    out = np.empty((5,) + kappa.shape)
    small = kappa < 2.0
    if np.any(small):
        k = kappa[small]
        terms = np.ones_like(k)
        acc = np.zeros((5,) + k.shape)
        for j in range(48):
            for n in range(5):
                if (n + j) % 2 == 0:
                    acc[n] += terms * (2.0 / (n + j + 1))
            terms = terms * k / (j + 1)
        out[:, small] = acc * np.exp(-k)
    big = ~small
    if np.any(big):
        k = kappa[big]
        e2 = np.exp(-2.0 * k)
        prev = (1.0 - e2) / k
        out[0, big] = prev
        for n in range(1, 5):
            prev = (1.0 - (-1) ** n * e2) / k - n / k * prev
            out[n, big] = prev
    return out[0], out[2], out[4]


def _angular_kernels(x, g):
    """Gaussian-weighted angular integrals of ``1, c^2, c^4``.

    ``c`` is the cosine between the sampled vector and the dipole.  The
    returned arrays include the radial Jacobian and the Gaussian normalization,
    so integrating them over ``x`` gives probabilities.
    """
    x = np.asarray(x, dtype=float)
    sig2 = g.dx0**2
    kappa = x * g.x0 / sig2
    m0, m2, m4 = _u_moments(kappa)
    s2 = math.sin(g.theta0) ** 2
    c2 = math.cos(g.theta0) ** 2
    a0 = m0
    a1 = 0.5 * s2 * m0 + (c2 - 0.5 * s2) * m2
    a2 = 0.375 * s2 * s2 * m0 + (3.0 * s2 * c2 - 0.75 * s2 * s2) * m2 + (0.375 * s2 * s2 - 3.0 * s2 * c2 + c2 * c2) * m4
    pref = 2.0 * math.pi * (2.0 * math.pi * sig2) ** -1.5 * x * x * np.exp(-0.5 * (x - g.x0) ** 2 / sig2)
    return pref * a0, pref * a1, pref * a2


def polar_weight(x: float, c: np.ndarray, g: GeometryConfig) -> np.ndarray:
    """Packet density at distance ``x`` per unit ``dx dc``.

    ``c`` is the cosine between the sampled direction and the dipole; the
    azimuth about the dipole axis has been integrated out analytically.
    """
    sig2 = g.dx0**2
    kappa = x * g.x0 / sig2
    st, ct = math.sin(g.theta0), math.cos(g.theta0)
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    arg = kappa * st * s
    pref = 2.0 * math.pi * (2.0 * math.pi * sig2) ** -1.5 * x * x * math.exp(-0.5 * (x - g.x0) ** 2 / sig2)
    return pref * ive(0, arg) * np.exp(kappa * (ct * c + st * s - 1.0))


def mass_inside(g: GeometryConfig, radius: float) -> float:
    """Packet probability inside ``x < radius``."""
    if radius <= 0:
        return 0.0
    fn = lambda x: float(_angular_kernels(np.float64(x), g)[0])
    return quad(fn, 0.0, radius, epsabs=1e-300, epsrel=1e-10, limit=200)[0]


@lru_cache(maxsize=64)
def contact_radius(g: GeometryConfig, x_min: float = X_MIN, contact_mass: float = CONTACT_MASS) -> float:
    """Radius inside which the dipole-dipole term is switched off for averaging.

    ``nu`` grows like ``1/x**3``, so its packet variance is dominated by the
    near-contact region however little probability sits there.  The returned
    radius encloses at most ``contact_mass`` of the packet, never drops below
    ``x_min`` and never exceeds ``CONTACT_CAP``.  ``contact_mass=0`` gives the
    plain ``x_min`` cutoff.
    """
    if not 0.0 <= contact_mass <= CUTOFF_MASS_LIMIT:
        raise ValueError(f"contact_mass must lie in [0, {CUTOFF_MASS_LIMIT:g}]")
    if contact_mass <= 0 or mass_inside(g, x_min) >= contact_mass:
        return x_min
    hi = min(CONTACT_CAP, g.x0)
    if hi <= x_min:
        return x_min
    if mass_inside(g, hi) <= contact_mass:
        return hi
    f = lambda lr: math.log(max(mass_inside(g, math.exp(lr)), 1e-320)) - math.log(contact_mass)
    return math.exp(brentq(f, math.log(x_min), math.log(hi), xtol=1e-6))


def _radial_points(lo, hi, x_min):
    pts = list(np.arange(lo, hi, math.pi)[1:][:2000])
    if lo < 1.0:
        pts += [v for v in x_min * 2.0 ** np.arange(1, 12) if lo < v < min(hi, 1.0)]
        if lo < x_min < hi:
            pts.append(x_min)
    return sorted(set(pts))


def _radial_integral(fn, lo, hi, points, tol):
    if hi <= lo:
        return 0.0, 0.0
    res, err, info = quad_vec(
        fn, lo, hi, epsabs=tol / 10, epsrel=1e-13, norm="max", points=points or None, limit=20000, full_output=True
    )
    if info.status != 0 and err > tol:
        raise QuadratureNotConverged(f"radial quadrature status {info.status}, error {err:.3g}")
    return float(res), float(err)


def _moments_radial(g: GeometryConfig, tol: float, x_min: float) -> CouplingMoments:
    m, n = _center_values(g, x_min)
    lo = max(0.0, g.x0 - _TAIL_SIGMAS * g.dx0)
    hi = g.x0 + _TAIL_SIGMAS * g.dx0
    lo_nu = max(lo, x_min)
    pts = _radial_points(lo, hi, x_min)
    pts_nu = [p for p in pts if p > lo_nu]

    def mu_terms(x):
        f, s = radial_parts_mu(x)
        a = 1.5 * (f + s) - m
        b = -1.5 * (3.0 * f + s)
        k0, k1, k2 = _angular_kernels(x, g)
        return a, b, k0, k1, k2

    def nu_terms(x):
        gg, h = radial_parts_nu(x)
        a = 0.75 * (gg - h) - n
        b = -0.75 * (3.0 * gg - h)
        k0, k1, k2 = _angular_kernels(x, g)
        return a, b, k0, k1, k2

    def first(terms):
        def fn(x):
            a, b, k0, k1, _ = terms(x)
            return a * k0 + b * k1
        return fn

    def second(terms):
        def fn(x):
            a, b, k0, k1, k2 = terms(x)
            return a * a * k0 + 2 * a * b * k1 + b * b * k2
        return fn

    def spread(fn, lo_, pts_, mean, tol2):
        # the spread error is roughly var_err / sd: tighten once if needed
        r, e = _radial_integral(fn, lo_, hi, pts_, tol2)
        sd = math.sqrt(max(r - mean**2, 0.0))
        if _sd_error(sd, e) > tol * max(1.0, sd) and sd > 0:
            r, e = _radial_integral(fn, lo_, hi, pts_, max(tol * sd / 4, 1e-15))
        return r, e

    r1, e1 = _radial_integral(first(mu_terms), lo, hi, pts, tol)
    r3, e3 = _radial_integral(first(nu_terms), lo_nu, hi, pts_nu, tol)
    r2, e2 = spread(second(mu_terms), lo, pts, r1, tol)
    # the second nu moment can be huge when the packet reaches the origin
    r4, e4 = spread(second(nu_terms), lo_nu, pts_nu, r3, tol * max(1.0, abs(n) ** 2))
    mass = 0.0
    if lo < x_min:
        mass = mass_inside(g, x_min)
        # nodes inside the cutoff still count in <nu - n>: nu is zero there
        r3 += -n * mass
        r4 += n * n * mass
    return _finish((r1, r2, r3, r4), (e1, e2, e3, e4), g, tol, "radial", mass, x_min)


# --------------------------------------------------------------- hermite engine


@lru_cache(maxsize=16)
def tensor_rule(order: int):
    """Standard-normal tensor Gauss-Hermite rule in 3D, pruned of negligible weights.

    Returns ``(nodes, weights)`` with ``nodes`` of shape ``(M, 3)``.
    """
    z, w = hermegauss(order)
    w = w / math.sqrt(2.0 * math.pi)
    wmax = w.max() ** 3
    keep_nodes, keep_w = [], []
    for i in range(order):
        wij = w[i] * np.outer(w, w)
        mask = wij * 1.0 >= _PRUNE * wmax
        if not mask.any():
            continue
        jj, kk = np.nonzero(mask)
        keep_nodes.append(np.column_stack([np.full(jj.size, z[i]), z[jj], z[kk]]))
        keep_w.append(wij[mask])
    nodes = np.concatenate(keep_nodes)
    weights = np.concatenate(keep_w)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def hermite_orders(dx0: float, cap: int = HERMITE_CAP):
    """Order sequence: start scaled by ``ceil(dx0)``, doubling up to ``cap``."""
    n = min(HERMITE_START * max(1, math.ceil(dx0)), cap)
    orders = [n]
    while n < cap:
        n = min(2 * n, cap)
        orders.append(n)
    return orders


@dataclass(frozen=True)
class NodeSet:
    """Coupling values on the quadrature nodes of one packet."""

    weights: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    x: np.ndarray
    order: int


@lru_cache(maxsize=32)
def node_values(g: GeometryConfig, order: int, x_min: float = X_MIN, frame: str = "r0_z") -> NodeSet:
    nodes, w = tensor_rule(order)
    r0, d_hat = g.frame(frame)
    mu_v, nu_v, x = coupling_at_points(r0 + g.dx0 * nodes, d_hat, x_min)
    return NodeSet(w, mu_v, nu_v, x, order)


def hermite_average(integrand, g: GeometryConfig, tol: float, x_min: float = X_MIN, frame: str = "r0_z", cap: int = HERMITE_CAP):
    """Average ``integrand(NodeSet) -> (k, M)`` array over the packet.

    Doubles the per-axis order until two successive results differ by less
    than ``tol`` (max norm).  Returns ``(value, err, nodeset)``.
    """
    prev = None
    for order in hermite_orders(g.dx0, cap):
        ns = node_values(g, order, x_min, frame)
        val = np.asarray(integrand(ns)) @ ns.weights
        if prev is not None:
            err = float(np.max(np.abs(val - prev)))
            if err < tol:
                return val, err, ns
        prev = val
    raise QuadratureNotConverged(f"Gauss-Hermite order cap {cap} reached for dx0={g.dx0:g}")


def _moments_hermite(g, tol, x_min, frame):
    m, n = _center_values(g, x_min)

    def integrand(ns):
        dm = ns.mu - m
        dn = ns.nu - n
        return np.stack([dm, dm * dm, dn, dn * dn, (ns.x < x_min).astype(float)])

    val, err, _ = hermite_average(integrand, g, tol, x_min, frame)
    return _finish(tuple(val[:4]), (err,) * 4, g, tol, "hermite", float(val[4]), x_min)


def moments(
    g: GeometryConfig,
    tol: float = 1e-9,
    method: str = "radial",
    x_min: float = X_MIN,
    frame: str = "r0_z",
    contact_mass: float = CONTACT_MASS,
) -> CouplingMoments:
    """Gaussian-averaged ``mu_bar, d_mu, nu_bar, d_nu``.

    Parameters
    ----------
    tol : float
        Absolute tolerance, applied relative to the magnitude for moments
        larger than one.
    method : {"radial", "hermite"}
        Quadrature engine.  ``frame`` only affects ``"hermite"``.
    x_min, contact_mass : float
        ``nu`` is set to zero inside ``contact_radius(g, x_min, contact_mass)``.

    Raises
    ------
    QuadratureNotConverged
        The engine could not reach ``tol``.
    ExcessiveCutoffMass
        More than ``1e-6`` of the packet lies inside the cutoff.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x_cut = contact_radius(g, x_min, contact_mass)
    # checked up front: the integrals themselves may fail near the origin
    # the contact radius is solved to 1e-6 relative, hence the slack
    if g.x0 - _TAIL_SIGMAS * g.dx0 < x_cut and mass_inside(g, x_cut) > CUTOFF_MASS_LIMIT * (1 + 1e-5):
        raise ExcessiveCutoffMass(f"probability {mass_inside(g, x_cut):.3g} inside the cutoff exceeds {CUTOFF_MASS_LIMIT:g}")
    if method == "radial":
        return _moments_radial(g, tol, x_cut)
    if method == "hermite":
        return _moments_hermite(g, tol, x_cut, frame)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------- monte carlo


def sample_packet(g: GeometryConfig, n_samples: int, seed: int, frame: str = "r0_z"):
    """Yield ``(points, d_hat)`` chunks of Gaussian samples.

    Chunk ``i`` draws from its own child of ``SeedSequence(seed)``, so the
    stream depends only on ``(seed, n_samples)``.
    """
    r0, d_hat = g.frame(frame)
    n_chunks = -(-n_samples // _MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for i, child in enumerate(children):
        size = min(_MC_CHUNK, n_samples - i * _MC_CHUNK)
        rng = np.random.default_rng(child)
        yield r0 + g.dx0 * rng.standard_normal((size, 3)), d_hat


def moments_mc(
    g: GeometryConfig,
    n_samples: int = 1_000_000,
    seed: int = 0,
    x_min: float = X_MIN,
    frame: str = "r0_z",
    contact_mass: float = CONTACT_MASS,
) -> CouplingMoments:
    """Seeded Monte-Carlo estimate of the coupling moments.

    ``err_est`` holds standard errors; the spread errors use the delta method.
    The cutoff is the same ``contact_radius`` used by :func:`moments`.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    x_min = contact_radius(g, x_min, contact_mass)
    m, n = _center_values(g, x_min)
    # running power sums of the shifted samples
    sums = np.zeros((2, 4))
    inside = 0
    for pts, d_hat in sample_packet(g, n_samples, seed, frame):
        mu_v, nu_v, x = coupling_at_points(pts, d_hat, x_min)
        inside += int(np.count_nonzero(x < x_min))
        for row, v in enumerate((mu_v - m, nu_v - n)):
            sums[row] += [v.sum(), (v * v).sum(), (v**3).sum(), (v**4).sum()]
    raw = sums / n_samples
    out = []
    for row in range(2):
        s1, s2, s3, s4 = raw[row]
        var = max(s2 - s1 * s1, 0.0)
        sd = math.sqrt(var)
        se_mean = math.sqrt(var / n_samples)
        c4 = s4 - 4 * s3 * s1 + 6 * s2 * s1**2 - 3 * s1**4
        se_var = math.sqrt(max(c4 - var * var, 0.0) / n_samples)
        se_sd = se_var / (2 * sd) if sd > 0 else math.sqrt(se_var)
        out.append((s1, sd, se_mean, se_sd))
    (r_mu, sd_mu, se_mu, se_dmu), (r_nu, sd_nu, se_nu, se_dnu) = out
    err = {"mu_bar": se_mu, "d_mu": se_dmu, "nu_bar": se_nu, "d_nu": se_dnu}
    return CouplingMoments(m + r_mu, sd_mu, n + r_nu, sd_nu, err, inside / n_samples, "monte_carlo")
