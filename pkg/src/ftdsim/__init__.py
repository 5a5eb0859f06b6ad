"""Finite-time disentanglement of two atoms whose separation is a Gaussian packet."""
from .coupling import ComplexRate, DipoleGeometry, gamma_rate, mu, mu_nodes, nu, nu_with_cutoff
from .disentanglement import (
    FtdKind,
    FtdResult,
    Regime,
    RegimeResult,
    classify_regime,
    phase_condition,
    td_numeric,
    td_series,
    td_single,
)
from .distinguishability import (
    SPECIES,
    DistinguishabilityReport,
    PhysicalSpecies,
    check,
    dispersed_spread,
    gamma0_from_dipole,
    min_spread,
    quartic_condition,
    quartic_roots,
)
from .dynamics import (
    DensityMatrixSnapshot,
    ElectronicPreparation,
    ExactAverages,
    averages_evaluator,
    concurrence_from_z,
    exact_averages,
    snapshot,
    trajectory,
    wootters_concurrence,
    z_cumulant,
    z_exact,
)
from .ensemble import CouplingMoments, GeometryConfig, contact_radius, moments, moments_mc
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
