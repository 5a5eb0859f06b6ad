"""JSON run configuration: schema validation and typed access."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .coupling import X_MIN
from .disentanglement import DEGENERATE_TOL, FAR_FIELD_X0, REGIME_THRESHOLD, WASHED_OUT_DX0, phase_condition
from .distinguishability import DEFAULT_STRICTNESS, SPECIES, PhysicalSpecies
from .dynamics import CUMULANT_VALIDITY, ElectronicPreparation
from .ensemble import CONTACT_MASS, CouplingMoments, GeometryConfig
from .errors import ConfigError, InvalidPreparation

SCHEMA_VERSION = "1"


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("ftdsim").joinpath("schema", f"run_config.v{SCHEMA_VERSION}.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(raw: dict) -> None:
    """Raise ``ConfigError`` unless ``raw`` matches the versioned schema."""
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def _complex(value: dict) -> complex:
    if "re" in value:
        return complex(value["re"], value["im"])
    return value["abs"] * complex(math.cos(value["arg"]), math.sin(value["arg"]))


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @property
    def length_scale(self) -> float:
        # lambda0 units: x = k0 r = 2 pi r / lambda0
        return 2 * math.pi if self.raw.get("units", "dimensionless") == "lambda0" else 1.0

    def geometry(self, **override) -> GeometryConfig:
        if "geometry" not in self.raw:
            raise ConfigError("geometry section is required for this command")
        geo = self.raw["geometry"]
        vals = {
            "x0": geo["x0"] * self.length_scale,
            "dx0": geo["dx0"] * self.length_scale,
            "theta0": geo.get("theta0", math.pi / 2),
        }
        vals.update(override)
        try:
            return GeometryConfig(**vals)
        except ValueError as exc:
            raise ConfigError(f"geometry: {exc}") from None

    def preparation(self, m: CouplingMoments | None = None, phase: float | None = None) -> ElectronicPreparation:
        """Electronic preparation; ``m`` resolves a ``"compensate"`` phase.

        A compensated phase is the first value of ``phase_condition`` for the
        given moments, or 0 when ``mu_bar`` is degenerate.
        """
        section = self.raw.get("preparation")
        if section is None:
            raise ConfigError("preparation section is required for this command")
        try:
            if "psi_plus" in section:
                prep = ElectronicPreparation(_complex(section["psi_plus"]), _complex(section["psi_minus"]))
                if phase is not None:
                    prep = ElectronicPreparation.from_phi(abs(prep.phi_plus), phase)
                return prep
            a = section["phi_plus_abs"]
            if phase is None:
                phase = section["phase"]
            if phase == "compensate":
                if m is None:
                    raise ConfigError("a compensated phase needs the coupling moments")
                base = ElectronicPreparation.from_phi(a, 0.0)
                ok = abs(m.mu_bar) >= DEGENERATE_TOL and 0.0 < a < 1.0
                phase = phase_condition(base, m)[0] if ok else 0.0
            return ElectronicPreparation.from_phi(a, phase)
        except InvalidPreparation as exc:
            raise ConfigError(f"preparation: {exc}") from None

    @property
    def phase_compensated(self) -> bool:
        return self.raw.get("preparation", {}).get("phase") == "compensate"

    def tau_grid(self) -> np.ndarray:
        t = self.raw.get("time")
        if t is None:
            raise ConfigError("time section is required for this command")
        lo = t.get("tau_min", 0.0)
        if not lo < t["tau_max"]:
            raise ConfigError("time: tau_min must be below tau_max")
        return np.linspace(lo, t["tau_max"], t["n_points"])

    @property
    def mode(self) -> str:
        return self.raw.get("mode", "exact")

    def tol(self, key: str) -> float:
        defaults = {"moments": 1e-9, "exact": 1e-10, "ftd": 1e-9}
        return self.raw.get("tolerances", {}).get(key, defaults[key])

    @property
    def x_min(self) -> float:
        return self.raw.get("x_min", X_MIN)

    @property
    def contact_mass(self) -> float:
        return self.raw.get("contact_mass", CONTACT_MASS)

    @property
    def seed(self) -> int:
        return self.raw.get("seed", 0)

    @property
    def mc_samples(self) -> int:
        return self.raw.get("mc_samples", 0)

    def tau_window(self) -> tuple[float, float]:
        win = self.raw.get("ftd", {}).get("tau_window")
        if win is None:
            hi = self.raw["time"]["tau_max"] if "time" in self.raw else CUMULANT_VALIDITY
            win = (0.0, hi)
        lo, hi = win
        if not lo < hi:
            raise ConfigError("ftd.tau_window must be increasing")
        return float(lo), float(hi)

    def regime_params(self) -> dict:
        r = self.raw.get("regime", {})
        return {
            "threshold": r.get("threshold", REGIME_THRESHOLD),
            "far_field_x0": r.get("far_field_x0", FAR_FIELD_X0),
            "washed_out_dx0": r.get("washed_out_dx0", WASHED_OUT_DX0),
        }

    def sweep_values(self) -> tuple[str, np.ndarray]:
        sw = self.raw.get("sweep")
        if sw is None:
            raise ConfigError("sweep section is required for this command")
        if sw["start"] == sw["stop"]:
            raise ConfigError("sweep: start and stop coincide")
        scale = self.length_scale if sw["axis"] in ("x0", "dx0") else 1.0
        vals = np.linspace(sw["start"], sw["stop"], sw["steps"]) * scale
        if sw["axis"] in ("x0", "dx0") and np.any(vals <= 0):
            raise ConfigError(f"sweep: {sw['axis']} values must be positive")
        if sw["axis"] == "theta0" and np.any((vals < 0) | (vals > math.pi)):
            raise ConfigError("sweep: theta0 values must lie in [0, pi]")
        return sw["axis"], vals

    def nodes(self) -> tuple[float, float, float]:
        n = self.raw.get("nodes")
        if n is None:
            raise ConfigError("nodes section is required for this command")
        lo, hi = n["x_lo"] * self.length_scale, n["x_hi"] * self.length_scale
        if not lo < hi:
            raise ConfigError("nodes: x_lo must be below x_hi")
        return n.get("varsigma", 1.0), lo, hi

    def species(self) -> PhysicalSpecies:
        sp = self.raw.get("species")
        if sp is None:
            raise ConfigError("species is required for this command")
        if isinstance(sp, str):
            return SPECIES[sp]
        return PhysicalSpecies(sp["mass"], sp["lambda0"], sp["gamma0"], sp.get("name", ""))

    def distinguishability(self) -> tuple[float, float, float]:
        """``(r0, dr0, strictness)`` with lengths in metres."""
        d = self.raw.get("distinguishability")
        if d is None:
            raise ConfigError("distinguishability section is required for this command")
        unit = self.species().dispersion_length if d.get("length_unit", "m") == "dispersion_length" else 1.0
        return d["r0"] * unit, d["dr0"] * unit, d.get("strictness", DEFAULT_STRICTNESS)


def from_dict(raw: dict) -> RunConfig:
    validate(raw)
    return RunConfig(copy.deepcopy(raw))


def load(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return from_dict(raw)
