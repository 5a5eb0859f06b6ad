"""Command-line front end.

Examples::

    ftdsim trajectory --config run.json --out traj.csv
    ftdsim find-td --config run.json --mode cumulant
    ftdsim sweep --config sweep.json --out sweep.csv
    ftdsim check-distinguishability --config rb.json
    ftdsim nodes --config nodes.json

Tabular output is CSV with 17 significant digits.  Commands that write CSV to
``--out`` also write a JSON summary next to it (``<stem>.summary.json``).
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
import warnings
from pathlib import Path

from . import config as cfgmod
from .coupling import mu_nodes
from .disentanglement import (
    DEGENERATE_TOL,
    PHASE_TOL,
    FtdKind,
    FtdResult,
    classify_regime,
    phase_condition,
    td_numeric,
    td_series,
    td_single,
    wrap_phase,
)
from .distinguishability import check
from .dynamics import trajectory
from .ensemble import contact_radius, moments, moments_mc
from .errors import ConfigError, FtdError, PreconditionError

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

TRAJECTORY_COLUMNS = ["tau", "z_r", "z_i", "abs_z", "concurrence", "p_plus", "p_minus", "p_ground", "mode"]


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int)):
        return str(int(v))
    return "%.17g" % v


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _prep_dict(prep) -> dict:
    return {
        "psi_plus": [prep.psi_plus.real, prep.psi_plus.imag],
        "psi_minus": [prep.psi_minus.real, prep.psi_minus.imag],
        "phi_plus_abs": abs(prep.phi_plus),
        "phi_minus_abs": abs(prep.phi_minus),
        "phase": prep.phase,
    }


def _summary(command: str, cfg) -> dict:
    return {"schema_version": cfgmod.SCHEMA_VERSION, "command": command, "config": copy.deepcopy(cfg.raw)}


def _geometry_dict(g) -> dict:
    return {"x0": g.x0, "dx0": g.dx0, "theta0": g.theta0, "advisory_not_distinguishable": g.indistinguishable}


def _moments(cfg, g):
    return moments(g, cfg.tol("moments"), x_min=cfg.x_min, contact_mass=cfg.contact_mass)


def _modes(cfg) -> list[str]:
    return ["exact", "cumulant"] if cfg.mode == "both" else [cfg.mode]


# --------------------------------------------------------------------- commands


def cmd_trajectory(cfg):
    g = cfg.geometry()
    taus = cfg.tau_grid()
    m = _moments(cfg, g)
    prep = cfg.preparation(m)
    rows = []
    caught = []
    for mode in _modes(cfg):
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            snaps = trajectory(prep, g, taus, cfg.tol("exact"), mode, m, cfg.x_min, cfg.contact_mass)
        caught += sorted({str(w.message) for w in rec})
        for s in snaps:
            rows.append([s.tau, s.z.real, s.z.imag, abs(s.z), s.concurrence, s.p_plus, s.p_minus, s.p_ground, mode])
    regime = classify_regime(prep, g, m, **cfg.regime_params())
    summary = _summary("trajectory", cfg)
    summary.update(
        geometry=_geometry_dict(g),
        preparation=_prep_dict(prep),
        moments=m.as_dict(),
        contact_radius=contact_radius(g, cfg.x_min, cfg.contact_mass),
        regime={"label": regime.label.value, "rationale": regime.rationale},
        rows=len(rows),
        warnings=caught,
    )
    if cfg.mc_samples:
        summary["moments_mc"] = moments_mc(g, cfg.mc_samples, cfg.seed, cfg.x_min, contact_mass=cfg.contact_mass).as_dict()
    return render_csv(TRAJECTORY_COLUMNS, rows), summary


def _closed_form(prep, m, tau_max) -> dict:
    if abs(m.mu_bar) >= DEGENERATE_TOL:
        tau = td_single(prep, m)
        try:
            phases = phase_condition(prep, m)
        except PreconditionError as exc:
            return {"branch": "single", "td_single": tau, "reason": str(exc), "result": FtdResult(FtdKind.NONE).as_dict()}
        off = min(abs(wrap_phase(prep.phase - p)) for p in phases)
        # same window as the numeric search; td_single itself is always reported
        ok = tau is not None and off < PHASE_TOL and tau <= tau_max
        result = FtdResult(FtdKind.SINGLE, (tau,), phases[0]) if ok else FtdResult(FtdKind.NONE, phase_required=phases[0])
        return {
            "branch": "single",
            "td_single": tau,
            "phase": prep.phase,
            "phase_required": phases,
            "phase_ok": off < PHASE_TOL,
            "result": result.as_dict(),
        }
    try:
        res = td_series(prep, m, tau_max)
    except PreconditionError as exc:
        return {"branch": "series", "reason": str(exc), "result": FtdResult(FtdKind.NONE).as_dict()}
    return {"branch": "series", "result": res.as_dict()}


def _agreement(closed: dict, numeric: dict):
    a, b = closed["result"]["times"], numeric["times"]
    n = min(len(a), len(b))
    delta = max((abs(x - y) for x, y in zip(a[:n], b[:n])), default=None)
    return {"counts_match": len(a) == len(b), "max_abs_delta": delta}


def cmd_find_td(cfg):
    g = cfg.geometry()
    m = _moments(cfg, g)
    prep = cfg.preparation(m)
    window = cfg.tau_window()
    closed = _closed_form(prep, m, window[1])
    numeric, agree = {}, {}
    for mode in _modes(cfg):
        res = td_numeric(prep, g, window, cfg.tol("ftd"), mode, m, x_min=cfg.x_min, contact_mass=cfg.contact_mass).as_dict()
        numeric[mode] = res
        agree[mode] = _agreement(closed, res)
    regime = classify_regime(prep, g, m, **cfg.regime_params())
    out = _summary("find-td", cfg)
    out.update(
        geometry=_geometry_dict(g),
        preparation=_prep_dict(prep),
        moments=m.as_dict(),
        regime={"label": regime.label.value, "rationale": regime.rationale},
        tau_window=list(window),
        closed_form=closed,
        numeric=numeric,
        agreement=agree,
    )
    return None, out


def cmd_sweep(cfg):
    axis, values = cfg.sweep_values()
    cfg.geometry()
    window = cfg.tau_window()
    num_mode = "exact" if cfg.mode == "exact" else "cumulant"
    header = [axis, "x0", "dx0", "theta0", "phase", "mu_bar", "d_mu", "nu_bar", "d_nu", "regime", "td_closed", "td_numeric"]
    rows = []
    for v in values:
        g = cfg.geometry(**({axis: float(v)} if axis != "phi" else {}))
        m = _moments(cfg, g)
        prep = cfg.preparation(m, phase=float(v) if axis == "phi" else None)
        regime = classify_regime(prep, g, m, **cfg.regime_params())
        closed = _closed_form(prep, m, window[1])["result"]["times"]
        res = td_numeric(prep, g, window, cfg.tol("ftd"), num_mode, m, x_min=cfg.x_min, contact_mass=cfg.contact_mass)
        rows.append([
            float(v), g.x0, g.dx0, g.theta0, prep.phase, m.mu_bar, m.d_mu, m.nu_bar, m.d_nu, regime.label.value,
            ";".join(fmt(t) for t in closed), ";".join(fmt(t) for t in res.times),
        ])
    out = _summary("sweep", cfg)
    out.update(axis=axis, points=len(rows), numeric_mode=num_mode, tau_window=list(window))
    return render_csv(header, rows), out


def cmd_check_distinguishability(cfg):
    s = cfg.species()
    r0, dr0, k = cfg.distinguishability()
    rep = check(s, r0, dr0, k)
    out = _summary("check-distinguishability", cfg)
    out.update(
        species={
            "name": s.name,
            "mass": s.mass,
            "lambda0": s.lambda0,
            "gamma0": s.gamma0,
            "tau0": s.tau0,
            "k0": s.k0,
            "recoil_energy": s.recoil_energy,
            "dispersion_length": s.dispersion_length,
        },
        report=rep.as_dict(),
    )
    return None, out


def cmd_nodes(cfg):
    vs, lo, hi = cfg.nodes()
    roots = mu_nodes(vs, lo, hi)
    out = _summary("nodes", cfg)
    out.update(varsigma=vs, x_lo=lo, x_hi=hi, nodes=roots)
    return render_csv(["index", "x"], [[i, x] for i, x in enumerate(roots)]), out


COMMANDS = {
    "trajectory": cmd_trajectory,
    "find-td": cmd_find_td,
    "sweep": cmd_sweep,
    "check-distinguishability": cmd_check_distinguishability,
    "nodes": cmd_nodes,
}


# ------------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ftdsim", description="Finite-time disentanglement of two atoms with a Gaussian separation.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path (CSV or JSON); stdout if omitted")
        p.add_argument("--mode", choices=["exact", "cumulant", "both"], help="override the config mode")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--tol", type=float, help="override every tolerance in the config")
    return ap


def _load(args):
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if args.mode is not None:
        raw["mode"] = args.mode
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.tol is not None:
        raw["tolerances"] = {"moments": args.tol, "exact": args.tol, "ftd": args.tol}
    return cfgmod.from_dict(raw)


def _emit(args, table, summary):
    text = table if table is not None else render_json(summary)
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text, encoding="utf-8", newline="")
    if table is not None:
        out.with_name(out.stem + ".summary.json").write_text(render_json(summary), encoding="utf-8", newline="")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        table, summary = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FtdError, ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(args, table, summary)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
