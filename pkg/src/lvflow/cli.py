"""Batch command-line front end.

Subcommands: classical, thermo, gaussian, camouflage, evolve,
specfun-selftest.  Fields and curves are emitted as CSV, reports as JSON;
every output starts with a comment header carrying the full parameter set
and per-column provenance, and files are written atomically (temp + rename).
`--reproducible` suppresses the timestamp line so identical configurations
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time
from typing import Dict, List, Optional

import numpy as np

from . import __version__, classical, dynamics, gaussian, specfun, thermo
from .hamiltonian import lv_hamiltonian
from .wignerflow import DEFAULT_LV_GRID, PhaseGrid, fd_divergence, find_stagnation, winding_number

SUBCOMMANDS = ("classical", "thermo", "gaussian", "camouflage", "evolve", "specfun-selftest")

_FLOAT_FMT = "%.17g"


@dataclasses.dataclass
class RunConfig:
    subcommand: str
    parameters: Dict[str, object]
    output_dir: str = "."
    grid: Optional[PhaseGrid] = None
    seed: int = 0
    reproducible: bool = False


class UsageError(ValueError):
    pass


def _parse_grid(text: str) -> PhaseGrid:
    parts = text.split(":")
    if len(parts) != 6:
        raise UsageError(f"grid must be xmin:xmax:kmin:kmax:nx:nk, got {text!r}")
    return PhaseGrid(float(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]),
                     int(parts[4]), int(parts[5]))


def _render_grid(g: PhaseGrid) -> str:
    return f"{g.x_min:g}:{g.x_max:g}:{g.k_min:g}:{g.k_max:g}:{g.nx}:{g.nk}"


def _parse_beta_range(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"beta-range must be lo:hi:n, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if lo <= 0 or hi < lo or n < 1:
        raise UsageError(f"invalid beta-range {text!r}")
    return lo, hi, n


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lvflow",
                                 description="Phase-space Wigner flow toolkit for LV Hamiltonians")
    ap.add_argument("--config", help="key = value configuration file; flags override it")
    sub = ap.add_subparsers(dest="subcommand")

    def common(p):
        p.add_argument("--output-dir", default=os.environ.get("LVFLOW_OUTPUT_DIR", "."))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reproducible", action="store_true",
                       help="freeze nondeterminism (no timestamp header) for golden files")

    p = sub.add_parser("classical", help="level sets and parametric orbits (CSV)")
    common(p)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--eps", default="6,5,4,3,2.5,2.2,2.1,2.05",
                   help="comma list of orbit energies")
    p.add_argument("--grid", default=_render_grid(DEFAULT_LV_GRID))
    p.add_argument("--orbit-samples", type=int, default=400)

    p = sub.add_parser("thermo", help="thermodynamic scans and O(hbar^2) fields")
    common(p)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--beta-range", default="0.1:5:50")
    p.add_argument("--field", action="store_true", help="emit the W/J/quantifier grid CSV")
    p.add_argument("--beta", type=float, default=1.0, help="beta for --field mode")
    p.add_argument("--grid", default="-1:1:-1:1:161:161")

    p = sub.add_parser("gaussian", help="gaussian-ensemble field CSV + topology JSON")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--grid", default=_render_grid(DEFAULT_LV_GRID))

    p = sub.add_parser("camouflage", help="tuned-stationarity check (JSON report)")
    common(p)
    p.add_argument("--nu1", type=float, required=True)
    p.add_argument("--nu2", type=float, required=True)
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--detune", type=float, default=1.0,
                   help="multiplier applied to lambda_k (1.0 = tuned)")
    p.add_argument("--grid", default=_render_grid(DEFAULT_LV_GRID))

    p = sub.add_parser("evolve", help="population trajectory CSV + stability JSON")
    common(p)
    p.add_argument("--order", choices=dynamics.ORDERS, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--z0", type=float, required=True)
    p.add_argument("--tau-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)

    p = sub.add_parser("specfun-selftest", help="run the special-function invariant suite")
    common(p)
    return ap


_GRID_KEYS = {"grid"}
_COMMON_KEYS = {"output_dir", "seed", "reproducible"}


def parse_config(argv_or_text) -> RunConfig:
    """Build a RunConfig from CLI argv (list) or configuration-file text (str).

    Config files hold one `key = value` per line with `#` comments; the key
    names are the long option names of the subcommand plus `subcommand`
    itself.  Unknown keys are rejected.
    """
    if isinstance(argv_or_text, str):
        argv = _config_text_to_argv(argv_or_text)
    else:
        argv = list(argv_or_text)
        if argv and argv[0] == "--config" and len(argv) >= 2:
            with open(argv[1]) as fh:
                argv = _config_text_to_argv(fh.read()) + argv[2:]

    # argparse reads "-6:6:..." as an option; merge such values into --flag=value
    merged: List[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok.startswith("--") and "=" not in tok and nxt is not None
                and nxt.startswith("-") and not nxt.startswith("--")
                and any(c.isdigit() for c in nxt)):
            merged.append(f"{tok}={nxt}")
            i += 2
        else:
            merged.append(tok)
            i += 1
    argv = merged

    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:   # argparse error -> usage error
        raise UsageError("invalid command line") from exc
    if not ns.subcommand:
        raise UsageError("a subcommand is required")

    params = {}
    grid = None
    for key, value in vars(ns).items():
        if key in ("subcommand", "config", "output_dir", "seed", "reproducible"):
            continue
        if key in _GRID_KEYS:
            grid = _parse_grid(value)
            continue
        params[key] = value
    return RunConfig(subcommand=ns.subcommand, parameters=params,
                     output_dir=ns.output_dir, grid=grid, seed=ns.seed,
                     reproducible=bool(ns.reproducible))


def _config_text_to_argv(text: str) -> List[str]:
    argv: List[str] = []
    sub = None
    pairs = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line is not `key = value`: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "subcommand":
            sub = value
        else:
            pairs.append((key, value))
    if sub is None:
        raise UsageError("config file must set `subcommand`")
    argv.append(sub)
    for key, value in pairs:
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                argv.append(flag)
        else:
            argv.extend([flag, value])
    return argv


def render(config: RunConfig) -> str:
    """Config-file text that parse_config maps back to the same RunConfig."""
    lines = [f"subcommand = {config.subcommand}"]
    lines.append(f"output_dir = {config.output_dir}")
    lines.append(f"seed = {config.seed}")
    if config.reproducible:
        lines.append("reproducible = true")
    if config.grid is not None:
        lines.append(f"grid = {_render_grid(config.grid)}")
    for key, value in sorted(config.parameters.items()):
        if isinstance(value, bool):
            if value:
                lines.append(f"{key.replace('_', '-')} = true")
        elif value is not None:
            lines.append(f"{key.replace('_', '-')} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str):
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".lvflow-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(config: RunConfig, provenance: Dict[str, str]) -> List[str]:
    lines = [f"# lvflow {__version__} subcommand={config.subcommand}"]
    if not config.reproducible:
        lines.append(f"# generated: {time.strftime('%Y-%m-%dT%H:%M:%S')}")
    params = {k: v for k, v in sorted(config.parameters.items()) if v is not None}
    lines.append("# parameters: " + json.dumps(params, sort_keys=True, default=str))
    if config.grid is not None:
        lines.append(f"# grid: {_render_grid(config.grid)}")
    lines.append(f"# seed: {config.seed}")
    for col, src in provenance.items():
        lines.append(f"# column {col}: {src}")
    return lines


def _write_csv(config: RunConfig, name: str, columns: Dict[str, np.ndarray],
               provenance: Dict[str, str]) -> str:
    keys = list(columns)
    rows = len(next(iter(columns.values())))
    lines = _header(config, provenance)
    lines.append(",".join(keys))
    cols = [np.asarray(columns[k]) for k in keys]
    for i in range(rows):
        lines.append(",".join(_FLOAT_FMT % c[i] for c in cols))
    path = os.path.join(config.output_dir, name)
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def _write_json(config: RunConfig, name: str, payload: dict) -> str:
    meta = {
        "tool": f"lvflow {__version__}",
        "subcommand": config.subcommand,
        "parameters": {k: v for k, v in sorted(config.parameters.items()) if v is not None},
        "seed": config.seed,
    }
    if not config.reproducible:
        meta["generated"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    path = os.path.join(config.output_dir, name)
    _atomic_write(path, json.dumps({"meta": meta, **payload}, indent=2, sort_keys=True) + "\n")
    return path


def _field_columns(grid: PhaseGrid, W, Jx, Jk, extra: Dict[str, np.ndarray]):
    X, K = grid.mesh()
    cols = {"x": X.ravel(), "k": K.ravel(), "W": W.ravel(),
            "Jx": Jx.ravel(), "Jk": Jk.ravel()}
    for key, arr in extra.items():
        cols[key] = arr.ravel()
    return cols


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _run_classical(config: RunConfig) -> List[str]:
    a = config.parameters["a"]
    H = lv_hamiltonian(a)
    eps_list = [float(s) for s in str(config.parameters["eps"]).split(",") if s]
    n_samples = config.parameters["orbit_samples"]
    written = []
    for eps in eps_list:
        contours = classical.level_set(H, eps, config.grid)
        pts = (np.vstack([c.points for c in contours]) if contours
               else np.empty((0, 2)))
        y, z = np.exp(-pts[:, 0]), np.exp(-pts[:, 1])
        written.append(_write_csv(
            config, f"levelset_eps{eps:g}.csv",
            {"T": y + z, "x": pts[:, 0], "k": pts[:, 1], "y": y, "z": z,
             "H": H.evaluate(pts[:, 0], pts[:, 1])},
            {"x,k": "marching-squares vertices of H = eps",
             "y,z": "species map e^-x, e^-k", "T": "y + z"}))
        if a == 1.0 and eps >= 2.0:
            t_lo, t_hi = classical.admissible_T_interval(eps)
            T = np.linspace(t_lo, t_hi, n_samples)
            orbit = classical.parametric_orbit(eps, T)
            both = np.vstack([orbit.plus, orbit.minus[::-1]])
            Tb = np.concatenate([orbit.T, orbit.T[::-1]])
            y, z = np.exp(-both[:, 0]), np.exp(-both[:, 1])
            written.append(_write_csv(
                config, f"orbit_eps{eps:g}.csv",
                {"T": Tb, "x": both[:, 0], "k": both[:, 1], "y": y, "z": z,
                 "H": H.evaluate(both[:, 0], both[:, 1])},
                {"x,k": "parametric orbit branches (+ then - reversed)",
                 "T": "auxiliary parameter = y + z"}))
    return written


def _run_thermo(config: RunConfig) -> List[str]:
    a = config.parameters["a"]
    if config.parameters.get("field"):
        P = thermo.ThermoParams(beta=config.parameters["beta"], a=a)
        F = thermo.td_flow_field(P, config.grid)
        div = fd_divergence(F)
        quant = thermo.td_liouvillian(P, *config.grid.mesh())
        cols = _field_columns(config.grid, F.W, F.Jx, F.Jk,
                              {"divJ": div, "divW_quantifier": quant})
        path = _write_csv(config, f"thermo_field_a{a:g}_beta{P.beta:g}.csv", cols, {
            "W": "corrected stationary weight (Z0/ZST) W0 (1 + chi)",
            "Jx,Jk": "O(hbar^2) currents (W0 prefactor)",
            "divJ": "4th-order finite-difference divergence (NaN on boundary ring)",
            "divW_quantifier": "closed-form O(beta^2) divergence of w = J/W",
        })
        return [path]
    lo, hi, n = _parse_beta_range(config.parameters["beta_range"])
    betas = np.linspace(lo, hi, n)
    rows = {"beta": betas, "Z0": [], "ZST": [], "E0": [], "EST": [], "C0": [], "CST": []}
    for b in betas:
        P = thermo.ThermoParams(beta=float(b), a=a)
        rows["Z0"].append(thermo.partition_classical(P))
        rows["E0"].append(thermo.internal_energy(P, "classical"))
        rows["C0"].append(thermo.heat_capacity(P, "classical"))
        try:
            rows["ZST"].append(thermo.partition_corrected(P))
            rows["EST"].append(thermo.internal_energy(P, "corrected"))
            rows["CST"].append(thermo.heat_capacity(P, "corrected"))
        except thermo.PerturbativeDomainError:
            rows["ZST"].append(np.nan)
            rows["EST"].append(np.nan)
            rows["CST"].append(np.nan)
    path = _write_csv(config, f"thermo_scan_a{a:g}.csv",
                      {k: np.asarray(v) for k, v in rows.items()},
                      {"Z0,ZST": "closed-form partition functions",
                       "E0,EST": "-d ln Z/d beta (analytic digamma)",
                       "C0,CST": "beta^2 d^2 ln Z/d beta^2 (analytic trigamma)"})
    return [path]


def _run_gaussian(config: RunConfig) -> List[str]:
    G = gaussian.GaussianParams(alpha=config.parameters["alpha"])
    a = config.parameters["a"]
    F = gaussian.lv_flow_field(G, a, config.grid)
    divx, divk = gaussian.lv_divergences(G, a, *config.grid.mesh())
    cols = _field_columns(config.grid, F.W, F.Jx, F.Jk, {"divJ": divx + divk})
    csv_path = _write_csv(config, f"gaussian_field_alpha{G.alpha:g}_a{a:g}.csv", cols, {
        "W": "gaussian weight (alpha^2/pi) exp(-alpha^2 r^2)",
        "Jx,Jk": "exact erf-resummed currents",
        "divJ": "closed-form divergence (stationarity quantifier)",
    })
    report = find_stagnation(F, tol=1e-9)
    records = [{"type": "stagnation", "x": p.x, "k": p.k, "residual": p.residual}
               for p in report.stagnation_points]
    for p in report.stagnation_points:
        radius = 0.1
        loop = np.array([[p.x + radius * np.cos(t), p.k + radius * np.sin(t)]
                         for t in np.linspace(0, 2 * np.pi, 181)])
        records.append({"type": "winding", "x": p.x, "k": p.k,
                        "winding": winding_number(F, loop)})
    json_path = _write_json(config, f"gaussian_topology_alpha{G.alpha:g}_a{a:g}.json",
                            {"records": records, "purity": G.purity,
                             "purity_flag": "unphysical (>1)" if not G.is_physical else "ok"})
    return [csv_path, json_path]


def _run_camouflage(config: RunConfig) -> List[str]:
    rep = gaussian.camouflage_stationarity_check(
        config.parameters["nu1"], config.parameters["nu2"],
        config.parameters["zeta"], config.grid,
        detune_lambda_k=config.parameters["detune"])
    path = _write_json(config, "camouflage_check.json", {
        "max_divJ": rep.max_div,
        "tuned": rep.tuned,
        "hamiltonian": rep.params,
    })
    return [path]


def _run_evolve(config: RunConfig) -> List[str]:
    p = config.parameters
    traj = dynamics.evolve(p["order"], p["a"], p["alpha"], (p["y0"], p["z0"]),
                           p["tau_end"], p["dt"])
    report = dynamics.build_stability_report(p["order"], p["a"], p["alpha"])
    r = np.hypot(traj.species[:, 0] - report.equilibrium[0],
                 traj.species[:, 1] - report.equilibrium[1])
    csv_path = _write_csv(config, f"evolve_{p['order']}_a{p['a']:g}.csv",
                          {"tau": traj.times, "y": traj.species[:, 0],
                           "z": traj.species[:, 1], "r": r},
                          {"y,z": f"RK4 {p['order']}-order populations",
                           "r": "distance to the order's equilibrium"})
    json_path = _write_json(config, f"stability_{p['order']}_a{p['a']:g}.json", {
        "equilibrium": list(report.equilibrium),
        "trace": report.trace,
        "det": report.det,
        "discriminant": report.discriminant,
        "classification": report.classification,
        "extinct": traj.extinct,
        "extinction_time": traj.extinction_time,
    })
    return [csv_path, json_path]


def _run_selftest(config: RunConfig) -> List[str]:
    results = specfun.selftest(seed=config.seed)
    ok = True
    for name, passed, residual, tol in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  (residual {residual:.2e}, tol {tol:.0e})")
        ok = ok and passed
    if not ok:
        raise RuntimeError("specfun selftest failed")
    return []


_RUNNERS = {
    "classical": _run_classical,
    "thermo": _run_thermo,
    "gaussian": _run_gaussian,
    "camouflage": _run_camouflage,
    "evolve": _run_evolve,
    "specfun-selftest": _run_selftest,
}


def run(config: RunConfig) -> int:
    """Execute a validated RunConfig; returns the process exit status."""
    try:
        written = _RUNNERS[config.subcommand](config)
        for path in written:
            print(path)
        return 0
    except (UsageError, ValueError, OverflowError, RuntimeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2 if isinstance(exc, UsageError) else 1


def main(argv=None) -> int:
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        json.dump({"error": "UsageError", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
