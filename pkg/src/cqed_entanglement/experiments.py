"""Experiment runners: figure data sets and the cross-module validation suite.

Every runner takes a fully resolved config dict (see :func:`resolve_config`)
and writes ``out_dir/<experiment>/manifest.json`` plus CSV files. Outputs
carry no timestamps or host data, so a rerun from the manifest alone
reproduces them byte for byte.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
import re
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from . import __version__
from .errors import CQEDError
from .hilbert import (
    SystemParams,
    binary_entropy,
    build_operators,
    coherent_state,
    entanglement_entropy,
    ket_to_dm,
    partial_trace,
    product_state,
    trace_distance,
)
from .master import Frame, build_liouvillian, steady_state, to_original_frame
from .semiclassical import (
    Branch,
    analytic_phase_ensemble_entropy,
    asymptotic_lambda,
    averaged_phase_entanglement,
    dichotomous_mixture,
    fixed_points,
    gamma_a_for_xi,
    phase_average_density,
    phase_grid,
    phase_state_entropy,
    Regime,
)
from .trajectories import (
    SweepPoint,
    UnravelingConfig,
    ensemble_mean,
    ensemble_states,
    simulate_direct,
    sweep_entanglement,
)
from .wigner import wigner_function

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig1_direct", "fig2_semiclassical", "fig2c_wigner", "fig3_homodyne", "validate")

SWEEP_COLUMNS = [
    "gamma_a_bar", "gamma_b_bar", "omega_bar", "theta", "E", "stderr",
    "n_samples", "correlation_time", "status",
]

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "n_traj": 2,
    "out_dir": "runs",
    "trajectory": {
        "dt_bar": None,
        "t_transient": 20.0,
        "t_total": 2000.0,
        "sample_interval": 0.1,
        "frame": "original",
    },
    "fig1_direct": {
        "omega_bar": 1.0,
        "gamma_b_bar": 0.5,
        "series_gamma_a": [0.3, 2.0, 20.0],
        "series_t_total": 100.0,
        "gamma_a_grid": [0.1, 0.3, 0.6, 1.0, 2.0, 4.0, 8.0, 20.0],
        "surface_gamma_a": [0.3, 1.0, 2.0, 5.0, 20.0],
        "surface_gamma_b": [0.25, 0.5, 1.0, 2.0],
        "scaling": {
            "small_gamma_a": [0.03, 0.05, 0.1, 0.2, 0.3],
            "large_gamma_a": [10.0, 20.0, 40.0, 100.0],
            "t_transient": 300.0,
            "t_total": 2300.0,
        },
    },
    "fig2_semiclassical": {
        "omega_bar": 3.0,
        "n_loci": 41,
        "wigner_omega_bar": 3.0,
        "wigner_points": 121,
    },
    "fig2c_wigner": {
        "omega_bar": 3.0,
        "gamma_a_bar": None,
        "gamma_b_bar": 0.0,
        "points": 121,
    },
    "fig3_homodyne": {
        "omega_bar": 3.0,
        "gamma_b_bar": 0.0,
        "thetas": ["0", "pi/40", "pi/10", "pi/2"],
        "gamma_a_grid": [0.2, 0.3, 0.45, 0.6, 0.8, 1.2, 2.0],
        "surface_thetas": ["0", "pi/2"],
        "surface_omega": [1.0, 2.0, 3.0, 4.0],
        "surface_gamma_a": [0.1, 0.2, 0.4, 0.8, 1.6],
        "analytic_gamma_a": None,
        "n_phi": 64,
    },
    "validate": {
        "omega_bar": 1.0,
        "gamma_a_bar": 2.0,
        "gamma_b_bar": 0.5,
        "mean_n_traj": 500,
        "mean_t": 30.0,
        "dark_t_total": 2000.0,
        "jump_scale_a": 1.0,
        "wigner_omega_bar": 3.0,
        "oracle_omega_bar": 3.0,
    },
}


class ConfigError(ValueError):
    """Invalid or unknown configuration entries."""


# ---------------------------------------------------------------- config


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def load_config_file(path) -> dict:
    """Read a JSON config; a run manifest is accepted in place of a config."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in data and "tool" in data:
        data = data["config"]
    return data


def resolve_config(experiment: str, file_values: dict | None = None, **flags) -> dict:
    """Defaults, then file values, then non-None flags; only the chosen section is kept."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    file_values = dict(file_values or {})
    file_experiment = file_values.pop("experiment", experiment)
    if file_experiment != experiment:
        raise ConfigError(f"config is for {file_experiment!r}, not {experiment!r}")
    base = {k: v for k, v in DEFAULTS.items() if k not in EXPERIMENTS or k == experiment}
    resolved = _merge(base, file_values)
    for key, value in flags.items():
        if value is not None:
            resolved[key] = value
    resolved["experiment"] = experiment
    try:
        UnravelingConfig(**resolved["trajectory"])
    except (TypeError, CQEDError) as exc:
        raise ConfigError(f"bad trajectory settings: {exc}") from exc
    if int(resolved["n_traj"]) < 1 or int(resolved["jobs"]) < 1:
        raise ConfigError("n_traj and jobs must be positive")
    return resolved


def parse_angle(text) -> float:
    """Angles as numbers or strings like ``"pi/40"``, ``"3*pi/4"``, ``"0"``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).replace(" ", "")
    m = re.fullmatch(r"(?:([0-9.]+)\*?)?pi(?:/([0-9.]+))?", s)
    if m:
        num = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle {text!r}") from exc


def angle_tag(text) -> str:
    return "theta" + re.sub(r"[^0-9a-z.]", "", str(text).lower())


# ---------------------------------------------------------------- output


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _out_dir(config: dict) -> Path:
    path = Path(config["out_dir"]) / config["experiment"]
    os.makedirs(path, exist_ok=True)
    return path


def _manifest(config: dict, files, points=None, **extra) -> dict:
    out = {
        "tool": "cqed-entangle",
        "version": __version__,
        "experiment": config["experiment"],
        "config": config,
        "files": sorted(files),
        "points": points or [],
        "basis": "qubit-major: index = s*(n_max+1) + n, s in {g=0, e=1}",
    }
    out.update(extra)
    return out


def _traj_cfg(config: dict, **changes) -> UnravelingConfig:
    values = dict(config["trajectory"])
    values.update(changes)
    return UnravelingConfig(**values)


def _sweep_rows(rows):
    table, status = [], []
    for r in rows:
        p = r.point
        state = "ok" if r.ok else r.error
        if r.ok and r.hybrid:
            state = "ok (hybrid jump+diffusive)"
        table.append([p.gamma_a_bar, p.gamma_b_bar, p.omega_bar, p.theta, r.mean, r.stderr,
                      r.n_samples, r.correlation_time, state])
        status.append({
            "omega_bar": p.omega_bar, "gamma_a_bar": p.gamma_a_bar,
            "gamma_b_bar": p.gamma_b_bar, "theta": p.theta, "status": state,
        })
    return table, status


def _sweep(points, cfg, config):
    return sweep_entanglement(points, cfg, seed=int(config["seed"]),
                              n_traj=int(config["n_traj"]), jobs=int(config["jobs"]))


# ---------------------------------------------------------------- fig 1


def invert_binary_entropy(e: float) -> float:
    """The ``lambda`` in [0, 1/2] whose binary entropy is ``e``."""
    if e <= 0:
        return 0.0
    if e >= 1:
        return 0.5
    return brentq(lambda lam: binary_entropy(lam) - e, 0.0, 0.5, xtol=1e-300, rtol=1e-14)


PRINTED_EXPONENTS = {"small": 6.0, "large": -2.0}


def fit_power_law(gamma_a, lam, sigma_log=None) -> dict:
    """Weighted least-squares fit of ``log lambda = log c + k log gamma_a``.

    ``sigma_log`` are the standard errors of ``log lambda``; without them
    the fit is unweighted. The parameter covariance is scaled by the
    reduced chi-square when the scatter exceeds the stated errors.
    """
    x = np.log(np.asarray(gamma_a, dtype=float))
    y = np.log(np.asarray(lam, dtype=float))
    w = np.ones_like(x) if sigma_log is None else 1.0 / np.asarray(sigma_log, dtype=float) ** 2
    design = np.column_stack([np.ones_like(x), x])
    normal = design.T @ (w[:, None] * design)
    coef = np.linalg.solve(normal, design.T @ (w * y))
    resid = y - design @ coef
    dof = max(len(x) - 2, 1)
    chi2_red = float((w * resid**2).sum() / dof)
    cov = np.linalg.inv(normal) * (chi2_red if sigma_log is None else max(1.0, chi2_red))
    r_value = float(np.corrcoef(x, y)[0, 1]) if len(x) > 2 else math.copysign(1.0, coef[1])
    return {
        "exponent": float(coef[1]),
        "exponent_stderr": float(math.sqrt(cov[1, 1])),
        "prefactor": float(math.exp(coef[0])),
        "r_value": r_value,
        "chi2_reduced": chi2_red,
        "n_points": int(len(x)),
        "weighted": sigma_log is not None,
    }


def log_lambda_error(e: float, stderr: float) -> float:
    """Standard error of ``log lambda`` propagated from that of ``E = h(lambda)``."""
    lam = invert_binary_entropy(e)
    slope = math.log2((1.0 - lam) / lam)  # dE/dlambda
    return stderr / (lam * slope)


def scaling_report(omega_bar: float, gamma_b_bar: float, small, large, cfg: UnravelingConfig,
                   seed: int = 0, n_traj: int = 2, jobs: int = 1) -> dict:
    """Fitted log-log exponents of lambda(gamma_a) in both damping limits.

    ``lambda`` is recovered from the direct-detection entanglement by
    inverting the binary entropy, and the fit is weighted by the block
    standard errors (small-damping points are rare-event dominated and
    noisy). Each regime is compared with the printed asymptotic formula;
    agreement within 0.5 in the exponent is reported, not enforced.
    """
    report = {"omega_bar": omega_bar, "gamma_b_bar": gamma_b_bar, "regimes": {}, "rows": []}
    for regime, grid in (("small", small), ("large", large)):
        points = [SweepPoint(omega_bar, float(g), gamma_b_bar) for g in grid]
        rows = sweep_entanglement(points, cfg, seed=seed, n_traj=n_traj, jobs=jobs)
        good = [(r.point.gamma_a_bar, invert_binary_entropy(r.mean), log_lambda_error(r.mean, r.stderr))
                for r in rows if r.ok and 0 < r.mean < 1 and r.stderr > 0]
        for r in rows:
            params = r.point.params()
            printed = asymptotic_lambda(params, Regime(regime))
            lam = invert_binary_entropy(r.mean) if r.ok else math.nan
            report["rows"].append({
                "regime": regime, "gamma_a_bar": r.point.gamma_a_bar, "E": r.mean,
                "stderr": r.stderr, "lambda": lam, "lambda_printed": printed,
                "status": "ok" if r.ok else r.error,
            })
        entry = {"printed_exponent": PRINTED_EXPONENTS[regime], "n_failed": sum(not r.ok for r in rows)}
        if len(good) >= 2:
            fit = fit_power_law(*zip(*good))
            entry.update(fit)
            g_sorted = sorted(good)
            entry["local_exponents"] = [
                [g1, g2, math.log(l2 / l1) / math.log(g2 / g1)]
                for (g1, l1, _), (g2, l2, _) in zip(g_sorted, g_sorted[1:])
            ]
            entry["exponent_deviation"] = fit["exponent"] - PRINTED_EXPONENTS[regime]
            entry["within_target"] = abs(entry["exponent_deviation"]) <= 0.5
            g_ref = good[len(good) // 2][0]
            entry["printed_prefactor_ratio"] = (
                fit["prefactor"] * g_ref ** fit["exponent"]
                / asymptotic_lambda(SystemParams(omega_bar, g_ref, gamma_b_bar), Regime(regime))
            )
        else:
            entry["error"] = "fewer than two usable points"
        report["regimes"][regime] = entry
    return report


def run_fig1(config: dict) -> dict:
    """Direct-detection entanglement: time series, E vs gamma_a, E surface, scaling."""
    out = _out_dir(config)
    sec = config["fig1_direct"]
    om, gb = float(sec["omega_bar"]), float(sec["gamma_b_bar"])
    cfg = _traj_cfg(config, kind="direct")
    files, points = [], []

    series_cfg = cfg.replace(t_transient=0.0, t_total=float(sec["series_t_total"]))
    for i, ga in enumerate(sec["series_gamma_a"]):
        point = SweepPoint(om, float(ga), gb)
        traj = simulate_direct(point.params(), series_cfg, (int(config["seed"]), point.key(), 0))
        tag = fmt(float(ga))
        write_csv(out / f"entropy_series_gamma_a_{tag}.csv", ["t", "entropy"],
                  zip(traj.times, traj.entropy))
        write_csv(out / f"jumps_gamma_a_{tag}.csv", ["t", "channel"],
                  zip(traj.record.jump_times, traj.record.jump_channels))
        files += [f"entropy_series_gamma_a_{tag}.csv", f"jumps_gamma_a_{tag}.csv"]

    rows = _sweep([SweepPoint(om, float(g), gb) for g in sec["gamma_a_grid"]], cfg, config)
    table, status = _sweep_rows(rows)
    write_csv(out / "e_vs_gamma_a.csv", SWEEP_COLUMNS, table)
    files.append("e_vs_gamma_a.csv")
    points += status

    grid = [SweepPoint(om, float(ga), float(g)) for g in sec["surface_gamma_b"] for ga in sec["surface_gamma_a"]]
    table, status = _sweep_rows(_sweep(grid, cfg, config))
    write_csv(out / "e_surface.csv", SWEEP_COLUMNS, table)
    files.append("e_surface.csv")
    points += status

    extra = {}
    sc = sec.get("scaling")
    if sc:
        sc_cfg = cfg.replace(t_transient=float(sc["t_transient"]), t_total=float(sc["t_total"]))
        report = scaling_report(om, gb, sc["small_gamma_a"], sc["large_gamma_a"], sc_cfg,
                                seed=int(config["seed"]), n_traj=int(config["n_traj"]),
                                jobs=int(config["jobs"]))
        cols = ["regime", "gamma_a_bar", "E", "stderr", "lambda", "lambda_printed", "status"]
        write_csv(out / "asymptotic_scaling.csv", cols, ([r[c] for c in cols] for r in report["rows"]))
        fit_cols = ["regime", "exponent", "exponent_stderr", "printed_exponent", "exponent_deviation",
                    "within_target", "prefactor", "printed_prefactor_ratio", "r_value", "chi2_reduced",
                    "n_points", "weighted"]
        write_csv(out / "asymptotic_fit.csv", fit_cols,
                  ([name] + [entry.get(c, "") for c in fit_cols[1:]]
                   for name, entry in report["regimes"].items()))
        files += ["asymptotic_scaling.csv", "asymptotic_fit.csv"]
        extra["scaling_fit"] = report["regimes"]

    manifest = _manifest(config, files, points, **extra)
    write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------- fig 2


FIXED_POINT_COLUMNS = ["label", "gamma_a_bar", "xi", "branch", "alpha_re", "alpha_im",
                       "beta_re", "beta_im", "x", "y", "alpha_over_omega_re", "alpha_over_omega_im"]


def fixed_point_table(omega_bar: float, n_loci: int = 41) -> list[list]:
    """Fixed-point loci over gamma_a, including the four labelled points."""
    labelled = [
        ("1", 1e-3 / omega_bar),
        ("2", 1.0 / (2.0 * omega_bar)),
        ("3", 1.0 / (math.sqrt(2.0) * omega_bar)),
        ("4", 1e3 / omega_bar),
    ]
    sweep = [("", float(g)) for g in np.geomspace(1e-2 / omega_bar, 1e2 / omega_bar, n_loci)]
    rows = []
    for label, ga in sorted(labelled + sweep, key=lambda t: (t[1], t[0] == "")):
        for fp in fixed_points(SystemParams(omega_bar, ga, 0.0, n_max=1)):
            rows.append([label, ga, fp.xi, fp.branch.value, fp.alpha.real, fp.alpha.imag,
                         fp.beta.real, fp.beta.imag, fp.x, fp.y,
                         fp.alpha.real / omega_bar, fp.alpha.imag / omega_bar])
    return rows


def wigner_steady_state(omega_bar: float, gamma_a_bar: float | None = None, gamma_b_bar: float = 0.0,
                        points: int = 121):
    """Wigner function of the reduced cavity steady state (default at xi = 1/sqrt 2)."""
    if gamma_a_bar is None:
        gamma_a_bar = gamma_a_for_xi(1.0 / math.sqrt(2.0), omega_bar)
    params = SystemParams(omega_bar, gamma_a_bar, gamma_b_bar)
    rho = steady_state(build_liouvillian(params))
    lim = omega_bar + 3.0
    axis = np.linspace(-lim, lim, points)
    return wigner_function(partial_trace(rho, "A", params.dim_a), axis, axis), params


def _write_wigner(out: Path, grid) -> None:
    rows = ((grid.re[j], grid.im[i], grid.values[i, j])
            for i in range(len(grid.im)) for j in range(len(grid.re)))
    write_csv(out / "wigner.csv", ["re", "im", "W"], rows)


def _wigner_summary(grid) -> dict:
    return {
        "integral": grid.integral(),
        "local_maxima": [[z.real, z.imag] for z in grid.local_maxima()],
    }


def run_fig2(config: dict) -> dict:
    """Semiclassical fixed-point loci and the steady-state Wigner function."""
    out = _out_dir(config)
    sec = config["fig2_semiclassical"]
    write_csv(out / "fixed_points.csv", FIXED_POINT_COLUMNS,
              fixed_point_table(float(sec["omega_bar"]), int(sec["n_loci"])))
    grid, params = wigner_steady_state(float(sec["wigner_omega_bar"]), points=int(sec["wigner_points"]))
    _write_wigner(out, grid)
    manifest = _manifest(config, ["fixed_points.csv", "wigner.csv"],
                         wigner=_wigner_summary(grid) | {"gamma_a_bar": params.gamma_a_bar, "n_max": params.n_max})
    write_json(out / "manifest.json", manifest)
    return manifest


def run_fig2c(config: dict) -> dict:
    out = _out_dir(config)
    sec = config["fig2c_wigner"]
    grid, params = wigner_steady_state(float(sec["omega_bar"]), sec["gamma_a_bar"],
                                       float(sec["gamma_b_bar"]), int(sec["points"]))
    _write_wigner(out, grid)
    manifest = _manifest(config, ["wigner.csv"],
                         wigner=_wigner_summary(grid) | {"gamma_a_bar": params.gamma_a_bar, "n_max": params.n_max})
    write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------- fig 3


DASHED_COLUMNS = ["gamma_a_bar", "omega_bar", "xi", "e_phase_ensemble", "e_closed_form",
                  "literal_in_range_fraction", "quadrature", "n_phi"]


def dashed_curve(omega_bar: float, gamma_a_grid, n_phi: int = 64) -> list[list]:
    """Phase-ensemble entanglement vs gamma_a (midpoint rule, uniform phase).

    ``e_phase_ensemble`` averages entropies of explicitly built states;
    ``e_closed_form`` the corrected closed form. The fraction of phases at
    which the printed formula stays inside [0, 1] is reported alongside.
    """
    rows = []
    for ga in gamma_a_grid:
        params = SystemParams(omega_bar, float(ga), 0.0)
        if params.xi >= 1.0:
            rows.append([ga, omega_bar, params.xi, 0.0, 0.0, 1.0, "midpoint", n_phi])
            continue
        phis = phase_grid(n_phi)
        closed = [analytic_phase_ensemble_entropy(params, p).entropy for p in phis]
        literal = [analytic_phase_ensemble_entropy(params, p, literal=True).in_range for p in phis]
        rows.append([ga, omega_bar, params.xi, averaged_phase_entanglement(params, n_phi),
                     float(np.mean(closed)), float(np.mean(literal)), "midpoint", n_phi])
    return rows


def run_fig3(config: dict) -> dict:
    """Homodyne entanglement curves and surfaces, plus the analytic dashed curve."""
    out = _out_dir(config)
    sec = config["fig3_homodyne"]
    om, gb = float(sec["omega_bar"]), float(sec["gamma_b_bar"])
    cfg = _traj_cfg(config, kind="homodyne")
    files, points = [], []
    for label in sec["thetas"]:
        theta = parse_angle(label)
        grid = [SweepPoint(om, float(g), gb, theta) for g in sec["gamma_a_grid"]]
        table, status = _sweep_rows(_sweep(grid, cfg, config))
        name = f"e_vs_gamma_a_{angle_tag(label)}.csv"
        write_csv(out / name, SWEEP_COLUMNS, table)
        files.append(name)
        points += status
    for label in sec["surface_thetas"]:
        theta = parse_angle(label)
        grid = [SweepPoint(float(o), float(g), gb, theta)
                for o in sec["surface_omega"] for g in sec["surface_gamma_a"]]
        table, status = _sweep_rows(_sweep(grid, cfg, config))
        name = f"e_surface_{angle_tag(label)}.csv"
        write_csv(out / name, SWEEP_COLUMNS, table)
        files.append(name)
        points += status
    analytic_grid = sec["analytic_gamma_a"]
    if analytic_grid is None:
        analytic_grid = sorted(set(np.round(np.geomspace(0.1, 5.0, 40), 6).tolist())
                               | {float(g) for g in sec["gamma_a_grid"]})
    write_csv(out / "dashed_analytic.csv", DASHED_COLUMNS, dashed_curve(om, analytic_grid, int(sec["n_phi"])))
    files.append("dashed_analytic.csv")
    manifest = _manifest(config, files, points, phase_quadrature="midpoint, uniform phase weight")
    write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------- validate


def _check(name: str, passed: bool, hard: bool = True, **details) -> dict:
    return {"name": name, "passed": bool(passed), "hard": hard, "details": details}


def check_dark_state(omega_bar: float, gamma_b_bar: float, t_total: float, seed: int) -> dict:
    params = SystemParams(omega_bar, 0.0, gamma_b_bar)
    rho = steady_state(build_liouvillian(params))
    dark = product_state(coherent_state(omega_bar, params.n_max), np.array([1.0, 0.0], dtype=complex))
    dist = trace_distance(rho, ket_to_dm(dark))
    traj = simulate_direct(params, UnravelingConfig(t_transient=0.0, t_total=t_total), (seed, 0), psi0=dark)
    n_jumps = len(traj.record.jump_times)
    max_e = float(traj.entropy.max()) if len(traj.entropy) else 0.0
    return _check("dark_state", dist < 1e-6 and n_jumps == 0 and max_e < 1e-10,
                  trace_distance=dist, n_jumps=n_jumps, max_entropy=max_e, t_total=t_total)


def unraveling_mean_distance(params: SystemParams, kind: str, n_traj: int, t_final: float,
                             seed: int, jump_scale_a: float = 1.0, jobs: int = 1,
                             rho_ss: np.ndarray | None = None) -> float:
    """Trace distance between the trajectory-ensemble mean at ``t_final`` and the steady state."""
    if rho_ss is None:
        rho_ss = steady_state(build_liouvillian(params))
    cfg = UnravelingConfig(kind=kind, t_transient=t_final - 0.1, t_total=t_final,
                           jump_scale_a=jump_scale_a)
    states = ensemble_states(params, cfg, seed, n_traj, jobs=jobs)
    return trace_distance(ensemble_mean(states), rho_ss)


def check_unraveling_mean(params: SystemParams, n_traj: int, t_final: float, seed: int,
                          jump_scale_a: float = 1.0, jobs: int = 1) -> list[dict]:
    rho_ss = steady_state(build_liouvillian(params))
    bound = 3.0 / math.sqrt(n_traj)
    out = []
    for kind in ("direct", "homodyne"):
        if kind == "homodyne" and params.gamma_a_bar <= 0:
            out.append(_check("unraveling_mean_homodyne", True, hard=False,
                              skipped="homodyne needs gamma_a_bar > 0"))
            continue
        dist = unraveling_mean_distance(params, kind, n_traj, t_final, seed, jump_scale_a, jobs, rho_ss)
        out.append(_check(f"unraveling_mean_{kind}", dist <= bound, trace_distance=dist,
                          bound=bound, n_traj=n_traj, t_final=t_final))
    return out


def check_displacement_invariance(params: SystemParams, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    psi = np.zeros((2, params.dim_a), dtype=complex)
    psi[:, :8] = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
    psi = psi.ravel() / np.linalg.norm(psi)
    shifted = to_original_frame(psi, params)
    e0 = entanglement_entropy(psi, params.dim_a)
    e1 = entanglement_entropy(shifted, params.dim_a)
    disp = steady_state(build_liouvillian(params, Frame.DISPLACED))
    orig = steady_state(build_liouvillian(params, Frame.ORIGINAL))
    frame_dist = trace_distance(orig, to_original_frame(disp, params))
    return _check("displacement_invariance", abs(e0 - e1) < 1e-8 and frame_dist < 1e-6,
                  entropy_change=abs(e0 - e1), frame_trace_distance=frame_dist)


def check_ensemble_equivalence(omega_bar: float) -> dict:
    params = SystemParams(omega_bar, gamma_a_for_xi(1.0 / math.sqrt(2.0), omega_bar), 0.0)
    born = trace_distance(dichotomous_mixture(params), phase_average_density(params, 64, "born"))
    uniform = trace_distance(dichotomous_mixture(params), phase_average_density(params, 64, "uniform"))
    return _check("ensemble_equivalence", born < 1e-6, trace_distance=born,
                  uniform_weight_trace_distance=uniform)


def check_wigner(omega_bar: float) -> dict:
    grid, params = wigner_steady_state(omega_bar)
    peaks = grid.local_maxima()
    fps = [fp.alpha for fp in fixed_points(params) if fp.branch is not Branch.ABOVE]
    near = len(peaks) == 2 and all(min(abs(p - a) for p in peaks) <= 0.5 for a in fps)
    integral = grid.integral()
    return _check("wigner_normalization", abs(integral - 1.0) <= 2e-2 and near, integral=integral,
                  peaks=[[p.real, p.imag] for p in peaks])


def oracle_agreement(omega_bar: float, xis=(0.9, 0.8, 1 / math.sqrt(2.0), 0.5, 0.3, 0.15), n_phi: int = 32):
    """Closed-form vs explicit-state entropies of phase-ensemble members.

    Returns the largest deviation of the corrected closed form, and the
    largest deviation of the printed formula over phases where it stays
    in [0, 1] (the four phases per xi where ``A = 0`` are always included).
    """
    worst_corrected = 0.0
    worst_literal = 0.0
    n_literal = 0
    for xi in xis:
        params = SystemParams(omega_bar, gamma_a_for_xi(xi, omega_bar), 0.0)
        plus = fixed_points(params)[0]
        shift = omega_bar**2 * plus.x * plus.y
        zeros = [(k * math.pi / 2 - shift) % math.pi for k in range(8)]
        for phi in list(phase_grid(n_phi)) + sorted(set(np.round(zeros, 15))):
            oracle = phase_state_entropy(params, phi)
            corrected = analytic_phase_ensemble_entropy(params, phi)
            worst_corrected = max(worst_corrected, abs(corrected.entropy - oracle))
            literal = analytic_phase_ensemble_entropy(params, phi, literal=True, tol=1e-9)
            if literal.in_range:
                n_literal += 1
                worst_literal = max(worst_literal, abs(literal.entropy - oracle))
    return worst_corrected, worst_literal, n_literal


def check_oracle_agreement(omega_bar: float) -> list[dict]:
    corrected, literal, n_literal = oracle_agreement(omega_bar)
    return [
        _check("oracle_agreement", corrected <= 5e-2, max_deviation=corrected),
        _check("oracle_agreement_printed_formula", literal <= 5e-2, hard=False,
               max_deviation=literal, n_in_range=n_literal,
               note="printed denominator; reported only"),
    ]


def run_validate(config: dict) -> dict:
    """Cross-module invariant suite; the report's ``passed`` covers hard checks."""
    out = _out_dir(config)
    sec = config["validate"]
    seed = int(config["seed"])
    params = SystemParams(float(sec["omega_bar"]), float(sec["gamma_a_bar"]), float(sec["gamma_b_bar"]))
    checks = []

    def guarded(fn, *args, name, **kwargs):
        try:
            result = fn(*args, **kwargs)
            checks.extend(result if isinstance(result, list) else [result])
        except CQEDError as exc:
            checks.append(_check(name, False, error=f"{type(exc).__name__}: {exc}"))

    guarded(check_dark_state, params.omega_bar, params.gamma_b_bar or 0.5,
            float(sec["dark_t_total"]), seed, name="dark_state")
    guarded(check_unraveling_mean, params, int(sec["mean_n_traj"]), float(sec["mean_t"]), seed,
            float(sec["jump_scale_a"]), int(config["jobs"]), name="unraveling_mean")
    if params.gamma_a_bar > 0:
        guarded(check_displacement_invariance, params, seed, name="displacement_invariance")
    guarded(check_ensemble_equivalence, float(sec["oracle_omega_bar"]), name="ensemble_equivalence")
    guarded(check_wigner, float(sec["wigner_omega_bar"]), name="wigner_normalization")
    guarded(check_oracle_agreement, float(sec["oracle_omega_bar"]), name="oracle_agreement")

    passed = all(c["passed"] for c in checks if c["hard"])
    report = {"passed": passed, "checks": checks}
    write_json(out / "validation_report.json", report)
    manifest = _manifest(config, ["validation_report.json"], passed=passed)
    write_json(out / "manifest.json", manifest)
    return report


RUNNERS = {
    "fig1_direct": run_fig1,
    "fig2_semiclassical": run_fig2,
    "fig2c_wigner": run_fig2c,
    "fig3_homodyne": run_fig3,
    "validate": run_validate,
}
