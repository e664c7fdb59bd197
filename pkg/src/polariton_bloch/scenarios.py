"""Scenario runners: wire a validated config through the engines.

Each runner returns ``(RunSummary, tables)``. Every number in the summary
comes straight from an engine call; nothing is recomputed here.
"""

from __future__ import annotations

import hashlib
import math
import platform
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from . import continuum as co
from . import lattice as tb
from .band_structure import (
    compute_bands,
    dispersion_function,
    scan_published_bands,
    single_band_validity,
    transfer_matrix_half_trace,
)
from .config import ScenarioConfig, format_config
from .eit_params import derive_polariton_params, internal_to_khz
from .output import Table, emit_outputs

# numerical-check tolerances
TOL_PROPAGATORS = 1e-6
TOL_NORM = 1e-9
TOL_CENTER_TB = 0.05  # fraction of A
TOL_WIDTH_DRIFT = 0.05
TOL_REVIVAL = 1e-8
TOL_CENTER_CONTINUUM = 0.08  # fraction of A
TOL_PERIOD = 0.02
TOL_RESIDUAL = 1e-6
TOL_EDGE = 1e-8
TOL_ORACLE_G = 1e-10
TOL_GRID_BANDS = 1e-3
TOL_FREE_CENTER = 1e-9
TOL_FREE_WIDTH = 1e-4
SHAPE_CLAIM_GROWTH = 1e-3
GRID_BAND_POINTS_PER_CELL = 256


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": float(self.measured),
                "tolerance": float(self.tolerance), "detail": self.detail}


def check_le(name: str, measured: float, tolerance: float, detail: str = "") -> Check:
    return Check(name, bool(measured <= tolerance), float(measured), float(tolerance), detail)


@dataclass
class RunSummary:
    scenario: str
    derived: dict
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c.as_dict() for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "derived": self.derived,
            "checks": [c.as_dict() for c in self.checks],
            "results": self.results,
            "provenance": self.provenance,
        }


@dataclass
class Setup:
    """Derived quantities shared by all scenarios."""

    cfg: ScenarioConfig
    params: object
    spec: object
    bands: object
    Delta: float
    E_gap: float
    validity: object

    @property
    def sigma(self) -> float:
        return self.cfg["simulation.sigma"]

    def model(self) -> tb.TightBindingModel:
        n = self.cfg["simulation.n_sites"]
        p = self.params
        if n == 0:
            n = tb.default_n_sites(self.Delta, p.F_2, p.d, self.sigma + abs(self.cfg["simulation.center"]))
        return tb.TightBindingModel(self.Delta, p.F_2, p.d, n)

    def dt(self):
        dt = self.cfg["simulation.dt"]
        return None if dt == 0 else dt


def prepare(cfg: ScenarioConfig) -> Setup:
    atom, fields = cfg.atom(), cfg.fields()
    base = derive_polariton_params(atom, fields)
    spec = cfg.lattice(base.m_eff)
    bands = compute_bands(spec, cfg["simulation.n_bands"])
    if cfg["lattice.delta_source"] == "published":
        Delta, E_gap = cfg.khz("lattice.Delta"), cfg.khz("lattice.E_gap")
    else:
        Delta, E_gap = bands.Delta, bands.E_gap
    params = derive_polariton_params(atom, fields, Delta)
    validity = single_band_validity(params.F_2, params.d, E_gap, cfg["simulation.validity_threshold"])
    return Setup(cfg, params, spec, bands, Delta, E_gap, validity)


def derived_block(s: Setup) -> dict:
    p = s.params
    conv = s.cfg.convention
    out = {
        "theta": p.theta,
        "sin2_theta": p.sin2_theta,
        "v_g": p.v_g,
        "m_eff": p.m_eff,
        "k_probe": p.k_probe,
        "mu_eff_1": p.mu_eff_1,
        "mu_eff_2": p.mu_eff_2,
        "F_1": p.F_1,
        "F_2": p.F_2,
        "omega_B": p.omega_B,
        "T_B": p.T_B,
        "A": p.A,
        "A_over_d": None if p.A is None else p.A / p.d,
        "zeta": p.zeta,
        "Delta": s.Delta,
        "E_gap": s.E_gap,
        "delta_source": s.cfg["lattice.delta_source"],
        "frequency_convention": conv,
        "validity_ratio": s.validity.ratio,
        "validity_threshold": s.validity.threshold,
        "single_band_valid": s.validity.valid,
        "sigma": s.sigma,
        "sigma_over_d": s.sigma / p.d,
        "lattice_d": s.spec.d,
        "lattice_a": s.spec.a,
        "lattice_b": s.spec.b,
        "V0": s.spec.V0,
        "kronig_penney_Delta": s.bands.Delta,
        "kronig_penney_E_gap": s.bands.E_gap,
        "kronig_penney_Delta_khz": internal_to_khz(s.bands.Delta, conv),
        "kronig_penney_E_gap_khz": internal_to_khz(s.bands.E_gap, conv),
    }
    return out


def provenance(cfg: ScenarioConfig) -> dict:
    text = format_config(cfg)
    return {
        "input_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "normalized_config": text,
        "versions": {
            "polariton_bloch": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def _run_band_structure(s: Setup):
    cfg, spec, bands = s.cfg, s.spec, s.bands
    conv = cfg.convention
    checks, tables, results = [], {}, {}
    edges = np.array(bands.bands)
    g_edges = dispersion_function(spec, edges.ravel())
    checks.append(check_le("band_edges_on_unit_circle", float(np.max(np.abs(np.abs(g_edges) - 1))), TOL_EDGE))
    gaps = bands.gaps + [math.nan]
    tables["band_edges"] = Table(
        ["band", "E_low_rad_s", "E_high_rad_s", "width_rad_s", "gap_above_rad_s", "E_low_khz", "E_high_khz"],
        [np.arange(len(edges)), edges[:, 0], edges[:, 1], edges[:, 1] - edges[:, 0], np.array(gaps),
         internal_to_khz(1.0, conv) * edges[:, 0], internal_to_khz(1.0, conv) * edges[:, 1]],
    )
    E_top = edges[-1, 1] * 1.05
    E = np.linspace(E_top / cfg["simulation.dispersion_samples"], E_top, cfg["simulation.dispersion_samples"])
    g = dispersion_function(spec, E)
    g_tm = transfer_matrix_half_trace(spec, E)
    mismatch = float(np.max(np.abs(g - g_tm) / np.maximum(1.0, np.abs(g))))
    checks.append(check_le("transfer_matrix_oracle", mismatch, TOL_ORACLE_G, "relative to max(1, |g|)"))
    kappa = np.where(np.abs(g) <= 1, np.arccos(np.clip(g, -1, 1)) / spec.d, math.nan)
    tables["dispersion"] = Table(["E_rad_s", "g", "kappa_rad_per_m"], [E, g, kappa])

    grid = co.grid_band_edges(spec, cfg["simulation.kappa_samples"], GRID_BAND_POINTS_PER_CELL, 2)
    dDelta = abs(grid.Delta - bands.Delta) / bands.Delta
    dGap = abs(grid.E_gap - bands.E_gap) / bands.E_gap
    checks.append(check_le("grid_oracle_Delta", dDelta, TOL_GRID_BANDS, "relative"))
    checks.append(check_le("grid_oracle_E_gap", dGap, TOL_GRID_BANDS, "relative"))
    results["grid_oracle"] = {"Delta": grid.Delta, "E_gap": grid.E_gap, "points_per_cell": GRID_BAND_POINTS_PER_CELL,
                              "kappa_samples": cfg["simulation.kappa_samples"]}
    results["bands"] = [{"E_low": lo, "E_high": hi} for lo, hi in bands.bands]

    if cfg["simulation.band_scan"]:
        fits = scan_published_bands(cfg["lattice.V0"], spec.d, spec.m_eff, cfg["lattice.Delta"], cfg["lattice.E_gap"])
        tables["geometry_scan"] = Table(
            ["convention", "barrier_fraction", "Delta_khz", "E_gap_khz", "second_band_width_khz", "misfit"],
            [[f.convention for f in fits]] + [np.array([getattr(f, k) for f in fits]) for k in
                                              ("barrier_fraction", "Delta", "E_gap", "second_band_width", "misfit")],
        )
        best = fits[0]
        results["best_fit"] = {
            "convention": best.convention,
            "barrier_fraction": best.barrier_fraction,
            "Delta_khz": best.Delta,
            "E_gap_khz": best.E_gap,
            "second_band_width_khz": best.second_band_width,
            "misfit": best.misfit,
            "target_Delta_khz": cfg["lattice.Delta"],
            "target_E_gap_khz": cfg["lattice.E_gap"],
        }
    return checks, tables, results


def _trajectory_checks(prefix: str, series, model, sigma0: float, offset: float) -> list:
    A = abs(model.A)
    dev = np.max(np.abs(series.center - offset - tb.analytic_center(model, series.times)))
    drift = np.max(np.abs(series.width / series.width[0] - 1))
    return [
        check_le(f"{prefix}_center_vs_analytic", dev / A, TOL_CENTER_TB, "fraction of A"),
        check_le(f"{prefix}_width_drift", drift, TOL_WIDTH_DRIFT, "relative to initial width"),
        check_le(f"{prefix}_norm", float(np.max(np.abs(series.norm - 1))), TOL_NORM),
    ]


def continuum_checks(series, F: float, d: float) -> tuple[list, dict]:
    """Compare a washboard run with its own single-band prediction."""
    A = series.extra["A"]
    omega_B = F * d
    T_B = 2 * math.pi / abs(omega_B)
    disp = series.center - series.extra["x0"]
    dev = float(np.max(np.abs(disp - A * (np.cos(omega_B * series.times) - 1))))
    peaks = co.peak_times(series.times, disp)
    period = float(np.mean(np.diff(peaks))) if len(peaks) > 1 else math.nan
    period_err = abs(period / T_B - 1) if math.isfinite(period) else math.inf
    checks = [
        check_le("continuum_center_vs_analytic", dev / A, TOL_CENTER_CONTINUUM, "fraction of band-derived A"),
        check_le("continuum_period", period_err, TOL_PERIOD, "peak-to-peak timing, relative"),
        check_le("continuum_norm", float(np.max(np.abs(series.norm - 1))),
                 TOL_NORM * max(1.0, series.times[-1] / 1e-3), "per simulated ms"),
    ]
    return checks, {"A": A, "max_deviation": dev, "period": period, "T_B": T_B,
                    "n_points": series.extra["n_points"], "dx": series.extra["dx"], "dt": series.extra["dt"]}


def _run_bloch_oscillation(s: Setup):
    cfg = s.cfg
    model = s.model()
    center = cfg["simulation.center"]
    psi0 = tb.gaussian_packet(model, s.sigma, center)
    times = tb.sample_times(model.T_B, cfg["simulation.periods"], cfg["simulation.samples_per_period"])
    exact = tb.series_exact(psi0, times, keep_states=True)
    numeric = tb.series_numeric(psi0, times, s.dt(), keep_states=True)
    analytic = tb.series_analytic(model, times, s.sigma)
    analytic.center = analytic.center + center
    diff = max(float(np.max(np.abs(a.amplitudes - b.amplitudes)))
               for a, b in zip(exact.extra.pop("states"), numeric.extra.pop("states")))
    checks = [check_le("exact_vs_numeric", diff, TOL_PROPAGATORS, "max-norm over all samples")]
    checks += _trajectory_checks("exact", exact, model, s.sigma, center)
    checks += _trajectory_checks("numeric", numeric, model, s.sigma, center)
    revivals = []
    for k in range(1, int(math.floor(cfg["simulation.periods"] + 1e-9)) + 1):
        revivals.append(1 - tb.fidelity(psi0, tb.evolve_exact(psi0, k * model.T_B)))
    if revivals:
        checks.append(check_le("revival", max(revivals), TOL_REVIVAL, "1 - |<psi(0)|psi(k T_B)>|"))
    dk = 2 * math.pi / (4096 * model.d)
    kappa_err = np.abs(tb.wrap_quasimomentum(exact.kappa - analytic.kappa, model.d))
    checks.append(check_le("quasimomentum_tracking", float(np.max(kappa_err)) / dk, 1.0, "momentum-grid cells"))
    tables = {"trajectory_exact": Table.from_series(exact), "trajectory_numeric": Table.from_series(numeric),
              "trajectory_analytic": Table.from_series(analytic)}
    results = {"n_sites": model.n_sites, "samples": len(times), "exact_vs_numeric": diff,
               "center_error_exact_over_A": checks[1].measured}
    if cfg["simulation.continuum"]:
        cont = co.washboard_run(s.spec, s.params.F_2, s.sigma, times, cfg["simulation.points_per_cell"])
        c_checks, c_res = continuum_checks(cont, s.params.F_2, s.spec.d)
        checks += c_checks
        results["continuum"] = dict(c_res, x0=cont.extra["x0"])
        tables["trajectory_continuum"] = Table.from_series(cont)
    return checks, tables, results


def _run_free_component(s: Setup):
    cfg, p = s.cfg, s.params
    t_final = cfg["simulation.free_time"]
    run = co.free_component_run(s.sigma, t_final, p.m_eff, p.v_g, cfg["simulation.free_samples"])
    law = co.free_gaussian_width(s.sigma, run.times, p.m_eff)
    growth = float(run.width[-1] / run.width[0] - 1)
    checks = [
        check_le("free_center", float(np.max(np.abs(run.center))), TOL_FREE_CENTER, "metres"),
        check_le("free_width_law", float(np.max(np.abs(run.width / law - 1))), TOL_FREE_WIDTH, "relative"),
        check_le("free_z_drift", float(np.max(np.abs(run.extra["z_center"] - p.v_g * run.times))), 0.0, "metres"),
        check_le("free_norm", float(np.max(np.abs(run.norm - 1))), TOL_NORM * max(1.0, t_final / 1e-3), "per ms"),
    ]
    tau = 2 * p.m_eff * s.sigma**2
    results = {
        "F_1": p.F_1,
        "spreading_time": tau,
        "width_growth": growth,
        # the "keeps its shape" reading: informational, not a numerical check
        "shape_claim_threshold": SHAPE_CLAIM_GROWTH,
        "shape_claim_holds": bool(growth < SHAPE_CLAIM_GROWTH),
    }
    tables = {"trajectory_free": Table.from_series(run),
              "free_z": Table(["t_s", "z_center_m"], [run.times, run.extra["z_center"]])}
    return checks, tables, results


def _run_wannier_stark(s: Setup):
    cfg = s.cfg
    model = s.model()
    H = model.hamiltonian()
    ms = np.arange(cfg["simulation.wannier_m_min"], cfg["simulation.wannier_m_max"] + 1)
    energies, centers, residuals = [], [], []
    state_rows = [[], [], [], []]
    for m in ms:
        psi = tb.wannier_stark_state(model, int(m))
        E = tb.wannier_stark_energy(model, int(m))
        residuals.append(float(np.linalg.norm(H @ psi.amplitudes - E * psi.amplitudes)))
        energies.append(E)
        centers.append(tb.packet_moments(psi)[0])
        state_rows[0].append(np.full(model.n_sites, m))
        state_rows[1].append(model.sites)
        state_rows[2].append(psi.amplitudes.real)
        state_rows[3].append(psi.amplitudes.imag)
    energies, centers = np.array(energies), np.array(centers)
    checks = [
        check_le("wannier_stark_residual", max(residuals), TOL_RESIDUAL, "rad/s"),
        check_le("wannier_stark_center", float(np.max(np.abs(centers - ms * model.d))) / model.d, 1e-6, "units of d"),
    ]
    if len(ms) > 1:
        spacing = np.diff(energies)
        checks.append(check_le("ladder_spacing", float(np.max(np.abs(spacing / model.omega_B - 1))), 1e-12,
                               "relative to d F2"))
    tables = {
        "ladder": Table(["m", "energy_rad_s", "center_m", "residual_rad_s"], [ms, energies, centers, np.array(residuals)]),
        "states": Table(["m", "n", "re", "im"], [np.concatenate(c) for c in state_rows]),
    }
    return checks, tables, {"n_sites": model.n_sites, "spacing": model.omega_B}


def _ridge(x, t, density):
    w = density / density.sum(axis=1, keepdims=True)
    return w @ x


def _run_figure3(s: Setup):
    cfg, p = s.cfg, s.params
    model = s.model()
    psi0 = tb.gaussian_packet(model, s.sigma)
    times = tb.sample_times(model.T_B, cfg["simulation.periods"], cfg["simulation.samples_per_period"])
    x = model.positions
    rho2 = np.array([np.abs(tb.evolve_exact(psi0, float(t)).amplitudes) ** 2 / model.d for t in times])
    rho1 = co.free_component_grid(s.sigma, times, p.m_eff, x)
    r2 = _ridge(x, times, rho2)
    r1 = _ridge(x, times, rho1)
    peaks = co.peak_times(times, r2)
    period = float(np.mean(np.diff(peaks))) if len(peaks) > 1 else math.nan
    span = float(r2.max() - r2.min())
    two_A = 2 * abs(model.A)
    checks = [
        check_le("psi2_ridge_period", abs(period / model.T_B - 1) if math.isfinite(period) else math.inf,
                 TOL_PERIOD, "relative"),
        check_le("psi2_ridge_extent", abs(span / two_A - 1), TOL_WIDTH_DRIFT, "peak-to-peak vs 2A, relative"),
        check_le("psi1_ridge_center", float(np.max(np.abs(r1))), TOL_FREE_CENTER, "metres"),
    ]
    tables = {
        "grid_psi2": Table.from_grid(x, times, rho2),
        "grid_psi1": Table.from_grid(x, times, rho1),
        "ridges": Table(["t_s", "psi2_center_m", "psi1_center_m"], [times, r2, r1]),
    }
    results = {"n_x": len(x), "n_t": len(times), "psi2_period": period, "psi2_peak_to_peak": span,
               "psi2_peak_to_peak_over_d": span / model.d}
    return checks, tables, results


def _run_validity(s: Setup):
    v = s.validity
    checks = [Check("single_band_validity", v.valid, v.ratio, v.threshold, "F2 d / E_gap")]
    tables = {"validity": Table(["F2_d_rad_s", "E_gap_rad_s", "ratio", "threshold", "valid"],
                                [[s.params.F_2 * s.params.d], [s.E_gap], [v.ratio], [v.threshold], [v.valid]])}
    return checks, tables, {}


RUNNERS = {
    "band-structure": _run_band_structure,
    "bloch-oscillation": _run_bloch_oscillation,
    "free-component": _run_free_component,
    "wannier-stark": _run_wannier_stark,
    "figure3": _run_figure3,
    "validity-check": _run_validity,
}


class ScenarioError(RuntimeError):
    """An engine failure, tagged with the scenario that triggered it."""

    def __init__(self, scenario: str, cause: Exception):
        super().__init__(f"scenario {scenario!r} failed: {type(cause).__name__}: {cause}")
        self.scenario = scenario
        self.cause = cause


def compute_scenario(cfg: ScenarioConfig):
    """Run the configured scenario in memory; returns ``(RunSummary, tables)``."""
    try:
        setup = prepare(cfg)
        checks, tables, results = RUNNERS[cfg.scenario](setup)
    except Exception as exc:
        raise ScenarioError(cfg.scenario, exc) from exc
    summary = RunSummary(cfg.scenario, derived_block(setup), checks, results, provenance(cfg))
    return summary, tables


def run_scenario(cfg: ScenarioConfig, directory=None, fmt=None):
    """Run and, if ``directory`` is given, write outputs there.

    Returns ``(RunSummary, written_paths)``.
    """
    summary, tables = compute_scenario(cfg)
    paths = []
    if directory is not None:
        paths = emit_outputs(tables, summary.as_dict(), fmt or cfg["output.format"], directory)
    return summary, paths
