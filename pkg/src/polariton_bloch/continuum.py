"""Grid propagation of i d/dt psi = [P^2/2m + V(x) + F x] psi.

Split-step scheme: exact kinetic phases in the discrete momentum
representation, exact potential phases on the grid, arranged symmetrically
(second order in dt, unitary, time reversible). The grid is periodic; an
occupancy guard on the outer 5% of each side stands in for absorbing edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .band_structure import BandStructure, KronigPenneySpec, compute_bands
from .errors import LatticeTruncationError, StepSizeError
from .lattice import TrajectorySeries

PHASE_BUDGET = 0.05
EDGE_FRACTION = 0.05
EDGE_PROBABILITY = 1e-6
MIN_POINTS_PER_BARRIER = 8


@dataclass(frozen=True, eq=False)
class GridState:
    x_min: float
    dx: float
    psi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        n = len(self.psi)
        if n < 2 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two, got {n}")
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=complex))

    @property
    def n_points(self) -> int:
        return len(self.psi)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * self.n_points

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(self.density) * self.dx)

    def edge_probability(self) -> float:
        k = max(1, int(EDGE_FRACTION * self.n_points))
        p = self.density
        return float(max(p[:k].sum(), p[-k:].sum()) * self.dx)

    def moments(self) -> tuple[float, float, float]:
        p = self.density * self.dx
        norm = float(p.sum())
        x = self.x
        c = float(np.sum(x * p) / norm)
        var = float(np.sum((x - c) ** 2 * p) / norm)
        return c, math.sqrt(max(var, 0.0)), norm


def next_pow2(n: float) -> int:
    return 1 << max(1, math.ceil(math.log2(max(n, 2))))


def sample_potential(spec: KronigPenneySpec, F: float, x):
    """V0 on barriers (x mod d in [0, a)), zero in wells, plus the tilt F x."""
    x = np.asarray(x, dtype=float)
    d, a = spec.d, spec.a
    tol = 1e-9 * d
    r = np.mod(x, d)
    r = np.where(np.abs(r - d) < tol, 0.0, r)
    barrier = r < a - tol
    return np.where(barrier, spec.V0, 0.0) + F * x


def gaussian_state(x_min: float, dx: float, n_points: int, sigma: float, center: float = 0.0) -> GridState:
    x = x_min + dx * np.arange(n_points)
    psi = np.exp(-((x - center) ** 2) / (4 * sigma**2)).astype(complex)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * dx)
    return GridState(x_min, dx, psi)


def kinetic_energies(n_points: int, dx: float, m_eff: float) -> np.ndarray:
    k = 2 * math.pi * sfft.fftfreq(n_points, dx)
    return k * k / (2 * m_eff)


def max_grid_dt(V: np.ndarray, dx: float, m_eff: float) -> float:
    k_max = math.pi / dx
    return PHASE_BUDGET / max(float(np.max(np.abs(V))), k_max**2 / (2 * m_eff))


class GridPropagator:
    """Precomputed split-step phases for one grid, potential and step."""

    def __init__(self, V: np.ndarray, dx: float, m_eff: float, dt: float, barrier_width: Optional[float] = None):
        V = np.asarray(V, dtype=float)
        limit = max_grid_dt(V, dx, m_eff)
        if abs(dt) > limit * (1 + 1e-12):
            raise StepSizeError(f"|dt| = {abs(dt):g} s breaks the phase budget; use |dt| <= {limit:g} s",
                                suggested=limit)
        if barrier_width is not None and dx > barrier_width / MIN_POINTS_PER_BARRIER * (1 + 1e-12):
            raise StepSizeError(
                f"dx = {dx:g} m does not resolve the barrier; use dx <= {barrier_width / MIN_POINTS_PER_BARRIER:g} m",
                suggested=barrier_width / MIN_POINTS_PER_BARRIER,
            )
        self.dt = dt
        self.dx = dx
        self.half_potential = np.exp(-0.5j * dt * V)
        self.full_potential = self.half_potential**2
        self.kinetic = np.exp(-1j * dt * kinetic_energies(len(V), dx, m_eff))

    def steps(self, psi: np.ndarray, n: int) -> np.ndarray:
        if n == 0:
            return psi.copy()
        psi = psi * self.half_potential
        for _ in range(n - 1):
            psi = sfft.ifft(self.kinetic * sfft.fft(psi, overwrite_x=True), overwrite_x=True)
            psi *= self.full_potential
        psi = sfft.ifft(self.kinetic * sfft.fft(psi, overwrite_x=True), overwrite_x=True)
        return psi * self.half_potential


def _check_edges(state: GridState) -> None:
    p = state.edge_probability()
    if p >= EDGE_PROBABILITY:
        raise LatticeTruncationError(
            f"probability {p:.3e} reached the outer {EDGE_FRACTION:.0%} of the grid "
            f"[{state.x_min:.4g}, {state.x_max:.4g}] m at t = {state.t:.4g} s; widen the domain"
        )


def evolve_grid(state: GridState, V: np.ndarray, t: float, dt: Optional[float], m_eff: float,
                barrier_width: Optional[float] = None) -> GridState:
    """Propagate ``state`` by ``t`` (negative runs backwards) in potential ``V``.

    ``dt`` is a magnitude; ``None`` picks the largest step inside the phase
    budget. ``barrier_width`` enables the barrier-resolution check.
    """
    if t == 0:
        return replace(state, psi=state.psi.copy())
    if dt is None:
        dt = max_grid_dt(V, state.dx, m_eff)
    n = math.ceil(abs(t) / abs(dt) - 1e-9)
    prop = GridPropagator(V, state.dx, m_eff, t / n, barrier_width)
    out = GridState(state.x_min, state.dx, prop.steps(state.psi, n), state.t + t)
    _check_edges(out)
    return out


def cell_ground_state(spec: KronigPenneySpec, points_per_cell: int, kappa: float = 0.0, n_states: int = 1):
    """Eigenpairs of the one-cell Bloch Hamiltonian on the propagation grid.

    Periodic part u(x) on x_j = j d / points_per_cell with the same spectral
    kinetic operator and pointwise potential as :class:`GridPropagator`.
    """
    n = points_per_cell
    dx = spec.d / n
    G = 2 * math.pi * sfft.fftfreq(n, dx)
    F = sfft.fft(np.eye(n), axis=0, norm="ortho")
    H = F.conj().T @ np.diag((G + kappa) ** 2 / (2 * spec.m_eff)) @ F
    H = H + np.diag(sample_potential(spec, 0.0, dx * np.arange(n)))
    H = 0.5 * (H + H.conj().T)
    w, v = np.linalg.eigh(H)
    return w[:n_states], v[:, :n_states]


def grid_band_edges(spec: KronigPenneySpec, kappa_samples: int, points_per_cell: int = 256,
                    n_bands: int = 2) -> BandStructure:
    """Band extrema from diagonalizing the cell Bloch Hamiltonian on a kappa grid."""
    if kappa_samples < 2:
        raise ValueError("kappa_samples must be >= 2")
    kappas = np.linspace(0.0, math.pi / spec.d, kappa_samples)
    E = np.array([cell_ground_state(spec, points_per_cell, k, n_bands)[0] for k in kappas])
    bands = [(float(E[:, j].min()), float(E[:, j].max())) for j in range(n_bands)]
    return BandStructure(bands, meta={"kappa_samples": kappa_samples, "points_per_cell": points_per_cell})


def ground_band_packet(spec: KronigPenneySpec, x_min: float, points_per_cell: int, n_points: int,
                       sigma: float, center: float = 0.0) -> GridState:
    """Gaussian envelope times the kappa = 0 ground-band Bloch function.

    ``x_min`` must be a multiple of d so the tiled cell lines up with the
    grid potential.
    """
    dx = spec.d / points_per_cell
    cells = x_min / spec.d
    if abs(cells - round(cells)) > 1e-9:
        raise ValueError("x_min must be a whole number of lattice constants")
    _, v = cell_ground_state(spec, points_per_cell)
    u = np.abs(v[:, 0])
    idx = np.mod(np.arange(n_points) + int(round(cells)) * points_per_cell, points_per_cell)
    x = x_min + dx * np.arange(n_points)
    psi = np.exp(-((x - center) ** 2) / (4 * sigma**2)) * u[idx]
    psi = psi.astype(complex) / math.sqrt(np.sum(np.abs(psi) ** 2) * dx)
    return GridState(x_min, dx, psi)


@dataclass
class WashboardGrid:
    spec: KronigPenneySpec
    F: float
    points_per_cell: int
    n_points: int
    x_min: float
    A: float
    Delta: float
    bands: BandStructure = field(repr=False, default=None)

    @property
    def dx(self) -> float:
        return self.spec.d / self.points_per_cell

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    def potential(self) -> np.ndarray:
        return sample_potential(self.spec, self.F, self.x)


def washboard_grid(spec: KronigPenneySpec, F: float, sigma: float, points_per_cell: int = 16) -> WashboardGrid:
    """Grid spanning at least [-(2A + 10 sigma), 10 sigma] with whole cells."""
    bands = compute_bands(spec, 2)
    A = bands.Delta / (2 * abs(F))
    dx = spec.d / points_per_cell
    length = 2 * A + 20 * sigma
    n = next_pow2(length / dx)
    mid = -A * math.copysign(1.0, F)
    x_min = math.floor((mid - 0.5 * n * dx) / spec.d) * spec.d
    return WashboardGrid(spec, F, points_per_cell, n, x_min, A, bands.Delta, bands)


def washboard_run(spec: KronigPenneySpec, F: float, sigma: float, times, points_per_cell: int = 16,
                  dt: Optional[float] = None, dressed: bool = True) -> TrajectorySeries:
    """Center/width series of a broad packet in the tilted Kronig-Penney lattice.

    The series stores absolute centers; ``extra['x0']`` is the initial one
    and ``extra['A']`` the amplitude implied by the ground-band width.
    """
    grid = washboard_grid(spec, F, sigma, points_per_cell)
    if dressed:
        state = ground_band_packet(spec, grid.x_min, points_per_cell, grid.n_points, sigma)
    else:
        state = gaussian_state(grid.x_min, grid.dx, grid.n_points, sigma)
    V = grid.potential()
    dt_max = max_grid_dt(V, grid.dx, spec.m_eff) if dt is None else dt
    times = np.asarray(times, dtype=float)
    spans = np.diff(times)
    n_sub = math.ceil(float(np.max(spans)) / dt_max - 1e-9)
    step = float(spans[0]) / n_sub
    if np.any(np.abs(spans - spans[0]) > 1e-9 * spans[0]):
        raise ValueError("washboard_run needs uniformly spaced sample times")
    prop = GridPropagator(V, grid.dx, spec.m_eff, step, barrier_width=spec.a)
    rows = [state.moments()]
    psi = state.psi
    for i in range(1, len(times)):
        psi = prop.steps(psi, n_sub)
        current = GridState(grid.x_min, grid.dx, psi, times[i])
        _check_edges(current)
        rows.append(current.moments())
    rows = np.array(rows)
    return TrajectorySeries(
        times=times,
        center=rows[:, 0],
        width=rows[:, 1],
        kappa=np.full(times.shape, np.nan),
        norm=rows[:, 2],
        label="continuum",
        extra={"x0": float(rows[0, 0]), "A": grid.A, "Delta": grid.Delta, "dt": step,
               "n_points": grid.n_points, "dx": grid.dx, "final_state": current},
    )


def free_component_run(sigma: float, t_final: float, m_eff: float, v_g: float, samples: int = 101,
                       points_per_sigma: int = 16, dt: Optional[float] = None) -> TrajectorySeries:
    """Force-free Gaussian with zero mean momentum; the z-center rides at v_g t."""
    spread = math.sqrt(1 + (t_final / (2 * m_eff * sigma**2)) ** 2)
    half = 12 * sigma * spread
    dx = sigma / points_per_sigma
    n = next_pow2(2 * half / dx)
    state = gaussian_state(-0.5 * n * dx, dx, n, sigma)
    V = np.zeros(n)
    dt_max = max_grid_dt(V, dx, m_eff) if dt is None else dt
    times = np.linspace(0.0, t_final, samples)
    n_sub = math.ceil((times[1] - times[0]) / dt_max - 1e-9)
    prop = GridPropagator(V, dx, m_eff, (times[1] - times[0]) / n_sub)
    rows = [state.moments()]
    psi = state.psi
    for t in times[1:]:
        psi = prop.steps(psi, n_sub)
        current = GridState(state.x_min, dx, psi, t)
        _check_edges(current)
        rows.append(current.moments())
    rows = np.array(rows)
    return TrajectorySeries(
        times=times,
        center=rows[:, 0],
        width=rows[:, 1],
        kappa=np.zeros(times.shape),
        norm=rows[:, 2],
        label="free",
        extra={"z_center": v_g * times, "final_state": current},
    )


def free_gaussian_width(sigma: float, t, m_eff: float):
    """sigma(t) = sigma sqrt(1 + (t / (2 m sigma^2))^2)."""
    return sigma * np.sqrt(1 + (np.asarray(t) / (2 * m_eff * sigma**2)) ** 2)


def peak_times(times, x, kind: str = "max") -> np.ndarray:
    """Times of local extrema with three-point parabolic refinement.

    A start point that is itself extreme relative to its neighbour counts as
    a peak (trajectories launched at a turning point).
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(x, dtype=float) * (1 if kind == "max" else -1)
    out = []
    if y[0] >= y[1]:
        out.append(times[0])
    for i in range(1, len(y) - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1]:
            den = y[i - 1] - 2 * y[i] + y[i + 1]
            shift = 0.5 * (y[i - 1] - y[i + 1]) / den if den != 0 else 0.0
            out.append(times[i] + shift * (times[i + 1] - times[i]))
    return np.array(out)


def free_component_grid(sigma: float, times, m_eff: float, x_out, points_per_sigma: int = 16) -> np.ndarray:
    """|psi(x, t)|^2 of the force-free Gaussian, resampled onto ``x_out``.

    Rows follow ``times`` (which must start at 0 and be uniformly spaced),
    columns follow ``x_out``.
    """
    times = np.asarray(times, dtype=float)
    x_out = np.asarray(x_out, dtype=float)
    spread = float(free_gaussian_width(sigma, times[-1], m_eff)) / sigma
    half = max(12 * sigma * spread, float(np.max(np.abs(x_out))) * 1.1)
    dx = sigma / points_per_sigma
    n = next_pow2(2 * half / dx)
    state = gaussian_state(-0.5 * n * dx, dx, n, sigma)
    V = np.zeros(n)
    span = times[1] - times[0]
    n_sub = math.ceil(span / max_grid_dt(V, dx, m_eff) - 1e-9)
    prop = GridPropagator(V, dx, m_eff, span / n_sub)
    x = state.x
    rows = [np.interp(x_out, x, state.density)]
    psi = state.psi
    for t in times[1:]:
        psi = prop.steps(psi, n_sub)
        _check_edges(GridState(state.x_min, dx, psi, t))
        rows.append(np.interp(x_out, x, np.abs(psi) ** 2))
    return np.array(rows)
