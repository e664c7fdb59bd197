"""Single-band tilted-lattice dynamics in the Wannier basis.

    H = -(Delta/4) sum_n (|n><n+1| + h.c.) + d F2 sum_n n |n><n|

Sites run over n = -(N-1)/2 .. (N-1)/2 with open ends. Two independent
propagators are provided: the closed Bessel form of U(t) (``evolve_exact``)
and a fourth-order unitary rational stepper (``evolve_numeric``).
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .bessel import bessel_j, bessel_row
from .errors import DomainError, FreeComponentError, LatticeTruncationError, StepSizeError

log = logging.getLogger(__name__)

EDGE_TOLERANCE = 1e-8
NORM_TOLERANCE = 1e-9
BESSEL_TAIL = 40
# fraction of 1/||H|| allowed per numeric step
STEP_BUDGET = 0.01


@dataclass(frozen=True)
class TightBindingModel:
    Delta: float
    F2: float
    d: float
    n_sites: int

    def __post_init__(self):
        if self.n_sites < 3 or self.n_sites % 2 == 0:
            raise DomainError(f"n_sites must be odd and >= 3, got {self.n_sites}")
        if not self.Delta > 0:
            raise DomainError("Delta must be > 0")
        if not self.d > 0:
            raise DomainError("d must be > 0")

    @classmethod
    def for_packet(cls, Delta: float, F2: float, d: float, sigma: float) -> "TightBindingModel":
        return cls(Delta, F2, d, default_n_sites(Delta, F2, d, sigma))

    @property
    def half(self) -> int:
        return (self.n_sites - 1) // 2

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1)

    @property
    def positions(self) -> np.ndarray:
        return self.sites * self.d

    @property
    def omega_B(self) -> float:
        return self.d * self.F2

    @property
    def T_B(self) -> float:
        if self.F2 == 0:
            raise FreeComponentError("F2 = 0 has no Bloch period")
        return 2.0 * math.pi / abs(self.omega_B)

    @property
    def A(self) -> float:
        if self.F2 == 0:
            raise FreeComponentError("F2 = 0 has no oscillation amplitude")
        return self.Delta / (2.0 * self.F2)

    def hamiltonian(self) -> sp.csr_matrix:
        hop = -0.25 * self.Delta * np.ones(self.n_sites - 1)
        return sp.diags([self.omega_B * self.sites.astype(float), hop, hop], [0, 1, -1], format="csr")

    def max_stable_dt(self) -> float:
        """Largest step allowed for :func:`evolve_numeric`."""
        scale = max(self.Delta, abs(self.omega_B) * self.half)
        return STEP_BUDGET / scale


def default_n_sites(Delta: float, F2: float, d: float, sigma: float) -> int:
    """Lattice size covering oscillation range, Gaussian tails and Bessel spread."""
    if F2 == 0:
        return 2 * math.ceil(6 * sigma / d + 60) + 1
    omega_B = d * F2
    A = Delta / (2 * F2)
    return 2 * math.ceil(2 * abs(A) / d + 3 * sigma / d + abs(Delta / omega_B) + 60) + 1


@dataclass(frozen=True, eq=False)
class WavePacket:
    amplitudes: np.ndarray
    model: TightBindingModel
    t: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.model.n_sites,):
            raise ValueError(f"expected {self.model.n_sites} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def edge_occupancy(self) -> float:
        a = self.amplitudes
        return float(max(abs(a[0]) ** 2, abs(a[-1]) ** 2))

    def normalized(self) -> "WavePacket":
        return WavePacket(self.amplitudes / math.sqrt(self.norm), self.model, self.t)

    def overlap(self, other: "WavePacket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass
class TrajectorySeries:
    times: np.ndarray
    center: np.ndarray
    width: np.ndarray
    kappa: np.ndarray
    norm: np.ndarray
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("series times must increase monotonically")

    def columns(self) -> dict:
        return {
            "t_s": self.times,
            "x_center_m": self.center,
            "x_width_m": self.width,
            "kappa_rad_per_m": self.kappa,
            "norm": self.norm,
        }


def apply_hamiltonian(model: TightBindingModel, psi: WavePacket) -> WavePacket:
    f = psi.amplitudes
    out = model.omega_B * model.sites * f
    out[1:] += -0.25 * model.Delta * f[:-1]
    out[:-1] += -0.25 * model.Delta * f[1:]
    return WavePacket(out, model, psi.t)


def energy(psi: WavePacket) -> float:
    return float(np.vdot(psi.amplitudes, apply_hamiltonian(psi.model, psi).amplitudes).real)


def gaussian_packet(model: TightBindingModel, sigma: float, center: float = 0.0) -> WavePacket:
    """Sampled Gaussian f_n ~ exp(-(n d - center)^2 / (4 sigma^2)), renormalized."""
    d = model.d
    if sigma < d:
        raise DomainError(f"sigma = {sigma:g} m is narrower than one lattice constant")
    if sigma / d < 5:
        log.warning("sigma/d = %.3g is outside the broad-packet regime (< 5)", sigma / d)
    reach = abs(center) / d + 6 * sigma / d
    if reach > model.half:
        need = 2 * math.ceil(reach) + 1
        raise LatticeTruncationError(
            f"Gaussian (sigma={sigma:g} m, center={center:g} m) needs a 6-sigma margin; "
            f"use n_sites >= {need} (have {model.n_sites})",
            required_sites=need,
        )
    f = np.exp(-((model.positions - center) ** 2) / (4 * sigma**2))
    f = f / np.sqrt(np.sum(f * f))
    return WavePacket(f.astype(complex), model)


def random_packet(model: TightBindingModel, rng: np.random.Generator) -> WavePacket:
    f = rng.normal(size=model.n_sites) + 1j * rng.normal(size=model.n_sites)
    return WavePacket(f / np.linalg.norm(f), model)


def bloch_state(model: TightBindingModel, kappa: float) -> WavePacket:
    f = np.exp(1j * model.sites * kappa * model.d)
    return WavePacket(f / math.sqrt(model.n_sites), model)


def wannier_stark_state(model: TightBindingModel, m_index: int) -> WavePacket:
    """Ladder eigenstate localized at site ``m_index`` with energy m d F2."""
    if model.F2 == 0:
        raise FreeComponentError("F2 = 0: no Wannier-Stark ladder")
    x = model.Delta / (2 * model.omega_B)
    orders = model.sites - m_index
    width = int(np.max(np.abs(orders)))
    row = bessel_row(x, max(width, 1))
    f = row.values[orders + width]
    if abs(x) + BESSEL_TAIL > model.half - abs(m_index):
        log.warning("Wannier-Stark state m=%d is truncated by the lattice edge", m_index)
    return WavePacket(f / np.linalg.norm(f), model)


def wannier_stark_energy(model: TightBindingModel, m_index: int) -> float:
    return m_index * model.omega_B


def _propagator_argument(model: TightBindingModel, t: float) -> float:
    wB = model.omega_B
    if wB == 0:
        return 0.5 * model.Delta * t  # force-free limit
    return (model.Delta / wB) * math.sin(0.5 * wB * t)


def propagator_element(model: TightBindingModel, mu: int, nu: int, t: float) -> complex:
    """<mu|U(t)|nu> in the closed Bessel form (F2 = 0 taken as the limit)."""
    wB = model.omega_B
    k = nu - mu
    return (
        bessel_j(k, _propagator_argument(model, t))
        * np.exp(-1j * mu * wB * t)
        * np.exp(-1j * k * (wB * t - math.pi) / 2)
    )


def propagator_matrix(model: TightBindingModel, t: float) -> np.ndarray:
    """Dense U(t) restricted to the lattice sites (infinite-lattice elements)."""
    N = model.n_sites
    wB = model.omega_B
    row = bessel_row(_propagator_argument(model, t), N - 1)
    k = row.orders
    kernel = row.values * np.exp(-1j * k * (wB * t - math.pi) / 2)
    i = np.arange(N)
    U = kernel[(i[None, :] - i[:, None]) + N - 1]
    return np.exp(-1j * model.sites * wB * t)[:, None] * U


def _truncation_error(psi0: WavePacket, note: str) -> LatticeTruncationError:
    model = psi0.model
    occupied = np.nonzero(np.abs(psi0.amplitudes) ** 2 > 1e-12)[0]
    reach = int(np.max(np.abs(model.sites[occupied]))) if occupied.size else 0
    spread = abs(model.Delta / model.omega_B) if model.F2 else 0.0
    need = 2 * (reach + math.ceil(spread) + BESSEL_TAIL) + 1
    return LatticeTruncationError(
        f"{note}; the trajectory leaves the {model.n_sites}-site lattice, use n_sites >= {need}",
        required_sites=need,
    )


def _guard(psi0: WavePacket, out: WavePacket) -> WavePacket:
    if abs(out.norm - psi0.norm) > NORM_TOLERANCE:
        raise _truncation_error(psi0, f"norm changed by {out.norm - psi0.norm:.3e}")
    if psi0.edge_occupancy < EDGE_TOLERANCE <= out.edge_occupancy:
        raise _truncation_error(psi0, f"edge occupancy reached {out.edge_occupancy:.3e}")
    return out


def evolve_exact(psi0: WavePacket, t: float) -> WavePacket:
    """psi(t) = U(t) psi(0) with the Bessel-function propagator."""
    model = psi0.model
    if t == 0:
        return WavePacket(psi0.amplitudes.copy(), model, psi0.t)
    out = WavePacket(propagator_matrix(model, t) @ psi0.amplitudes, model, psi0.t + t)
    return _guard(psi0, out)


@functools.lru_cache(maxsize=16)
def _pade_factors(model: TightBindingModel, dt: float):
    # exp(-Z) ~ (1 - Z/2 + Z^2/12) / (1 + Z/2 + Z^2/12), Z = i dt H, split into
    # two unitary first-order factors over the complex roots of the denominator
    r1 = -3.0 + 1j * math.sqrt(3.0)
    r2 = r1.conjugate()
    Z = (1j * dt) * model.hamiltonian().astype(complex)
    eye = sp.identity(model.n_sites, dtype=complex, format="csc")
    lu1 = splu((eye - Z / r1).tocsc())
    lu2 = splu((eye - Z / r2).tocsc())
    return lu1, (eye + Z / r2).tocsr(), lu2, (eye + Z / r1).tocsr()


def _pade_steps(model: TightBindingModel, f: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    lu1, b1, lu2, b2 = _pade_factors(model, dt)
    for _ in range(n_steps):
        f = lu1.solve(b1 @ f)
        f = lu2.solve(b2 @ f)
    return f


def _check_dt(model: TightBindingModel, dt: float) -> None:
    limit = model.max_stable_dt()
    if not 0 < dt <= limit * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:g} s exceeds the step budget; use dt <= {limit:g} s", suggested=limit)


def evolve_numeric(psi0: WavePacket, t: float, dt: Optional[float] = None) -> WavePacket:
    """Step i d/dt psi = H psi with the (2,2) Pade rational approximant.

    The scheme is exactly unitary and fourth order in ``dt``. ``dt`` defaults
    to the step budget; the final step count is rounded up so that the
    effective step never exceeds the requested one.
    """
    model = psi0.model
    if dt is None:
        dt = model.max_stable_dt()
    _check_dt(model, dt)
    if t == 0:
        return WavePacket(psi0.amplitudes.copy(), model, psi0.t)
    n = math.ceil(abs(t) / dt - 1e-9)
    f = _pade_steps(model, psi0.amplitudes, t / n, n)
    return _guard(psi0, WavePacket(f, model, psi0.t + t))


def broad_packet_amplitude(model: TightBindingModel, n, t: float, sigma: float):
    """Rigid-Gaussian approximation to f_n(t) for broad packets launched at x = 0."""
    ratio = sigma / model.d
    if ratio < 5:
        raise DomainError(f"sigma/d = {ratio:.3g} < 5: not a broad packet")
    if ratio < 10:
        log.warning("sigma/d = %.3g: broad-packet formula is marginal", ratio)
    if model.F2 == 0:
        raise FreeComponentError("F2 = 0 has no Bloch oscillation")
    wB = model.omega_B
    n = np.asarray(n)
    n_t = model.A * (math.cos(wB * t) - 1.0) / model.d
    env = np.exp(-(model.d**2) * (n - n_t) ** 2 / (4 * sigma**2)) / (2 * math.pi * ratio**2) ** 0.25
    return env * np.exp(-1j * n * wB * t + 1j * model.Delta * math.sin(wB * t) / (2 * wB))


def analytic_center(params, t):
    """x_c(t) = A [cos(omega_B t) - 1]; ``params`` needs ``A`` and ``omega_B``."""
    if params.A is None:
        raise DomainError("oscillation amplitude unknown: supply Delta")
    return params.A * (np.cos(params.omega_B * np.asarray(t)) - 1.0)


def x_of_z(params, z):
    """Spatial oscillation A [1 - cos(zeta z)] along the beam (magnitude curve)."""
    return params.A * (1.0 - np.cos(params.zeta * np.asarray(z)))


def wrap_quasimomentum(kappa, d: float):
    half = math.pi / d
    return np.mod(np.asarray(kappa) + half, 2 * half) - half


def quasimomentum_drift(F2: float, t, d: float):
    """kappa(t) = F2 t folded into [-pi/d, pi/d).

    Pass the force acting on the particle; with the tilt +d F2 n of the
    Hamiltonian that force is -F2, which is what the Bloch-state projection
    of an evolved packet follows.
    """
    return wrap_quasimomentum(F2 * np.asarray(t, dtype=float), d)


def packet_moments(psi: WavePacket) -> tuple[float, float, float]:
    p = np.abs(psi.amplitudes) ** 2
    norm = float(p.sum())
    x = psi.model.positions
    center = float(np.sum(x * p) / norm)
    var = float(np.sum((x - center) ** 2 * p) / norm)
    return center, math.sqrt(max(var, 0.0)), norm


def packet_spectrum(psi: WavePacket, n_kappa: int = 4096):
    """|<kappa|psi>|^2 on a uniform grid of the first Brillouin zone.

    Uses Bloch states |kappa> = sum_n exp(i n kappa d)|n>.
    """
    d = psi.model.d
    kappa = (np.arange(n_kappa) - n_kappa // 2) * (2 * math.pi / (d * n_kappa))
    phase = np.exp(-1j * np.outer(kappa * d, psi.model.sites))
    amp = phase @ psi.amplitudes
    return kappa, np.abs(amp) ** 2


def peak_quasimomentum(psi: WavePacket, n_kappa: int = 4096) -> float:
    kappa, spec = packet_spectrum(psi, n_kappa)
    return float(kappa[np.argmax(spec)])


def fidelity(a: WavePacket, b: WavePacket) -> float:
    """Phase-insensitive overlap |<a|b>| of two normalized packets."""
    return abs(a.overlap(b))


def align_global_phase(psi: WavePacket, reference: WavePacket) -> WavePacket:
    """Rotate ``psi`` so its largest-magnitude amplitude matches ``reference`` in phase."""
    i = int(np.argmax(np.abs(reference.amplitudes)))
    rot = np.exp(1j * (np.angle(reference.amplitudes[i]) - np.angle(psi.amplitudes[i])))
    return WavePacket(psi.amplitudes * rot, psi.model, psi.t)


def _series_from_states(states, times, label, d, n_kappa) -> TrajectorySeries:
    moments = np.array([packet_moments(s) for s in states])
    kappa = np.array([peak_quasimomentum(s, n_kappa) for s in states])
    return TrajectorySeries(
        times=np.asarray(times, dtype=float),
        center=moments[:, 0],
        width=moments[:, 1],
        kappa=kappa,
        norm=moments[:, 2],
        label=label,
    )


def series_exact(psi0: WavePacket, times, n_kappa: int = 4096, keep_states: bool = False) -> TrajectorySeries:
    states = [evolve_exact(psi0, float(t)) for t in times]
    out = _series_from_states(states, times, "exact", psi0.model.d, n_kappa)
    if keep_states:
        out.extra["states"] = states
    return out


def series_numeric(psi0: WavePacket, times, dt: Optional[float] = None, n_kappa: int = 4096,
                   keep_states: bool = False) -> TrajectorySeries:
    """Numeric evolution sampled at ``times`` (which must start at 0)."""
    model = psi0.model
    dt_max = model.max_stable_dt() if dt is None else dt
    _check_dt(model, dt_max)
    times = np.asarray(times, dtype=float)
    states = []
    f = psi0.amplitudes.copy()
    t_prev = 0.0
    for t in times:
        span = t - t_prev
        if span > 0:
            n = math.ceil(span / dt_max - 1e-9)
            f = _pade_steps(model, f, span / n, n)
        states.append(WavePacket(f.copy(), model, t))
        t_prev = t
    _guard(psi0, states[-1])
    out = _series_from_states(states, times, "numeric", model.d, n_kappa)
    if keep_states:
        out.extra["states"] = states
    return out


def series_analytic(model: TightBindingModel, times, sigma: float) -> TrajectorySeries:
    """Rigid-Gaussian center law with the semiclassical quasimomentum."""
    times = np.asarray(times, dtype=float)
    return TrajectorySeries(
        times=times,
        center=analytic_center(model, times),
        width=np.full(times.shape, sigma),
        kappa=quasimomentum_drift(-model.F2, times, model.d),
        norm=np.ones(times.shape),
        label="analytic",
    )


def sample_times(T_B: float, periods: float, samples_per_period: int) -> np.ndarray:
    n = int(round(periods * samples_per_period))
    return np.linspace(0.0, periods * T_B, n + 1)
