"""Effective single-particle parameters of the two dark-state-polariton components.

Internal unit system: hbar = 1, so every energy (potential heights, band
widths, Zeeman shifts) is an angular frequency in rad/s and forces are in
rad/s/m. Magnetic moments enter in J/T and are divided by hbar on ingestion.
Published "kHz" numbers are converted with :func:`khz_to_internal`, where the
``ordinary`` reading multiplies by 2*pi*1e3 and the ``angular`` reading by 1e3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy import constants

from .errors import DomainError, FreeComponentError

C_LIGHT = constants.c
HBAR = constants.hbar
MU_BOHR = constants.physical_constants["Bohr magneton"][0]

CONVENTIONS = ("ordinary", "angular")

# 1 microgauss / mm in tesla / metre
MICROGAUSS_PER_MM = 1e-10 / 1e-3


def khz_to_internal(value_khz: float, convention: str = "ordinary") -> float:
    if convention == "ordinary":
        return 2.0 * math.pi * 1e3 * value_khz
    if convention == "angular":
        return 1e3 * value_khz
    raise ValueError(f"unknown frequency convention {convention!r}; use one of {CONVENTIONS}")


def internal_to_khz(value: float, convention: str = "ordinary") -> float:
    return value / khz_to_internal(1.0, convention)


@dataclass(frozen=True)
class AtomicLevels:
    """Magnetic moments (J/T) of the ground states |1>, |2> and |s>."""

    mu_1: float
    mu_2: float
    mu_s: float

    def __post_init__(self):
        for name in ("mu_1", "mu_2", "mu_s"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @classmethod
    def from_quantum_numbers(cls, m_F, g_F, mu_B: float = MU_BOHR) -> "AtomicLevels":
        """Build from per-state (m_F, g_F) triples, mu = m_F * g_F * mu_B."""
        mus = [mf * gf * mu_B for mf, gf in zip(m_F, g_F)]
        return cls(*mus)


@dataclass(frozen=True)
class FieldParams:
    """Optical and magnetic inputs.

    The mixing angle is fixed either by the collective coupling and Rabi
    frequency (``gsqrtN``, ``Omega``) or, when those are unknown, by the
    effective transverse mass ``m_eff``. Exactly one route must be given.
    """

    lambda_probe: float
    B1: float
    d: float
    m_eff: Optional[float] = None
    gsqrtN: Optional[float] = None
    Omega: Optional[float] = None

    def __post_init__(self):
        if not self.lambda_probe > 0:
            raise DomainError("lambda_probe must be > 0")
        if not self.d > 0:
            raise DomainError("lattice constant d must be > 0")
        by_coupling = self.gsqrtN is not None or self.Omega is not None
        if by_coupling == (self.m_eff is not None):
            raise DomainError("give either m_eff or both gsqrtN and Omega")
        if by_coupling:
            if self.gsqrtN is None or self.Omega is None:
                raise DomainError("gsqrtN and Omega must be given together")
            if not self.Omega > 0:
                raise DomainError("Omega must be > 0 (EIT needs a driving field)")
            if self.gsqrtN < 0:
                raise DomainError("gsqrtN must be >= 0")
        elif not self.m_eff > 0:
            raise DomainError("m_eff must be > 0")

    @property
    def k_probe(self) -> float:
        return 2.0 * math.pi / self.lambda_probe


@dataclass(frozen=True)
class PolaritonParams:
    theta: float
    sin2_theta: float
    v_g: float
    m_eff: float
    k_probe: float
    mu_eff_1: float
    mu_eff_2: float
    F_1: float
    F_2: float
    d: float
    omega_B: Optional[float] = None
    T_B: Optional[float] = None
    zeta: Optional[float] = None
    Delta: Optional[float] = None
    A: Optional[float] = None

    def force(self, component: int) -> float:
        return {1: self.F_1, 2: self.F_2}[component]


def mixing_angle(gsqrtN: float, Omega: float) -> float:
    """theta = arctan(g sqrt(N) / Omega), in [0, pi/2)."""
    if not Omega > 0:
        raise DomainError(f"Omega must be > 0, got {Omega!r}")
    if gsqrtN < 0:
        raise DomainError(f"gsqrtN must be >= 0, got {gsqrtN!r}")
    return math.atan2(gsqrtN, Omega)


def theta_from_group_velocity(v_g: float) -> float:
    """Invert v_g = c cos^2(theta)."""
    if not 0 < v_g <= C_LIGHT:
        raise DomainError(f"group velocity must lie in (0, c], got {v_g!r}")
    return math.acos(math.sqrt(v_g / C_LIGHT))


def polariton_kinematics(theta: float, k_probe: float) -> tuple[float, float]:
    """Group velocity c cos^2(theta) and transverse mass k / v_g."""
    if not 0 <= theta < math.pi / 2:
        raise DomainError(f"theta must lie in [0, pi/2), got {theta!r}")
    v_g = C_LIGHT * math.cos(theta) ** 2
    if v_g == 0:
        raise DomainError("theta too close to pi/2: effective mass diverges")
    return v_g, k_probe / v_g


def effective_moments_and_forces(atom: AtomicLevels, theta: float, B1: float, sin2_theta=None):
    """Effective moments (J/T) and static forces (rad/s/m) of both components.

    mu_eff_j = (mu_s - mu_j) sin^2(theta); F_j = mu_eff_j * B1 / hbar.
    ``sin2_theta`` may be passed explicitly when theta sits so close to pi/2
    that sin(theta)**2 would lose digits.
    """
    if not 0 <= theta < math.pi / 2:
        raise DomainError(f"theta must lie in [0, pi/2), got {theta!r}")
    s2 = math.sin(theta) ** 2 if sin2_theta is None else sin2_theta
    mu_eff_1 = (atom.mu_s - atom.mu_1) * s2
    mu_eff_2 = (atom.mu_s - atom.mu_2) * s2
    return mu_eff_1, mu_eff_2, mu_eff_1 * B1 / HBAR, mu_eff_2 * B1 / HBAR


def oscillation_observables(Delta: Optional[float], F_2: float, d: float, v_g: float):
    """Bloch frequency, amplitude, period and spatial wavenumber.

    Returns ``(omega_B, A, T_B, zeta)``; ``A`` is None when ``Delta`` is None.
    """
    if F_2 == 0:
        raise FreeComponentError("F_2 = 0: the component propagates freely, no Bloch oscillation")
    if not d > 0 or not v_g > 0:
        raise DomainError("d and v_g must be > 0")
    omega_B = d * F_2
    A = None if Delta is None else Delta / (2.0 * F_2)
    return omega_B, A, 2.0 * math.pi / omega_B, omega_B / v_g


def zeeman_detunings(atom: AtomicLevels, B: float) -> tuple[float, float, float]:
    """delta_i = mu_i B / hbar for |1>, |2>, |s> (diagnostics only)."""
    return atom.mu_1 * B / HBAR, atom.mu_2 * B / HBAR, atom.mu_s * B / HBAR


def derive_polariton_params(atom: AtomicLevels, fields: FieldParams, Delta: Optional[float] = None) -> PolaritonParams:
    """Chain the EIT relations from raw inputs to the oscillation observables."""
    k = fields.k_probe
    if fields.m_eff is not None:
        v_g = k / fields.m_eff
        theta = theta_from_group_velocity(v_g)
        sin2 = 1.0 - v_g / C_LIGHT
        m_eff = fields.m_eff
    else:
        theta = mixing_angle(fields.gsqrtN, fields.Omega)
        v_g, m_eff = polariton_kinematics(theta, k)
        sin2 = math.sin(theta) ** 2
    mu1, mu2, F1, F2 = effective_moments_and_forces(atom, theta, fields.B1, sin2_theta=sin2)
    extra = {}
    if F2 != 0:
        omega_B, A, T_B, zeta = oscillation_observables(Delta, F2, fields.d, v_g)
        extra = dict(omega_B=omega_B, A=A, T_B=T_B, zeta=zeta)
    return PolaritonParams(
        theta=theta,
        sin2_theta=sin2,
        v_g=v_g,
        m_eff=m_eff,
        k_probe=k,
        mu_eff_1=mu1,
        mu_eff_2=mu2,
        F_1=F1,
        F_2=F2,
        d=fields.d,
        Delta=Delta,
        **extra,
    )


@dataclass(frozen=True)
class Rb87Published:
    """Rb-87 D1-line numbers in their published units."""

    V0_khz: float = 79.15
    d_um: float = 8.0
    m_eff: float = 7.9e5  # s m^-2
    lambda_nm: float = 795.0
    B1_microgauss_per_mm: float = 8.5e4
    mu_2: float = -4.64e-24  # J/T
    mu_s: float = 4.64e-24  # J/T
    Delta_khz: float = 74.9
    E_gap_khz: float = 266.0
    sigma_mm: float = 0.1


RB87 = Rb87Published()


def rb87_preset(frequency_convention: str = "ordinary", barrier_fraction: float = 0.5):
    """Rb-87 parameter set converted to internal units.

    Returns ``(AtomicLevels, FieldParams, KronigPenneySpec)``. |1> carries the
    same moment as |s>, which makes the first component force-free.
    """
    from .band_structure import KronigPenneySpec

    atom = AtomicLevels(mu_1=RB87.mu_s, mu_2=RB87.mu_2, mu_s=RB87.mu_s)
    d = RB87.d_um * 1e-6
    fields = FieldParams(
        lambda_probe=RB87.lambda_nm * 1e-9,
        B1=RB87.B1_microgauss_per_mm * MICROGAUSS_PER_MM,
        d=d,
        m_eff=RB87.m_eff,
    )
    V0 = khz_to_internal(RB87.V0_khz, frequency_convention)
    lattice = KronigPenneySpec.from_fraction(d, barrier_fraction, V0, RB87.m_eff)
    return atom, fields, lattice


def rb87_published_roundtrip(frequency_convention: str = "ordinary") -> dict:
    """Convert the preset back to published units (consistency diagnostics)."""
    atom, fields, lattice = rb87_preset(frequency_convention)
    return {
        "V0_khz": internal_to_khz(lattice.V0, frequency_convention),
        "d_um": lattice.d / 1e-6,
        "m_eff": lattice.m_eff,
        "lambda_nm": fields.lambda_probe / 1e-9,
        "B1_microgauss_per_mm": fields.B1 / MICROGAUSS_PER_MM,
        "mu_2": atom.mu_2,
        "mu_s": atom.mu_s,
    }
