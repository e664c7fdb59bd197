"""Kronig-Penney band structure of the rectangular periodic potential.

Energies are angular frequencies (rad/s) and the mass is in s/m^2, i.e.
hbar = 1 throughout. One unit cell holds a barrier of height ``V0`` on
[0, a) and a well on [-b, 0), with a + b = d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import BandSearchError, DomainError

# |E - V0| below this fraction of V0 uses the series form of the barrier factors
BRANCH_WINDOW = 1e-6
POINTS_PER_FREE_BAND = 64
_MAX_MESH_DOUBLINGS = 8
_MAX_CEILING_DOUBLINGS = 12


@dataclass(frozen=True)
class KronigPenneySpec:
    d: float
    a: float
    b: float
    V0: float
    m_eff: float

    def __post_init__(self):
        for name in ("d", "a", "b", "V0", "m_eff"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"KronigPenneySpec.{name} must be finite and > 0, got {v!r}")
        if abs(self.a + self.b - self.d) > 1e-12 * self.d:
            raise DomainError(f"a + b = {self.a + self.b!r} does not equal d = {self.d!r}")

    @classmethod
    def from_fraction(cls, d: float, barrier_fraction: float, V0: float, m_eff: float):
        a = barrier_fraction * d
        return cls(d=d, a=a, b=d - a, V0=V0, m_eff=m_eff)

    @property
    def recoil(self) -> float:
        """Free-particle energy at the zone edge, (pi/d)^2 / 2m."""
        return (math.pi / self.d) ** 2 / (2.0 * self.m_eff)


@dataclass(frozen=True)
class BandStructure:
    bands: list[tuple[float, float]]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for lo, hi in self.bands:
            if not lo <= hi:
                raise ValueError(f"band ({lo}, {hi}) is inverted")
        for (_, hi), (lo, _) in zip(self.bands, self.bands[1:]):
            if lo < hi:
                raise ValueError("bands overlap or are out of order")

    @property
    def Delta(self) -> float:
        """Width of the ground band."""
        lo, hi = self.bands[0]
        return hi - lo

    @property
    def E_gap(self) -> float:
        """Gap between the ground band and the first excited band."""
        if len(self.bands) < 2:
            raise ValueError("need at least two bands for a gap")
        return self.bands[1][0] - self.bands[0][1]

    @property
    def widths(self) -> list[float]:
        return [hi - lo for lo, hi in self.bands]

    @property
    def gaps(self) -> list[float]:
        return [b[0] - a[1] for a, b in zip(self.bands, self.bands[1:])]


def _barrier_factors(lam, a):
    """cosh(sqrt(lam) a) and sinh(sqrt(lam) a)/sqrt(lam), analytic in lam."""
    lam = np.asarray(lam, dtype=float)
    ch = np.empty_like(lam)
    sh = np.empty_like(lam)
    pos = lam > 0
    neg = lam < 0
    q = np.sqrt(lam[pos])
    ch[pos] = np.cosh(q * a)
    sh[pos] = np.sinh(q * a) / q
    q = np.sqrt(-lam[neg])
    ch[neg] = np.cos(q * a)
    sh[neg] = np.sin(q * a) / q
    zero = ~(pos | neg)
    ch[zero] = 1.0
    sh[zero] = a
    return ch, sh


def _barrier_series(lam, a, terms=6):
    u = np.asarray(lam, dtype=float) * a * a
    ch = np.zeros_like(u)
    sh = np.zeros_like(u)
    term_c = np.ones_like(u)
    term_s = np.ones_like(u)
    for j in range(terms):
        ch += term_c
        sh += term_s
        term_c = term_c * u / ((2 * j + 1) * (2 * j + 2))
        term_s = term_s * u / ((2 * j + 2) * (2 * j + 3))
    return ch, a * sh


def dispersion_function(spec: KronigPenneySpec, E):
    """Kronig-Penney discriminant g(E); allowed energies have g = cos(kappa d).

    Accepts a scalar or an array of energies (rad/s).
    """
    E_arr = np.asarray(E, dtype=float)
    if np.any(~np.isfinite(E_arr)) or np.any(E_arr <= 0):
        raise DomainError("dispersion_function requires finite E > 0")
    m, a, b, V0 = spec.m_eff, spec.a, spec.b, spec.V0
    k1 = np.sqrt(2.0 * m * E_arr)
    lam = 2.0 * m * (V0 - E_arr)
    ch, sh = _barrier_factors(lam, a)
    near = np.abs(E_arr - V0) < BRANCH_WINDOW * V0
    if np.any(near):
        ch_s, sh_s = _barrier_series(lam[near], a)
        ch[near] = ch_s
        sh[near] = sh_s
    g = np.cos(k1 * b) * ch + (lam - k1 * k1) / (2.0 * k1) * np.sin(k1 * b) * sh
    if np.ndim(E) == 0:
        return float(g)
    return g


def transfer_matrix_half_trace(spec: KronigPenneySpec, E):
    """Half-trace of the one-cell transfer matrix for (psi, psi').

    Built as the product of the well and barrier propagation matrices with
    complex wavenumbers, so it shares no branch logic with
    :func:`dispersion_function`.
    """
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    out = np.empty(E_arr.shape)
    for i, e in enumerate(E_arr):
        mat = np.eye(2, dtype=complex)
        for width, pot in ((spec.b, 0.0), (spec.a, spec.V0)):
            k = np.sqrt(complex(2.0 * spec.m_eff * (e - pot)))
            if k == 0:
                seg = np.array([[1.0, width], [0.0, 1.0]], dtype=complex)
            else:
                c, s = np.cos(k * width), np.sin(k * width)
                seg = np.array([[c, s / k], [-k * s, c]])
            mat = seg @ mat
        out[i] = 0.5 * np.trace(mat).real
    if np.ndim(E) == 0:
        return float(out[0])
    return out


def _band_edges_on_mesh(spec, E_hi, n_points):
    E = np.linspace(E_hi * 1e-12, E_hi, n_points)
    g = dispersion_function(spec, E)
    return E, g


def _refine_extremum(spec, lo, hi, sign):
    # sign=+1 locates a maximum of g, -1 a minimum
    res = optimize.minimize_scalar(
        lambda e: -sign * dispersion_function(spec, e),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13 * hi},
    )
    return float(res.x), float(-res.fun * sign)


def _edge(spec, lo, hi, level):
    return float(
        optimize.bisect(
            lambda e: dispersion_function(spec, e) - level, lo, hi, xtol=1e-300, rtol=1e-13, maxiter=400
        )
    )


def _bands_from_mesh(spec, E, g):
    """Complete bands below the mesh ceiling, plus the extremum count."""
    dg = np.diff(g)
    turn = np.nonzero(np.sign(dg[:-1]) != np.sign(dg[1:]))[0] + 1
    # monotone segments between refined extrema
    knots = [(E[0], g[0])]
    for i in turn:
        sign = 1 if dg[i - 1] > 0 else -1
        knots.append(_refine_extremum(spec, E[i - 1], E[i + 1], sign))
    # each monotone segment ending in a refined extremum holds exactly one band;
    # the open segment above the last extremum is discarded
    bands = []
    for (e0, g0), (e1, g1) in zip(knots, knots[1:]):
        if g0 >= g1:
            top, bot = 1.0, -1.0  # g decreasing: enters band at +1, leaves at -1
        else:
            top, bot = -1.0, 1.0
        enter = e0 if abs(g0) <= 1.0 else _edge(spec, e0, e1, top)
        leave = e1 if abs(g1) <= 1.0 else _edge(spec, e0, e1, bot)
        bands.append((enter, leave))
    return bands, len(turn)


def compute_bands(spec: KronigPenneySpec, n_bands: int) -> BandStructure:
    """Lowest ``n_bands`` allowed bands of the Kronig-Penney potential."""
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    E_hi = spec.V0 + spec.recoil * (n_bands + 1) ** 2
    for _ in range(_MAX_CEILING_DOUBLINGS):
        n_free = max(1, math.ceil(math.sqrt(2 * spec.m_eff * E_hi) * spec.d / math.pi))
        n_points = POINTS_PER_FREE_BAND * n_free
        previous = None
        for _ in range(_MAX_MESH_DOUBLINGS):
            E, g = _band_edges_on_mesh(spec, E_hi, n_points)
            bands, n_turn = _bands_from_mesh(spec, E, g)
            if previous is not None and n_turn == previous:
                break
            previous = n_turn
            n_points *= 2
        if len(bands) >= n_bands:
            return BandStructure(
                bands=bands[:n_bands],
                meta={"ceiling": E_hi, "mesh_points": n_points},
            )
        found = len(bands)
        E_hi *= 2.0
    raise BandSearchError(
        f"found only {found} of {n_bands} bands below energy ceiling {E_hi / 2:.6g} rad/s"
    )


@dataclass(frozen=True)
class ValidityVerdict:
    ratio: float
    valid: bool
    threshold: float


def single_band_validity(F_2: float, d: float, E_gap: float, threshold: float = 0.05) -> ValidityVerdict:
    """Compare the Bloch energy F_2 d with the gap to the next band."""
    if not E_gap > 0:
        raise DomainError(f"E_gap must be > 0, got {E_gap!r}")
    ratio = abs(F_2) * d / E_gap
    return ValidityVerdict(ratio=ratio, valid=ratio < threshold, threshold=threshold)


@dataclass(frozen=True)
class GeometryFit:
    convention: str
    barrier_fraction: float
    Delta: float
    E_gap: float
    second_band_width: float
    misfit: float


def scan_published_bands(
    V0_khz: float,
    d: float,
    m_eff: float,
    Delta_khz: float,
    E_gap_khz: float,
    fractions=None,
    conventions=("ordinary", "angular"),
) -> list[GeometryFit]:
    """Band widths/gaps over barrier fractions and frequency readings.

    Each record reports values in the same kHz-style unit as the published
    numbers (divided back by 2*pi*1e3 or 1e3 depending on the reading).
    ``misfit`` is the Euclidean norm of the log-ratios against the targets.
    Records are sorted by misfit, best first.
    """
    from .eit_params import khz_to_internal

    if fractions is None:
        fractions = np.round(np.linspace(0.1, 0.9, 81), 10)
    out = []
    for conv in conventions:
        scale = khz_to_internal(1.0, conv)
        V0 = V0_khz * scale
        for frac in fractions:
            spec = KronigPenneySpec.from_fraction(d, float(frac), V0, m_eff)
            bs = compute_bands(spec, 3)
            Delta = bs.Delta / scale
            E_gap = bs.E_gap / scale
            w2 = bs.widths[1] / scale
            misfit = math.hypot(math.log(Delta / Delta_khz), math.log(E_gap / E_gap_khz))
            out.append(GeometryFit(conv, float(frac), Delta, E_gap, w2, misfit))
    out.sort(key=lambda r: r.misfit)
    return out
