import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import rb87_hand_chain
from polariton_bloch.eit_params import (
    C_LIGHT,
    HBAR,
    RB87,
    AtomicLevels,
    FieldParams,
    derive_polariton_params,
    effective_moments_and_forces,
    internal_to_khz,
    khz_to_internal,
    mixing_angle,
    oscillation_observables,
    polariton_kinematics,
    rb87_preset,
    rb87_published_roundtrip,
    theta_from_group_velocity,
    zeeman_detunings,
)
from polariton_bloch.errors import DomainError, FreeComponentError

thetas = st.floats(min_value=0.0, max_value=1.5)
wavenumbers = st.floats(min_value=1e5, max_value=1e8)


def test_khz_conventions():
    assert khz_to_internal(1.0) == pytest.approx(2 * math.pi * 1e3)
    assert khz_to_internal(1.0, "angular") == 1e3
    assert internal_to_khz(khz_to_internal(79.15)) == pytest.approx(79.15, rel=1e-15)
    with pytest.raises(ValueError):
        khz_to_internal(1.0, "hertz")


def test_mixing_angle():
    assert mixing_angle(0.0, 1.0) == 0.0
    assert mixing_angle(1.0, 1.0) == pytest.approx(math.pi / 4)
    with pytest.raises(DomainError):
        mixing_angle(1.0, 0.0)
    with pytest.raises(DomainError):
        mixing_angle(-1.0, 1.0)


def test_bare_light_limit():
    v_g, m = polariton_kinematics(0.0, 1e7)
    assert v_g == C_LIGHT
    assert m == pytest.approx(1e7 / C_LIGHT)


@given(thetas, wavenumbers)
def test_mass_times_velocity_is_wavenumber(theta, k):
    v_g, m = polariton_kinematics(theta, k)
    assert m * v_g == pytest.approx(k, rel=1e-12)


@given(thetas, st.floats(min_value=1e-3, max_value=1.0))
def test_forces_linear_in_sin2(theta, B1):
    atom = AtomicLevels(1e-24, -2e-24, 3e-24)
    s2 = math.sin(theta) ** 2
    full = effective_moments_and_forces(atom, theta, B1, sin2_theta=s2)
    half = effective_moments_and_forces(atom, theta, B1, sin2_theta=s2 / 2)
    assert half[3] == full[3] / 2
    assert half[2] == full[2] / 2


@given(thetas, st.floats(min_value=-1e-23, max_value=1e-23))
def test_equal_moments_give_zero_force(theta, mu):
    atom = AtomicLevels(mu, mu, mu)
    _, _, F1, F2 = effective_moments_and_forces(atom, theta, 0.01)
    assert F1 == 0.0 and F2 == 0.0


@given(st.floats(min_value=1.0, max_value=1e4), st.floats(min_value=1e-6, max_value=1e-4),
       st.floats(min_value=1e-2, max_value=1e3))
def test_observable_identities(F2, d, v_g):
    omega_B, A, T_B, zeta = oscillation_observables(1e5, F2, d, v_g)
    assert omega_B * T_B == pytest.approx(2 * math.pi, rel=1e-12)
    assert zeta * v_g == pytest.approx(omega_B, rel=1e-12)
    assert A == pytest.approx(1e5 / (2 * F2))


def test_zero_force_rejected():
    with pytest.raises(FreeComponentError):
        oscillation_observables(1e5, 0.0, 8e-6, 10.0)


def test_theta_from_group_velocity_inverts_kinematics():
    theta = theta_from_group_velocity(10.0)
    v_g, _ = polariton_kinematics(theta, 1.0)
    assert v_g == pytest.approx(10.0, rel=1e-6)
    with pytest.raises(DomainError):
        theta_from_group_velocity(0.0)


def test_field_params_routes():
    with pytest.raises(DomainError):
        FieldParams(795e-9, 1e-2, 8e-6)
    with pytest.raises(DomainError):
        FieldParams(795e-9, 1e-2, 8e-6, m_eff=1.0, gsqrtN=1.0, Omega=1.0)
    with pytest.raises(DomainError):
        FieldParams(795e-9, 1e-2, 8e-6, gsqrtN=1.0)
    with pytest.raises(DomainError):
        FieldParams(795e-9, 1e-2, 8e-6, gsqrtN=1.0, Omega=0.0)


def test_coupling_route_matches_mass_route():
    atom, fields, _ = rb87_preset()
    by_mass = derive_polariton_params(atom, fields)
    # g sqrt(N) / Omega = tan(theta)
    ratio = math.tan(by_mass.theta)
    by_coupling = derive_polariton_params(
        atom, FieldParams(fields.lambda_probe, fields.B1, fields.d, gsqrtN=ratio * 1e6, Omega=1e6)
    )
    assert by_coupling.v_g == pytest.approx(by_mass.v_g, rel=1e-6)
    assert by_coupling.F_2 == pytest.approx(by_mass.F_2, rel=1e-12)


def test_preset_values():
    atom, fields, spec = rb87_preset()
    assert atom.mu_1 == atom.mu_s == 4.64e-24
    assert atom.mu_2 == -4.64e-24
    assert spec.d == 8e-6 and spec.a == spec.b == 4e-6
    assert spec.V0 == pytest.approx(2 * math.pi * 79.15e3)
    assert fields.B1 == pytest.approx(8.5e-3)
    p = derive_polariton_params(atom, fields)
    assert p.F_1 == 0.0


@pytest.mark.parametrize("convention", ["ordinary", "angular"])
def test_preset_unit_roundtrip(convention):
    back = rb87_published_roundtrip(convention)
    assert back["V0_khz"] == pytest.approx(RB87.V0_khz, rel=1e-9)
    assert back["d_um"] == pytest.approx(RB87.d_um, rel=1e-9)
    assert back["lambda_nm"] == pytest.approx(RB87.lambda_nm, rel=1e-9)
    assert back["B1_microgauss_per_mm"] == pytest.approx(RB87.B1_microgauss_per_mm, rel=1e-9)
    assert back["m_eff"] == RB87.m_eff


def test_parameter_chain_matches_hand_oracle():
    ref = rb87_hand_chain()
    atom, fields, _ = rb87_preset()
    p = derive_polariton_params(atom, fields, khz_to_internal(RB87.Delta_khz))
    for key, value in (("v_g", p.v_g), ("F2", p.F_2), ("omega_B", p.omega_B), ("T_B", p.T_B),
                       ("A", p.A), ("zeta", p.zeta)):
        assert value == pytest.approx(ref[key], rel=1e-9), key


def test_zeeman_detunings():
    atom = AtomicLevels(1e-24, -1e-24, 2e-24)
    assert zeeman_detunings(atom, 1.0) == pytest.approx((1e-24 / HBAR, -1e-24 / HBAR, 2e-24 / HBAR))


def test_atomic_levels_from_quantum_numbers():
    atom = AtomicLevels.from_quantum_numbers((1, -1, 1), (0.5, 0.5, 0.5), mu_B=2.0)
    assert (atom.mu_1, atom.mu_2, atom.mu_s) == (1.0, -1.0, 1.0)
