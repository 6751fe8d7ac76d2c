import dataclasses
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasirelax.model import (
    HBAR_CGS,
    KB_CGS,
    BathSpec,
    DegenerateModesError,
    OscillatorSpec,
    OvercriticalCouplingError,
    SpecError,
    SystemSpec,
    WeakCouplingError,
    derive_normal_modes,
    linear_modes,
    perturbative_frequencies,
    theta,
    to_internal_units,
    to_physical_units,
    validate_weak_coupling,
)

from conftest import internal_spec, specs


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mass=0.0, omega0=1.0, gamma=0.01, temperature=1.0),
        dict(mass=1.0, omega0=-1.0, gamma=0.01, temperature=1.0),
        dict(mass=1.0, omega0=1.0, gamma=-0.1, temperature=1.0),
        dict(mass=1.0, omega0=1.0, gamma=1.0, temperature=1.0),
        dict(mass=1.0, omega0=1.0, gamma=0.1, temperature=-1.0),
        dict(mass=1.0, omega0=1.0, gamma=0.1, temperature=1.0, sigma0_sq=0.0),
    ],
)
def test_oscillator_invariants(kwargs):
    with pytest.raises(SpecError):
        OscillatorSpec(**kwargs)


def test_default_initial_variance_is_ground_state():
    o = OscillatorSpec(3.0, 2.0, 0.02, 1.0)
    assert o.initial_variance() == pytest.approx(1 / 12)
    assert OscillatorSpec(3.0, 2.0, 0.02, 1.0, 0.7).initial_variance() == 0.7


def test_counter_term_strength():
    o = OscillatorSpec(2.0, 1.0, 0.05, 0.0)
    assert BathSpec(40.0).mu(o) == pytest.approx(2 * (2 * 2.0 * 0.05) * 40.0 / math.pi)
    with pytest.raises(SpecError):
        BathSpec(0.0)


def test_degenerate_rejected():
    with pytest.raises(DegenerateModesError, match="degenerate"):
        internal_spec(w2=1.0, rho=0.0)


def test_overcritical_rejected():
    with pytest.raises(OvercriticalCouplingError):
        internal_spec(rho=5.0, force=True)


def test_weak_coupling_gate_and_force():
    with pytest.raises(WeakCouplingError):
        internal_spec(w2=1.01, rho=0.05)
    spec = internal_spec(w2=1.01, rho=0.05, force=True)
    rep = validate_weak_coupling(spec)
    assert not rep.passed
    assert rep.ratio == pytest.approx((1.01**2 - 1) / (2 * 1.01) / 0.05)
    assert rep.ratio == pytest.approx(0.199, abs=1e-3)


@pytest.mark.parametrize("rho,ratio", [(0.0, math.inf), (0.05, 15.0)])
def test_weak_coupling_ratio(rho, ratio):
    rep = validate_weak_coupling(internal_spec(rho=rho))
    assert rep.ratio == pytest.approx(ratio)
    assert rep.passed


def test_rho_to_lambda():
    spec = internal_spec(rho=0.05)
    assert spec.lam == pytest.approx(0.05 * math.sqrt(6.0))
    with pytest.raises(SpecError):
        SystemSpec(spec.osc1, spec.osc2, spec.bath1, spec.bath2, lam=1.0, rho=0.05)


def test_uncoupled_modes():
    m = derive_normal_modes(internal_spec(rho=0.0))
    assert (m.Omega1, m.Omega2, m.delta1, m.delta2, m.r1, m.r2) == (1.0, 2.0, 0.01, 0.02, 0.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(specs(rho_max=0.04))
def test_root_sum_and_product_rules(spec):
    m = derive_normal_modes(spec)
    o1, o2 = spec.oscillators
    assert m.Omega1**2 + m.Omega2**2 == pytest.approx(o1.omega0**2 + o2.omega0**2, rel=1e-12)
    prod = o1.omega0**2 * o2.omega0**2 - spec.lam**2 / (o1.mass * o2.mass)
    assert m.Omega1**2 * m.Omega2**2 == pytest.approx(prod, rel=1e-12)
    assert m.r1 * spec.lam / o1.mass == pytest.approx(o1.omega0**2 - m.Omega1**2, rel=1e-10, abs=1e-15)
    if spec.lam > 1e-6:  # below this 1 - r1 r2 rounds to 1
        assert m.r1 > 0 > m.r2
        assert 1 - m.r1 * m.r2 > 1


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.04), st.floats(1.5, 3.0), st.floats(0.5, 5.0))
def test_perturbative_frequencies_close_to_exact(rho, w2, m2):
    spec = internal_spec(rho=rho, w2=w2, m2=m2, g2=0.01 * w2)
    exact = derive_normal_modes(spec)
    approx = perturbative_frequencies(spec)
    assert abs(exact.Omega1 - approx[0]) <= 10 * rho**4 + 1e-15
    assert abs(exact.Omega2 - approx[1]) <= 10 * rho**4 + 1e-15


def test_mixing_product_first_order():
    spec = internal_spec(rho=0.01)
    m = derive_normal_modes(spec)
    expected = -spec.lam**2 / (3.0 * (4.0 - 1.0) ** 2)
    assert m.r1 * m.r2 == pytest.approx(expected, rel=1e-2)


def test_linear_modes_coupling_independent():
    a, b = linear_modes(internal_spec(rho=0.0)), linear_modes(internal_spec(rho=0.03))
    assert (a.Omega1, a.Omega2, a.delta1, a.delta2) == (b.Omega1, b.Omega2, b.delta1, b.delta2)
    assert a.Omega1 == pytest.approx(math.sqrt(1 - 0.01**2))


def test_theta_value():
    assert HBAR_CGS * 1e13 / KB_CGS == pytest.approx(76.38, abs=0.01)
    assert theta(300.0, 1e13) == pytest.approx(3.93, abs=5e-3)
    assert theta(0.0, 1e13) == 0.0


def _physical(rho=0.02, T1=300.0, T2=700.0, s2=None):
    o1 = OscillatorSpec(1e-23, 1e13, 1e11, T1)
    o2 = OscillatorSpec(3e-23, 2e13, 2e11, T2, s2)
    return SystemSpec(o1, o2, BathSpec(5e14), BathSpec(5e14), rho=rho, units="physical")


def test_internal_units_conversion():
    phys = _physical()
    spec = to_internal_units(phys)
    assert spec.osc1.mass == pytest.approx(1.0)
    assert spec.osc1.omega0 == pytest.approx(1.0)
    assert spec.osc2.mass == pytest.approx(3.0)
    assert spec.osc2.omega0 == pytest.approx(2.0)
    assert spec.osc1.temperature == pytest.approx(theta(300.0, 1e13))
    assert spec.bath1.nu_max == pytest.approx(50.0)
    assert spec.rho == pytest.approx(0.02, rel=1e-12)


@pytest.mark.parametrize("s2", [None, 7.3e-19])
def test_unit_round_trip(s2):
    phys = _physical(s2=s2)
    back = to_physical_units(to_internal_units(phys))
    for a, b in zip(dataclasses.astuple(phys.osc1) + dataclasses.astuple(phys.osc2),
                    dataclasses.astuple(back.osc1) + dataclasses.astuple(back.osc2)):
        if a is None:
            assert b is None
        else:
            assert b == pytest.approx(a, rel=1e-12)
    assert back.lam == pytest.approx(phys.lam, rel=1e-12)
    assert back.bath2.nu_max == pytest.approx(phys.bath2.nu_max, rel=1e-12)


def test_hbar_kb_per_unit_system():
    assert _physical().hbar == HBAR_CGS
    assert internal_spec().kb == 1.0
