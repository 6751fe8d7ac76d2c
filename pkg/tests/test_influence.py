import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from quasirelax.influence import (
    QuadratureConfig,
    QuadratureError,
    adaptive_gk21,
    coth,
    eval_ABC,
    eval_alpha,
    eval_C_hat,
    eval_E,
    eval_f,
    fdt_variance,
    influence_coefficients,
    inner_abc,
    linear_E1,
    printed_E_inner,
    tanh_variance,
    thermal_weight,
)
from quasirelax.kernels import kernel_table
from quasirelax.model import BathSpec, NormalModes, OscillatorSpec, SpecError, derive_normal_modes, linear_modes

from conftest import gauss_legendre, internal_spec, off_node


# ---------------------------------------------------------------------------
# quadrature and thermal factors


@pytest.mark.parametrize("deg", [0, 5, 20, 31])
def test_gk21_exact_on_polynomials(deg):
    f = lambda x: np.stack([x**deg, (1 - x) ** deg], axis=-1)
    I, err, _ = adaptive_gk21(f, 0.0, 2.0)
    exact = [2.0 ** (deg + 1) / (deg + 1), (1 - (-1) ** (deg + 1)) / (deg + 1)]
    assert np.allclose(I, exact, rtol=1e-12, atol=1e-13)


def test_gk21_adapts_to_peaks():
    f = lambda x: (1e-3 / ((x - 1.3) ** 2 + 1e-6))[:, None]
    I, _, panels = adaptive_gk21(f, 0.0, 3.0, points=[1.3], rel_tol=1e-10)
    exact = 1e-3 / 1e-3 * (math.atan(1.7 / 1e-3) + math.atan(1.3 / 1e-3))
    assert I[0] == pytest.approx(exact, rel=1e-9)
    assert panels > 2


def test_gk21_panel_limit():
    with pytest.raises(QuadratureError):
        adaptive_gk21(lambda x: np.sin(1e4 * x)[:, None] ** 2, 0.0, 10.0, max_panels=3)


def test_quadrature_config_validation():
    with pytest.raises(SpecError):
        QuadratureConfig(omega_rel_tol=0.0)
    with pytest.raises(SpecError):
        QuadratureConfig(max_panels=0)
    assert QuadratureConfig(cutoff_nu_max=(10, 20)).cutoffs(internal_spec()) == (10.0, 20.0)


@pytest.mark.parametrize("x", [1e-7, 5e-5, 2e-4, 0.3, 4.0, -0.2])
def test_coth(x):
    assert float(coth(x)) == pytest.approx(math.cosh(x) / math.sinh(x), rel=1e-12)


@given(st.floats(0.0, 100.0), st.floats(0.0, 10.0))
def test_thermal_weight_bounds(w, T):
    val = float(thermal_weight(w, T))
    assert val >= w - 1e-12
    assert val >= 2 * T - 1e-9 * (1 + w)


def test_thermal_weight_zero_frequency():
    assert float(thermal_weight(0.0, 2.5)) == pytest.approx(5.0)
    assert float(thermal_weight(0.0, 0.0)) == 0.0


# ---------------------------------------------------------------------------
# bath correlation


def test_alpha_at_origin_zero_temperature():
    osc = OscillatorSpec(1.0, 1.0, 0.01, 0.0)
    nu = 50.0
    assert eval_alpha(0.0, osc, BathSpec(nu)) == pytest.approx(osc.eta * nu**2 / (2 * math.pi), rel=1e-10)


def test_alpha_imaginary_part_temperature_independent():
    cold = OscillatorSpec(1.0, 1.0, 0.01, 0.0)
    hot = OscillatorSpec(1.0, 1.0, 0.01, 7.0)
    a, b = eval_alpha(0.37, cold, BathSpec(50.0)), eval_alpha(0.37, hot, BathSpec(50.0))
    assert a.imag == pytest.approx(b.imag, rel=1e-9)
    assert b.real > a.real


def test_alpha_imaginary_part_closed_form():
    osc = OscillatorSpec(2.0, 1.0, 0.03, 1.0)
    nu, z = 20.0, 0.8
    ref = -osc.eta / math.pi * (math.sin(nu * z) / z**2 - nu * math.cos(nu * z) / z)
    assert eval_alpha(z, osc, BathSpec(nu)).imag == pytest.approx(ref, rel=1e-9)


# ---------------------------------------------------------------------------
# single-oscillator kernels


def _abc_tensor(w, t, O, d, n=160):
    u, wu = gauss_legendre(0.0, t, n)
    fa = np.sin(O * (t - u)) * np.exp(-d * u)
    fc = np.sin(O * u) * np.exp(-d * u)
    K = np.cos(w * (u[:, None] - u[None, :])) * np.outer(wu, wu)
    A = fa @ K @ fa
    B = 2 * fa @ K @ fc
    C = fc @ K @ fc
    scale = (np.abs(fa) @ wu + np.abs(fc) @ wu) ** 2
    return np.array([A, B, C]), scale


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.0, 20.0), st.floats(0.3, 4.0), st.floats(0.0, 0.2))
def test_inner_abc_match_tensor_quadrature(w, t, O, d):
    got = np.array(inner_abc(w, t, O, d), dtype=float)
    ref, scale = _abc_tensor(w, t, O, d)
    assert np.all(np.abs(got - ref) <= 1e-8 * max(scale, 1e-300) + 1e-300)
    assert got[0] >= 0 and got[2] >= 0


def test_ABC_nonnegative_and_raw_consistent(default_spec):
    m = linear_modes(default_spec)
    t = np.array([0.5, 3.3, 40.2])
    for i in (0, 1):
        r = eval_ABC(t, i, default_spec, m)
        assert np.all(r.A_hat >= 0) and np.all(r.C_hat >= 0)
        O, d = m.Omega[i], m.delta[i]
        assert np.allclose(r.C, r.C_hat * np.exp(2 * d * t) / np.sin(O * t) ** 2)


def test_C_vanishes_at_short_time(default_spec):
    m = linear_modes(default_spec)
    small, _ = eval_C_hat(1e-3, 0, default_spec, m)
    big, _ = eval_C_hat(2.0, 0, default_spec, m)
    assert small[0] < 1e-9 * big[0]


@pytest.mark.parametrize("i", [0, 1])
def test_C_grows_with_temperature(i):
    vals = []
    for T in (0.0, 100.0, 300.0, 1000.0):
        spec = internal_spec(T1=T, T2=T)
        vals.append(eval_C_hat(np.array([1.0, 7.0]), i, spec, linear_modes(spec))[0])
    assert np.all(np.diff(np.array(vals), axis=0) > 0)


def test_C_independent_of_coupling():
    t = np.linspace(0.1, 30.0, 7)
    a, b = internal_spec(rho=0.0), internal_spec(rho=0.04)
    ca, _ = eval_C_hat(t, 1, a, linear_modes(a))
    cb, _ = eval_C_hat(t, 1, b, linear_modes(b))
    assert np.array_equal(ca, cb)


def test_C_hat_matches_eval_ABC(default_spec):
    m = linear_modes(default_spec)
    t = np.array([1.1, 9.9])
    c, _ = eval_C_hat(t, 0, default_spec, m)
    assert np.allclose(c, eval_ABC(t, 0, default_spec, m).C_hat, rtol=1e-7)


# ---------------------------------------------------------------------------
# cross kernels


def _E_triangle(w, t, m: NormalModes, n=120):
    """Raw per-bath E1..E4 from the triangle-domain integrands, shape (2, 4)."""
    O1, O2, d1, d2 = m.Omega1, m.Omega2, m.delta1, m.delta2
    m1, m2 = 1 / math.tan(O1 * t), 1 / math.tan(O2 * t)
    nb1, nb2 = math.exp(-d1 * t) / math.sin(O1 * t), math.exp(-d2 * t) / math.sin(O2 * t)
    x, wx = gauss_legendre(0.0, 1.0, n)
    tau = (t * x)[:, None]
    s = tau * x[None, :]
    W = (t * wx)[:, None] * tau * wx[None, :]
    k = np.cos(w * (tau - s))
    S1, C1, S2, C2 = (lambda v: np.sin(O1 * v)), (lambda v: np.cos(O1 * v)), (lambda v: np.sin(O2 * v)), (lambda v: np.cos(O2 * v))
    a, b = np.exp(d2 * tau + d1 * s), np.exp(d1 * tau + d2 * s)

    def sym(f2, f1):
        return f2(tau) * f1(s) * a + f1(tau) * f2(s) * b

    g1 = k * (m1 * m2 * sym(S2, S1) - m2 * sym(S2, C1) + sym(C2, C1) - m1 * sym(C2, S1))
    g2 = k * (-nb2 * m1 * sym(S2, S1) + nb2 * sym(S2, C1))
    g3 = k * (-nb1 * m2 * sym(S2, S1) + nb1 * sym(C2, S1))
    g4 = k * nb1 * nb2 * sym(S2, S1)
    out = np.empty((2, 4))
    for row, (S, C, d, mm, nb) in enumerate(((S1, C1, d1, m1, nb1), (S2, C2, d2, m2, nb2))):
        e = k * np.exp(d * (tau + s))
        SS, CC, CS = S(tau) * S(s), C(tau) * C(s), C(tau) * S(s) + S(tau) * C(s)
        out[row, 0] = np.sum(W * (e * (-2 * (mm**2 * SS + CC) + 2 * mm * CS) + g1))
        out[row, 1] = np.sum(W * (e * (2 * nb * mm * SS - nb * CS) + g2))
        out[row, 2] = np.sum(W * (e * (2 * nb * mm * SS - nb * CS) + g3))
        out[row, 3] = np.sum(W * (-2 * nb**2 * e * SS + g4))
    out[0] *= m.r2
    out[1] *= m.r1
    return out


@st.composite
def cross_cases(draw):
    O1 = draw(st.floats(0.5, 1.5))
    O2 = draw(st.floats(1.6, 4.0))
    m = NormalModes(O1, O2, draw(st.floats(0.0, 0.1)), draw(st.floats(0.0, 0.1)),
                    draw(st.floats(1e-3, 0.05)), -draw(st.floats(1e-3, 0.05)), 0.0)
    return m, draw(st.floats(0.2, 8.0)), draw(st.floats(0.0, 8.0))


@settings(max_examples=200, deadline=None)
@given(cross_cases())
def test_printed_E_inner_matches_triangle_quadrature(case):
    m, t, w = case
    assume(off_node(t, m, 0.1))
    got = printed_E_inner(w, t, m)
    ref = _E_triangle(w, t, m)
    assert np.abs(got - ref).max() <= 1e-8 * np.abs(ref).max()


def test_E_zero_without_coupling():
    spec = internal_spec(rho=0.0)
    m = derive_normal_modes(spec)
    t = np.array([0.7, 5.5])
    assert np.all(eval_E(t, spec, m).E_hat == 0)
    E1, err = linear_E1(t, spec, m)
    assert np.all(E1 == 0) and err == 0


def test_E_methods_agree_on_E1():
    spec = internal_spec(rho=0.01, g1=1e-3, g2=2e-3)
    m = derive_normal_modes(spec)
    t = np.array([0.9, 2.6])
    pr = eval_E(t, spec, m, method="printed").E_hat[:, 0]
    li = eval_E(t, spec, m, method="linear").E_hat[:, 0]
    assert np.allclose(li, pr, rtol=0.05)


def test_E_unknown_method(default_spec):
    with pytest.raises(ValueError):
        eval_E(1.0, default_spec, derive_normal_modes(default_spec), method="nope")


def test_linear_E1_scales_with_coupling():
    a, b = internal_spec(rho=0.001), internal_spec(rho=0.002)
    t = np.array([1.3, 6.1])
    Ea, _ = linear_E1(t, a, derive_normal_modes(a))
    Eb, _ = linear_E1(t, b, derive_normal_modes(b))
    assert np.allclose(Eb / Ea, 2.0, rtol=1e-3)


# ---------------------------------------------------------------------------
# assembled coefficients


def _f_pair(rho, t=2.3):
    spec = internal_spec(rho=rho)
    m = derive_normal_modes(spec)
    a = tuple(1 / (8 * o.initial_variance()) for o in spec.oscillators)
    return influence_coefficients(t, spec, m, table=kernel_table(t, m, spec), a=a)


def test_f_linear_in_coupling():
    one, two = _f_pair(1e-3), _f_pair(2e-3)
    assert two.f1 / one.f1 == pytest.approx(2.0, rel=1e-2)
    assert two.f2 / one.f2 == pytest.approx(2.0, rel=1e-2)


def test_f_requires_table():
    spec = internal_spec()
    infl = influence_coefficients(2.3, spec, derive_normal_modes(spec))
    assert infl.f1 is None and infl.f2 is None
    with pytest.raises(AttributeError):
        eval_f(None, infl, 1.0, 1.0)


# ---------------------------------------------------------------------------
# equilibrium variance


def test_fdt_narrow_line_limit():
    for T in (0.0, 2.0, 10.0):
        osc = OscillatorSpec(1.0, 1.0, 1e-4, T)
        assert fdt_variance(osc) == pytest.approx(tanh_variance(osc), rel=2e-3)


def test_fdt_classical_limit():
    osc = OscillatorSpec(2.0, 1.5, 0.01, 500.0)
    assert fdt_variance(osc) == pytest.approx(500.0 / (2.0 * 1.5**2), rel=1e-3)


def test_fdt_zero_temperature_closed_form():
    osc = OscillatorSpec(1.0, 1.0, 0.05, 0.0)
    Om = math.sqrt(1 - 0.05**2)
    ref = (1 - 2 / math.pi * math.atan(0.05 / Om)) / (2 * Om)
    assert fdt_variance(osc) == pytest.approx(ref, rel=1e-3)
    assert fdt_variance(osc) < tanh_variance(osc)


def test_fdt_reference_integral():
    osc = OscillatorSpec(3.0, 2.0, 0.02, 3.9)
    g, w0, M = osc.gamma, osc.omega0, osc.mass
    f = lambda w: float(thermal_weight(w, osc.temperature)) * 2 * g / (M * ((w * w - w0 * w0) ** 2 + 4 * g * g * w * w))
    ref = sum(quad(f, lo, hi, epsrel=1e-12, limit=1000)[0] for lo, hi in ((0, w0), (w0, 10 * w0), (10 * w0, np.inf)))
    val, err = fdt_variance(osc, full_output=True)
    assert val == pytest.approx(ref / math.pi, rel=1e-3)
    assert err < 1e-3 * val


def test_fdt_requires_damping():
    with pytest.raises(SpecError):
        fdt_variance(OscillatorSpec(1.0, 1.0, 0.0, 1.0))
