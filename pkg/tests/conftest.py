import math

import numpy as np
import pytest
from hypothesis import strategies as st

from quasirelax.model import BathSpec, OscillatorSpec, SystemSpec, theta

OMEGA01 = 1e13


def internal_spec(m2=3.0, w2=2.0, g1=0.01, g2=0.02, T1=300.0, T2=300.0, rho=0.02, f1=None, f2=None,
                  nu=50.0, **kw) -> SystemSpec:
    """Internal-unit spec in the layout of the figure presets (temperatures in K)."""
    o1 = OscillatorSpec(1.0, 1.0, g1, theta(T1, OMEGA01), None if f1 is None else f1 * 0.5)
    o2 = OscillatorSpec(m2, w2, g2, theta(T2, OMEGA01), None if f2 is None else f2 / (2 * m2 * w2))
    return SystemSpec(o1, o2, BathSpec(nu), BathSpec(nu), rho=rho, **kw)


@pytest.fixture
def default_spec():
    return internal_spec()


@st.composite
def specs(draw, rho_max=0.03, temps=True):
    m2 = draw(st.floats(0.5, 5.0))
    w2 = draw(st.floats(1.5, 3.0))
    g1 = draw(st.floats(1e-3, 0.05))
    g2 = draw(st.floats(1e-3, 0.05)) * w2
    th1 = draw(st.floats(0.0, 8.0)) if temps else 3.9
    th2 = draw(st.floats(0.0, 8.0)) if temps else 3.9
    rho = draw(st.one_of(st.just(0.0), st.floats(1e-4, rho_max)))
    o1 = OscillatorSpec(1.0, 1.0, g1, th1)
    o2 = OscillatorSpec(m2, w2, g2, th2)
    return SystemSpec(o1, o2, BathSpec(50.0), BathSpec(50.0), rho=rho)


def off_node(t, modes, margin=1e-2):
    return all(abs(math.sin(O * t)) > margin for O in modes.Omega)


def gauss_legendre(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w
