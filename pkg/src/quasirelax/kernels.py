"""Classical-path coefficient functions of the two-oscillator action.

Two evaluation routes are provided:

* ``method="exact"`` integrates the action along the normal-mode paths in
  closed form by writing every path as a sum of complex exponentials.  It is
  exact for those paths at any coupling.
* ``method="printed"`` transcribes the tabulated b, D and Pi expressions
  term by term.  They are first order in the mixing ratios and drop
  ``O(gamma^2)`` pieces, so they agree with the exact route only to that
  order.  Switches in :class:`PrintedOptions` select between the literal
  and corrected forms of a few entries.

Boundary data are ordered ``(f1, f2, i1, i2)`` throughout, and an action
coefficient matrix ``K[a, b]`` multiplies ``X_a * xi_b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NormalModes, SystemSpec

NODE_EPS = 1e-6
BOUNDARY = ("f1", "f2", "i1", "i2")
F1, F2, I1, I2 = range(4)

# (X index, xi index) of every D_k / D'_k monomial, k = 1..12
D_MONOMIALS = (
    (F1, F1), (I1, F1), (F1, I1), (I1, I1),
    (F2, F1), (F1, F2), (I1, F2), (I2, F1),
    (F1, I2), (F2, I1), (I1, I2), (I2, I1),
)
# primed own-oscillator monomials D'_1..D'_4
DP_OWN = ((F2, F2), (I2, F2), (F2, I2), (I2, I2))
# (X index, xi index) of Pi_k, k = 1..16
PI_MONOMIALS = (
    (F1, F1), (F1, F2), (F2, F1), (F2, F2),
    (F1, I1), (F1, I2), (F2, I1), (F2, I2),
    (I1, F1), (I1, F2), (I2, F1), (I2, F2),
    (I1, I1), (I1, I2), (I2, I1), (I2, I2),
)


class NodeProximityError(ValueError):
    """Raw coefficient requested too close to a zero of sin(Omega_i t)."""


@dataclass(frozen=True)
class KernelTable:
    t: float
    s: np.ndarray
    n1: float
    n2: float
    nbar1: float
    nbar2: float
    m1: float
    m2: float
    D: np.ndarray
    Dp: np.ndarray
    Pi: np.ndarray


@dataclass(frozen=True)
class PrintedOptions:
    """Switches for the printed tables.

    ``*_fix=False`` reproduces the literal typeset entry; ``True`` uses the
    form that is consistent with the action integral.
    """

    bp12_prefactor: str = "r1"
    cross_b_extra_r: bool = False
    d4_fix: bool = True
    dp78_fix: bool = True
    pi8_fix: bool = True
    pi9_fix: bool = True
    pi12_fix: bool = True


LITERAL = PrintedOptions(
    bp12_prefactor="r2", cross_b_extra_r=True, d4_fix=False, dp78_fix=False,
    pi8_fix=False, pi9_fix=False, pi12_fix=False,
)


# ---------------------------------------------------------------------------
# elementary integrals


def phi(z, t):
    """``int_0^t exp(z tau) dtau`` evaluated without cancellation."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    x = z * t
    small = np.abs(x) < 1e-5
    xs = np.where(small, 1.0, x)
    zs = np.where(small, 1.0, z)
    series = t * (1.0 + x / 2.0 + x * x / 6.0 + x**3 / 24.0)
    return np.where(small, series, np.expm1(xs) / zs)


def eval_s(t, modes: NormalModes) -> np.ndarray:
    """Trigonometric integrals s_1..s_14 in their closed forms.

    Returns an array of shape ``t.shape + (14,)``.
    """
    t = np.asarray(t, dtype=float)
    O1, O2, d1, d2 = modes.Omega1, modes.Omega2, modes.delta1, modes.delta2
    dm = d1 - d2
    Om, Op = O1 - O2, O1 + O2
    qm, qp = dm**2 + Om**2, dm**2 + Op**2
    s = np.empty(t.shape + (14,))
    s[..., 0] = t / 2 + np.sin(2 * O1 * t) / (4 * O1)
    s[..., 1] = t / 2 - np.sin(2 * O1 * t) / (4 * O1)
    s[..., 2] = t / 2 + np.sin(2 * O2 * t) / (4 * O2)
    s[..., 3] = t / 2 - np.sin(2 * O2 * t) / (4 * O2)
    s[..., 4] = np.sin(O1 * t) ** 2 / (2 * O1)
    s[..., 5] = np.sin(O2 * t) ** 2 / (2 * O2)
    cm, sm, cp, sp = np.cos(Om * t), np.sin(Om * t), np.cos(Op * t), np.sin(Op * t)
    ep, en = np.exp(t * dm), np.exp(-t * dm)
    s[..., 6] = 0.5 * (-dm / qm - dm / qp + ep * ((dm * cm + Om * sm) / qm + (dm * cp + Op * sp) / qp))
    s[..., 7] = 0.5 * (-Om / qm + Op / qp + ep * ((Om * cm - dm * sm) / qm + (-Op * cp + dm * sp) / qp))
    s[..., 8] = 0.5 * (Om / qm + Op / qp + ep * ((-Om * cm + dm * sm) / qm + (-Op * cp + dm * sp) / qp))
    s[..., 9] = 0.5 * (-dm / qm + dm / qp + ep * ((dm * cm + Om * sm) / qm - (dm * cp + Op * sp) / qp))
    s[..., 10] = 0.5 * (dm / qm + dm / qp + en * ((-dm * cm + Om * sm) / qm + (-dm * cp + Op * sp) / qp))
    s[..., 11] = 0.5 * (Om / qm + Op / qp + en * ((-Om * cm - dm * sm) / qm - (Op * cp + dm * sp) / qp))
    s[..., 12] = 0.5 * (-Om / qm + Op / qp + en * ((Om * cm + dm * sm) / qm - (Op * cp + dm * sp) / qp))
    s[..., 13] = 0.5 * (dm / qm - dm / qp + en * ((-dm * cm + Om * sm) / qm + (dm * cp - Op * sp) / qp))
    return s


def auxiliaries(t: float, modes: NormalModes) -> dict:
    """n, nbar and m at time t (divergent at the sine nodes)."""
    out = {}
    for k, (O, d) in enumerate(zip(modes.Omega, modes.delta), start=1):
        sn = np.sin(O * t)
        out[f"n{k}"] = np.exp(d * t) / sn
        out[f"nbar{k}"] = np.exp(-d * t) / sn
        out[f"m{k}"] = np.cos(O * t) / sn
    return out


def check_nodes(t, modes: NormalModes, eps: float = NODE_EPS) -> None:
    for k, O in enumerate(modes.Omega, start=1):
        if np.any(np.abs(np.sin(O * np.asarray(t))) < eps * np.pi) or np.any(np.asarray(t) <= 0):
            raise NodeProximityError(
                f"t={t} lies within the node guard of sin(Omega{k} t); use the rescaled path"
            )


# ---------------------------------------------------------------------------
# exponential-sum representation of the normal-mode paths


def mode_basis(modes: NormalModes, sign: int) -> np.ndarray:
    """Exponents ``(s d1 + i O1, s d1 - i O1, s d2 + i O2, s d2 - i O2)``."""
    O1, O2, d1, d2 = modes.Omega1, modes.Omega2, modes.delta1, modes.delta2
    return np.array([sign * d1 + 1j * O1, sign * d1 - 1j * O1, sign * d2 + 1j * O2, sign * d2 - 1j * O2])


def sincos(k: int, cs, cc) -> np.ndarray:
    """Basis coefficients of ``cs sin + cc cos`` on mode k (shape ``(..., 4)``)."""
    cs = np.asarray(cs, dtype=complex)
    cc = np.asarray(cc, dtype=complex)
    v = np.zeros(np.broadcast(cs, cc).shape + (4,), dtype=complex)
    v[..., 2 * k] = cs / 2j + cc / 2
    v[..., 2 * k + 1] = -cs / 2j + cc / 2
    return v


def path_coefficients(t, modes: NormalModes):
    """Exponential-sum form of the normal-mode paths.

    Returns ``(zX, UX, zK, UK)``: the X-type path of oscillator ``j`` is
    ``sum_a X_a sum_p UX[..., j, a, p] exp(zX[p] tau)`` and likewise for xi.
    """
    t = np.asarray(t, dtype=float)
    r1, r2 = modes.r1, modes.r2
    den = 1.0 - r1 * r2
    out = []
    for sign in (-1, 1):
        z = mode_basis(modes, sign)
        s1, s2 = np.sin(modes.Omega1 * t), np.sin(modes.Omega2 * t)
        c1, c2 = np.cos(modes.Omega1 * t) / s1, np.cos(modes.Omega2 * t) / s2
        n1 = np.exp(-sign * modes.delta1 * t) / s1
        n2 = np.exp(-sign * modes.delta2 * t) / s2
        one, zero = np.ones_like(t), np.zeros_like(t)
        mode1 = [sincos(0, n1, zero), sincos(0, -r2 * n1, zero), sincos(0, -c1, one), sincos(0, r2 * c1, -r2 * one)]
        mode2 = [sincos(1, -r1 * n2, zero), sincos(1, n2, zero), sincos(1, r1 * c2, -r1 * one), sincos(1, -c2, one)]
        U = np.zeros(t.shape + (2, 4, 4), dtype=complex)
        for a in range(4):
            U[..., 0, a, :] = (mode1[a] + r2 * mode2[a]) / den
            U[..., 1, a, :] = (r1 * mode1[a] + mode2[a]) / den
        out += [z, U]
    return tuple(out)


def pair_integrals(zX, zK, t) -> np.ndarray:
    """``E[..., p, q] = int_0^t exp((zX_p + zK_q) tau) dtau``."""
    t = np.asarray(t, dtype=float)
    return phi(zX[:, None] + zK[None, :], t[..., None, None])


def action_matrices(t, modes: NormalModes, spec: SystemSpec):
    """Exact bilinear coefficients of the self and interaction actions.

    Returns ``(K1, K2, Kint)``, each of shape ``t.shape + (4, 4)``, where
    ``K1``/``K2`` come from the Lagrangian of oscillator 1/2 and ``Kint``
    from the coupling term ``(lam/2)(X1 xi2 + X2 xi1)``.
    """
    zX, UX, zK, UK = path_coefficients(t, modes)
    E = pair_integrals(zX, zK, t)
    res = []
    for j, o in enumerate(spec.oscillators):
        kern = E * (
            o.mass / 2 * zX[:, None] * zK[None, :]
            - o.mass / 2 * o.omega0**2
            - o.mass * o.gamma * zX[:, None]
        )
        res.append(np.einsum("...ap,...pq,...bq->...ab", UX[..., j, :, :], kern, UK[..., j, :, :]).real)
    Kint = 0.5 * spec.lam * (
        np.einsum("...ap,...pq,...bq->...ab", UX[..., 0, :, :], E, UK[..., 1, :, :])
        + np.einsum("...ap,...pq,...bq->...ab", UX[..., 1, :, :], E, UK[..., 0, :, :])
    ).real
    return res[0], res[1], Kint


def _exact_D(t, modes, spec):
    K1, K2, _ = action_matrices(t, modes, spec)
    D = np.empty(np.shape(t) + (12,))
    Dp = np.empty(np.shape(t) + (12,))
    total = K1 + K2
    for k, (a, b) in enumerate(D_MONOMIALS):
        if k < 4:
            D[..., k] = total[..., a, b]
        else:
            D[..., k] = K1[..., a, b]
            Dp[..., k] = K2[..., a, b]
    for k, (a, b) in enumerate(DP_OWN):
        Dp[..., k] = total[..., a, b]
    return D, Dp


def _exact_Pi(t, modes, spec):
    _, _, Kint = action_matrices(t, modes, spec)
    return np.stack([Kint[..., a, b] for a, b in PI_MONOMIALS], axis=-1)


# ---------------------------------------------------------------------------
# printed tables


def printed_b(t, modes: NormalModes, spec: SystemSpec, opts: PrintedOptions = PrintedOptions()):
    """The b_1..b_12 and b'_1..b'_12 auxiliaries as tabulated."""
    s = eval_s(t, modes)
    S = [None] + [s[..., k] for k in range(14)]
    O1, O2, d1, d2, r1, r2 = modes.Omega1, modes.Omega2, modes.delta1, modes.delta2, modes.r1, modes.r2
    if not opts.cross_b_extra_r:
        r1 = r2 = 1.0
    w1s, w2s = spec.osc1.omega0**2, spec.osc2.omega0**2
    g1, g2 = spec.osc1.gamma, spec.osc2.gamma
    b = [None] * 13
    b[1] = O1**2 * S[1] - w1s * S[2] - 2 * O1 * g1 * S[5]
    b[2] = -(O1**2) * S[5] - w1s * S[5] - O1 * d1 * (S[1] + S[2]) + 2 * O1 * g1 * S[2]
    b[3] = -(O1**2) * S[5] - w1s * S[5] + O1 * d1 * (S[1] + S[2]) - 2 * O1 * g1 * S[1]
    b[4] = O1**2 * S[2] - w1s * S[1] + 2 * O1 * g1 * S[5]
    b[5] = r2 * (O1 * O2 * S[7] - w1s * S[10] - O1 * d2 * S[8] + O2 * d1 * S[9] - 2 * O2 * g1 * S[9])
    b[6] = r2 * (-O1 * O2 * S[8] - w1s * S[9] - O1 * d2 * S[7] - O2 * d1 * S[10] + 2 * O2 * g1 * S[10])
    b[7] = r2 * (-O1 * O2 * S[9] - w1s * S[8] + O1 * d2 * S[10] + O2 * d1 * S[7] - 2 * O2 * g1 * S[7])
    b[8] = r2 * (O1 * O2 * S[10] - w1s * S[7] + O1 * d2 * S[9] - O2 * d1 * S[8] + 2 * O2 * g1 * S[8])
    b[9] = r2 * (O1 * O2 * S[11] - w1s * S[14] - O2 * d1 * S[12] + O1 * d2 * S[13] - 2 * O1 * g1 * S[13])
    b[10] = r2 * (-O1 * O2 * S[12] - w1s * S[13] - O2 * d1 * S[11] - O1 * d2 * S[14] + 2 * O1 * g1 * S[14])
    b[11] = r2 * (-O1 * O2 * S[13] - w1s * S[12] + O2 * d1 * S[14] + O1 * d2 * S[11] - 2 * O1 * g1 * S[11])
    b[12] = r2 * (O1 * O2 * S[14] - w1s * S[11] + O2 * d1 * S[13] - O1 * d2 * S[12] + 2 * O1 * g1 * S[12])
    bp = [None] * 13
    bp[1] = O2**2 * S[3] - w2s * S[4] - 2 * O2 * g2 * S[6]
    bp[2] = -(O2**2) * S[6] - w2s * S[6] - O2 * d2 * (S[3] + S[4]) + 2 * O2 * g2 * S[4]
    bp[3] = -(O2**2) * S[6] - w2s * S[6] + O2 * d2 * (S[3] + S[4]) - 2 * O2 * g2 * S[3]
    bp[4] = O2**2 * S[4] - w2s * S[3] + 2 * O2 * g2 * S[6]
    bp[5] = r1 * (O1 * O2 * S[7] - w2s * S[10] - O1 * d2 * S[8] + O2 * d1 * S[9] - 2 * O2 * g2 * S[9])
    bp[6] = r1 * (-O1 * O2 * S[8] - w2s * S[9] - O1 * d2 * S[7] - O2 * d1 * S[10] + 2 * O2 * g2 * S[10])
    bp[7] = r1 * (O1 * O2 * S[10] - w2s * S[7] + O1 * d2 * S[9] - O2 * d1 * S[8] + 2 * O2 * g2 * S[8])
    bp[8] = r1 * (-O1 * O2 * S[9] - w2s * S[8] + O1 * d2 * S[10] + O2 * d1 * S[7] - 2 * O2 * g2 * S[7])
    bp[9] = r1 * (O1 * O2 * S[11] - w2s * S[14] - O2 * d1 * S[12] + O1 * d2 * S[13] - 2 * O1 * g2 * S[13])
    bp[10] = r1 * (-O1 * O2 * S[12] - w2s * S[13] - O2 * d1 * S[11] - O1 * d2 * S[14] + 2 * O1 * g2 * S[14])
    bp[11] = r1 * (-O1 * O2 * S[13] - w2s * S[12] + O2 * d1 * S[14] + O1 * d2 * S[11] - 2 * O1 * g2 * S[11])
    pre12 = r1 if opts.bp12_prefactor == "r1" else modes.r2
    bp[12] = pre12 * (O1 * O2 * S[14] - w2s * S[11] + O2 * d1 * S[13] - O1 * d2 * S[12] + 2 * O1 * g2 * S[12])
    return b, bp


def printed_D(t, modes: NormalModes, spec: SystemSpec, opts: PrintedOptions = PrintedOptions()):
    """D_1..D_12 and D'_1..D'_12 from the tabulated expressions."""
    b, bp = printed_b(t, modes, spec, opts)
    aux = auxiliaries(t, modes)
    n1, n2, nb1, nb2, m1, m2 = (aux[k] for k in ("n1", "n2", "nbar1", "nbar2", "m1", "m2"))
    r1, r2 = modes.r1, modes.r2
    h1, h2 = spec.osc1.mass / 2, spec.osc2.mass / 2
    d4b = b[1] if opts.d4_fix else b[2]
    D = [
        h1 * n1 * nb1 * b[1],
        h1 * (nb1 * b[2] - m1 * nb1 * b[1]),
        h1 * (n1 * b[3] - m1 * n1 * b[1]),
        h1 * (m1**2 * d4b - m1 * b[2] - m1 * b[3] + b[4]),
        r2 * h1 * (n2 * nb1 * b[5] - n1 * nb1 * b[1]),
        r2 * h1 * (n1 * nb2 * b[9] - n1 * nb1 * b[1]),
        r2 * h1 * (m1 * nb1 * b[1] - nb1 * b[2] - m1 * nb2 * b[9] + nb2 * b[10]),
        r2 * h1 * (m1 * nb1 * b[1] - nb1 * b[2] - m2 * nb1 * b[5] + nb1 * b[6]),
        r2 * h1 * (n1 * m1 * b[1] - n1 * b[3] - n1 * m2 * b[9] + n1 * b[11]),
        r2 * h1 * (n1 * m1 * b[1] - n1 * b[3] - n2 * m1 * b[5] + n2 * b[7]),
        r2 * h1 * (m1 * b[2] - m1**2 * b[1] + m1 * b[3] - b[4] + m1 * m2 * b[9] - m2 * b[10] - m1 * b[11] + b[12]),
        r2 * h1 * (m1 * b[2] - m1**2 * b[1] + m1 * b[3] - b[4] + m1 * m2 * b[5] - m1 * b[6] - m2 * b[7] + b[8]),
    ]
    n2b2 = nb2 if opts.dp78_fix else n2
    n1b5 = nb1 if opts.dp78_fix else n1
    Dp = [
        h2 * n2 * nb2 * bp[1],
        h2 * (nb2 * bp[2] - m2 * nb2 * bp[1]),
        h2 * (n2 * bp[3] - m2 * n2 * bp[1]),
        h2 * (m2**2 * bp[2] - m2 * bp[2] - m2 * bp[3] + bp[4]) if not opts.d4_fix
        else h2 * (m2**2 * bp[1] - m2 * bp[2] - m2 * bp[3] + bp[4]),
        r1 * h2 * (n2 * nb1 * bp[5] - n2 * nb2 * bp[1]),
        r1 * h2 * (n1 * nb2 * bp[9] - n2 * nb2 * bp[1]),
        r1 * h2 * (m2 * nb2 * bp[1] - n2b2 * bp[2] - m1 * nb2 * bp[9] + nb2 * bp[10]),
        r1 * h2 * (m2 * nb2 * bp[1] - n2b2 * bp[2] - m2 * n1b5 * bp[5] + nb1 * bp[6]),
        r1 * h2 * (n2 * m2 * bp[1] - n2 * bp[3] - n1 * m2 * bp[9] + n1 * bp[11]),
        r1 * h2 * (n2 * m2 * bp[1] - n2 * bp[3] - n2 * m1 * bp[5] + n2 * bp[8]),
        r1 * h2 * (m2 * bp[2] - m2**2 * bp[1] + m2 * bp[3] - bp[4] + m1 * m2 * bp[9] - m2 * bp[10] - m1 * bp[11] + bp[12]),
        r1 * h2 * (m2 * bp[2] - m2**2 * bp[1] + m2 * bp[3] - bp[4] + m1 * m2 * bp[5] - m1 * bp[6] - m2 * bp[8] + bp[7]),
    ]
    return np.stack(np.broadcast_arrays(*D), axis=-1), np.stack(np.broadcast_arrays(*Dp), axis=-1)


def printed_Pi(t, modes: NormalModes, spec: SystemSpec, opts: PrintedOptions = PrintedOptions()):
    """Pi_1..Pi_16 from the tabulated expressions."""
    s = eval_s(t, modes)
    S = [None] + [s[..., k] for k in range(14)]
    aux = auxiliaries(t, modes)
    n1, n2, nb1, nb2, m1, m2 = (aux[k] for k in ("n1", "n2", "nbar1", "nbar2", "m1", "m2"))
    r1, r2 = modes.r1, modes.r2
    L = spec.lam / 2
    pi8_s10 = n2 * m1 if opts.pi8_fix else m1 * m2
    p9a, p9b = (nb1, nb2) if opts.pi9_fix else (n1, n2)
    p12 = nb1 if opts.pi12_fix else n1
    P = [
        r1 * L * (2 * n1 * nb1 * S[2] - n1 * nb2 * S[14] - n2 * nb1 * S[10]),
        L * n1 * nb2 * S[14],
        L * n2 * nb1 * S[10],
        r2 * L * (2 * n2 * nb2 * S[4] - nb1 * n2 * S[10] - n1 * nb2 * S[14]),
        r1 * L * (2 * n1 * S[5] - 2 * n1 * m1 * S[2] - n2 * S[8] + n2 * m1 * S[10] - n1 * S[12] + n1 * m2 * S[14]),
        L * (n1 * S[12] - n1 * m2 * S[14]),
        L * (n2 * S[8] - n2 * m1 * S[10]),
        r2 * L * (2 * n2 * S[6] - 2 * n2 * m2 * S[4] - n2 * S[8] + pi8_s10 * S[10] - n1 * S[12] + n1 * m2 * S[14]),
        r1 * L * (2 * p9a * S[5] - 2 * m1 * nb1 * S[2] - nb1 * S[9] + m2 * nb1 * S[10] - p9b * S[13] + m1 * nb2 * S[14]),
        L * (nb2 * S[13] - m1 * nb2 * S[14]),
        L * (nb1 * S[9] - nb1 * m2 * S[10]),
        r2 * L * (2 * nb2 * S[6] - 2 * nb2 * m2 * S[4] + m2 * nb1 * S[10] - nb2 * S[13] + m1 * nb2 * S[14] - p12 * S[9]),
        r1 * L * (
            -S[7] + 2 * m1**2 * S[2] - 4 * m1 * S[5] + 2 * S[1] + m2 * S[8] + m1 * S[9] - m1 * m2 * S[10]
            - S[11] + m1 * S[12] + m2 * S[13] - m1 * m2 * S[14]
        ),
        L * (m1 * m2 * S[14] - m2 * S[13] - m1 * S[12] + S[11]),
        L * (S[7] - m2 * S[8] - m1 * S[9] + m1 * m2 * S[10]),
        r2 * L * (
            m2 * S[13] + m1 * S[12] - S[11] - m1 * m2 * S[10] + m1 * S[9] + m2 * S[8] - S[7]
            + 2 * m2**2 * S[4] - 4 * m2 * S[6] + 2 * S[3] - m1 * m2 * S[14]
        ),
    ]
    return np.stack(np.broadcast_arrays(*P), axis=-1)


# ---------------------------------------------------------------------------
# public evaluators


def eval_D(t, modes: NormalModes, spec: SystemSpec, method: str = "exact",
           opts: PrintedOptions = PrintedOptions(), guard: bool = True):
    """Self-action coefficients ``(D, Dp)`` at time(s) t.

    With ``method="exact"`` the own-oscillator entries D_1..D_4 (D'_1..D'_4)
    hold the complete coefficient of their monomial, and the cross entries
    split it by Lagrangian (oscillator 1 into D, oscillator 2 into D').
    """
    if guard:
        check_nodes(t, modes)
    if method == "exact":
        return _exact_D(t, modes, spec)
    if method == "printed":
        return printed_D(t, modes, spec, opts)
    raise ValueError(f"unknown method {method!r}")


def eval_Pi(t, modes: NormalModes, spec: SystemSpec, method: str = "exact",
            opts: PrintedOptions = PrintedOptions(), guard: bool = True):
    """Interaction-action coefficients Pi_1..Pi_16 at time(s) t."""
    if guard:
        check_nodes(t, modes)
    if method == "exact":
        return _exact_Pi(t, modes, spec)
    if method == "printed":
        return printed_Pi(t, modes, spec, opts)
    raise ValueError(f"unknown method {method!r}")


def kernel_table(t: float, modes: NormalModes, spec: SystemSpec, method: str = "exact",
                 opts: PrintedOptions = PrintedOptions()) -> KernelTable:
    check_nodes(t, modes)
    aux = auxiliaries(t, modes)
    D, Dp = eval_D(t, modes, spec, method, opts, guard=False)
    return KernelTable(
        t=float(t), s=eval_s(t, modes), D=D, Dp=Dp,
        Pi=eval_Pi(t, modes, spec, method, opts, guard=False),
        **{k: float(v) for k, v in aux.items()},
    )


def action_from_D(D, Dp, X, xi) -> float:
    """Self-action as the bilinear form in D and D' (X, xi ordered f1, f2, i1, i2)."""
    total = 0.0
    for k, (a, b) in enumerate(D_MONOMIALS):
        coef = D[k] if k < 4 else D[k] + Dp[k]
        total += coef * X[a] * xi[b]
    for k, (a, b) in enumerate(DP_OWN):
        total += Dp[k] * X[a] * xi[b]
    return total


def action_from_Pi(Pi, X, xi) -> float:
    """Interaction action as the bilinear form in Pi."""
    return sum(Pi[k] * X[a] * xi[b] for k, (a, b) in enumerate(PI_MONOMIALS))


def classical_paths(tau, t: float, modes: NormalModes, X, xi):
    """Normal-mode paths with position data at both ends.

    ``X`` and ``xi`` are sequences ``(f1, f2, i1, i2)``.  Returns
    ``(X1, X2, xi1, xi2)`` evaluated at ``tau`` (any complex-compatible
    array, so complex-step derivatives work).
    """
    check_nodes(t, modes)
    O1, O2, d1, d2, r1, r2 = modes.Omega1, modes.Omega2, modes.delta1, modes.delta2, modes.r1, modes.r2
    den = 1 - r1 * r2
    tau = np.asarray(tau)
    out = []
    for sign, (f1, f2, i1, i2) in ((-1, X), (1, xi)):
        u1f, u1i = (f1 - r2 * f2) / den, (i1 - r2 * i2) / den
        u2f, u2i = (f2 - r1 * f1) / den, (i2 - r1 * i1) / den
        a1 = u1f * np.exp(-sign * d1 * t) / np.sin(O1 * t) - np.cos(O1 * t) / np.sin(O1 * t) * u1i
        a2 = u2f * np.exp(-sign * d2 * t) / np.sin(O2 * t) - np.cos(O2 * t) / np.sin(O2 * t) * u2i
        mode1 = (a1 * np.sin(O1 * tau) + u1i * np.cos(O1 * tau)) * np.exp(sign * d1 * tau)
        mode2 = (a2 * np.sin(O2 * tau) + u2i * np.cos(O2 * tau)) * np.exp(sign * d2 * tau)
        out.append((mode1 + r2 * mode2, r1 * mode1 + mode2))
    (X1, X2), (xi1, xi2) = out
    return X1, X2, xi1, xi2


# ---------------------------------------------------------------------------
# rescaled first-order construction used by the density module
#
# The xi boundary data are rescaled so that every path stays bounded:
# xi_f_j by sin(O_j t) and xi_i_j by sin(O_j t) exp(-d_j t).  The Gaussian
# reduction is invariant under this change of variables.


def xi_scales(t, modes: NormalModes) -> np.ndarray:
    """Rescaling factors of the xi boundary data, shape ``t.shape + (4,)``."""
    t = np.asarray(t, dtype=float)
    s1, s2 = np.sin(modes.Omega1 * t), np.sin(modes.Omega2 * t)
    return np.stack(
        [s1, s2, s1 * np.exp(-modes.delta1 * t), s2 * np.exp(-modes.delta2 * t)], axis=-1
    )


def zeroth_paths(t, modes: NormalModes):
    """Uncoupled paths: raw X-type and rescaled xi-type.

    Returns ``(zX, UX, zK, UK)`` in the layout of :func:`path_coefficients`;
    mixing ratios are ignored.
    """
    t = np.asarray(t, dtype=float)
    zero, one = np.zeros_like(t), np.ones_like(t)
    UX = np.zeros(t.shape + (2, 4, 4), dtype=complex)
    UK = np.zeros(t.shape + (2, 4, 4), dtype=complex)
    for j, (O, d) in enumerate(zip(modes.Omega, modes.delta)):
        sn, cs = np.sin(O * t), np.cos(O * t)
        UX[..., j, j, :] = sincos(j, np.exp(d * t) / sn, zero)
        UX[..., j, 2 + j, :] = sincos(j, -cs / sn, one)
        e = np.exp(-d * t)
        UK[..., j, j, :] = sincos(j, e, zero)
        UK[..., j, 2 + j, :] = sincos(j, -cs * e, sn * e)
    return mode_basis(modes, -1), UX, mode_basis(modes, 1), UK


def first_order_xi_paths(t, modes: NormalModes, spec: SystemSpec, zK, UK0) -> np.ndarray:
    """First-order xi paths per unit coupling.

    Each partner exponential ``exp(z tau)`` is driven through the own
    oscillator's response ``1 / (M (z^2 - 2 gamma z + w0^2))``; the own-mode
    solution matching the endpoint values is then subtracted so the
    correction vanishes at both ends.  The result solves the linearised
    equations exactly.
    """
    t = np.asarray(t, dtype=float)
    U1 = np.zeros_like(UK0)
    osc = spec.oscillators
    for i, j in ((0, 1), (1, 0)):
        o = osc[i]
        part = slice(2 * j, 2 * j + 2)
        R = np.zeros(4, dtype=complex)
        zp = zK[part]
        R[part] = 1.0 / (o.mass * (zp**2 - 2 * o.gamma * zp + o.omega0**2))
        O, d = modes.Omega[i], modes.delta[i]
        sn = np.sin(O * t)
        nbar, cot = np.exp(-d * t) / sn, np.cos(O * t) / sn
        ezt = np.exp(zK * t[..., None])
        for a in range(4):
            tail = UK0[..., j, a, :] * R
            e0 = tail.sum(axis=-1)
            et = (tail * ezt).sum(axis=-1)
            U1[..., i, a, :] = tail - sincos(i, et * nbar - e0 * cot, e0)
    return U1


@dataclass(frozen=True)
class StableAction:
    """Rescaled action coefficients of the linear-response construction.

    ``D3h``/``D4h`` hold the own-oscillator coefficients of
    ``X_f xi_i`` and ``X_i xi_i`` (index 0 for oscillator 1, 1 for 2);
    ``Kint`` is the interaction action on the uncoupled paths.
    """

    t: np.ndarray
    D3h: np.ndarray
    D4h: np.ndarray
    Kint: np.ndarray
    scales: np.ndarray


def stable_action(t, modes: NormalModes, spec: SystemSpec) -> StableAction:
    """Rescaled action coefficients at time(s) t.

    The self-action of each oscillator reduces to a boundary term, so its
    coefficients are closed form; the first-order self-action of the exact
    first-order paths vanishes identically and only the interaction term
    survives at that order.
    """
    t = np.asarray(t, dtype=float)
    D3h = np.empty(t.shape + (2,))
    D4h = np.empty(t.shape + (2,))
    for j, (o, O, d) in enumerate(zip(spec.oscillators, modes.Omega, modes.delta)):
        D3h[..., j] = -o.mass * O / 2 * np.ones_like(t)
        D4h[..., j] = o.mass / 2 * (O * np.cos(O * t) + d * np.sin(O * t)) * np.exp(-d * t)
    zX, UX, zK, UK = zeroth_paths(t, modes)
    E = pair_integrals(zX, zK, t)
    Kint = 0.5 * spec.lam * (
        np.einsum("...ap,...pq,...bq->...ab", UX[..., 0, :, :], E, UK[..., 1, :, :])
        + np.einsum("...ap,...pq,...bq->...ab", UX[..., 1, :, :], E, UK[..., 0, :, :])
    ).real
    return StableAction(t=t, D3h=D3h, D4h=D4h, Kint=Kint, scales=xi_scales(t, modes))
