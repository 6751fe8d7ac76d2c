"""Frequency-integrated influence kernels and the equilibrium variance.

Every kernel is an integral over the bath frequency of ``omega coth(hbar
omega / 2 k_B T)`` times an inner double time integral.  The inner integrals
are separated with ``cos(w(t'-t'')) = Re[exp(iwt') exp(-iwt'')]`` into
products of one-dimensional Fourier transforms of damped sinusoids, which
have closed forms; only the frequency integral is numerical.

Two families of values are returned:

* rescaled ("hat") values, multiplied by the boundary scale factors
  ``sin(O t)`` (final xi) and ``sin(O t) exp(-d t)`` (initial xi), which stay
  bounded for all t;
* raw values, obtained by dividing the scale factors back out.  They diverge
  at the zeros of ``sin(O t)`` and are meant for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .kernels import check_nodes, first_order_xi_paths, phi, zeroth_paths
from .model import BathSpec, NormalModes, OscillatorSpec, SpecError, SystemSpec

COTH_SMALL = 1e-4


class QuadratureError(RuntimeError):
    """Frequency quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, estimate: float = math.nan):
        super().__init__(f"{message} (error estimate {estimate:.3g})")
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings of the adaptive frequency quadrature.

    Parameters
    ----------
    omega_rel_tol, omega_abs_tol : float
        Tolerances passed to the panel-adaptive rule.
    max_panels : int
        Upper bound on the number of subintervals.
    cutoff_nu_max : tuple of float, optional
        Per-bath cutoffs overriding those of the :class:`SystemSpec`.
    """

    omega_rel_tol: float = 1e-8
    omega_abs_tol: float = 1e-13
    max_panels: int = 20000
    cutoff_nu_max: tuple[float, float] | None = None

    def __post_init__(self):
        if not (self.omega_rel_tol > 0 and self.omega_abs_tol > 0):
            raise SpecError("quadrature tolerances must be > 0")
        if self.max_panels < 1:
            raise SpecError("max_panels must be >= 1")

    def cutoffs(self, spec: SystemSpec) -> tuple[float, float]:
        if self.cutoff_nu_max is not None:
            return tuple(float(v) for v in self.cutoff_nu_max)
        return (spec.bath1.nu_max, spec.bath2.nu_max)


DEFAULT_QUADRATURE = QuadratureConfig()


def coth(x):
    """``coth(x)`` with the series ``1/x + x/3`` below ``|x| = 1e-4``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < COTH_SMALL
    with np.errstate(divide="ignore"):
        series = 1.0 / x + x / 3.0
    xs = np.where(small, 1.0, x)
    return np.where(small, series, 1.0 / np.tanh(xs))


def thermal_weight(omega, temperature: float, hbar: float = 1.0, kb: float = 1.0):
    """``omega coth(hbar omega / 2 k_B T)``, finite at ``omega = 0``.

    At ``T = 0`` the coth factor is 1.
    """
    omega = np.asarray(omega, dtype=float)
    if temperature == 0:
        return omega
    with np.errstate(over="ignore"):
        x = hbar * omega / (2.0 * kb * temperature)
    small = np.abs(x) < COTH_SMALL
    xs = np.where(small, 1.0, x)
    # near omega = 0 use omega coth(x) = (2 k_B T / hbar) (1 + x^2 / 3)
    series = (2.0 * kb * temperature / hbar) * (1.0 + np.where(small, x, 0.0) ** 2 / 3.0)
    return np.where(small, series, omega / np.tanh(xs))


# Gauss-Kronrod 21/10 rule on [-1, 1] (non-negative half, node 0 last)
_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720, 0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss weights embedded on the 21 nodes (odd positions of the half rule)
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9]] = _WG
GAUSS_WEIGHTS[[19, 17, 15, 13, 11]] = _WG
EVAL_BLOCK = 1 << 13  # abscissae per vectorised integrand call


def _gk_panels(f, lo, hi):
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = (mid[:, None] + half[:, None] * GK_NODES[None, :]).ravel()
    vals = np.concatenate([np.asarray(f(x[k:k + EVAL_BLOCK])) for k in range(0, x.size, EVAL_BLOCK)])
    vals = vals.reshape(lo.size, 21, -1)
    Ik = half[:, None] * np.einsum("k,pkm->pm", GK_WEIGHTS, vals)
    Ig = half[:, None] * np.einsum("k,pkm->pm", GAUSS_WEIGHTS, vals)
    return Ik, np.max(np.abs(Ik - Ig), axis=1)


def adaptive_gk21(f, a: float, b: float, points=(), rel_tol: float = 1e-8, abs_tol: float = 1e-13,
                  max_panels: int = 20000):
    """Panel-adaptive Gauss-Kronrod quadrature of a vector-valued integrand.

    ``f`` maps an abscissa array of shape ``(n,)`` to values of shape
    ``(n, m)``; all panels of one refinement sweep are evaluated in a few
    vectorised calls.  Panels are split at ``points``.  Each sweep bisects
    the panels with the largest Kronrod-Gauss differences until the summed
    estimate is below ``max(abs_tol, rel_tol * max|I|)``.

    Returns ``(integral, error_estimate, n_panels)``.
    """
    edges = np.array(sorted({float(a), float(b), *(float(p) for p in points if a < p < b)}))
    lo, hi = edges[:-1], edges[1:]
    I, E = _gk_panels(f, lo, hi)
    while True:
        total = I.sum(axis=0)
        err = float(E.sum())
        tol = max(abs_tol, rel_tol * float(np.max(np.abs(total))))
        if err <= tol:
            return total, err, lo.size
        # bisect the largest contributors until the rest fits in half the budget
        order = np.argsort(E, kind="stable")[::-1]
        rest = err - np.cumsum(E[order])
        nsplit = min(int(np.count_nonzero(rest > 0.5 * tol)) + 1, order.size)
        if lo.size + nsplit > max_panels:
            raise QuadratureError(f"panel limit {max_panels} reached", err)
        split = order[:nsplit]
        keep = np.ones(lo.size, dtype=bool)
        keep[split] = False
        m = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], m])
        new_hi = np.concatenate([m, hi[split]])
        nI, nE = _gk_panels(f, new_lo, new_hi)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        I = np.concatenate([I[keep], nI])
        E = np.concatenate([E[keep], nE])


def _integrate(f, upper: float, points, qcfg: QuadratureConfig):
    res, err, _ = adaptive_gk21(f, 0.0, upper, points, qcfg.omega_rel_tol, qcfg.omega_abs_tol, qcfg.max_panels)
    return res, err


# ---------------------------------------------------------------------------
# bath correlation function


def eval_alpha(z, osc: OscillatorSpec, bath: BathSpec, hbar: float = 1.0, kb: float = 1.0,
               qcfg: QuadratureConfig = DEFAULT_QUADRATURE) -> complex:
    """Bath correlation ``alpha(z) = alpha' + i alpha''`` of the Ohmic bath.

    ``(1/pi) int_0^nu J(w) [coth(hbar w / 2 k_B T) cos(w z) - i sin(w z)] dw``
    with ``J(w) = eta w``; ``z`` may be complex.
    """
    z = complex(z)
    eta = osc.eta

    def f(w):
        c, s = np.cos(w * z), np.sin(w * z)
        val = eta * (thermal_weight(w, osc.temperature, hbar, kb) * c - 1j * w * s)
        return np.stack([val.real, val.imag], axis=-1)

    res, _ = _integrate(f, bath.nu_max, [], qcfg)
    return complex(res[0], res[1]) / math.pi


# ---------------------------------------------------------------------------
# single-oscillator kernels A, B, C


def _damped_transforms(Omega: float, delta: float, omega, t):
    """``int_0^t {sin, cos}(O u) exp(-(d + i w) u) du`` (both bounded)."""
    a = -delta - 1j * np.asarray(omega)
    ep, em = phi(a + 1j * Omega, t), phi(a - 1j * Omega, t)
    return (ep - em) / 2j, (ep + em) / 2


def inner_abc(omega, t, Omega: float, delta: float):
    """Rescaled inner kernels ``(A_w, B_w, C_w)`` at frequency omega.

    The raw inner kernels follow by dividing by ``sin^2``,
    ``sin^2 exp(-d t)`` and ``sin^2 exp(-2 d t)`` respectively.
    """
    t = np.asarray(t, dtype=float)
    Gs, Gc = _damped_transforms(Omega, delta, omega, t)
    # final-end transform, rewritten through u = t - tau so it stays bounded
    Ff = np.sin(Omega * t) * Gc - np.cos(Omega * t) * Gs
    A = np.abs(Ff) ** 2
    B = 2.0 * np.real(Ff * np.conj(Gs))
    C = np.abs(Gs) ** 2
    return A, B, C


@dataclass(frozen=True)
class ABCResult:
    """A, B, C for one oscillator on a time grid.

    ``*_hat`` are the rescaled values; ``A``, ``B``, ``C`` the raw ones
    (infinite or nan at the sine nodes).
    """

    t: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray
    C_hat: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    error: float


def eval_ABC(t, osc_index: int, spec: SystemSpec, modes: NormalModes,
             qcfg: QuadratureConfig = DEFAULT_QUADRATURE, guard: bool = False) -> ABCResult:
    """Kernels A_i, B_i, C_i of oscillator ``osc_index`` (0 or 1).

    Parameters
    ----------
    t : float or array
        Time(s) ``>= 0``.
    guard : bool
        Raise :class:`~quasirelax.kernels.NodeProximityError` if a raw value
        would be requested at a sine node.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if guard:
        check_nodes(t, modes)
    osc = spec.oscillators[osc_index]
    nu = qcfg.cutoffs(spec)[osc_index]
    O, d = modes.Omega[osc_index], modes.delta[osc_index]
    pref = osc.mass * osc.gamma / math.pi

    def f(w):
        w = w[:, None]
        A, B, C = inner_abc(w, t, O, d)
        return thermal_weight(w, osc.temperature, spec.hbar, spec.kb) * np.concatenate([A, B, C], axis=1)

    res, err = _integrate(f, nu, [O], qcfg)
    n = t.size
    Ah, Bh, Ch = (pref * res[k * n:(k + 1) * n] for k in range(3))
    sn2 = np.sin(O * t) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        A = Ah / sn2
        B = Bh * np.exp(d * t) / sn2
        C = Ch * np.exp(2 * d * t) / sn2
    return ABCResult(t, Ah, Bh, Ch, A, B, C, pref * err)


def eval_C_hat(t, osc_index: int, spec: SystemSpec, modes: NormalModes,
               qcfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """Rescaled C_i alone; returns ``(values, error)``.

    Depends only on oscillator ``osc_index`` and its bath, so it is
    bit-identical under changes of the coupling or of the partner.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    osc = spec.oscillators[osc_index]
    O, d = modes.Omega[osc_index], modes.delta[osc_index]
    pref = osc.mass * osc.gamma / math.pi

    def f(w):
        w = w[:, None]
        Gs, _ = _damped_transforms(O, d, w, t)
        return thermal_weight(w, osc.temperature, spec.hbar, spec.kb) * np.abs(Gs) ** 2

    res, err = _integrate(f, qcfg.cutoffs(spec)[osc_index], [O], qcfg)
    return pref * res, pref * err


# ---------------------------------------------------------------------------
# cross kernels E1..E4

# transforms entering the printed cross kernels, per oscillator j:
#   H_j  of sin(O_j (t - tau)) exp(-d_j (t - tau))   (initial-end path)
#   F_j  of sin(O_j tau) exp(-d_j (t - tau))         (final-end path)
H1, H2, FA, FB = range(4)


def _cross_transforms(omega, t, modes: NormalModes):
    out = []
    for O, d in zip(modes.Omega, modes.delta):
        Gs, Gc = _damped_transforms(O, d, omega, t)
        out.append((Gs, np.sin(O * t) * Gc - np.cos(O * t) * Gs))
    (h1, fa), (h2, fb) = out
    return np.stack(np.broadcast_arrays(h1, h2, fa, fb), axis=-1)


def _gram(X):
    """``Re(X_a conj X_b)`` over the last axis."""
    return np.real(X[..., :, None] * np.conj(X[..., None, :]))


def _scale_ratios(t, modes: NormalModes):
    t = np.asarray(t, dtype=float)
    sin1, sin2 = np.sin(modes.Omega1 * t), np.sin(modes.Omega2 * t)
    s1, s2 = sin1 * np.exp(-modes.delta1 * t), sin2 * np.exp(-modes.delta2 * t)
    return sin1, sin2, s1, s2


def _assemble_E(G1, G2, t, modes: NormalModes):
    """Rescaled E1..E4 from the per-bath Gram integrals."""
    sin1, sin2, s1, s2 = _scale_ratios(t, modes)
    r1, r2 = modes.r1, modes.r2
    with np.errstate(divide="ignore", invalid="ignore"):
        rho21, rho12 = s2 / s1, s1 / s2
        k21, k12 = sin2 / sin1, sin1 / sin2
        E1 = r2 * (G1[..., H2, H1] - G1[..., H1, H1] * rho21) + r1 * (G2[..., H1, H2] - G2[..., H2, H2] * rho12)
        E2 = r2 * (G1[..., FB, H1] - G1[..., FA, H1] * k21) + r1 * (G2[..., FB, H1] - G2[..., FB, H2] * rho12)
        E3 = r2 * (G1[..., FA, H2] - G1[..., FA, H1] * rho21) + r1 * (G2[..., FA, H2] - G2[..., FB, H2] * k12)
        E4 = r2 * (G1[..., FB, FA] - G1[..., FA, FA] * k21) + r1 * (G2[..., FA, FB] - G2[..., FB, FB] * k12)
    return np.stack([E1, E2, E3, E4], axis=-1)


def e_scales(t, modes: NormalModes) -> np.ndarray:
    """Boundary scale factors of ``(xi_i1 xi_i2, xi_f2 xi_i1, xi_f1 xi_i2, xi_f1 xi_f2)``."""
    sin1, sin2, s1, s2 = _scale_ratios(t, modes)
    return np.stack([s1 * s2, sin2 * s1, sin1 * s2, sin1 * sin2], axis=-1)


def printed_E_inner(omega, t, modes: NormalModes) -> np.ndarray:
    """Raw inner cross kernels at one frequency, shape ``(..., 2, 4)``.

    Axis -2 is the bath, axis -1 is E1..E4.  The mixing-ratio prefactor of
    each bath is included, the ``(2 M gamma / pi) omega coth`` weight is not.
    """
    G = _gram(_cross_transforms(omega, t, modes))
    zero = np.zeros_like(G)
    per_bath = [_assemble_E(G, zero, t, modes), _assemble_E(zero, G, t, modes)]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.stack(per_bath, axis=-2) / e_scales(t, modes)[..., None, :]


@dataclass(frozen=True)
class EResult:
    t: np.ndarray
    E_hat: np.ndarray  # (..., 4), rescaled
    E: np.ndarray  # (..., 4), raw
    error: float


def eval_E(t, spec: SystemSpec, modes: NormalModes, qcfg: QuadratureConfig = DEFAULT_QUADRATURE,
           method: str = "printed", guard: bool = False) -> EResult:
    """Cross kernels E1..E4.

    ``method="printed"`` integrates the tabulated triangle-domain integrands
    (first order in the mixing ratios of ``modes``).  ``method="linear"``
    builds E1 from the exact first-order paths (see :func:`linear_E1`) and
    returns nan for E2..E4, which do not enter the diagonal density.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if guard:
        check_nodes(t, modes)
    if method == "linear":
        E1h, err = linear_E1(t, spec, modes, qcfg)
        Eh = np.full(t.shape + (4,), np.nan)
        Eh[..., 0] = E1h
    elif method == "printed":
        nus = qcfg.cutoffs(spec)
        Gs, err = [], 0.0
        for i, osc in enumerate(spec.oscillators):
            def f(w, osc=osc):
                w = w[:, None]
                G = _gram(_cross_transforms(w, t, modes)).reshape(w.shape[0], -1)
                return thermal_weight(w, osc.temperature, spec.hbar, spec.kb) * G

            res, e = _integrate(f, nus[i], modes.Omega, qcfg)
            pref = 2.0 * osc.mass * osc.gamma / math.pi
            Gs.append(pref * res.reshape(t.shape + (4, 4)))
            err += pref * e
        Eh = _assemble_E(Gs[0], Gs[1], t, modes)
    else:
        raise ValueError(f"unknown method {method!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        E = Eh / e_scales(t, modes)
    return EResult(t, Eh, E, err)


FACTOR_MIN = 1e-6  # smallest d*t for the factored transform


def _path_transforms(U, zK, omega, t):
    """``sum_p U[n, ..., p] phi(zK_p + i w, t_n)`` for frequencies ``omega`` (1-D).

    For ``d t`` not tiny the sum is split as
    ``exp(i w t) sum_p U_p exp(z_p t) / (z_p + i w) - sum_p U_p / (z_p + i w)``,
    which costs one complex exponential per (w, t) instead of one per term.
    """
    out = np.empty((omega.size,) + U.shape[:-1], dtype=complex)
    fac = t * np.min(np.abs(zK.real)) > FACTOR_MIN
    if np.any(~fac):
        e = phi(zK[None, None, :] + 1j * omega[:, None, None], t[None, ~fac, None])
        out[:, ~fac] = np.einsum("n...p,wnp->wn...", U[~fac], e)
    if np.any(fac):
        tf = t[fac]
        inv = 1.0 / (zK[None, :] + 1j * omega[:, None])  # (w, 4)
        Uf = U[fac]
        A = Uf * np.exp(np.multiply.outer(tf, zK)).reshape(tf.shape + (1,) * (Uf.ndim - 2) + (4,))
        phase = np.exp(1j * np.multiply.outer(omega, tf))  # (w, n)
        grow = np.einsum("n...p,wp->wn...", A, inv)
        base = np.einsum("n...p,wp->wn...", Uf, inv)
        out[:, fac] = phase.reshape(phase.shape + (1,) * (Uf.ndim - 2)) * grow - base
    return out


def linear_E1(t, spec: SystemSpec, modes: NormalModes, qcfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """Rescaled ``E1 = 2 Gamma(i1, i2)`` from the exact first-order xi paths.

    Returns ``(E1_hat, error)``.  The coupling is factored out before the
    quadrature, so ``lam = 0`` gives exactly zero.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if spec.lam == 0:
        return np.zeros_like(t), 0.0
    zX, UX, zK, UK0 = zeroth_paths(t, modes)
    U1 = first_order_xi_paths(t, modes, spec, zK, UK0)
    nus = qcfg.cutoffs(spec)
    o1, o2 = spec.oscillators
    w1 = 2.0 * o1.mass * o1.gamma / math.pi
    w2 = 2.0 * o2.mass * o2.gamma / math.pi
    # own-bath pieces: bath 1 sees xi1 = (zeroth from i1) x (first from i2)
    U_b1 = np.stack([UK0[:, 0, 2, :], U1[:, 0, 3, :]], axis=1)
    U_b2 = np.stack([U1[:, 1, 2, :], UK0[:, 1, 3, :]], axis=1)
    total, err = np.zeros_like(t), 0.0
    for osc, U, nu, pref in ((o1, U_b1, nus[0], w1), (o2, U_b2, nus[1], w2)):
        def f(w, osc=osc, U=U):
            F = _path_transforms(U, zK, w, t)
            wt = thermal_weight(w, osc.temperature, spec.hbar, spec.kb)[:, None]
            return wt * np.real(F[..., 0] * np.conj(F[..., 1]))

        res, e = _integrate(f, nu, modes.Omega, qcfg)
        total = total + pref * res
        err += pref * e
    return spec.lam * total, abs(spec.lam) * err


# ---------------------------------------------------------------------------
# assembled coefficients


@dataclass(frozen=True)
class InfluenceCoefficients:
    """Raw influence coefficients at one time point.

    ``f1``/``f2`` are the assembled linear-response factors (``None`` until
    :func:`eval_f` has been applied).
    """

    t: float
    A1: float
    A2: float
    B1: float
    B2: float
    C1: float
    C2: float
    E1: float
    E2: float
    E3: float
    E4: float
    f1: float | None = None
    f2: float | None = None


def eval_f(table, infl: InfluenceCoefficients, a1: float, a2: float, hbar: float = 1.0):
    """Linear-response factors f1, f2 from raw kernel and influence values.

    ``table`` is a :class:`~quasirelax.kernels.KernelTable`; ``a_i`` is
    ``1 / 8 sigma_0i^2``.
    """
    D, Dp, Pi = table.D, table.Dp, table.Pi
    den1 = D[3] ** 2 + 4 * a1 * hbar * (infl.C1 + hbar * a1)
    den2 = Dp[3] ** 2 + 4 * a2 * hbar * (infl.C2 + hbar * a2)
    f1 = D[8] + Dp[8] + Pi[5] - D[2] * D[3] * (D[10] + Dp[10] + Pi[13]) / den1
    f2 = D[9] + Dp[9] + Pi[6] - (Dp[2] * Dp[3] * (D[11] + Dp[11] + Pi[14]) + 2 * hbar * a2 * infl.E1 * Dp[2]) / den2
    return float(f1), float(f2)


def influence_coefficients(t: float, spec: SystemSpec, modes: NormalModes,
                           qcfg: QuadratureConfig = DEFAULT_QUADRATURE, table=None,
                           a: tuple[float, float] | None = None) -> InfluenceCoefficients:
    """Raw A, B, C, E (and f when ``table`` and ``a`` are given) at time t."""
    r1 = eval_ABC(t, 0, spec, modes, qcfg, guard=True)
    r2 = eval_ABC(t, 1, spec, modes, qcfg, guard=True)
    E = eval_E(t, spec, modes, qcfg, method="printed").E[0]
    infl = InfluenceCoefficients(
        t=float(t), A1=r1.A[0], A2=r2.A[0], B1=r1.B[0], B2=r2.B[0], C1=r1.C[0], C2=r2.C[0],
        E1=E[0], E2=E[1], E3=E[2], E4=E[3],
    )
    if table is None or a is None:
        return infl
    f1, f2 = eval_f(table, infl, a[0], a[1], spec.hbar)
    return InfluenceCoefficients(**{**infl.__dict__, "f1": f1, "f2": f2})


# ---------------------------------------------------------------------------
# equilibrium variance


def fdt_variance(osc: OscillatorSpec, hbar: float = 1.0, kb: float = 1.0, rel_tol: float = 1e-10,
                 full_output: bool = False):
    """Stationary position variance of a damped oscillator.

    ``(hbar/pi) int_0^inf coth(hbar w / 2 k_B T) 2 gamma w /
    (M [(w^2 - w0^2)^2 + 4 gamma^2 w^2]) dw``, truncated at
    ``max(50 w0, w0 + 40 gamma)``.  The truncated tail is bounded
    analytically and folded into the error estimate.

    Returns the variance, or ``(variance, error)`` with ``full_output``.
    """
    g, w0, M = osc.gamma, osc.omega0, osc.mass
    if not g > 0:
        raise SpecError("fdt_variance requires gamma > 0")

    def f(w):
        return float(thermal_weight(w, osc.temperature, hbar, kb)) * 2 * g / (M * ((w * w - w0 * w0) ** 2 + 4 * g * g * w * w))

    top = max(50.0 * w0, w0 + 40.0 * g)
    # bracket the Lorentzian peak explicitly
    edges = [0.0, max(w0 - 20 * g, 0.5 * w0), w0, min(w0 + 20 * g, 0.5 * (w0 + top)), top]
    val, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = quad(f, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=500)
        val += v
        err += e
    # tail: integrand <= 2 g w coth(x_top) / (M (w^2 - w0^2)^2), coth decreasing
    ct = float(coth(hbar * top / (2 * kb * osc.temperature))) if osc.temperature > 0 else 1.0
    tail = ct * g / (M * (top * top - w0 * w0))
    val *= hbar / math.pi
    err = (err + tail) * hbar / math.pi
    if err > 1e-3 * abs(val):
        raise QuadratureError("equilibrium-variance tail exceeds tolerance", err)
    return (val, err) if full_output else val


def tanh_variance(osc: OscillatorSpec, hbar: float = 1.0, kb: float = 1.0) -> float:
    """Zero-linewidth variance ``hbar coth(hbar w0 / 2 k_B T) / 2 M w0``."""
    c = 1.0 if osc.temperature == 0 else float(coth(hbar * osc.omega0 / (2 * kb * osc.temperature)))
    return hbar * c / (2 * osc.mass * osc.omega0)
