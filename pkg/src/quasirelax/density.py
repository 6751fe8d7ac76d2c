"""Time-dependent Gaussian reduced density of the two oscillators.

The diagonal density is

    rho(x1, x2, t) = norm * exp[-x1^2 / 2 s1 - x1 x2 / beta12 - x2^2 / 2 s2]

with ``s_i = sigma_i^2(t)``.  By default every quantity is evaluated from the
rescaled kernels, which stay finite at the zeros of ``sin(Omega_i t)`` and
for long times; ``method="naive"`` evaluates the raw printed formulas and is
only usable away from the sine nodes and for moderate ``gamma t``.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .influence import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    eval_C_hat,
    fdt_variance,
    influence_coefficients,
    linear_E1,
    tanh_variance,
)
from .kernels import kernel_table, stable_action
from .model import NormalModes, OscillatorSpec, SpecError, SystemSpec, derive_normal_modes, linear_modes

CHUNK = 16
NODE_SIN = 1e-4  # |sin(Omega t)| below which the covariance is averaged
NODE_STEP = 1e-3  # half-width of that average in units of 1/Omega
THREADS_ENV = "QUASIRELAX_THREADS"


class NotPositiveDefiniteError(ValueError):
    """The precision matrix of a state is not positive definite."""


@dataclass(frozen=True)
class GaussianState:
    """Diagonal Gaussian state at one time.

    ``inv_beta12`` is the primary cross parameter (exactly 0 without
    coupling); ``beta12`` is its reciprocal and may be infinite.
    """

    t: float
    sigma1_sq: float
    sigma2_sq: float
    inv_beta12: float
    norm: float

    @property
    def beta12(self) -> float:
        return math.inf if self.inv_beta12 == 0 else 1.0 / self.inv_beta12

    @property
    def precision(self) -> np.ndarray:
        return np.array([[1 / self.sigma1_sq, self.inv_beta12], [self.inv_beta12, 1 / self.sigma2_sq]])

    def is_positive_definite(self) -> bool:
        return self.sigma1_sq > 0 and self.sigma2_sq > 0 and self.inv_beta12**2 * self.sigma1_sq * self.sigma2_sq < 1

    @classmethod
    def from_precision(cls, t: float, s1: float, s2: float, inv_beta: float) -> "GaussianState":
        det = 1.0 / (s1 * s2) - inv_beta**2
        norm = math.sqrt(det) / (2 * math.pi) if det > 0 else math.nan
        return cls(float(t), float(s1), float(s2), float(inv_beta), norm)


@dataclass(frozen=True)
class Trajectory:
    """States on a strictly increasing grid plus run metadata."""

    grid: np.ndarray
    states: tuple[GaussianState, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.grid) != len(self.states):
            raise ValueError("one state per grid point required")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def array(self, name: str) -> np.ndarray:
        if name == "beta12":
            return np.array([s.beta12 for s in self.states])
        return np.array([getattr(s, name) for s in self.states])


def second_moments(state: GaussianState) -> tuple[float, float, float]:
    """``(<x1^2>, <x2^2>, <x1 x2>)`` from the precision matrix."""
    if not state.is_positive_definite():
        raise NotPositiveDefiniteError(f"state at t={state.t} is not positive definite")
    det = 1.0 / (state.sigma1_sq * state.sigma2_sq) - state.inv_beta12**2
    return (1.0 / (state.sigma2_sq * det), 1.0 / (state.sigma1_sq * det), -state.inv_beta12 / det)


def initial_state(spec: SystemSpec) -> GaussianState:
    """Factorised state at t = 0 (no cross term)."""
    return GaussianState.from_precision(
        0.0, spec.osc1.initial_variance(spec.hbar), spec.osc2.initial_variance(spec.hbar), 0.0
    )


def _a_coeffs(spec: SystemSpec) -> tuple[float, float]:
    return tuple(1.0 / (8.0 * o.initial_variance(spec.hbar)) for o in spec.oscillators)


# ---------------------------------------------------------------------------
# rescaled evaluation


def _covariance_terms(ts, spec: SystemSpec, modes: NormalModes, den, qcfg):
    """``1/beta12`` at times ``ts`` given the denominators ``den``."""
    hb = spec.hbar
    a1, a2 = _a_coeffs(spec)
    act = stable_action(ts, modes, spec)
    E1, err = linear_E1(ts, spec, modes, qcfg)
    K = act.Kint
    d3, d4 = act.D3h, act.D4h
    f1 = K[..., 0, 3] - d3[..., 0] * d4[..., 0] * K[..., 2, 3] / den[0]
    f2 = K[..., 1, 2] - (d3[..., 1] * d4[..., 1] * K[..., 3, 2] + 2 * hb * a2 * E1 * d3[..., 1]) / den[1]
    return 8 * a2 * d3[..., 1] * f1 / den[1] + 8 * a1 * d3[..., 0] * f2 / den[0], err


def _denominators(ts, spec: SystemSpec, modes: NormalModes, C):
    hb = spec.hbar
    out = []
    for j, (o, O, d) in enumerate(zip(spec.oscillators, modes.Omega, modes.delta)):
        a = 1.0 / (8.0 * o.initial_variance(hb))
        s = np.sin(O * ts) * np.exp(-d * ts)
        d4 = o.mass / 2 * (O * np.cos(O * ts) + d * np.sin(O * ts)) * np.exp(-d * ts)
        out.append(d4**2 + 4 * hb * a * (C[j] + hb * a * s * s))
    return out


def _stable_chunk(ts: np.ndarray, spec: SystemSpec, qcfg: QuadratureConfig):
    modes = linear_modes(spec)
    C1, e1 = eval_C_hat(ts, 0, spec, modes, qcfg)
    C2, e2 = eval_C_hat(ts, 1, spec, modes, qcfg)
    den = _denominators(ts, spec, modes, (C1, C2))
    s1 = den[0] / (8 * _a_coeffs(spec)[0] * (spec.osc1.mass * modes.Omega1 / 2) ** 2)
    s2 = den[1] / (8 * _a_coeffs(spec)[1] * (spec.osc2.mass * modes.Omega2 / 2) ** 2)
    if spec.lam == 0:
        return s1, s2, np.zeros_like(ts), (e1, e2, 0.0)
    near = np.zeros(ts.shape, dtype=bool)
    for O in modes.Omega:
        near |= (np.abs(np.sin(O * ts)) < NODE_SIN) & (O * ts > 1.0)
    inv_beta, e3 = _covariance_terms(ts, spec, modes, den, qcfg)
    if np.any(near):
        # removable 0/0 at the sine nodes: average the two neighbours
        h = NODE_STEP / max(modes.Omega)
        tn = ts[near]
        side = np.concatenate([tn - h, tn + h])
        Cs = [eval_C_hat(side, j, spec, modes, qcfg)[0] for j in (0, 1)]
        ib, _ = _covariance_terms(side, spec, modes, _denominators(side, spec, modes, Cs), qcfg)
        inv_beta = inv_beta.copy()
        inv_beta[near] = 0.5 * (ib[: tn.size] + ib[tn.size:])
    return s1, s2, inv_beta, (e1, e2, e3)


def _naive_point(t: float, spec: SystemSpec, qcfg: QuadratureConfig):
    """Literal evaluation with the printed tables and raw kernels."""
    modes = derive_normal_modes(spec)
    hb = spec.hbar
    a1, a2 = _a_coeffs(spec)
    table = kernel_table(t, modes, spec, method="printed")
    infl = influence_coefficients(t, spec, modes, qcfg, table=table, a=(a1, a2))
    D, Dp = table.D, table.Dp
    q1 = 1 - D[3] ** 2 / (D[3] ** 2 + 4 * hb * a1 * (infl.C1 + hb * a1))
    q2 = 1 - Dp[3] ** 2 / (Dp[3] ** 2 + 4 * hb * a2 * (infl.C2 + hb * a2))
    s1 = 0.5 / (D[2] ** 2 / (hb * (infl.C1 + hb * a1)) * q1)
    s2 = 0.5 / (Dp[2] ** 2 / (hb * (infl.C2 + hb * a2)) * q2)
    inv_beta = (2 * Dp[2] * infl.f1 / (hb * (infl.C2 + hb * a2)) * q2
                + 2 * D[2] * infl.f2 / (hb * (infl.C1 + hb * a1)) * q1)
    return s1, s2, inv_beta


def thread_count() -> int:
    """Worker cap from ``QUASIRELAX_THREADS`` (default: CPU count, at most 8)."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise SpecError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        return max(1, n)
    return max(1, min(8, os.cpu_count() or 1))


def trajectory(spec: SystemSpec, grid, qcfg: QuadratureConfig = DEFAULT_QUADRATURE,
               method: str = "stable", threads: int | None = None, chunk: int = CHUNK) -> Trajectory:
    """Evaluate the state on ``grid`` (internal units).

    Points are processed in fixed chunks, so results do not depend on the
    number of workers.  ``t = 0`` returns the initial state exactly.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(grid < 0):
        raise SpecError("grid must be a 1-D array of times >= 0")
    if method not in ("stable", "naive"):
        raise ValueError(f"unknown method {method!r}")
    start = time.perf_counter()
    pos = np.flatnonzero(grid > 0)
    s1 = np.empty(grid.size)
    s2 = np.empty(grid.size)
    ib = np.zeros(grid.size)
    errs = []
    init = initial_state(spec)
    s1[grid == 0], s2[grid == 0] = init.sigma1_sq, init.sigma2_sq

    if method == "stable":
        pieces = [pos[k:k + chunk] for k in range(0, pos.size, chunk)]

        def work(idx):
            return _stable_chunk(grid[idx], spec, qcfg)
    else:
        pieces = [pos[k:k + 1] for k in range(pos.size)]

        def work(idx):
            a, b, c = _naive_point(float(grid[idx[0]]), spec, qcfg)
            return np.array([a]), np.array([b]), np.array([c]), (math.nan,)

    n = threads or thread_count()
    if n > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(work, pieces))
    else:
        results = [work(p) for p in pieces]
    for idx, (a, b, c, e) in zip(pieces, results):
        s1[idx], s2[idx], ib[idx] = a, b, c
        errs.append(e)
    states = tuple(GaussianState.from_precision(t, a, b, c) for t, a, b, c in zip(grid, s1, s2, ib))
    err = np.array([list(e) for e in errs]) if errs else np.zeros((0, 3))
    meta = {
        "method": method,
        "chunk": chunk,
        "wall_time_s": time.perf_counter() - start,
        "quadrature": {
            "omega_rel_tol": qcfg.omega_rel_tol,
            "omega_abs_tol": qcfg.omega_abs_tol,
            "max_panels": qcfg.max_panels,
            "cutoff_nu_max": list(qcfg.cutoffs(spec)),
            "max_error_estimates": _column_max(err),
        },
        "version": __version__,
    }
    return Trajectory(grid=grid, states=states, metadata=meta)


def _column_max(err: np.ndarray) -> list:
    out = []
    for col in err.T if err.size else ():
        col = col[np.isfinite(col)]
        out.append(float(col.max()) if col.size else None)
    return out


def reduced_state(t: float, spec: SystemSpec, qcfg: QuadratureConfig = DEFAULT_QUADRATURE,
                  method: str = "stable") -> GaussianState:
    """State at a single time; see :func:`trajectory`."""
    return trajectory(spec, [t], qcfg, method=method, threads=1).states[0]


# ---------------------------------------------------------------------------
# derived quantities


@dataclass(frozen=True)
class EquilibriumComparison:
    """Zero-linewidth variance against the finite-gamma equilibrium variance."""

    tanh_variance: float
    fdt_variance: float

    @property
    def relative_deviation(self) -> float:
        return self.fdt_variance / self.tanh_variance - 1.0


def equilibrium_density(osc: OscillatorSpec, hbar: float = 1.0, kb: float = 1.0) -> EquilibriumComparison:
    return EquilibriumComparison(tanh_variance(osc, hbar, kb), fdt_variance(osc, hbar, kb))


def fdt_pair(spec: SystemSpec) -> tuple[float, float]:
    """Equilibrium variances at each oscillator's own temperature."""
    return tuple(fdt_variance(o, spec.hbar, spec.kb) for o in spec.oscillators)


def derived_columns(traj: Trajectory, spec: SystemSpec, fdt: tuple[float, float] | None = None) -> dict:
    """Columns of the trajectory table, including normalised values."""
    f1, f2 = fdt or fdt_pair(spec)
    s1, s2 = traj.array("sigma1_sq"), traj.array("sigma2_sq")
    beta = traj.array("beta12")
    x12 = np.array([second_moments(s)[2] for s in traj.states]) + 0.0  # no -0 in output
    return {
        "t": traj.grid,
        "t_gamma1": spec.osc1.gamma * traj.grid,
        "sigma1_sq": s1,
        "sigma2_sq": s2,
        "beta12": beta,
        "sigma1_norm": s1 / f1,
        "sigma2_norm": s2 / f2,
        "beta12_norm": beta / math.sqrt(f1 * f2),
        "x1x2_moment": x12,
    }


def zeroing_time(t, values, fraction: float = 0.01) -> float:
    """First time after which ``|values|`` stays below ``fraction`` of its peak.

    Returns ``inf`` if the last sample is still above the threshold.
    """
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    finite = np.isfinite(v)
    if not finite.any():
        return math.inf
    peak = v[finite].max()
    if peak == 0:
        return float(t[0])
    thresh = fraction * peak
    above = np.flatnonzero(~(v < thresh))
    if above.size == 0:
        return float(t[0])
    last = above[-1]
    return math.inf if last == t.size - 1 else float(t[last + 1])


def free_amplitude_norm(ts, spec: SystemSpec, qcfg: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Normalisation in product form with undamped free amplitudes.

    ``prod_i F_i^2 / sqrt(C_i + hbar a_i + D4_i^2 / 4 hbar a_i)`` with
    ``F_i^2 = M_i Omega_i / (2 pi hbar |sin(Omega_i t)|)``; the constant
    prefactors are dropped, so only ratios between times are meaningful.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    modes = linear_modes(spec)
    hb = spec.hbar
    C = [eval_C_hat(ts, j, spec, modes, qcfg)[0] for j in (0, 1)]
    den = _denominators(ts, spec, modes, C)
    out = np.ones_like(ts)
    for j, (o, O, d) in enumerate(zip(spec.oscillators, modes.Omega, modes.delta)):
        a = 1.0 / (8.0 * o.initial_variance(hb))
        sn = np.abs(np.sin(O * ts))
        # C + hbar a + D4^2 / 4 hbar a = den / (4 hbar a s^2), s = sin exp(-d t)
        root = np.sqrt(den[j] / (4 * hb * a)) / (sn * np.exp(-d * ts))
        out *= o.mass * O / (2 * math.pi * hb * sn) / root
    return out
