"""Brute-force reference: two oscillators coupled to explicitly discretised baths.

The full Hamiltonian

    H = sum_i [p_i^2 / 2 M_i + M_i w0i^2 x_i^2 / 2] - lam x1 x2
        + sum_j [p_j^2 / 2 m_j + m_j w_j^2 (q_j - x_1)^2 / 2] + (same for bath 2)

is quadratic, so a Gaussian initial state stays Gaussian and its covariance
follows ``cov(t) = Phi(t) cov(0) Phi(t)^T`` with ``Phi = exp(A t)``.  The
reduced moments of ``x1`` and ``x2`` are exact for the finite bath; the
only approximation is the discretisation, valid for ``t < T_rec / 2``.

Phase-space ordering is ``(x1, x2, q_1..q_N1, q_1..q_N2, p_x1, p_x2, ...)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, expm

from .density import GaussianState, Trajectory
from .model import SpecError, SystemSpec, to_internal_units

METHODS = ("auto", "expm", "modal", "ode")
EXPM_MAX_MODES = 500  # per bath; above this "auto" switches to the modal solver


class RecurrenceWarning(UserWarning):
    """Propagation beyond half the bath recurrence time."""


class PropagationError(RuntimeError):
    """The ODE integrator failed."""


@dataclass(frozen=True)
class DiscreteBath:
    """Uniformly spaced bath modes with couplings ``c_j = m_j w_j^2``.

    Parameters
    ----------
    omega, mass : ndarray
        Mode frequencies and masses.
    temperature : float
        Bath temperature in the same units as ``hbar * omega / k_B``.
    bin_width : float, optional
        Frequency bin of each mode; defaults to the grid spacing.
    """

    omega: np.ndarray
    mass: np.ndarray
    temperature: float
    bin_width: float | None = None

    @property
    def coupling(self) -> np.ndarray:
        return self.mass * self.omega**2

    @property
    def spacing(self) -> float:
        if self.bin_width is not None:
            return self.bin_width
        return float(self.omega[0]) if self.omega.size == 1 else float(self.omega[1] - self.omega[0])

    @property
    def recurrence_time(self) -> float:
        return 2 * math.pi / self.spacing

    @property
    def size(self) -> int:
        return int(self.omega.size)

    def spectral_density(self) -> np.ndarray:
        """Binned ``J(w_j) = (pi / 2) c_j^2 / (m_j w_j dw)``."""
        return 0.5 * math.pi * self.coupling**2 / (self.mass * self.omega * self.spacing)


GRID_RULES = ("midpoint", "endpoint")


def discretize_bath(gamma: float, mass: float, nu_max: float, n: int, temperature: float,
                    rule: str = "midpoint") -> DiscreteBath:
    """Ohmic bath with friction ``eta = 2 M gamma`` on a uniform grid of spacing ``nu_max / n``.

    ``rule="midpoint"`` puts the modes at bin centres ``(j - 1/2) dw``
    (second-order convergence in ``n``); ``rule="endpoint"`` at ``j dw``.
    Masses ``m_j = 2 eta dw / (pi w_j^2)`` make the binned spectral density
    equal ``eta w`` at every mode.
    """
    if n < 1 or nu_max <= 0 or gamma < 0 or mass <= 0:
        raise SpecError("bath needs n >= 1, nu_max > 0, gamma >= 0, mass > 0")
    if rule not in GRID_RULES:
        raise SpecError(f"unknown bath grid rule {rule!r}")
    dw = nu_max / n
    omega = dw * (np.arange(1, n + 1) - (0.5 if rule == "midpoint" else 0.0))
    eta = 2.0 * mass * gamma
    return DiscreteBath(omega=omega, mass=2.0 * eta * dw / (math.pi * omega**2), temperature=float(temperature),
                        bin_width=dw)


@dataclass(frozen=True)
class FullSystem:
    """Quadratic Hamiltonian ``H = z^T S z / 2`` over ``z = (positions, momenta)``."""

    masses: np.ndarray
    stiffness: np.ndarray
    baths: tuple[DiscreteBath, DiscreteBath]
    hbar: float = 1.0

    @property
    def n(self) -> int:
        return int(self.masses.size)

    @property
    def hamiltonian_matrix(self) -> np.ndarray:
        n = self.n
        S = np.zeros((2 * n, 2 * n))
        S[:n, :n] = self.stiffness
        S[n:, n:] = np.diag(1.0 / self.masses)
        return S

    @property
    def recurrence_time(self) -> float:
        return min(b.recurrence_time for b in self.baths if b.size) if any(b.size for b in self.baths) else math.inf

    def energy(self, state: "OracleState") -> float:
        S = self.hamiltonian_matrix
        return 0.5 * float(np.sum(S * state.cov) + state.mean @ S @ state.mean)


def symplectic_form(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def assemble_system(spec: SystemSpec, bath1: DiscreteBath, bath2: DiscreteBath) -> FullSystem:
    """Masses and potential matrix of the full Hamiltonian (internal units)."""
    o1, o2 = spec.oscillators
    n1, n2 = bath1.size, bath2.size
    n = 2 + n1 + n2
    masses = np.concatenate([[o1.mass, o2.mass], bath1.mass, bath2.mass])
    K = np.zeros((n, n))
    k1, k2 = bath1.coupling, bath2.coupling
    # (q_j - x)^2 expansion: the x^2 pieces are the counter-term
    K[0, 0] = o1.mass * o1.omega0**2 + k1.sum()
    K[1, 1] = o2.mass * o2.omega0**2 + k2.sum()
    K[0, 1] = K[1, 0] = -spec.lam
    j1 = 2 + np.arange(n1)
    j2 = 2 + n1 + np.arange(n2)
    K[j1, j1] = k1
    K[j2, j2] = k2
    K[0, j1] = K[j1, 0] = -k1
    K[1, j2] = K[j2, 1] = -k2
    return FullSystem(masses=masses, stiffness=K, baths=(bath1, bath2), hbar=spec.hbar)


def assemble_drift(spec: SystemSpec, bath1: DiscreteBath, bath2: DiscreteBath) -> np.ndarray:
    """Drift ``A = J S`` of ``dz/dt = A z``."""
    system = assemble_system(spec, bath1, bath2)
    return symplectic_form(system.n) @ system.hamiltonian_matrix


@dataclass(frozen=True)
class OracleState:
    """First and second moments over the full phase space at time ``t``."""

    t: float
    mean: np.ndarray
    cov: np.ndarray

    @property
    def n(self) -> int:
        return self.mean.size // 2

    def reduced_moments(self) -> tuple[float, float, float]:
        """``(<x1^2>, <x2^2>, <x1 x2>)`` (second moments, means included)."""
        c = self.cov
        m = self.mean
        return (c[0, 0] + m[0] ** 2, c[1, 1] + m[1] ** 2, c[0, 1] + m[0] * m[1])

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.cov - self.cov.T)))

    def uncertainty_margin(self, hbar: float = 1.0) -> float:
        """Smallest eigenvalue of ``cov + (i hbar / 2) J``, relative to ``hbar``."""
        herm = self.cov + 0.5j * hbar * symplectic_form(self.n)
        return float(np.linalg.eigvalsh(herm)[0]) / hbar

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Williamson spectrum (each value listed once, ascending)."""
        ev = np.linalg.eigvals(1j * symplectic_form(self.n) @ self.cov)
        return np.sort(np.abs(ev.real))[::2]


def _thermal_factor(omega: np.ndarray, temperature: float, hbar: float, kb: float) -> np.ndarray:
    if temperature <= 0:
        return np.ones_like(omega)
    return 1.0 / np.tanh(hbar * omega / (2.0 * kb * temperature))


def initial_full_state(spec: SystemSpec, baths: tuple[DiscreteBath, DiscreteBath]) -> OracleState:
    """Product state: minimum-uncertainty system Gaussians and thermal bath modes."""
    hb, kb = spec.hbar, spec.kb
    sx = [o.initial_variance(hb) for o in spec.oscillators]
    q_var = list(sx)
    p_var = [hb * hb / (4.0 * s) for s in sx]
    for b in baths:
        ct = _thermal_factor(b.omega, b.temperature, hb, kb)
        q_var.extend(hb * ct / (2.0 * b.mass * b.omega))
        p_var.extend(hb * ct * b.mass * b.omega / 2.0)
    diag = np.concatenate([q_var, p_var])
    return OracleState(t=0.0, mean=np.zeros(diag.size), cov=np.diag(diag))


# ---------------------------------------------------------------------------
# propagation


@dataclass
class _Modal:
    """Normal-mode decomposition of the full potential."""

    sq: np.ndarray
    U: np.ndarray
    freq: np.ndarray

    @classmethod
    def build(cls, system: FullSystem) -> "_Modal":
        sq = np.sqrt(system.masses)
        w2, U = eigh(system.stiffness / np.outer(sq, sq))
        if w2[0] <= 0:
            raise SpecError("full potential is not positive definite (coupling too strong)")
        return cls(sq=sq, U=U, freq=np.sqrt(w2))

    def rows(self, idx, t: float) -> np.ndarray:
        """Rows ``idx`` of the position block of ``Phi(t)``: shape (k, 2n)."""
        c = np.cos(self.freq * t)
        s = np.sin(self.freq * t) / self.freq
        Ui = self.U[idx]
        sq = self.sq
        xx = ((Ui * c) @ self.U.T) * sq[idx, None] ** -1 * sq[None, :]
        xp = ((Ui * s) @ self.U.T) * sq[idx, None] ** -1 / sq[None, :]
        return np.hstack([xx, xp])

    def propagator(self, t: float) -> np.ndarray:
        c = np.cos(self.freq * t)
        s = np.sin(self.freq * t)
        U, sq, f = self.U, self.sq, self.freq
        qq = (U * c) @ U.T
        qp = (U * (s / f)) @ U.T
        pq = -(U * (s * f)) @ U.T
        n = sq.size
        P = np.empty((2 * n, 2 * n))
        P[:n, :n] = qq / sq[:, None] * sq[None, :]
        P[:n, n:] = qp / sq[:, None] / sq[None, :]
        P[n:, :n] = pq * sq[:, None] * sq[None, :]
        P[n:, n:] = qq * sq[:, None] / sq[None, :]
        return P


def _resolve_method(method: str, system: FullSystem) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown propagation method {method!r}")
    if method == "auto":
        return "expm" if max(b.size for b in system.baths) <= EXPM_MAX_MODES else "modal"
    return method


def _warn_recurrence(system: FullSystem, t_end: float) -> None:
    if t_end > 0.5 * system.recurrence_time:
        warnings.warn(
            f"t = {t_end:.6g} exceeds half the bath recurrence time {system.recurrence_time:.6g}",
            RecurrenceWarning,
            stacklevel=3,
        )


def propagate(system: FullSystem, state0: OracleState, t: float, method: str = "auto",
              rtol: float = 1e-10, atol: float = 1e-12) -> OracleState:
    """Exact Gaussian evolution of ``state0`` to ``state0.t + t``."""
    method = _resolve_method(method, system)
    _warn_recurrence(system, state0.t + t)
    A = symplectic_form(system.n) @ system.hamiltonian_matrix
    if method == "expm":
        P = expm(A * t)
    elif method == "modal":
        P = _Modal.build(system).propagator(t)
    else:
        m = 2 * system.n
        sol = solve_ivp(lambda _, y: (A @ y.reshape(m, m)).ravel(), (0.0, t), np.eye(m).ravel(),
                        method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise PropagationError(sol.message)
        P = sol.y[:, -1].reshape(m, m)
    return OracleState(t=state0.t + t, mean=P @ state0.mean, cov=P @ state0.cov @ P.T)


def _row_moments(R: np.ndarray, state0: OracleState) -> tuple[float, float, float]:
    c = R @ state0.cov @ R.T
    m = R @ state0.mean
    return c[0, 0] + m[0] ** 2, c[1, 1] + m[1] ** 2, c[0, 1] + m[0] * m[1]


def reduced_history(system: FullSystem, state0: OracleState, times, method: str = "auto",
                    rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """``(<x1^2>, <x2^2>, <x1 x2>)`` at each entry of ``times`` (measured from 0).

    Only the two position rows of the propagator are carried, so the cost
    per time is far below a full covariance update.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be a non-decreasing 1-D array of values >= 0")
    method = _resolve_method(method, system)
    if times.size:
        _warn_recurrence(system, float(times[-1]))
    out = np.empty((times.size, 3))
    n2 = 2 * system.n
    if method == "modal":
        modal = _Modal.build(system)
        for k, t in enumerate(times):
            out[k] = _row_moments(modal.rows([0, 1], t), state0)
        return out
    A = symplectic_form(system.n) @ system.hamiltonian_matrix
    R0 = np.zeros((2, n2))
    R0[0, 0] = R0[1, 1] = 1.0
    if method == "expm":
        R, last = R0, 0.0
        cache: dict[float, np.ndarray] = {}
        for k, t in enumerate(times):
            dt = t - last
            if dt > 0:
                key = round(dt, 12)
                if key not in cache:
                    cache[key] = expm(A * dt)
                R = R @ cache[key]
            last = t
            out[k] = _row_moments(R, state0)
        return out
    # rows obey dR/dt = R A
    sol = solve_ivp(lambda _, y: (y.reshape(2, n2) @ A).ravel(), (0.0, float(times[-1]) if times.size else 0.0),
                    R0.ravel(), method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise PropagationError(sol.message)
    for k in range(times.size):
        out[k] = _row_moments(sol.y[:, k].reshape(2, n2), state0)
    return out


# ---------------------------------------------------------------------------
# runs and comparison


@dataclass(frozen=True)
class OracleConfig:
    """Bath discretisation and integrator settings.

    ``nu_max`` is in units of the first oscillator's frequency; ``None``
    uses each bath's own cutoff from the system specification.
    """

    enabled: bool = True
    n_modes: int = 400
    nu_max: float | None = None
    method: str = "auto"
    rtol: float = 1e-10
    atol: float = 1e-12
    grid: str = "midpoint"

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "N": self.n_modes, "nu_max": self.nu_max, "method": self.method,
                "rtol": self.rtol, "atol": self.atol, "grid": self.grid}


@dataclass(frozen=True)
class OracleRun:
    times: np.ndarray
    x1_sq: np.ndarray
    x2_sq: np.ndarray
    x1x2: np.ndarray
    recurrence_time: float
    metadata: dict = field(default_factory=dict)


def baths_for(spec: SystemSpec, cfg: OracleConfig) -> tuple[DiscreteBath, DiscreteBath]:
    out = []
    for o, b in zip(spec.oscillators, spec.baths):
        nu = cfg.nu_max * spec.osc1.omega0 if cfg.nu_max is not None else b.nu_max
        out.append(discretize_bath(o.gamma, o.mass, nu, cfg.n_modes, o.temperature, cfg.grid))
    return tuple(out)


def run_oracle(spec: SystemSpec, times, cfg: OracleConfig = OracleConfig()) -> OracleRun:
    """Reduced second moments of the discretised model on ``times`` (internal units)."""
    if spec.units != "internal":
        spec = to_internal_units(spec)
    baths = baths_for(spec, cfg)
    system = assemble_system(spec, *baths)
    state0 = initial_full_state(spec, baths)
    hist = reduced_history(system, state0, times, cfg.method, cfg.rtol, cfg.atol)
    return OracleRun(
        times=np.asarray(times, dtype=float),
        x1_sq=hist[:, 0],
        x2_sq=hist[:, 1],
        x1x2=hist[:, 2],
        recurrence_time=system.recurrence_time,
        metadata={**cfg.to_dict(), "method_used": _resolve_method(cfg.method, system)},
    )


@dataclass(frozen=True)
class Thresholds:
    variance_rel: float = 0.05
    cross_rel: float = 0.25
    sign_floor: float = 0.10  # sign compared where |oracle| exceeds this fraction of its peak


@dataclass(frozen=True)
class Comparison:
    """Per-time analytic and oracle moments with summary errors."""

    t: np.ndarray
    analytic: np.ndarray  # (n, 3): sigma1^2, sigma2^2, cross
    oracle: np.ndarray
    rel_err: np.ndarray  # (n, 3); cross column is |a - o| / peak |o|
    window: np.ndarray  # bool mask of points used in the summary
    summary: dict

    @property
    def passed(self) -> bool:
        return bool(self.summary["passed"])


def analytic_moments(traj: Trajectory) -> np.ndarray:
    """``sigma1^2, sigma2^2`` and the cross moment ``-sigma1^2 sigma2^2 / beta12``."""
    s: tuple[GaussianState, ...] = traj.states
    s1 = np.array([x.sigma1_sq for x in s])
    s2 = np.array([x.sigma2_sq for x in s])
    ib = np.array([x.inv_beta12 for x in s])
    return np.column_stack([s1, s2, -s1 * s2 * ib])


def compare(traj: Trajectory, run: OracleRun, t_limit: float | None = None,
            thresholds: Thresholds = Thresholds()) -> Comparison:
    """Error report of an analytic trajectory against an oracle run.

    The summary covers ``t <= t_limit`` and ``t < T_rec / 2``.
    """
    if traj.grid.shape != run.times.shape or not np.allclose(traj.grid, run.times, rtol=1e-12, atol=0):
        raise SpecError("analytic and oracle grids differ")
    a = analytic_moments(traj)
    o = np.column_stack([run.x1_sq, run.x2_sq, run.x1x2])
    t = run.times
    window = t < 0.5 * run.recurrence_time
    if t_limit is not None:
        window &= t <= t_limit * (1 + 1e-12)
    scale = np.sqrt(np.abs(o[:, 0] * o[:, 1]))
    peak = float(np.max(np.abs(o[window, 2]))) if window.any() else 0.0
    rel = np.empty_like(a)
    rel[:, :2] = np.abs(a[:, :2] - o[:, :2]) / np.abs(o[:, :2])
    resolvable = window.any() and peak > 1e-10 * float(np.max(scale[window]))
    rel[:, 2] = np.abs(a[:, 2] - o[:, 2]) / (peak if resolvable else scale)
    w = window
    var_max = [float(np.max(rel[w, k])) if w.any() else math.nan for k in (0, 1)]
    cross_max = float(np.max(rel[w, 2])) if w.any() else math.nan
    big = w & (np.abs(o[:, 2]) > thresholds.sign_floor * peak) if resolvable else np.zeros_like(w)
    sign_ok = bool(np.all(np.sign(a[big, 2]) == np.sign(o[big, 2])))
    var_pass = all(v <= thresholds.variance_rel for v in var_max)
    cross_pass = sign_ok and (cross_max <= thresholds.cross_rel if resolvable else cross_max <= 1e-8)
    summary = {
        "points_in_window": int(w.sum()),
        "window_end": float(t[w][-1]) if w.any() else None,
        "recurrence_time": run.recurrence_time,
        "max_rel_err_sigma1_sq": var_max[0],
        "max_rel_err_sigma2_sq": var_max[1],
        "mean_rel_err_sigma1_sq": float(np.mean(rel[w, 0])) if w.any() else math.nan,
        "mean_rel_err_sigma2_sq": float(np.mean(rel[w, 1])) if w.any() else math.nan,
        "max_err_cross_over_peak": cross_max,
        "mean_err_cross_over_peak": float(np.mean(rel[w, 2])) if w.any() else math.nan,
        "cross_peak_oracle": peak,
        "cross_resolvable": bool(resolvable),
        "cross_sign_agrees": sign_ok,
        "sign_points": int(np.sum(big)),
        "thresholds": {"variance_rel": thresholds.variance_rel, "cross_rel": thresholds.cross_rel},
        "variance_passed": var_pass,
        "cross_passed": cross_pass,
        "passed": var_pass and cross_pass,
    }
    return Comparison(t=t, analytic=a, oracle=o, rel_err=rel, window=w, summary=summary)
