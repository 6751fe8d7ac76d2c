"""Physical parameters, unit handling and weak-coupling normal modes.

Internal units are hbar = k_B = M1 = omega01 = 1.  Physical inputs use the
CGS-style units of the original parameter statements (g, rad/s, K).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

HBAR_CGS = 1.054571817e-27  # erg s
KB_CGS = 1.380649e-16  # erg / K

DEGENERACY_TOL = 1e-9
DEFAULT_KAPPA = 10.0


class SpecError(ValueError):
    """Invalid physical specification."""


class DegenerateModesError(SpecError):
    """Raised when the two bare frequencies coincide."""


class OvercriticalCouplingError(SpecError):
    """Raised when the coupling makes the lower normal mode unstable."""


class WeakCouplingError(SpecError):
    """Raised when the weak-coupling margin is violated and not forced."""


@dataclass(frozen=True)
class OscillatorSpec:
    """One damped oscillator with its own thermostat.

    Parameters
    ----------
    mass, omega0, gamma : float
        Mass, bare angular frequency and damping rate ``gamma = eta / 2M``.
    temperature : float
        Bath temperature (K in physical units, ``theta = k_B T / hbar omega01``
        internally).
    sigma0_sq : float, optional
        Initial spatial variance.  ``None`` means the ground-state value
        ``hbar / 2 M omega0``.
    """

    mass: float
    omega0: float
    gamma: float
    temperature: float
    sigma0_sq: float | None = None

    def __post_init__(self):
        if not self.mass > 0:
            raise SpecError(f"mass must be > 0, got {self.mass}")
        if not self.omega0 > 0:
            raise SpecError(f"omega0 must be > 0, got {self.omega0}")
        if not self.gamma >= 0:
            raise SpecError(f"gamma must be >= 0, got {self.gamma}")
        if not self.gamma < self.omega0:
            raise SpecError("underdamped oscillator required: gamma < omega0")
        if not self.temperature >= 0:
            raise SpecError(f"temperature must be >= 0, got {self.temperature}")
        if self.sigma0_sq is not None and not self.sigma0_sq > 0:
            raise SpecError(f"sigma0_sq must be > 0, got {self.sigma0_sq}")

    def ground_variance(self, hbar: float = 1.0) -> float:
        return hbar / (2.0 * self.mass * self.omega0)

    def initial_variance(self, hbar: float = 1.0) -> float:
        if self.sigma0_sq is None:
            return self.ground_variance(hbar)
        return self.sigma0_sq

    @property
    def eta(self) -> float:
        return 2.0 * self.mass * self.gamma


@dataclass(frozen=True)
class BathSpec:
    """Ohmic bath ``J(w) = eta w`` cut off at ``nu_max``."""

    nu_max: float
    spectral_model: str = "ohmic"

    def __post_init__(self):
        if not self.nu_max > 0:
            raise SpecError(f"nu_max must be > 0, got {self.nu_max}")
        if self.spectral_model != "ohmic":
            raise SpecError("only the Ohmic spectral model is supported")

    def mu(self, osc: OscillatorSpec) -> float:
        """Counter-term strength ``2 eta nu_max / pi``."""
        return 2.0 * osc.eta * self.nu_max / math.pi


@dataclass(frozen=True)
class UnitScales:
    """Conversion constants from internal to physical units (CGS)."""

    mass: float  # g
    time: float  # s, equals 1/omega01
    length: float  # cm
    temperature: float  # K, equals hbar omega01 / k_B
    hbar: float = HBAR_CGS

    @property
    def frequency(self) -> float:
        return 1.0 / self.time


@dataclass(frozen=True)
class SystemSpec:
    """Two oscillators, two baths and the bilinear coupling ``-lam x1 x2``.

    Exactly one of ``lam`` or ``rho`` may be given; ``rho`` is converted
    with ``lam = rho * omega_ref * sqrt(M1 M2 omega01 omega02)`` where
    ``omega_ref = omega01`` (1 internally).
    """

    osc1: OscillatorSpec
    osc2: OscillatorSpec
    bath1: BathSpec
    bath2: BathSpec
    lam: float | None = None
    rho: float | None = None
    units: str = "internal"
    kappa: float = DEFAULT_KAPPA
    force: bool = False
    scales: UnitScales | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.units not in ("internal", "physical"):
            raise SpecError(f"unknown unit system {self.units!r}")
        o1, o2 = self.osc1, self.osc2
        ref = self._rho_scale()
        if self.lam is None and self.rho is None:
            object.__setattr__(self, "lam", 0.0)
            object.__setattr__(self, "rho", 0.0)
        elif self.lam is None:
            object.__setattr__(self, "lam", float(self.rho) * ref)
        elif self.rho is None:
            object.__setattr__(self, "rho", float(self.lam) / ref)
        elif not math.isclose(self.lam, self.rho * ref, rel_tol=1e-12, abs_tol=1e-300):
            raise SpecError("lam and rho given but inconsistent")
        if abs(o2.omega0**2 - o1.omega0**2) < DEGENERACY_TOL * o1.omega0**2:
            raise DegenerateModesError("degenerate case unsupported: omega01 == omega02")
        if o1.omega0**2 * o2.omega0**2 <= self.lam**2 / (o1.mass * o2.mass):
            raise OvercriticalCouplingError("overcritical coupling: Omega1^2 <= 0")
        report = validate_weak_coupling(self)
        if not report.passed and not self.force:
            raise WeakCouplingError(
                f"weak-coupling margin violated: ratio {report.ratio:.4g} < kappa {self.kappa}"
                " (use force=True / --force to run anyway)"
            )

    def _rho_scale(self) -> float:
        o1, o2 = self.osc1, self.osc2
        return o1.omega0 * math.sqrt(o1.mass * o2.mass * o1.omega0 * o2.omega0)

    @property
    def hbar(self) -> float:
        return 1.0 if self.units == "internal" else HBAR_CGS

    @property
    def kb(self) -> float:
        return 1.0 if self.units == "internal" else KB_CGS

    @property
    def oscillators(self) -> tuple[OscillatorSpec, OscillatorSpec]:
        return (self.osc1, self.osc2)

    @property
    def baths(self) -> tuple[BathSpec, BathSpec]:
        return (self.bath1, self.bath2)

    def with_coupling(self, rho: float | None = None, lam: float | None = None) -> "SystemSpec":
        return replace(self, rho=rho, lam=lam)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("scales", None)
        return d


@dataclass(frozen=True)
class NormalModes:
    """Eigenfrequencies, effective dampings and mixing ratios."""

    Omega1: float
    Omega2: float
    delta1: float
    delta2: float
    r1: float
    r2: float
    rho: float

    @property
    def Omega(self) -> tuple[float, float]:
        return (self.Omega1, self.Omega2)

    @property
    def delta(self) -> tuple[float, float]:
        return (self.delta1, self.delta2)


@dataclass(frozen=True)
class WeakCouplingReport:
    ratio: float
    kappa: float
    passed: bool


def validate_weak_coupling(spec: SystemSpec) -> WeakCouplingReport:
    """Ratio ``(w02^2 - w01^2) / (2 w01 w02 rho)`` against the margin kappa."""
    w1, w2 = spec.osc1.omega0, spec.osc2.omega0
    rho = abs(spec.rho)
    gap = abs(w2**2 - w1**2) / (2.0 * w1 * w2)
    ratio = math.inf if rho == 0 else gap / rho
    return WeakCouplingReport(ratio=ratio, kappa=spec.kappa, passed=ratio >= spec.kappa)


def derive_normal_modes(spec: SystemSpec) -> NormalModes:
    """Exact roots of the undamped determinant equation plus mixing ratios.

    ``Omega1`` is the root continuously connected to ``omega01``.  The
    mixing ratios are written in the form that stays finite at ``lam = 0``.
    """
    o1, o2 = spec.osc1, spec.osc2
    w1s, w2s = o1.omega0**2, o2.omega0**2
    lam = spec.lam
    k = lam**2 / (o1.mass * o2.mass)
    half = 0.5 * (w2s - w1s)
    sgn = 1.0 if half > 0 else -1.0
    root = math.sqrt(half**2 + k)
    # shift = w01^2 - Omega1^2, computed without cancellation
    shift = k / (abs(half) + root) * sgn
    Om1s = w1s - shift
    Om2s = w2s + shift
    if Om1s <= 0 or Om2s <= 0:
        raise OvercriticalCouplingError("overcritical coupling: Omega^2 <= 0")
    g1, g2 = o1.gamma, o2.gamma

    def damping(Os: float) -> float:
        a, b = Os - w2s, Os - w1s
        return (a * g1 + b * g2) / (a + b)

    # r1 = (w01^2 - Om1^2) M1 / lam = lam / (M2 (w02^2 - Om1^2))
    r1 = lam / (o2.mass * (w2s - Om1s))
    r2 = lam / (o1.mass * (w1s - Om2s))
    return NormalModes(
        Omega1=math.sqrt(Om1s),
        Omega2=math.sqrt(Om2s),
        delta1=damping(Om1s),
        delta2=damping(Om2s),
        r1=r1,
        r2=r2,
        rho=spec.rho,
    )


def linear_modes(spec: SystemSpec) -> NormalModes:
    """Coupling-independent modes of the linear regime.

    Each oscillator keeps its own damped frequency ``sqrt(w0^2 - gamma^2)``
    and damping ``gamma``; mixing ratios take their first-order values.
    """
    o1, o2 = spec.osc1, spec.osc2
    gap = o2.omega0**2 - o1.omega0**2
    return NormalModes(
        Omega1=math.sqrt(o1.omega0**2 - o1.gamma**2),
        Omega2=math.sqrt(o2.omega0**2 - o2.gamma**2),
        delta1=o1.gamma,
        delta2=o2.gamma,
        r1=spec.lam / (o2.mass * gap),
        r2=-spec.lam / (o1.mass * gap),
        rho=spec.rho,
    )


def perturbative_frequencies(spec: SystemSpec) -> tuple[float, float]:
    """Second-order eigenfrequencies used as a cross-check of the exact roots."""
    o1, o2 = spec.osc1, spec.osc2
    gap = o2.omega0**2 - o1.omega0**2
    k = spec.lam**2 / (o1.mass * o2.mass)
    return (math.sqrt(o1.omega0**2 - k / gap), math.sqrt(o2.omega0**2 + k / gap))


def unit_scales(mass1: float, omega01: float) -> UnitScales:
    """Scales for hbar = k_B = M1 = omega01 = 1, from physical M1 [g], omega01 [rad/s]."""
    return UnitScales(
        mass=mass1,
        time=1.0 / omega01,
        length=math.sqrt(HBAR_CGS / (mass1 * omega01)),
        temperature=HBAR_CGS * omega01 / KB_CGS,
    )


def _convert_osc(o: OscillatorSpec, s: UnitScales, inverse: bool) -> OscillatorSpec:
    f = s.frequency
    if inverse:
        return OscillatorSpec(
            mass=o.mass * s.mass,
            omega0=o.omega0 * f,
            gamma=o.gamma * f,
            temperature=o.temperature * s.temperature,
            sigma0_sq=None if o.sigma0_sq is None else o.sigma0_sq * s.length**2,
        )
    return OscillatorSpec(
        mass=o.mass / s.mass,
        omega0=o.omega0 / f,
        gamma=o.gamma / f,
        temperature=o.temperature / s.temperature,
        sigma0_sq=None if o.sigma0_sq is None else o.sigma0_sq / s.length**2,
    )


def to_internal_units(spec: SystemSpec) -> SystemSpec:
    """Rescale a physical spec to hbar = k_B = M1 = omega01 = 1.

    The returned spec carries its :class:`UnitScales` so the map can be
    inverted with :func:`to_physical_units`.
    """
    if spec.units == "internal":
        return spec
    s = unit_scales(spec.osc1.mass, spec.osc1.omega0)
    lam_scale = s.mass * s.frequency**2
    return SystemSpec(
        osc1=_convert_osc(spec.osc1, s, False),
        osc2=_convert_osc(spec.osc2, s, False),
        bath1=BathSpec(spec.bath1.nu_max / s.frequency),
        bath2=BathSpec(spec.bath2.nu_max / s.frequency),
        lam=spec.lam / lam_scale,
        units="internal",
        kappa=spec.kappa,
        force=spec.force,
        scales=s,
    )


def to_physical_units(spec: SystemSpec, scales: UnitScales | None = None) -> SystemSpec:
    """Inverse of :func:`to_internal_units`."""
    if spec.units == "physical":
        return spec
    s = scales or spec.scales
    if s is None:
        raise SpecError("no unit scales recorded for this spec")
    lam_scale = s.mass * s.frequency**2
    return SystemSpec(
        osc1=_convert_osc(spec.osc1, s, True),
        osc2=_convert_osc(spec.osc2, s, True),
        bath1=BathSpec(spec.bath1.nu_max * s.frequency),
        bath2=BathSpec(spec.bath2.nu_max * s.frequency),
        lam=spec.lam * lam_scale,
        units="physical",
        kappa=spec.kappa,
        force=spec.force,
    )


def theta(temperature_K: float, omega01: float) -> float:
    """Dimensionless temperature ``k_B T / hbar omega01``."""
    return temperature_K * KB_CGS / (HBAR_CGS * omega01)
