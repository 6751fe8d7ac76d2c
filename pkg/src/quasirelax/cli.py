"""Command-line front end.

Subcommands
-----------
simulate        run one configuration and write ``trajectory.csv``/``meta.json``
figure          run a named preset (or sweep) into an output directory
oracle-compare  compare the analytic trajectory with the discretised-bath model

Configuration files are JSON documents in physical units (g, rad/s, K);
see :class:`RunConfig`.  Exit status is 0 only if every run succeeded and
every enabled threshold check passed.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .density import (
    NotPositiveDefiniteError,
    derived_columns,
    fdt_pair,
    thread_count,
    trajectory,
)
from .influence import QuadratureConfig
from .model import (
    HBAR_CGS,
    BathSpec,
    OscillatorSpec,
    SpecError,
    SystemSpec,
    derive_normal_modes,
    linear_modes,
    to_internal_units,
)
from .oracle import OracleConfig, RecurrenceWarning, Thresholds, compare, run_oracle
from .svgplot import line_chart

COLUMNS = ("t", "t_gamma1", "sigma1_sq", "sigma2_sq", "beta12", "sigma1_norm", "sigma2_norm",
           "beta12_norm", "x1x2_moment")
FORMATS = frozenset({"csv", "json", "svg"})
FIG6_RHOS = (0.01, 0.02, 0.05)
FIG5_TEMPS = (10.0, 100.0, 300.0, 1000.0)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Invalid run configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """A run described in physical units.

    ``spec`` holds ``osc1``/``osc2`` (``mass`` g, ``omega0`` rad/s,
    ``gamma`` 1/s, ``temperature`` K, and optionally ``sigma0_sq`` cm^2 or
    ``sigma0_factor`` relative to the ground-state variance), the coupling
    ``rho`` or ``lam`` (g/s^2), ``nu_max`` in units of ``omega01``,
    ``kappa`` and ``force``.  ``grid.t_max`` is in units of ``1/gamma1``.
    """

    spec: dict
    grid: dict = field(default_factory=lambda: {"t_max": 10.0, "points": 401})
    qcfg: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=lambda: {"enabled": False})
    outputs: dict = field(default_factory=lambda: {"directory": "out", "formats": ["csv", "json"]})
    method: str = "stable"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict) or "spec" not in d:
            raise ConfigError("configuration needs a 'spec' object")
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        base = cls(spec={})
        cfg = cls(
            spec=copy.deepcopy(d["spec"]),
            grid={**base.grid, **d.get("grid", {})},
            qcfg=dict(d.get("qcfg", {})),
            oracle={**base.oracle, **d.get("oracle", {})},
            outputs={**base.outputs, **d.get("outputs", {})},
            method=d.get("method", "stable"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        pts, tmax = self.grid.get("points"), self.grid.get("t_max")
        if not isinstance(pts, int) or pts < 2:
            raise ConfigError("invariant violated: grid.points must be an integer >= 2")
        if not (isinstance(tmax, (int, float)) and tmax > 0):
            raise ConfigError("invariant violated: grid.t_max must be > 0")
        fmts = self.outputs.get("formats", [])
        if not fmts or not set(fmts) <= FORMATS:
            raise ConfigError(f"invariant violated: outputs.formats must be a non-empty subset of {sorted(FORMATS)}")
        if self.method not in ("stable", "naive"):
            raise ConfigError("method must be 'stable' or 'naive'")
        for key in ("osc1", "osc2"):
            if key not in self.spec:
                raise ConfigError(f"spec.{key} missing")

    # -- derived objects ---------------------------------------------------

    def system_spec(self) -> SystemSpec:
        """Physical-unit :class:`SystemSpec` (validated)."""
        s = self.spec
        oscs = []
        for key in ("osc1", "osc2"):
            o = dict(s[key])
            factor = o.pop("sigma0_factor", None)
            unknown = set(o) - {"mass", "omega0", "gamma", "temperature", "sigma0_sq"}
            if unknown:
                raise ConfigError(f"unknown keys in spec.{key}: {sorted(unknown)}")
            osc = OscillatorSpec(**o)
            if factor is not None:
                g = osc.ground_variance(HBAR_CGS)
                osc = dataclasses.replace(osc, sigma0_sq=float(factor) * g)
            oscs.append(osc)
        nu = float(s.get("nu_max", 50.0)) * oscs[0].omega0
        coupling = {k: s[k] for k in ("rho", "lam") if s.get(k) is not None}
        return SystemSpec(oscs[0], oscs[1], BathSpec(nu), BathSpec(nu), units="physical",
                          kappa=float(s.get("kappa", 10.0)), force=bool(s.get("force", False)), **coupling)

    def quadrature(self) -> QuadratureConfig:
        q = dict(self.qcfg)
        if q.get("cutoff_nu_max") is not None:
            q["cutoff_nu_max"] = tuple(q["cutoff_nu_max"])
        try:
            return QuadratureConfig(**q)
        except TypeError as exc:
            raise ConfigError(f"bad qcfg: {exc}") from None

    def oracle_config(self) -> OracleConfig:
        o = self.oracle
        return OracleConfig(
            enabled=bool(o.get("enabled", False)),
            n_modes=int(o.get("N", 400)),
            nu_max=o.get("nu_max"),
            method=o.get("method", "auto"),
            rtol=float(o.get("rtol", 1e-10)),
            atol=float(o.get("atol", 1e-12)),
            grid=o.get("grid", "midpoint"),
        )


def preset_spec(m2: float = 3.0, w2: float = 2.0, t1: float = 300.0, t2: float = 300.0,
                f1: float | None = None, f2: float | None = None, rho: float = 0.02) -> dict:
    """Physical spec dict with ``m1 = 1e-23 g``, ``omega01 = 1e13 rad/s``, ``gamma_i = 0.01 omega0i``."""
    m1, w1 = 1e-23, 1e13

    def osc(m, w, T, f):
        d = {"mass": m, "omega0": w, "gamma": 0.01 * w, "temperature": T}
        if f is not None:
            d["sigma0_factor"] = f
        return d

    return {"osc1": osc(m1, w1, t1, f1), "osc2": osc(m2 * m1, w2 * w1, t2, f2), "rho": rho,
            "nu_max": 50.0, "kappa": 10.0, "force": False}


def preset_runs(name: str) -> list[tuple[str, RunConfig]]:
    """Named figure presets; sweeps return one entry per member."""
    def one(**kw):
        return RunConfig(spec=preset_spec(**kw), outputs={"directory": "", "formats": ["csv", "json", "svg"]})

    if name == "fig2a":
        return [("", one())]
    if name == "fig2b":
        return [("", one(f2=10.0))]
    if name == "fig3a":
        return [("", one(t1=200.0, t2=700.0))]
    if name == "fig3b":
        return [("", one(t1=200.0, t2=700.0, f2=10.0))]
    if name == "fig4a":
        return [("", one(t1=0.0, t2=0.0))]
    if name == "fig4b":
        return [("", one(t1=0.0, t2=0.0, f1=2.0, f2=0.5))]
    if name in ("fig5a", "fig5b"):
        return [(f"T{T:g}K", one(m2=5.0, w2=3.0, t1=T, t2=T)) for T in FIG5_TEMPS]
    if name == "fig6":
        return [(f"rho{r:g}", one(t1=200.0, t2=700.0, rho=r)) for r in FIG6_RHOS]
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6")


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    cfg = copy.deepcopy(cfg)
    if getattr(args, "tmax", None) is not None:
        cfg.grid["t_max"] = args.tmax
    if getattr(args, "points", None) is not None:
        cfg.grid["points"] = args.points
    if getattr(args, "rho", None) is not None:
        cfg.spec["rho"] = args.rho
        cfg.spec.pop("lam", None)
    for k, attr in (("osc1", "temp1"), ("osc2", "temp2")):
        if getattr(args, attr, None) is not None:
            cfg.spec[k] = {**cfg.spec[k], "temperature": getattr(args, attr)}
    if getattr(args, "nu_max", None) is not None:
        cfg.spec["nu_max"] = args.nu_max
    if getattr(args, "force", False):
        cfg.spec["force"] = True
    if getattr(args, "naive", False):
        cfg.method = "naive"
    if getattr(args, "out", None):
        cfg.outputs["directory"] = args.out
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# runs


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, columns: dict, names=COLUMNS) -> None:
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


@dataclass
class SimulationResult:
    columns: dict
    meta: dict
    internal: SystemSpec


def simulate(cfg: RunConfig) -> SimulationResult:
    """Run the analytic trajectory for ``cfg`` (no file output)."""
    phys = cfg.system_spec()
    spec = to_internal_units(phys)
    qcfg = cfg.quadrature()
    grid = np.linspace(0.0, cfg.grid["t_max"] / spec.osc1.gamma, cfg.grid["points"])
    traj = trajectory(spec, grid, qcfg, method=cfg.method)
    fdt = fdt_pair(spec)
    cols = derived_columns(traj, spec, fdt)
    modes = {"linear": dataclasses.asdict(linear_modes(spec))}
    try:
        modes["perturbative"] = dataclasses.asdict(derive_normal_modes(spec))
    except SpecError as exc:  # pragma: no cover - only for exotic specs
        modes["perturbative"] = str(exc)
    meta = {
        "version": __version__,
        "config": cfg.to_dict(),
        "spec_physical": phys.to_dict(),
        "spec_internal": spec.to_dict(),
        "unit_scales": dataclasses.asdict(spec.scales),
        "normal_modes": modes,
        "sigma_sq_fdt": list(fdt),
        "sigma_sq_initial": [o.initial_variance(spec.hbar) for o in spec.oscillators],
        "trajectory": traj.metadata,
        "threads": thread_count(),
        "units": "internal: hbar = k_B = M1 = omega01 = 1",
    }
    return SimulationResult(columns=cols, meta=meta, internal=spec)


def _norm_chart(results: list[tuple[str, SimulationResult]], which: tuple[str, ...], title: str) -> str:
    series = []
    for label, r in results:
        for w in which:
            lab = f"{label} {w}".strip()
            series.append((lab, r.columns["t_gamma1"], r.columns[w]))
    return line_chart(series, "gamma1 t", "normalised value", title=title)


def write_outputs(res: SimulationResult, out: Path, formats, title: str = "") -> None:
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in formats:
        write_csv(out / "trajectory.csv", res.columns)
    if "json" in formats:
        write_json(out / "meta.json", res.meta)
    if "svg" in formats:
        (out / "variances.svg").write_text(
            _norm_chart([("", res)], ("sigma1_norm", "sigma2_norm"), title or "normalised variances"))
        (out / "covariance.svg").write_text(
            line_chart([("beta12_norm", res.columns["t_gamma1"], res.columns["beta12_norm"])],
                       "gamma1 t", "beta12 / sqrt(s1 s2 FDT)", title=title))


def run_simulate(cfg: RunConfig) -> int:
    res = simulate(cfg)
    out = Path(cfg.outputs.get("directory") or "out")
    write_outputs(res, out, cfg.outputs["formats"])
    c = res.columns
    print(f"wrote {out}: {len(c['t'])} points, sigma_norm start ({c['sigma1_norm'][0]:.4f}, "
          f"{c['sigma2_norm'][0]:.4f}) end ({c['sigma1_norm'][-1]:.4f}, {c['sigma2_norm'][-1]:.4f})")
    return EXIT_OK


def run_figure(name: str, out: Path | None, args: argparse.Namespace | None = None) -> int:
    runs = preset_runs(name)
    out = Path(out or Path("figures") / name)
    results = []
    for label, cfg in runs:
        cfg.outputs["directory"] = str(out / label) if label else str(out)
        if args is not None:
            cfg = apply_overrides(cfg, argparse.Namespace(**{**vars(args), "out": None}))
            cfg.outputs["directory"] = str(out / label) if label else str(out)
        res = simulate(cfg)
        res.meta["preset"] = {"name": name, "member": label or None}
        if name == "fig6":
            res.meta["preset"]["rho_sweep"] = list(FIG6_RHOS)
            res.meta["preset"]["rho_sweep_note"] = "insert values not stated in the source; default sweep"
        if name in ("fig5a", "fig5b"):
            res.meta["preset"]["temperature_sweep_K"] = list(FIG5_TEMPS)
        write_outputs(res, Path(cfg.outputs["directory"]), cfg.outputs["formats"], title=f"{name} {label}".strip())
        results.append((label, res))
    if len(results) > 1:
        which = {"fig5a": ("sigma1_norm",), "fig5b": ("sigma2_norm",)}.get(name, ("beta12_norm",))
        (out / f"{name}.svg").write_text(_norm_chart(results, which, name))
        write_json(out / "meta.json", {"preset": name, "members": [lab for lab, _ in results],
                                       "version": __version__,
                                       **({"rho_sweep": list(FIG6_RHOS)} if name == "fig6" else {}),
                                       **({"temperature_sweep_K": list(FIG5_TEMPS)} if name != "fig6" else {})})
    print(f"wrote {name} to {out} ({len(results)} run{'s' if len(results) > 1 else ''})")
    return EXIT_OK


def oracle_window(cfg: RunConfig, spec: SystemSpec, ocfg: OracleConfig) -> tuple[np.ndarray, float, float]:
    """Grid for the comparison: ``[0, min(t_max, T_rec / 2)]`` in internal time."""
    requested = cfg.grid["t_max"] / spec.osc1.gamma
    nu = ocfg.nu_max * spec.osc1.omega0 if ocfg.nu_max is not None else min(b.nu_max for b in spec.baths)
    t_rec = 2 * math.pi * ocfg.n_modes / nu
    end = min(requested, 0.5 * t_rec * (1 - 1e-9))
    return np.linspace(0.0, end, cfg.grid["points"]), requested, t_rec


def run_oracle_compare(cfg: RunConfig, out: Path | None = None) -> int:
    ocfg = cfg.oracle_config()
    if not ocfg.enabled:
        raise ConfigError("oracle not enabled (set oracle.enabled = true in the configuration)")
    spec = to_internal_units(cfg.system_spec())
    grid, requested, t_rec = oracle_window(cfg, spec, ocfg)
    traj = trajectory(spec, grid, cfg.quadrature(), method=cfg.method)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RecurrenceWarning)
        run = run_oracle(spec, grid, ocfg)
    th = Thresholds(variance_rel=float(cfg.oracle.get("variance_threshold", 0.05)),
                    cross_rel=float(cfg.oracle.get("cross_threshold", 0.25)))
    cmp = compare(traj, run, thresholds=th)
    out = Path(out or cfg.outputs.get("directory") or "out")
    out.mkdir(parents=True, exist_ok=True)
    names = ("t", "analytic_sigma1_sq", "oracle_x1_sq", "rel_err_sigma1_sq", "analytic_sigma2_sq",
             "oracle_x2_sq", "rel_err_sigma2_sq", "analytic_cross", "oracle_x1x2", "err_cross_over_peak")
    a, o, e = cmp.analytic, cmp.oracle, cmp.rel_err
    cols = dict(zip(names, (cmp.t, a[:, 0], o[:, 0], e[:, 0], a[:, 1], o[:, 1], e[:, 1], a[:, 2], o[:, 2], e[:, 2])))
    write_csv(out / "oracle_compare.csv", cols, names)
    report = {
        **cmp.summary,
        "requested_t_max": requested,
        "requested_window_truncated": bool(requested > grid[-1] * (1 + 1e-12)),
        "valid_window": f"t < T_rec/2 = {0.5 * t_rec:.6g}",
        "oracle": run.metadata,
        "initial_momentum": "minimum uncertainty hbar^2 / (4 sigma0^2) for each oscillator",
        "version": __version__,
        "config": cfg.to_dict(),
    }
    write_json(out / "oracle_report.json", report)
    s = cmp.summary
    print(f"oracle compare: max rel err sigma1^2 {s['max_rel_err_sigma1_sq']:.4f}, sigma2^2 "
          f"{s['max_rel_err_sigma2_sq']:.4f}, cross {s['max_err_cross_over_peak']:.4f}, "
          f"sign agrees {s['cross_sign_agrees']} -> {'PASS' if cmp.passed else 'FAIL'}")
    return EXIT_OK if cmp.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory")
    p.add_argument("--tmax", type=float, help="final time in units of 1/gamma1")
    p.add_argument("--points", type=int, help="number of grid points")
    p.add_argument("--rho", type=float, help="dimensionless coupling")
    p.add_argument("--temp1", type=float, help="bath 1 temperature [K]")
    p.add_argument("--temp2", type=float, help="bath 2 temperature [K]")
    p.add_argument("--nu-max", dest="nu_max", type=float, help="bath cutoff in units of omega01")
    p.add_argument("--force", action="store_true", help="skip the weak-coupling gate")
    p.add_argument("--naive", action="store_true", help="evaluate the literal formulas (debug)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quasirelax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="run one configuration")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON run configuration")
    src.add_argument("--preset", choices=[n for n in PRESETS if n not in ("fig5a", "fig5b", "fig6")],
                     help="start from a single-run figure preset")
    _add_overrides(p)
    p = sub.add_parser("figure", help="run a figure preset")
    p.add_argument("name", choices=PRESETS)
    _add_overrides(p)
    p = sub.add_parser("oracle-compare", help="compare against the discretised-bath model")
    p.add_argument("--config", required=True, help="JSON run configuration with oracle.enabled = true")
    _add_overrides(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if args.config:
                cfg = RunConfig.load(args.config)
            else:
                cfg = preset_runs(args.preset)[0][1]
            return run_simulate(apply_overrides(cfg, args))
        if args.command == "figure":
            return run_figure(args.name, Path(args.out) if args.out else None, args)
        cfg = apply_overrides(RunConfig.load(args.config), args)
        return run_oracle_compare(cfg, Path(args.out) if args.out else None)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, NotPositiveDefiniteError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
