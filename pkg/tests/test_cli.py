import csv
import json

import numpy as np
import pytest

from quasirelax.cli import (
    COLUMNS,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    RunConfig,
    main,
    preset_runs,
    preset_spec,
    simulate,
)


def _write_config(path, **kw):
    d = {"spec": preset_spec(), "grid": {"t_max": 0.05, "points": 6}}
    d.update(kw)
    path.write_text(json.dumps(d))
    return path


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.mark.parametrize(
    "patch,fragment",
    [
        ({"grid": {"points": 1}}, "grid.points"),
        ({"grid": {"t_max": 0}}, "grid.t_max"),
        ({"outputs": {"formats": []}}, "outputs.formats"),
        ({"outputs": {"formats": ["png"]}}, "outputs.formats"),
        ({"method": "fast"}, "method"),
        ({"bogus": 1}, "unknown configuration keys"),
    ],
)
def test_config_invariants_named(patch, fragment):
    d = {"spec": preset_spec(), **patch}
    with pytest.raises(ConfigError, match=fragment):
        RunConfig.from_dict(d)


def test_config_requires_spec():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"grid": {}})


def test_config_unknown_oscillator_key():
    spec = preset_spec()
    spec["osc1"]["colour"] = "red"
    with pytest.raises(ConfigError, match="spec.osc1"):
        RunConfig.from_dict({"spec": spec}).system_spec()


def test_config_round_trip():
    cfg = RunConfig.from_dict({"spec": preset_spec(f2=10.0), "oracle": {"enabled": True, "N": 50}})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.oracle_config().n_modes == 50


def test_sigma0_factor():
    spec = RunConfig(spec=preset_spec(f2=10.0)).system_spec()
    assert spec.osc2.initial_variance(spec.hbar) == pytest.approx(10 * spec.osc2.ground_variance(spec.hbar))


def test_simulate_writes_csv_and_meta(tmp_path):
    cfg = _write_config(tmp_path / "c.json")
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    header, data = _read_csv(out / "trajectory.csv")
    assert tuple(header) == COLUMNS
    assert data.shape == (6, len(COLUMNS))
    meta = json.loads((out / "meta.json").read_text())
    for key in ("spec_physical", "normal_modes", "sigma_sq_fdt", "trajectory", "version", "config"):
        assert key in meta
    assert "max_error_estimates" in meta["trajectory"]["quadrature"]


def test_meta_reproduces_run(tmp_path):
    out = tmp_path / "a"
    assert main(["simulate", "--config", str(_write_config(tmp_path / "c.json")), "--out", str(out)]) == 0
    cfg = json.loads((out / "meta.json").read_text())["config"]
    cfg["outputs"]["directory"] = str(tmp_path / "b")
    (tmp_path / "again.json").write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(tmp_path / "again.json")]) == 0
    assert (out / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_csv_is_byte_identical_on_rerun(tmp_path):
    cfg = _write_config(tmp_path / "c.json")
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "y")])
    assert (tmp_path / "x" / "trajectory.csv").read_bytes() == (tmp_path / "y" / "trajectory.csv").read_bytes()


def test_csv_full_precision(tmp_path):
    cfg = _write_config(tmp_path / "c.json")
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")])
    res = simulate(RunConfig.load(cfg))
    _, data = _read_csv(tmp_path / "x" / "trajectory.csv")
    assert np.array_equal(data[:, COLUMNS.index("sigma1_sq")], res.columns["sigma1_sq"])


def test_two_points_tiny_tmax(tmp_path):
    cfg = _write_config(tmp_path / "c.json", grid={"t_max": 1e-5, "points": 2})
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")])
    _, data = _read_csv(tmp_path / "x" / "trajectory.csv")
    assert data.shape[0] == 2
    i = COLUMNS.index("sigma1_norm")
    assert data[1, i] == pytest.approx(data[0, i], rel=1e-3)


def test_overrides(tmp_path):
    cfg = _write_config(tmp_path / "c.json")
    out = tmp_path / "x"
    main(["simulate", "--config", str(cfg), "--out", str(out), "--points", "3", "--rho", "0.0",
          "--temp1", "100", "--nu-max", "25"])
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["grid"]["points"] == 3
    assert meta["config"]["spec"]["rho"] == 0.0
    assert meta["config"]["spec"]["osc1"]["temperature"] == 100
    assert meta["config"]["spec"]["nu_max"] == 25
    _, data = _read_csv(out / "trajectory.csv")
    assert np.all(data[:, COLUMNS.index("x1x2_moment")] == 0)


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.json", grid={"t_max": 1.0, "points": 1})
    assert main(["simulate", "--config", str(cfg)]) == EXIT_USAGE
    assert "grid.points" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE


def test_invalid_spec_exit_code(tmp_path):
    spec = preset_spec()
    spec["osc1"]["gamma"] = -1.0
    (tmp_path / "c.json").write_text(json.dumps({"spec": spec}))
    assert main(["simulate", "--config", str(tmp_path / "c.json")]) == 1


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_runs("fig9")
    with pytest.raises(SystemExit):
        main(["figure", "fig9"])


@pytest.mark.parametrize(
    "name,expect",
    [
        ("fig2a", dict(m2=3.0, w2=2.0, T1=300.0, T2=300.0, f2=None)),
        ("fig2b", dict(m2=3.0, w2=2.0, T1=300.0, T2=300.0, f2=10.0)),
        ("fig3a", dict(m2=3.0, w2=2.0, T1=200.0, T2=700.0, f2=None)),
        ("fig3b", dict(m2=3.0, w2=2.0, T1=200.0, T2=700.0, f2=10.0)),
        ("fig4a", dict(m2=3.0, w2=2.0, T1=0.0, T2=0.0, f2=None)),
    ],
)
def test_preset_parameters(name, expect):
    (_, cfg), = preset_runs(name)
    s = cfg.spec
    assert s["osc1"]["mass"] == 1e-23 and s["osc1"]["omega0"] == 1e13
    assert s["osc1"]["gamma"] == pytest.approx(0.01 * 1e13)
    assert s["osc2"]["mass"] == pytest.approx(expect["m2"] * 1e-23)
    assert s["osc2"]["omega0"] == pytest.approx(expect["w2"] * 1e13)
    assert s["osc2"]["gamma"] == pytest.approx(0.01 * s["osc2"]["omega0"])
    assert (s["osc1"]["temperature"], s["osc2"]["temperature"]) == (expect["T1"], expect["T2"])
    assert s["osc2"].get("sigma0_factor") == expect["f2"]
    assert cfg.grid["t_max"] == 10.0


def test_sweep_presets():
    assert [lab for lab, _ in preset_runs("fig5a")] == ["T10K", "T100K", "T300K", "T1000K"]
    assert [c.spec["rho"] for _, c in preset_runs("fig6")] == [0.01, 0.02, 0.05]
    assert preset_runs("fig5a")[0][1].spec["osc2"]["mass"] == pytest.approx(5e-23)


def test_fig3b_first_row():
    (_, cfg), = preset_runs("fig3b")
    cfg.grid = {"t_max": 1e-6, "points": 2}
    # quoted as 1.1: ten times the 700 K ratio of the ground state
    assert round(float(simulate(cfg).columns["sigma2_norm"][0]), 1) == 1.1


def test_figure_sweep_outputs(tmp_path):
    out = tmp_path / "f6"
    assert main(["figure", "fig6", "--out", str(out), "--tmax", "0.01", "--points", "3"]) == EXIT_OK
    for lab in ("rho0.01", "rho0.02", "rho0.05"):
        assert (out / lab / "trajectory.csv").exists()
        assert (out / lab / "variances.svg").read_text().startswith("<svg")
    meta = json.loads((out / "meta.json").read_text())
    assert meta["rho_sweep"] == [0.01, 0.02, 0.05]
    assert (out / "fig6.svg").exists()
    member = json.loads((out / "rho0.02" / "meta.json").read_text())
    assert member["config"]["spec"]["rho"] == 0.02


def test_simulate_preset_flag(tmp_path):
    out = tmp_path / "p"
    assert main(["simulate", "--preset", "fig4a", "--tmax", "0.01", "--points", "2", "--out", str(out)]) == 0
    assert (out / "covariance.svg").exists()


def test_oracle_not_enabled(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.json")
    assert main(["oracle-compare", "--config", str(cfg)]) == EXIT_USAGE
    assert "oracle not enabled" in capsys.readouterr().err


def test_oracle_uncoupled_cross_column(tmp_path):
    spec = preset_spec(rho=0.0)
    cfg = _write_config(tmp_path / "c.json", spec=spec, grid={"t_max": 0.1, "points": 11},
                        oracle={"enabled": True, "N": 60})
    out = tmp_path / "o"
    main(["oracle-compare", "--config", str(cfg), "--out", str(out)])
    header, data = _read_csv(out / "oracle_compare.csv")
    assert np.all(np.abs(data[:, header.index("err_cross_over_peak")]) < 1e-12)
    report = json.loads((out / "oracle_report.json").read_text())
    assert report["requested_window_truncated"] is True
    assert report["oracle"]["N"] == 60
    assert "T_rec/2" in report["valid_window"]
