"""Tests for configuration parsing, subcommands and the entry point."""

import json
import math

import numpy as np
import pandas as pd
import pytest

import main
from cli import commands
from cli.commands import CommandOptions, run
from cli.run_config import RunConfig, parse_config
from errors import ConfigError, GridTooCoarse, QuadratureNotConverged, ValidationFailed
from physics.opa import OpaParams
from storage.json_store import load_json, load_profile
from storage.pgm import GrayImage, write_pgm

SEED = "20061"


def _write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# Configuration


def test_empty_config_is_default_model():
    cfg = parse_config()
    assert cfg.opa == OpaParams(
        sigma=3.0, delta0=0.0, gvm=1.0, gvd=0.0, diffraction=1.0, pump_phase=math.pi
    )
    assert cfg.mc.seed is None
    assert cfg.output_field == 2


def test_flag_overrides_file(tmp_path):
    path = _write_config(tmp_path, {"opa": {"sigma": 3}, "grid": {"delta": 5}})
    cfg = parse_config(path, {"opa.sigma": 1.5, "grid.t_window": None})
    assert cfg.opa.sigma == 1.5
    assert cfg.grid.delta == 5.0
    assert cfg.grid.t_window == 10.0


@pytest.mark.parametrize(
    "data, key_path",
    [
        ({"opa": {"sigma": -1.0}}, "opa.sigma"),
        ({"opa": {"sigmaa": 1.0}}, "opa.sigmaa"),
        ({"opa": {"sigma": "big"}}, "opa.sigma"),
        ({"grid": {"nx": 1.5}}, "grid.nx"),
        ({"grid": {"delta": 0}}, "grid.delta"),
        ({"mc": {"seed": -3}}, "mc.seed"),
        ({"quadrature": {"tol": 0.0}}, "quadrature.tol"),
        ({"compensation": {"degree": 5}}, "compensation.degree"),
        ({"output_field": 3}, "output_field"),
        ({"colour": "blue"}, "colour"),
        ({"opa": {"omega_p": 3.0}}, "opa"),
        ({"mc": []}, "mc"),
    ],
)
def test_invalid_settings_name_their_key(tmp_path, data, key_path):
    with pytest.raises(ConfigError) as info:
        parse_config(_write_config(tmp_path, data))
    assert info.value.key_path == key_path


def test_bool_is_not_a_number():
    with pytest.raises(ConfigError):
        parse_config(overrides={"opa.sigma": True})


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config(broken)


def test_seed_is_required_for_stochastic_runs():
    with pytest.raises(ConfigError) as info:
        RunConfig().require_seed()
    assert info.value.key_path == "mc.seed"
    assert parse_config(overrides={"mc.seed": 7}).require_seed() == 7


def test_settings_leave_out_run_location():
    settings = parse_config(overrides={"threads": 4, "out_dir": "/tmp/x"}).settings()
    assert "threads" not in settings
    assert "out_dir" not in settings
    assert settings["opa"]["sigma"] == 3.0


# Subcommands


def test_ellipse_command(tmp_path):
    cfg = parse_config(overrides={"out_dir": str(tmp_path)})
    paths = run("ellipse", cfg, CommandOptions(omega_min=-1.0, omega_max=1.0, count=5))
    names = sorted(p.name for p in paths)
    assert names == ["ellipse.csv", "manifest.json", "summary.md"]
    frame = pd.read_csv(tmp_path / "ellipse" / "ellipse.csv")
    assert list(frame.columns) == ["omega", "psi", "r", "major", "minor"]
    assert frame["r"].iloc[2] == pytest.approx(3.0)

    manifest = load_json(tmp_path / "ellipse" / "manifest.json")
    assert manifest["subcommand"] == "ellipse"
    assert manifest["artifacts"] == ["ellipse.csv", "summary.md"]
    assert len(manifest["fingerprint"]) == 16


def test_scan_command_without_gain(tmp_path):
    cfg = parse_config(overrides={"out_dir": str(tmp_path), "opa.sigma": 0.0})
    run("scan", cfg, CommandOptions(d_values=(1.0, 2.0), t_values=(10.0, 1.0)))
    frame = pd.read_csv(tmp_path / "scan" / "scan.csv")
    assert list(frame.columns) == ["delta", "t", "c_diag"]
    assert len(frame) == 4
    assert (frame["c_diag"] == 2.0).all()
    summary = (tmp_path / "scan" / "summary.md").read_text(encoding="utf-8")
    assert "lowest C_diag" in summary


def test_scan_with_flattening_saves_profile(tmp_path):
    cfg = parse_config(overrides={"out_dir": str(tmp_path), "opa.sigma": 0.0})
    run("scan", cfg, CommandOptions(d_values=(1.0,), t_values=(1.0,), flatten=True))
    profile = load_profile(tmp_path / "scan" / "profile.json")
    assert profile.degree == 1


def test_profile_and_flatten_conflict(tmp_path):
    cfg = parse_config(overrides={"out_dir": str(tmp_path), "compensation.profile": "p.json"})
    with pytest.raises(ConfigError):
        run("scan", cfg, CommandOptions(flatten=True))


def test_covariance_command_without_gain(tmp_path):
    cfg = parse_config(
        overrides={
            "out_dir": str(tmp_path),
            "opa.sigma": 0.0,
            "grid.delta": 2.0,
            "grid.t_window": 2.0,
            "grid.nx": 2,
        }
    )
    run("covariance", cfg)
    frame = pd.read_csv(tmp_path / "covariance" / "covariance.csv")
    assert list(frame.columns) == ["j", "i", "jp", "ip", "c"]
    assert frame["c"].tolist() == [2.0, 0.0, 2.0]


def test_unknown_subcommand(tmp_path):
    with pytest.raises(ConfigError):
        run("plot", parse_config(overrides={"out_dir": str(tmp_path)}))


# Entry point


def _vacuum_args(tmp_path, *extra):
    return [
        "--out",
        str(tmp_path),
        "--sigma",
        "0",
        "--pixel-size",
        "2",
        "--t-window",
        "2",
        "--margin",
        "1",
        *extra,
    ]


def test_main_prints_artifacts_to_stdout(tmp_path, capsys):
    code = main.main(["ellipse", "--out", str(tmp_path), "--count", "3"])
    assert code == 0
    printed = capsys.readouterr().out.split()
    assert sorted(p.rsplit("/", 1)[-1] for p in printed) == [
        "ellipse.csv",
        "manifest.json",
        "summary.md",
    ]


def test_main_config_error_exit_code(tmp_path, capsys):
    assert main.main(["ellipse", "--out", str(tmp_path), "--sigma", "-1"]) == 2
    assert capsys.readouterr().out == ""


def test_main_missing_seed_exit_code(tmp_path):
    assert main.main(["mc-validate", *_vacuum_args(tmp_path, "--samples", "200")]) == 2


def test_main_bad_image_exit_code(tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    assert main.main(["teleport", str(bad), *_vacuum_args(tmp_path, "--seed", SEED)]) == 2


def test_main_numerical_failure_exit_codes(tmp_path, monkeypatch):
    def coarse(cfg, opts, out):
        raise GridTooCoarse("pixel size 2 spans 4 lattice sites")

    def diverged(cfg, opts, out):
        raise QuadratureNotConverged(1e-2, 1e-6)

    monkeypatch.setitem(commands.COMMANDS, "ellipse", coarse)
    assert main.main(["ellipse", "--out", str(tmp_path)]) == 3
    monkeypatch.setitem(commands.COMMANDS, "ellipse", diverged)
    assert main.main(["ellipse", "--out", str(tmp_path)]) == 3


def test_main_validation_failure_exit_code(tmp_path, monkeypatch):
    def mismatch(cfg, opts, out):
        return commands.CommandResult(failure=ValidationFailed(1, 2))

    monkeypatch.setitem(commands.COMMANDS, "ellipse", mismatch)
    assert main.main(["ellipse", "--out", str(tmp_path)]) == 1
    # the run record is still written
    assert (tmp_path / "ellipse" / "manifest.json").exists()


def test_mc_validate_passes_without_gain(tmp_path):
    args = _vacuum_args(tmp_path, "--seed", SEED, "--samples", "400")
    code = main.main(["mc-validate", *args])
    assert code == 0
    frame = pd.read_csv(tmp_path / "mc-validate" / "validation.csv")
    columns = ["phi", "j", "i", "jp", "ip", "c_quad", "c_mc", "stderr", "z", "pass"]
    assert list(frame.columns) == columns
    assert frame["pass"].all()
    assert frame["phi"].tolist() == pytest.approx([0.0, math.pi / 3])


def test_teleport_is_deterministic_across_threads(tmp_path):
    image = write_pgm(tmp_path / "img.pgm", GrayImage(np.array([[0, 255]]), 255))
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / f"run{threads}"
        args = _vacuum_args(out, "--seed", SEED, "--samples", "20", "--threads", threads)
        assert main.main(["teleport", str(image), *args]) == 0
        outputs.append(out / "teleport")
    first, second = outputs
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    assert "manifest.json" in names and "fidelity.csv" in names
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()
