import json
import math

import numpy as np
import pytest

from phasechem import checks as checks_mod
from phasechem import potentials as pot
from phasechem.cli import main
from phasechem.config import parse_config
from phasechem.errors import ConfigError
from phasechem.grid import GridSpec
from phasechem.output import read_snapshot, write_snapshot

BENCH = """\
[domain]
dim = 1
cells = 64
lengths = 1.0

[time]
dt = 1e-3
t_end = 0.2
report_every = 0.05

[model]
chi = 1.0
lambda = 0.5
epsilon = 0.0
alpha_type = constant
alpha_value = 0.0

[ic]
phi_type = tanh_interface
phi_center = 0.5
phi_width = 0.25
sigma_type = gaussian_bump
sigma_center = 0.35
sigma_width = 0.15
sigma_mass = 1.0

[solver]
newton_tol = 1e-10

[output]
snapshot_every = 2
snapshot_format = text
"""


def write_cfg(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_timeseries(run_dir):
    lines = (run_dir / "timeseries.csv").read_text().splitlines()
    assert lines[0].startswith("# phasechem-timeseries-")
    header = lines[1].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    return header, rows


# --- config-file handling ----------------------------------------------------


def test_config_roundtrip_idempotent():
    c1 = parse_config(BENCH)
    c2 = parse_config(c1.to_ini())
    c3 = parse_config(c2.to_ini())
    assert c2 == c3
    assert c1.grid == c2.grid and c1.alpha == c2.alpha and c1.phi_ic == c2.phi_ic


def test_config_rejects_unknown_key_and_section():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(BENCH + "\n[solver]\nbogus = 1\n".replace("[solver]\n", ""))
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(BENCH + "\n[mystery]\na = 1\n")


def test_config_requires_core_fields():
    with pytest.raises(ConfigError):
        parse_config("[domain]\ncells = 8\nlengths = 1.0\n")
    with pytest.raises(ConfigError, match="dim"):
        parse_config(BENCH.replace("dim = 1", "dim = 2"))


def test_config_2d_parse():
    text = BENCH.replace("dim = 1", "dim = 2").replace(
        "cells = 64", "cells = 16, 12"
    ).replace("lengths = 1.0", "lengths = 1.0, 0.75")
    cfg = parse_config(text)
    assert cfg.grid == GridSpec((16, 12), (1.0, 0.75))


# --- run ---------------------------------------------------------------------


def test_cmd_run_zero_horizon(tmp_path):
    cfg = write_cfg(tmp_path, BENCH.replace("t_end = 0.2", "t_end = 0.0"))
    rc = main(["run", str(cfg), "--out", str(tmp_path / "zero")])
    assert rc == 0
    _, rows = read_timeseries(tmp_path / "zero")
    assert len(rows) == 1
    assert float(rows[0]["t"]) == 0.0


def test_cmd_run_rejects_negative_sigma(tmp_path, capsys):
    bad = BENCH.replace(
        "sigma_type = gaussian_bump", "sigma_type = constant"
    ).replace("sigma_center = 0.35\n", "sigma_value = -1.0\n").replace(
        "sigma_width = 0.15\n", ""
    ).replace("sigma_mass = 1.0\n", "")
    cfg = write_cfg(tmp_path, bad)
    rc = main(["run", str(cfg), "--out", str(tmp_path / "bad")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "strictly positive" in err
    manifest = json.loads((tmp_path / "bad" / "manifest.json").read_text())
    assert manifest["status"] == "config_error"


def test_cmd_run_benchmark_outputs(tmp_path):
    cfg = write_cfg(tmp_path, BENCH)
    out = tmp_path / "bench"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert manifest["alpha_bounds"] == [0.0, 0.0]
    assert set(manifest["ic_checks"]) == {
        "mean_phi0",
        "min_sigma0",
        "sigma0_llogl",
        "gamma_hat_ln_sigma0",
    }
    header, rows = read_timeseries(out)
    assert header[:3] == ["t", "mass_phi", "mass_sigma"]
    assert len(rows) == 5  # t = 0, .05, .1, .15, .2
    mass0 = float(rows[0]["mass_phi"])
    for row in rows:
        assert abs(float(row["mass_phi"]) - mass0) <= 1e-9
        assert float(row["min_sigma"]) > 0.0
        assert float(row["max_phi"]) < 1.0
    snaps = sorted(out.glob("phi_*.dat"))
    assert len(snaps) == 3  # reports 0, 2, 4


def test_cmd_run_reference_golden(tmp_path):
    # the reference configuration: 64 cells, chi = 1, lambda = 0.5,
    # constant alpha = 0, t_end = 1; the CSV must satisfy the structure laws
    text = BENCH.replace("t_end = 0.2", "t_end = 1.0").replace(
        "snapshot_every = 2", "snapshot_every = 0"
    )
    cfg = write_cfg(tmp_path, text, name="reference.ini")
    out = tmp_path / "golden"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    _, rows = read_timeseries(out)
    assert len(rows) == 21
    mass0 = float(rows[0]["mass_phi"])
    zetas = [float(r["grad_ln_sigma_sq_cum"]) for r in rows]
    for row in rows:
        assert abs(float(row["mass_phi"]) - mass0) <= 1e-9
        assert float(row["min_sigma"]) > 0.0
        assert 1.0 - max(abs(float(row["min_phi"])), abs(float(row["max_phi"]))) >= 1e-6
        assert math.isfinite(float(row["llogl_beta"]))
        assert math.isfinite(float(row["entropy_identity_residual"]))
    assert all(b >= a for a, b in zip(zetas, zetas[1:]))
    # constant-alpha mass bracket at the report times
    for row in rows[1:]:
        ratio = float(row["mass_sigma"]) / float(rows[0]["mass_sigma"])
        assert abs(ratio - 1.0) <= 5e-3  # alpha = 0: mass conserved up to O(tau)


def test_cmd_run_determinism(tmp_path):
    cfg = write_cfg(tmp_path, BENCH)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "timeseries.csv").read_bytes()
    b = (tmp_path / "b" / "timeseries.csv").read_bytes()
    assert a == b


def test_cmd_run_aborts_with_exit_2(tmp_path, capsys):
    hostile = BENCH.replace("phi_width = 0.25", "phi_width = 0.15").replace(
        "sigma_width = 0.15", "sigma_width = 0.12"
    ).replace("dt = 1e-3", "dt = 2e-4")
    cfg = write_cfg(tmp_path, hostile)
    rc = main(["run", str(cfg), "--out", str(tmp_path / "abort")])
    assert rc == 2
    manifest = json.loads((tmp_path / "abort" / "manifest.json").read_text())
    assert manifest["status"] == "aborted"
    assert "Newton" in manifest["failure_reason"]


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PHASECHEM_OUTPUT_ROOT", str(tmp_path))
    cfg = write_cfg(tmp_path, BENCH.replace("t_end = 0.2", "t_end = 0.0"))
    assert main(["run", str(cfg), "--out", "enved"]) == 0
    assert (tmp_path / "enved" / "manifest.json").exists()


# --- snapshots ---------------------------------------------------------------


@pytest.mark.parametrize("fmt", ["text", "binary"])
def test_snapshot_roundtrip(tmp_path, fmt):
    grid = GridSpec((6, 4), (1.0, 2.0))
    rng = np.random.default_rng(0)
    f = grid.field(rng.standard_normal(grid.n_cells))
    path = tmp_path / f"snap.{fmt}"
    write_snapshot(path, f, t=0.375, fmt=fmt)
    back, t = read_snapshot(path)
    assert t == 0.375
    assert back.grid == grid
    assert np.array_equal(back.values, f.values)


# --- sweep -------------------------------------------------------------------


def test_cmd_sweep_grid(tmp_path):
    cfg = write_cfg(tmp_path, BENCH.replace("t_end = 0.2", "t_end = 0.05"))
    out = tmp_path / "sweep"
    rc = main(
        [
            "sweep",
            str(cfg),
            "--set",
            "model.chi=0,1,2",
            "--set",
            "time.dt=1e-3,5e-4",
            "--out",
            str(out),
            "--jobs",
            "2",
        ]
    )
    assert rc == 0
    cells = sorted(p for p in out.iterdir() if p.is_dir())
    assert len(cells) == 6
    for cell in cells:
        assert (cell / "manifest.json").exists()
        assert (cell / "timeseries.csv").exists()
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("# phasechem-sweep")
    assert lines[1].split(",")[:2] == ["cell", "dir"]
    assert "model.chi" in lines[1]
    assert len(lines) == 2 + 6


def test_cmd_sweep_empty_overrides_behaves_as_run(tmp_path):
    cfg = write_cfg(tmp_path, BENCH.replace("t_end = 0.2", "t_end = 0.05"))
    out = tmp_path / "sweep1"
    assert main(["sweep", str(cfg), "--out", str(out)]) == 0
    cells = [p for p in out.iterdir() if p.is_dir()]
    assert len(cells) == 1
    assert (cells[0] / "timeseries.csv").exists()


def test_cmd_sweep_partial_failure(tmp_path):
    cfg = write_cfg(tmp_path, BENCH.replace("t_end = 0.2", "t_end = 0.05"))
    out = tmp_path / "sweepfail"
    rc = main(["sweep", str(cfg), "--set", "model.lambda=0.5,-1.0", "--out", str(out)])
    assert rc == 1  # the lambda = -1 cell is a config error
    lines = (out / "summary.csv").read_text().splitlines()
    statuses = [line.split(",")[3] for line in lines[2:]]
    assert "completed" in statuses and "config_error" in statuses


# --- wsu ---------------------------------------------------------------------

WSU_EXTRA = """
[wsu]
refine = {refine}
cmax = {cmax}
sigma_perturb = {perturb}
"""


def wsu_config(refine=2, cmax=50.0, perturb=0.0):
    # coarse dt = h^2/4 keeps the initial-layer mismatch below the
    # contraction floor at every comparison time, not just at lucky ones
    text = BENCH.replace("t_end = 0.2", "t_end = 0.1").replace(
        "cells = 64", "cells = 32"
    ).replace("dt = 1e-3", "dt = 0.000244140625").replace(
        "report_every = 0.05", "report_every = 0.005"
    ).replace("snapshot_every = 2", "snapshot_every = 0")
    return text + WSU_EXTRA.format(refine=refine, cmax=cmax, perturb=perturb)


def test_cmd_wsu_identical_pair_passes(tmp_path):
    cfg = write_cfg(tmp_path, wsu_config(refine=1), name="wsu.ini")
    out = tmp_path / "wsu_id"
    rc = main(["wsu", str(cfg), "--out", str(out)])
    assert rc == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["passed"] is True
    lines = (out / "wsu_series.csv").read_text().splitlines()
    assert lines[0].startswith("# phasechem-wsu")
    assert lines[1] == "t,R,kl_part,v0dual_part,W,relenin_residual"
    for line in lines[2:]:
        assert float(line.split(",")[1]) <= 1e-12


def test_cmd_wsu_same_ic_pair_passes(tmp_path):
    cfg = write_cfg(tmp_path, wsu_config(refine=2), name="wsu2.ini")
    out = tmp_path / "wsu_ref"
    rc = main(["wsu", str(cfg), "--out", str(out)])
    assert rc == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["passed"] is True
    assert verdict["max_R_over_floor"] <= 10.0
    assert verdict["relenin_pos_p95"] <= verdict["relenin_pos_max"] + 1e-300


def test_cmd_wsu_negative_control_fails(tmp_path):
    cfg = write_cfg(tmp_path, wsu_config(refine=2, cmax=0.0, perturb=0.01), name="neg.ini")
    out = tmp_path / "wsu_neg"
    rc = main(["wsu", str(cfg), "--out", str(out)])
    assert rc == 2
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["passed"] is False
    assert verdict["max_R_over_floor"] > 10.0


def test_cmd_wsu_requires_section(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BENCH)
    assert main(["wsu", str(cfg), "--out", str(tmp_path / "w")]) == 1
    assert "[wsu]" in capsys.readouterr().err


def test_cmd_wsu_random_ic_uses_first_measured_floor(tmp_path):
    # random data are drawn on the fine grid and restricted, so the pair
    # coincides at t = 0; the contraction scale is then the first measured R
    text = wsu_config(refine=2)
    text = text.replace("phi_type = tanh_interface", "phi_type = random_perturbation")
    text = text.replace("phi_center = 0.5\n", "phi_amplitude = 0.4\n")
    text = text.replace("phi_width = 0.25\n", "phi_seed = 11\n")
    cfg = write_cfg(tmp_path, text, name="wsu_rand.ini")
    out = tmp_path / "wsu_rand"
    rc = main(["wsu", str(cfg), "--out", str(out)])
    assert rc == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["passed"] is True
    lines = (out / "wsu_series.csv").read_text().splitlines()
    assert float(lines[2].split(",")[1]) <= 1e-12  # identical at t = 0


# --- check -------------------------------------------------------------------


def test_cmd_check_passes_pristine(capsys):
    import time

    t0 = time.perf_counter()
    assert main(["check"]) == 0
    wall = time.perf_counter() - t0
    out = capsys.readouterr().out
    assert "ok   grid_conservation" in out
    assert "FAIL" not in out
    assert wall < 60.0


def test_check_battery_catches_injected_fault(monkeypatch, capsys):
    # mutation control: flip the sign of the monotone part
    real_beta = pot.beta
    monkeypatch.setattr(pot, "beta", lambda r: -real_beta(r))
    ok = checks_mod.run_checks()
    captured = capsys.readouterr().out
    assert ok is False
    assert "FAIL potentials_beta_monotonicity" in captured
