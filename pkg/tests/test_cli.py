import json
import subprocess
import sys

import pytest

from superocc import cli
from superocc import config as C
from superocc.errors import ConfigError

SMALL_SIM = {"d": 1, "mu": {"kind": "dirac", "point": [0.0]}, "kernel": {"kind": "gaussian", "sigma2": 0.5,
             "length_scale": 1.0}, "unit_mass": 0.01, "horizon": 0.1}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_defaults_load():
    for cmd in C.MODELS:
        assert C.load(cmd, None).version == 1


def test_unknown_key_rejected(tmp_path):
    path = write(tmp_path, "c.json", {"sim": {"d": 1, "bogus": 3}})
    with pytest.raises(ConfigError) as exc:
        C.load("simulate", path)
    assert "bogus" in exc.value.path
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_wrong_command_rejected(tmp_path):
    path = write(tmp_path, "c.json", {"command": "tanaka"})
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_dimension_four_rejected(tmp_path, capsys):
    sim = dict(SMALL_SIM, d=4, mu={"kind": "dirac", "point": [0.0] * 4})
    path = write(tmp_path, "c.json", {"sim": sim})
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert "singular" in capsys.readouterr().err


def test_clamp_guard_is_config_error(tmp_path):
    sim = dict(SMALL_SIM, kernel={"kind": "constant", "c": 100.0})
    path = write(tmp_path, "c.json", {"sim": sim})
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_simulate_is_reproducible(tmp_path):
    path = write(tmp_path, "c.json", {"sim": SMALL_SIM, "replicates": 2, "density": {"lo": -1, "hi": 1, "n": 9}})
    for name in ("a", "b"):
        assert cli.main(["simulate", "--config", path, "--seed", "7", "--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "trajectory_0001.bin" in files and "density_0000.csv" in files and "summary.csv" in files
    for f in files:
        if f == "manifest.json":
            continue
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 7 and man["config"]["sim"]["horizon"] == 0.1
    assert man["backend"] in ("cython", "numpy")


def test_out_dir_precedence(tmp_path, monkeypatch):
    path = write(tmp_path, "c.json", {"sim": dict(SMALL_SIM, horizon=0.0), "out": str(tmp_path / "cfg")})
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["simulate", "--config", path]) == 0
    assert (tmp_path / "env" / "manifest.json").exists() and not (tmp_path / "cfg").exists()
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "manifest.json").exists()


def test_verify_moments_small(tmp_path):
    cfg = {"sim": dict(SMALL_SIM, horizon=0.0), "replicates": 5, "n_paths": 100}
    out = tmp_path / "o"
    assert cli.main(["verify-moments", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    rows = json.loads((out / "moments.json").read_text())
    assert rows and all(r["passed"] for r in rows)
    assert (out / "moments.csv").exists()


def test_tanaka_small(tmp_path):
    cfg = {"sim": dict(SMALL_SIM, kernel={"kind": "zero"}), "replicates": 4}
    out = tmp_path / "o"
    code = cli.main(["tanaka", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)])
    rep = json.loads((out / "tanaka.json").read_text())
    assert rep["residual_ok"]
    assert code in (0, 1)  # monotone approach is statistical at 4 replicates


def test_green_rep_small(tmp_path):
    cfg = {"sim": dict(SMALL_SIM, horizon=0.2), "replicates": 3, "dt_levels": [0.02, 0.01]}
    out = tmp_path / "o"
    code = cli.main(["green-rep", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)])
    rep = json.loads((out / "green_rep.json").read_text())
    assert len(rep["ratios"]) == 1 and code in (0, 1)


def test_holder_calibration_only(tmp_path):
    cfg = {"calibration_only": True}
    out = tmp_path / "o"
    assert cli.main(["holder", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    assert json.loads((out / "holder.json").read_text())["calibration"]["passed"]


def test_kernel_selftest_cli(tmp_path):
    cfg = {"n_samples": 20}
    out = tmp_path / "o"
    assert cli.main(["kernel-selftest", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    assert json.loads((out / "kernel_selftest.json").read_text())["passed"]


def test_gnuplot_helper(tmp_path):
    data = tmp_path / "density_0000.txt"
    data.write_text("0 1\n")
    assert cli.main(["gnuplot", str(data)]) == 0
    assert "plot" in (tmp_path / "density_0000.gp").read_text()


def test_bad_seed_and_usage(tmp_path):
    assert cli.main(["simulate", "--seed", "-1", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-command"])
    assert exc.value.code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "superocc.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "superocc" in proc.stdout
