import csv
import filecmp
import json
import math

import numpy as np
import pytest

from agmonlab.cli import main, run
from agmonlab.config import ExperimentConfig, parse_config
from agmonlab.errors import ConfigError

CONTROL_CFG = """
[experiment]
name = control

[problem]
builtin = sphere
mode = fixed:1
h = 0.1, 0.0562, 0.0316, 0.0178, 0.01

[parameters]
eps = 0.2
"""


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def artifacts(directory):
    return sorted(p.name for p in directory.iterdir())


def test_parse_config_values():
    cfg = parse_config(CONTROL_CFG + "p = inf\nprobes = 1.0, 2.0  # inline comment\n")
    assert cfg.experiment == "control"
    assert cfg.h == (0.1, 0.0562, 0.0316, 0.0178, 0.01)
    assert math.isinf(cfg.p)
    assert cfg.probes == (1.0, 2.0)


def test_digest_ignores_output_directory():
    a = parse_config(CONTROL_CFG, out="x")
    b = parse_config(CONTROL_CFG, out="y")
    assert a.digest() == b.digest()
    assert a.digest() != a.with_(eps=0.3).digest()


@pytest.mark.parametrize("text", [
    CONTROL_CFG + "bogus = 1\n",
    CONTROL_CFG + "[extra]\nx = 1\n",
    CONTROL_CFG.replace("0.0316, 0.0178", "0.0178, 0.0316"),
    CONTROL_CFG.replace("eps = 0.2", "eps = -1"),
    CONTROL_CFG.replace("fixed:1", "sideways:1"),
    CONTROL_CFG.replace("name = control", "name = teleport"),
    "[problem]\nbuiltin = airy\n",
    CONTROL_CFG.replace("name = control", "name = nodal").replace("sphere", "airy"),
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_error_exit_code_leaves_no_artifacts(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(CONTROL_CFG + "bogus = 1\n")
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 64
    assert not out.exists()
    assert main(["--config", str(tmp_path / "missing.ini")]) == 64
    assert main([]) == 64


def test_control_experiment(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CONTROL_CFG)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    assert "control_holds" in capsys.readouterr().out
    names = artifacts(out)
    assert len(names) == 2 and names[0].startswith("control-") and names[0].endswith(".csv")
    rows = read_csv(out / names[0])
    assert [int(r["m"]) for r in rows] == [1] * 5
    report = json.loads((out / names[1]).read_text())
    assert report["exit_code"] == 0
    assert report["report"]["classification"] == "control_holds"


def test_agmon_distance_csv(tmp_path):
    assert main(["--experiment", "agmon-distance", "--out", str(tmp_path)]) == 0
    (name,) = [n for n in artifacts(tmp_path) if n.endswith(".csv")]
    rows = read_csv(tmp_path / name)
    x = np.array([float(r["coord"]) for r in rows])
    d = np.array([float(r["d_E"]) for r in rows])
    assert np.interp(1.0, x, d) == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_custom_table(tmp_path):
    table = tmp_path / "v.csv"
    x = np.linspace(-3.0, 3.0, 601)
    np.savetxt(table, np.column_stack((x, x ** 2)), delimiter=",")
    cfg = tmp_path / "t.ini"
    cfg.write_text(f"[experiment]\nname = agmon-distance\n[problem]\nbuiltin = custom-table\n"
                   f"table = {table}\nE = 1\n")
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    cfg.write_text("[experiment]\nname = regularity\n[problem]\nbuiltin = custom-table\n"
                   "table = nowhere.csv\n")
    assert main(["--config", str(cfg), "--out", str(out)]) == 64


def test_counterexample_and_reverse_exit_codes(tmp_path):
    res = run(ExperimentConfig("counterexample", out=str(tmp_path)))
    assert res.code == 0
    assert res.report["control"]["classification"] == "control_fails_exponential"
    rev = run(ExperimentConfig("reverse-agmon", out=str(tmp_path), builtin="sphere",
                               mode="inverse:1"))
    assert rev.code == 3


def test_full_suite_is_deterministic(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["--experiment", "full-suite", "--out", str(a)]) == 0
    assert main(["--experiment", "full-suite", "--out", str(b)]) == 0
    assert main(["--experiment", "full-suite", "--out", str(c), "--parallel", "4"]) == 0
    names = artifacts(a)
    assert names == artifacts(b) == artifacts(c)
    assert len(names) == 20
    for other in (b, c):
        match, mismatch, errors = filecmp.cmpfiles(a, other, names, shallow=False)
        assert not mismatch and not errors
