import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pdd.cli import main
from pdd.config import load_config, parse_config
from pdd.errors import ConfigurationError
from pdd.problems import CvaSpec, KppSpec

KPP_INI = """
[problem]
kind = kpp
lo = -10
hi = 10

[partition]
subdomains = 2

[interface]
levels = 5
samples = 100

[solver]
dx = 0.05
dt_solver = 0.01

[run]
seed = 4

[report]
window_lo = -5
window_hi = 5
"""


@pytest.fixture
def kpp_file(tmp_path):
    path = tmp_path / "kpp.ini"
    path.write_text(KPP_INI)
    return path


def test_parse_fills_defaults_and_overrides():
    loaded = parse_config(KPP_INI, workers=3)
    cfg = loaded.config
    assert loaded.kind == "kpp" and loaded.window == (-5.0, 5.0)
    assert cfg.problem == KppSpec(-10.0, 10.0, 1.0)
    assert (cfg.subdomains, cfg.levels, cfg.samples, cfg.master_seed) == (2, 5, 100, 4)
    assert cfg.workers == 3 and cfg.tol == 1e-3 and cfg.target_se is None
    cva = parse_config("[problem]\nkind = cva\nhorizon = 0.5 ; shorter than T*\n")
    assert cva.config.problem == CvaSpec(horizon=0.5) and cva.exact is None


@pytest.mark.parametrize("text, message", [
    ("[problem]\nkind = kpp\nspeed = 2\n", "unknown key"),
    ("[problem]\nkind = kpp\n[mesh]\nn = 3\n", "unknown section"),
    ("[partition]\nsubdomains = 2\n", "kind is required"),
    ("[problem]\nkind = heat\n", "unknown problem kind"),
    ("[problem]\nkind = kpp\n[partition]\nsubdomains = two\n", "subdomains"),
    ("not an ini file", "malformed"),
])
def test_bad_configs_are_rejected(text, message):
    with pytest.raises(ConfigurationError, match=message):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_outputs(kpp_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(kpp_file), "--out-dir", str(out), "--workers", "2"]) == 0
    rows = _rows(out / "solution.csv")
    assert rows[0] == ["x", "t", "u"]
    assert len(rows) - 1 == 401 * 5
    nodes = _rows(out / "interface_nodes.csv")
    assert nodes[0] == ["cut", "t", "estimate", "std_error", "n"]
    assert len(nodes) - 1 == 5
    assert nodes[1][4] == "0" and int(nodes[2][4]) == 100
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["workers"] == 2 and report["config"]["kind"] == "kpp"
    assert len(report["errors"]["by_time"]) == 5
    assert report["timings"]["per_subdomain_seconds"]

    # values survive the text round trip exactly and match a fresh in-process run
    from pdd.orchestrator import run_pdd
    sol, _ = run_pdd(load_config(kpp_file).config)
    written = np.array([[float(v) for v in r] for r in rows[1:]])
    assert np.array_equal(written[:, 2], sol.values.ravel())


def test_run_elliptic(tmp_path):
    path = tmp_path / "ell.ini"
    path.write_text("[problem]\nkind = manufactured\n[partition]\nsubdomains = 2\n"
                    "[interface]\nlevels = 5\nsamples = 50\n[solver]\ndx = 0.1\n")
    assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 0
    assert _rows(tmp_path / "solution.csv")[0] == ["x", "y", "u"]
    assert _rows(tmp_path / "interface_nodes.csv")[0][1] == "y"
    assert "max_abs_error" in json.loads((tmp_path / "report.json").read_text())["errors"]


def test_check_exit_codes(tmp_path, capsys):
    ok = tmp_path / "ok.ini"
    ok.write_text("[problem]\nkind = cva\nhorizon = 0.25\n")
    assert main(["check", str(ok)]) == 0
    assert json.loads(capsys.readouterr().out)["case"] != "violated"
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nkind = cva\nhorizon = 1.0\n")
    assert main(["check", str(bad)]) == 7
    assert "AssumptionViolation" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[problem]\nkind = kpp\ncolour = red\n")
    assert main(["run", str(path)]) == 3


def test_bench(kpp_file, tmp_path, capsys):
    assert main(["bench", str(kpp_file), "--subdomains", "1,2", "--out-dir", str(tmp_path)]) == 0
    assert "p=2" in capsys.readouterr().out
    table = json.loads((tmp_path / "report.json").read_text())["bench"]
    assert [row["p"] for row in table] == [1, 2]
    assert table[0]["solve_speedup_model"] == 1.0


def test_console_entry_point(kpp_file):
    done = subprocess.run([sys.executable, "-m", "pdd.cli", "check", str(kpp_file)],
                          capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
