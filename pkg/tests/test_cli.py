import json
import subprocess
import sys

import numpy as np
import pytest

from kaidd.cli import main
from kaidd.idd import CSV_HEADER
from kaidd.ldpc_code import load_alist, save_alist


@pytest.fixture()
def alist96(tmp_path, code96):
    p = tmp_path / "c96.alist"
    save_alist(code96, p)
    return p


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", "x.csv"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["build-code"]) == 2


def test_runtime_error_exit_3(tmp_path):
    bad = tmp_path / "r.json"
    bad.write_text("{not json")
    p = tmp_path / "c.alist"
    assert main(["build-code", "--n", "12", "--m", "6", "--dv", "2", "--out", str(p)]) == 0
    assert main(["exit-chart", "--component", "decoder", "--alist", str(p), "--rho-file", str(bad)]) == 3


def test_build_and_analyze(tmp_path):
    p = tmp_path / "c.alist"
    assert main(["build-code", "--n", "96", "--m", "48", "--dv", "3", "--seed", "0", "--out", str(p)]) == 0
    H = load_alist(p)
    assert (H.N, H.M) == (96, 48)
    out = tmp_path / "a.json"
    assert main(["analyze", "--alist", str(p), "--cycles", "--expand", "--dmax", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["girth"] >= 6 and rep["average_connectivity"] == pytest.approx(3.0)
    assert rep["d_max"] == 2 and len(rep["subgraphs"]) > 1


@pytest.mark.parametrize("method", ["ckar", "urw"])
def test_optimize_faps(tmp_path, alist96, method):
    out = tmp_path / "rho.json"
    assert main(["optimize-faps", "--alist", str(alist96), "--method", method, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["method"] == method and len(doc["rho"]) == 48


def test_simulate_minimal(tmp_path, alist96):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(f"K = 2\nNR = 2\nsnr_db = 2 4\nmax_blocks = 3\nalist = {alist96}\n")
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "snr_db,ber,fer,bits,frames,mean_inner_iters,mean_outer_iters"
    assert lines[0].split(",") == list(CSV_HEADER) and len(lines) == 3
    first = out.read_bytes()
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_simulate_needs_output(tmp_path, alist96):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(f"max_blocks = 1\nalist = {alist96}\n")
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_exit_chart_decoder_rows(tmp_path, alist96):
    out = tmp_path / "e.csv"
    assert main(["exit-chart", "--component", "decoder", "--ebn0", "4", "--alist", str(alist96),
                 "--bits", "5000", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "i_a,i_e" and len(rows) == 12
    ia = np.array([float(r.split(",")[0]) for r in rows[1:]])
    assert np.allclose(ia[:10], np.arange(10) / 10)


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "kaidd.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("build-code", "analyze", "optimize-faps", "simulate", "exit-chart"):
        assert cmd in r.stdout
