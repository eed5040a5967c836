import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from magrotor import __version__
from magrotor.cli import COMPARE_COLUMNS, FREQ_COLUMNS, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MATERIAL = str(CONFIGS / "cobalt_10nm.cfg")
STRONG = str(CONFIGS / "ioffe_strong_bias.cfg")
WEAK = str(CONFIGS / "ioffe_weak_bias.cfg")
SOURCE = ["--material", MATERIAL, "--trap", STRONG]


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out.read_bytes() if out.exists() else b""


def _rows(data):
    return list(csv.reader(io.StringIO(data.decode())))


def test_frequency_sweep(tmp_path):
    code, data = _run(tmp_path, "frequencies", *SOURCE, "--radii", "5e-9", "1e-8", "2e-8")
    assert code == 0
    rows = _rows(data)
    assert rows[0] == FREQ_COLUMNS
    assert [float(r[0]) for r in rows[1:]] == [5e-9, 1e-8, 2e-8]
    assert all(r[-1] == "ok" for r in rows[1:])


def test_empty_sweep_writes_header_only(tmp_path):
    code, data = _run(tmp_path, "frequencies", *SOURCE, "--radii")
    assert code == 0
    assert _rows(data) == [FREQ_COLUMNS]


def test_log_spaced_sweep_and_reruns_are_identical(tmp_path):
    args = ["frequencies", *SOURCE, "--points", "7", "--rmin", "2e-9", "--rmax", "5e-8"]
    _, first = _run(tmp_path, *args, name="a")
    _, second = _run(tmp_path, *args, name="b")
    assert first == second
    assert len(_rows(first)) == 8


def test_threaded_sweep_keeps_order(tmp_path, monkeypatch):
    args = ["frequencies", *SOURCE, "--points", "9"]
    _, serial = _run(tmp_path, *args, name="a")
    monkeypatch.setenv("MAGROTOR_THREADS", "4")
    _, threaded = _run(tmp_path, *args, name="b")
    assert serial == threaded


@pytest.mark.parametrize("value", ["zero", "0", "-3"])
def test_bad_thread_count_is_a_usage_error(tmp_path, monkeypatch, value):
    monkeypatch.setenv("MAGROTOR_THREADS", value)
    code, _ = _run(tmp_path, "frequencies", *SOURCE, "--points", "3")
    assert code == 2


def test_usage_errors(tmp_path, capsys):
    assert main(["frequencies", "--radii", "1e-8"]) == 2
    assert main(["frequencies", "--material", MATERIAL, "--trap", str(tmp_path / "nope.cfg")]) == 2
    assert main(["frequencies", *SOURCE, "--radii", "-1e-8"]) == 2
    assert main(["spectrum", *SOURCE, "--jmax", "-1"]) == 2
    assert main(["spectrum", *SOURCE, "--exact"]) == 2
    assert main(["nonsense"]) == 2
    assert main([]) == 2
    assert "magrotor:" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["B0_T = 1e-2\n", "B0_T = one\nBp_T_per_m = 1e4\nBpp_T_per_m2 = 1e6\n",
                                  "this is not a config\n"])
def test_corrupted_trap_config(tmp_path, text):
    bad = tmp_path / "bad.cfg"
    bad.write_text(text)
    assert main(["frequencies", "--material", MATERIAL, "--trap", str(bad), "--radii", "1e-8"]) == 2


def test_non_confining_trap_is_a_usage_error(tmp_path):
    bad = tmp_path / "flat.cfg"
    bad.write_text("B0_T = 1e-3\nBp_T_per_m = 0\nBpp_T_per_m2 = 1e6\n")
    assert main(["spectrum", "--material", MATERIAL, "--trap", str(bad)]) == 2


def test_validate_exit_codes(tmp_path):
    code, data = _run(tmp_path, "validate", "--suite", "field")
    doc = json.loads(data)
    assert code == 0 and doc["passed"]
    assert doc["version"] == __version__
    code, data = _run(tmp_path, "validate", "--suite", "bosonization", name="b")
    assert code == 1
    assert not json.loads(data)["passed"]


def test_bosonize_reports_dropped_terms(tmp_path):
    code, data = _run(tmp_path, "bosonize", *SOURCE, "--full")
    doc = json.loads(data)
    # the pipeline disagrees with two transcribed entries, so the run fails
    assert code == 1
    assert "HI" in doc["dominant_dropped"]
    assert doc["dropped"]
    assert len(doc["numeric"]["quadratic_form"]["modes"]) == 7


def test_spectrum_flags_instability(tmp_path):
    code, data = _run(tmp_path, "spectrum", "--material", MATERIAL, "--trap", WEAK)
    assert code == 0
    assert not json.loads(data)["normal_modes"]["stable"]
    code, data = _run(tmp_path, "spectrum", *SOURCE, name="b")
    assert json.loads(data)["normal_modes"]["stable"]


def test_small_exact_spectrum(tmp_path):
    with pytest.warns(RuntimeWarning):
        code, data = _run(tmp_path, "spectrum", *SOURCE, "--exact", "--smax", "1", "--jmax", "1", "--count", "3")
    exact = json.loads(data)["exact"]
    assert code == 0
    assert exact["Jmax"] == 2 and len(exact["lowest"]) == 3
    assert exact["lowest"] == sorted(exact["lowest"])


def test_decoupled_compare(tmp_path, capsys):
    code, data = _run(tmp_path, "compare", *SOURCE, "--s", "2", "3", "--zero-couplings")
    assert code == 0
    rows = _rows(data)
    assert rows[0] == COMPARE_COLUMNS
    assert {r[1] for r in rows[1:]} == {"s", "k"}
    assert "worst relative error" in capsys.readouterr().err


def test_compare_refuses_oversized_problem(tmp_path, capsys):
    code, data = _run(tmp_path, "compare", *SOURCE, "--s", "40", "--max-memory-mb", "0.01")
    assert code == 2
    assert data == b""
    assert "refusing" in capsys.readouterr().err


def test_compare_rejects_bad_spins(tmp_path):
    assert _run(tmp_path, "compare", *SOURCE, "--s", "0.3")[0] == 2


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "magrotor.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == __version__
