import subprocess
import sys

import pytest

from survscreen.cli import ConfigError, main, parse_config_text


def test_parse_config_text():
    cfg = parse_config_text(
        "# grid\nsizes = 500, 1000\ncensoring=0.1\nrho: 0,0.8\nreplicates = 20\n"
        "seed = 7\nmodels = gaussian,logistic\nwith_ph_test = yes\nformat = markdown\nworkers = 2\n"
    )
    assert cfg == {
        "sample_sizes": (500, 1000), "censoring_rates": (0.1,), "correlations": (0.0, 0.8),
        "replicates": 20, "master_seed": 7, "models": ("gaussian", "logistic"),
        "with_ph_test": True, "format": "markdown", "workers": 2,
    }


@pytest.mark.parametrize("text", ["bogus = 1", "sizes = a,b", "replicates", "with-ph-test = maybe"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_run_with_config_and_override(tmp_path, capsys):
    conf = tmp_path / "grid.conf"
    out = tmp_path / "r.csv"
    conf.write_text(f"sizes = 100\ncensoring = 0.1,0.5\nrho = 0\nreplicates = 3\nseed = 1\noutput = {out}\n")
    assert main(["run", "--config", str(conf), "--models", "gaussian", "--quiet"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and all(",gaussian," in l for l in lines[1:])
    assert capsys.readouterr().out == ""


def test_run_writes_report_to_stdout_and_progress_to_stderr(capsys):
    assert main(["run", "--sizes", "100", "--censoring", "0.1", "--rho", "0", "--replicates", "2",
                 "--models", "gaussian,logistic"]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("sample_size,censoring_rate,correlation,model,")
    assert "scenario 0" in captured.err


def test_config_and_io_errors_have_nonzero_exit(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.conf")]) != 0
    bad = tmp_path / "bad.conf"
    bad.write_text("sizes = 100\nnope = 1\n")
    assert main(["run", "--config", str(bad)]) != 0
    assert main(["run", "--replicates", "0"]) != 0
    assert main(["run", "--output", str(tmp_path / "no" / "dir.csv")]) != 0
    with pytest.raises(SystemExit) as info:
        main(["run", "--format", "xlsx"])
    assert info.value.code != 0


def test_simulate_then_pipeline(tmp_path, capsys):
    path = tmp_path / "ds.csv"
    assert main(["simulate", "--n", "300", "--censoring", "0.1", "--rho", "0", "--seed", "3",
                 "--output", str(path)]) == 0
    assert path.exists() and (tmp_path / "ds.meta.json").exists()
    capsys.readouterr()
    assert main(["pipeline", str(path), "--correlated"]) == 0
    out = capsys.readouterr().out
    assert "gaussian ranking:" in out and "primary: cox_refit" in out


def test_pipeline_bad_csv_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("time,event,x\n1,1,0\n2,2,0\n")
    assert main(["pipeline", str(p)]) != 0
    assert "row 2" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "survscreen.cli", "run", "--sizes", "100",
                           "--censoring", "0.1", "--rho", "0", "--replicates", "2", "--models",
                           "gaussian", "--quiet"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.count("\n") == 2
