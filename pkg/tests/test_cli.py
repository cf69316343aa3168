import subprocess
import sys
from pathlib import Path

import pytest

from casperffg.cli import main

SCENARIOS = Path(__file__).resolve().parents[1] / "demos" / "scenarios"


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


class TestAnalysisCommands:
    def test_phi_plain(self, capsys):
        assert main(["phi", "--alpha", "0.51", "--format", "plain"]) == 0
        assert capsys.readouterr().out == "2698\n"

    def test_phi_csv_header(self, capsys):
        assert main(["phi", "--alpha", "0.67,0.49"]) == 0
        out = capsys.readouterr().out
        assert "# tool: casperffg" in out
        assert "# params.gamma: 0.007" in out
        assert data_lines(out) == ["alpha,phi", "0.67,3733", "0.49,2546"]

    def test_phi_honest(self, capsys):
        assert main(["phi", "--alpha", "0.33", "--honest", "--format", "plain"]) == 0
        assert capsys.readouterr().out.strip() == "3733"

    def test_race(self, capsys):
        assert main(["race", "--n1", "3", "--n2", "3733", "--mu", "0.004", "--format", "plain"]) == 0
        assert float(capsys.readouterr().out) > 0.9999

    def test_wc(self, capsys):
        assert main(["wc", "--alpha", "0.5", "--format", "plain"]) == 0
        assert int(capsys.readouterr().out) >= 2623

    def test_tables(self, capsys):
        assert main(["tables", "--alpha", "0.2", "--mu", "1.0", "--rho", "1e-6"]) == 0
        rows = data_lines(capsys.readouterr().out)
        assert rows[0].startswith("scenario,alpha,mu,rho,loss_nu")
        assert len(rows) == 4

    def test_gas(self, capsys):
        assert main(["gas", "--format", "plain"]) == 0
        init, vote = map(float, capsys.readouterr().out.split())
        assert round(init, 3) == 0.007 and round(vote, 2) == 0.18

    def test_deterministic_bytes(self, capsys):
        main(["race", "--n1", "5", "--n2", "5", "--mu", "0.3,0.6"])
        first = capsys.readouterr().out
        main(["race", "--n1", "5", "--n2", "5", "--mu", "0.3,0.6"])
        assert capsys.readouterr().out == first


class TestSimulate:
    def test_offline67(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = main(["simulate", "--scenario", str(SCENARIOS / "offline67.toml"), "--seed", "1",
                     "--out", str(out)])
        assert code == 0
        assert "3733 epochs" in capsys.readouterr().err
        text = out.read_text()
        assert "# seed: 1" in text and "# tool: casperffg" in text
        rows = [r.split(",") for r in data_lines(text)]
        finalized = [int(r[1]) for r in rows[1:] if r[9] == "1" and int(r[1]) >= 2]
        assert finalized[0] - 2 == 3733

    def test_out_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CASPERFFG_OUT_DIR", str(tmp_path))
        assert main(["phi", "--alpha", "0.5", "--out", "sub/phi.csv"]) == 0
        assert (tmp_path / "sub" / "phi.csv").exists()

    def test_events_file(self, tmp_path):
        ev = tmp_path / "events.csv"
        assert main(["simulate", "--scenario", str(SCENARIOS / "equivocators.toml"),
                     "--out", str(tmp_path / "t.csv"), "--events", str(ev)]) == 0
        assert "slash" in ev.read_text()

    def test_sweep_offline(self, capsys):
        assert main(["sweep", "offline", "--alpha", "0.2,0.4", "--seeds", "0"]) == 0
        rows = data_lines(capsys.readouterr().out)
        assert rows[1].split(",")[5] == "0"
        assert rows[2].split(",")[5] == "1687"


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["phi", "--alpha", "0.5", "--bogus"]) == 1
        assert "unrecognized" in capsys.readouterr().err

    def test_missing_subcommand(self):
        assert main([]) == 1

    def test_bad_number(self):
        assert main(["race", "--n1", "x", "--n2", "3", "--mu", "0.5"]) == 1

    def test_missing_scenario(self, capsys):
        assert main(["simulate", "--scenario", "does/not/exist.toml"]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_bad_scenario(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[[validators]]\nid = 'a'\ndeposit = -4.0\n")
        assert main(["simulate", "--scenario", str(p)]) == 2

    def test_domain(self):
        assert main(["phi", "--alpha", "1.5"]) == 2

    def test_help(self, capsys):
        assert main(["--help"]) == 0

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "casperffg", "phi", "--alpha", "0.49",
                               "--format", "plain"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.strip() == "2546"
