import json
import math

import pytest

from stepiem.cli import main
from stepiem.config import ConfigError, RunConfig, parse_override

BASE = """\
potential1 = { kind = "lo", omega = 1.0 }
potential2 = { kind = "lo", omega = 1.0 }
q1_wall = -0.5
q2_wall = -0.5
h = 1.0
e1 = 0.5
theta2_0 = 0.3
n = 30
grid_size = 16
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(BASE)
    return p


def run(args):
    return main([str(a) for a in args])


class TestConfig:
    def test_round_trip(self):
        rc = RunConfig.from_toml(BASE)
        again = RunConfig.from_toml(rc.to_toml())
        assert again == rc

    def test_round_trip_preserves_floats(self):
        rc = RunConfig.from_toml(BASE + "eta = 1.2345678901234567e-3\n")
        assert RunConfig.from_toml(rc.to_toml()).eta == rc.eta

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_toml("bogus = 1\n")

    def test_parse_override(self):
        assert parse_override("h=2.5") == ("h", 2.5)
        assert parse_override('kind="degeneracy"') == ("kind", "degeneracy")

    def test_zero_wall_message(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text(BASE.replace("q1_wall = -0.5", "q1_wall = 0.0"))
        code = run(["classify", "--config", p, "--out", tmp_path / "o"])
        assert code == 2
        assert "q1_wall * q2_wall != 0" in capsys.readouterr().err


class TestCommands:
    def test_classify(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "o"
        assert run(["classify", "--config", cfg_file, "--out", out]) == 0
        lines = (out / "diagram.csv").read_text().splitlines()
        assert lines[0] == "h,seg_tag,e1_lo,e1_hi"
        assert len(lines) == 4  # R1, Rc, R2
        assert "Rc" in capsys.readouterr().out

    def test_simulate_section_csv(self, cfg_file, tmp_path):
        out = tmp_path / "o"
        assert run(["simulate", "--config", cfg_file, "--out", out]) == 0
        lines = (out / "section.csv").read_text().splitlines()
        assert lines[0] == "k,theta2,return_time,interval_tag"
        assert len(lines) == 31
        tags = {l.split(",")[-1] for l in lines[1:]}
        assert tags <= {"R", "U0", "U1"} and len(tags) > 1

    def test_simulate_no_impacts_full_period_returns(self, cfg_file, tmp_path):
        out = tmp_path / "o"
        assert run(["simulate", "--config", cfg_file, "--set", "e1=0.05",
                    "--set", "h=0.2", "--out", out]) == 0
        rows = (out / "section.csv").read_text().splitlines()[1:]
        for row in rows:
            assert abs(float(row.split(",")[2]) - 2 * math.pi) < 1e-9

    def test_simulate_corner_exit_code(self, cfg_file, tmp_path):
        # the phase aimed exactly at the corner is the JR left endpoint
        out = tmp_path / "o"
        code = run(["simulate", "--config", cfg_file, "--set", "theta2_0=0.0",
                    "--out", out])
        assert code == 3

    def test_iem_json(self, cfg_file, tmp_path):
        out = tmp_path / "o"
        assert run(["iem", "--config", cfg_file, "--out", out]) == 0
        data = json.loads((out / "iem.json").read_text())
        assert data["region"] == "StepFamily"
        pieces = data["circle"]["pieces"]
        assert len(pieces) == 3
        third = 2 * math.pi / 3
        for p in pieces:
            assert abs((p["hi"] - p["lo"]) - third) < 1e-12

    def test_sweep_and_find_special(self, cfg_file, tmp_path):
        out = tmp_path / "o"
        assert run(["sweep", "--config", cfg_file, "--out", out]) == 0
        header = (out / "sweep.csv").read_text().splitlines()[0]
        assert header.startswith(
            "e1,theta2_wall,Theta2,chi2,K2,lam_JR,lam_JK,lam_JK1,thetaL_JR,deg_flags")
        assert run(["find-special", "--config", cfg_file, "--out", out,
                    "--set", 'kind="theta2-rational"']) == 0
        assert (out / "special.csv").exists()
        assert (out / "special.json").exists()

    def test_tables(self, cfg_file, tmp_path):
        out = tmp_path / "o"
        assert run(["tables", "--config", cfg_file, "--out", out]) == 0
        assert (out / "tables.txt").exists()
        assert (out / "near_threshold.csv").exists()

    def test_tables_requires_lo(self, cfg_file, tmp_path):
        code = run(["tables", "--config", cfg_file, "--out", tmp_path / "o",
                    "--set", 'potential1={ kind = "quartic", a = 1.0 }'])
        assert code == 2


class TestReproducibility:
    def test_byte_identical_outputs(self, cfg_file, tmp_path):
        for cmd in (["sweep"], ["simulate"], ["classify"],
                    ["find-special", "--set", 'kind="chi2-integer"',
                     "--set", "q2_wall=0.6", "--set", "h=1.2"]):
            outs = []
            for d in ("a", "b"):
                out = tmp_path / cmd[0] / d
                assert run([*cmd, "--config", cfg_file, "--out", out,
                            "--seed", 7]) == 0
                outs.append(out)
            files_a = sorted(p.name for p in outs[0].iterdir())
            files_b = sorted(p.name for p in outs[1].iterdir())
            assert files_a == files_b
            for name in files_a:
                assert (outs[0] / name).read_bytes() == \
                    (outs[1] / name).read_bytes()


class TestClassifyVariants:
    def test_h_grid_and_empty_family_note(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "o"
        assert run(["classify", "--config", cfg_file, "--set", "h=0.2",
                    "--set", "e1=0.1", "--out", out]) == 0
        assert "step family empty" in capsys.readouterr().out
        assert run(["classify", "--config", cfg_file, "--set", "h_min=0.5",
                    "--set", "h_max=2.0", "--set", "h_count=7",
                    "--out", out]) == 0
        lines = (out / "diagram.csv").read_text().splitlines()[1:]
        hs = {l.split(",")[0] for l in lines}
        assert len(hs) == 7


class TestTrajectoryDump:
    def test_trajectory_csv(self, cfg_file, tmp_path):
        out = tmp_path / "o"
        assert run(["simulate", "--config", cfg_file,
                    "--set", "trajectory=true", "--set", "n=10",
                    "--out", out]) == 0
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,q1,q2,p1,p2,event_kind"
        kinds = {l.split(",")[-1] for l in lines[1:]}
        assert "Sigma1Crossing" in kinds and "Wall1Impact" in kinds
        # time column is non-decreasing
        ts = [float(l.split(",")[0]) for l in lines[1:]]
        assert all(b >= a for a, b in zip(ts, ts[1:]))
