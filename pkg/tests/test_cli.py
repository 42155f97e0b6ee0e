"""Command-line behavior: outputs, precedence, exit codes."""

import json
import math

import numpy as np
import pytest

import skinmesh.cli as cli
from skinmesh.errors import SafetyViolationError
from skinmesh.meshing import read_off
from skinmesh.params import ParameterSet
from skinmesh.scheduling import interval_table


@pytest.fixture(scope="module")
def grow_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("grow")
    spheres = out / "ball.spheres"
    spheres.write_text("# one unit-ish ball\n0 0 0 2.0\n")
    code = cli.main(
        [
            "grow",
            str(spheres),
            "--t-start",
            "-0.1",
            "--t-end",
            "0",
            "--snapshot-every",
            "0.05",
            "--out-dir",
            str(out),
            "--seed",
            "3",
        ]
    )
    assert code == 0
    return out


class TestTables:
    def test_prints_and_writes_both_tables(self, tmp_path, capsys):
        assert cli.main(["tables", "--out-dir", str(tmp_path)]) == 0
        stdout = capsys.readouterr().out
        assert "edges" in stdout and "triangles" in stdout
        csv = (tmp_path / "tables.csv").read_text().splitlines()
        assert csv[0] == "kind,a,theta,interval"
        assert len(csv) == 1 + 14
        assert (tmp_path / "tables.png").stat().st_size > 0

    def test_csv_matches_library_values(self, tmp_path):
        assert cli.main(["tables", "--out-dir", str(tmp_path)]) == 0
        rows = [
            line.split(",")
            for line in (tmp_path / "tables.csv").read_text().splitlines()[1:]
        ]
        params = ParameterSet()
        expected = {
            ("edge", f"{a:.6g}"): (theta, dt) for a, theta, dt in interval_table("edge", params)
        }
        expected.update(
            {
                ("triangle", f"{a:.6g}"): (theta, dt)
                for a, theta, dt in interval_table("triangle", params)
            }
        )
        for kind, a, theta, dt in rows:
            want_theta, want_dt = expected[(kind, a)]
            assert float(theta) == pytest.approx(want_theta, abs=5e-7)
            assert float(dt) == pytest.approx(want_dt, abs=5e-7)

    def test_custom_headrooms(self, tmp_path):
        assert (
            cli.main(["tables", "--a-values", "1.0,2.5", "--out-dir", str(tmp_path)])
            == 0
        )
        csv = (tmp_path / "tables.csv").read_text().splitlines()
        assert len(csv) == 1 + 4

    def test_headroom_below_one_is_an_input_error(self, tmp_path, capsys):
        code = cli.main(["tables", "--a-values", "0.5", "--out-dir", str(tmp_path)])
        assert code == 1
        assert "input error" in capsys.readouterr().err


class TestFeasible:
    def test_writes_grid_and_summary_line(self, tmp_path, capsys):
        code = cli.main(["feasible", "--resolution", "8", "--out-dir", str(tmp_path)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "grid cells feasible" in stdout
        assert "configured constants feasible: True" in stdout
        csv = (tmp_path / "feasible.csv").read_text().splitlines()
        assert csv[0] == "c,q,feasible"
        assert len(csv) == 1 + 64
        assert (tmp_path / "feasible.png").stat().st_size > 0

    def test_empty_range_rejected(self, tmp_path):
        code = cli.main(
            ["feasible", "--c-min", "0.4", "--c-max", "0.2", "--out-dir", str(tmp_path)]
        )
        assert code == 1


class TestGrow:
    def test_snapshots_events_summary_figures(self, grow_dir):
        offs = sorted(grow_dir.glob("snapshot_*.off"))
        assert [p.name for p in offs] == [
            "snapshot_000.off",
            "snapshot_001.off",
            "snapshot_002.off",
        ]
        summary = json.loads((grow_dir / "summary.json").read_text())
        assert summary["euler_characteristic"] == 2
        assert summary["snapshot_files"] == [str(p) for p in offs]
        for line in (grow_dir / "events.jsonl").read_text().splitlines():
            row = json.loads(line)
            assert {"t", "kind", "vertices", "action", "ratio", "theta", "dt"} <= set(row)
        assert (grow_dir / "growth.png").stat().st_size > 0
        assert (grow_dir / "final_mesh.png").stat().st_size > 0

    def test_snapshot_meshes_follow_the_radius_law(self, grow_dir):
        for k, t in enumerate((-0.1, -0.05, 0.0)):
            coords, triangles = read_off(grow_dir / f"snapshot_{k:03d}.off")
            radii = np.linalg.norm(coords, axis=1)
            assert np.abs(radii - math.sqrt((2.0 + t) / 2.0)).max() < 1e-9
            assert len(triangles) > 0

    def test_empty_window_writes_single_snapshot(self, tmp_path):
        spheres = tmp_path / "b.spheres"
        spheres.write_text("0 0 0 2.0\n")
        code = cli.main(
            ["grow", str(spheres), "--t-start", "0", "--t-end", "0", "--out-dir", str(tmp_path)]
        )
        assert code == 0
        assert sorted(p.name for p in tmp_path.glob("snapshot_*.off")) == ["snapshot_000.off"]

    def test_window_into_the_future_rejected(self, tmp_path, capsys):
        spheres = tmp_path / "b.spheres"
        spheres.write_text("0 0 0 2.0\n")
        code = cli.main(
            ["grow", str(spheres), "--t-start", "-0.1", "--t-end", "0.1", "--out-dir", str(tmp_path)]
        )
        assert code == 1

    def test_malformed_sphere_file_is_input_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.spheres"
        bad.write_text("0 0 0\n")
        code = cli.main(["grow", str(bad), "--t-start", "-0.1", "--out-dir", str(tmp_path)])
        assert code == 1
        assert "input error" in capsys.readouterr().err

    def test_coincident_spheres_exit_numeric(self, tmp_path, capsys):
        bad = tmp_path / "dup.spheres"
        bad.write_text("0 0 0 2.0\n0 0 0 2.0\n")
        code = cli.main(["grow", str(bad), "--t-start", "-0.1", "--out-dir", str(tmp_path)])
        assert code == 2
        assert "numeric failure" in capsys.readouterr().err


class TestVerify:
    def test_speed_check_passes_and_writes_report(self, tmp_path, capsys):
        code = cli.main(
            ["verify", "speed", "--trials", "50", "--out-dir", str(tmp_path)]
        )
        assert code == 0
        assert "speed: pass (50 trials, seed 0)" in capsys.readouterr().out
        report = json.loads((tmp_path / "verify_speed.json").read_text())
        assert report["passed"] is True
        assert (tmp_path / "verify_speed.png").stat().st_size > 0

    def test_reports_are_byte_identical_for_a_seed(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            code = cli.main(
                [
                    "verify",
                    "length-lemma",
                    "--trials",
                    "30",
                    "--seed",
                    "5",
                    "--out-dir",
                    str(out),
                ]
            )
            assert code == 0
        assert (a / "verify_length-lemma.json").read_bytes() == (
            b / "verify_length-lemma.json"
        ).read_bytes()

    def test_zero_trials_rejected(self, tmp_path):
        assert cli.main(["verify", "speed", "--trials", "0", "--out-dir", str(tmp_path)]) == 1

    def test_unknown_mode_exits_with_input_code(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            cli.main(["verify", "nonsense", "--out-dir", str(tmp_path)])
        assert info.value.code == 1

    def test_failing_report_exits_three(self, tmp_path, capsys, monkeypatch):
        def broken(trials, seed):
            return {
                "mode": "speed",
                "passed": False,
                "trials": trials,
                "seed": seed,
                "violations": [{"deviation": 1.0}],
                "max_deviation": 1.0,
            }

        monkeypatch.setitem(cli.REPORTERS, "speed", broken)
        code = cli.main(["verify", "speed", "--trials", "5", "--out-dir", str(tmp_path)])
        assert code == 3
        captured = capsys.readouterr()
        assert "speed: FAIL" in captured.out
        assert "violations" in captured.err

    def test_safety_violation_exit_code(self, tmp_path, monkeypatch):
        def explode(trials, seed):
            raise SafetyViolationError("synthetic")

        monkeypatch.setitem(cli.REPORTERS, "speed", explode)
        assert cli.main(["verify", "speed", "--out-dir", str(tmp_path)]) == 3


class TestParameterPrecedence:
    def test_flag_beats_config_beats_default(self, tmp_path, capsys):
        config = tmp_path / "constants.cfg"
        config.write_text("epsilon = 0.25\nc = 0.05  # inline comment\n")
        args = ["feasible", "--resolution", "4", "--out-dir", str(tmp_path)]
        cli.main(args + ["--config", str(config)])
        assert "epsilon=0.25" in capsys.readouterr().out
        cli.main(args + ["--config", str(config), "--epsilon", "0.22"])
        assert "epsilon=0.22" in capsys.readouterr().out
        cli.main(args)
        assert "epsilon=0.279617" in capsys.readouterr().out

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("qq7 = 3\n")
        code = cli.main(
            ["tables", "--config", str(config), "--out-dir", str(tmp_path)]
        )
        assert code == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_malformed_config_line_rejected(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("just some words\n")
        assert cli.main(["tables", "--config", str(config), "--out-dir", str(tmp_path)]) == 1

    def test_missing_config_file_rejected(self, tmp_path):
        assert (
            cli.main(["tables", "--config", str(tmp_path / "nope.cfg"), "--out-dir", str(tmp_path)])
            == 1
        )
