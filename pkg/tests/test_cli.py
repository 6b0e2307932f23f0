import json
import math
import subprocess
import sys

import pytest

from maxlab import cli


def test_parse_t_grid():
    g = cli.parse_t_grid("e2:e4:3")
    assert g == pytest.approx([math.exp(2), math.exp(3), math.exp(4)], rel=1e-12)
    assert cli.parse_t_grid("4, 6,8") == [4.0, 6.0, 8.0]
    for bad in ("1:2", "2:1:3", "a:b:c", "x,y"):
        with pytest.raises(cli.UsageError):
            cli.parse_t_grid(bad)


def test_config_file_parsing(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# comment\n\na = 1\nb=1.4\nt-grid = 4,6,8,10\nseed=3\n")
    assert cli.read_config_file(str(p)) == {"a": 1.0, "b": 1.4, "t_grid": [4.0, 6.0, 8.0, 10.0], "seed": 3}
    p.write_text("bogus=1\n")
    with pytest.raises(cli.UsageError):
        cli.read_config_file(str(p))
    p.write_text("a 1\n")
    with pytest.raises(cli.UsageError):
        cli.read_config_file(str(p))


def test_precedence_defaults_config_flags(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("b=1.4\nseed=5\n")
    inv = cli.parse_invocation(["stromberg-i", "--config", str(p), "--seed", "9"])
    assert inv.config.b == 1.4 and inv.config.seed == 9 and inv.config.a == 1.0


@pytest.mark.parametrize("argv", [[], ["stromberg-i", "--b", "2.5"], ["pinching", "--bogus", "1"],
                                  ["stromberg-ii", "--t-grid", "1,2,3"], ["nope"]])
def test_usage_errors_exit_2(argv, capsys):
    assert cli.main(argv) == cli.EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_missing_config_file_is_usage_error():
    assert cli.main(["pinching", "--config", "/nonexistent/cfg.txt"]) == cli.EXIT_USAGE


def test_bad_thread_cap(monkeypatch):
    monkeypatch.setenv("MAXLAB_THREADS", "many")
    assert cli.main(["pinching"]) == cli.EXIT_USAGE


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["pinching", "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_scenario_run_and_manifest_replay(tmp_path, capsys):
    out1, out2 = tmp_path / "one", tmp_path / "two"
    assert cli.main(["pinching", "--out", str(out1)]) == cli.EXIT_PASS
    assert "pinching: PASS" in capsys.readouterr().out
    manifest = (out1 / "manifest.txt").read_text()
    assert manifest.startswith("# maxlab pinching\n")
    assert cli.main(["pinching", "--config", str(out1 / "manifest.txt"), "--out", str(out2)]) == cli.EXIT_PASS
    for name in ("manifest.txt", "series.csv", "report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_failing_scenario_exits_1(tmp_path, capsys):
    # scalar pinching needs m >= 3 and a positive radial value; forcing the perturbation to
    # vanish leaves only the hyperbolic model, which has no positive curvature
    cfg = tmp_path / "c.txt"
    cfg.write_text("delta=0\n")
    assert cli.main(["pinching", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_FAIL
    assert "FAILED" in capsys.readouterr().out


def test_distance_and_volume_utilities(tmp_path, capsys):
    assert cli.main(["distance", "--from", "0,1", "--to", "1,2", "--out", str(tmp_path)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["distance"] == pytest.approx(math.acosh(1 + 2 / 4), rel=1e-3)
    assert cli.main(["volume", "--center", "0,1", "--radius", "2", "--out", str(tmp_path)]) == 0
    v = json.loads(capsys.readouterr().out)
    assert v["volume"] == pytest.approx(2 * math.pi * (math.cosh(2) - 1), rel=1e-2)
    assert cli.main(["volume", "--center", "0,1", "--radius", "-1", "--out", str(tmp_path)]) == cli.EXIT_USAGE
    bad = tmp_path / "bad"
    assert cli.main(["distance", "--from", "0", "--to", "1,2", "--out", str(bad)]) == cli.EXIT_USAGE
    assert cli.main(["distance", "--a", "0", "--from", "0,1", "--to", "1,2", "--out", str(bad)]) == cli.EXIT_USAGE
    assert cli.main(["volume", "--center", "0,-1", "--radius", "1", "--out", str(bad)]) == cli.EXIT_USAGE
    # rejected before anything is written
    assert not bad.exists()


def test_finite_space_utilities(tmp_path, capsys):
    edges, weights, field = tmp_path / "e.csv", tmp_path / "w.csv", tmp_path / "f.csv"
    edges.write_text("0,1,1\n1,2,1\n")
    weights.write_text("0,1\n1,1\n2,1\n")
    field.write_text("point_id,value,weight\n0,1,1\n1,0,1\n2,0,1\n")
    out = tmp_path / "o"
    base = ["--edges", str(edges), "--weights", str(weights), "--out", str(out)]
    assert cli.main(["maximal", *base, "--field", str(field), "--mode", "uncentred"]) == 0
    rows = (out / "maximal.csv").read_text().splitlines()
    assert rows[0] == "point_id,value,argmax_radius"
    assert [float(r.split(",")[1]) for r in rows[1:]] == [1.0, 0.5, 1 / 3]
    assert cli.main(["discretise", *base, "--eta", "1.5"]) == 0
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["net_size"] == 2
    assert cli.main(["maximal", "--edges", str(tmp_path / "missing.csv"), "--weights", str(weights),
                     "--field", str(field), "--out", str(out)]) == cli.EXIT_IO


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "maxlab.cli", "pinching", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
