import pytest

from wgqed import cli, scenario

DOC = """\
species[0].delta_over_2J = 0.0
species[0].V_over_2J = 0.1
species[0].M = 3
species[0].m = 1
waveguide.N = 201
grid.t_max_2J = 40
grid.samples = 41
"""


@pytest.fixture
def doc(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text(DOC)
    return path


def test_run(doc, tmp_path, capsys):
    assert cli.main(["run", str(doc), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "numeric.csv").exists()
    assert "metadata" in capsys.readouterr().out


def test_run_single_solver(doc, tmp_path):
    assert cli.main(["run", str(doc), "--out", str(tmp_path / "o"), "--solver", "analytic"]) == 0
    assert not (tmp_path / "o" / "numeric.csv").exists()


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text(DOC + "colour = red\n")
    assert cli.main(["run", str(bad)]) == cli.EXIT_PARSE
    assert "colour" in capsys.readouterr().err


def test_missing_file_is_parse_error(tmp_path):
    assert cli.main(["compare", str(tmp_path / "nope.txt")]) == cli.EXIT_PARSE


def test_solver_error_exit_code(tmp_path, capsys):
    far = tmp_path / "far.txt"
    far.write_text(DOC.replace("grid.t_max_2J = 40", "grid.t_max_2J = 400"))
    assert cli.main(["compare", str(far)]) == cli.EXIT_SOLVER
    assert "horizon" in capsys.readouterr().err


def test_compare_assert_law(doc, tmp_path, capsys):
    assert cli.main(["compare", str(doc), "--assert-law"]) in (cli.EXIT_OK, cli.EXIT_LAW)
    broken = tmp_path / "broken.txt"
    cfg = scenario.figure_preset("fig3b")[4]
    broken.write_text(scenario.render_scenario(cfg))
    assert cli.main(["compare", str(broken)]) == cli.EXIT_OK
    assert cli.main(["compare", str(broken), "--assert-law"]) == cli.EXIT_LAW
    assert '"law_status": "broken"' in capsys.readouterr().out


def test_sweep_cli(doc, tmp_path, capsys):
    code = cli.main(["sweep", str(doc), "--axis", "species[0].M=2,3", "--axis",
                     "species[0].m=1,5", "--out", str(tmp_path / "sw")])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("point ") == 4 and "error" in out
    assert len((tmp_path / "sw" / "summary.csv").read_text().splitlines()) == 5


def test_sweep_bad_axis(doc):
    assert cli.main(["sweep", str(doc), "--axis", "species[0].M"]) == cli.EXIT_PARSE


def test_figure(tmp_path, capsys, monkeypatch):
    # shrink the preset so the test stays quick
    small = [scenario.parse_scenario(DOC)]
    monkeypatch.setattr(scenario, "figure_preset", lambda name: small)
    assert cli.main(["figure", "fig2a", "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "scenario" / "numeric.csv").exists()
    assert (tmp_path / "f" / "summary.csv").read_text().startswith("point,")


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "schema 1" in capsys.readouterr().out
