from pathlib import Path

import pytest

from pointocp.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main
from pointocp.config import CheckConfig, load_config, parse_config
from pointocp.errors import ConfigError
from pointocp.optimizer import SolverOptions

DATA = Path(__file__).parent / "data"
SHIPPED = Path(__file__).parents[1] / "configs" / "four_point_cubic.toml"


def test_shipped_config():
    cfg = load_config(SHIPPED)
    p = cfg.problem
    assert (p.alpha, p.lower, p.upper, p.nl.id) == (0.1, -10.0, 10.0, "cubic(1)")
    assert len(p.obs) == 4
    assert p.obs.points.tolist() == [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]]
    assert p.obs.targets.tolist() == [3.0, -3.0, 3.0, -3.0]
    assert cfg.mesh.levels == (4, 8, 16, 32, 64) and cfg.mesh.reference_level == 256


def test_minimal_config_defaults():
    cfg = load_config(DATA / "minimal.toml")
    assert cfg.solver == SolverOptions()
    s = cfg.solver
    assert (s.newton_tol, s.outer_tol, s.damping, s.degree, s.error_degree) == (1e-11, 1e-10, 1.0, 4, 7)
    assert cfg.problem.nl.id == "cubic(1)"
    assert cfg.problem.extents == (0.0, 1.0, 0.0, 1.0)
    assert cfg.check == CheckConfig()
    assert cfg.initial_control is None and cfg.multistart == ()


def test_full_config_golden():
    cfg = load_config(DATA / "full.toml")
    assert cfg.problem.nl.id == "expy(2)"
    assert cfg.problem.extents == (0.0, 2.0, -1.0, 1.0)
    assert cfg.solver == SolverOptions(newton_tol=1e-12, max_newton=30, outer_tol=1e-11, max_outer=50,
                                       damping=0.5, vi_tol=1e-10, degree=7, error_degree=10)
    assert cfg.initial_control == "upper" and cfg.multistart == ("lower", 0.5)
    assert cfg.check == CheckConfig(2e-5, 5e-4)
    assert (cfg.output.csv, cfg.output.svg, cfg.output.verbosity) == ("out.csv", "out.svg", 1)
    assert cfg.mesh.n == 8


def problems_of(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return exc.value.problems


def test_missing_alpha():
    probs = problems_of((DATA / "minimal.toml").read_text().replace("alpha = 0.5\n", ""))
    assert any("alpha" in p for p in probs)


def test_lower_not_below_upper():
    probs = problems_of((DATA / "minimal.toml").read_text().replace("lower = -1.0", "lower = 2.0"))
    assert any("a < b" in p for p in probs)


def test_every_problem_listed():
    probs = problems_of((DATA / "bad_many.toml").read_text())
    text = "\n".join(probs)
    for needle in ("alpha", "lower must be < problem.upper", "problem.colour", "[extras]", "damping",
                   "2 entries but problem.targets has 1", "not strictly inside"):
        assert needle in text, needle


def test_unknown_key_rejected():
    probs = problems_of((DATA / "minimal.toml").read_text() + "\n[solver]\ntolerance = 1\n")
    assert probs == ["unknown key solver.tolerance"]


def test_parse_error_has_location():
    with pytest.raises(ConfigError, match="line"):
        load_config(DATA / "malformed.toml")


@pytest.mark.parametrize("edit, needle", [
    ("alpha = 0.5", "alpha = 0.0"),
    ('targets = [0.25]', 'targets = [0.25]\nnonlinearity = "cubic(-1)"'),
])
def test_invalid_values(edit, needle):
    text = (DATA / "minimal.toml").read_text().replace(edit, needle)
    assert problems_of(text)


def test_levels_must_nest():
    text = (DATA / "minimal.toml").read_text() + "\n[mesh]\nlevels = [4, 12]\nreference_level = 64\n"
    assert any("power-of-two" in p for p in problems_of(text))


# --- cli ------------------------------------------------------------------------

def test_cli_solve_ok(capsys):
    assert main(["solve", "--config", str(SHIPPED), "--n", "16"]) == EXIT_OK
    out = capsys.readouterr().out
    vi = float(next(line for line in out.splitlines() if line.startswith("vi_residual")).split()[1])
    assert vi <= 1e-9
    assert "active_sets" in out and "outer_iterations" in out


def test_cli_solve_verbose_prints_active_sets(capsys):
    assert main(["solve", "--config", str(SHIPPED), "--n", "4", "-v"]) == EXIT_OK
    assert "iter  lower  upper  inactive" in capsys.readouterr().out


def test_cli_forced_nonconvergence(capsys):
    assert main(["solve", "--config", str(SHIPPED), "--n", "16", "--max-outer", "1"]) == EXIT_SOLVER
    err = capsys.readouterr().err
    assert "no convergence" in err and "outer_iterations 1" in err


def test_cli_malformed_config(capsys):
    assert main(["solve", "--config", str(DATA / "malformed.toml"), "--n", "4"]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_cli_missing_config(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.toml"), "--n", "4"]) == EXIT_INPUT


def test_cli_alpha_zero_rejected(tmp_path, capsys):
    cfg = tmp_path / "a.toml"
    cfg.write_text(SHIPPED.read_text().replace("alpha = 0.1", "alpha = 0"))
    assert main(["check", "--config", str(cfg), "--n", "4"]) == EXIT_INPUT
    assert "alpha" in capsys.readouterr().err


def test_cli_check_four_point(capsys):
    assert main(["check", "--config", str(SHIPPED), "--n", "16", "--seed", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 6 and "[FAIL]" not in out


def test_cli_check_seed_deterministic(capsys):
    main(["check", "--config", str(SHIPPED), "--n", "8", "--seed", "11"])
    first = capsys.readouterr().out
    main(["check", "--config", str(SHIPPED), "--n", "8", "--seed", "11"])
    assert capsys.readouterr().out == first


def test_cli_check_trivial(capsys):
    assert main(["check", "--config", str(DATA / "trivial_zero.toml")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[FAIL]" not in out
    vi_line = next(line for line in out.splitlines() if "VI residual" in line)
    assert float(vi_line.split()[3]) == 0.0


def study_config(tmp_path, levels, ref):
    cfg = tmp_path / "study.toml"
    text = SHIPPED.read_text().replace("levels = [4, 8, 16, 32, 64]", f"levels = {levels}")
    text = text.replace("reference_level = 256", f"reference_level = {ref}")
    text = text.replace('"four_point_study.csv"', f'"{tmp_path / "s.csv"}"')
    text = text.replace('"four_point_study.svg"', f'"{tmp_path / "s.svg"}"')
    cfg.write_text(text)
    return cfg


def test_cli_study_small(tmp_path, capsys):
    assert main(["study", "--config", str(study_config(tmp_path, [2, 4, 8], 16))]) == EXIT_OK
    out = capsys.readouterr().out
    assert "mean EOC" in out
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 4
    assert (tmp_path / "s.svg").exists()


def test_cli_study_single_level(tmp_path, capsys):
    assert main(["study", "--config", str(study_config(tmp_path, [4], 8))]) == EXIT_OK
    cap = capsys.readouterr()
    assert "mean EOC" not in cap.out
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].split(",")[4] == ""
    assert "no plot" in cap.err


def test_cli_study_unwritable(tmp_path, capsys):
    target = tmp_path / "nodir" / "x.csv"
    assert main(["study", "--config", str(study_config(tmp_path, [2, 4], 8)), "--csv", str(target)]) == EXIT_INPUT
    assert str(target) in capsys.readouterr().err
