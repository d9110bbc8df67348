import numpy as np
import pytest

from fracddp.config import load_config, parse_config, replace_solver
from fracddp.exceptions import ConfigError
from fracddp.models import ModelKind


def test_defaults():
    cfg = load_config()
    assert cfg.model.kind is ModelKind.DRIFT_DIFFUSION_POISSON
    assert cfg.model.theta == 0.8 and cfg.model.d == 2
    assert cfg.grid.N == 256 and cfg.grid.L == 40.0
    assert cfg.solver.dt == 0.05 and cfg.solver.t_end == 20.0
    assert cfg.checks.ratio_max == 5.0
    assert len(cfg.kernel.s_values) == 19


def test_values_and_comments():
    cfg = parse_config("""
[model]
theta = 1.5   # order
d = 1
[grid]
N = 32
L = 10
[diagnostics]
fit_window = 2 8
p_list = 1 3 inf
""")
    assert cfg.model.theta == 1.5 and cfg.grid.d == 1
    assert cfg.diagnostics.fit_window == (2.0, 8.0)
    assert cfg.diagnostics.p_list == (1.0, 3.0, np.inf)


@pytest.mark.parametrize("text, key", [
    ("[model]\nthetta = 1\n", "model.thetta"),
    ("[grids]\nN = 4\n", "grids"),
    ("[solver]\ndt = -1\n", "solver"),
    ("[model]\ntheta = 2.5\n", "model"),
    ("[sweep]\nmodel.nope = 1 2\n", "sweep.model.nope"),
    ("[diagnostics]\nentropy_p = 2\n", "diagnostics.entropy_p"),
    ("[kernel]\ns_values = 5 50\n", "kernel.s_values"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_drift_matrix_relative_path(tmp_path):
    (tmp_path / "D.txt").write_text("2 1\n-1 2\n")
    (tmp_path / "run.ini").write_text("[model]\nkind = general\ndrift_matrix = D.txt\n")
    cfg = load_config(tmp_path / "run.ini")
    assert np.array_equal(cfg.model.drift_matrix, [[2, 1], [-1, 2]])


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


def test_sweep_expansion():
    cfg = parse_config("[sweep]\nmodel.theta = 0.8 1.5\nsolver.dt = 0.1 0.05\n")
    runs = cfg.expand()
    assert len(runs) == 4
    assert [(c.model.theta, c.solver.dt) for _, c in runs] == [(0.8, 0.1), (0.8, 0.05), (1.5, 0.1), (1.5, 0.05)]
    assert runs[0][0] == {"model.theta": "0.8", "solver.dt": "0.1"}


def test_with_seed_and_replace():
    cfg = load_config().with_seed(7)
    assert cfg.seed == 7
    assert replace_solver(cfg, dt=0.01).solver.dt == 0.01
