import math

import numpy as np
import pytest

import fraclab


def test_version():
    assert fraclab.__version__


def test_torsion_on_the_interval():
    grid, u, report = fraclab.torsion_on(fraclab.Domain.interval(-1.0, 1.0), 2.0, 0.5, 64)
    assert report["converged"]
    x = grid.nodes[:, 0]
    assert u.shape == (64,)
    assert np.allclose(u, u[::-1], atol=1e-12)
    mid = len(x) // 2
    assert abs(u[mid] - math.sqrt(1 - x[mid] ** 2) / (2 * math.pi)) < 2e-3
    assert grid.volumes.sum() == pytest.approx(2.0)


def test_residual_vanishes_at_the_solution():
    grid = fraclab.build_grid(fraclab.Domain.disc(1.0), 16)
    w = fraclab.assemble_weights(grid, fraclab.Params(3.0, 0.4))
    f = np.ones(len(grid))
    u, report = fraclab.solve(w, f, tol=1e-10)
    assert report["converged"]
    assert np.max(np.abs(fraclab.residual(u, w, f))) <= 1e-9
    assert fraclab.discrete_energy(u, w, f) < 0.0


def test_pointwise_ball_profile():
    r = fraclab.eval_pointwise("ball", [0.3], fraclab.Params(2.0, 0.5))
    assert r["value"] == pytest.approx(2 * math.pi, rel=1e-6)
    assert r["series_converged"]


def test_exceptions_map_to_python_classes():
    with pytest.raises(fraclab.ConfigError):
        fraclab.Params(0.5, 0.5)
    with pytest.raises(fraclab.SingularCaseError):
        fraclab.eval_pointwise("bump", [0.1], fraclab.Params(1.5, 0.9))
    grid = fraclab.build_grid(fraclab.Domain.interval(0.0, 1.0), 8)
    w = fraclab.assemble_weights(grid, fraclab.Params(2.0, 0.5))
    with pytest.raises(fraclab.GeometryError):
        fraclab.apply_operator(np.ones(3), w)
    assert issubclass(fraclab.PreconditionError, fraclab.FraclabError)


def test_run_config(tmp_path):
    rc = fraclab.run_config("p = 2\ns = 0.5\nn = 32\n", "solve", tmp_path / "out")
    assert rc == 0
    assert (tmp_path / "out" / "solution.csv").exists()
    assert "A2" in fraclab.criterion_ids()
