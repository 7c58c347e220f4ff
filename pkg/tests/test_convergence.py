import numpy as np
import pytest

from chidenn import convergence
from chidenn.convergence import PROBLEMS, convergence_study, fit_rate
from chidenn.dynamics import NoConvergence
from chidenn.material import pk1_stress


def pk1_at(problem, X):
    dim = problem.dim
    F = np.eye(dim) + problem.grad(X[None])[0]
    return pk1_stress(problem.material, F)


@pytest.mark.parametrize("name", ["bar1d", "plate2d"])
def test_body_force_is_divergence_of_stress(name):
    # rho0 b = -Div P(F(u)), checked with central differences of P
    problem = PROBLEMS[name]()
    dim, h = problem.dim, 1e-5
    for X in np.random.default_rng(0).uniform(0.1, 0.9, (5, dim)):
        div = np.zeros(dim)
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            div += (pk1_at(problem, X + e) - pk1_at(problem, X - e))[:, j] / (2 * h)
        b = problem.body_force(X[None])[0]
        np.testing.assert_allclose(problem.material.rho0 * b, -div, atol=1e-6 * max(1.0, np.abs(div).max()))


def test_fit_rate_exact_power():
    h = np.array([0.5, 0.25, 0.125])
    assert fit_rate(h, 3.0 * h**2.5) == pytest.approx(2.5)


def test_bar1d_rates():
    res = convergence_study("bar1d", [4, 8, 16], ["fem", "chidenn"])
    assert res.rate("fem") == pytest.approx(2.0, abs=0.4)
    assert res.rate("chidenn") == pytest.approx(3.0, abs=0.4)
    fem, ch = dict(res.errors("fem")), dict(res.errors("chidenn"))
    assert all(ch[h] < fem[h] for h in fem)


def test_single_level_rate_undefined():
    res = convergence_study("bar1d", [4], ["fem"])
    assert res.rate("fem") is None
    assert "undefined" in res.table()


def test_failed_level_is_reported_and_study_continues(monkeypatch):
    real = convergence.solve_manufactured

    def flaky(problem, n, config, increments=2):
        if n == 8:
            raise NoConvergence("stalled")
        return real(problem, n, config, increments)

    monkeypatch.setattr(convergence, "solve_manufactured", flaky)
    res = convergence_study("bar1d", [4, 8, 16], ["fem"])
    assert [r.error is None for r in res.rows] == [False, True, False]
    assert "stalled" in res.table()
    assert res.rate("fem") == pytest.approx(2.0, abs=0.4)


@pytest.mark.parametrize("refs", [[8, 4], [4, 4], [], [0, 4]])
def test_refinements_validated(refs):
    with pytest.raises(ValueError):
        convergence_study("bar1d", refs)


def test_unknown_problem_and_mode():
    with pytest.raises(ValueError):
        convergence_study("cube3d", [2])
    with pytest.raises(ValueError):
        convergence_study("bar1d", [2], ["spectral"])
