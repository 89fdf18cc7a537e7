import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from swr.errors import OptimizerError
from swr.optimize import OptProblem, initial_simplex, minimize


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


class TestMinimize(object):
    def test_interior_minimum(self):
        result = minimize(OptProblem(dim=1, objective=lambda x: (x[0] - 3.0) ** 2), [0.0])
        assert_allclose(result.x, [3.0], atol=1e-4)
        assert result.converged

    def test_active_bound(self):
        problem = OptProblem(dim=1, objective=lambda x: x[0] ** 2, lower_bounds=[1.0])
        result = minimize(problem, [5.0])
        assert_allclose(result.x, [1.0], atol=1e-6)

    def test_beats_grid_search(self):
        problem = OptProblem(dim=6, objective=rosenbrock)
        result = minimize(problem, np.zeros(6))
        grid = np.linspace(0.0, 2.0, 4)
        grid_best = min(rosenbrock(np.array(point)) for point in itertools.product(grid, repeat=6))
        assert result.fun < grid_best
        assert result.n_evals <= problem.max_evals

    def test_feasible_and_descending(self):
        problem = OptProblem(dim=2, objective=lambda x: (x[0] + 2.0) ** 2 + (x[1] - 1.0) ** 2)
        x0 = np.array([4.0, 4.0])
        result = minimize(problem, x0)
        assert np.all(result.x >= 0)
        assert result.fun <= problem.objective(x0)
        assert_allclose(result.x, [0.0, 1.0], atol=1e-4)

    def test_start_outside_bounds_is_clipped(self):
        problem = OptProblem(dim=1, objective=lambda x: (x[0] - 2.0) ** 2)
        result = minimize(problem, [-5.0])
        assert result.trace[0] == (1, 4.0)

    def test_best_record_is_monotone(self):
        result = minimize(OptProblem(dim=3, objective=rosenbrock), [0.5, 0.5, 0.5])
        values = [value for _, value in result.trace]
        assert values == sorted(values, reverse=True)
        assert result.fun == values[-1]

    def test_deterministic(self):
        a = minimize(OptProblem(dim=4, objective=rosenbrock), np.full(4, 0.2))
        b = minimize(OptProblem(dim=4, objective=rosenbrock), np.full(4, 0.2))
        assert_array_equal(a.x, b.x)
        assert a.fun == b.fun
        assert a.n_evals == b.n_evals

    def test_budget(self):
        problem = OptProblem(dim=3, objective=rosenbrock, max_evals=50)
        result = minimize(problem, [0.0, 0.0, 0.0])
        assert result.n_evals <= 50
        assert not result.converged

    def test_failing_objective_counts_as_infinite(self):
        def objective(x):
            if x[0] > 2.0:
                raise ArithmeticError("outside the domain")
            return (x[0] - 3.0) ** 2

        result = minimize(OptProblem(dim=1, objective=objective), [0.0])
        assert result.x[0] <= 2.0
        assert_allclose(result.x, [2.0], atol=1e-4)


class TestProblemValidation(object):
    def test_non_finite_start(self):
        with pytest.raises(OptimizerError):
            minimize(OptProblem(dim=1, objective=lambda x: np.inf), [1.0])

    def test_wrong_start_length(self):
        with pytest.raises(OptimizerError):
            minimize(OptProblem(dim=2, objective=rosenbrock), [1.0])

    def test_zero_dimension(self):
        with pytest.raises(ValueError):
            OptProblem(dim=0, objective=rosenbrock)

    def test_inverted_bounds(self):
        with pytest.raises(ValueError):
            OptProblem(dim=1, objective=rosenbrock, lower_bounds=[2.0], upper_bounds=[1.0])

    def test_default_budget(self):
        assert OptProblem(dim=4, objective=rosenbrock).max_evals == 20000


class TestInitialSimplex(object):
    def test_steps_stay_feasible(self):
        x = np.array([0.0, 10.0])
        simplex = initial_simplex(x, np.zeros(2), np.array([np.inf, 10.2]))
        assert simplex.shape == (3, 2)
        assert_array_equal(simplex[0], x)
        assert simplex[1, 0] == 0.5
        assert simplex[2, 1] == 7.5
