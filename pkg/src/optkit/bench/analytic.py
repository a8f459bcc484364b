"""Analytic test problems: quartic, Rosenbrock variants, bean, constrained quadratic."""

import numpy as np

from ..problem import build_problem


def quartic():
    """f = x1^4 + x2^4 from (1, 1): near-zero curvature at the minimum (0, 0)."""
    return build_problem(
        "quartic", [1.0, 1.0],
        obj=lambda x: float(x[0] ** 4 + x[1] ** 4),
        grad=lambda x: 4.0 * x ** 3,
        obj_hess=lambda x: np.diag(12.0 * x ** 2),
    )


def _rosen2_obj(x):
    return float((1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2)


def _rosen2_grad(x):
    return np.array([
        -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
        200.0 * (x[1] - x[0] ** 2),
    ])


def _rosen2_hess(x):
    return np.array([
        [2.0 - 400.0 * (x[1] - x[0] ** 2) + 800.0 * x[0] ** 2, -400.0 * x[0]],
        [-400.0 * x[0], 200.0],
    ])


def rosenbrock2():
    """Two-dimensional Rosenbrock valley from (-1.2, 1)."""
    return build_problem("rosenbrock2", [-1.2, 1.0],
                         obj=_rosen2_obj, grad=_rosen2_grad, obj_hess=_rosen2_hess)


def bean():
    """Milder Rosenbrock-like valley; minimum f = 0.09194 at (1.21314, 0.82414)."""

    def obj(x):
        return float((1.0 - x[0]) ** 2 + (1.0 - x[1]) ** 2
                     + 0.5 * (2.0 * x[1] - x[0] ** 2) ** 2)

    def grad(x):
        t = 2.0 * x[1] - x[0] ** 2
        return np.array([-2.0 * (1.0 - x[0]) - 2.0 * x[0] * t,
                         -2.0 * (1.0 - x[1]) + 2.0 * t])

    def hess(x):
        t = 2.0 * x[1] - x[0] ** 2
        return np.array([[2.0 - 2.0 * t + 4.0 * x[0] ** 2, -4.0 * x[0]],
                         [-4.0 * x[0], 6.0]])

    return build_problem("bean", [0.0, 0.0], obj=obj, grad=grad, obj_hess=hess)


def quadratic_example():
    """min x1^2 + x2^2 with x1 >= 0, x1 + x2 = 1, x1 - x2 >= 1, from (500, 5)."""
    return build_problem(
        "quadratic_example", [500.0, 5.0],
        obj=lambda x: float(x[0] ** 2 + x[1] ** 2),
        grad=lambda x: 2.0 * x,
        con=lambda x: np.array([x[0] + x[1], x[0] - x[1]]),
        jac=lambda x: np.array([[1.0, 1.0], [1.0, -1.0]]),
        xl=[0.0, -np.inf],
        cl=[1.0, 1.0], cu=[1.0, np.inf],
        obj_hess=lambda x: 2.0 * np.eye(2),
        lag_hess=lambda x, lam: 2.0 * np.eye(2),
    )


def _alternating_guess(n):
    x0 = np.empty(n)
    x0[0::2] = -1.2
    x0[1::2] = 1.0
    return x0


def rosen_uncoupled(n=8):
    """Separable sum of n/2 independent two-dimensional Rosenbrock terms.

    Each odd/even pair (a, b) = (x_{2i-1}, x_{2i}) contributes
    100*(a - b^2)^2 + (1 - a)^2; n must be even.
    """
    n = int(n)
    if n < 2 or n % 2:
        raise ValueError(f"rosen_uncoupled needs an even n >= 2, got {n}")

    def obj(x):
        a, b = x[0::2], x[1::2]
        return float(np.sum(100.0 * (a - b ** 2) ** 2 + (1.0 - a) ** 2))

    def grad(x):
        a, b = x[0::2], x[1::2]
        g = np.empty_like(x)
        g[0::2] = 200.0 * (a - b ** 2) - 2.0 * (1.0 - a)
        g[1::2] = -400.0 * b * (a - b ** 2)
        return g

    return build_problem(f"rosen_uncoupled_{n}", _alternating_guess(n), obj=obj, grad=grad)


def rosen_coupled(n=8):
    """Chained Rosenbrock over adjacent pairs; local minimum at (-1, 1, ..., 1) for n > 4."""
    n = int(n)
    if n < 2:
        raise ValueError(f"rosen_coupled needs n >= 2, got {n}")

    def obj(x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def grad(x):
        g = np.zeros_like(x)
        t = x[1:] - x[:-1] ** 2
        g[:-1] += -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * t
        return g

    return build_problem(f"rosen_coupled_{n}", _alternating_guess(n), obj=obj, grad=grad)
