"""Gradient-based unconstrained solvers: steepest descent, Newton, quasi-Newton."""

import logging

import numpy as np

from .. import kit
from ..problem import EvaluationError
from .base import (RunContext, SolverError, clip_to_bounds, ensure_view,
                   make_options, projected_gradient, require_unconstrained)

log = logging.getLogger(__name__)

_OUTPUTS = lambda n: {"itr": int, "obj": float, "opt": float, "x": (float, (n,))}


def _check_finite_iterate(x, solver):
    if not np.all(np.isfinite(x)):
        raise EvaluationError(f"{solver} produced a non-finite iterate", x=x)


def _descent_step(view, x, f, g, p, opts, ls_kind, alpha0=1.0):
    """One line-searched (or fixed-alpha) step along p. Returns (x_new, f_new, g_new)."""
    lower, upper = view.var_lower, view.var_upper
    if not opts.use_line_search:
        x_new = clip_to_bounds(x + opts.alpha * p, lower, upper)
        return x_new, view.obj(x_new), None

    slope0 = float(g @ p)
    grads = {}

    def phi(a):
        return view.obj(clip_to_bounds(x + a * p, lower, upper))

    def dphi(a):
        ga = view.grad(clip_to_bounds(x + a * p, lower, upper))
        grads[a] = ga
        return float(ga @ p)

    res = kit.line_search(ls_kind, phi, dphi, f0=f, slope0=slope0, alpha0=alpha0)
    if not res.converged:
        log.debug("line search did not converge; continuing with best alpha %g", res.alpha)
    x_new = clip_to_bounds(x + res.alpha * p, lower, upper)
    return x_new, res.f_new, grads.get(res.alpha)


def steepest_descent(problem, **options):
    """Gradient descent with an Armijo backtracking line search.

    Terminates when the (projected) gradient 2-norm drops below ``opt_tol``.
    With ``use_line_search=False`` a fixed step ``alpha`` is taken instead.
    """
    view = ensure_view(problem)
    opts = make_options({"use_line_search": (bool, True), "alpha": (float, 1.0)}, options)
    require_unconstrained(view, "steepest_descent")
    ctx = RunContext(view, "steepest_descent", _OUTPUTS(view.n), opts)

    x = clip_to_bounds(view.x0, view.var_lower, view.var_upper)
    f = view.obj(x)
    g = view.grad(x)
    opt = float(np.linalg.norm(projected_gradient(g, x, view.var_lower, view.var_upper)))
    itr = 0
    ctx.emit(itr=itr, obj=f, opt=opt, x=x)

    # first gradient step has no natural unit scale; open the line search at
    # ~1/|g| and then at the step predicted from the previous decrease
    f_prev = f + 0.5 * opt
    while opt > opts.opt_tol and itr < opts.maxiter:
        itr += 1
        p = -projected_gradient(g, x, view.var_lower, view.var_upper)
        slope = float(g @ p)
        alpha0 = 1.0
        if slope < 0.0:
            alpha0 = min(1.0, 1.01 * 2.0 * (f - f_prev) / slope)
            if alpha0 <= 0.0:
                alpha0 = 1.0
        f_prev = f
        x, f, g_new = _descent_step(view, x, f, g, p, opts, "armijo", alpha0=alpha0)
        _check_finite_iterate(x, "steepest_descent")
        g = g_new if g_new is not None else view.grad(x)
        opt = float(np.linalg.norm(projected_gradient(g, x, view.var_lower, view.var_upper)))
        ctx.emit(itr=itr, obj=f, opt=opt, x=x)
    return ctx.finish(x, f, opt, 0.0, itr, opt <= opts.opt_tol)


def _regularized_newton_step(H, g):
    """Solve H p = -g, adding mu*I (mu doubling) until the factorization is PD."""
    n = g.size
    try:
        L = np.linalg.cholesky(H)
        return np.linalg.solve(L.T, np.linalg.solve(L, -g))
    except np.linalg.LinAlgError:
        pass
    mu = 1e-6 * float(np.linalg.norm(H, np.inf))
    if mu == 0.0:
        mu = 1e-12
    for _ in range(60):
        try:
            L = np.linalg.cholesky(H + mu * np.eye(n))
            return np.linalg.solve(L.T, np.linalg.solve(L, -g))
        except np.linalg.LinAlgError:
            mu *= 2.0
    raise SolverError("Hessian still singular after 60 regularization doublings")


def newton(problem, **options):
    """Newton's method on the objective Hessian (analytic or FD).

    Indefinite Hessians are shifted by a doubling diagonal term until the
    Cholesky factorization succeeds.
    """
    view = ensure_view(problem)
    opts = make_options({"use_line_search": (bool, True), "alpha": (float, 1.0)}, options)
    require_unconstrained(view, "newton")
    ctx = RunContext(view, "newton", _OUTPUTS(view.n), opts)

    x = clip_to_bounds(view.x0, view.var_lower, view.var_upper)
    f = view.obj(x)
    g = view.grad(x)
    opt = float(np.linalg.norm(projected_gradient(g, x, view.var_lower, view.var_upper)))
    itr = 0
    ctx.emit(itr=itr, obj=f, opt=opt, x=x)

    while opt > opts.opt_tol and itr < opts.maxiter:
        itr += 1
        H = view.obj_hess(x)
        p = _regularized_newton_step(H, g)
        if float(g @ p) >= 0.0:
            p = -g
        x, f, g_new = _descent_step(view, x, f, g, p, opts, "armijo")
        _check_finite_iterate(x, "newton")
        g = g_new if g_new is not None else view.grad(x)
        opt = float(np.linalg.norm(projected_gradient(g, x, view.var_lower, view.var_upper)))
        ctx.emit(itr=itr, obj=f, opt=opt, x=x)
    return ctx.finish(x, f, opt, 0.0, itr, opt <= opts.opt_tol)


def _quasi_newton_loop(obj, grad, x0, lower, upper, *, maxiter, opt_tol,
                       use_line_search=True, alpha=1.0, variant="bfgs", on_iter=None):
    """Core quasi-Newton iteration shared by the solver and the penalty drivers.

    ``obj``/``grad`` evaluate the (scaled) objective; bounds are enforced by
    clipping trial points.  Returns a dict with the terminal state.
    """
    x = clip_to_bounds(np.asarray(x0, dtype=float), lower, upper)
    f = obj(x)
    g = grad(x)
    approx = kit.HessianApprox(n=x.size, variant=variant)
    opt = float(np.linalg.norm(projected_gradient(g, x, lower, upper)))
    itr = 0
    if on_iter is not None:
        on_iter(itr, x, f, opt)

    while opt > opt_tol and itr < maxiter:
        itr += 1
        try:
            p = np.linalg.solve(approx.B, -g)
        except np.linalg.LinAlgError:
            approx.reset()
            p = -g
        if float(g @ p) >= 0.0:
            # approximation lost descent; restart from identity
            log.debug("non-descent direction at iteration %d; resetting Hessian approximation", itr)
            approx.reset()
            p = -g

        if use_line_search:
            grads = {}

            def phi(a):
                return obj(clip_to_bounds(x + a * p, lower, upper))

            def dphi(a):
                ga = grad(clip_to_bounds(x + a * p, lower, upper))
                grads[a] = ga
                return float(ga @ p)

            res = kit.line_search("wolfe", phi, dphi, f0=f, slope0=float(g @ p))
            x_new = clip_to_bounds(x + res.alpha * p, lower, upper)
            f_new = res.f_new
            g_new = grads.get(res.alpha)
            if g_new is None:
                g_new = grad(x_new)
        else:
            x_new = clip_to_bounds(x + alpha * p, lower, upper)
            f_new = obj(x_new)
            g_new = grad(x_new)
        _check_finite_iterate(x_new, "quasi_newton")

        approx.update(x_new - x, g_new - g)
        x, f, g = x_new, f_new, g_new
        opt = float(np.linalg.norm(projected_gradient(g, x, lower, upper)))
        if on_iter is not None:
            on_iter(itr, x, f, opt)

    return {"x": x, "f": f, "g": g, "opt": opt, "niter": itr, "converged": opt <= opt_tol}


def quasi_newton(problem, **options):
    """Quasi-Newton solver: B p = -g directions with a Wolfe line search.

    ``variant`` selects the update formula (bfgs, dfp, sr1, broyden);
    B starts from the identity.
    """
    view = ensure_view(problem)
    opts = make_options({"use_line_search": (bool, True), "alpha": (float, 1.0),
                         "variant": (str, "bfgs")}, options)
    if opts.variant not in kit.HESSIAN_VARIANTS:
        raise SolverError(f"unknown quasi-Newton variant {opts.variant!r}")
    require_unconstrained(view, "quasi_newton")
    ctx = RunContext(view, "quasi_newton", _OUTPUTS(view.n), opts)

    def on_iter(itr, x, f, opt):
        ctx.emit(itr=itr, obj=f, opt=opt, x=x)

    state = _quasi_newton_loop(view.obj, view.grad, view.x0, view.var_lower, view.var_upper,
                               maxiter=opts.maxiter, opt_tol=opts.opt_tol,
                               use_line_search=opts.use_line_search, alpha=opts.alpha,
                               variant=opts.variant, on_iter=on_iter)
    return ctx.finish(state["x"], state["f"], state["opt"], 0.0,
                      state["niter"], state["converged"])
