"""Constrained solvers: Newton-Lagrange, penalty methods, and SQP."""

import numpy as np

from .. import kit
from ..problem import signed_violation, violation
from .base import (RunContext, SolverError, clip_to_bounds, ensure_view, make_options)
from .direct import _nelder_mead_loop
from .gradient import _quasi_newton_loop

RHO_CAP = 1e12


def _scaled_violation(view, c):
    if view.m == 0:
        return np.zeros(0)
    return violation(c, view.con_lower, view.con_upper)


def newton_lagrange(problem, **options):
    """Newton iteration on the KKT conditions of an equality-constrained problem.

    Solves grad L = 0 for (x, lam) where L = f - lam @ (c - target), taking
    full steps by default; ``use_line_search=True`` applies Armijo on
    ||grad L||^2.  Requires every constraint to be an equality
    (lower == upper).
    """
    view = ensure_view(problem)
    opts = make_options({"use_line_search": (bool, False)}, options)
    if view.m and not np.all(view.con_lower == view.con_upper):
        raise SolverError("newton_lagrange requires equality constraints only (lower == upper)")
    ctx = RunContext(view, "newton_lagrange",
                     {"itr": int, "obj": float, "opt": float, "feas": float,
                      "x": (float, (view.n,)), "lam": (float, (view.m,))}, opts)

    n, m = view.n, view.m
    target = view.con_lower
    x = view.x0.copy()
    lam = np.zeros(m)

    def kkt_state(x, lam):
        f = view.obj(x)
        g = view.grad(x)
        if m:
            J = view.jac(x)
            c = view.con(x)
            resid = c - target
            grad_l = g - J.T @ lam
        else:
            J = np.zeros((0, n))
            resid = np.zeros(0)
            grad_l = g
        return f, grad_l, J, resid

    f, grad_l, J, resid = kkt_state(x, lam)
    itr = 0
    while True:
        opt = float(np.linalg.norm(grad_l))
        feas = float(np.max(np.abs(resid))) if m else 0.0
        ctx.emit(itr=itr, obj=f, opt=opt, feas=feas, x=x, lam=lam)
        if opt <= opts.opt_tol and feas <= opts.feas_tol:
            converged = True
            break
        if itr >= opts.maxiter:
            converged = False
            break
        itr += 1

        H = view.lag_hess(x, lam)
        K = np.zeros((n + m, n + m))
        K[:n, :n] = H
        if m:
            K[:n, n:] = -J.T
            K[n:, :n] = -J
        rhs = -np.concatenate([grad_l, -resid])
        try:
            delta = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            raise SolverError("singular KKT matrix: constraint jacobian may be "
                              "rank-deficient at the iterate") from None
        dx, dlam = delta[:n], delta[n:]

        alpha = 1.0
        if opts.use_line_search:
            psi0 = float(grad_l @ grad_l + resid @ resid)

            def psi(a):
                xa, lama = x + a * dx, lam + a * dlam
                _, gl, _, rs = kkt_state(xa, lama)
                return float(gl @ gl + rs @ rs)

            res = kit.line_search("armijo", psi, f0=psi0, slope0=-2.0 * psi0)
            alpha = res.alpha
        x = x + alpha * dx
        lam = lam + alpha * dlam
        f, grad_l, J, resid = kkt_state(x, lam)

    return ctx.finish(x, f, opt, feas, itr, converged, multipliers=lam)


def quadratic_penalty(problem, **options):
    """Sequential quadratic-penalty minimization with an increasing rho schedule.

    Each outer iteration minimizes f + (rho/2)*||violation||^2 with the
    quasi-Newton core, warm-started at the previous solution;
    rho grows geometrically until both feasibility and the subproblem
    optimality meet their tolerances.
    """
    view = ensure_view(problem)
    opts = make_options({"rho0": (float, 1.0), "rho_growth": (float, 10.0),
                         "subsolver_tol_schedule": (list, [1e-2, 1e-3, 1e-4]),
                         "sub_maxiter": (int, 300)}, options)
    ctx = RunContext(view, "quadratic_penalty",
                     {"itr": int, "obj": float, "opt": float, "feas": float,
                      "rho": float, "x": (float, (view.n,))}, opts)
    m = view.m
    lower, upper = view.var_lower, view.var_upper

    def make_penalized(rho):
        def pobj(x):
            f = view.obj(x)
            if m == 0:
                return f
            v = _scaled_violation(view, view.con(x))
            return f + 0.5 * rho * float(v @ v)

        def pgrad(x):
            g = view.grad(x)
            if m == 0:
                return g
            c = view.con(x)
            r = signed_violation(c, view.con_lower, view.con_upper)
            return g + rho * (view.jac(x).T @ r)

        return pobj, pgrad

    x = clip_to_bounds(view.x0, lower, upper)
    rho = opts.rho0
    schedule = list(opts.subsolver_tol_schedule)
    converged = False
    outer = 0
    feas = view.feasibility(x)
    sub_opt = np.inf

    while outer < opts.maxiter:
        if m == 0 and outer == 1:
            break  # unconstrained: the penalty loop degenerates to one subsolve
        if m == 0:
            tol = opts.opt_tol
        else:
            tol = max(float(schedule[outer]) if outer < len(schedule) else opts.opt_tol,
                      opts.opt_tol)
        pobj, pgrad = make_penalized(rho)
        try:
            state = _quasi_newton_loop(pobj, pgrad, x, lower, upper,
                                       maxiter=opts.sub_maxiter, opt_tol=tol)
        except Exception as exc:
            raise SolverError(f"penalty subsolver failed at outer iteration {outer} "
                              f"(rho={rho:g}): {exc}") from exc
        outer += 1
        x = state["x"]
        sub_opt = state["opt"]
        feas = view.feasibility(x)
        f = view.obj(x)
        ctx.emit(itr=outer, obj=f, opt=sub_opt, feas=feas, rho=rho, x=x)
        if feas <= opts.feas_tol and sub_opt <= opts.opt_tol:
            converged = True
            break
        rho *= opts.rho_growth
        if rho > RHO_CAP:
            raise SolverError(f"penalty parameter exceeded {RHO_CAP:g} at outer "
                              f"iteration {outer} (feasibility {feas:.3e})")

    f = view.obj(x)
    return ctx.finish(x, f, sub_opt, feas, outer, converged)


def exact_penalty(problem, **options):
    """Single-shot nonsmooth penalty minimization via Nelder-Mead.

    Minimizes f + rho*||violation||_1 (or the max-violation form with
    kind='linf') at a fixed rho; for rho larger than the multiplier norm the
    minimizer coincides with the constrained solution.
    """
    view = ensure_view(problem)
    opts = make_options({"kind": (str, "l1"), "rho": (float, 100.0),
                         "init_scale": (float, 0.05)}, options)
    if opts.kind not in ("l1", "linf"):
        raise SolverError(f"exact_penalty kind must be 'l1' or 'linf', got {opts.kind!r}")
    ctx = RunContext(view, "exact_penalty",
                     {"itr": int, "merit": float, "spread": float,
                      "x": (float, (view.n,))}, opts)

    # Variable bounds join the penalty instead of clipping the simplex:
    # clipped vertices collapse onto active-bound hyperplanes and degenerate.
    def penalized(x):
        f = view.obj(x)
        v = violation(x, view.var_lower, view.var_upper)
        if view.m:
            v = np.concatenate([violation(view.con(x), view.con_lower, view.con_upper), v])
        if opts.kind == "l1":
            return f + opts.rho * float(np.sum(v))
        return f + opts.rho * (float(np.max(v)) if v.size else 0.0)

    def on_iter(itr, x, fbest, spread):
        ctx.emit(itr=itr, merit=fbest, spread=spread, x=x)

    free = np.full(view.n, np.inf)
    state = _nelder_mead_loop(penalized, view.x0, -free, free,
                              maxiter=opts.maxiter, opt_tol=opts.opt_tol,
                              init_scale=opts.init_scale, on_iter=on_iter)
    x = state["x"]
    f = view.obj(x)
    bound_v = violation(x, view.var_lower, view.var_upper)
    feas = max(view.feasibility(x), float(np.max(bound_v)) if bound_v.size else 0.0)
    converged = state["converged"] and feas <= opts.feas_tol
    return ctx.finish(x, f, state["spread"], feas, state["niter"], converged)


def sqp(problem, **options):
    """Sequential quadratic programming with a BFGS Lagrangian Hessian.

    Each iteration solves the QP linearization of the constraints (variable
    bounds folded in as linear inequalities) for a step p and multiplier
    estimates, line-searches the l1 merit with rho >= ||lam||_inf + 1, and
    moves the multipliers along lam + alpha*(lam_hat - lam).  Infeasible QPs
    trigger a feasibility-restoration descent step on ||violation||^2.
    """
    view = ensure_view(problem)
    opts = make_options({}, options)
    ctx = RunContext(view, "sqp",
                     {"itr": int, "obj": float, "opt": float, "feas": float,
                      "x": (float, (view.n,)), "lam": (float, (view.m,))}, opts)
    n, m = view.n, view.m
    cl, cu = view.con_lower, view.con_upper
    xl, xu = view.var_lower, view.var_upper
    eq = np.flatnonzero(cl == cu) if m else np.zeros(0, dtype=int)
    ineq = np.flatnonzero(cl != cu) if m else np.zeros(0, dtype=int)

    x = clip_to_bounds(view.x0, xl, xu)
    lam = np.zeros(m)
    bound_mult = np.zeros(n)
    f = view.obj(x)
    g = view.grad(x)
    c = view.con(x) if m else np.zeros(0)
    J = view.jac(x) if m else np.zeros((0, n))

    approx = kit.HessianApprox(n=n, variant="bfgs")
    rho = 1.0
    restorations = 0
    itr = 0

    def kkt_residual(g, J, lam, mu):
        r = g - mu
        if m:
            r = r - J.T @ lam
        return float(np.max(np.abs(r)))

    def build_qp(c, J, x):
        a_eq = J[eq] if eq.size else np.zeros((0, n))
        b_eq = (cl[eq] - c[eq]) if eq.size else np.zeros(0)
        rows, rhs, tags = [], [], []
        for j in ineq:
            if np.isfinite(cl[j]):
                rows.append(J[j]); rhs.append(cl[j] - c[j]); tags.append(("cl", j))
            if np.isfinite(cu[j]):
                rows.append(-J[j]); rhs.append(c[j] - cu[j]); tags.append(("cu", j))
        eye = np.eye(n)
        for i in range(n):
            if np.isfinite(xl[i]):
                rows.append(eye[i]); rhs.append(xl[i] - x[i]); tags.append(("xl", i))
            if np.isfinite(xu[i]):
                rows.append(-eye[i]); rhs.append(x[i] - xu[i]); tags.append(("xu", i))
        a_in = np.array(rows) if rows else np.zeros((0, n))
        b_in = np.array(rhs) if rhs else np.zeros(0)
        return a_eq, b_eq, a_in, b_in, tags

    while True:
        feas = float(np.max(_scaled_violation(view, c))) if m else 0.0
        opt = kkt_residual(g, J, lam, bound_mult)
        ctx.emit(itr=itr, obj=f, opt=opt, feas=feas, x=x, lam=lam)
        if opt <= opts.opt_tol and feas <= opts.feas_tol:
            converged = True
            break
        if itr >= opts.maxiter:
            converged = False
            break
        itr += 1

        a_eq, b_eq, a_in, b_in, tags = build_qp(c, J, x)
        try:
            p, lam_eq, lam_in = kit.qp_solve(approx.B, g, a_eq, b_eq, a_in, b_in)
        except kit.QpError as exc:
            restorations += 1
            if restorations > 5:
                raise SolverError(f"QP subproblem failed {restorations} times in a row: {exc}") from exc
            x, f, c, g, J = _restore_feasibility(view, x, c, J)
            continue
        restorations = 0

        lam_hat = np.zeros(m)
        if eq.size:
            lam_hat[eq] = lam_eq
        mu_hat = np.zeros(n)
        for value, (tag, idx) in zip(lam_in, tags):
            if tag == "cl":
                lam_hat[idx] += value
            elif tag == "cu":
                lam_hat[idx] -= value
            elif tag == "xl":
                mu_hat[idx] += value
            else:
                mu_hat[idx] -= value

        # x is already optimal once the fresh multipliers certify it
        if kkt_residual(g, J, lam_hat, mu_hat) <= opts.opt_tol and feas <= opts.feas_tol:
            lam, bound_mult = lam_hat, mu_hat
            continue

        if m:
            rho = max(rho, float(np.max(np.abs(lam_hat))) + 1.0)
        v1 = float(np.sum(_scaled_violation(view, c)))
        merit0 = f + rho * v1
        slope0 = float(g @ p) - rho * v1

        trials = {}

        def phi(a):
            xa = clip_to_bounds(x + a * p, xl, xu)
            fa = view.obj(xa)
            ca = view.con(xa) if m else np.zeros(0)
            trials[a] = (xa, fa, ca)
            return fa + rho * float(np.sum(_scaled_violation(view, ca)))

        if slope0 >= -1e-16 or float(np.max(np.abs(p))) <= 1e-14 * (1.0 + float(np.max(np.abs(x)))):
            phi(1.0)
            alpha = 1.0
        else:
            res = kit.line_search("armijo", phi, f0=merit0, slope0=slope0)
            alpha = res.alpha
        x, f, c = trials[alpha]

        lam_new = lam + alpha * (lam_hat - lam)
        g_new = view.grad(x)
        J_new = view.jac(x) if m else np.zeros((0, n))
        # secant pair for the Lagrangian Hessian at fixed new multipliers
        d = alpha * p
        if m:
            w = (g_new - J_new.T @ lam_new) - (g - J.T @ lam_new)
        else:
            w = g_new - g
        approx.update(d, w)
        lam, bound_mult = lam_new, mu_hat
        g, J = g_new, J_new

    return ctx.finish(x, f, opt, feas, itr, converged, multipliers=lam)


def _restore_feasibility(view, x, c, J):
    """One descent step on 0.5*||violation||^2 after an infeasible QP."""
    r = signed_violation(c, view.con_lower, view.con_upper)
    grad_v = J.T @ r
    norm = float(np.linalg.norm(grad_v))
    if norm == 0.0:
        raise SolverError("QP infeasible and the violation gradient vanishes; cannot restore")
    xl, xu = view.var_lower, view.var_upper

    def psi(a):
        xa = clip_to_bounds(x - a * grad_v, xl, xu)
        va = _scaled_violation(view, view.con(xa))
        return 0.5 * float(va @ va)

    v0 = _scaled_violation(view, c)
    res = kit.line_search("armijo", psi, f0=0.5 * float(v0 @ v0),
                          slope0=-norm ** 2, alpha0=1.0 / max(1.0, norm))
    x_new = clip_to_bounds(x - res.alpha * grad_v, xl, xu)
    f = view.obj(x_new)
    c_new = view.con(x_new)
    g = view.grad(x_new)
    J_new = view.jac(x_new)
    return x_new, f, c_new, g, J_new
