"""Derivative-free solvers: Nelder-Mead simplex, particle swarm, simulated annealing."""

import numpy as np

from .base import (RunContext, SolverError, clip_to_bounds, ensure_view,
                   make_options, require_unconstrained)

# canonical simplex coefficients: reflection, expansion, contraction, shrink
REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5

STAGNATION_WINDOW = 50
STAGNATION_IMPROVEMENT = 1e-12


def _nelder_mead_loop(fun, x0, lower, upper, *, maxiter, opt_tol, init_scale, on_iter=None):
    """Standard simplex iteration; vertices are clipped into the bounds.

    Terminates when both the objective spread and the simplex diameter are
    small, or at ``maxiter``.  Returns the terminal state as a dict.
    """
    x0 = clip_to_bounds(np.asarray(x0, dtype=float), lower, upper)
    n = x0.size
    verts = [x0]
    for i in range(n):
        v = x0.copy()
        v[i] += init_scale * max(1.0, abs(x0[i]))
        verts.append(clip_to_bounds(v, lower, upper))
    verts = np.array(verts)
    fvals = np.array([fun(v) for v in verts])

    itr = 0
    while True:
        order = np.argsort(fvals, kind="stable")
        verts, fvals = verts[order], fvals[order]
        spread = float(fvals[-1] - fvals[0])
        diameter = float(np.max(np.linalg.norm(verts[1:] - verts[0], axis=1))) if n else 0.0
        if on_iter is not None:
            on_iter(itr, verts[0], float(fvals[0]), spread)
        if spread <= opt_tol and diameter <= opt_tol * max(1.0, float(np.linalg.norm(verts[0]))):
            return {"x": verts[0], "f": float(fvals[0]), "spread": spread,
                    "niter": itr, "converged": True}
        if itr >= maxiter:
            return {"x": verts[0], "f": float(fvals[0]), "spread": spread,
                    "niter": itr, "converged": False}
        itr += 1

        centroid = np.mean(verts[:-1], axis=0)
        worst, f_worst = verts[-1], fvals[-1]

        def trial(coef):
            point = clip_to_bounds(centroid + coef * (centroid - worst), lower, upper)
            return point, fun(point)

        x_r, f_r = trial(REFLECT)
        if f_r < fvals[0]:
            x_e, f_e = trial(EXPAND)
            verts[-1], fvals[-1] = (x_e, f_e) if f_e < f_r else (x_r, f_r)
            continue
        if f_r < fvals[-2]:
            verts[-1], fvals[-1] = x_r, f_r
            continue
        if f_r < f_worst:       # outside contraction
            x_c, f_c = trial(CONTRACT)
            if f_c <= f_r:
                verts[-1], fvals[-1] = x_c, f_c
                continue
        else:                   # inside contraction
            x_c, f_c = trial(-CONTRACT)
            if f_c < f_worst:
                verts[-1], fvals[-1] = x_c, f_c
                continue
        # shrink toward the best vertex
        for j in range(1, n + 1):
            verts[j] = clip_to_bounds(verts[0] + SHRINK * (verts[j] - verts[0]), lower, upper)
            fvals[j] = fun(verts[j])


def nelder_mead(problem, **options):
    """Nelder-Mead simplex search (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

    The initial simplex offsets each coordinate of x0 by
    ``init_scale * max(1, |x0_i|)``; reported optimality is the simplex
    objective spread.
    """
    view = ensure_view(problem)
    opts = make_options({"init_scale": (float, 0.05)}, options)
    require_unconstrained(view, "nelder_mead")
    ctx = RunContext(view, "nelder_mead",
                     {"itr": int, "obj": float, "spread": float, "x": (float, (view.n,))}, opts)

    def on_iter(itr, x, f, spread):
        ctx.emit(itr=itr, obj=f, spread=spread, x=x)

    state = _nelder_mead_loop(view.obj, view.x0, view.var_lower, view.var_upper,
                              maxiter=opts.maxiter, opt_tol=opts.opt_tol,
                              init_scale=opts.init_scale, on_iter=on_iter)
    return ctx.finish(state["x"], state["f"], state["spread"], 0.0,
                      state["niter"], state["converged"])


def _sampling_box(view, opts):
    lower = view.var_lower.copy()
    upper = view.var_upper.copy()
    if opts.sample_lower is not None:
        lower = np.asarray(opts.sample_lower, dtype=float)
    if opts.sample_upper is not None:
        upper = np.asarray(opts.sample_upper, dtype=float)
    if lower.size != view.n or upper.size != view.n:
        raise SolverError(f"sampling box must have length n={view.n}")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise SolverError("unbounded variables: provide finite bounds or a sampling box "
                          "(sample_lower/sample_upper)")
    return lower, upper


def pso(problem, **options):
    """Particle swarm optimization over a finite box.

    Per iteration each velocity relaxes toward the personal and swarm bests
    and the position moves by it:

        v_next = w*v + c_p*r_p*(p_best - x) + c_g*r_g*(g_best - x)
        x_next = x + v_next

    with fresh scalar r_p, r_g ~ U[0,1] per particle per iteration.
    Terminates at ``maxiter`` or when the swarm best stalls (improvement below
    1e-12 over 50 iterations); reported optimality is the improvement over
    that window.
    """
    view = ensure_view(problem)
    opts = make_options({"n_particles": (int, 20), "w": (float, 0.7),
                         "c_p": (float, 1.5), "c_g": (float, 1.5),
                         "seed": ((int, type(None)), None),
                         "sample_lower": ((list, tuple, type(None)), None),
                         "sample_upper": ((list, tuple, type(None)), None)}, options)
    require_unconstrained(view, "pso")
    ctx = RunContext(view, "pso",
                     {"itr": int, "obj": float, "x": (float, (view.n,))}, opts)
    lower, upper = _sampling_box(view, opts)
    width = upper - lower
    rng = np.random.default_rng(opts.seed)

    npart, n = opts.n_particles, view.n
    pos = lower + rng.uniform(0.0, 1.0, (npart, n)) * width
    vel = rng.uniform(-1.0, 1.0, (npart, n)) * width

    p_best = pos.copy()
    p_best_f = np.array([view.obj(p) for p in pos])
    g_idx = int(np.argmin(p_best_f))
    g_best, g_best_f = p_best[g_idx].copy(), float(p_best_f[g_idx])

    window_start_f = g_best_f
    stall = 0
    itr = 0
    ctx.emit(itr=itr, obj=g_best_f, x=g_best)
    converged = False

    while itr < opts.maxiter:
        itr += 1
        r_p = rng.uniform(0.0, 1.0, (npart, 1))
        r_g = rng.uniform(0.0, 1.0, (npart, 1))
        vel = (opts.w * vel + opts.c_p * r_p * (p_best - pos)
               + opts.c_g * r_g * (g_best[None, :] - pos))
        pos = clip_to_bounds(pos + vel, lower, upper)

        for i in range(npart):
            fi = view.obj(pos[i])
            if fi < p_best_f[i]:
                p_best_f[i] = fi
                p_best[i] = pos[i]
                if fi < g_best_f:
                    g_best_f = fi
                    g_best = pos[i].copy()
        ctx.emit(itr=itr, obj=g_best_f, x=g_best)

        stall += 1
        if stall >= STAGNATION_WINDOW:
            if window_start_f - g_best_f <= STAGNATION_IMPROVEMENT:
                converged = True
                break
            window_start_f = g_best_f
            stall = 0

    improvement = window_start_f - g_best_f
    return ctx.finish(g_best, g_best_f, improvement, 0.0, itr,
                      converged and improvement <= opts.opt_tol)


def simulated_annealing(problem, **options):
    """Simulated annealing with Metropolis acceptance and linear cooling.

    Proposals are x + step_scale * width * u with u ~ U[-1,1]^n, clipped to the
    box.  Worse points are accepted with probability exp(-(f_new - f)/T_k)
    under T_k = T0*(1 - k/k_max), floored at 1e-12.  Runs the full schedule of
    ``k_max`` proposals and returns the best point ever seen.
    """
    view = ensure_view(problem)
    opts = make_options({"T0": (float, 10.0), "k_max": (int, 5000),
                         "step_scale": (float, 0.1),
                         "seed": ((int, type(None)), None),
                         "sample_lower": ((list, tuple, type(None)), None),
                         "sample_upper": ((list, tuple, type(None)), None)}, options)
    require_unconstrained(view, "simulated_annealing")
    ctx = RunContext(view, "simulated_annealing",
                     {"itr": int, "obj": float, "T": float, "x": (float, (view.n,))}, opts)
    lower, upper = _sampling_box(view, opts)
    width = upper - lower
    rng = np.random.default_rng(opts.seed)

    x = clip_to_bounds(view.x0, lower, upper)
    f = view.obj(x)
    best_x, best_f = x.copy(), f
    window_best = best_f
    improvement = 0.0
    ctx.emit(itr=0, obj=best_f, T=opts.T0, x=x)

    for k in range(opts.k_max):
        T = max(opts.T0 * (1.0 - k / opts.k_max), 1e-12)
        u = rng.uniform(-1.0, 1.0, view.n)
        x_new = clip_to_bounds(x + opts.step_scale * width * u, lower, upper)
        f_new = view.obj(x_new)
        if f_new <= f or rng.uniform() < np.exp(-(f_new - f) / T):
            x, f = x_new, f_new
            if f < best_f:
                best_x, best_f = x.copy(), f
        if (k + 1) % STAGNATION_WINDOW == 0:
            improvement = window_best - best_f
            window_best = best_f
        ctx.emit(itr=k + 1, obj=best_f, T=T, x=x)

    return ctx.finish(best_x, best_f, improvement, 0.0, opts.k_max,
                      improvement <= opts.opt_tol)
