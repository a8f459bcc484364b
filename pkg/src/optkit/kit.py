"""Reusable solver building blocks: quasi-Newton updates, line searches,
merit functions, and a dense active-set QP subsolver."""

import numpy as np
from dataclasses import dataclass

from .problem import violation

HESSIAN_VARIANTS = ("broyden", "sr1", "bfgs", "dfp")
MERIT_KINDS = ("l1", "l2sq", "linf", "quadratic_penalty", "lagrangian", "augmented_lagrangian")


class QpError(RuntimeError):
    """QP subproblem failure (singular KKT system, infeasible constraints, cycling)."""


# ---------------------------------------------------------------------------
# Hessian approximations
# ---------------------------------------------------------------------------

@dataclass
class HessianApprox:
    """Square Hessian approximation B with a rank-1/rank-2 update rule.

    ``update(d, w)`` applies the variant's formula for step d and gradient
    change w, maintaining the secant condition B_new @ d = w.  Degenerate
    denominators and curvature violations skip the update (B unchanged).
    """

    n: int
    variant: str = "bfgs"
    skip_tol: float = 1e-10
    B: np.ndarray = None

    def __post_init__(self):
        if self.variant not in HESSIAN_VARIANTS:
            raise ValueError(f"unknown Hessian update variant {self.variant!r}; expected one of {HESSIAN_VARIANTS}")
        if self.B is None:
            self.B = np.eye(self.n)
        else:
            self.B = np.asarray(self.B, dtype=float).reshape(self.n, self.n).copy()

    def reset(self):
        self.B = np.eye(self.n)

    def update(self, d, w):
        """Apply one update; returns True if the update was skipped by a guard."""
        d = np.asarray(d, dtype=float).ravel()
        w = np.asarray(w, dtype=float).ravel()
        B = self.B
        nd = np.linalg.norm(d)
        nw = np.linalg.norm(w)
        if nd == 0.0:
            return True

        if self.variant == "broyden":
            denom = d @ d
            self.B = B + np.outer(w - B @ d, d) / denom
            return False

        if self.variant == "sr1":
            v = w - B @ d
            denom = v @ d
            # standard SR1 safeguard: |v'd| must not be negligible vs |v||d|
            if abs(denom) <= 1e-8 * nd * np.linalg.norm(v):
                return True
            Bn = B + np.outer(v, v) / denom
            self.B = 0.5 * (Bn + Bn.T)
            return False

        # bfgs / dfp need positive curvature along the step
        wd = w @ d
        if wd <= self.skip_tol * nw * nd:
            return True
        if self.variant == "bfgs":
            Bd = B @ d
            dBd = d @ Bd
            if dBd <= 0.0:
                return True
            Bn = B - np.outer(Bd, Bd) / dBd + np.outer(w, w) / wd
        else:  # dfp: dual of BFGS
            V = np.eye(self.n) - np.outer(w, d) / wd
            Bn = V @ B @ V.T + np.outer(w, w) / wd
        self.B = 0.5 * (Bn + Bn.T)
        return False


def hessian_update(approx, d, w):
    """Functional wrapper: returns (approx, skipped)."""
    skipped = approx.update(d, w)
    return approx, skipped


# ---------------------------------------------------------------------------
# Line searches
# ---------------------------------------------------------------------------

@dataclass
class LineSearchResult:
    alpha: float
    f_new: float
    n_f_evals: int = 0
    n_g_evals: int = 0
    converged: bool = True
    slope_new: float = None
    g_new: np.ndarray = None   # filled by callers that capture gradients


def line_search(kind, phi, dphi=None, f0=None, slope0=None, *,
                c1=1e-4, c2=0.9, tau=0.5, max_iters=30, alpha0=1.0):
    """Find a step length along a descent direction.

    ``phi(alpha)`` is the objective along the ray and ``dphi(alpha)`` its
    slope (wolfe only).  ``armijo`` backtracks from ``alpha0`` by factor
    ``tau`` until phi(a) <= f0 + c1*a*slope0.  ``wolfe`` brackets and zooms
    to also satisfy the strong curvature condition |dphi(a)| <= c2*|slope0|.

    Raises ValueError for a non-descent direction (slope0 >= 0).  When the
    trial budget runs out the best alpha seen is returned with
    ``converged=False``.
    """
    if not (0.0 < c1 < 1.0 and c1 < c2 < 1.0 and 0.0 < tau < 1.0):
        raise ValueError(f"invalid line-search parameters c1={c1}, c2={c2}, tau={tau}")
    if f0 is None:
        raise ValueError("f0 (objective at alpha=0) is required")
    if slope0 is None or slope0 >= 0.0:
        raise ValueError(f"line search requires a descent direction, got slope0={slope0}")

    if kind == "armijo":
        return _armijo(phi, f0, slope0, c1, tau, max_iters, alpha0)
    if kind == "wolfe":
        if dphi is None:
            raise ValueError("wolfe line search requires dphi")
        return _wolfe(phi, dphi, f0, slope0, c1, c2, max_iters, alpha0)
    raise ValueError(f"unknown line search kind {kind!r}")


def _armijo(phi, f0, slope0, c1, tau, max_iters, alpha0):
    alpha = float(alpha0)
    best = (None, np.inf)
    n_f = 0
    for _ in range(max_iters):
        fa = phi(alpha)
        n_f += 1
        if fa < best[1]:
            best = (alpha, fa)
        if fa <= f0 + c1 * alpha * slope0:
            return LineSearchResult(alpha=alpha, f_new=fa, n_f_evals=n_f, converged=True)
        alpha *= tau
    alpha, fa = best if best[0] is not None else (alpha, np.inf)
    return LineSearchResult(alpha=alpha, f_new=fa, n_f_evals=n_f, converged=False)


def _wolfe(phi, dphi, f0, slope0, c1, c2, max_iters, alpha0):
    # bracket-and-zoom strong Wolfe search (quadratic/bisection zoom)
    n = {"f": 0, "g": 0}

    def eval_phi(a):
        n["f"] += 1
        return phi(a)

    def eval_slope(a):
        n["g"] += 1
        return dphi(a)

    def result(alpha, fa, slope, ok):
        return LineSearchResult(alpha=alpha, f_new=fa, n_f_evals=n["f"],
                                n_g_evals=n["g"], converged=ok, slope_new=slope)

    def zoom(lo, f_lo, hi, f_hi, budget):
        best = (lo, f_lo, None)
        for _ in range(budget):
            a = 0.5 * (lo + hi)
            fa = eval_phi(a)
            if fa > f0 + c1 * a * slope0 or fa >= f_lo:
                hi, f_hi = a, fa
            else:
                sa = eval_slope(a)
                if abs(sa) <= c2 * abs(slope0):
                    return result(a, fa, sa, True)
                if sa * (hi - lo) >= 0.0:
                    hi, f_hi = lo, f_lo
                lo, f_lo = a, fa
                best = (a, fa, sa)
            if abs(hi - lo) < 1e-16:
                break
        a, fa, sa = best
        return result(a, fa, sa, False)

    alpha_prev, f_prev = 0.0, f0
    alpha = float(alpha0)
    for i in range(max_iters):
        fa = eval_phi(alpha)
        if fa > f0 + c1 * alpha * slope0 or (i > 0 and fa >= f_prev):
            return zoom(alpha_prev, f_prev, alpha, fa, max_iters - i)
        sa = eval_slope(alpha)
        if abs(sa) <= c2 * abs(slope0):
            return result(alpha, fa, sa, True)
        if sa >= 0.0:
            return zoom(alpha, fa, alpha_prev, f_prev, max_iters - i)
        alpha_prev, f_prev = alpha, fa
        alpha = min(2.0 * alpha, 1e6)
    return result(alpha_prev, f_prev, None, False)


# ---------------------------------------------------------------------------
# Merit functions
# ---------------------------------------------------------------------------

@dataclass
class MeritSpec:
    """Merit function selector: penalty kind, parameter rho, multipliers."""

    kind: str = "l1"
    rho: float = 0.0
    lam: np.ndarray = None

    def __post_init__(self):
        if self.kind not in MERIT_KINDS:
            raise ValueError(f"unknown merit kind {self.kind!r}; expected one of {MERIT_KINDS}")
        if not np.isfinite(self.rho) or self.rho < 0.0:
            raise ValueError(f"rho must be finite and nonnegative, got {self.rho}")


def merit_value(spec, f, c, con_lower, con_upper):
    """Evaluate the merit function for objective f and constraint values c.

    Violations are measured against the two-sided bounds; the Lagrangian kinds
    use c - clip(c, lower, upper), i.e. the residual to the nearest bound of
    each violated or active constraint.
    """
    c = np.asarray(c, dtype=float)
    f = float(f)
    v = violation(c, con_lower, con_upper)
    if spec.kind == "l1":
        return f + spec.rho * float(np.sum(v))
    if spec.kind == "linf":
        return f + spec.rho * (float(np.max(v)) if v.size else 0.0)
    if spec.kind in ("l2sq", "quadratic_penalty"):
        return f + 0.5 * spec.rho * float(v @ v)
    # lagrangian / augmented_lagrangian
    lam = np.zeros_like(c) if spec.lam is None else np.asarray(spec.lam, dtype=float)
    residual = c - np.clip(c, con_lower, con_upper)
    value = f - float(lam @ residual)
    if spec.kind == "augmented_lagrangian":
        value += 0.5 * spec.rho * float(v @ v)
    return value


# ---------------------------------------------------------------------------
# Quadratic programming
# ---------------------------------------------------------------------------

def _solve_eqp(H, g, A, b):
    """Equality-constrained QP via the dense KKT system.

    Returns (p, lam) with the stationarity convention H p + g = A' lam.
    """
    n = g.size
    p_rows = A.shape[0]
    if p_rows == 0:
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise QpError("QP Hessian is not positive definite; regularize the Hessian") from None
        y = np.linalg.solve(L, -g)
        return np.linalg.solve(L.T, y), np.zeros(0)
    K = np.zeros((n + p_rows, n + p_rows))
    K[:n, :n] = H
    K[:n, n:] = -A.T
    K[n:, :n] = A
    rhs = np.concatenate([-g, b])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        raise QpError("singular KKT system (dependent constraints or indefinite Hessian); "
                      "regularize the Hessian") from None
    p, lam = sol[:n], sol[n:]
    # guard against a numerically singular but factorizable system
    scale = 1.0 + float(np.max(np.abs(rhs)))
    if not np.all(np.isfinite(sol)) or np.max(np.abs(K @ sol - rhs)) > 1e-7 * scale:
        raise QpError("KKT system is numerically singular or inconsistent; regularize the Hessian")
    return p, lam


def _active_set_loop(H, g, A_eq, A_in, b_in, p, max_cycles):
    """Feasible-point primal active set from a feasible start p.

    Directions come from equality subproblems over the working rows; steps
    clip at the first blocking inequality, negative-multiplier rows leave.
    Returns (p, lam_eq, lam_in).
    """
    q = A_in.shape[0]
    lam_tol = 1e-9
    working = []
    for _ in range(max_cycles):
        A_w = np.vstack([A_eq, A_in[working]]) if working else A_eq
        d, lam = _solve_eqp(H, H @ p + g, A_w, np.zeros(A_w.shape[0]))
        if float(np.max(np.abs(d))) <= 1e-11 * (1.0 + float(np.max(np.abs(p)))):
            lam_eq = lam[:A_eq.shape[0]]
            lam_w = lam[A_eq.shape[0]:]
            if lam_w.size == 0 or float(np.min(lam_w)) >= -lam_tol * (1.0 + float(np.max(np.abs(lam_w)))):
                lam_in = np.zeros(q)
                for idx, row in enumerate(working):
                    lam_in[row] = max(float(lam_w[idx]), 0.0)
                return p, lam_eq, lam_in
            working.pop(int(np.argmin(lam_w)))
            continue
        # clip the step at the first blocking inequality
        alpha, blocker = 1.0, None
        for i in range(q):
            if i in working:
                continue
            ad = float(A_in[i] @ d)
            if ad < -1e-13 * (1.0 + float(np.max(np.abs(A_in[i])))):
                ai = max((float(b_in[i]) - float(A_in[i] @ p)) / ad, 0.0)
                if ai < alpha:
                    alpha, blocker = ai, i
        p = p + alpha * d
        if blocker is not None:
            working.append(blocker)
    raise QpError(f"active-set cycle limit exceeded ({max_cycles} iterations)")


def _phase1_point(A_eq, b_eq, A_in, b_in, n):
    """Feasible starting point for the inequality-constrained QP.

    The equality least-squares point is tried first; if it violates the
    inequalities, an elastic problem with one slack t >= max violation is
    solved with the same active-set loop (it has a trivially feasible start),
    driving t to zero exactly for feasible systems.
    """
    if A_eq.shape[0]:
        p, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
        resid = float(np.max(np.abs(A_eq @ p - b_eq)))
        if resid > 1e-7 * (1.0 + float(np.max(np.abs(b_eq)))):
            raise QpError(f"equality constraints inconsistent (residual {resid:.3e})")
    else:
        p = np.zeros(n)

    q = A_in.shape[0]
    if q == 0:
        return p
    scale = 1.0 + float(np.max(np.abs(b_in)))
    tol = 1e-9 * scale
    worst = float(np.min(A_in @ p - b_in))
    if worst >= -tol:
        return p

    # lift: minimize (eps/2)(|p|^2 + t^2) + M t  s.t.  A_in p + t >= b_in,
    # t >= 0, A_eq p = b_eq; start feasible at (p, worst violation + 1)
    eps = 1e-6
    p_lift = np.concatenate([p, [-worst + 1.0]])
    A_eq_l = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
    A_in_l = np.vstack([np.hstack([A_in, np.ones((q, 1))]),
                        np.concatenate([np.zeros(n), [1.0]])[None, :]])
    b_in_l = np.concatenate([b_in, [0.0]])
    H_l = eps * np.eye(n + 1)
    for penalty in (1.0, 1e4, 1e8):
        g_l = np.zeros(n + 1)
        g_l[n] = penalty * scale
        p_lift, _, _ = _active_set_loop(H_l, g_l, A_eq_l, A_in_l, b_in_l,
                                        p_lift, 20 * (n + q + 2))
        if p_lift[n] <= tol:
            return p_lift[:n]
    raise QpError("linearized constraints are infeasible "
                  f"(minimum violation {p_lift[n]:.3e})")


def qp_solve(H, g, A_eq=None, b_eq=None, A_in=None, b_in=None, max_cycles=None):
    """Minimize 0.5 p'Hp + g'p subject to A_eq p = b_eq and A_in p >= b_in.

    Inequalities are handled by a feasible-point primal active-set iteration
    over equality subproblems: blocking rows join the working set as steps
    hit them and negative-multiplier rows leave it.  Requires H positive
    definite.  Returns (p, lam_eq, lam_in): multipliers satisfy the
    stationarity convention H p + g = A_eq' lam_eq + A_in' lam_in with
    lam_in >= 0 and lam_in = 0 on inactive rows.
    """
    g = np.asarray(g, dtype=float).ravel()
    n = g.size
    H = np.asarray(H, dtype=float).reshape(n, n)
    H = 0.5 * (H + H.T)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    A_in = np.zeros((0, n)) if A_in is None else np.asarray(A_in, dtype=float).reshape(-1, n)
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float).ravel()
    if A_eq.shape[0] != b_eq.size or A_in.shape[0] != b_in.size:
        raise ValueError("constraint matrix/vector sizes disagree")

    # drop exactly duplicated equality rows so the KKT system stays regular;
    # multipliers are reported against the original rows (zeros on duplicates)
    n_eq_orig = A_eq.shape[0]
    keep = list(range(n_eq_orig))
    if n_eq_orig > 1:
        rows = {}
        for i in range(n_eq_orig):
            key = (A_eq[i].tobytes(), float(b_eq[i]).hex())
            rows.setdefault(key, i)
        keep = sorted(rows.values())
        if len(keep) < n_eq_orig:
            A_eq, b_eq = A_eq[keep], b_eq[keep]

    def expand_eq(lam_kept):
        if len(keep) == n_eq_orig:
            return lam_kept
        lam_full = np.zeros(n_eq_orig)
        lam_full[keep] = lam_kept
        return lam_full

    q = A_in.shape[0]
    if q == 0:
        p, lam_eq = _solve_eqp(H, g, A_eq, b_eq)
        return p, expand_eq(lam_eq), np.zeros(0)

    p = _phase1_point(A_eq, b_eq, A_in, b_in, n)
    if max_cycles is None:
        max_cycles = 10 * (n + q)
    p, lam_eq, lam_in = _active_set_loop(H, g, A_eq, A_in, b_in, p, max_cycles)
    return p, expand_eq(lam_eq), lam_in
