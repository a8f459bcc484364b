"""Canonical problem container, scaling, evaluation plumbing and derivative checks.

A problem is a bounded NLP

    minimize f(x)  subject to  cl <= c(x) <= cu,  xl <= x <= xu,

held in an immutable :class:`ProblemSpec`.  Solvers never touch the spec
directly; they evaluate through a :class:`ScaledView`, which applies the
diagonal scaling, counts callback invocations, falls back to forward finite
differences for missing derivatives, and (optionally) records or replays
every evaluation.
"""

import numpy as np
from dataclasses import dataclass, field, replace

SQRT_EPS = float(np.sqrt(np.finfo(float).eps))

EVAL_KINDS = ("obj", "grad", "con", "jac", "obj_hess", "lag_hess")

# counter bucket per evaluation kind (both Hessian kinds share one counter)
_COUNTER_OF = {
    "obj": "n_obj",
    "grad": "n_grad",
    "con": "n_con",
    "jac": "n_jac",
    "obj_hess": "n_hess",
    "lag_hess": "n_hess",
}


class ProblemError(ValueError):
    """Invalid problem definition (dimensions, bounds, scalers, callbacks)."""


class EvaluationError(RuntimeError):
    """A callback failed or returned non-finite values.

    Carries the evaluation kind and the offending iterate for context.
    """

    def __init__(self, message, kind=None, x=None):
        super().__init__(message)
        self.kind = kind
        self.x = None if x is None else np.array(x, dtype=float)


def _vector(value, n, name):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.ndim != 1 or v.size != n:
        raise ProblemError(f"{name} must be a vector of length {n}, got shape {v.shape}")
    return v.copy()


@dataclass(frozen=True)
class Bounds:
    """Elementwise lower/upper bounds; entries may be -inf/+inf."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != up.shape or lo.ndim != 1:
            raise ProblemError(f"bound vectors must be 1-D with equal length, got {lo.shape} and {up.shape}")
        if np.any(lo > up):
            bad = int(np.argmax(lo > up))
            raise ProblemError(f"lower bound exceeds upper bound at index {bad}: {lo[bad]} > {up[bad]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def unbounded(cls, n):
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def size(self):
        return self.lower.size

    def equality_mask(self):
        return self.lower == self.upper


def violation(c, lower, upper):
    """Nonnegative violation of two-sided bounds, per component."""
    c = np.asarray(c, dtype=float)
    return np.maximum(lower - c, 0.0) + np.maximum(c - upper, 0.0)


def signed_violation(c, lower, upper):
    """Signed violation: negative below the lower bound, positive above the upper.

    This is the gradient factor of 0.5*||violation||^2 with respect to c.
    """
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    below = c < lower
    above = c > upper
    out[below] = (c - lower)[below]
    out[above] = (c - upper)[above]
    return out


@dataclass(frozen=True)
class EvalCallbacks:
    """User callbacks for the problem functions; missing derivatives fall back to FD.

    All callbacks take the unscaled variable vector. ``lag_hessian`` takes
    ``(x, lam)`` where the Lagrangian is ``f(x) - lam @ c(x)``.
    """

    objective: callable
    gradient: callable = None
    constraints: callable = None
    jacobian: callable = None
    obj_hessian: callable = None
    lag_hessian: callable = None


@dataclass
class EvalCounters:
    """Number of underlying callback invocations, one bucket per kind."""

    n_obj: int = 0
    n_grad: int = 0
    n_con: int = 0
    n_jac: int = 0
    n_hess: int = 0

    def bump(self, kind):
        name = _COUNTER_OF[kind]
        setattr(self, name, getattr(self, name) + 1)

    def copy(self):
        return replace(self)

    def as_dict(self):
        return {
            "n_obj": self.n_obj,
            "n_grad": self.n_grad,
            "n_con": self.n_con,
            "n_jac": self.n_jac,
            "n_hess": self.n_hess,
        }


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Validated, immutable problem definition. Build with :func:`build_problem`."""

    name: str
    n: int
    m: int
    x0: np.ndarray
    var_bounds: Bounds
    con_bounds: Bounds
    x_scaler: np.ndarray
    f_scaler: float
    c_scaler: np.ndarray
    callbacks: EvalCallbacks

    def equality_mask(self):
        return self.con_bounds.equality_mask()


def build_problem(name, x0, obj, *, grad=None, con=None, jac=None,
                  obj_hess=None, lag_hess=None, m=None,
                  xl=None, xu=None, cl=None, cu=None,
                  x_scaler=None, f_scaler=1.0, c_scaler=None):
    """Validate and assemble a :class:`ProblemSpec`.

    Unspecified bounds default to +-inf and unspecified scalers to 1.
    An equality constraint is encoded as ``cl[j] == cu[j]``.  ``m`` is
    inferred from the constraint bounds when given; it must be passed
    explicitly if ``con`` is supplied without bounds.
    """
    if not callable(obj):
        raise ProblemError("objective callback must be callable")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x0.ndim != 1 or x0.size == 0:
        raise ProblemError(f"x0 must be a nonempty vector, got shape {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ProblemError("x0 must be finite")
    n = x0.size

    def expand(value, size, default, label):
        if value is None:
            return np.full(size, default, dtype=float)
        v = np.asarray(value, dtype=float)
        if v.ndim == 0:
            return np.full(size, float(v))
        return _vector(v, size, label)

    var_bounds = Bounds(expand(xl, n, -np.inf, "xl"), expand(xu, n, np.inf, "xu"))

    if m is None:
        if cl is not None:
            m = np.atleast_1d(np.asarray(cl, dtype=float)).size
        elif cu is not None:
            m = np.atleast_1d(np.asarray(cu, dtype=float)).size
        elif con is None:
            m = 0
        else:
            raise ProblemError("pass m= (or constraint bounds) when supplying a constraint callback")
    m = int(m)
    if m < 0:
        raise ProblemError("m must be nonnegative")
    if m > 0 and con is None:
        raise ProblemError(f"m={m} constraints declared but no constraint callback given")
    con_bounds = Bounds(expand(cl, m, -np.inf, "cl"), expand(cu, m, np.inf, "cu"))

    def scaler_vec(value, size, label):
        s = expand(value, size, 1.0, label)
        if not np.all(np.isfinite(s)) or np.any(s <= 0.0):
            raise ProblemError(f"{label} entries must be strictly positive and finite")
        return s

    x_scaler = scaler_vec(x_scaler, n, "x_scaler")
    c_scaler = scaler_vec(c_scaler, m, "c_scaler")
    f_scaler = float(f_scaler)
    if not np.isfinite(f_scaler) or f_scaler <= 0.0:
        raise ProblemError("f_scaler must be strictly positive and finite")

    callbacks = EvalCallbacks(objective=obj, gradient=grad, constraints=con,
                              jacobian=jac, obj_hessian=obj_hess, lag_hessian=lag_hess)
    return ProblemSpec(name=str(name), n=n, m=m, x0=x0,
                       var_bounds=var_bounds, con_bounds=con_bounds,
                       x_scaler=x_scaler, f_scaler=f_scaler, c_scaler=c_scaler,
                       callbacks=callbacks)


# ---------------------------------------------------------------------------
# Raw (unscaled) evaluation helpers
# ---------------------------------------------------------------------------

def _coerce_result(kind, value, n, m):
    """Coerce a callback result to its canonical shape; raises on mismatch."""
    if kind == "obj":
        v = np.asarray(value, dtype=float)
        if v.size != 1:
            raise EvaluationError(f"objective returned shape {v.shape}, expected a scalar", kind=kind)
        return float(v.reshape(()))
    shapes = {"grad": (n,), "con": (m,), "jac": (m, n),
              "obj_hess": (n, n), "lag_hess": (n, n)}
    want = shapes[kind]
    v = np.asarray(value, dtype=float)
    if v.shape != want:
        v = v.reshape(want) if v.size == int(np.prod(want)) else v
    if v.shape != want:
        raise EvaluationError(f"{kind} callback returned shape {v.shape}, expected {want}", kind=kind)
    return v.astype(float, copy=True)


def fd_step(x):
    """Forward-difference steps h_i = sqrt(eps) * max(1, |x_i|)."""
    return SQRT_EPS * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def _fd_columns(func, x, base):
    """Forward-difference d(func)/dx column by column from a known base value."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    base = np.asarray(base, dtype=float)
    cols = np.empty((base.size, x.size))
    for i in range(x.size):
        xp = x.copy()
        xp[i] += h[i]
        fp = np.asarray(func(xp), dtype=float)
        cols[:, i] = (fp.ravel() - base.ravel()) / h[i]
    return cols


def fd_derivative(spec, kind, x, lam=None):
    """Forward-difference derivative from the raw callbacks (verification path).

    Supports kind in {grad, jac, obj_hess, lag_hess}.  This routine calls the
    user callbacks directly and performs no counting or recording; solvers get
    their FD fallback through :class:`ScaledView` instead.
    """
    x = _vector(x, spec.n, "x")
    cb = spec.callbacks

    def f(y):
        v = float(np.asarray(cb.objective(y), dtype=float).reshape(()))
        if not np.isfinite(v):
            raise EvaluationError("objective non-finite at FD probe", kind="obj", x=y)
        return v

    def c(y):
        v = _coerce_result("con", cb.constraints(y), spec.n, spec.m)
        if not np.all(np.isfinite(v)):
            raise EvaluationError("constraints non-finite at FD probe", kind="con", x=y)
        return v

    if kind == "grad":
        return _fd_columns(f, x, f(x)).ravel()
    if kind == "jac":
        return _fd_columns(c, x, c(x))
    if kind in ("obj_hess", "lag_hess"):
        if lam is None:
            lam = np.zeros(spec.m)
        lam = _vector(lam, spec.m, "lam") if spec.m else np.zeros(0)

        def grad_lag(y):
            g = (_coerce_result("grad", cb.gradient(y), spec.n, spec.m)
                 if cb.gradient is not None else _fd_columns(f, y, f(y)).ravel())
            if spec.m and np.any(lam != 0.0):
                J = (_coerce_result("jac", cb.jacobian(y), spec.n, spec.m)
                     if cb.jacobian is not None else _fd_columns(c, y, c(y)))
                g = g - J.T @ lam
            return g

        H = _fd_columns(grad_lag, x, grad_lag(x))
        return 0.5 * (H + H.T)
    raise ProblemError(f"fd_derivative does not support kind={kind!r}")


# ---------------------------------------------------------------------------
# Scaled evaluation view
# ---------------------------------------------------------------------------

class ScaledView:
    """Solver-facing view of a problem: scaled, counted, replayable.

    Scaling conventions (s = scaler, elementwise):
        x_s = x_scaler * x          f_s = f_scaler * f        c_s = c_scaler * c
        grad_s[i]  = (f_scaler / x_scaler[i]) * grad[i]
        jac_s[j,i] = (c_scaler[j] / x_scaler[i]) * jac[j,i]
        hess_s[i,k] = (f_scaler / (x_scaler[i] * x_scaler[k])) * hess[i,k]

    Multipliers passed to :meth:`lag_hess` are scaled-space multipliers; the
    raw multiplier is ``lam = (c_scaler / f_scaler) * lam_scaled``.

    When ``record`` is given (a RunRecord, or True to create one), every raw
    callback invocation is appended as an evaluation event.  When ``hot_start``
    is given (a RunRecord or HotStartCache from a compatible prior run),
    evaluations are replayed sequentially from it until the first mismatch.
    """

    def __init__(self, spec, record=None, hot_start=None, allow_fd=True):
        self.spec = spec
        self.allow_fd = bool(allow_fd)
        self.counters = EvalCounters()
        self.replayed = EvalCounters()
        self._memo = {}  # kind -> (x, lam, result): most recent raw evaluation

        # local import: recording depends on problem types
        from .recording import RunRecord, HotStartCache
        if record is True:
            record = RunRecord.for_problem(spec)
        self.record = record
        if hot_start is not None and not isinstance(hot_start, HotStartCache):
            hot_start = HotStartCache(hot_start, spec)
        self._cache = hot_start

    # -- scaled problem data -------------------------------------------------
    @property
    def n(self):
        return self.spec.n

    @property
    def m(self):
        return self.spec.m

    @property
    def name(self):
        return self.spec.name

    @property
    def x0(self):
        return self.spec.x_scaler * self.spec.x0

    @property
    def var_lower(self):
        return self.spec.x_scaler * self.spec.var_bounds.lower

    @property
    def var_upper(self):
        return self.spec.x_scaler * self.spec.var_bounds.upper

    @property
    def con_lower(self):
        return self.spec.c_scaler * self.spec.con_bounds.lower

    @property
    def con_upper(self):
        return self.spec.c_scaler * self.spec.con_bounds.upper

    def scale_x(self, x):
        return self.spec.x_scaler * np.asarray(x, dtype=float)

    def unscale_x(self, xs):
        return np.asarray(xs, dtype=float) / self.spec.x_scaler

    def unscale_f(self, fs):
        return float(fs) / self.spec.f_scaler

    def unscale_lam(self, lam_s):
        return np.asarray(lam_s, dtype=float) * self.spec.c_scaler / self.spec.f_scaler

    # -- raw counted layer ----------------------------------------------------
    def _memo_get(self, kind, x, lam=None):
        hit = self._memo.get(kind)
        if hit is None:
            return None
        mx, mlam, res = hit
        if mx.shape != x.shape or not np.array_equal(mx, x):
            return None
        if (mlam is None) != (lam is None):
            return None
        if mlam is not None and not np.array_equal(mlam, lam):
            return None
        return res

    def _invoke(self, kind, x, lam=None):
        """One raw callback invocation: replay if possible, else call and count."""
        if self._cache is not None:
            hit, result = self._cache.try_replay(kind, x, lam)
            if hit:
                self.replayed.bump(kind)
                self._memo[kind] = (x.copy(), None if lam is None else lam.copy(), result)
                if self.record is not None:
                    self.record.append_eval(kind, x, lam, result)
                return result

        cb = self.spec.callbacks
        fn = {"obj": cb.objective, "grad": cb.gradient, "con": cb.constraints,
              "jac": cb.jacobian, "obj_hess": cb.obj_hessian, "lag_hess": cb.lag_hessian}[kind]
        try:
            raw = fn(x, lam) if kind == "lag_hess" else fn(x)
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"{kind} callback raised {exc!r} at x={x}", kind=kind, x=x) from exc
        self.counters.bump(kind)
        result = _coerce_result(kind, raw, self.spec.n, self.spec.m)
        if not np.all(np.isfinite(result)):
            raise EvaluationError(f"{kind} callback returned non-finite values at x={x}", kind=kind, x=x)
        self._memo[kind] = (x.copy(), None if lam is None else lam.copy(), result)
        if self.record is not None:
            self.record.append_eval(kind, x, lam, result)
        return result

    def _base_value(self, kind, x):
        """Base value for an FD stencil, reusing the last evaluation at this x."""
        hit = self._memo_get(kind, x)
        if hit is not None:
            return hit
        return self._invoke(kind, x)

    def _raw(self, kind, x, lam=None):
        """Raw-space result for any kind, dispatching to FD when needed."""
        cb = self.spec.callbacks
        have = {"obj": cb.objective, "grad": cb.gradient, "con": cb.constraints,
                "jac": cb.jacobian, "obj_hess": cb.obj_hessian, "lag_hess": cb.lag_hessian}[kind]
        if have is not None:
            return self._invoke(kind, x, lam)
        if kind in ("obj", "con"):
            raise EvaluationError(f"no {kind} callback available", kind=kind, x=x)
        if not self.allow_fd:
            raise EvaluationError(f"no {kind} callback and finite differencing is disabled", kind=kind, x=x)

        if kind == "grad":
            base = self._base_value("obj", x)
            return _fd_columns(lambda y: self._invoke("obj", y), x, base).ravel()
        if kind == "jac":
            base = self._base_value("con", x)
            return _fd_columns(lambda y: self._invoke("con", y), x, base)

        # Hessians: difference the (FD or analytic) gradient of the Lagrangian.
        if lam is None or self.spec.m == 0:
            lam_use = None
        else:
            lam_use = lam if np.any(lam != 0.0) else None

        def grad_lag(y):
            g = self._raw("grad", y)
            if lam_use is not None:
                g = g - self._raw("jac", y).T @ lam_use
            return g

        H = _fd_columns(grad_lag, x, grad_lag(x))
        return 0.5 * (H + H.T)

    # -- scaled entry points ----------------------------------------------------
    def obj(self, xs):
        return self.spec.f_scaler * self._raw("obj", self.unscale_x(xs))

    def grad(self, xs):
        g = self._raw("grad", self.unscale_x(xs))
        return (self.spec.f_scaler / self.spec.x_scaler) * g

    def con(self, xs):
        return self.spec.c_scaler * self._raw("con", self.unscale_x(xs))

    def jac(self, xs):
        J = self._raw("jac", self.unscale_x(xs))
        return (self.spec.c_scaler[:, None] / self.spec.x_scaler[None, :]) * J

    def obj_hess(self, xs):
        H = self._raw("obj_hess", self.unscale_x(xs))
        return self.spec.f_scaler * H / np.outer(self.spec.x_scaler, self.spec.x_scaler)

    def lag_hess(self, xs, lam_s):
        lam_s = np.asarray(lam_s, dtype=float)
        lam = self.unscale_lam(lam_s) if self.spec.m else np.zeros(0)
        H = self._raw("lag_hess", self.unscale_x(xs), lam)
        return self.spec.f_scaler * H / np.outer(self.spec.x_scaler, self.spec.x_scaler)

    def evaluate(self, kind, xs, lam=None):
        """Generic scaled evaluation; ``lam`` only applies to kind='lag_hess'."""
        if kind not in EVAL_KINDS:
            raise ProblemError(f"unknown evaluation kind {kind!r}; expected one of {EVAL_KINDS}")
        if kind == "lag_hess":
            if lam is None and self.spec.m > 0:
                raise ProblemError("lag_hess requires multipliers")
            return self.lag_hess(xs, np.zeros(self.spec.m) if lam is None else lam)
        if lam is not None:
            raise ProblemError(f"multipliers only apply to kind='lag_hess', not {kind!r}")
        return getattr(self, kind)(xs)

    def feasibility(self, xs):
        """Max scaled constraint violation at a scaled iterate (0 when m=0)."""
        if self.spec.m == 0:
            return 0.0
        v = violation(self.con(xs), self.con_lower, self.con_upper)
        return float(np.max(v)) if v.size else 0.0

    def has_callback(self, kind):
        cb = self.spec.callbacks
        return {"obj": cb.objective, "grad": cb.gradient, "con": cb.constraints,
                "jac": cb.jacobian, "obj_hess": cb.obj_hessian,
                "lag_hess": cb.lag_hessian}[kind] is not None


# ---------------------------------------------------------------------------
# Derivative verification
# ---------------------------------------------------------------------------

@dataclass
class DerivativeCheck:
    """Relative errors between analytic and finite-difference first derivatives."""

    x: np.ndarray
    grad_errors: np.ndarray = None        # (n,) or None if no analytic gradient
    jac_errors: np.ndarray = None         # (m, n) or None if no analytic jacobian / m=0
    tol: float = 1e-4
    flagged: list = field(default_factory=list)   # (section, index, error)

    @property
    def max_rel_error(self):
        worst = 0.0
        for arr in (self.grad_errors, self.jac_errors):
            if arr is not None and arr.size:
                worst = max(worst, float(np.max(arr)))
        return worst

    @property
    def ok(self):
        return not self.flagged

    def __str__(self):
        lines = ["derivative check"]
        if self.grad_errors is not None:
            lines.append(f"  gradient: max relative error {np.max(self.grad_errors):.3e} over {self.grad_errors.size} entries")
        if self.jac_errors is not None:
            lines.append(f"  jacobian: max relative error {np.max(self.jac_errors):.3e} over {self.jac_errors.size} entries")
        if self.flagged:
            lines.append(f"  FLAGGED {len(self.flagged)} entries above {self.tol:g}:")
            for section, index, err in self.flagged[:20]:
                lines.append(f"    {section}[{index}]: {err:.3e}")
        else:
            lines.append(f"  all entries within {self.tol:g}")
        return "\n".join(lines)


def check_first_derivatives(spec, x=None, tol=1e-4):
    """Compare analytic gradient/jacobian callbacks against forward differences.

    Relative error is |analytic - fd| / max(1, |analytic|) per entry; entries
    above ``tol`` are flagged.  Requires at least one analytic first-derivative
    callback.
    """
    cb = spec.callbacks
    if cb.gradient is None and cb.jacobian is None:
        raise ProblemError("no analytic first-derivative callbacks to check")
    x = spec.x0.copy() if x is None else _vector(x, spec.n, "x")

    report = DerivativeCheck(x=x, tol=tol)
    if cb.gradient is not None:
        g = _coerce_result("grad", cb.gradient(x), spec.n, spec.m)
        g_fd = fd_derivative(spec, "grad", x)
        report.grad_errors = np.abs(g - g_fd) / np.maximum(1.0, np.abs(g))
        for i in np.flatnonzero(report.grad_errors > tol):
            report.flagged.append(("grad", int(i), float(report.grad_errors[i])))
    if cb.jacobian is not None and spec.m > 0:
        J = _coerce_result("jac", cb.jacobian(x), spec.n, spec.m)
        J_fd = fd_derivative(spec, "jac", x)
        report.jac_errors = np.abs(J - J_fd) / np.maximum(1.0, np.abs(J))
        for j, i in zip(*np.nonzero(report.jac_errors > tol)):
            report.flagged.append(("jac", (int(j), int(i)), float(report.jac_errors[j, i])))
    return report
