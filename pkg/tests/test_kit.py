import numpy as np
import pytest
from numpy.testing import assert_allclose

from optkit import (HessianApprox, MeritSpec, QpError, hessian_update,
                    line_search, merit_value, qp_solve)

VARIANTS = ("broyden", "sr1", "bfgs", "dfp")


# ---------------------------------------------------------------------------
# Hessian updates
# ---------------------------------------------------------------------------

def test_bfgs_noop_when_secant_already_holds():
    H = HessianApprox(n=2, variant="bfgs")
    skipped = H.update(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert not skipped
    assert_allclose(H.B, np.eye(2), atol=1e-15)


def test_sr1_rank_one_example():
    H = HessianApprox(n=2, variant="sr1")
    skipped = H.update(np.array([1.0, 0.0]), np.array([2.0, 0.0]))
    assert not skipped
    assert_allclose(H.B, [[2.0, 0.0], [0.0, 1.0]], atol=1e-15)


def test_sr1_skips_degenerate_denominator():
    H = HessianApprox(n=2, variant="sr1")
    d = np.array([1.0, 2.0])
    _, skipped = hessian_update(H, d, H.B @ d)  # w == Bd exactly
    assert skipped
    assert_allclose(H.B, np.eye(2))


def test_bfgs_skips_negative_curvature():
    H = HessianApprox(n=2, variant="bfgs")
    skipped = H.update(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))  # w'd = -1
    assert skipped
    assert_allclose(H.B, np.eye(2))


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("n", [2, 5, 20])
def test_secant_condition_random_trials(variant, n):
    # 100 trials per (variant, n): every applied update satisfies B+ d = w
    rng = np.random.default_rng(1000 + n)
    applied = 0
    for _ in range(100):
        H = HessianApprox(n=n, variant=variant)
        M = rng.normal(size=(n, n))
        H.B = M @ M.T + n * np.eye(n)  # SPD start
        d = rng.normal(size=n)
        w = rng.normal(size=n)
        if variant in ("bfgs", "dfp") and w @ d <= 0:
            w = w - 2.0 * (w @ d) * d / (d @ d)  # flip to positive curvature
        skipped = H.update(d, w)
        if skipped:
            continue
        applied += 1
        resid = np.linalg.norm(H.B @ d - w)
        bound = 1e-9 * (np.linalg.norm(H.B) * np.linalg.norm(d) + np.linalg.norm(w))
        assert resid <= bound
        if variant != "broyden":
            asym = np.max(np.abs(H.B - H.B.T))
            assert asym <= 1e-12 * max(np.max(np.abs(H.B)), 1e-300)
    assert applied >= 90


def test_bfgs_stays_positive_definite():
    rng = np.random.default_rng(7)
    H = HessianApprox(n=5, variant="bfgs")
    for _ in range(50):
        d = rng.normal(size=5)
        d /= np.linalg.norm(d)
        w = rng.normal(size=5)
        w /= np.linalg.norm(w)
        if w @ d <= 1e-3:
            continue
        H.update(d, w)
        assert np.min(np.linalg.eigvalsh(H.B)) > 0.0


# ---------------------------------------------------------------------------
# line searches
# ---------------------------------------------------------------------------

def test_armijo_accepts_unit_step():
    # f(x)=x^2 at x=1 along p=-1: f(0)=0 <= 1 - 2e-4, first trial wins
    phi = lambda a: (1.0 - a) ** 2
    res = line_search("armijo", phi, f0=1.0, slope0=-2.0)
    assert res.alpha == 1.0 and res.converged
    assert res.n_f_evals == 1


def test_armijo_backtracks_enumerated_sequence():
    # f(x)=x^2 at x=1 along p=-4 with c1=0.5: trials 1 (f=9), 0.5 (f=1), 0.25 (f=0)
    phi = lambda a: (1.0 - 4.0 * a) ** 2
    res = line_search("armijo", phi, f0=1.0, slope0=-8.0, c1=0.5, tau=0.5)
    assert res.alpha == 0.25
    assert res.f_new == 0.0
    assert res.n_f_evals == 3


def test_ascent_direction_rejected():
    with pytest.raises(ValueError):
        line_search("armijo", lambda a: a, f0=0.0, slope0=1.0)


def test_armijo_exhaustion_returns_best():
    phi = lambda a: 1.0 + a  # never decreases
    res = line_search("armijo", phi, f0=1.0, slope0=-1.0, max_iters=5)
    assert not res.converged
    assert res.alpha > 0.0


def test_wolfe_satisfies_strong_curvature():
    # phi(a) = (a-1)^2 from a=0: slope0=-2; strong Wolfe at the minimizer
    phi = lambda a: (a - 1.0) ** 2
    dphi = lambda a: 2.0 * (a - 1.0)
    res = line_search("wolfe", phi, dphi, f0=1.0, slope0=-2.0, c2=0.9)
    assert res.converged
    assert abs(dphi(res.alpha)) <= 0.9 * 2.0
    assert phi(res.alpha) <= 1.0 + 1e-4 * res.alpha * (-2.0)


def test_wolfe_zooms_past_too_long_step():
    # minimum at 0.05: alpha=1 fails Armijo, zoom must recover a valid step
    phi = lambda a: 100.0 * (a - 0.05) ** 2
    dphi = lambda a: 200.0 * (a - 0.05)
    res = line_search("wolfe", phi, dphi, f0=phi(0.0), slope0=dphi(0.0))
    assert res.converged
    assert abs(dphi(res.alpha)) <= 0.9 * abs(dphi(0.0))


# ---------------------------------------------------------------------------
# merit functions
# ---------------------------------------------------------------------------

def test_merit_feasible_returns_objective():
    c = np.array([0.5])
    lo, up = np.array([0.0]), np.array([1.0])
    for kind in ("l1", "linf", "l2sq", "quadratic_penalty", "lagrangian", "augmented_lagrangian"):
        spec = MeritSpec(kind=kind, rho=10.0, lam=np.zeros(1))
        assert merit_value(spec, 3.25, c, lo, up) == 3.25


def test_merit_l1_and_quadratic_values():
    # equality c=0 with bound 1, rho=10: violation 1
    c = np.array([0.0])
    lo = up = np.array([1.0])
    assert merit_value(MeritSpec("l1", rho=10.0), 1.0, c, lo, up) == 11.0
    assert merit_value(MeritSpec("quadratic_penalty", rho=10.0), 1.0, c, lo, up) == 6.0


def test_merit_lagrangian_uses_nearest_bound():
    c = np.array([2.0])
    lo, up = np.array([0.0]), np.array([1.0])
    spec = MeritSpec("lagrangian", rho=0.0, lam=np.array([3.0]))
    # residual to the nearest bound is c - 1 = 1
    assert merit_value(spec, 5.0, c, lo, up) == 5.0 - 3.0
    aug = MeritSpec("augmented_lagrangian", rho=4.0, lam=np.array([3.0]))
    assert merit_value(aug, 5.0, c, lo, up) == 5.0 - 3.0 + 2.0


def test_merit_rejects_bad_rho():
    with pytest.raises(ValueError):
        MeritSpec("l1", rho=-1.0)


# ---------------------------------------------------------------------------
# QP solver
# ---------------------------------------------------------------------------

def test_qp_unconstrained_newton_step():
    p, lam_eq, lam_in = qp_solve(np.eye(2), np.array([-1.0, 0.0]))
    assert_allclose(p, [1.0, 0.0], atol=1e-12)
    assert lam_eq.size == 0 and lam_in.size == 0


def test_qp_single_equality():
    p, lam_eq, _ = qp_solve(np.eye(2), np.zeros(2), A_eq=[[1.0, 1.0]], b_eq=[1.0])
    assert_allclose(p, [0.5, 0.5], atol=1e-12)
    # stationarity H p + g = A_eq' lam gives lam = 1/2
    assert_allclose(lam_eq, [0.5], atol=1e-12)


def test_qp_active_inequality_multiplier():
    p, _, lam_in = qp_solve(np.eye(2), np.array([-2.0, 0.0]),
                            A_in=[[-1.0, 0.0]], b_in=[0.0])
    assert_allclose(p, [0.0, 0.0], atol=1e-12)
    assert_allclose(lam_in, [2.0], atol=1e-9)


def test_qp_inactive_inequality_ignored():
    p, _, lam_in = qp_solve(np.eye(2), np.array([-1.0, 0.0]),
                            A_in=[[1.0, 0.0]], b_in=[-5.0])
    assert_allclose(p, [1.0, 0.0], atol=1e-12)
    assert_allclose(lam_in, [0.0])


def test_qp_not_positive_definite_raises():
    with pytest.raises(QpError):
        qp_solve(np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([1.0, 1.0]))


def test_qp_inconsistent_equalities_raise():
    with pytest.raises(QpError):
        qp_solve(np.eye(2), np.zeros(2),
                 A_eq=[[1.0, 0.0], [1.0, 0.0]], b_eq=[0.0, 1.0])


def test_qp_matches_grid_enumeration():
    # compare against brute-force minimization over a box grid, n <= 3
    rng = np.random.default_rng(21)
    for n in (2, 3):
        for _ in range(20):
            M = rng.normal(size=(n, n))
            H = M @ M.T + n * np.eye(n)
            g = rng.normal(size=n)
            lo = -np.ones(n)
            hi = np.ones(n)
            A_in = np.vstack([np.eye(n), -np.eye(n)])
            b_in = np.concatenate([lo, -hi])
            p, _, _ = qp_solve(H, g, A_in=A_in, b_in=b_in)

            axes = [np.linspace(lo[i], hi[i], 41) for i in range(n)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
            vals = 0.5 * np.einsum("ij,jk,ik->i", grid, H, grid) + grid @ g
            best = grid[np.argmin(vals)]
            obj = lambda z: 0.5 * z @ H @ z + g @ z
            spacing = (hi[0] - lo[0]) / 40.0
            assert obj(p) <= obj(best) + 1e-9
            assert np.max(np.abs(p - best)) <= spacing + 1e-9


def test_qp_kkt_conditions_random_fuzz():
    # every solved random QP satisfies stationarity, feasibility,
    # complementarity, and dual feasibility; inequality-only problems are
    # feasible by construction and must never error
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(150):
        n = int(rng.integers(1, 9))
        M = rng.normal(size=(n, n))
        H = M @ M.T + 0.5 * np.eye(n)
        g = rng.normal(size=n) * rng.uniform(0.1, 10.0)
        q = int(rng.integers(0, 2 * n + 1))
        A_in = rng.normal(size=(q, n)) if q else None
        z = rng.normal(size=n)
        b_in = (A_in @ z - rng.uniform(0.0, 2.0, q)) if q else None
        p, _, li = qp_solve(H, g, A_in=A_in, b_in=b_in)
        r = H @ p + g - (A_in.T @ li if q else 0.0)
        worst = max(worst, float(np.max(np.abs(r))))
        if q:
            slack = A_in @ p - b_in
            assert np.min(slack) >= -1e-7
            assert np.min(li) >= 0.0
            worst = max(worst, float(np.max(np.abs(li * slack))))
    assert worst <= 1e-6


def test_qp_vertex_swap_under_bad_scaling():
    # anisotropic rows force the working set to trade a bound for a constraint
    H = np.eye(2)
    g = np.array([500.0, 500.0])
    A_eq = np.array([[0.1, 10.0]])
    b_eq = np.array([-504.0])
    A_in = np.array([[0.1, -10.0], [1.0, 0.0]])
    b_in = np.array([-494.0, -5000.0])
    p, lam_eq, lam_in = qp_solve(H, g, A_eq, b_eq, A_in, b_in)
    resid = H @ p + g - A_eq.T @ lam_eq - A_in.T @ lam_in
    assert np.max(np.abs(resid)) <= 1e-7
    assert np.all(A_in @ p - b_in >= -1e-7)
    assert np.all(lam_in >= 0.0)
