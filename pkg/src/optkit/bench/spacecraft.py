"""Planar spacecraft landing: direct transcription with forward-Euler defects.

State per timestep: [x, xdot, y, ydot, theta, thetadot]; controls [T, beta]
(thrust magnitude and gimbal angle).  The optimization variables stack all
states then all controls.  Equality constraints are the n_t - 1 forward-Euler
defect blocks followed by the initial- and final-condition blocks.
"""

import numpy as np

from ..problem import build_problem

MASS = 1.0e5                      # kg
LENGTH = 50.0                     # m, craft length (uniform rod)
GRAVITY = 9.807                   # m/s^2
INERTIA = MASS * LENGTH ** 2 / 12.0
T_MAX = 2.21e6                    # N
TOTAL_TIME = 16.0                 # s
GIMBAL_MAX = np.deg2rad(20.0)
X0_STATE = np.array([0.0, 0.0, 1000.0, -80.0, np.pi / 2.0, 0.0])
XF_STATE = np.zeros(6)

NX, NU = 6, 2


def dynamics(state, control):
    """Time derivative of the state under thrust T at gimbal angle beta."""
    T, beta = control
    theta = state[4]
    s, c = np.sin(beta + theta), np.cos(beta + theta)
    return np.array([
        state[1],
        -T / MASS * s,
        state[3],
        T / MASS * c - GRAVITY,
        state[5],
        -T * LENGTH / (2.0 * INERTIA) * np.sin(beta),
    ])


def dynamics_jacobians(state, control):
    """(df/dstate, df/dcontrol) for one timestep."""
    T, beta = control
    theta = state[4]
    s, c = np.sin(beta + theta), np.cos(beta + theta)
    A = np.zeros((NX, NX))
    A[0, 1] = 1.0
    A[1, 4] = -T / MASS * c
    A[2, 3] = 1.0
    A[3, 4] = -T / MASS * s
    A[4, 5] = 1.0
    B = np.zeros((NX, NU))
    B[1, 0] = -s / MASS
    B[1, 1] = -T / MASS * c
    B[3, 0] = c / MASS
    B[3, 1] = -T / MASS * s
    B[5, 0] = -LENGTH * np.sin(beta) / (2.0 * INERTIA)
    B[5, 1] = -T * LENGTH * np.cos(beta) / (2.0 * INERTIA)
    return A, B


def split_variables(z, n_t):
    X = z[:n_t * NX].reshape(n_t, NX)
    U = z[n_t * NX:].reshape(n_t, NU)
    return X, U


def pack_variables(X, U):
    return np.concatenate([np.asarray(X, dtype=float).ravel(),
                           np.asarray(U, dtype=float).ravel()])


def euler_trajectory(controls, dt, x0=X0_STATE):
    """Integrate the dynamics forward with the controls; returns the state history."""
    U = np.asarray(controls, dtype=float)
    X = np.empty((U.shape[0], NX))
    X[0] = x0
    for i in range(U.shape[0] - 1):
        X[i + 1] = X[i] + dynamics(X[i], U[i]) * dt
    return X


def spacecraft(n_t=10, weights=(1.0, 1.0, 1.0)):
    """Landing NLP: minimize thrust, gimbal, and spin magnitudes over the trajectory.

    weights = (w_thrust, w_gimbal, w_spin) multiply the three objective sums
    (all 1 by default).  The default guess interpolates the states linearly
    between the boundary conditions and holds a gravity-balancing hover thrust.
    """
    n_t = int(n_t)
    if n_t < 3:
        raise ValueError(f"spacecraft needs n_t >= 3 timesteps, got {n_t}")
    dt = TOTAL_TIME / n_t
    w_t, w_b, w_s = (float(w) for w in weights)
    n = n_t * (NX + NU)
    m = NX * (n_t - 1) + 2 * NX

    def obj(z):
        X, U = split_variables(z, n_t)
        return float(w_t * np.sum(U[:, 0] ** 2) + w_b * np.sum(U[:, 1] ** 2)
                     + w_s * np.sum(X[:, 5] ** 2))

    def grad(z):
        X, U = split_variables(z, n_t)
        gX = np.zeros_like(X)
        gX[:, 5] = 2.0 * w_s * X[:, 5]
        gU = np.empty_like(U)
        gU[:, 0] = 2.0 * w_t * U[:, 0]
        gU[:, 1] = 2.0 * w_b * U[:, 1]
        return pack_variables(gX, gU)

    def con(z):
        X, U = split_variables(z, n_t)
        out = np.empty(m)
        for i in range(n_t - 1):
            out[NX * i:NX * (i + 1)] = X[i + 1] - X[i] - dynamics(X[i], U[i]) * dt
        out[NX * (n_t - 1):NX * n_t] = X[0] - X0_STATE
        out[NX * n_t:] = X[-1] - XF_STATE
        return out

    def jac(z):
        X, U = split_variables(z, n_t)
        J = np.zeros((m, n))
        eye = np.eye(NX)
        u_off = n_t * NX
        for i in range(n_t - 1):
            A, B = dynamics_jacobians(X[i], U[i])
            rows = slice(NX * i, NX * (i + 1))
            J[rows, NX * i:NX * (i + 1)] = -eye - A * dt
            J[rows, NX * (i + 1):NX * (i + 2)] = eye
            J[rows, u_off + NU * i:u_off + NU * (i + 1)] = -B * dt
        J[NX * (n_t - 1):NX * n_t, 0:NX] = eye
        J[NX * n_t:, NX * (n_t - 1):NX * n_t] = eye
        return J

    # straight-line state guess with a gravity-balancing hover control
    frac = np.linspace(0.0, 1.0, n_t)[:, None]
    X_guess = (1.0 - frac) * X0_STATE[None, :] + frac * XF_STATE[None, :]
    U_guess = np.column_stack([np.full(n_t, MASS * GRAVITY), np.zeros(n_t)])
    z0 = pack_variables(X_guess, U_guess)

    xl = np.full(n, -np.inf)
    xu = np.full(n, np.inf)
    xl[n_t * NX + 0::NU] = 0.4 * T_MAX
    xu[n_t * NX + 0::NU] = T_MAX
    xl[n_t * NX + 1::NU] = -GIMBAL_MAX
    xu[n_t * NX + 1::NU] = GIMBAL_MAX

    return build_problem(f"spacecraft_{n_t}", z0, obj=obj, grad=grad, con=con, jac=jac,
                         xl=xl, xu=xu, cl=np.zeros(m), cu=np.zeros(m))
