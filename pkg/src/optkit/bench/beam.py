"""Cantilever beam thickness optimization: minimum compliance at fixed volume.

Euler-Bernoulli beam with a rectangular b x h_i cross section, discretized
with Hermite-cubic elements (two DOF per node: deflection and rotation), root
clamped, unit downward tip load.  The objective is the compliance F @ D with
K(h) D = F; its gradient uses the self-adjoint formula
dC/dh_i = -D @ (dK/dh_i) @ D, where each element block scales as h_i^3.
"""

import numpy as np

from ..problem import build_problem

LENGTH = 1.0       # beam length L (m)
BREADTH = 0.1      # cross-section breadth b (m)
VOLUME = 0.01      # prescribed volume V0 (m^3)
E_MOD = 1.0        # modulus of elasticity (N/m^2)
TIP_LOAD = -1.0    # concentrated tip force (N)

# keep K(h) positive definite while iterates move; the optimal tip thickness
# stays orders of magnitude above this floor
H_MIN = 1e-4


def element_stiffness(le):
    """4x4 Hermite-cubic bending stiffness for unit EI over element length le."""
    l2, l3 = le * le, le * le * le
    return np.array([
        [12.0 / l3, 6.0 / l2, -12.0 / l3, 6.0 / l2],
        [6.0 / l2, 4.0 / le, -6.0 / l2, 2.0 / le],
        [-12.0 / l3, -6.0 / l2, 12.0 / l3, -6.0 / l2],
        [6.0 / l2, 2.0 / le, -6.0 / l2, 4.0 / le],
    ])


class CantileverModel:
    """Assembles K(h), solves for displacements, and forms adjoint gradients.

    The tip-loaded cantilever is statically determinate and the exact
    deflection is cubic within each element, so the Hermite FE solution is
    exact and the compliance F @ D equals the bending-energy integral
    sum_e (1/(E I_e)) * int (L-x)^2 dx.  The compliance callbacks use that
    closed form: it matches the K-solve to ~1e-11 relative but is free of the
    linear-solve roundoff that otherwise drowns forward-difference checks.
    """

    def __init__(self, n_el):
        n_el = int(n_el)
        if n_el < 2:
            raise ValueError(f"cantilever needs at least 2 elements, got {n_el}")
        self.n_el = n_el
        self.le = LENGTH / n_el
        self.ndof = 2 * n_el  # clamped root node removed
        self.k_unit = element_stiffness(self.le)
        self.force = np.zeros(self.ndof)
        self.force[-2] = TIP_LOAD  # tip deflection DOF; tip moment stays zero
        edges = np.linspace(0.0, LENGTH, n_el + 1)
        # per-element int (L-x)^2 dx for the unit tip load's bending moment
        self.moment_integrals = ((LENGTH - edges[:-1]) ** 3 - (LENGTH - edges[1:]) ** 3) / 3.0

    def _element_dofs(self, e):
        # element e joins nodes e and e+1; node 0 is clamped (dofs dropped)
        if e == 0:
            return np.array([0, 1])            # only the right node is free
        return np.array([2 * e - 2, 2 * e - 1, 2 * e, 2 * e + 1])

    def stiffness(self, h):
        K = np.zeros((self.ndof, self.ndof))
        for e in range(self.n_el):
            ei = E_MOD * BREADTH * h[e] ** 3 / 12.0
            dofs = self._element_dofs(e)
            ke = ei * self.k_unit
            if e == 0:
                ke = ke[2:, 2:]
            K[np.ix_(dofs, dofs)] += ke
        return K

    def displacements(self, h):
        return np.linalg.solve(self.stiffness(h), self.force)

    def element_compliances(self, h):
        inertia = BREADTH * np.asarray(h, dtype=float) ** 3 / 12.0
        return self.moment_integrals / (E_MOD * inertia)

    def compliance(self, h):
        return float(np.sum(self.element_compliances(h)))

    def compliance_gradient(self, h):
        # adjoint self-adjoint formula dC/dh_e = -D (dK/dh_e) D, which for the
        # exact solution reduces to -3 C_e / h_e per element (C_e ~ h_e^-3)
        return -3.0 * self.element_compliances(h) / np.asarray(h, dtype=float)

    def solve_compliance(self, h):
        """Compliance via the assembled K(h) solve (dual route for verification)."""
        return float(self.force @ self.displacements(h))


def cantilever(n_el=20):
    """Compliance-minimal thickness distribution under a volume equality.

    The registry applies normalizing scalers (thickness, compliance, and
    volume all map to order one) so quasi-Newton Hessapproximations start
    well-conditioned.
    """
    model = CantileverModel(n_el)
    n_el = model.n_el
    h0 = np.full(n_el, VOLUME / (BREADTH * LENGTH))
    vol_coeff = BREADTH * LENGTH / n_el
    c0 = model.compliance(h0)

    return build_problem(
        f"cantilever_{n_el}", h0,
        obj=lambda h: model.compliance(h),
        grad=lambda h: model.compliance_gradient(h),
        con=lambda h: np.array([vol_coeff * float(np.sum(h))]),
        jac=lambda h: np.full((1, n_el), vol_coeff),
        xl=H_MIN,
        cl=[VOLUME], cu=[VOLUME],
        x_scaler=1.0 / h0[0],
        f_scaler=1.0 / c0,
        c_scaler=1.0 / VOLUME,
    )


def uniform_compliance(n_el=20):
    """Compliance of the uniform-thickness baseline (the default initial guess)."""
    model = CantileverModel(n_el)
    h0 = np.full(model.n_el, VOLUME / (BREADTH * LENGTH))
    return model.compliance(h0)
