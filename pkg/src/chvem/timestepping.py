"""Convex-splitting additive Runge-Kutta time integration.

A step advances u^n through s stages; stage i solves

    m_h(U^i - u^n, v) + tau * sum_{j<=i} [ a_ij (eps^2 a_h(U^j, v)
        + r_c(P0 U^j; U^j, v)) - ahat_ij r_e(P0 U^j; U^j, v) ]
    = tau * sum_{j<=i} a_ij (f(., t_n + c_j tau), P0 v)

which is nonlinear in U^i exactly when a_ii != 0 (Newton with the exact
Jacobian of the contractive part).  The implicit table A is lower triangular
and the explicit table is strictly lower triangular, so stages resolve in
order.  An optional forcing term rides on the implicit table at the stage
times.  Shipped tables: the first-order forward-backward Euler pair and a
four-stage second-order pair; both are stiffly accurate, so the final
combination collapses to the last stage.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg


class NewtonError(RuntimeError):
    """Newton iteration failed to converge; carries the residual history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class StepFailure(RuntimeError):
    """A stage solve failed; carries the last residual norm."""

    def __init__(self, message, residual_norm):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class ButcherPair:
    """Implicit (A, b, c) and explicit (Ahat, bhat, chat) coefficient tables."""

    A: np.ndarray
    b: np.ndarray
    Ahat: np.ndarray
    bhat: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        Ahat = np.asarray(self.Ahat, dtype=float)
        s = A.shape[0]
        if A.shape != (s, s) or Ahat.shape != (s, s):
            raise ValueError("tableau blocks must be square and equally sized")
        if np.any(np.triu(A, k=1) != 0.0):
            raise ValueError("implicit table must be lower triangular")
        if np.any(np.triu(Ahat, k=0) != 0.0):
            raise ValueError("explicit table must be strictly lower triangular")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "Ahat", Ahat)
        object.__setattr__(self, "bhat", np.asarray(self.bhat, dtype=float))

    @property
    def stages(self):
        return self.A.shape[0]

    @property
    def c(self):
        return self.A.sum(axis=1)

    @property
    def chat(self):
        return self.Ahat.sum(axis=1)

    @property
    def stiffly_accurate(self):
        return (np.array_equal(self.b, self.A[-1])
                and np.array_equal(self.bhat, self.Ahat[-1]))


def csrk1():
    """First-order forward-backward Euler convex-splitting pair."""
    return ButcherPair(
        A=[[0.0, 0.0], [0.0, 1.0]],
        b=[0.0, 1.0],
        Ahat=[[0.0, 0.0], [1.0, 0.0]],
        bhat=[1.0, 0.0],
    )


def csrk2():
    """Second-order four-stage convex-splitting pair."""
    A = [[0, 0, 0, 0],
         [0, 1, 0, 0],
         [0, Fraction(1, 2), 1, 0],
         [0, 1, -1, 1]]
    Ahat = [[0, 0, 0, 0],
            [1, 0, 0, 0],
            [Fraction(1, 2), 1, 0, 0],
            [1, -1, 1, 0]]
    return ButcherPair(
        A=np.array(A, dtype=float),
        b=np.array([0, 1, -1, 1], dtype=float),
        Ahat=np.array(Ahat, dtype=float),
        bhat=np.array([1, -1, 1, 0], dtype=float),
    )


@dataclass
class SimulationState:
    """Current time, dof vector and the recorded diagnostics."""

    t: float
    u: np.ndarray
    n: int = 0
    diagnostics: list = field(default_factory=list)
    newton_iters: int = 0

    def record(self, energy, mass, newton_iters):
        self.diagnostics.append((self.t, energy, mass, newton_iters))


def newton_solve(residual, jacobian, u0, atol=1e-10, rtol=1e-8, max_iter=25):
    """Damped-free Newton iteration with a sparse direct solve per step.

    Stops when ||residual||_2 < max(atol, rtol * ||residual_0||_2); returns
    (solution, residual_history).  Raises :class:`NewtonError` at the
    iteration cap.
    """
    u = np.array(u0, dtype=float)
    r = residual(u)
    history = [float(np.linalg.norm(r))]
    tol = max(atol, rtol * history[0])
    for _ in range(max_iter):
        if history[-1] < tol:
            return u, history
        J = jacobian(u)
        du = linalg.SparseFactor(J).solve(r)
        u -= du
        r = residual(u)
        history.append(float(np.linalg.norm(r)))
    if history[-1] < tol:
        return u, history
    raise NewtonError(
        f"Newton did not converge in {max_iter} iterations "
        f"(residual {history[-1]:.3e}, tolerance {tol:.3e})", history,
    )


def step(state, tau, forms, semi, tableau, forcing=None):
    """Advance one time step of length tau; returns the new state.

    ``forcing(x, y, t)`` is an optional source paired against P0 of the test
    functions.  Stage diagnostics (energy, conserved mean, Newton iteration
    count) are appended to the state's record by the caller via ``record``.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return SimulationState(t=state.t, u=state.u.copy(), n=state.n + 1,
                               diagnostics=state.diagnostics, newton_iters=0)
    A, Ahat = tableau.A, tableau.Ahat
    c = tableau.c
    s = tableau.stages
    M = forms.M
    u_n = state.u
    Mu_n = M @ u_n
    total_newton = 0

    # Fc[j]/Fe[j] are only formed when a later stage or the final
    # combination actually consumes them.
    need_fc = [bool(np.any(A[j + 1:, j] != 0.0))
               or (not tableau.stiffly_accurate and tableau.b[j] != 0.0)
               for j in range(s)]
    need_fe = [bool(np.any(Ahat[j + 1:, j] != 0.0))
               or (not tableau.stiffly_accurate and tableau.bhat[j] != 0.0)
               for j in range(s)]
    Fc = [None] * s   # eps^2 a_h(U^j, .) + r_c(U^j)
    Fe = [None] * s   # r_e(U^j)
    L = [None] * s    # forcing vectors at stage times
    U = [None] * s
    guess = u_n

    for i in range(s):
        if forcing is not None and L[i] is None:
            L[i] = semi.load(forcing, state.t + c[i] * tau)
        rhs = Mu_n.copy()
        for j in range(i):
            if A[i, j] != 0.0:
                rhs -= tau * A[i, j] * Fc[j]
            if Ahat[i, j] != 0.0:
                rhs += tau * Ahat[i, j] * Fe[j]
            if forcing is not None and A[i, j] != 0.0:
                rhs += tau * A[i, j] * L[j]
        if forcing is not None and A[i, i] != 0.0:
            rhs += tau * A[i, i] * L[i]

        if A[i, i] == 0.0:
            if i == 0:
                Ui = u_n.copy()
            else:
                Ui = forms.mass_factor().solve(rhs)
        else:
            aii = A[i, i]
            M_data, A_data = forms.aligned_data(semi)

            def residual(u):
                return (M @ u + tau * aii * (forms.A @ u + semi.residual(u, u, "contractive"))
                        - rhs)

            def jacobian(u):
                data = M_data + tau * aii * (A_data + semi.jacobian_data(u))
                return semi._matrix_from_data(data)

            try:
                Ui, history = newton_solve(residual, jacobian, guess)
            except NewtonError as exc:
                raise StepFailure(
                    f"stage {i + 1} of step {state.n + 1} failed: {exc}",
                    exc.history[-1],
                ) from exc
            total_newton += len(history) - 1
        U[i] = Ui
        guess = Ui
        if need_fc[i]:
            Fc[i] = forms.A @ Ui + semi.residual(Ui, Ui, "contractive")
        if need_fe[i]:
            Fe[i] = semi.residual(Ui, Ui, "expansive")

    if tableau.stiffly_accurate:
        u_new = U[-1]
    else:
        rhs = Mu_n.copy()
        for i in range(s):
            rhs -= tau * tableau.b[i] * Fc[i]
            rhs += tau * tableau.bhat[i] * Fe[i]
            if forcing is not None:
                rhs += tau * tableau.b[i] * L[i]
        u_new = forms.mass_factor().solve(rhs)

    return SimulationState(t=state.t + tau, u=u_new, n=state.n + 1,
                           diagnostics=state.diagnostics,
                           newton_iters=total_newton)


def energy(semi, u, eps):
    """Free energy of the projected field (quartic well + gradient term)."""
    return semi.free_energy(u, eps)


def mass(semi, u):
    """Integral of the projected field over the domain."""
    return semi.value_mean(u)


def run(state, n_steps, tau, forms, semi, tableau, forcing=None, on_step=None,
        record_diagnostics=True):
    """Drive ``n_steps`` uniform steps, recording diagnostics after each."""
    eps = forms.eps
    if record_diagnostics and not state.diagnostics:
        state.record(energy(semi, state.u, eps), mass(semi, state.u), 0)
    for _ in range(n_steps):
        state = step(state, tau, forms, semi, tableau, forcing)
        if record_diagnostics:
            state.record(energy(semi, state.u, eps), mass(semi, state.u),
                         state.newton_iters)
        if on_step is not None:
            on_step(state)
    return state
