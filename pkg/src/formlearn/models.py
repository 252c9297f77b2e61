"""Reference (virtual leader) dynamics and mechanical plant dynamics.

The plant family is M*nudot + C(p,nu)*nu + D(p,nu)*nu + g(p) = tau with
pdot = J(p)*nu, constant symmetric positive definite inertia M and
orthogonal J.  Two built-ins ship: the three-axis vessel used by the
example scenario, and a synthetic plant whose uncertain force is an exact
RBF-network expansion (used by the learning verification suite).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import rbf

__all__ = [
    "LeaderModel",
    "PlantModel",
    "ExampleVesselPlant",
    "LinearDampedPlant",
    "SyntheticRbfPlant",
    "InputSignal",
    "leader_derivative",
    "plant_derivative",
    "true_G",
]


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Leader
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InputSignal:
    """Declarative input catalog: zero, constant, or amp*cos(omega*t + phase)
    per component."""

    kind: str  # "zero" | "constant" | "cosine"
    n_r: int = 1
    amp: np.ndarray | None = None
    omega: np.ndarray | None = None
    phase: np.ndarray | None = None
    const: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "cosine"):
            raise ModelError(f"unknown input signal kind {self.kind!r}")
        for name in ("amp", "omega", "phase", "const"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float).reshape(self.n_r))

    def __call__(self, t: float) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(self.n_r)
        if self.kind == "constant":
            return self.const.copy()
        return self.amp * np.cos(self.omega * t + self.phase)

    def bound(self) -> float:
        """Computable bound on ||r(t)||."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return float(np.linalg.norm(self.const))
        return float(np.linalg.norm(self.amp))


@dataclass(frozen=True)
class LeaderModel:
    """vdot0 = A0 @ [p0; v0] + B0 @ r(t), pdot0 = v0."""

    dim_n: int
    A0: np.ndarray
    B0: np.ndarray
    input_signal: InputSignal
    r_star: float

    def __post_init__(self):
        n = self.dim_n
        A0 = np.asarray(self.A0, dtype=float)
        B0 = np.asarray(self.B0, dtype=float)
        if A0.shape != (n, 2 * n):
            raise ModelError(f"A0 must be {n}x{2 * n}, got {A0.shape}")
        if B0.ndim != 2 or B0.shape[0] != n:
            raise ModelError(f"B0 must be {n}x n_r, got {B0.shape}")
        if self.input_signal.n_r != B0.shape[1]:
            raise ModelError("input signal width does not match B0 columns")
        if self.input_signal.bound() > self.r_star + 1e-12:
            raise ModelError("input signal exceeds declared r_star bound")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "B0", B0)

    @property
    def n_r(self) -> int:
        return self.B0.shape[1]


def leader_derivative(m: LeaderModel, x0, t: float) -> np.ndarray:
    """Time derivative of the stacked leader state [p0; v0]."""
    x0 = np.asarray(x0, dtype=float)
    n = m.dim_n
    if x0.shape != (2 * n,):
        raise ModelError(f"leader state must have length {2 * n}, got {x0.shape}")
    out = np.empty(2 * n)
    out[:n] = x0[n:]
    out[n:] = m.A0 @ x0 + m.B0 @ m.input_signal(t)
    return out


# ---------------------------------------------------------------------------
# Plants
# ---------------------------------------------------------------------------


class PlantModel:
    """Interface: constant SPD inertia M plus evaluators C(p, nu), D(p, nu),
    g(p) and an orthogonal rotation J(p).

    Subclasses set `M` and override the evaluators.  `uncertain_force`
    composes them; plants whose force has no clean matrix factorization may
    override it directly (it is the single source of truth for dynamics).
    """

    M: np.ndarray

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ModelError("M must be square")
        if not np.allclose(M, M.T, atol=1e-12):
            raise ModelError("M must be symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise ModelError("M must be positive definite") from None
        self.M = M
        self._cho = cho_factor(M, lower=True)

    @property
    def dim_n(self) -> int:
        return self.M.shape[0]

    def solve_M(self, b: np.ndarray) -> np.ndarray:
        """M^{-1} b via the cached Cholesky factor (two triangular solves)."""
        return cho_solve(self._cho, b)

    def C(self, p: np.ndarray, nu: np.ndarray) -> np.ndarray:
        return np.zeros((self.dim_n, self.dim_n))

    def D(self, p: np.ndarray, nu: np.ndarray) -> np.ndarray:
        return np.zeros((self.dim_n, self.dim_n))

    def g(self, p: np.ndarray) -> np.ndarray:
        return np.zeros(self.dim_n)

    def J(self, p: np.ndarray) -> np.ndarray:
        return np.eye(self.dim_n)

    def uncertain_force(self, p: np.ndarray, nu: np.ndarray) -> np.ndarray:
        """C(p,nu) nu + D(p,nu) nu + g(p)."""
        return self.C(p, nu) @ nu + self.D(p, nu) @ nu + self.g(p)


def plant_derivative(pm: PlantModel, p, nu, tau) -> tuple[np.ndarray, np.ndarray]:
    """(pdot, nudot) = (J(p) nu, M^{-1}(tau - C nu - D nu - g))."""
    p = np.asarray(p, dtype=float)
    nu = np.asarray(nu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    n = pm.dim_n
    if p.shape != (n,) or nu.shape != (n,) or tau.shape != (n,):
        raise ModelError("p, nu, tau must all have the plant dimension")
    pdot = pm.J(p) @ nu
    nudot = pm.solve_M(tau - pm.uncertain_force(p, nu))
    return pdot, nudot


def true_G(pm: PlantModel, x, beta_dot) -> np.ndarray:
    """Ground-truth uncertainty M*beta_dot + C nu + D nu + g at state
    x = [p; nu].  Analysis-only; never enters the control path."""
    x = np.asarray(x, dtype=float)
    n = pm.dim_n
    p, nu = x[:n], x[n:]
    beta_dot = np.asarray(beta_dot, dtype=float)
    return pm.M @ beta_dot + pm.uncertain_force(p, nu)


class ExampleVesselPlant(PlantModel):
    """Three-axis vessel: gyroscopic coupling C(nu) tied to the inertia
    entries, diagonal-plus-quadratic drag D(nu), no gravity, identity J.
    """

    def __init__(self):
        super().__init__(np.array([[25.0, 0.0, 0.0], [0.0, 33.0, 1.15], [0.0, 1.15, 2.8]]))
        self._ca = 33.0  # couples nu2 into the surge/yaw exchange
        self._cb = 1.15
        self._cc = 25.0

    def C(self, p, nu):
        a = -self._ca * nu[1] - self._cb * nu[2]
        b = self._cc * nu[0]
        return np.array([[0.0, 0.0, a], [0.0, 0.0, b], [-a, -b, 0.0]])

    def D(self, p, nu):
        return np.array(
            [
                [0.8 + 1.3 * abs(nu[0]), 0.0, 0.0],
                [0.0, 0.9 + 36.0 * abs(nu[1]), -0.1],
                [0.0, -0.1, 0.0],
            ]
        )


class LinearDampedPlant(PlantModel):
    """Config-definable plant: constant M, D(nu) = D0 + diag(d_abs * |nu|),
    constant gravity vector, identity J, no gyroscopic term."""

    def __init__(self, M, D0, d_abs=None, g0=None):
        super().__init__(M)
        n = self.dim_n
        self.D0 = np.asarray(D0, dtype=float).reshape(n, n)
        self.d_abs = (
            np.zeros(n) if d_abs is None else np.asarray(d_abs, dtype=float).reshape(n)
        )
        self.g0 = np.zeros(n) if g0 is None else np.asarray(g0, dtype=float).reshape(n)

    def D(self, p, nu):
        return self.D0 + np.diag(self.d_abs * np.abs(nu))

    def g(self, p):
        return self.g0.copy()


class SyntheticRbfPlant(PlantModel):
    """Plant whose uncertain force is a position spring plus an exact RBF
    expansion: force(p, nu) = M omega^2 p + Wstar^T S([p; nu]).

    With the companion harmonic leader (same omega) and an exactly
    initialized observer, the total uncertainty seen by the velocity-error
    dynamics reduces to Wstar^T S(x) up to tracking-error terms, so the
    network weights have a known target.

    The D evaluator exposes the network force as a rank-one matrix
    (force * nu^T / ||nu||^2); it is undefined at nu = 0, where
    `uncertain_force` remains exact.
    """

    def __init__(self, M, omega: float, grid: rbf.RbfGrid, support: np.ndarray, wstar: np.ndarray):
        super().__init__(M)
        n = self.dim_n
        if grid.dim_q != 2 * n:
            raise ModelError("grid dimension must be twice the plant dimension")
        self.omega = float(omega)
        self.grid = grid
        self.support = np.asarray(support, dtype=np.intp).reshape(-1)
        self.wstar = np.asarray(wstar, dtype=float).reshape(n, self.support.size)

    def wstar_full(self) -> np.ndarray:
        """Dense (n, n_units) ideal weight matrix (zeros off support)."""
        W = np.zeros((self.dim_n, self.grid.n_units))
        W[:, self.support] = self.wstar
        return W

    def nn_force(self, p: np.ndarray, nu: np.ndarray) -> np.ndarray:
        x = np.concatenate([p, nu])
        d2 = np.sum((self.grid.centers[self.support] - x) ** 2, axis=1)
        s = np.exp(-d2 / self.grid.widths[self.support])
        return self.wstar @ s

    def g(self, p):
        return self.M @ (self.omega**2 * p)

    def D(self, p, nu):
        nn = np.dot(nu, nu)
        if nn == 0.0:
            return np.zeros((self.dim_n, self.dim_n))
        return np.outer(self.nn_force(p, nu), nu) / nn

    def uncertain_force(self, p, nu):
        return self.g(p) + self.nn_force(p, nu)
