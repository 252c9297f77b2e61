"""Lower layer: per-agent backstepping control with cooperative network
weight adaptation.

The position loop treats velocity as a virtual input (z1 -> beta); the
velocity loop cancels the modeled part with the network output and damps
the rest (tau); the weight law combines a local regressor-times-error term,
sigma-leakage, and diffusive coupling of neighbors' weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import ObserverParams, consensus_error, observer_derivative
from .graph import Topology
from .models import LeaderModel, PlantModel, leader_derivative, plant_derivative

__all__ = [
    "ControllerGains",
    "FormationSpec",
    "tracking_error",
    "virtual_control",
    "control_law",
    "weight_update_derivative",
    "observer_rate_chain",
    "beta_dot_chain",
    "closed_loop_residual_check",
]


class GainError(ValueError):
    pass


def _check_spd(name: str, A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise GainError(f"{name} must be square")
    if not np.allclose(A, A.T, atol=1e-12):
        raise GainError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(A)[0] <= 0.0:
        raise GainError(f"{name} must be positive definite")
    return A


@dataclass(frozen=True)
class ControllerGains:
    """Shared or per-agent loop gains.  H1/H2 with a leading agent axis are
    per-agent; 2-D arrays are shared by all agents."""

    H1: np.ndarray
    H2: np.ndarray
    gamma1: float
    gamma2: float
    sigma: float

    def __post_init__(self):
        H1 = np.asarray(self.H1, dtype=float)
        H2 = np.asarray(self.H2, dtype=float)
        if H1.ndim == 2:
            H1 = H1[None, :, :]
        if H2.ndim == 2:
            H2 = H2[None, :, :]
        for i in range(H1.shape[0]):
            _check_spd("H1", H1[i])
        for i in range(H2.shape[0]):
            _check_spd("H2", H2[i])
        if self.gamma1 <= 0.0 or self.gamma2 < 0.0 or self.sigma <= 0.0:
            raise GainError("need gamma1 > 0, gamma2 >= 0, sigma > 0")
        object.__setattr__(self, "H1", H1)
        object.__setattr__(self, "H2", H2)

    def H1_for(self, i: int) -> np.ndarray:
        return self.H1[i if self.H1.shape[0] > 1 else 0]

    def H2_for(self, i: int) -> np.ndarray:
        return self.H2[i if self.H2.shape[0] > 1 else 0]

    def damping_margin_ok(self, i: int = 0) -> bool:
        """True when H2 - H1 is positive definite (velocity loop strictly
        stiffer than the position loop)."""
        return bool(np.linalg.eigvalsh(self.H2_for(i) - self.H1_for(i))[0] > 0.0)


@dataclass(frozen=True)
class FormationSpec:
    """Constant desired displacement of each agent from the leader."""

    offsets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.atleast_2d(np.asarray(self.offsets, dtype=float)))

    @property
    def n_agents(self) -> int:
        return self.offsets.shape[0]


def tracking_error(p, phat, offset) -> np.ndarray:
    """z1 = p - (phat + offset)."""
    return np.asarray(p, dtype=float) - np.asarray(phat, dtype=float) - np.asarray(offset, dtype=float)


def virtual_control(J: np.ndarray, H1: np.ndarray, z1: np.ndarray, phat_dot: np.ndarray) -> np.ndarray:
    """beta = J^T (-H1 z1 + phat_dot); phat_dot is the observer's own rate,
    never a finite difference."""
    return J.T @ (phat_dot - H1 @ z1)


def control_law(
    W: np.ndarray, s: np.ndarray, H2: np.ndarray, z2: np.ndarray, J: np.ndarray, z1: np.ndarray
) -> np.ndarray:
    """tau = W s - H2 z2 - J^T z1, with one shared regressor s for all
    output channels (W has shape (n, n_units))."""
    return np.asarray(W, dtype=float) @ s - H2 @ z2 - J.T @ z1


def weight_update_derivative(
    W: np.ndarray,
    S: np.ndarray,
    z2: np.ndarray,
    gains: ControllerGains,
    topology: Topology,
) -> np.ndarray:
    """Weight derivatives for all agents and channels.

    W:  (N, n, n_units) current weights
    S:  (N, n_units) shared regressor per agent
    z2: (N, n) velocity-loop errors

    dW[i,k] = -gamma1 (S_i z2[i,k] + sigma W[i,k])
              - gamma2 sum_j a_ij (W[i,k] - W[j,k])

    The diffusive sum runs over followers only.
    """
    W = np.asarray(W, dtype=float)
    S = np.asarray(S, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    N, n, n_units = W.shape
    if S.shape != (N, n_units) or z2.shape != (N, n):
        raise GainError("inconsistent weight/regressor/error shapes")
    dW = -gains.gamma1 * (z2[:, :, None] * S[:, None, :] + gains.sigma * W)
    L_s = topology.follower_laplacian()
    dW -= gains.gamma2 * (L_s @ W.reshape(N, -1)).reshape(N, n, n_units)
    return dW


# ---------------------------------------------------------------------------
# Analytic derivative chain (analysis and verification only)
# ---------------------------------------------------------------------------


def observer_rate_chain(
    params: ObserverParams,
    xhat: np.ndarray,
    x0: np.ndarray,
    topology: Topology,
    leader: LeaderModel,
    t: float,
) -> tuple[np.ndarray, np.ndarray]:
    """(phat_dot, phat_ddot) for every agent, by differentiating the
    observer dynamics along the smoothed switching law.

    phat_dot_i is the position block of the observer derivative;
    phat_ddot_i differentiates it once more, which only requires the
    current derivatives of all observers and of the leader (the switching
    term is evaluated, not differentiated).
    """
    n = leader.dim_n
    xhat_dot = observer_derivative(params, xhat, x0, topology, leader)
    x0_dot = leader_derivative(leader, x0, t)
    phi_dot = consensus_error(xhat_dot, x0_dot, topology)
    phat_dot = xhat_dot[:, :n]
    phat_ddot = xhat_dot[:, n:] + params.alpha1 * (phi_dot @ params.K1.T)[:, :n]
    return phat_dot, phat_ddot


def beta_dot_chain(
    J: np.ndarray, H1: np.ndarray, nu: np.ndarray, phat_dot: np.ndarray, phat_ddot: np.ndarray
) -> np.ndarray:
    """beta_dot = J^T (phat_ddot - H1 (J nu - phat_dot)) for constant J."""
    return J.T @ (phat_ddot - H1 @ (J @ nu - phat_dot))


def closed_loop_residual_check(
    plant: PlantModel,
    wstar_full: np.ndarray,
    grid,
    gains: ControllerGains,
    obs_params: ObserverParams,
    topology: Topology,
    leader: LeaderModel,
    formation: FormationSpec,
    p: np.ndarray,
    nu: np.ndarray,
    xhat: np.ndarray,
    x0: np.ndarray,
    W: np.ndarray,
    t: float = 0.0,
) -> float:
    """Consistency of the velocity-error dynamics on an exactly
    representable plant.

    Computes z2_dot two ways for every agent: (a) plant acceleration under
    the commanded tau minus the analytic beta_dot, and (b) the reduced form
    M^{-1}((W - Wstar) s - J^T z1 - H2 z2).  Returns the worst-case norm of
    the difference, which is zero (to rounding) when the plant's uncertain
    force equals Wstar^T S(x) at the evaluated states.
    """
    from . import rbf

    N = topology.n_followers
    n = leader.dim_n
    phat_dot, phat_ddot = observer_rate_chain(obs_params, xhat, x0, topology, leader, t)
    worst = 0.0
    for i in range(N):
        Ji = plant.J(p[i])
        H1 = gains.H1_for(i)
        H2 = gains.H2_for(i)
        z1 = tracking_error(p[i], xhat[i, :n], formation.offsets[i])
        beta = virtual_control(Ji, H1, z1, phat_dot[i])
        z2 = nu[i] - beta
        s = rbf.regressor(grid, np.concatenate([p[i], nu[i]]))
        tau = control_law(W[i], s, H2, z2, Ji, z1)
        _, nudot = plant_derivative(plant, p[i], nu[i], tau)
        bdot = beta_dot_chain(Ji, H1, nu[i], phat_dot[i], phat_ddot[i])
        side_a = nudot - bdot
        side_b = plant.solve_M((W[i] - wstar_full) @ s - Ji.T @ z1 - H2 @ z2)
        worst = max(worst, float(np.linalg.norm(side_a - side_b)))
    return worst
