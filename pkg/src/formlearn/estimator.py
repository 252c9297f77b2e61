"""Upper layer: cooperative leader-state observer.

Each agent integrates a copy of the leader's linear dynamics corrected by
a neighborhood disagreement term and a bounded switching term that rejects
the leader's unknown input.  The leader slot is pinned to the true state
and enters a follower's disagreement sum only through its leader link, so
non-neighbors never read the leader directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Topology
from .models import LeaderModel

__all__ = [
    "ObserverParams",
    "default_K1",
    "default_K2",
    "consensus_error",
    "sign_normalize",
    "observer_derivative",
]


class ObserverError(ValueError):
    pass


def default_K1(dim_n: int, gain: float = 8.0) -> np.ndarray:
    """Default disagreement gain: -gain * identity on the stacked state."""
    return -gain * np.eye(2 * dim_n)


def default_K2(B0: np.ndarray, gain: float = 1.0) -> np.ndarray:
    """Default switching direction: minus the input matrix transposed,
    applied to the velocity half of the disagreement."""
    n, n_r = B0.shape
    K2 = np.zeros((n_r, 2 * n))
    K2[:, n:] = -gain * B0.T
    return K2


@dataclass(frozen=True)
class ObserverParams:
    K1: np.ndarray
    K2: np.ndarray
    alpha1: float
    alpha2: float
    smoothing_eps: float = 1e-3

    def __post_init__(self):
        # zero gains are allowed here (open-loop copy, useful in tests);
        # scenario validation requires strictly positive values for runs
        if self.alpha1 < 0.0 or self.alpha2 < 0.0:
            raise ObserverError("alpha1 and alpha2 must be nonnegative")
        if self.smoothing_eps < 0.0:
            raise ObserverError("smoothing_eps must be nonnegative")
        object.__setattr__(self, "K1", np.asarray(self.K1, dtype=float))
        object.__setattr__(self, "K2", np.asarray(self.K2, dtype=float))


def consensus_error(xhat: np.ndarray, x0: np.ndarray, topology: Topology) -> np.ndarray:
    """Per-agent disagreement phi_i = sum_j a_ij (xhat_i - xhat_j), the sum
    running over followers plus the pinned leader slot."""
    xhat = np.asarray(xhat, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    N = topology.n_followers
    if xhat.shape[0] != N or xhat.shape[1] != x0.shape[0]:
        raise ObserverError("observer states and leader state are inconsistent")
    deg = topology.adjacency.sum(axis=1) + topology.leader_links
    phi = deg[:, None] * xhat - topology.adjacency @ xhat
    phi -= topology.leader_links[:, None] * x0[None, :]
    return phi


def sign_normalize(v, eps: float) -> np.ndarray:
    """Unit-normalize v; eps > 0 replaces the jump at the origin with a
    linear boundary layer (v / max(||v||, eps))."""
    if eps < 0.0:
        raise ObserverError("eps must be nonnegative")
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if eps == 0.0:
        if norm == 0.0:
            return np.zeros_like(v)
        return v / norm
    return v / max(norm, eps)


def observer_derivative(
    params: ObserverParams,
    xhat: np.ndarray,
    x0: np.ndarray,
    topology: Topology,
    leader: LeaderModel,
) -> np.ndarray:
    """Stacked observer derivatives, one row per agent:

    [phat_dot; vhat_dot] = [vhat; A0 xhat]
                           + alpha1 K1 phi
                           + alpha2 [0; B0] f1(K2 phi)
    """
    xhat = np.asarray(xhat, dtype=float)
    n = leader.dim_n
    if xhat.shape[1] != 2 * n:
        raise ObserverError(f"observer states must have width {2 * n}")
    phi = consensus_error(xhat, x0, topology)
    out = np.empty_like(xhat)
    out[:, :n] = xhat[:, n:]
    out[:, n:] = xhat @ leader.A0.T
    out += params.alpha1 * (phi @ params.K1.T)
    for i in range(xhat.shape[0]):
        f1 = sign_normalize(params.K2 @ phi[i], params.smoothing_eps)
        out[i, n:] += params.alpha2 * (leader.B0 @ f1)
    return out
