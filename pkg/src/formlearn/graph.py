"""Communication topology: leader + N followers, Laplacian construction,
and the leader-connectivity check required for the estimation layer.

The follower subgraph is undirected (symmetric adjacency, zero diagonal);
leader links are one nonnegative weight per follower.  `follower` below is
the pinned follower Laplacian (follower-graph Laplacian plus the diagonal
of leader-link weights), which is positive definite exactly when the
leader reaches every follower.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Topology",
    "LaplacianPair",
    "Assumption3Report",
    "build_laplacians",
    "check_assumption3",
]

# Relative eigenvalue tolerance for calling the pinned Laplacian positive
# definite; float noise on small graphs sits well below this.
_EIG_REL_TOL = 1e-9


class TopologyError(ValueError):
    """Raised for adjacency matrices that violate the topology contract."""


@dataclass(frozen=True)
class Topology:
    """Fixed communication graph: follower adjacency + leader links.

    adjacency[i, j] is the weight between followers i and j (0-indexed),
    leader_links[i] is the weight of the leader -> follower-i link.
    """

    n_followers: int
    adjacency: np.ndarray
    leader_links: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        links = np.asarray(self.leader_links, dtype=float)
        n = self.n_followers
        if n < 1:
            raise TopologyError("need at least one follower")
        if adj.shape != (n, n):
            raise TopologyError(f"adjacency must be {n}x{n}, got {adj.shape}")
        if links.shape != (n,):
            raise TopologyError(f"leader_links must have length {n}")
        if not np.array_equal(adj, adj.T):
            raise TopologyError("adjacency must be symmetric (undirected follower graph)")
        if np.any(np.diag(adj) != 0.0):
            raise TopologyError("adjacency diagonal must be zero")
        if np.any(adj < 0.0) or np.any(links < 0.0):
            raise TopologyError("all edge weights must be nonnegative")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "leader_links", links)

    def follower_laplacian(self) -> np.ndarray:
        """Laplacian of the follower subgraph alone (no leader pinning)."""
        deg = np.diag(self.adjacency.sum(axis=1))
        return deg - self.adjacency


@dataclass(frozen=True)
class LaplacianPair:
    """Laplacian matrices of the full leader+follower graph.

    full:     (N+1)x(N+1), leader indexed first (zero first row).
    follower: NxN pinned follower block (follower Laplacian + delta).
    delta:    NxN diagonal matrix of leader-link weights.
    """

    full: np.ndarray
    follower: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True)
class Assumption3Report:
    ok: bool
    unreachable: tuple[int, ...] = field(default=())
    min_eigenvalue: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def build_laplacians(t: Topology) -> LaplacianPair:
    """Build the full, follower (pinned) and delta matrices for `t`.

    Deterministic and pure; rejects invalid topologies at Topology
    construction time.
    """
    n = t.n_followers
    delta = np.diag(t.leader_links)
    follower = t.follower_laplacian() + delta
    full = np.zeros((n + 1, n + 1))
    full[1:, 0] = -t.leader_links
    full[1:, 1:] = follower
    return LaplacianPair(full=full, follower=follower, delta=delta)


def check_assumption3(t: Topology) -> Assumption3Report:
    """True iff the leader reaches every follower through leader links plus
    the undirected follower subgraph; returns unreachable followers otherwise.
    """
    n = t.n_followers
    reached = t.leader_links > 0.0
    frontier = list(np.flatnonzero(reached))
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(t.adjacency[i] > 0.0):
            if not reached[j]:
                reached[j] = True
                frontier.append(j)
    unreachable = tuple(int(i) for i in np.flatnonzero(~reached))

    eigs = np.linalg.eigvalsh(build_laplacians(t).follower)
    min_eig = float(eigs[0])
    scale = max(float(eigs[-1]), 1.0)
    ok = not unreachable and min_eig > _EIG_REL_TOL * scale
    return Assumption3Report(ok=ok, unreachable=unreachable, min_eigenvalue=min_eig)


def default_ring_topology(n_followers: int = 4) -> Topology:
    """Shipped default: follower ring with unit weights, leader linked to
    follower 1 with unit weight."""
    adj = np.zeros((n_followers, n_followers))
    for i in range(n_followers):
        j = (i + 1) % n_followers
        if i != j:
            adj[i, j] = adj[j, i] = 1.0
    links = np.zeros(n_followers)
    links[0] = 1.0
    return Topology(n_followers=n_followers, adjacency=adj, leader_links=links)
