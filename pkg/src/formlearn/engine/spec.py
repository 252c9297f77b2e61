"""Flat array bundle consumed by the simulation backends.

Both backends (compiled kernel and NumPy fallback) read exactly this
structure, so a scenario is packed once and the backend choice cannot
change semantics.  Rotation is identity for every packed plant kind; the
general-J code paths live in the module-level operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PLANT_VESSEL = 0
PLANT_LINEAR_DAMPED = 1
PLANT_SYNTHETIC = 2

SIG_ZERO = 0
SIG_CONST = 1
SIG_COSINE = 2

MODE_FULL = 0
MODE_ESTIMATOR = 1


@dataclass
class EngineSpec:
    # dimensions
    n: int
    N: int
    n_r: int
    n_units: int
    dim_q: int
    per_dim: int
    mode: int = MODE_FULL

    # leader
    A0: np.ndarray = None
    B0: np.ndarray = None
    sig_kind: int = SIG_ZERO
    sig_a: np.ndarray = None  # amplitude (cosine) or constant value
    sig_w: np.ndarray = None
    sig_ph: np.ndarray = None

    # topology
    adj: np.ndarray = None
    links: np.ndarray = None
    degree: np.ndarray = None  # row sums of adj + links

    # observer
    K1: np.ndarray = None
    K2: np.ndarray = None
    alpha1: float = 1.0
    alpha2: float = 1.0
    eps: float = 1e-3

    # controller
    H1: np.ndarray = None  # (N, n, n)
    H2: np.ndarray = None
    gamma1: float = 0.0
    gamma2: float = 0.0
    sigma: float = 0.0
    offsets: np.ndarray = None  # (N, n)
    QW: np.ndarray = None  # gamma1*sigma*I + gamma2*L_s

    # plant
    plant_kind: int = PLANT_VESSEL
    M: np.ndarray = None
    M_chol: np.ndarray = None  # lower Cholesky factor of M
    vessel_c: np.ndarray = None  # (ca, cb, cc)
    D0: np.ndarray = None
    d_abs: np.ndarray = None
    g0: np.ndarray = None
    syn_omega: float = 0.0
    syn_support: np.ndarray = field(default=None)  # int64 indices
    syn_w: np.ndarray = None  # (n, n_support)
    syn_centers: np.ndarray = None  # (n_support, dim_q)

    # grid
    grid_lo: np.ndarray = None
    grid_h: np.ndarray = None  # per-axis spacing
    grid_width: float = 1.0
    d_loc: float = 45.0

    # ------------------------------------------------------------------
    @property
    def state_len(self) -> int:
        two_n = 2 * self.n
        if self.mode == MODE_ESTIMATOR:
            return two_n + self.N * two_n
        return two_n + self.N * (2 * two_n) + self.N * self.n * self.n_units

    @property
    def off_plant(self) -> int:
        return 2 * self.n

    @property
    def off_obs(self) -> int:
        if self.mode == MODE_ESTIMATOR:
            return 2 * self.n
        return 2 * self.n + self.N * 2 * self.n

    @property
    def off_w(self) -> int:
        return 2 * self.n + 2 * self.N * 2 * self.n

    def views(self, y: np.ndarray):
        """(x0, plant (N,2n), obs (N,2n), W (N,n,n_units)) views into y."""
        two_n = 2 * self.n
        x0 = y[:two_n]
        if self.mode == MODE_ESTIMATOR:
            obs = y[self.off_obs :].reshape(self.N, two_n)
            return x0, None, obs, None
        plant = y[self.off_plant : self.off_obs].reshape(self.N, two_n)
        obs = y[self.off_obs : self.off_w].reshape(self.N, two_n)
        W = y[self.off_w :].reshape(self.N, self.n, self.n_units)
        return x0, plant, obs, W

    def input_signal(self, t: float) -> np.ndarray:
        if self.sig_kind == SIG_ZERO:
            return np.zeros(self.n_r)
        if self.sig_kind == SIG_CONST:
            return self.sig_a.copy()
        return self.sig_a * np.cos(self.sig_w * t + self.sig_ph)
