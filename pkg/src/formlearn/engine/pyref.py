"""Pure-NumPy simulation backend.

Semantically identical to the compiled kernel; used as the import-time
fallback and as the cross-check reference in tests.  Vectorized over
agents but still Python-per-step, so long runs prefer the compiled core.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

from .spec import (
    MODE_ESTIMATOR,
    MODE_FULL,
    PLANT_LINEAR_DAMPED,
    PLANT_SYNTHETIC,
    PLANT_VESSEL,
    EngineSpec,
)

STATUS_OK = 0
STATUS_NONFINITE = 1

BACKEND_NAME = "python"


def _solve_M(spec: EngineSpec, b: np.ndarray) -> np.ndarray:
    # check_finite off: divergence is detected by the run loop, not scipy
    return cho_solve((spec.M_chol, True), b, check_finite=False)


def _grid_sparse(spec: EngineSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices and responses of units within d_loc of x (lattice lookup)."""
    per = spec.per_dim
    r = spec.d_loc
    idx = None
    for q in range(spec.dim_q):
        h = spec.grid_h[q]
        lo = spec.grid_lo[q]
        i0 = max(0, int(np.ceil((x[q] - r - lo) / h)))
        i1 = min(per - 1, int(np.floor((x[q] + r - lo) / h)))
        if i1 < i0:
            return np.empty(0, dtype=np.intp), np.empty(0)
        w = np.arange(i0, i1 + 1)
        idx = w if idx is None else (idx[:, None] * per + w[None, :]).ravel()
    centers = spec.grid_lo + spec.grid_h * np.stack(
        np.unravel_index(idx, (per,) * spec.dim_q), axis=1
    )
    d2 = np.sum((centers - x) ** 2, axis=1)
    keep = d2 <= r * r
    return idx[keep], np.exp(-d2[keep] / spec.grid_width)


def _plant_force(spec: EngineSpec, p: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """C nu + D nu + g for the packed plant kinds."""
    if spec.plant_kind == PLANT_VESSEL:
        ca, cb, cc = spec.vessel_c
        a = -ca * nu[1] - cb * nu[2]
        b = cc * nu[0]
        cnu = np.array([a * nu[2], b * nu[2], -a * nu[0] - b * nu[1]])
        dnu = spec.D0 @ nu + spec.d_abs * np.abs(nu) * nu
        return cnu + dnu
    if spec.plant_kind == PLANT_LINEAR_DAMPED:
        return spec.D0 @ nu + spec.d_abs * np.abs(nu) * nu + spec.g0
    # synthetic: spring + exact network force
    x = np.concatenate([p, nu])
    d2 = np.sum((spec.syn_centers - x) ** 2, axis=1)
    s = np.exp(-d2 / spec.grid_width)
    return spec.M @ (spec.syn_omega**2 * p) + spec.syn_w @ s


def _observer_blocks(spec: EngineSpec, t, x0, obs):
    """(x0_dot, obs_dot, phi) for the leader copy + disagreement correction."""
    n = spec.n
    x0_dot = np.empty(2 * n)
    x0_dot[:n] = x0[n:]
    x0_dot[n:] = spec.A0 @ x0 + spec.B0 @ spec.input_signal(t)

    phi = spec.degree[:, None] * obs - spec.adj @ obs - spec.links[:, None] * x0[None, :]
    obs_dot = np.empty_like(obs)
    obs_dot[:, :n] = obs[:, n:]
    obs_dot[:, n:] = obs @ spec.A0.T
    obs_dot += spec.alpha1 * (phi @ spec.K1.T)
    u = phi @ spec.K2.T  # (N, n_r)
    norms = np.linalg.norm(u, axis=1)
    if spec.eps > 0.0:
        scale = 1.0 / np.maximum(norms, spec.eps)
    else:
        with np.errstate(divide="ignore"):
            scale = np.where(norms > 0.0, 1.0 / np.maximum(norms, 1e-300), 0.0)
    obs_dot[:, n:] += spec.alpha2 * (u * scale[:, None]) @ spec.B0.T
    return x0_dot, obs_dot, phi


def derivative(spec: EngineSpec, t: float, y: np.ndarray, extras: dict | None = None) -> np.ndarray:
    """Time derivative of the full flat state.

    When `extras` is a dict it is filled with per-agent diagnostics
    (tau, beta_dot, z1, z2) used by the log writer.
    """
    n = spec.n
    x0, plant, obs, W = spec.views(y)
    dy = np.zeros_like(y)
    dx0, dplant, dobs, dW = spec.views(dy)

    x0_dot, obs_dot, _ = _observer_blocks(spec, t, x0, obs)
    dx0[:] = x0_dot
    dobs[:] = obs_dot
    if spec.mode == MODE_ESTIMATOR:
        return dy

    phat_dot = obs_dot[:, :n]
    p = plant[:, :n]
    nu = plant[:, n:]
    z1 = p - obs[:, :n] - spec.offsets
    beta = phat_dot - np.einsum("aij,aj->ai", spec.H1, z1)
    z2 = nu - beta

    # weight linear part: leakage + neighbor diffusion
    dW[:] = -(spec.QW @ W.reshape(spec.N, -1)).reshape(W.shape)

    tau = np.empty((spec.N, n))
    for i in range(spec.N):
        idx, vals = _grid_sparse(spec, plant[i])
        nn = W[i][:, idx] @ vals if idx.size else np.zeros(n)
        tau[i] = nn - spec.H2[i] @ z2[i] - z1[i]
        if idx.size:
            dW[i][:, idx] -= spec.gamma1 * np.outer(z2[i], vals)
        force = _plant_force(spec, p[i], nu[i])
        dplant[i, :n] = nu[i]
        dplant[i, n:] = _solve_M(spec, tau[i] - force)

    if extras is not None:
        x0_dot2, obs_dot2 = x0_dot, obs_dot
        phi_dot = (
            spec.degree[:, None] * obs_dot2 - spec.adj @ obs_dot2 - spec.links[:, None] * x0_dot2[None, :]
        )
        phat_ddot = obs_dot2[:, n:] + spec.alpha1 * (phi_dot @ spec.K1.T)[:, :n]
        beta_dot = phat_ddot - np.einsum("aij,aj->ai", spec.H1, nu - phat_dot)
        extras.update(tau=tau, beta_dot=beta_dot, z1=z1, z2=z2)
    return dy


def _check_small_blocks(spec: EngineSpec, y: np.ndarray) -> str | None:
    """Cheap per-step divergence probe over the non-weight blocks."""
    lim = spec.off_w if spec.mode == MODE_FULL else len(y)
    if np.all(np.isfinite(y[:lim])):
        return None
    x0, plant, obs, _ = spec.views(y)
    if not np.all(np.isfinite(x0)):
        return "leader"
    if plant is not None:
        bad = np.flatnonzero(~np.isfinite(plant).all(axis=1))
        if bad.size:
            return f"plant[{bad[0]}]"
    bad = np.flatnonzero(~np.isfinite(obs).all(axis=1))
    if bad.size:
        return f"observer[{bad[0]}]"
    return "state"


def log_row(spec: EngineSpec, t: float, y: np.ndarray, out: np.ndarray) -> None:
    """Fill one log row (see sim.LogSchema for the column layout)."""
    n = spec.n
    x0, plant, obs, W = spec.views(y)
    extras: dict = {}
    derivative(spec, t, y, extras=extras)
    c = 0
    out[c] = t
    c += 1
    out[c : c + 2 * n] = x0
    c += 2 * n
    if spec.mode == MODE_ESTIMATOR:
        for i in range(spec.N):
            out[c : c + 2 * n] = obs[i]
            c += 2 * n
            out[c] = np.linalg.norm(obs[i] - x0)
            c += 1
        return
    for i in range(spec.N):
        out[c : c + n] = plant[i, :n]
        c += n
        out[c : c + n] = plant[i, n:]
        c += n
        out[c : c + 2 * n] = obs[i]
        c += 2 * n
        out[c : c + n] = extras["tau"][i]
        c += n
        out[c : c + n] = extras["beta_dot"][i]
        c += n
        out[c] = np.linalg.norm(extras["z1"][i])
        out[c + 1] = np.linalg.norm(extras["z2"][i])
        out[c + 2] = np.linalg.norm(obs[i] - x0)
        c += 3
    for i in range(spec.N):
        for k in range(n):
            out[c] = np.linalg.norm(W[i, k])
            c += 1
    for k in range(n):
        worst = 0.0
        for i in range(spec.N):
            for j in range(i + 1, spec.N):
                worst = max(worst, float(np.linalg.norm(W[i, k] - W[j, k])))
        out[c] = worst
        c += 1


def run(
    spec: EngineSpec,
    y0: np.ndarray,
    dt: float,
    n_steps: int,
    log_stride: int,
    log_out: np.ndarray,
    ckpt_steps: np.ndarray,
    ckpt_out: np.ndarray | None,
    wbar_rows: tuple[int, int],
    wbar_out: np.ndarray | None,
) -> dict:
    """Classical fixed-step RK4 over [0, n_steps*dt].

    Logs rows at step 0, every log_stride-th step, and the final step;
    snapshots weights at the requested checkpoint steps; accumulates the
    weight mean over the configured log-row window.  Returns a status dict
    (divergence aborts early, partial log retained).
    """
    y = y0.astype(float).copy()
    k1 = np.empty_like(y)
    yt = np.empty_like(y)

    rows_written = 0
    wbar_count = 0
    ckpt_i = 0
    status = STATUS_OK
    bad = None
    bad_step = -1

    def emit(step: int):
        nonlocal rows_written, wbar_count
        log_row(spec, step * dt, y, log_out[rows_written])
        if wbar_out is not None and wbar_rows[0] <= rows_written < wbar_rows[1]:
            _, _, _, W = spec.views(y)
            wbar_out[...] += W
            wbar_count += 1
        rows_written += 1

    _, _, _, W = spec.views(y)
    if ckpt_out is not None:
        while ckpt_i < len(ckpt_steps) and ckpt_steps[ckpt_i] == 0:
            ckpt_out[ckpt_i] = W
            ckpt_i += 1
    emit(0)

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            t = (step - 1) * dt
            k1[:] = derivative(spec, t, y)
            yt[:] = y + (0.5 * dt) * k1
            k2 = derivative(spec, t + 0.5 * dt, yt)
            yt[:] = y + (0.5 * dt) * k2
            k3 = derivative(spec, t + 0.5 * dt, yt)
            yt[:] = y + dt * k3
            k4 = derivative(spec, t + dt, yt)
            y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

            bad = _check_small_blocks(spec, y)
            if bad is not None:
                status = STATUS_NONFINITE
                bad_step = step
                break
            if ckpt_out is not None:
                while ckpt_i < len(ckpt_steps) and ckpt_steps[ckpt_i] == step:
                    _, _, _, W = spec.views(y)
                    ckpt_out[ckpt_i] = W
                    ckpt_i += 1
            if step % log_stride == 0 or step == n_steps:
                if spec.mode == MODE_FULL and not np.all(np.isfinite(y)):
                    status = STATUS_NONFINITE
                    bad = "weights"
                    bad_step = step
                    break
                emit(step)

    return {
        "status": status,
        "bad_component": bad,
        "bad_step": bad_step,
        "rows": rows_written,
        "wbar_count": wbar_count,
        "y_final": y,
        "backend": BACKEND_NAME,
    }
