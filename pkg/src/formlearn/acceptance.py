"""Acceptance-criterion evaluators.

Each function turns one release criterion into a measured verdict dict
with an "ok" flag and the numbers behind it.  The test suite asserts on
these; the CLI analyze command reports them.  Tolerances are fixed here,
not configurable, so a green run means the shipped thresholds held.
"""
from __future__ import annotations

import numpy as np

from . import analysis, controller, rbf
from .config import Scenario
from .models import SyntheticRbfPlant
from .sim import RunResult

EPS = np.finfo(float).eps


# 1 -------------------------------------------------------------------------


def estimator_convergence(
    run: RunResult, amplitude: float = 80.0, within_s: float = 10.0, frac: float = 0.01
) -> dict:
    """Max position-estimation error drops below frac*amplitude within
    within_s seconds and stays there."""
    err = analysis.position_estimation_error(run).max(axis=1)
    t = run.log[:, 0]
    limit = frac * amplitude
    below = err <= limit
    ok_idx = None
    for k in np.flatnonzero(below):
        if below[k:].all():
            ok_idx = k
            break
    t_reach = float(t[ok_idx]) if ok_idx is not None else np.inf
    return {
        "ok": bool(t_reach <= within_s),
        "limit": limit,
        "t_reach": t_reach,
        "sup_after_reach": float(err[ok_idx:].max()) if ok_idx is not None else np.inf,
        "final": float(err[-1]),
    }


# 2 -------------------------------------------------------------------------


def tracking(run: RunResult, offsets: np.ndarray, limit: float = 1.0) -> dict:
    tm = analysis.tracking_metrics(run, offsets)
    return {
        "ok": bool(np.all(tm.steady <= limit) and np.all(tm.decay_rate > 0)),
        "limit": limit,
        "steady": tm.steady.tolist(),
        "decay_rate": tm.decay_rate.tolist(),
    }


# 3 -------------------------------------------------------------------------


def formation_geometry(run: RunResult, offsets: np.ndarray, limit: float = 1.5) -> dict:
    """Pairwise displacements match offset differences in the steady window."""
    log, sch = run.log, run.schema
    t = log[:, 0]
    m = (t >= run.wbar_window[0]) & (t <= run.wbar_window[1])
    worst = 0.0
    for i in range(1, sch.N + 1):
        pi = log[m][:, sch.agent_block(i, "p")]
        for j in range(i + 1, sch.N + 1):
            pj = log[m][:, sch.agent_block(j, "p")]
            dev = np.linalg.norm(pi - pj - (offsets[i - 1] - offsets[j - 1]), axis=1).max()
            worst = max(worst, float(dev))
    return {"ok": bool(worst <= limit), "limit": limit, "worst_pair_deviation": worst}


# 4 -------------------------------------------------------------------------


def weight_consensus(
    run: RunResult, ratio_limit: float = 0.10, ripple: float = 0.05, envelope_T: float = 2 * np.pi
) -> dict:
    """Final pairwise weight gap small relative to the weight scale, and its
    per-period envelope non-increasing (ripple allowance relative to scale)
    over the last half of the run."""
    cm = analysis.consensus_metrics(run)
    n = run.schema.n
    final_gap = cm.pairwise_max[-1]
    scale = cm.agent_norms[-1].max(axis=0)  # per channel
    ratio = final_gap / np.maximum(scale, 1e-300)
    t = cm.series_times
    t_half = t[-1] / 2.0
    env_ok = True
    env_rise = 0.0
    for k in range(n):
        wd = cm.series_pairwise_max[:, k]
        env = []
        t0 = t_half
        while t0 + envelope_T <= t[-1] + 1e-9:
            m = (t >= t0) & (t < t0 + envelope_T)
            if m.any():
                env.append(wd[m].max())
            t0 += envelope_T
        env = np.asarray(env)
        if env.size >= 2:
            rise = float(np.max(env - np.minimum.accumulate(env)))
            env_rise = max(env_rise, rise / max(scale[k], 1e-300))
            if rise > ripple * max(scale[k], 1e-300):
                env_ok = False
    return {
        "ok": bool(np.all(ratio <= ratio_limit) and env_ok),
        "ratio_limit": ratio_limit,
        "final_gap_ratio": ratio.tolist(),
        "envelope_rise_frac": env_rise,
        "envelope_ok": env_ok,
    }


# 5 -------------------------------------------------------------------------


def learning_accuracy(
    run: RunResult,
    scenario: Scenario,
    rel_limit: float = 0.20,
    far_ratio_limit: float = 0.05,
    d_loc: float = 45.0,
) -> dict:
    """Windowed relative RMS of the uncertainty approximation per channel
    with nonzero true scale, plus far-unit weight smallness."""
    am = analysis.approximation_error(run, scenario)
    rel = am.rel_rms_wbar
    nonzero = am.g_rms > 0
    rel_ok = bool(np.all(rel[nonzero] <= rel_limit)) if nonzero.any() else True
    fn = analysis.far_neuron_check(run, scenario.grid, d_loc, window=run.wbar_window)
    if fn["applicable"]:
        far_ratio = float(np.max(fn["far_max"] / np.maximum(fn["near_max"], 1e-300)))
        far_ok = far_ratio <= far_ratio_limit
    else:
        far_ratio = 0.0
        far_ok = True
    return {
        "ok": bool(rel_ok and far_ok),
        "rel_ok": rel_ok,
        "far_ok": far_ok,
        "rel_limit": rel_limit,
        "worst_rel_rms": float(np.nanmax(rel)) if np.any(nonzero) else 0.0,
        "rel_rms": rel.tolist(),
        "far_ratio": far_ratio,
    }


# 6 -------------------------------------------------------------------------


def synthetic_residual(scenario: Scenario, n_states: int = 100, seed: int = 2024) -> dict:
    """Velocity-error-dynamics identity on the exactly representable plant
    at randomized states.

    All observers and the leader share one random state (zero
    disagreement); positions, weights and the shared observer state are
    free, and each agent's velocity is placed on the manifold where the
    plant's spring exactly matches the virtual-control rate
    (nu_i = vhat + omega^2 H1^{-1} (p_i - phat)), which is where the
    network expansion is the entire uncertainty."""
    plant = scenario.plant
    if not isinstance(plant, SyntheticRbfPlant):
        raise ValueError("residual check needs the synthetic network plant")
    rng = np.random.default_rng(seed)
    n, N = scenario.n, scenario.N
    H1 = scenario.gains.H1_for(0)
    omega2 = plant.omega**2
    wstar = plant.wstar_full()
    worst = 0.0
    for _ in range(n_states):
        p = rng.uniform(-80, 80, (N, n))
        W = rng.normal(0, 5.0, (N, n, scenario.grid.n_units))
        phat = rng.uniform(-60, 60, n)
        vhat = rng.uniform(-40, 40, n)
        nu = vhat[None, :] + omega2 * np.linalg.solve(H1, (p - phat[None, :]).T).T
        x_common = np.concatenate([phat, vhat])
        xhat = np.tile(x_common, (N, 1))
        res = controller.closed_loop_residual_check(
            plant,
            wstar,
            scenario.grid,
            scenario.gains,
            scenario.observer,
            scenario.topology,
            scenario.leader,
            scenario.formation,
            p,
            nu,
            xhat,
            x_common.copy(),
            W,
        )
        worst = max(worst, res)
    return {"ok": bool(worst <= 1e-8), "limit": 1e-8, "worst_residual": worst, "n_states": n_states}


def synthetic_weight_convergence(
    run: RunResult, scenario: Scenario, limit: float = 0.05, d_loc: float = 30.0
) -> dict:
    """Final weights match the plant's generating weights on the active set
    for every agent (relative vector error per agent and channel)."""
    plant = scenario.plant
    if not isinstance(plant, SyntheticRbfPlant):
        raise ValueError("needs the synthetic network plant")
    log, sch = run.log, run.schema
    t = log[:, 0]
    rows = np.flatnonzero((t >= run.wbar_window[0]) & (t <= run.wbar_window[1]))
    samples = np.vstack(
        [
            np.hstack(
                [log[rows][:, sch.agent_block(i, "p")], log[rows][:, sch.agent_block(i, "nu")]]
            )
            for i in range(1, sch.N + 1)
        ]
    )
    zeta, _ = rbf.partition_zeta(scenario.grid, samples, d_loc)
    wstar = plant.wstar_full()[:, zeta]
    W_end = run.checkpoints[-1][:, :, zeta]
    worst = 0.0
    per_agent = []
    for i in range(sch.N):
        errs = []
        for k in range(sch.n):
            denom = np.linalg.norm(wstar[k])
            if denom == 0.0:
                continue
            errs.append(float(np.linalg.norm(W_end[i, k] - wstar[k]) / denom))
        per_agent.append(max(errs))
        worst = max(worst, max(errs))
    return {
        "ok": bool(worst <= limit),
        "limit": limit,
        "worst_rel_err": worst,
        "per_agent": per_agent,
        "zeta_size": int(zeta.size),
    }


# 7 -------------------------------------------------------------------------


def pe_windows(
    run: RunResult,
    scenario: Scenario,
    T0: float = 2 * np.pi,
    t_from: float = 20.0,
    d_loc: float = 45.0,
) -> dict:
    """Windowed Gram smallest eigenvalue strictly positive (above numeric
    noise) for every tiled window of length T0 past the transient, for
    every agent."""
    t_end = run.log[-1, 0]
    min_eta = np.inf
    min_ratio = np.inf
    n_windows = 0
    for agent in range(1, scenario.N + 1):
        t0 = t_from
        while t0 + T0 <= t_end + 1e-9:
            pm = analysis.pe_metric(run, scenario.grid, agent, (t0, t0 + T0), d_loc)
            noise = 100.0 * EPS * max(pm.gram_trace, 1e-300)
            min_eta = min(min_eta, pm.eta)
            min_ratio = min(min_ratio, pm.eta / max(noise, 1e-300))
            n_windows += 1
            t0 += T0
    return {
        "ok": bool(min_ratio > 1.0 and min_eta > 0.0),
        "min_eta": float(min_eta),
        "min_eta_over_noise": float(min_ratio),
        "n_windows": n_windows,
    }


def pe_stationary_zero(scenario: Scenario, d_loc: float = 45.0) -> dict:
    """A constant trajectory with more than one active unit must measure a
    zero excitation level (rank-one Gram)."""
    grid = scenario.grid
    x = grid.centers[0] + 0.5 * grid.spacing  # between lattice points
    X = np.tile(x, (50, 1))
    zeta, _ = rbf.partition_zeta(grid, X, max(d_loc, float(np.linalg.norm(grid.spacing))))
    centers = grid.centers[zeta]
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    S = np.exp(-d2 / grid.widths[zeta])
    wts = np.full(50, 0.1)
    gram = (S * wts[:, None]).T @ S
    gram = 0.5 * (gram + gram.T)
    eig = np.linalg.eigvalsh(gram)
    noise = 100.0 * EPS * np.trace(gram)
    return {
        "ok": bool(len(zeta) > 1 and eig[0] <= noise),
        "eta": float(eig[0]),
        "noise_floor": float(noise),
        "zeta_size": int(len(zeta)),
    }


# 8 -------------------------------------------------------------------------


def rk4_order_ratio(scenario: Scenario, dt: float, t_end: float, backend: str | None = None) -> dict:
    """Halving the step around dt changes the final plant states by ~16x
    less (fourth-order convergence) on a smooth configuration."""
    from .config import RunConfig
    from .sim import run_scenario

    finals = []
    for k in range(3):
        rc = RunConfig(dt=dt / 2**k, t_end=t_end, log_stride=10**9)
        res = run_scenario(scenario, run_cfg=rc, backend_name=backend)
        if res.status != 0:
            return {"ok": False, "error": f"divergence at dt={dt / 2**k}"}
        log = res.log[-1]
        sch = res.schema
        plant_cols = []
        for i in range(1, sch.N + 1):
            plant_cols += sch.agent_block(i, "p") + sch.agent_block(i, "nu")
        finals.append(log[plant_cols])
    e1 = float(np.linalg.norm(finals[0] - finals[1]))
    e2 = float(np.linalg.norm(finals[1] - finals[2]))
    ratio = e1 / e2 if e2 > 0 else np.inf
    return {"ok": bool(16.0 * 0.7 <= ratio <= 16.0 * 1.3), "ratio": ratio, "e_dt": e1, "e_dt2": e2}


def reproducibility(scenario: Scenario, run_cfg=None, backend: str | None = None) -> dict:
    """Two identical integrations produce bitwise-identical logs."""
    from .sim import run_scenario

    a = run_scenario(scenario, run_cfg=run_cfg, backend_name=backend)
    b = run_scenario(scenario, run_cfg=run_cfg, backend_name=backend)
    same_log = bool(np.array_equal(a.log, b.log))
    same_w = bool(
        (a.checkpoints is None and b.checkpoints is None)
        or np.array_equal(a.checkpoints, b.checkpoints)
    )
    return {"ok": same_log and same_w, "log_identical": same_log, "weights_identical": same_w}


# 9 -------------------------------------------------------------------------


def uub(run: RunResult, ceilings: dict) -> dict:
    rep = analysis.uub_monitor(run, ceilings)
    rep["ok"] = bool(rep["ok"] and run.status == 0)
    rep["diverged"] = bool(run.status != 0)
    return rep
