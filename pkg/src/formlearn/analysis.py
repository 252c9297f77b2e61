"""Post-run metrics: tracking/estimation errors, weight consensus,
function-approximation accuracy, excitation measurement, and far-unit
weight smallness.

Everything here is pure post-processing over a RunResult (or a reloaded
run); nothing feeds back into simulation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rbf
from .config import Scenario
from .models import PlantModel, true_G
from .sim import LogSchema, RunResult

__all__ = [
    "TrackingMetrics",
    "ApproximationMetrics",
    "ConsensusMetrics",
    "PeMetrics",
    "tracking_metrics",
    "estimation_error",
    "approximation_error",
    "consensus_metrics",
    "pe_metric",
    "far_neuron_check",
    "uub_monitor",
    "beta_dot_fd_check",
    "MetricReport",
]


def _agent_block(log: np.ndarray, schema: LogSchema, i: int, what: str) -> np.ndarray:
    return log[:, schema.agent_block(i, what)]


# ---------------------------------------------------------------------------
# Tracking / estimation
# ---------------------------------------------------------------------------


@dataclass
class TrackingMetrics:
    times: np.ndarray
    errors: np.ndarray  # (rows, N)
    steady: np.ndarray  # (N,) mean over the averaging window
    decay_rate: np.ndarray  # (N,) log-linear fit over the transient
    window: tuple[float, float]
    window_rows: int = 0
    window_degenerate: bool = False  # no rows inside the window: fell back
    # to the final log row


def _fit_decay_rate(t: np.ndarray, e: np.ndarray, steady: float) -> float:
    """Slope of -log(e) from t=0 until e first drops below 5x steady."""
    thresh = max(5.0 * steady, 1e-12)
    below = np.flatnonzero(e < thresh)
    end = below[0] if below.size else len(e) - 1
    end = max(end, 2)
    seg_t, seg_e = t[: end + 1], e[: end + 1]
    good = seg_e > 0
    if good.sum() < 2:
        return np.nan
    slope = np.polyfit(seg_t[good], np.log(seg_e[good]), 1)[0]
    return -float(slope)


def tracking_metrics(run: RunResult, offsets: np.ndarray, window: tuple[float, float] | None = None) -> TrackingMetrics:
    """Per-agent formation-tracking error ||p_i - p0 - offset_i|| with its
    steady mean and an empirical exponential decay rate of the transient."""
    log, sch = run.log, run.schema
    t = log[:, 0]
    n, N = sch.n, sch.N
    p0 = log[:, 1 : 1 + n]
    window = window or run.wbar_window
    in_win = (t >= window[0]) & (t <= window[1])
    degenerate = not np.any(in_win)
    if degenerate:
        in_win = t >= t[-1]  # degenerate run: use the final row
    errors = np.empty((len(t), N))
    steady = np.empty(N)
    decay = np.empty(N)
    for i in range(1, N + 1):
        e = np.linalg.norm(_agent_block(log, sch, i, "p") - p0 - offsets[i - 1], axis=1)
        errors[:, i - 1] = e
        steady[i - 1] = e[in_win].mean()
        decay[i - 1] = _fit_decay_rate(t, e, steady[i - 1])
    return TrackingMetrics(
        times=t,
        errors=errors,
        steady=steady,
        decay_rate=decay,
        window=window,
        window_rows=int(in_win.sum()),
        window_degenerate=degenerate,
    )


def estimation_error(run: RunResult) -> np.ndarray:
    """(rows, N) series of ||xhat_i - x0|| (position+velocity stack)."""
    log, sch = run.log, run.schema
    n, N = sch.n, sch.N
    x0 = log[:, 1 : 1 + 2 * n]
    out = np.empty((log.shape[0], N))
    for i in range(1, N + 1):
        xh = np.hstack([_agent_block(log, sch, i, "phat"), _agent_block(log, sch, i, "vhat")])
        out[:, i - 1] = np.linalg.norm(xh - x0, axis=1)
    return out


def position_estimation_error(run: RunResult) -> np.ndarray:
    """(rows, N) series of ||phat_i - p0||."""
    log, sch = run.log, run.schema
    n, N = sch.n, sch.N
    p0 = log[:, 1 : 1 + n]
    return np.stack(
        [np.linalg.norm(_agent_block(log, sch, i, "phat") - p0, axis=1) for i in range(1, N + 1)],
        axis=1,
    )


# ---------------------------------------------------------------------------
# Function approximation
# ---------------------------------------------------------------------------


@dataclass
class ApproximationMetrics:
    rel_rms_wbar: np.ndarray  # (N, n); nan where the absolute fallback applies
    abs_rms_wbar: np.ndarray  # (N, n)
    rel_rms_final: np.ndarray  # same with the final-checkpoint weights
    g_rms: np.ndarray  # (N, n) scale of the true uncertainty
    window: tuple[float, float]
    n_samples: int
    series: dict = field(default_factory=dict)  # per (agent,channel): (t, G, Ghat)


def _regressor_rows(grid: rbf.RbfGrid, X: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Stacked full regressors for sample rows X, chunked for memory."""
    out = np.empty((X.shape[0], grid.n_units))
    for a in range(0, X.shape[0], chunk):
        b = min(a + chunk, X.shape[0])
        d2 = ((X[a:b, None, :] - grid.centers[None, :, :]) ** 2).sum(axis=2)
        out[a:b] = np.exp(-d2 / grid.widths)
    return out


def approximation_error(
    run: RunResult,
    scenario: Scenario,
    window: tuple[float, float] | None = None,
    keep_series: bool = False,
) -> ApproximationMetrics:
    """Relative RMS of the uncertainty-approximation mismatch along the
    windowed trajectory, per agent and output channel.

    The true uncertainty uses the logged analytic beta_dot; the network
    estimate uses the run's weight mean (and, as a second variant, the
    final-checkpoint weights as the instantaneous weights of the window
    end).  Channels whose true-uncertainty RMS is zero fall back to the
    absolute RMS (rel entry nan).
    """
    if run.wbar is None:
        raise ValueError("run has no weight-mean table")
    log, sch = run.log, run.schema
    n, N = sch.n, sch.N
    t = log[:, 0]
    window = window or run.wbar_window
    rows = np.flatnonzero((t >= window[0]) & (t <= window[1]))
    if rows.size == 0:
        raise ValueError(f"no log rows inside window {window}")
    plant: PlantModel = scenario.plant
    grid = scenario.grid
    W_end = run.checkpoints[-1] if run.checkpoints is not None else run.wbar

    rel_wbar = np.full((N, n), np.nan)
    abs_wbar = np.zeros((N, n))
    rel_final = np.full((N, n), np.nan)
    g_rms = np.zeros((N, n))
    series: dict = {}
    for i in range(1, N + 1):
        P = _agent_block(log, sch, i, "p")[rows]
        NU = _agent_block(log, sch, i, "nu")[rows]
        BD = _agent_block(log, sch, i, "betadot")[rows]
        X = np.hstack([P, NU])
        S = _regressor_rows(grid, X)
        G = np.stack(
            [true_G(plant, X[r], BD[r]) for r in range(X.shape[0])]
        )  # (rows, n)
        Ghat = S @ run.wbar[i - 1].T  # (rows, n)
        Gfin = S @ W_end[i - 1].T
        for k in range(n):
            scale = float(np.sqrt(np.mean(G[:, k] ** 2)))
            g_rms[i - 1, k] = scale
            err = float(np.sqrt(np.mean((G[:, k] - Ghat[:, k]) ** 2)))
            err_fin = float(np.sqrt(np.mean((G[:, k] - Gfin[:, k]) ** 2)))
            abs_wbar[i - 1, k] = err
            if scale > 0.0:
                rel_wbar[i - 1, k] = err / scale
                rel_final[i - 1, k] = err_fin / scale
            if keep_series:
                series[(i, k + 1)] = (t[rows], G[:, k].copy(), Ghat[:, k].copy())
    return ApproximationMetrics(
        rel_rms_wbar=rel_wbar,
        abs_rms_wbar=abs_wbar,
        rel_rms_final=rel_final,
        g_rms=g_rms,
        window=window,
        n_samples=rows.size,
        series=series,
    )


# ---------------------------------------------------------------------------
# Consensus
# ---------------------------------------------------------------------------


@dataclass
class ConsensusMetrics:
    checkpoint_times: np.ndarray
    pairwise_max: np.ndarray  # (n_ckpt, n)
    agent_norms: np.ndarray  # (n_ckpt, N, n)
    series_times: np.ndarray
    series_pairwise_max: np.ndarray  # (rows, n) from the run log
    series_agent_norms: np.ndarray  # (rows, N, n)


def consensus_metrics(run: RunResult) -> ConsensusMetrics:
    if run.checkpoints is None:
        raise ValueError("run has no weight checkpoints")
    if run.schema.N < 2:
        raise ValueError("pairwise consensus needs at least two agents")
    ck = run.checkpoints
    n_ckpt, N, n, _ = ck.shape
    pw = np.zeros((n_ckpt, n))
    norms = np.zeros((n_ckpt, N, n))
    for c in range(n_ckpt):
        for k in range(n):
            worst = 0.0
            for i in range(N):
                norms[c, i, k] = np.linalg.norm(ck[c, i, k])
                for j in range(i + 1, N):
                    worst = max(worst, float(np.linalg.norm(ck[c, i, k] - ck[c, j, k])))
            pw[c, k] = worst
    log, sch = run.log, run.schema
    s_pw = np.stack([log[:, sch.col(f"wdiffmax_{k+1}")] for k in range(n)], axis=1)
    s_norms = np.stack(
        [
            np.stack([log[:, sch.col(f"wnorm{i+1}_{k+1}")] for k in range(n)], axis=1)
            for i in range(N)
        ],
        axis=1,
    )
    return ConsensusMetrics(
        checkpoint_times=run.checkpoint_times,
        pairwise_max=pw,
        agent_norms=norms,
        series_times=log[:, 0],
        series_pairwise_max=s_pw,
        series_agent_norms=s_norms,
    )


# ---------------------------------------------------------------------------
# Excitation
# ---------------------------------------------------------------------------


@dataclass
class PeMetrics:
    eta: float
    window: tuple[float, float]
    zeta: np.ndarray
    gram_trace: float


def pe_metric(
    run: RunResult,
    grid: rbf.RbfGrid,
    agent: int,
    window: tuple[float, float],
    d_loc: float,
) -> PeMetrics:
    """Smallest eigenvalue of the windowed Gram integral of the localized
    regressor along one agent's trajectory (trapezoid rule on log rows).

    The active set is the set of units within d_loc of the window's own
    trajectory samples; an empty set is an error.
    """
    log, sch = run.log, run.schema
    t = log[:, 0]
    rows = np.flatnonzero((t >= window[0]) & (t <= window[1]))
    if rows.size < 2:
        raise ValueError(f"window {window} has fewer than two log rows")
    X = np.hstack(
        [_agent_block(log, sch, agent, "p")[rows], _agent_block(log, sch, agent, "nu")[rows]]
    )
    zeta, _ = rbf.partition_zeta(grid, X, d_loc)
    if zeta.size == 0:
        raise ValueError(f"no units within {d_loc} of the window trajectory")
    centers = grid.centers[zeta]
    widths = grid.widths[zeta]
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    S = np.exp(-d2 / widths)  # (rows, |zeta|)
    tw = t[rows]
    wts = np.empty(rows.size)
    wts[1:-1] = 0.5 * (tw[2:] - tw[:-2])
    wts[0] = 0.5 * (tw[1] - tw[0])
    wts[-1] = 0.5 * (tw[-1] - tw[-2])
    gram = (S * wts[:, None]).T @ S
    gram = 0.5 * (gram + gram.T)
    eig = np.linalg.eigvalsh(gram)
    return PeMetrics(eta=float(eig[0]), window=window, zeta=zeta, gram_trace=float(np.trace(gram)))


def far_neuron_check(
    run: RunResult, grid: rbf.RbfGrid, d_loc: float, window: tuple[float, float] | None = None
) -> dict:
    """Union-trajectory split: max |w| over far units vs near units at the
    final checkpoint, per (agent, channel)."""
    if run.checkpoints is None:
        raise ValueError("run has no weight checkpoints")
    log, sch = run.log, run.schema
    t = log[:, 0]
    rows = np.arange(len(t))
    if window is not None:
        rows = np.flatnonzero((t >= window[0]) & (t <= window[1]))
    samples = np.vstack(
        [
            np.hstack([_agent_block(log, sch, i, "p")[rows], _agent_block(log, sch, i, "nu")[rows]])
            for i in range(1, sch.N + 1)
        ]
    )
    zeta, zbar = rbf.partition_zeta(grid, samples, d_loc)
    W = run.checkpoints[-1]
    if zbar.size == 0:
        return {"applicable": False, "zeta_size": int(zeta.size)}
    far_max = np.abs(W[:, :, zbar]).max(axis=2)  # (N, n)
    near_max = np.abs(W[:, :, zeta]).max(axis=2) if zeta.size else np.zeros_like(far_max)
    return {
        "applicable": True,
        "zeta_size": int(zeta.size),
        "zbar_size": int(zbar.size),
        "far_max": far_max,
        "near_max": near_max,
    }


# ---------------------------------------------------------------------------
# Boundedness & derivative-chain validation
# ---------------------------------------------------------------------------


def uub_monitor(run: RunResult, ceilings: dict, t_from: float = 0.0) -> dict:
    """Finite-ness plus configured ceilings on sup-norms from t_from on."""
    log, sch = run.log, run.schema
    t = log[:, 0]
    m = t >= t_from
    N, n = sch.N, sch.n
    z1 = np.stack([log[m, sch.col(f"z1norm{i}")] for i in range(1, N + 1)])
    z2 = np.stack([log[m, sch.col(f"z2norm{i}")] for i in range(1, N + 1)])
    w_inf = np.stack(
        [[log[m, sch.col(f"wnorm{i}_{k}")] for k in range(1, n + 1)] for i in range(1, N + 1)]
    )
    report = {
        "finite": bool(np.all(np.isfinite(log))),
        "z1_sup": float(z1.max()),
        "z2_sup": float(z2.max()),
        "w_norm_sup": float(w_inf.max()),
        "z1_ok": bool(z1.max() <= ceilings["z1"]),
        "z2_ok": bool(z2.max() <= ceilings["z2"]),
        "w_ok": bool(w_inf.max() <= ceilings["w_inf"]),
    }
    report["ok"] = all([report["finite"], report["z1_ok"], report["z2_ok"], report["w_ok"]])
    return report


def beta_dot_fd_check(
    run: RunResult, scenario: Scenario, window: tuple[float, float]
) -> dict:
    """Cross-validate the logged analytic beta_dot against a centered
    finite difference of beta reconstructed from the logged states."""
    log, sch = run.log, run.schema
    t = log[:, 0]
    rows = np.flatnonzero((t >= window[0]) & (t <= window[1]))
    if rows.size < 5:
        raise ValueError("window too short for finite differences")
    n, N = sch.n, sch.N
    obs = scenario.observer
    topo = scenario.topology
    x0 = log[:, 1 : 1 + 2 * n]
    worst = 0.0
    for i in range(1, N + 1):
        xh_all = [
            np.hstack([_agent_block(log, sch, j, "phat"), _agent_block(log, sch, j, "vhat")])
            for j in range(1, N + 1)
        ]
        deg = topo.adjacency.sum(axis=1)[i - 1] + topo.leader_links[i - 1]
        phi = deg * xh_all[i - 1] - sum(
            topo.adjacency[i - 1, j] * xh_all[j] for j in range(N)
        )
        phi -= topo.leader_links[i - 1] * x0
        phat_dot = xh_all[i - 1][:, n:] + obs.alpha1 * (phi @ obs.K1.T)[:, :n]
        p = _agent_block(log, sch, i, "p")
        z1 = p - xh_all[i - 1][:, :n] - scenario.formation.offsets[i - 1]
        beta = phat_dot - z1 @ scenario.gains.H1_for(i - 1).T
        r = rows[2:-2]
        h1 = t[r + 1] - t[r - 1]
        fd = (beta[r + 1] - beta[r - 1]) / h1[:, None]
        logged = _agent_block(log, sch, i, "betadot")[r]
        scale = max(np.abs(logged).max(), 1e-9)
        worst = max(worst, float(np.abs(fd - logged).max() / scale))
    return {"worst_rel": worst, "ok": worst <= 1e-2}


# ---------------------------------------------------------------------------
# Bundled report
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    tracking: TrackingMetrics
    estimation: np.ndarray
    consensus: ConsensusMetrics | None
    approximation: ApproximationMetrics | None
    uub: dict
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "steady_tracking_error": [float(x) for x in self.tracking.steady],
            "decay_rate": [float(x) for x in self.tracking.decay_rate],
            "final_estimation_error": [float(x) for x in self.estimation[-1]],
            "window_rows": self.tracking.window_rows,
            "window_degenerate": self.tracking.window_degenerate,
            "uub": self.uub,
        }
        if self.consensus is not None:
            out["final_pairwise_weight_gap"] = [float(x) for x in self.consensus.pairwise_max[-1]]
            out["final_agent_weight_norms"] = self.consensus.agent_norms[-1].tolist()
        if self.approximation is not None:
            out["rel_rms_wbar"] = self.approximation.rel_rms_wbar.tolist()
            out["g_rms"] = self.approximation.g_rms.tolist()
        out.update(self.extras)
        return out
