"""Coupled-system assembly, fixed-step RK4 integration, and run logging.

The flat state layout is: leader [p0; v0], then per-agent plant blocks
[p_i; nu_i], then per-agent observer blocks, then network weights ordered
agent-major, channel, unit.  `run_scenario` packs a Scenario for the
selected backend, integrates, and writes the run artifacts (log CSV,
weight checkpoint/mean tables, JSON metadata).
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, controller, estimator, models, rbf
from .config import SCHEMA_VERSION, RunConfig, Scenario
from .engine import EngineSpec, backend as select_backend
from .engine.spec import (
    MODE_ESTIMATOR,
    MODE_FULL,
    PLANT_LINEAR_DAMPED,
    PLANT_SYNTHETIC,
    PLANT_VESSEL,
    SIG_CONST,
    SIG_COSINE,
    SIG_ZERO,
)

__all__ = [
    "SimDivergence",
    "LogSchema",
    "RunResult",
    "build_engine_spec",
    "initial_state",
    "rk4_step",
    "system_derivative_reference",
    "run_scenario",
    "write_run",
    "load_run",
]


class SimDivergence(RuntimeError):
    def __init__(self, component: str, step: int):
        self.component = component
        self.step = step
        super().__init__(f"non-finite value in {component} at step {step}")


# ---------------------------------------------------------------------------
# Packing
# ---------------------------------------------------------------------------


def build_engine_spec(sc: Scenario, mode: str = "full") -> EngineSpec:
    n, N = sc.n, sc.N
    leader = sc.leader
    sig = leader.input_signal
    sig_kind = {"zero": SIG_ZERO, "constant": SIG_CONST, "cosine": SIG_COSINE}[sig.kind]
    n_r = leader.n_r
    zeros_r = np.zeros(n_r)

    gains = sc.gains
    H1 = np.broadcast_to(gains.H1, (N, n, n)).copy() if gains.H1.shape[0] == 1 else gains.H1.copy()
    H2 = np.broadcast_to(gains.H2, (N, n, n)).copy() if gains.H2.shape[0] == 1 else gains.H2.copy()

    L_s = sc.topology.follower_laplacian()
    QW = gains.gamma1 * gains.sigma * np.eye(N) + gains.gamma2 * L_s

    plant = sc.plant
    spec = EngineSpec(
        n=n,
        N=N,
        n_r=n_r,
        n_units=sc.grid.n_units,
        dim_q=sc.grid.dim_q,
        per_dim=sc.grid.per_dim,
        mode=MODE_FULL if mode == "full" else MODE_ESTIMATOR,
        A0=leader.A0.copy(),
        B0=leader.B0.copy(),
        sig_kind=sig_kind,
        sig_a=(sig.const if sig.kind == "constant" else sig.amp) if sig.kind != "zero" else zeros_r,
        sig_w=sig.omega if sig.kind == "cosine" else zeros_r,
        sig_ph=sig.phase if sig.kind == "cosine" else zeros_r,
        adj=sc.topology.adjacency.copy(),
        links=sc.topology.leader_links.copy(),
        degree=sc.topology.adjacency.sum(axis=1) + sc.topology.leader_links,
        K1=sc.observer.K1.copy(),
        K2=sc.observer.K2.copy(),
        alpha1=sc.observer.alpha1,
        alpha2=sc.observer.alpha2,
        eps=sc.observer.smoothing_eps,
        H1=H1,
        H2=H2,
        gamma1=gains.gamma1,
        gamma2=gains.gamma2,
        sigma=gains.sigma,
        offsets=sc.formation.offsets.copy(),
        QW=QW,
        M=plant.M.copy(),
        M_chol=np.linalg.cholesky(plant.M),
        grid_lo=sc.grid.bounds[:, 0].copy(),
        grid_h=sc.grid.spacing.copy(),
        grid_width=sc.grid.uniform_width,
        d_loc=sc.d_loc,
    )

    if isinstance(plant, models.ExampleVesselPlant):
        spec.plant_kind = PLANT_VESSEL
        spec.vessel_c = np.array([33.0, 1.15, 25.0])
        spec.D0 = np.array([[0.8, 0.0, 0.0], [0.0, 0.9, -0.1], [0.0, -0.1, 0.0]])
        spec.d_abs = np.array([1.3, 36.0, 0.0])
        spec.g0 = np.zeros(n)
    elif isinstance(plant, models.SyntheticRbfPlant):
        spec.plant_kind = PLANT_SYNTHETIC
        spec.syn_omega = plant.omega
        spec.syn_support = plant.support.astype(np.int64)
        spec.syn_w = plant.wstar.copy()
        spec.syn_centers = sc.grid.centers[plant.support].copy()
        spec.D0 = np.zeros((n, n))
        spec.d_abs = np.zeros(n)
        spec.g0 = np.zeros(n)
        spec.vessel_c = np.zeros(3)
    elif isinstance(plant, models.LinearDampedPlant):
        spec.plant_kind = PLANT_LINEAR_DAMPED
        spec.D0 = plant.D0.copy()
        spec.d_abs = plant.d_abs.copy()
        spec.g0 = plant.g0.copy()
        spec.vessel_c = np.zeros(3)
    else:
        raise TypeError(f"run_scenario supports packed plant kinds only, got {type(plant)}")
    if spec.vessel_c is None:
        spec.vessel_c = np.zeros(3)
    if spec.syn_support is None:
        spec.syn_support = np.zeros(0, dtype=np.int64)
        spec.syn_w = np.zeros((n, 0))
        spec.syn_centers = np.zeros((0, sc.grid.dim_q))
    return spec


def initial_state(sc: Scenario, mode: str = "full") -> np.ndarray:
    spec = build_engine_spec(sc, mode)
    y0 = np.zeros(spec.state_len)
    x0, plant, obs, W = spec.views(y0)
    x0[:] = sc.x0_init
    obs[:] = sc.xhat0
    if spec.mode == MODE_FULL:
        plant[:, : sc.n] = sc.agents_p0
        plant[:, sc.n :] = sc.agents_v0
        W[:] = 0.0  # weights always start at exactly zero
    return y0


# ---------------------------------------------------------------------------
# Log schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogSchema:
    n: int
    N: int
    mode: str = "full"

    @property
    def columns(self) -> list[str]:
        n, N = self.n, self.N
        cols = ["t"]
        cols += [f"p0_{k+1}" for k in range(n)] + [f"v0_{k+1}" for k in range(n)]
        if self.mode == "estimator":
            for i in range(1, N + 1):
                cols += [f"phat{i}_{k+1}" for k in range(n)] + [f"vhat{i}_{k+1}" for k in range(n)]
                cols += [f"estnorm{i}"]
            return cols
        for i in range(1, N + 1):
            cols += [f"p{i}_{k+1}" for k in range(n)]
            cols += [f"nu{i}_{k+1}" for k in range(n)]
            cols += [f"phat{i}_{k+1}" for k in range(n)] + [f"vhat{i}_{k+1}" for k in range(n)]
            cols += [f"tau{i}_{k+1}" for k in range(n)]
            cols += [f"betadot{i}_{k+1}" for k in range(n)]
            cols += [f"z1norm{i}", f"z2norm{i}", f"estnorm{i}"]
        for i in range(1, N + 1):
            cols += [f"wnorm{i}_{k+1}" for k in range(n)]
        cols += [f"wdiffmax_{k+1}" for k in range(n)]
        return cols

    def col(self, name: str) -> int:
        return self.columns.index(name)

    def cols(self, *names: str) -> list[int]:
        all_cols = self.columns
        return [all_cols.index(x) for x in names]

    def agent_block(self, i: int, what: str) -> list[int]:
        """Column indices of an agent's vector block, i is 1-based."""
        n = self.n
        return self.cols(*[f"{what}{i}_{k+1}" for k in range(n)])


# ---------------------------------------------------------------------------
# Module-level integrator op (reference; backends have their own loops)
# ---------------------------------------------------------------------------


def rk4_step(f, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step; aborts on non-finite stage values."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = f(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = f(t + dt, y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise SimDivergence(f"state[{bad}]", step=-1)
    return out


def system_derivative_reference(sc: Scenario, t: float, y: np.ndarray) -> np.ndarray:
    """Full-system derivative composed from the module-level operations
    (full regressor, generic plant path).  The backends implement the same
    map with localized regressors; tests compare the two.
    """
    spec = build_engine_spec(sc)
    n, N = sc.n, sc.N
    x0, plant, obs, W = spec.views(y)
    dy = np.zeros_like(y)
    dx0, dplant, dobs, dW = spec.views(dy)

    dx0[:] = models.leader_derivative(sc.leader, x0, t)
    dobs[:] = estimator.observer_derivative(sc.observer, obs, x0, sc.topology, sc.leader)

    S = np.empty((N, sc.grid.n_units))
    z2 = np.empty((N, n))
    for i in range(N):
        p, nu = plant[i, :n], plant[i, n:]
        J = sc.plant.J(p)
        z1 = controller.tracking_error(p, obs[i, :n], sc.formation.offsets[i])
        beta = controller.virtual_control(J, sc.gains.H1_for(i), z1, dobs[i, :n])
        z2[i] = nu - beta
        S[i] = rbf.regressor(sc.grid, plant[i])
        tau = controller.control_law(W[i], S[i], sc.gains.H2_for(i), z2[i], J, z1)
        dplant[i, :n], dplant[i, n:] = models.plant_derivative(sc.plant, p, nu, tau)
    dW[:] = controller.weight_update_derivative(W, S, z2, sc.gains, sc.topology)
    return dy


# ---------------------------------------------------------------------------
# Run orchestration
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    scenario_name: str
    schema: LogSchema
    log: np.ndarray
    checkpoint_times: np.ndarray
    checkpoints: np.ndarray | None
    wbar: np.ndarray | None
    wbar_window: tuple[float, float]
    status: int
    bad_component: str | None
    bad_step: int
    backend: str
    runtime_s: float
    meta: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return self.status != 0

    @property
    def times(self) -> np.ndarray:
        return self.log[:, 0]


def _log_rows(n_steps: int, stride: int) -> np.ndarray:
    steps = list(range(0, n_steps + 1, stride))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=np.int64)


def run_scenario(
    sc: Scenario,
    mode: str = "full",
    backend_name: str | None = None,
    run_cfg: RunConfig | None = None,
) -> RunResult:
    """Integrate the scenario and return the in-memory run artifacts.

    Deterministic: identical scenario + backend reproduce the log exactly.
    """
    run = run_cfg or sc.run
    spec = build_engine_spec(sc, mode)
    y0 = initial_state(sc, mode)
    eng = select_backend(backend_name)

    n_steps = run.n_steps
    row_steps = _log_rows(n_steps, run.log_stride)
    schema = LogSchema(sc.n, sc.N, mode)
    log = np.zeros((len(row_steps), len(schema.columns)))

    if mode == "full":
        ckpt_steps = np.unique(
            np.clip(np.round(np.asarray(run.checkpoints) * n_steps).astype(np.int64), 0, n_steps)
        )
        ckpt_out = np.zeros((len(ckpt_steps), sc.N, sc.n, sc.grid.n_units))
        w0, w1 = run.wbar_window
        s0, s1 = round(w0 * n_steps), round(w1 * n_steps)
        wbar_lo = int(np.searchsorted(row_steps, s0, side="left"))
        wbar_hi = int(np.searchsorted(row_steps, s1, side="right"))
        wbar_out = np.zeros((sc.N, sc.n, sc.grid.n_units))
    else:
        ckpt_steps = np.zeros(0, dtype=np.int64)
        ckpt_out = None
        wbar_lo = wbar_hi = 0
        wbar_out = None

    t0 = time.perf_counter()
    res = eng.run(
        spec,
        y0,
        run.dt,
        n_steps,
        run.log_stride,
        log,
        ckpt_steps,
        ckpt_out,
        (wbar_lo, wbar_hi),
        wbar_out,
    )
    runtime = time.perf_counter() - t0

    rows = res["rows"]
    log = log[:rows]
    wbar = None
    if wbar_out is not None and res["wbar_count"] > 0:
        wbar = wbar_out / res["wbar_count"]
    w0, w1 = (run.wbar_window if mode == "full" else (0.0, 0.0))

    return RunResult(
        scenario_name=sc.name,
        schema=schema,
        log=log,
        checkpoint_times=ckpt_steps * run.dt,
        checkpoints=ckpt_out,
        wbar=wbar,
        wbar_window=(w0 * run.t_end, w1 * run.t_end),
        status=res["status"],
        bad_component=res["bad_component"],
        bad_step=res["bad_step"],
        backend=res["backend"],
        runtime_s=runtime,
        meta={
            "schema_version": SCHEMA_VERSION,
            "code_version": __version__,
            "dt": run.dt,
            "t_end": run.t_end,
            "log_stride": run.log_stride,
            "n": sc.n,
            "N": sc.N,
            "n_units": sc.grid.n_units,
            "mode": mode,
            "config": sc.raw,
        },
    )


# ---------------------------------------------------------------------------
# Disk format
# ---------------------------------------------------------------------------


def write_run(res: RunResult, outdir: str | Path) -> dict[str, Path]:
    """Write log.csv, checkpoints.csv, wbar.csv and meta.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"log": outdir / "log.csv", "meta": outdir / "meta.json"}

    header = ",".join(res.schema.columns)
    np.savetxt(paths["log"], res.log, fmt="%.17g", delimiter=",", header=header, comments="")

    if res.checkpoints is not None:
        n_ckpt, N, n, n_units = res.checkpoints.shape
        rows = []
        for c in range(n_ckpt):
            t = res.checkpoint_times[c]
            for i in range(N):
                for k in range(n):
                    w = res.checkpoints[c, i, k]
                    nz = np.flatnonzero(w)
                    for m in nz:
                        rows.append((t, i + 1, k + 1, m, w[m]))
        arr = np.asarray(rows, dtype=float) if rows else np.zeros((0, 5))
        paths["checkpoints"] = outdir / "checkpoints.csv"
        np.savetxt(
            paths["checkpoints"],
            arr,
            fmt=["%.17g", "%d", "%d", "%d", "%.17g"],
            delimiter=",",
            header="t,agent,channel,unit,w",
            comments="",
        )
    if res.wbar is not None:
        N, n, n_units = res.wbar.shape
        rows = []
        for i in range(N):
            for k in range(n):
                w = res.wbar[i, k]
                nz = np.flatnonzero(w)
                for m in nz:
                    rows.append((i + 1, k + 1, m, w[m]))
        arr = np.asarray(rows, dtype=float) if rows else np.zeros((0, 4))
        paths["wbar"] = outdir / "wbar.csv"
        np.savetxt(
            paths["wbar"],
            arr,
            fmt=["%d", "%d", "%d", "%.17g"],
            delimiter=",",
            header="agent,channel,unit,w",
            comments="",
        )

    meta = dict(res.meta)
    meta.update(
        scenario=res.scenario_name,
        status=res.status,
        bad_component=res.bad_component,
        bad_step=res.bad_step,
        backend=res.backend,
        runtime_s=res.runtime_s,
        rows=int(res.log.shape[0]),
        columns=res.schema.columns,
        checkpoint_times=[float(t) for t in res.checkpoint_times],
        wbar_window=[float(x) for x in res.wbar_window],
        wbar_present=res.wbar is not None,
    )
    with open(paths["meta"], "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
    return paths


def load_run(outdir: str | Path) -> RunResult:
    """Reload a run written by write_run (weight tables stay sparse)."""
    outdir = Path(outdir)
    with open(outdir / "meta.json") as f:
        meta = json.load(f)
    if meta["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"log schema version {meta['schema_version']} != {SCHEMA_VERSION}")
    log = np.loadtxt(outdir / "log.csv", delimiter=",", skiprows=1, ndmin=2)
    t = log[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ValueError("log rows must be strictly increasing in t")
    schema = LogSchema(meta["n"], meta["N"], meta["mode"])
    if schema.columns != meta["columns"]:
        raise ValueError("log columns do not match schema")

    N, n, n_units = meta["N"], meta["n"], meta["n_units"]
    def _load_table(path: Path, n_cols: int) -> np.ndarray:
        with open(path) as f:
            lines = f.read().splitlines()[1:]
        if not lines:
            return np.zeros((0, n_cols))
        return np.loadtxt(lines, delimiter=",", ndmin=2)

    ckpts = None
    ckpt_times = np.asarray(meta["checkpoint_times"])
    f_ck = outdir / "checkpoints.csv"
    if f_ck.exists():
        raw = _load_table(f_ck, 5)
        ckpts = np.zeros((len(ckpt_times), N, n, n_units))
        for row in raw:
            c = int(np.argmin(np.abs(ckpt_times - row[0])))
            ckpts[c, int(row[1]) - 1, int(row[2]) - 1, int(row[3])] = row[4]
    wbar = None
    f_wb = outdir / "wbar.csv"
    if f_wb.exists() and meta.get("wbar_present"):
        raw = _load_table(f_wb, 4)
        wbar = np.zeros((N, n, n_units))
        for row in raw:
            wbar[int(row[0]) - 1, int(row[1]) - 1, int(row[2])] = row[3]

    return RunResult(
        scenario_name=meta["scenario"],
        schema=schema,
        log=log,
        checkpoint_times=ckpt_times,
        checkpoints=ckpts,
        wbar=wbar,
        wbar_window=tuple(meta["wbar_window"]),
        status=meta["status"],
        bad_component=meta["bad_component"],
        bad_step=meta["bad_step"],
        backend=meta["backend"],
        runtime_s=meta["runtime_s"],
        meta=meta,
    )
