"""Command-line interface: validate configs, run scenarios, analyze logs,
and manage golden regression data.

Exit codes: 0 success, 2 validation failure, 3 divergence, 4 I/O error.
FORMLEARN_OUTDIR overrides the output directory root.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, acceptance, analysis
from .config import ConfigError, builtin_config, load_scenario, validate_config
from .sim import build_engine_spec, initial_state, load_run, run_scenario, write_run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


def _load_config_arg(args) -> dict:
    if args.scenario:
        return builtin_config(args.scenario)
    with open(args.config) as f:
        return json.load(f)


def _apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """--override a.b.c=value with JSON-parsed values."""
    for ov in overrides or []:
        key, _, raw = ov.partition("=")
        if not _:
            raise ValueError(f"override {ov!r} must be key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return cfg


def _outdir(cfg: dict, args) -> Path:
    root = os.environ.get("FORMLEARN_OUTDIR")
    if args.out:
        base = Path(args.out)
    else:
        base = Path(cfg.get("output", {}).get("dir", f"runs/{cfg.get('name', 'scenario')}"))
    if root:
        base = Path(root) / base.name
    return base


def cmd_validate(args) -> int:
    try:
        cfg = _apply_overrides(_load_config_arg(args), args.override)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO if isinstance(e, OSError) else EXIT_VALIDATION
    errors = validate_config(cfg)
    if errors:
        print(f"invalid: {len(errors)} problem(s)")
        for e in errors:
            print(f"  - {e}")
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _apply_overrides(_load_config_arg(args), args.override)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO if isinstance(e, OSError) else EXIT_VALIDATION
    try:
        sc = load_scenario(cfg)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_VALIDATION
    res = run_scenario(sc, mode=args.mode, backend_name=args.backend)
    outdir = _outdir(cfg, args)
    try:
        paths = write_run(res, outdir)
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {paths['log']} ({res.log.shape[0]} rows, backend={res.backend}, "
          f"{res.runtime_s:.1f}s)")
    if res.diverged:
        print(
            f"DIVERGED: non-finite {res.bad_component} at step {res.bad_step} "
            f"(t={res.bad_step * sc.run.dt:.4f}s); partial log retained",
            file=sys.stderr,
        )
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_analyze(args) -> int:
    rundir = Path(args.run)
    try:
        res = load_run(rundir)
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        sc = load_scenario(res.meta["config"])
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_VALIDATION

    outdir = Path(args.out) if args.out else rundir / "metrics"
    outdir.mkdir(parents=True, exist_ok=True)

    if res.meta.get("mode") == "estimator":
        est = analysis.estimation_error(res)
        np.savetxt(
            outdir / "estimation.csv",
            np.column_stack([res.log[:, 0], est]),
            delimiter=",",
            header="t," + ",".join(f"est{i}" for i in range(1, sc.N + 1)),
            comments="",
            fmt="%.17g",
        )
        verdicts = {"estimator_convergence": acceptance.estimator_convergence(res)}
        with open(outdir / "summary.json", "w") as f:
            json.dump(
                {"verdicts": verdicts, "scenario": res.scenario_name, "mode": "estimator"},
                f, indent=1, sort_keys=True, default=float,
            )
        print(f"wrote metrics to {outdir}")
        for name, v in verdicts.items():
            print(f"  {name}: {'PASS' if v.get('ok') else 'FAIL'}")
        return EXIT_OK

    tm = analysis.tracking_metrics(res, sc.formation.offsets)
    est = analysis.estimation_error(res)
    report = analysis.MetricReport(
        tracking=tm,
        estimation=est,
        consensus=None,
        approximation=None,
        uub=analysis.uub_monitor(res, sc.run.ceilings),
    )
    verdicts = {
        "estimator_convergence": acceptance.estimator_convergence(res),
        "tracking": acceptance.tracking(res, sc.formation.offsets),
        "formation_geometry": acceptance.formation_geometry(res, sc.formation.offsets),
        "uub": acceptance.uub(res, sc.run.ceilings),
    }
    np.savetxt(
        outdir / "tracking.csv",
        np.column_stack([tm.times, tm.errors]),
        delimiter=",",
        header="t," + ",".join(f"e{i}" for i in range(1, sc.N + 1)),
        comments="",
        fmt="%.17g",
    )
    np.savetxt(
        outdir / "estimation.csv",
        np.column_stack([res.log[:, 0], est]),
        delimiter=",",
        header="t," + ",".join(f"est{i}" for i in range(1, sc.N + 1)),
        comments="",
        fmt="%.17g",
    )
    if res.checkpoints is not None and sc.N >= 2:
        cm = analysis.consensus_metrics(res)
        report.consensus = cm
        verdicts["weight_consensus"] = acceptance.weight_consensus(res)
        rows = []
        for c, t in enumerate(cm.checkpoint_times):
            for k in range(sc.n):
                rows.append(
                    [t, k + 1, cm.pairwise_max[c, k]] + list(cm.agent_norms[c, :, k])
                )
        np.savetxt(
            outdir / "consensus.csv",
            np.asarray(rows),
            delimiter=",",
            header="t,channel,pairwise_max," + ",".join(f"norm{i}" for i in range(1, sc.N + 1)),
            comments="",
            fmt="%.17g",
        )
    if res.wbar is not None:
        am = analysis.approximation_error(res, sc, keep_series=True)
        report.approximation = am
        verdicts["learning_accuracy"] = acceptance.learning_accuracy(res, sc)
        rows = []
        for (agent, channel), (ts, G, Ghat) in am.series.items():
            for r in range(len(ts)):
                rows.append([ts[r], agent, channel, G[r], Ghat[r]])
        np.savetxt(
            outdir / "approx_series.csv",
            np.asarray(rows) if rows else np.zeros((0, 5)),
            delimiter=",",
            header="t,agent,channel,g_true,g_nn",
            comments="",
            fmt="%.17g",
        )

    summary = report.summary()
    summary["verdicts"] = verdicts
    summary["schema_version"] = res.meta["schema_version"]
    summary["scenario"] = res.scenario_name
    with open(outdir / "summary.json", "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True, default=float)
    print(f"wrote metrics to {outdir}")
    for name, v in verdicts.items():
        print(f"  {name}: {'PASS' if v.get('ok') else 'FAIL'}")
    return EXIT_OK


def _golden_payload(cfg: dict) -> dict:
    sc = load_scenario(cfg)
    y0 = initial_state(sc)
    from .engine import backend

    eng = backend("python")
    spec = build_engine_spec(sc)
    dy = eng.derivative(spec, 0.0, y0)
    h = hashlib.sha256(np.ascontiguousarray(dy).tobytes()).hexdigest()
    # compact golden: leader/plant/observer blocks in full, weights hashed
    head = dy[: spec.off_w]
    return {
        "version": __version__,
        "scenario": cfg.get("name"),
        "derivative_head": [float(x) for x in head],
        "derivative_sha256": h,
    }


def cmd_golden(args) -> int:
    cfg = _load_config_arg(args)
    payload = _golden_payload(cfg)
    if args.check:
        try:
            with open(args.file) as f:
                ref = json.load(f)
        except OSError as e:
            print(f"i/o error: {e}", file=sys.stderr)
            return EXIT_IO
        head = np.asarray(ref["derivative_head"])
        got = np.asarray(payload["derivative_head"])
        ok = head.shape == got.shape and np.allclose(head, got, rtol=1e-10, atol=1e-12)
        print("golden match" if ok else "golden MISMATCH")
        return EXIT_OK if ok else EXIT_VALIDATION
    try:
        with open(args.file, "w") as f:
            json.dump(payload, f, indent=1)
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.file}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="formlearn", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_config_args(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--config", help="path to a scenario JSON file")
        g.add_argument("--scenario", help="name of a shipped scenario (paper_siv, synthetic_learning)")
        sp.add_argument("--override", action="append", metavar="KEY=VAL",
                        help="dotted-path config override (JSON value)")

    sp = sub.add_parser("validate", help="check a scenario config")
    add_config_args(sp)
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("run", help="integrate a scenario and write the run log")
    add_config_args(sp)
    sp.add_argument("--out", help="output directory (default from config)")
    sp.add_argument("--mode", choices=["full", "estimator"], default="full")
    sp.add_argument("--backend", choices=["auto", "compiled", "python"], default=None)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("analyze", help="compute metrics and verdicts for a run")
    sp.add_argument("--run", required=True, help="run directory (log.csv + meta.json)")
    sp.add_argument("--out", help="metrics output directory (default <run>/metrics)")
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("golden", help="capture or check golden regression data")
    add_config_args(sp)
    sp.add_argument("--file", required=True)
    sp.add_argument("--check", action="store_true")
    sp.set_defaults(fn=cmd_golden)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
