"""Command-line surface: evolve | boundary | sweep | selftest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 selftest failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import BUNDLED, ConfigError, RunConfig, load_config
from .dynamics import (IntegrationBlowUpError, StepSizeUnderflowError,
                       TrajectoryTooShortError, detect_cycle, integrate,
                       relaxation_time)
from .phases import ClassifyOptions, srb_window, sweep, trace_boundary
from .steadystate import assess_stability, branch_tag, refine_fixed_point
from .model import State

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SELFTEST = 4


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _state_dict(s: State) -> dict:
    return {"sx": s.sx, "sy": s.sy, "sz": s.sz, "a_re": s.a_re,
            "a_im": s.a_im, "b_re": s.b_re, "b_im": s.b_im,
            "photon_n": s.photon_n}


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    s0 = cfg.evolve.initial.build(p)
    tr = integrate(p, s0, cfg.integrator)
    traj_path = out / f"{cfg.name}_trajectory.csv"
    tr.write_csv(traj_path)
    try:
        cycle = detect_cycle(tr, window=cfg.evolve.cycle_window)
        cycle_info = cycle.to_dict()
    except TrajectoryTooShortError as exc:
        cycle = None
        cycle_info = {"verdict": "undecided", "late_amplitude": None,
                      "dominant_period": None, "note": str(exc)}
    attractor = None
    relax = None
    if cycle is not None and cycle.verdict == "converged":
        fp = refine_fixed_point(p, tr.final_state())
        if fp is not None:
            eig, verdict = assess_stability(p, fp)
            attractor = {"state": _state_dict(fp), "verdict": verdict,
                         "branch": branch_tag(p, fp)}
            relax = relaxation_time(tr, fp, band=cfg.evolve.band)
    summary = {
        "config": cfg.resolved_dict(),
        "final_state": _state_dict(tr.final_state()),
        "cycle": cycle_info,
        "attractor": attractor,
        "relaxation_time_us": relax,
        "step_stats": tr.step_stats,
    }
    _write_json(out / f"{cfg.name}_summary.json", summary)
    print(f"evolve: wrote {traj_path.name} ({tr.n_samples} samples), "
          f"verdict={cycle_info['verdict']}, relaxation_time={relax}")
    return EXIT_OK


def _write_boundary_csv(path: Path, segments) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["omega", "lambda_c", "segment"])
        for k, seg in enumerate(segments):
            for omega, lam in seg:
                w.writerow([repr(omega), repr(lam), k])


def cmd_boundary(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    meta = {"config": cfg.resolved_dict(), "files": [], "srb_window": None}
    win = srb_window(p)
    if win is not None:
        meta["srb_window"] = list(win)
    for branch in cfg.boundary.branches:
        segs = trace_boundary(p, branch, cfg.boundary.omega,
                              tol=cfg.boundary.tol)
        path = out / f"{cfg.name}_boundary_{branch}.csv"
        _write_boundary_csv(path, segs)
        meta["files"].append(path.name)
        n_pts = sum(len(s) for s in segs)
        print(f"boundary[{branch}]: {len(segs)} segment(s), {n_pts} points "
              f"-> {path.name}")
        if p.eta_p > 0.0:
            ref = trace_boundary(p.replace(eta_p=0.0), branch,
                                 cfg.boundary.omega, tol=cfg.boundary.tol)
            ref_path = out / f"{cfg.name}_boundary_{branch}_ref.csv"
            _write_boundary_csv(ref_path, ref)
            meta["files"].append(ref_path.name)
    _write_json(out / f"{cfg.name}_boundary_meta.json", meta)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, threads: int, mode=None) -> int:
    sw = cfg.sweep
    opts = ClassifyOptions(n_theta=sw.n_theta, cycle_tip=sw.cycle_tip,
                           dynamic_t_end=sw.dynamic_t_end,
                           dynamic_dt=sw.dynamic_dt)
    diagram = sweep(cfg.params, omega_range=sw.omega, lambda_range=sw.lam,
                    resolution=sw.resolution, mode=mode or sw.mode,
                    threads=threads, opts=opts)
    doc = diagram.to_json_dict()
    doc["config"] = cfg.resolved_dict()
    json_path = out / f"{cfg.name}_phase_diagram.json"
    json_path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    csv_path = out / f"{cfg.name}_phase_labels.csv"
    diagram.write_label_csv(csv_path)
    counts = {}
    for row in diagram.labels:
        for lab in row:
            counts[lab] = counts.get(lab, 0) + 1
    print(f"sweep: {len(diagram.lambda_axis)}x{len(diagram.omega_axis)} "
          f"cells -> {json_path.name}; labels: "
          + ", ".join(f"{k}:{v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, out: Path) -> int:
    from .selftest import run_selftest
    results = run_selftest(cfg)
    report = []
    ok = True
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.measured}")
        report.append({"name": r.name, "passed": r.passed,
                       "measured": r.measured})
        ok &= r.passed
    _write_json(out / f"{cfg.name}_selftest.json",
                {"config": cfg.resolved_dict(), "checks": report,
                 "all_passed": ok})
    return EXIT_OK if ok else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="optodicke",
        description="Semiclassical optomechanical Dicke model: evolution, "
                    "phase boundaries, phase-diagram sweeps and selftest.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("evolve", "integrate one trajectory"),
                        ("boundary", "trace phase boundaries"),
                        ("sweep", "classify an (omega, lambda) grid"),
                        ("selftest", "run the invariant suite")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True,
                        help="bundled preset name or JSON file "
                             f"(presets: {', '.join(sorted(BUNDLED))})")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=None,
                        help="sweep worker count (default: config or all cores)")
        sp.add_argument("--mode", choices=["analytic", "dynamic", "hybrid"],
                        default=None, help="override sweep mode")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads or cfg.threads
    if threads is None:
        import multiprocessing
        threads = multiprocessing.cpu_count()
    try:
        if args.command == "evolve":
            return cmd_evolve(cfg, out)
        if args.command == "boundary":
            return cmd_boundary(cfg, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, threads, args.mode)
        if args.command == "selftest":
            return cmd_selftest(cfg, out)
    except (IntegrationBlowUpError, StepSizeUnderflowError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
