"""Command-line front end.

Subcommands: classify, simulate, iem, sweep, verify, find-special, tables.
Configuration comes from a TOML file (--config) with flag overrides winning.
Outputs are CSV/JSON files under --out with fixed 17-significant-digit float
formatting, so identical configs produce byte-identical files.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 corner-hit truncation in a simulation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_override
from .diagnostics import find_special_level_sets, sweep
from .flow_sim import return_map_samples, section_state, simulate
from .iem import degeneracy_check, induce_fundamental, return_map, to_dict
from .lo_closed_forms import (edge_table, format_edge_table,
                              near_threshold_table)
from .step_system import LevelSet, energy_momentum_diagram
from .verify import run_default_suite


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    if x is None:
        return ""
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _sanitize(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_sanitize(obj), indent=2, sort_keys=True) + "\n")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    data = cfg.asdict()
    for item in args.set or []:
        key, val = parse_override(item)
        if key not in data:
            raise ConfigError(f"unknown config key in override: {key}")
        data[key] = val
    if args.out is not None:
        data["out"] = args.out
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    if args.quadrature_check:
        data["quadrature_check"] = True
    cfg = RunConfig.from_dict(data)
    cfg.validate()
    return cfg


def _out_dir(rc: RunConfig) -> Path:
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _level_set(rc: RunConfig) -> LevelSet:
    if rc.e1 is None:
        raise ConfigError("this command needs 'e1' in the config")
    return LevelSet(rc.e1, rc.h)


def cmd_classify(rc: RunConfig) -> int:
    cfg = rc.build_step_config()
    if rc.h_min is not None and rc.h_max is not None and rc.h_count > 1:
        hs = list(np.linspace(rc.h_min, rc.h_max, rc.h_count))
    else:
        hs = [rc.h]
    rows = energy_momentum_diagram(cfg, hs)
    out = _out_dir(rc)
    _write_csv(out / "diagram.csv", ["h", "seg_tag", "e1_lo", "e1_hi"],
               [(r.h, r.seg_tag, r.e1_lo, r.e1_hi) for r in rows])
    first_h = hs[0]
    segs = [r for r in rows if r.h == first_h]
    print(f"h={first_h:g} (h_step={cfg.h_step:g}):")
    for r in segs:
        print(f"  {r.seg_tag:>10}: e1 in [{r.e1_lo:.6g}, {r.e1_hi:.6g}]")
    if all(r.seg_tag != "Rc" for r in segs):
        print("  step family empty (h <= h_step)")
    print(f"wrote {out / 'diagram.csv'}")
    return 0


def cmd_simulate(rc: RunConfig) -> int:
    cfg = rc.build_step_config()
    ls = _level_set(rc)
    res = return_map_samples(cfg, ls, rc.theta2_0, rc.n,
                             use_quadrature=rc.quadrature_check)
    out = _out_dir(rc)
    _write_csv(out / "section.csv", ["k", "theta2", "return_time", "interval_tag"],
               [(s.k, s.theta2, s.return_time, s.tag) for s in res.samples])
    code = 0
    if rc.trajectory:
        state0 = section_state(cfg, ls, rc.theta2_0,
                               use_quadrature=rc.quadrature_check)
        sim = simulate(cfg, state0, n_events=min(5 * rc.n, 5000),
                       use_quadrature=rc.quadrature_check)
        rows = [(0.0, state0.q1, state0.q2, state0.p1, state0.p2, "init")]
        rows += [(e.t, e.state.q1, e.state.q2, e.state.p1, e.state.p2,
                  e.kind.value) for e in sim.events]
        _write_csv(out / "trajectory.csv",
                   ["t", "q1", "q2", "p1", "p2", "event_kind"], rows)
        if sim.truncated:
            code = 3
    if res.truncated:
        print(f"corner hit after {len(res.samples)} returns; output truncated",
              file=sys.stderr)
        code = 3
    print(f"wrote {out / 'section.csv'} ({len(res.samples)} returns)")
    return code


def cmd_iem(rc: RunConfig) -> int:
    cfg = rc.build_step_config()
    ls = _level_set(rc)
    params, ci = return_map(cfg, ls, use_quadrature=rc.quadrature_check)
    fi = induce_fundamental(ci)
    payload = {
        "params": {k: v for k, v in asdict(params).items() if k != "region"},
        "region": params.region.value,
        "circle": to_dict(ci),
        "fundamental": to_dict(fi),
        "degeneracies": (list(degeneracy_check(params))
                         if params.region.value == "StepFamily" else []),
    }
    out = _out_dir(rc)
    _write_json(out / "iem.json", payload)
    print(f"{params.region.value}: {len(ci.pieces)} circle pieces, "
          f"{len(fi.pieces)} fundamental pieces")
    print(f"wrote {out / 'iem.json'}")
    return 0


def cmd_sweep(rc: RunConfig) -> int:
    cfg = rc.build_step_config()
    rows = sweep(cfg, rc.h, rc.grid_size, use_quadrature=rc.quadrature_check)
    out = _out_dir(rc)
    header = ["e1", "theta2_wall", "Theta2", "chi2", "K2", "lam_JR", "lam_JK",
              "lam_JK1", "thetaL_JR", "deg_flags", "region", "Theta2_smooth"]
    _write_csv(out / "sweep.csv", header,
               [(r.e1, r.theta2_wall, r.Theta2, r.chi2, r.K2, r.lam_JR,
                 r.lam_JK, r.lam_JK1, r.thetaL_JR, ";".join(r.deg_flags),
                 r.region, r.Theta2_smooth) for r in rows])
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


def cmd_verify(rc: RunConfig) -> int:
    workers = rc.workers if rc.workers > 0 else (os.cpu_count() or 1)
    report = run_default_suite(seed=rc.seed, workers=workers)
    out = _out_dir(rc)
    _write_json(out / "report.json", report)
    for name, ok in report["criteria"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"max_dev_angle={report['max_dev_angle']:.3g} "
          f"max_dev_time={report['max_dev_time']:.3g} "
          f"corner_truncations={report['n_corner_truncations']}")
    print(f"wrote {out / 'report.json'}")
    return 0 if report["pass"] else 1


def cmd_find_special(rc: RunConfig) -> int:
    cfg = rc.build_step_config()
    hits = find_special_level_sets(cfg, rc.h, rc.kind, n_max=rc.n_max,
                                   use_quadrature=rc.quadrature_check)
    out = _out_dir(rc)
    _write_csv(out / "special.csv",
               ["e1", "kind", "target", "chi2", "K2", "Theta2"],
               [(s.e1, s.kind, s.target, s.params.chi2, s.params.K2,
                 s.params.Theta2) for s in hits])
    _write_json(out / "special.json", [
        {"e1": s.e1, "kind": s.kind, "target": s.target,
         "certificate": s.certificate} for s in hits])
    print(f"{len(hits)} special level sets; wrote {out / 'special.csv'}")
    return 0


def cmd_tables(rc: RunConfig) -> int:
    p1, p2 = rc.potential1, rc.potential2
    if p1.get("kind") != "lo" or p2.get("kind") != "lo":
        raise ConfigError("tables requires linear-oscillator potentials")
    om1, om2 = float(p1["omega"]), float(p2["omega"])
    a1, a2 = abs(rc.q1_wall), abs(rc.q2_wall)
    tabs = [edge_table(om1, om2, s1 * a1, s2 * a2, rc.h)
            for s1, s2 in ((-1, -1), (-1, 1), (1, -1), (1, 1))]
    out = _out_dir(rc)
    text = format_edge_table(tabs)
    (out / "tables.txt").write_text(text + "\n")
    _write_csv(out / "tables.csv",
               ["q1_sign", "q2_sign", "theta1_star", "theta2_star",
                "theta1_wall_lo", "theta1_wall_hi", "theta2_wall_lo",
                "theta2_wall_hi", "Theta2_lo", "Theta2_hi",
                "chi2_lo", "chi2_hi", "chi2_monotone"],
               [(t.quadrant[0], t.quadrant[1], t.theta1_star, t.theta2_star,
                 t.theta1_wall_edges[0], t.theta1_wall_edges[1],
                 t.theta2_wall_edges[0], t.theta2_wall_edges[1],
                 t.Theta2_edges[0], t.Theta2_edges[1],
                 t.chi2_edges[0], t.chi2_edges[1],
                 t.chi2_monotone) for t in tabs])
    near_rows = []
    for k in range(5):
        eta = rc.eta * 10.0 ** (-k / 4.0)  # one decade sweep
        for s1, s2 in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
            row = near_threshold_table(om1, om2, s1 * a1, s2 * a2, eta)
            for key in sorted(row.exact):
                near_rows.append((s1, s2, eta, key, row.exact[key],
                                  row.asymptotic[key],
                                  row.ratios.get(key)))
    _write_csv(out / "near_threshold.csv",
               ["q1_sign", "q2_sign", "eta", "quantity", "exact",
                "asymptotic", "ratio"], near_rows)
    print(text)
    print(f"wrote {out / 'tables.txt'}, tables.csv, near_threshold.csv")
    return 0


_COMMANDS = {
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "iem": cmd_iem,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "find-special": cmd_find_special,
    "tables": cmd_tables,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stepiem",
        description="Step-impact oscillator system: simulation and return maps")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (TOML value syntax)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--quadrature-check", action="store_true",
                       help="force the quadrature path for LO potentials")
    args = parser.parse_args(argv)
    try:
        rc = _load_config(args)
        return _COMMANDS[args.command](rc)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
