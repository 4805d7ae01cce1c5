"""Command-line interface: simulate, orbit, atlas, plot, verify, classify.

Configuration is a diff-friendly plain-text file of ``dotted.key = value``
lines (see DEFAULT_CONFIG_TEXT). Exit codes: 0 success, 1 verification
failure, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hybrid import (DEFAULT_CONFIG, HybridIntegrationError, HybridState,
                     IntegratorConfig, StopCondition, integrate_stride)
from .model import DegenerateGeometryError, ModelParams
from .orbits import (InvalidSectionState, NoReturnError, OrbitSolution,
                     SectionState, ShootingError, shoot_orbit)
from . import continuation as cont
from . import viz

__all__ = ["main", "ExperimentConfig", "REFERENCE_TABLE", "load_atlas_dir"]

SCHEMA_VERSION = 1

#: reference speeds of the symmetry-breaking points for the standard
#: model, with comparison tolerances; asymmetric-model onset speeds
REFERENCE_TABLE = {
    "A": {"parent": "PF", "qd_x": 4.4, "tol": 0.2,
          "children": {"BG", "BE"}},
    "B": {"parent": "BG", "qd_x": 4.6, "tol": 0.3, "children": {"HG"}},
    "C": {"parent": "BE", "qd_x": 6.1, "tol": 0.3, "children": {"HE"}},
    "D": {"parent": "BG", "qd_x": 5.7, "tol": 0.3, "children": {"FG"}},
    "E": {"parent": "BE", "qd_x": 4.8, "tol": 0.3, "children": {"FE"}},
    "F": {"parent": "FG", "qd_x": 6.0, "tol": 0.3, "children": {"GG"}},
    "G": {"parent": "HE", "qd_x": 6.2, "tol": 0.3, "children": {"GE"}},
}

ASYM_REFERENCE = {
    0.4: {"sole_bound": "BG", "onset": 3.2, "tol": 0.3, "vanish": 5.5},
    0.6: {"sole_bound": "BE", "onset": 2.5, "tol": 0.3, "vanish": 5.5},
}

DEFAULT_CONFIG_TEXT = """\
schema_version = 1
model.com_from_hip = 0.5
model.leg_stiffness = 10.0
model.swing_frequency = 20.0
model.pitch_inertia = 2.0
sweep.parameter = TotalEnergy
sweep.energy_min = 1.01
sweep.energy_max = 26.0
sweep.speed_max = 8.0
sweep.seed_energy = 1.05
sweep.pf_grid_step = 0.75
tolerances.rtol = 1e-11
tolerances.atol = 1e-11
tolerances.corrector_tol = 1e-10
tolerances.td_descent_only = 1
budget.max_points = 400
budget.max_branches = 16
budget.max_depth = 5
"""

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


@dataclass
class ExperimentConfig:
    """Flat dotted-key configuration with typed accessors."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = _parse_value(val)
        cfg = cls(values)
        ver = cfg.get("schema_version", SCHEMA_VERSION)
        if int(ver) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {ver}")
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls.from_text(DEFAULT_CONFIG_TEXT)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def override(self, key: str, raw_value: str) -> None:
        self.values[key] = _parse_value(raw_value)

    def model_params(self) -> ModelParams:
        kwargs = {}
        for key, val in self.values.items():
            if key.startswith("model."):
                kwargs[key.split(".", 1)[1]] = float(val)
        try:
            return ModelParams(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model parameters: {exc}")

    def integrator(self) -> IntegratorConfig:
        g = self.get
        return IntegratorConfig(
            rtol=float(g("tolerances.rtol", 1e-11)),
            atol=float(g("tolerances.atol", 1e-11)),
            td_descent_only=bool(int(g("tolerances.td_descent_only", 1))),
        )

    def atlas_config(self) -> cont.AtlasConfig:
        g = self.get
        e_min = float(g("sweep.energy_min", 1.01))
        e_max = float(g("sweep.energy_max", 26.0))
        pf_step = float(g("sweep.pf_grid_step", 0.75))
        if pf_step > 0:
            grid = tuple(float(e) for e in
                         list(np.arange(max(1.3, e_min), 4.01, 0.3))
                         + list(np.arange(4.5, e_max, pf_step)))
        else:
            grid = tuple()
        step = cont.StepConfig(
            corrector_tol=float(g("tolerances.corrector_tol", 1e-10)),
            max_points=int(g("budget.max_points", 400)),
        )
        return cont.AtlasConfig(
            energy_range=(e_min, e_max),
            speed_range=(0.0, float(g("sweep.speed_max", 8.0))),
            seed_energy=float(g("sweep.seed_energy", 1.05)),
            step=step,
            max_branches=int(g("budget.max_branches", 16)),
            max_depth=int(g("budget.max_depth", 5)),
            max_points=int(g("budget.max_points", 400)),
            pf_energy_grid=grid,
        )

    def to_text(self) -> str:
        lines = [f"{k} = {v}" for k, v in sorted(self.values.items())]
        return "\n".join(lines) + "\n"


def _out_dir(args) -> Path:
    if args.out:
        base = Path(args.out)
    else:
        base = Path(os.environ.get("GAIT_ATLAS_OUT", "gaitatlas-out"))
    base.mkdir(parents=True, exist_ok=True)
    return base


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig.default()
    for key, val in args.overrides:
        cfg.override(key, val)
    return cfg


# -- atlas serialization ---------------------------------------------------


def _branch_to_dict(branch: cont.Branch) -> dict:
    pts = []
    for pt in branch.points:
        d = pt.orbit.to_dict()
        d["qd_x"] = f"{pt.y[6]:.17g}"
        d["qd_pitch"] = f"{pt.y[7]:.17g}"
        d["sigma2"] = f"{pt.sigma2:.6g}"
        d["det_sign"] = pt.det_sign
        d["schedule_label"] = pt.schedule_label
        d["stale"] = pt.stale
        pts.append(d)
    return {
        "name": branch.name,
        "label": branch.label,
        "parameter": branch.parameter,
        "termination": branch.termination,
        "annotations": branch.annotations,
        "points": pts,
    }


def save_atlas(atlas: cont.Atlas, out: Path) -> None:
    bdir = out / "branches"
    bdir.mkdir(parents=True, exist_ok=True)
    for br in atlas.branches:
        with open(bdir / f"{br.name}.json", "w") as fh:
            json.dump(_branch_to_dict(br), fh, indent=1)
        with open(bdir / f"{br.name}.csv", "w") as fh:
            fh.write("qd_x,qd_pitch,energy,period\n")
            for pt in br.points:
                fh.write(f"{pt.y[6]:.17g},{pt.y[7]:.17g},"
                         f"{pt.orbit.energy:.17g},"
                         f"{pt.orbit.period:.17g}\n")
    index = {
        "schema_version": SCHEMA_VERSION,
        "com_from_hip": atlas.params.com_from_hip,
        "branches": [br.name for br in atlas.branches],
        "labels": {br.name: br.label for br in atlas.branches},
        "bifurcations": [
            {
                "kind": bf.kind,
                "parent": bf.parent_branch,
                "children": bf.child_branch_names,
                "qd_x": float(bf.qd_x),
                "qd_pitch": float(bf.y[7]),
                "energy": float(bf.y[12]),
                "sigma2": float(bf.sigma2),
            }
            for bf in atlas.bifurcations
        ],
        "exhausted": atlas.exhausted,
        "notes": atlas.notes,
    }
    with open(out / "index.json", "w") as fh:
        json.dump(index, fh, indent=1)


def load_atlas_dir(path) -> dict:
    path = Path(path)
    with open(path / "index.json") as fh:
        index = json.load(fh)
    branches = {}
    for name in index["branches"]:
        with open(path / "branches" / f"{name}.json") as fh:
            branches[name] = json.load(fh)
    index["branch_data"] = branches
    return index


def build_report(index: dict) -> dict:
    """Compare detected bifurcations to the built-in reference table."""
    rows = []
    n_pass = 0
    labels = index["labels"]
    for name, ref in sorted(REFERENCE_TABLE.items()):
        match = None
        for bf in index["bifurcations"]:
            if bf["kind"] != "SymmetryBreaking":
                continue
            parent_label = labels.get(bf["parent"], bf["parent"])
            if (parent_label or "").split("-")[0] != ref["parent"]:
                continue
            if abs(bf["qd_x"] - ref["qd_x"]) <= ref["tol"]:
                if match is None or (abs(bf["qd_x"] - ref["qd_x"])
                                     < abs(match["qd_x"] - ref["qd_x"])):
                    match = bf
        ok = match is not None
        if ok and ref.get("children"):
            got = {labels.get(c, c).split("-")[0]
                   for c in match.get("children", [])}
            ok = ref["children"].issubset(got)
        rows.append({
            "point": name,
            "expected_parent": ref["parent"],
            "expected_qd_x": ref["qd_x"],
            "tolerance": ref["tol"],
            "found_qd_x": None if match is None else match["qd_x"],
            "pass": bool(ok),
        })
        n_pass += bool(ok)
    label_set = {v.split("-")[0] for v in labels.values() if v}
    return {
        "branch_count": len(index["branches"]),
        "labels_present": sorted(label_set),
        "reference_rows": rows,
        "rows_passing": n_pass,
        "rows_total": len(rows),
        "all_pass": n_pass == len(rows),
    }


def report_text(report: dict) -> str:
    lines = ["gait atlas verification", "=" * 40]
    lines.append(f"branches: {report['branch_count']}  labels: "
                 + ", ".join(report["labels_present"]))
    for row in report["reference_rows"]:
        found = ("none" if row["found_qd_x"] is None
                 else f"{row['found_qd_x']:.3f}")
        status = "PASS" if row["pass"] else "FAIL"
        lines.append(
            f"point {row['point']}: parent {row['expected_parent']} "
            f"qd_x {row['expected_qd_x']:.1f}+-{row['tolerance']:.1f} "
            f"found {found} [{status}]")
    lines.append(f"{report['rows_passing']}/{report['rows_total']} "
                 f"reference rows pass")
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    try:
        params = cfg.model_params()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args)

    if args.state:
        vals = [float(v) for v in args.state.split(",")]
        if len(vals) != 14:
            print("error: --state needs 14 comma-separated values",
                  file=sys.stderr)
            return EXIT_INPUT
        y0 = np.array(vals)
    else:
        y0 = np.zeros(14)
        y0[1] = float(cfg.get("simulate.apex_height", 1.1))
    if y0[1] <= 0.0:
        print("error: degenerate geometry (torso at or below ground)",
              file=sys.stderr)
        return EXIT_INPUT

    duration = args.duration
    try:
        traj = integrate_stride(params, HybridState.flight(y0),
                                StopCondition.fixed_horizon(duration),
                                cfg.integrator())
    except HybridIntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    traj.to_csv(out / "trajectory.csv")
    traj.events_to_json(out / "events.json")
    drift = traj.max_energy_drift()
    print(f"simulated {traj.t_end - traj.t_start:.6f} time units, "
          f"{len(traj.events)} events, relative energy drift {drift:.3e}")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'events.json'}")
    return EXIT_OK


def cmd_orbit(args) -> int:
    cfg = _load_config(args)
    try:
        params = cfg.model_params()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args)
    energy = args.energy
    try:
        if args.guess:
            guess = np.array([float(v) for v in args.guess.split(",")])
            orbit = shoot_orbit(params, guess, energy,
                                config=cfg.integrator())
        else:
            from .seeds import find_reversible_pronks
            orbs = find_reversible_pronks(params, energy,
                                          config=cfg.integrator(),
                                          max_solutions=4)
            if not orbs:
                print("no reversible pronk found at this energy",
                      file=sys.stderr)
                return EXIT_NUMERICAL
            orbit = orbs[0]
    except (ShootingError, NoReturnError, InvalidSectionState,
            HybridIntegrationError, DegenerateGeometryError) as exc:
        print(f"shooting failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    from .symmetry import classify
    label = classify(params, orbit, config=cfg.integrator())
    orbit = orbit.with_label(label)
    orbit.to_json(out / "orbit.json")
    print(f"orbit: qd_x = {orbit.qd_x:.6f}, period = {orbit.period:.6f}, "
          f"label = {label.label}")
    print(f"wrote {out / 'orbit.json'}")
    return EXIT_OK


def cmd_atlas(args) -> int:
    cfg = _load_config(args)
    try:
        params = cfg.model_params()
        acfg = cfg.atlas_config()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args)
    t0 = time.time()
    progress = print if args.verbose else None
    if acfg.max_branches <= 0 or acfg.max_points <= 0:
        print("warning: zero budget, writing empty atlas")
        atlas = cont.Atlas(params=params)
    else:
        try:
            atlas = cont.atlas_sweep(params, acfg, cfg.integrator(),
                                     progress=progress)
        except (cont.ContinuationError, HybridIntegrationError) as exc:
            print(f"atlas sweep failed: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
    save_atlas(atlas, out)
    index = load_atlas_dir(out)
    report = build_report(index)
    report["wall_seconds"] = time.time() - t0
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=1)
    with open(out / "report.txt", "w") as fh:
        fh.write(report_text(report))
    print(report_text(report), end="")
    if atlas.exhausted:
        print("warning: budget exhausted, atlas is partial")
    print(f"atlas written to {out} in {report['wall_seconds']:.0f} s")
    return EXIT_OK


def cmd_plot(args) -> int:
    src = Path(args.atlas_dir)
    if not (src / "index.json").exists():
        print(f"error: no atlas at {src}", file=sys.stderr)
        return EXIT_INPUT
    try:
        index = load_atlas_dir(src)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error reading atlas: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args)
    branches = []
    for name in index["branches"]:
        bd = index["branch_data"][name]
        branches.append({
            "name": name,
            "label": bd.get("label", ""),
            "points": [{"qd_x": p["qd_x"], "qd_pitch": p["qd_pitch"]}
                       for p in bd["points"]],
        })
    svg = viz.branch_diagram_svg(branches, index["bifurcations"])
    (out / "branch_diagram.svg").write_text(svg)
    written = [out / "branch_diagram.svg"]

    params = ModelParams(com_from_hip=float(index["com_from_hip"]))
    for name in index["branches"]:
        bd = index["branch_data"][name]
        if not bd["points"]:
            continue
        mid = bd["points"][len(bd["points"]) // 2]
        (out / f"footfall_{name}.svg").write_text(viz.footfall_svg(mid))
        written.append(out / f"footfall_{name}.svg")
        try:
            frames = _keyframes_for(params, mid)
            (out / f"keyframes_{name}.svg").write_text(
                viz.keyframes_svg(frames))
            written.append(out / f"keyframes_{name}.svg")
        except HybridIntegrationError:
            pass
    print("wrote " + ", ".join(str(w) for w in written))
    return EXIT_OK


def _keyframes_for(params: ModelParams, point: dict) -> list:
    from .orbits import embed_section
    u = np.array([float(v) for v in point["section_state"]])
    period = float(point["period"])
    y0 = embed_section(u)
    traj = integrate_stride(params, HybridState.flight(y0),
                            StopCondition.fixed_horizon(period))
    marks = [(0.0, "apex")]
    for ev in traj.events:
        marks.append((ev.time, f"{ev.kind[:2].upper()} {ev.leg.name}"))
    marks.append((period, "apex"))
    frames = []
    offsets = (params.hind_offset, params.front_offset)
    for t, caption in marks[:8]:
        i = int(np.searchsorted(traj.times, t, side="right")) - 1
        i = max(0, min(i, len(traj.times) - 1))
        mode = traj.modes[traj.mode_index[i]]
        frames.append({
            "y": traj.states[i].tolist(),
            "stance": list(mode.in_stance),
            "anchors": list(mode.foot_anchor_x),
            "caption": f"{caption} t={traj.times[i]:.2f}",
            "offsets": offsets,
        })
    return frames


def cmd_verify(args) -> int:
    src = Path(args.atlas_dir)
    if not (src / "index.json").exists():
        print(f"error: no atlas at {src}", file=sys.stderr)
        return EXIT_INPUT
    try:
        index = load_atlas_dir(src)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error reading atlas: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = build_report(index)
    print(report_text(report), end="")
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY


def cmd_classify(args) -> int:
    cfg = _load_config(args)
    path = Path(args.orbit_json)
    if not path.exists():
        print(f"error: {path} not found", file=sys.stderr)
        return EXIT_INPUT
    with open(path) as fh:
        orbit = OrbitSolution.from_dict(json.load(fh))
    from .symmetry import classify, fingerprint
    params = orbit.params
    try:
        label = classify(params, orbit, config=cfg.integrator())
        _, _, _, table = fingerprint(params, orbit, config=cfg.integrator())
    except HybridIntegrationError as exc:
        print(f"classification failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = _out_dir(args)
    with open(out / "fingerprint.csv", "w") as fh:
        fh.write("element,residual\n")
        for name, val in table.items():
            fh.write(f"{name},{val:.17g}\n")
    print(f"label: {label.label} (beats {label.beats}, "
          f"time-reversible {label.time_reversible})")
    print(f"retained permutations: {len(label.retained_sigma)}")
    print(f"wrote {out / 'fingerprint.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # dotted overrides --model.KEY=VAL / --tol.KEY=VAL anywhere
    overrides = []
    rest = []
    for arg in argv:
        if arg.startswith("--model.") or arg.startswith("--tol.") \
                or arg.startswith("--sweep.") or arg.startswith("--budget."):
            key, _, val = arg[2:].partition("=")
            if not val:
                print(f"error: override {arg} needs =VALUE",
                      file=sys.stderr)
                return EXIT_INPUT
            key = key.replace("tol.", "tolerances.", 1) \
                if key.startswith("tol.") else key
            overrides.append((key, val))
        else:
            rest.append(arg)

    parser = argparse.ArgumentParser(
        prog="gaitatlas",
        description="quadrupedal gait families via periodic-orbit "
                    "continuation")
    parser.add_argument("--config", help="experiment config file")
    parser.add_argument("--out", help="output directory "
                        "(default $GAIT_ATLAS_OUT or ./gaitatlas-out)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads for independent branches "
                             "(reserved; tracing is currently serial)")
    parser.add_argument("--format", default="csv,json,svg",
                        help="output formats (all are written by default)")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a trajectory")
    p.add_argument("--state", help="14 comma-separated state values")
    p.add_argument("--duration", type=float, default=5.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("orbit", help="shoot a single periodic gait")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--guess", help="12 comma-separated section values")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("atlas", help="sweep the gait atlas")
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("plot", help="render SVG figures from an atlas")
    p.add_argument("atlas_dir")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="compare an atlas to the reference "
                       "speed table")
    p.add_argument("atlas_dir")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify", help="classify a stored orbit")
    p.add_argument("orbit_json")
    p.set_defaults(func=cmd_classify)

    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else 0
    args.overrides = overrides
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
