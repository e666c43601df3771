"""Command-line entry point.

Exit codes: 0 ok, 2 usage, 3 workspace violation, 4 I/O, 5 insufficient data.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import (InsufficientData, InvalidArgument, InvalidStart, NumericError,
                     WorkspaceViolation)
from .ik import (DEFAULT_MAX_ITER, DEFAULT_TOL, LIMIT_PROFILES, PdGains, WorkspaceBox, solve)
from .kinematics import default_chain, forward_kinematics, load_chain
from .reference import START_JOINTS
from .sim import (CALIBRATED_NOISE, NoiseModel, SortingScenario, TrialReport, TrialSetup,
                  reference_scene, run_trials)
from .stats import (histogram_pdf, read_route_csvs, success_probability, summarize, weibull_fit)
from .vision import (Calibration, CalibrationMode, Color, ImageReadError, detect_objects,
                     load_scene, read_image, write_detections_csv)

EXIT_OK, EXIT_USAGE, EXIT_WORKSPACE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4, 5
OUT_ENV = "ARMSORT_OUT"
VECTOR_FLAGS = ("--joints", "--target", "--start", "--sweep-kp")


@dataclass
class RunConfig:
    chain: str | None = None
    kp: float = 0.1
    kd: float = 0.01
    limits: str = "paper-consistent"
    workspace: tuple = ((-40.0, 40.0), (20.0, 60.0), (10.0, 60.0))
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    jacobian: str = "coupled"
    calibration: str = "affine"
    calibration_scale: tuple = Calibration().scale
    calibration_offset: tuple = Calibration().offset
    field_size: tuple = (50.0, 37.5)
    noise_std: float = CALIBRATED_NOISE.std
    noise_step: float = CALIBRATED_NOISE.step
    start_joints: tuple = START_JOINTS
    placements: dict = field(default_factory=dict)
    out_dir: str = "armsort-out"

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def chain_model(self):
        return load_chain(self.chain) if self.chain else default_chain()

    def joint_limits(self):
        try:
            return LIMIT_PROFILES[self.limits]
        except KeyError:
            raise InvalidArgument(f"unknown limits profile {self.limits!r}") from None

    def box(self) -> WorkspaceBox:
        return WorkspaceBox(*(tuple(b) for b in self.workspace))

    def gains(self) -> PdGains:
        return PdGains(self.kp, self.kd)

    def calibration_model(self) -> Calibration:
        if CalibrationMode(self.calibration) is CalibrationMode.PAPER_LINEAR:
            return Calibration.paper_linear(tuple(self.field_size))
        return Calibration(scale=tuple(self.calibration_scale),
                           offset=tuple(self.calibration_offset))

    def scenario(self) -> SortingScenario:
        base = SortingScenario(start_joints=tuple(self.start_joints))
        if self.placements:
            merged = dict(base.placements)
            merged.update({k: tuple(v) for k, v in self.placements.items()})
            base = replace(base, placements={Color(k): v for k, v in merged.items()})
        return base


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _join_negative_vectors(argv):
    # "--target -10,5,3" would otherwise parse as an unknown option
    out = list(argv)
    i = 0
    while i < len(out) - 1:
        if out[i] in VECTOR_FLAGS and out[i + 1].startswith("-"):
            out[i:i + 2] = [f"{out[i]}={out[i + 1]}"]
        i += 1
    return out


def _fmt3(v) -> str:
    return "(" + ", ".join(f"{x:.4f}" for x in v) + ")"


def _out_dir(args, cfg: RunConfig) -> Path:
    path = Path(args.out or os.environ.get(OUT_ENV) or cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_fk(args, cfg: RunConfig) -> int:
    chain = cfg.chain_model()
    try:
        t = forward_kinematics(chain, args.joints)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(_fmt3(t.translation))
    if args.dump:
        for row in t.matrix:
            print(" ".join(f"{v:10.4f}" for v in row))
    return EXIT_OK


def cmd_ik(args, cfg: RunConfig) -> int:
    chain = cfg.chain_model()
    start = args.start or cfg.start_joints
    kps = args.sweep_kp or (args.kp if args.kp is not None else cfg.kp,)
    kd = args.kd if args.kd is not None else cfg.kd
    out = _out_dir(args, cfg)
    for kp in kps:
        try:
            trace = solve(chain, start, args.target, PdGains(kp, kd), cfg.joint_limits(), cfg.box(),
                          args.tol or cfg.tol, args.max_iter or cfg.max_iter,
                          args.jacobian or cfg.jacobian)
        except WorkspaceViolation as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_WORKSPACE
        except (InvalidArgument, InvalidStart) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        name = f"ik_trace_kp{kp:g}.csv" if args.sweep_kp else "ik_trace.csv"
        trace.write_csv(out / name)
        state = (f"converged in {trace.n_iterations} iterations" if trace.converged
                 else f"did not converge after {trace.n_iterations} iterations")
        prefix = f"kp={kp:g}: " if args.sweep_kp else ""
        print(f"{prefix}initial error {trace.initial_error:.4f}, {state}, "
              f"final error {trace.final_error:.4f}")
    return EXIT_OK


def cmd_detect(args, cfg: RunConfig) -> int:
    cal = cfg.calibration_model()
    try:
        if Path(args.input).suffix.lower() == ".json":
            objects = load_scene(args.input, cal)
        else:
            objects = detect_objects(read_image(args.input), cal=cal)
    except (ImageReadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    dest = Path(args.csv) if args.csv else _out_dir(args, cfg) / "detections.csv"
    write_detections_csv(objects, dest)
    print(f"{len(objects)} objects -> {dest}")
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig) -> int:
    std = cfg.noise_std if args.noise is None else args.noise
    step = cfg.noise_step if args.quant is None else args.quant
    if args.noise == 0 and args.quant is None:
        step = 0.0
    setup = TrialSetup(scenario=cfg.scenario(), gains=cfg.gains(), limits=cfg.joint_limits(),
                       box=cfg.box(), noise=NoiseModel(std, step), chain=cfg.chain_model(),
                       tol=cfg.tol, max_iter=cfg.max_iter, n_objects=args.objects,
                       jacobian=cfg.jacobian)
    scene = None
    try:
        if args.scene == "reference":
            scene = reference_scene()
        elif args.scene:
            scene = load_scene(args.scene, cfg.calibration_model())
    except (ImageReadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    reports = run_trials(args.trials, args.seed, setup, scene, args.parallel)
    out = _out_dir(args, cfg)
    for i, rep in enumerate(reports):
        rep.write_csv(out / f"routes_trial{i:03d}.csv")
    records = [r for rep in reports for r in rep.records]
    agg = TrialReport(records).aggregates()
    agg.update(trials=args.trials, seed=args.seed, noise_std=std, noise_step=step)
    (out / "summary.json").write_text(json.dumps(_rounded(agg), indent=2, sort_keys=True) + "\n")
    print(f"{agg['routes']} routes, {agg['successes']} successful -> {out}")
    return EXIT_OK


def _rounded(obj):
    if isinstance(obj, float):
        return round(obj, 4)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    return obj


def cmd_stats(args, cfg: RunConfig) -> int:
    try:
        samples = read_route_csvs(args.csvs)
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not samples:
        print("error: no executed routes in input", file=sys.stderr)
        return EXIT_DATA
    out = _out_dir(args, cfg)
    xyz = np.array([s.euclid_xyz for s in samples])
    if len(samples) >= 2:
        summary = {k: vars(v) for k, v in summarize(samples).items()}
    else:
        s = samples[0]
        summary = {k: {"mean": getattr(s, k), "std": None, "max": getattr(s, k), "min": getattr(s, k)}
                   for k in ("dx", "dy", "dz", "euclid_xy", "euclid_xyz")}
    hist = histogram_pdf(xyz, args.bin)
    hist.write_csv(out / "histogram.csv")
    fit = None
    try:
        fit = weibull_fit(xyz)
    except (InsufficientData, InvalidArgument, NumericError) as exc:
        print(f"notice: Weibull fit skipped ({exc})")
    if fit is not None:
        (out / "weibull.json").write_text(json.dumps(
            _rounded({"shape": fit.shape, "scale": fit.scale, "loglik": fit.loglik}), indent=2) + "\n")
    prob = success_probability(xyz, args.threshold, fit, with_fit=fit is not None)
    coarse = histogram_pdf(xyz, args.threshold)
    doc = {"n": len(samples), "summary": summary, "threshold": args.threshold,
           "success_empirical": prob.empirical, "success_weibull": prob.weibull,
           "success_coarse_bin": float(coarse.densities[0] * args.threshold)}
    (out / "summary.json").write_text(json.dumps(_rounded(doc), indent=2) + "\n")
    line = f"n={len(samples)} success P(err<{args.threshold:g}) empirical {prob.empirical:.4f}"
    if prob.weibull is not None:
        line += f", weibull {prob.weibull:.4f} (k={fit.shape:.4f}, scale={fit.scale:.4f})"
    print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="armsort", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON run configuration")
    sub = p.add_subparsers(dest="command", required=True)

    def with_out(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or config)")
        return sp

    fk = sub.add_parser("fk", help="forward kinematics")
    fk.add_argument("--joints", type=_floats, required=True, help="theta1,theta2,theta3 in degrees")
    fk.add_argument("--dump", action="store_true", help="print the 4x4 transform")
    fk.set_defaults(func=cmd_fk)

    ik = with_out(sub.add_parser("ik", help="inverse kinematics with trace CSV"))
    ik.add_argument("--target", type=_floats, required=True, help="x,y,z in cm")
    ik.add_argument("--start", type=_floats)
    ik.add_argument("--kp", type=float)
    ik.add_argument("--kd", type=float)
    ik.add_argument("--tol", type=float)
    ik.add_argument("--max-iter", type=int)
    ik.add_argument("--jacobian", choices=("coupled", "free"))
    ik.add_argument("--sweep-kp", type=_floats, help="one trace per proportional gain")
    ik.set_defaults(func=cmd_ik)

    det = with_out(sub.add_parser("detect", help="colour detection on an image or scene JSON"))
    det.add_argument("input")
    det.add_argument("--csv", help="output CSV path")
    det.set_defaults(func=cmd_detect)

    sim = with_out(sub.add_parser("simulate", help="seeded sorting trials"))
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--objects", type=int, default=12)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise", type=float, help="joint noise std in degrees (0 disables noise)")
    sim.add_argument("--quant", type=float, help="servo quantisation step in degrees")
    sim.add_argument("--scene", help="scene JSON, or 'reference' for the built-in 12-object layout")
    sim.add_argument("--parallel", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    st = with_out(sub.add_parser("stats", help="error statistics over route CSVs"))
    st.add_argument("csvs", nargs="*")
    st.add_argument("--bin", type=float, default=0.05)
    st.add_argument("--threshold", type=float, default=1.2)
    st.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_vectors(sys.argv[1:] if argv is None else argv))
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        return args.func(args, cfg)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
