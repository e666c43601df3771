"""Colour-sorting pick-and-place runs on top of the IK solver."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ArmsortError, InvalidArgument
from .ik import (DEFAULT_MAX_ITER, DEFAULT_TOL, PAPER_CONSISTENT_LIMITS, IkTrace, JointLimits,
                 PdGains, WorkspaceBox, check_workspace, solve)
from .kinematics import DhChain, default_chain, ee_position
from .reference import DETECTION_TABLE, PLACEMENTS, START_JOINTS
from .vision import (Calibration, Color, ColorRules, DetectedObject, detect_objects,
                     label_objects, render_scene, unproject)

SUCCESS_THRESHOLD = 1.2

PICK = 0
PLACE = 1


@dataclass(frozen=True)
class GripperModel:
    """Gripper arm lengths in cm. The horizontal and vertical lengths are kept apart."""

    a4: float = 9.0
    a5_xy: float = 10.0
    a5_z: float = 13.0
    theta5_travel: tuple[float, float] = (30.0, -60.0)
    grip_clearance: float = 1.5

    def __post_init__(self):
        if min(self.a4, self.a5_xy, self.a5_z) <= 0 or self.grip_clearance < 0:
            raise InvalidArgument("gripper lengths must be positive")
        if any(abs(t) > 90 for t in self.theta5_travel):
            raise InvalidArgument("gripper angles must lie within [-90, 90] degrees")


def gripper_geometry(g: GripperModel, theta5: float) -> tuple[float, float, float]:
    """Return (a4_xy, a5_z, s_z): horizontal reach, vertical drop and pick height."""
    t = math.radians(theta5)
    a5_xy = g.a5_xy * math.cos(t)
    a5_z = g.a5_z * math.sin(t)
    return g.a4 + a5_xy, a5_z, g.grip_clearance + abs(a5_z)


@dataclass(frozen=True)
class SortingScenario:
    placements: Mapping[Color, tuple[float, float, float]] = field(
        default_factory=lambda: {Color(k): v for k, v in PLACEMENTS.items()})
    start_joints: tuple[float, ...] = START_JOINTS
    gripper: GripperModel = GripperModel()
    # table area the scene generator scatters objects over, cm
    table_region: tuple[tuple[float, float], tuple[float, float]] = ((-14.0, 14.0), (40.0, 55.0))

    @property
    def pick_height(self) -> float:
        return gripper_geometry(self.gripper, self.gripper.theta5_travel[1])[2]

    def validate(self, box: WorkspaceBox) -> None:
        for color, p in self.placements.items():
            if not check_workspace(p, box):
                raise InvalidArgument(f"{Color(color).value} placement {p} outside workspace")


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian joint error plus servo quantisation applied to converged joints."""

    std: float | tuple[float, ...] = 0.0
    step: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.std, dtype=float) < 0) or self.step < 0:
            raise InvalidArgument("noise std and quantisation step must be >= 0")

    @property
    def is_zero(self) -> bool:
        return not np.any(np.asarray(self.std, dtype=float)) and self.step == 0


# Tuned so the mean final xyz error lands near the measured hardware figure (0.62 cm).
CALIBRATED_NOISE = NoiseModel(std=0.55, step=1.0)


@dataclass(frozen=True)
class Route:
    label: str
    color: Color
    step: int
    target: tuple[float, float, float]
    skipped: str | None = None


def plan_routes(objects: Sequence[DetectedObject], scenario: SortingScenario = SortingScenario(),
                box: WorkspaceBox = WorkspaceBox()) -> list[Route]:
    """Pick then place for every object, red before green before blue.

    Within a colour the input (detection) order is kept. An object whose pick
    target falls outside ``box`` yields two skipped routes.
    """
    ordered = sorted(objects, key=lambda o: o.color.rank)
    routes = []
    for obj in ordered:
        pick = (float(obj.world[0]), float(obj.world[1]), scenario.pick_height)
        place = tuple(float(v) for v in scenario.placements[obj.color])
        reason = None
        if not check_workspace(pick, box):
            reason = "pick target outside workspace"
        elif not check_workspace(place, box):
            reason = "placement outside workspace"
        routes.append(Route(obj.label, obj.color, PICK, pick, reason))
        routes.append(Route(obj.label, obj.color, PLACE, place, reason))
    return routes


def apply_noise(joints, noise: NoiseModel, rng: np.random.Generator | None = None) -> np.ndarray:
    q = np.asarray(joints, dtype=float).copy()
    if noise.is_zero:
        return q
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    std = np.broadcast_to(np.asarray(noise.std, dtype=float), q.shape)
    if np.any(std):
        q = q + rng.normal(0.0, 1.0, q.shape) * std
    if noise.step > 0:
        q = np.round(q / noise.step) * noise.step
    return q


def success_rule(euclid_error_xyz: float, threshold: float = SUCCESS_THRESHOLD) -> bool:
    if euclid_error_xyz < 0:
        raise InvalidArgument("error must be >= 0")
    return euclid_error_xyz < threshold


@dataclass
class RouteRecord:
    trial: int
    label: str
    color: Color
    step: int
    target: np.ndarray
    iterations: int = 0
    initial_error: float = float("nan")
    final_error: float = float("nan")
    converged: bool = False
    achieved: np.ndarray = field(default_factory=lambda: np.full(3, np.nan))
    noisy: np.ndarray = field(default_factory=lambda: np.full(3, np.nan))
    success: bool = False
    skipped: str | None = None
    trace: IkTrace | None = field(default=None, repr=False, compare=False)

    @property
    def error_vector(self) -> np.ndarray:
        return self.noisy - self.target

    @property
    def euclid_xy(self) -> float:
        return float(np.hypot(*self.error_vector[:2]))

    @property
    def euclid_xyz(self) -> float:
        return float(np.linalg.norm(self.error_vector))


CSV_COLUMNS = ("trial", "object", "color", "step", "total", "initial", "final", "converged",
               "target_x", "target_y", "target_z", "ee_x", "ee_y", "ee_z",
               "noisy_x", "noisy_y", "noisy_z", "dx", "dy", "dz", "euclid_xy", "euclid_xyz",
               "success", "skipped")


def _fmt(v: float) -> str:
    return "" if not math.isfinite(v) else f"{v:.4f}"


@dataclass
class TrialReport:
    records: list[RouteRecord] = field(default_factory=list)

    @property
    def executed(self) -> list[RouteRecord]:
        return [r for r in self.records if r.skipped is None]

    def aggregates(self) -> dict:
        ex = self.executed
        out = {"routes": len(self.records), "executed": len(ex),
               "skipped": len(self.records) - len(ex),
               "successes": sum(r.success for r in self.records),
               "converged": sum(r.converged for r in ex)}
        if ex:
            out.update(
                mean_iterations=float(np.mean([r.iterations for r in ex])),
                mean_initial_error=float(np.mean([r.initial_error for r in ex])),
                mean_final_error=float(np.mean([r.final_error for r in ex])),
                mean_euclid_xyz=float(np.mean([r.euclid_xyz for r in ex])),
                success_rate=out["successes"] / len(self.records))
        return out

    def rows(self) -> list[list[str]]:
        rows = []
        for r in self.records:
            e = r.error_vector
            rows.append([str(r.trial), r.label, r.color.value, str(r.step), str(r.iterations),
                         _fmt(r.initial_error), _fmt(r.final_error), str(int(r.converged)),
                         *map(_fmt, r.target), *map(_fmt, r.achieved), *map(_fmt, r.noisy),
                         *map(_fmt, e), _fmt(r.euclid_xy), _fmt(r.euclid_xyz),
                         str(int(r.success)), r.skipped or ""])
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            w.writerows(self.rows())


Redetector = Callable[[Sequence[DetectedObject]], Sequence[DetectedObject]]


class ImageRedetector:
    """Re-render the objects still on the table and run colour detection on the image."""

    def __init__(self, cal: Calibration = Calibration(), rules: ColorRules = ColorRules(),
                 radius: float = 16.0):
        self.cal, self.rules, self.radius = cal, rules, radius

    def __call__(self, remaining):
        discs = [(o.color, *unproject(o.world, self.cal)) for o in remaining]
        return detect_objects(render_scene(discs, self.radius, self.cal.image_size),
                              self.rules, self.cal)


def _nearest(objects: Sequence[DetectedObject], obj: DetectedObject) -> int:
    d = [(o.color != obj.color, math.dist(o.world, obj.world)) for o in objects]
    return min(range(len(objects)), key=d.__getitem__)


def run_sorting(scene: Sequence[DetectedObject], scenario: SortingScenario = SortingScenario(),
                gains: PdGains = PdGains(), limits: JointLimits = PAPER_CONSISTENT_LIMITS,
                box: WorkspaceBox = WorkspaceBox(), noise: NoiseModel = NoiseModel(),
                chain: DhChain | None = None, *, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, redetect: Redetector | None = None,
                jacobian: str = "coupled", trial: int = 0,
                keep_traces: bool = False) -> TrialReport:
    """Sort every object in ``scene`` and report one record per route.

    Objects are handled one at a time: the table is re-detected, the first
    object of the plan is picked and placed, then it is removed from the table.
    IK runs from the previous route's converged joints; noise only perturbs
    what the arm actually reaches.
    """
    chain = chain or default_chain()
    scenario.validate(box)
    rng = np.random.default_rng(noise.seed)
    q = np.asarray(scenario.start_joints, dtype=float)
    table = list(scene)
    report = TrialReport()
    while table:
        visible = list(redetect(table)) if redetect else table
        if not visible:
            break
        pick, place = plan_routes(visible, scenario, box)[:2]
        obj = sorted(visible, key=lambda o: o.color.rank)[0]
        for route in (pick, place):
            rec = RouteRecord(trial, route.label, route.color, route.step, np.array(route.target))
            report.records.append(rec)
            if route.skipped:
                rec.skipped = route.skipped
                continue
            try:
                tr = solve(chain, q, route.target, gains, limits, box, tol, max_iter, jacobian)
            except ArmsortError as exc:
                rec.skipped = f"{type(exc).__name__}: {exc}"
                continue
            q = tr.final_joints
            noisy_q = apply_noise(q, noise, rng)
            rec.iterations = tr.n_iterations
            rec.initial_error, rec.final_error = tr.initial_error, tr.final_error
            rec.converged = tr.converged
            rec.achieved = tr.final_position
            rec.noisy = ee_position(chain, noisy_q)
            rec.success = success_rule(rec.euclid_xyz)
            if keep_traces:
                rec.trace = tr
        del table[_nearest(table, obj)]
    return report


def reference_scene() -> list[DetectedObject]:
    """The reference 12-object layout, in its original numbering."""
    return [DetectedObject(Color(c), (xp, yp), None, (xo, yo), label)
            for label, c, xp, yp, xo, yo in DETECTION_TABLE]


def generate_scene(rng: np.random.Generator, n_objects: int = 12,
                   scenario: SortingScenario = SortingScenario(), diameter: float = 2.0,
                   min_gap: float = 1.0, max_tries: int = 10000) -> list[DetectedObject]:
    """Scatter objects over the table region, colours split as evenly as possible.

    Discs of ``diameter`` keep at least ``min_gap`` cm between their rims.
    """
    if n_objects < 0:
        raise InvalidArgument("n_objects must be >= 0")
    colors = [Color.RED, Color.GREEN, Color.BLUE]
    per = [n_objects // 3 + (i < n_objects % 3) for i in range(3)]
    wanted = [c for c, n in zip(colors, per) for _ in range(n)]
    rng.shuffle(wanted)
    (x0, x1), (y0, y1) = scenario.table_region
    spacing = diameter + min_gap
    pts: list[tuple[float, float]] = []
    tries = 0
    while len(pts) < n_objects:
        tries += 1
        if tries > max_tries:
            raise InvalidArgument("table region too small for the requested objects")
        p = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
        if all(math.dist(p, o) >= spacing for o in pts):
            pts.append(p)
    return label_objects([DetectedObject(c, None, None, p) for c, p in zip(wanted, pts)])


def trial_seeds(seed: int, n_trials: int) -> list[int]:
    return [seed + i for i in range(n_trials)]


@dataclass(frozen=True)
class TrialSetup:
    scenario: SortingScenario = SortingScenario()
    gains: PdGains = PdGains()
    limits: JointLimits = PAPER_CONSISTENT_LIMITS
    box: WorkspaceBox = WorkspaceBox()
    noise: NoiseModel = CALIBRATED_NOISE
    chain: DhChain | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    n_objects: int = 12
    jacobian: str = "coupled"
    keep_traces: bool = False


def run_trial(setup: TrialSetup, trial: int, trial_seed: int,
              scene: Sequence[DetectedObject] | None = None) -> TrialReport:
    if scene is None:
        scene = generate_scene(np.random.default_rng([trial_seed, 1]), setup.n_objects,
                               setup.scenario)
    return run_sorting(scene, setup.scenario, setup.gains, setup.limits, setup.box,
                       replace(setup.noise, seed=trial_seed), setup.chain, tol=setup.tol,
                       max_iter=setup.max_iter, jacobian=setup.jacobian, trial=trial,
                       keep_traces=setup.keep_traces)


def _run_trial_args(args):
    return run_trial(*args)


def run_trials(n_trials: int, seed: int, setup: TrialSetup = TrialSetup(),
               scene: Sequence[DetectedObject] | None = None, parallel: int = 1) -> list[TrialReport]:
    """Independent trials seeded ``seed + i``; results come back in trial order."""
    jobs = [(setup, i, s, scene) for i, s in enumerate(trial_seeds(seed, n_trials))]
    if parallel > 1 and n_trials > 1:
        with ProcessPoolExecutor(parallel) as pool:
            return list(pool.map(_run_trial_args, jobs))
    return [run_trial(*job) for job in jobs]
