"""Iterative PD-shaped pseudoinverse-Jacobian inverse kinematics.

Each iteration measures the Cartesian error ``ds = target - ee``, shapes it as
``kp * ds + kd * (ds - ds_prev)``, maps it to a joint step through the
pseudoinverse of the position Jacobian and applies it, freezing any joint whose
proposed value leaves its limits.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvalidStart, WorkspaceViolation
from .kinematics import DhChain, jacobian_from_frames, pseudoinverse

DEFAULT_TOL = 0.032
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class PdGains:
    kp: float = 0.1
    kd: float = 0.01

    def __post_init__(self):
        if not self.kp > 0:
            raise InvalidArgument(f"kp must be > 0, got {self.kp}")
        if not self.kd >= 0:
            raise InvalidArgument(f"kd must be >= 0, got {self.kd}")


@dataclass(frozen=True)
class JointLimits:
    """Per-joint (min, max) in degrees; reversed pairs are reordered."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        fixed = []
        for lo, hi in self.bounds:
            lo, hi = float(lo), float(hi)
            if lo > hi:
                lo, hi = hi, lo
            if lo == hi:
                raise InvalidArgument(f"empty joint range [{lo}, {hi}]")
            fixed.append((lo, hi))
        object.__setattr__(self, "bounds", tuple(fixed))

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def contains(self, joints) -> bool:
        q = np.asarray(joints, dtype=float)
        return bool(np.all(q >= self.lower) and np.all(q <= self.upper))


# Table values verbatim; the theta2 and theta3 pairs arrive as (max, min) and get reordered.
PAPER_STRICT_LIMITS = JointLimits(((20.0, 160.0), (30.0, -80.0), (-20.0, -80.0)))
# Widened so the reference start pose (120, 93, -132) is admissible.
PAPER_CONSISTENT_LIMITS = JointLimits(((20.0, 160.0), (-80.0, 100.0), (-150.0, -20.0)))

LIMIT_PROFILES = {
    "paper-strict": PAPER_STRICT_LIMITS,
    "paper-consistent": PAPER_CONSISTENT_LIMITS,
}


@dataclass(frozen=True)
class WorkspaceBox:
    x: tuple[float, float] = (-40.0, 40.0)
    y: tuple[float, float] = (20.0, 60.0)
    z: tuple[float, float] = (10.0, 60.0)

    def __post_init__(self):
        for name in "xyz":
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise InvalidArgument(f"workspace {name} range must satisfy min < max")
            object.__setattr__(self, name, (float(lo), float(hi)))

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x[0], self.y[0], self.z[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x[1], self.y[1], self.z[1]])

    def expanded(self, slack: float) -> WorkspaceBox:
        return WorkspaceBox(*((lo - slack, hi + slack) for lo, hi in (self.x, self.y, self.z)))


def check_workspace(target, box: WorkspaceBox) -> bool:
    t = np.asarray(target, dtype=float).reshape(3)
    if not np.all(np.isfinite(t)):
        raise InvalidArgument("target must be finite")
    return bool(np.all(t >= box.lower) and np.all(t <= box.upper))


def pd_step(current_error, previous_error, gains: PdGains) -> np.ndarray:
    """kp * e + kd * (e - e_prev), unit timestep per iteration."""
    e = np.asarray(current_error, dtype=float)
    e_prev = np.asarray(previous_error, dtype=float)
    return gains.kp * e + gains.kd * (e - e_prev)


def clamp_joints(proposed, delta, limits: JointLimits) -> np.ndarray:
    """Undo the step of every joint whose proposed value is out of range.

    Out-of-range joints stay at ``proposed - delta`` for this iteration; the
    rest keep their proposed values.
    """
    p = np.asarray(proposed, dtype=float)
    dq = np.asarray(delta, dtype=float)
    if p.shape != dq.shape or p.size != len(limits.bounds):
        raise InvalidArgument("proposed, delta and limits must have matching lengths")
    bad = (p < limits.lower) | (p > limits.upper)
    return np.where(bad, p - dq, p)


@dataclass
class IkTrace:
    """Every iterate of one solve, start included.

    ``joints`` holds all row values (dependent ones too), degrees;
    ``positions`` the EE position and ``errors`` its distance to ``target``.
    """

    target: np.ndarray
    joints: np.ndarray
    positions: np.ndarray
    errors: np.ndarray
    converged: bool
    independent: tuple[int, ...]

    @property
    def n_iterations(self) -> int:
        return len(self.errors) - 1

    @property
    def initial_error(self) -> float:
        return float(self.errors[0])

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])

    @property
    def final_joints(self) -> np.ndarray:
        """Independent joints of the last iterate."""
        return self.joints[-1, list(self.independent)].copy()

    @property
    def final_position(self) -> np.ndarray:
        return self.positions[-1].copy()

    def write_csv(self, path) -> None:
        n = self.joints.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", *(f"theta{i + 1}" for i in range(n)), "x", "y", "z", "error"])
            for k in range(len(self.errors)):
                w.writerow([k, *(f"{v:.4f}" for v in self.joints[k]),
                            *(f"{v:.4f}" for v in self.positions[k]), f"{self.errors[k]:.4f}"])


def solve(chain: DhChain, start, target, gains: PdGains = PdGains(),
          limits: JointLimits = PAPER_CONSISTENT_LIMITS, box: WorkspaceBox = WorkspaceBox(),
          tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          jacobian: str = "coupled") -> IkTrace:
    """Drive the end effector from ``start`` joints to the Cartesian ``target``.

    ``jacobian="coupled"`` inverts the 3 x n_joints Jacobian with dependent
    joints folded in. ``"free"`` inverts the per-row 3 x n_rows Jacobian as if
    every joint were independent, keeps the independent entries of the step and
    lets the coupling re-derive the rest.
    """
    if jacobian not in ("coupled", "free"):
        raise InvalidArgument(f"unknown jacobian mode {jacobian!r}")
    target = np.asarray(target, dtype=float).reshape(3)
    if not check_workspace(target, box):
        raise WorkspaceViolation(f"target {tuple(float(v) for v in target)} outside workspace box")
    q = np.asarray(start, dtype=float).reshape(-1).copy()
    if len(limits.bounds) != q.size:
        raise InvalidArgument("joint limits do not match the number of joints")
    if not limits.contains(q):
        raise InvalidStart(f"start joints {tuple(float(v) for v in q)} violate joint limits")
    if tol <= 0 or max_iter < 0:
        raise InvalidArgument("tol must be > 0 and max_iter >= 0")
    indep = list(chain.independent)

    joints, positions, errors = [], [], []
    prev = None
    converged = False
    for it in range(max_iter + 1):
        values = chain.joint_values(q)
        frames = chain._frames_from_values(values)
        pos = frames[-1, :3, 3].copy()
        ds = target - pos
        err = math.sqrt(float(ds @ ds))
        joints.append(values)
        positions.append(pos)
        errors.append(err)
        if err < tol:
            converged = True
            break
        if it == max_iter:
            break
        shaped = pd_step(ds, ds if prev is None else prev, gains)
        prev = ds
        jac = jacobian_from_frames(chain, frames)[:3]
        if jacobian == "coupled":
            dq = pseudoinverse(jac @ chain.coupling_matrix) @ shaped
        else:
            dq = (pseudoinverse(jac) @ shaped)[indep]
        dq = np.degrees(dq)
        q = clamp_joints(q + dq, dq, limits)

    return IkTrace(target=target, joints=np.array(joints), positions=np.array(positions),
                   errors=np.array(errors), converged=converged, independent=tuple(indep))


def sweep_gain(chain: DhChain, start, target, kps: Sequence[float], kd: float = 0.01,
               **kwargs) -> dict[float, IkTrace]:
    return {kp: solve(chain, start, target, PdGains(kp, kd), **kwargs) for kp in kps}
