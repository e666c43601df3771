"""Denavit-Hartenberg forward kinematics, geometric Jacobian and SVD pseudoinverse.

Angles are degrees at the public surface and radians inside the trigonometry.
Jacobians are returned in cm/rad (cm/cm for prismatic joints).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgument

RANK_RTOL = 1e-8


class JointKind(str, enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"


def wrap_degrees(angle: float) -> float:
    """Map an angle onto (-180, 180]."""
    r = float(angle) % 360.0
    return r - 360.0 if r > 180.0 else r


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Transform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation).reshape(3, 3))
        object.__setattr__(self, "translation", _frozen(self.translation).reshape(3))

    @classmethod
    def identity(cls) -> Transform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> Transform:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: Transform) -> Transform:
        return Transform(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def inverse(self) -> Transform:
        rt = self.rotation.T
        return Transform(rt, -rt @ self.translation)


@dataclass(frozen=True)
class DhRow:
    """One link: the variable joint value is added to theta_offset (revolute) or d (prismatic)."""

    theta_offset: float = 0.0
    alpha: float = 0.0
    a: float = 0.0
    d: float = 0.0
    kind: JointKind = JointKind.REVOLUTE

    def __post_init__(self):
        vals = (self.theta_offset, self.alpha, self.a, self.d)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidArgument(f"non-finite DH parameter in {vals}")
        if self.a < 0:
            raise InvalidArgument(f"link length a must be >= 0, got {self.a}")
        object.__setattr__(self, "theta_offset", wrap_degrees(self.theta_offset))
        object.__setattr__(self, "alpha", wrap_degrees(self.alpha))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "kind", JointKind(self.kind))


@dataclass(frozen=True)
class DhChain:
    """Ordered DH rows plus optional linear coupling.

    ``coupling`` maps a dependent row index to coefficients over the rows
    before it: ``value[j] = sum(c[i] * value[i])``. Rows not in the mapping
    are the independent joints a caller supplies.
    """

    rows: tuple[DhRow, ...]
    coupling: Mapping[int, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise InvalidArgument("a chain needs at least one row")
        coupling = {int(k): tuple(float(c) for c in v) for k, v in dict(self.coupling).items()}
        for j, coeffs in coupling.items():
            if not 0 < j < len(rows):
                raise InvalidArgument(f"coupled row index {j} out of range")
            if len(coeffs) > j:
                raise InvalidArgument(f"row {j} coupling references joints at or above its own index")
        if len(coupling) == len(rows):
            raise InvalidArgument("chain has no independent joints")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "coupling", coupling)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @cached_property
    def independent(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_rows) if i not in self.coupling)

    @property
    def n_joints(self) -> int:
        return len(self.independent)

    @cached_property
    def coupling_matrix(self) -> np.ndarray:
        """d(all row values)/d(independent values), shape (n_rows, n_joints)."""
        c = np.zeros((self.n_rows, self.n_joints))
        for k, i in enumerate(self.independent):
            c[i, k] = 1.0
        for j in sorted(self.coupling):
            for i, coef in enumerate(self.coupling[j]):
                c[j] += coef * c[i]
        c.setflags(write=False)
        return c

    @cached_property
    def _consts(self):
        alpha = np.radians([r.alpha for r in self.rows])
        return (np.cos(alpha), np.sin(alpha),
                np.array([r.a for r in self.rows]), np.array([r.d for r in self.rows]),
                np.radians([r.theta_offset for r in self.rows]),
                np.array([r.kind is JointKind.PRISMATIC for r in self.rows]))

    def joint_values(self, joints) -> np.ndarray:
        """Expand independent joint values into one value per row."""
        q = np.asarray(joints, dtype=float).reshape(-1)
        if q.size != self.n_joints:
            raise InvalidArgument(f"expected {self.n_joints} joint values, got {q.size}")
        if not np.all(np.isfinite(q)):
            raise InvalidArgument("joint values must be finite")
        full = np.empty(self.n_rows)
        for k, i in enumerate(self.independent):
            full[i] = q[k]
        for j in sorted(self.coupling):
            acc = 0.0
            for i, coef in enumerate(self.coupling[j]):
                if coef:
                    acc += coef * full[i]
            full[j] = acc
        return full

    def frames(self, joints) -> np.ndarray:
        """Cumulative base-frame transforms T_0^0 .. T_n^0, shape (n_rows + 1, 4, 4)."""
        return self._frames_from_values(self.joint_values(joints))

    def _frames_from_values(self, full: np.ndarray) -> np.ndarray:
        ca, sa, a, d, th0, prism = self._consts
        theta = th0 + np.where(prism, 0.0, np.radians(full))
        ct, st = np.cos(theta), np.sin(theta)
        n = self.n_rows
        links = np.zeros((n, 4, 4))
        links[:, 0, 0] = ct
        links[:, 0, 1] = -ca * st
        links[:, 0, 2] = sa * st
        links[:, 0, 3] = a * ct
        links[:, 1, 0] = st
        links[:, 1, 1] = ca * ct
        links[:, 1, 2] = -sa * ct
        links[:, 1, 3] = a * st
        links[:, 2, 1] = sa
        links[:, 2, 2] = ca
        links[:, 2, 3] = d + np.where(prism, full, 0.0)
        links[:, 3, 3] = 1.0
        out = np.empty((n + 1, 4, 4))
        out[0] = np.eye(4)
        for i in range(n):
            out[i + 1] = out[i] @ links[i]
        return out


def dh_matrix(row: DhRow, joint_value: float) -> np.ndarray:
    v = float(joint_value)
    if not math.isfinite(v):
        raise InvalidArgument(f"joint value must be finite, got {joint_value!r}")
    if row.kind is JointKind.PRISMATIC:
        theta, d = math.radians(row.theta_offset), row.d + v
    else:
        theta, d = math.radians(row.theta_offset + v), row.d
    al = math.radians(row.alpha)
    ct, st, ca, sa = math.cos(theta), math.sin(theta), math.cos(al), math.sin(al)
    return np.array([[ct, -ca * st, sa * st, row.a * ct],
                     [st, ca * ct, -sa * ct, row.a * st],
                     [0.0, sa, ca, d],
                     [0.0, 0.0, 0.0, 1.0]])


def dh_transform(row: DhRow, joint_value: float) -> Transform:
    return Transform.from_matrix(dh_matrix(row, joint_value))


def forward_kinematics(chain: DhChain, joints) -> Transform:
    return Transform.from_matrix(chain.frames(joints)[-1])


def ee_position(chain: DhChain, joints) -> np.ndarray:
    return chain.frames(joints)[-1, :3, 3].copy()


def full_jacobian(chain: DhChain, joints) -> np.ndarray:
    """6 x n_rows geometric Jacobian with one column per row, coupling ignored.

    Revolute: [z_{i-1} x (o_n - o_{i-1}); z_{i-1}]. Prismatic: [z_{i-1}; 0].
    """
    return jacobian_from_frames(chain, chain.frames(joints))


def jacobian_from_frames(chain: DhChain, f: np.ndarray) -> np.ndarray:
    o_n = f[-1, :3, 3]
    z = f[:-1, :3, 2]
    o = f[:-1, :3, 3]
    r = o_n - o
    lin = np.stack([z[:, 1] * r[:, 2] - z[:, 2] * r[:, 1],
                    z[:, 2] * r[:, 0] - z[:, 0] * r[:, 2],
                    z[:, 0] * r[:, 1] - z[:, 1] * r[:, 0]])
    ang = z.T.copy()
    prism = chain._consts[5]
    if prism.any():
        lin[:, prism] = z.T[:, prism]
        ang[:, prism] = 0.0
    return np.vstack([lin, ang])


def geometric_jacobian(chain: DhChain, joints) -> np.ndarray:
    """3 x n_joints position Jacobian over the independent joints.

    Dependent-joint columns are folded in with their coupling coefficients.
    """
    return full_jacobian(chain, joints)[:3] @ chain.coupling_matrix


def pseudoinverse(j, rtol: float = RANK_RTOL) -> np.ndarray:
    """Moore-Penrose inverse via SVD; singular values below rtol * s_max count as zero."""
    j = np.asarray(j, dtype=float)
    if j.ndim != 2:
        raise InvalidArgument("pseudoinverse expects a 2-D matrix")
    if not np.all(np.isfinite(j)):
        raise InvalidArgument("matrix must be finite")
    u, s, vt = np.linalg.svd(j, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(j.T.shape)
    keep = s >= rtol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


# Four links, base yaw then three pitch joints; the last stays level with the table.
DEFAULT_ROWS = (
    DhRow(0.0, 90.0, 3.0, 17.5),
    DhRow(0.0, 0.0, 22.3, 0.0),
    DhRow(0.0, 0.0, 31.5, 0.0),
    DhRow(0.0, 0.0, 14.0, 0.0),
)
DEFAULT_COUPLING = {3: (0.0, -1.0, -1.0)}


def default_chain() -> DhChain:
    return DhChain(DEFAULT_ROWS, DEFAULT_COUPLING)


def chain_to_dict(chain: DhChain) -> dict:
    rows = []
    for i, r in enumerate(chain.rows):
        row = {"theta_offset": r.theta_offset, "alpha": r.alpha, "a": r.a, "d": r.d,
               "kind": r.kind.value}
        if i in chain.coupling:
            row["coupling"] = list(chain.coupling[i])
        rows.append(row)
    return {"rows": rows}


def chain_from_dict(data: Mapping) -> DhChain:
    try:
        raw_rows: Sequence[Mapping] = data["rows"]
        rows, coupling = [], {}
        for i, r in enumerate(raw_rows):
            rows.append(DhRow(float(r.get("theta_offset", 0.0)), float(r["alpha"]),
                              float(r["a"]), float(r["d"]), JointKind(r.get("kind", "revolute"))))
            if r.get("coupling") is not None:
                coupling[i] = tuple(float(c) for c in r["coupling"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"bad chain description: {exc}") from exc
    return DhChain(tuple(rows), coupling)


def load_chain(path) -> DhChain:
    return chain_from_dict(json.loads(Path(path).read_text()))


def save_chain(chain: DhChain, path) -> None:
    Path(path).write_text(json.dumps(chain_to_dict(chain), indent=2) + "\n")
