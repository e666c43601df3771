"""Vision-guided colour sorting with a DH arm and PD-shaped pseudoinverse-Jacobian IK."""

from .ik import IkTrace, JointLimits, PdGains, WorkspaceBox, solve
from .kinematics import (DhChain, DhRow, JointKind, Transform, default_chain, dh_transform,
                         forward_kinematics, geometric_jacobian, pseudoinverse)

__all__ = [
    "DhChain", "DhRow", "IkTrace", "JointKind", "JointLimits", "PdGains", "Transform",
    "WorkspaceBox", "default_chain", "dh_transform", "forward_kinematics",
    "geometric_jacobian", "pseudoinverse", "solve",
]
__version__ = "0.1.0"
