"""Frames and forward kinematics for a three-legged parallel manipulator.

The moving plate is carried by three legs that attach through ball joints.
Plate orientation is expressed as intrinsic Z-Y-X (yaw-pitch-roll) Euler
angles.  The fixed base frame sits at the centroid of the three servo
axes, a constant ``base_height`` below the plate frame.  All lengths are
millimetres, all angles radians unless a name says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EulerAngles",
    "Vec3",
    "HomogeneousTransform",
    "PlatformGeometry",
    "RobotState",
    "grubler_dof",
    "rotation_transform",
    "translation_transform",
    "compose",
    "ball_joint_positions",
    "default_geometry",
]


@dataclass(frozen=True)
class EulerAngles:
    """Intrinsic Z-Y-X orientation sample: yaw about Z, pitch about Y, roll about X."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for name in ("yaw", "pitch", "roll"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"EulerAngles.{name} must be finite")


@dataclass(frozen=True)
class Vec3:
    """Cartesian point or displacement, millimetres."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Vec3.{name} must be finite")


class HomogeneousTransform:
    """A 4x4 rigid-body pose: rotation block, translation column, fixed bottom row.

    Construction validates the invariants: bottom row exactly (0,0,0,1) and
    an orthonormal, right-handed rotation block (to 1e-9).
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"transform must be 4x4, got {m.shape}")
        if not (m[3, 0] == 0.0 and m[3, 1] == 0.0 and m[3, 2] == 0.0 and m[3, 3] == 1.0):
            raise ValueError("bottom row must be exactly (0, 0, 0, 1)")
        r = m[:3, :3]
        if not np.all(np.isfinite(m)):
            raise ValueError("transform entries must be finite")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err >= 1e-9:
            raise ValueError(f"rotation block not orthonormal (|R'R - I| = {err:.3e})")
        det = float(np.linalg.det(r))
        if abs(det - 1.0) >= 1e-9:
            raise ValueError(f"rotation block must have determinant +1, got {det!r}")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls) -> "HomogeneousTransform":
        return cls(np.eye(4))

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> Vec3:
        return Vec3(self.matrix[0, 3], self.matrix[1, 3], self.matrix[2, 3])

    def apply(self, p: Vec3) -> Vec3:
        """Map a point through this transform (rotate, then translate)."""
        m = self.matrix
        return Vec3(
            m[0, 0] * p.x + m[0, 1] * p.y + m[0, 2] * p.z + m[0, 3],
            m[1, 0] * p.x + m[1, 1] * p.y + m[1, 2] * p.z + m[1, 3],
            m[2, 0] * p.x + m[2, 1] * p.y + m[2, 2] * p.z + m[2, 3],
        )

    def __repr__(self):
        return f"HomogeneousTransform({self.matrix.tolist()!r})"


@dataclass(frozen=True)
class PlatformGeometry:
    """Mechanism dimensions: joint layout on the plate plus leg-link lengths.

    joint_top: ball-joint coordinates in the plate frame (exactly three).
    base_height: fixed plate-frame height above the base frame, mm.
    crank_length / link_length: servo crank (link-1) and coupler (link-2), mm.
    servo_home: neutral servo angle, degrees.
    """

    joint_top: tuple[Vec3, Vec3, Vec3]
    base_height: float = 88.89
    crank_length: float = 15.0
    link_length: float = 79.0
    servo_home: float = 45.0

    def __post_init__(self):
        if len(self.joint_top) != 3:
            raise ValueError("exactly three ball joints required")
        if not self.crank_length > 0:
            raise ValueError("crank_length must be positive")
        if not self.link_length > self.crank_length:
            raise ValueError("link_length must exceed crank_length")
        j0, j1, j2 = self.joint_top
        cross = (j1.x - j0.x) * (j2.y - j0.y) - (j2.x - j0.x) * (j1.y - j0.y)
        if abs(cross) < 1e-9:
            raise ValueError("ball joints must not be collinear")

    @property
    def joint_xy(self) -> tuple[tuple[float, float], ...]:
        return tuple((j.x, j.y) for j in self.joint_top)


@dataclass(frozen=True)
class RobotState:
    """Base-frame ball-joint positions at one instant."""

    joints: tuple[Vec3, Vec3, Vec3]
    timestamp: float = 0.0

    def __post_init__(self):
        if len(self.joints) != 3:
            raise ValueError("RobotState carries exactly three joints")
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")

    @property
    def z(self) -> tuple[float, float, float]:
        """Heights of the three joints, the controlled quantities."""
        return (self.joints[0].z, self.joints[1].z, self.joints[2].z)


def default_geometry() -> PlatformGeometry:
    """Joint ring of 40 mm radius with bearings at 90, 210 and 330 degrees."""
    joints = []
    for bearing in (90.0, 210.0, 330.0):
        a = math.radians(bearing)
        joints.append(Vec3(40.0 * math.cos(a), 40.0 * math.sin(a), 0.0))
    return PlatformGeometry(joint_top=tuple(joints))


def grubler_dof(num_links: int, joints) -> int:
    """Mobility of a linkage: 6*(N - 1 - J) + sum(Fi * Ji).

    ``joints`` lists (dof-per-joint, joint-count) pairs; J is the total
    joint count.  Exact integer arithmetic.
    """
    n = int(num_links)
    if n != num_links or n < 2:
        raise ValueError("num_links must be an integer >= 2")
    total_joints = 0
    freedom = 0
    for dof, count in joints:
        dof = int(dof)
        count = int(count)
        if dof < 0 or count < 0:
            raise ValueError("joint dof and count must be non-negative")
        total_joints += count
        freedom += dof * count
    return 6 * (n - 1 - total_joints) + freedom


def rotation_transform(angles: EulerAngles, base_height: float) -> HomogeneousTransform:
    """Plate-to-base pose: Z-Y-X rotation with translation (0, 0, base_height).

    The rotation entries are written out termwise so they can be compared
    against the expanded per-joint position formulas.
    """
    cz, sz = math.cos(angles.yaw), math.sin(angles.yaw)
    cy, sy = math.cos(angles.pitch), math.sin(angles.pitch)
    cx, sx = math.cos(angles.roll), math.sin(angles.roll)
    m = np.array(
        [
            [cz * cy, -sz * cx + cz * sy * sx, sz * sx + cz * sy * cx, 0.0],
            [sz * cy, cz * cx + sz * sy * sx, -cz * sx + sz * sy * cx, 0.0],
            [-sy, cy * sx, cy * cx, float(base_height)],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    return HomogeneousTransform(m)


def translation_transform(p: Vec3) -> HomogeneousTransform:
    """Pure translation: identity rotation, translation column (x, y, z)."""
    m = np.eye(4)
    m[0, 3] = p.x
    m[1, 3] = p.y
    m[2, 3] = p.z
    return HomogeneousTransform(m)


def compose(outer: HomogeneousTransform, inner: HomogeneousTransform) -> HomogeneousTransform:
    """Standard transform product: apply ``inner`` first, then ``outer``."""
    return HomogeneousTransform(outer.matrix @ inner.matrix)


def ball_joint_positions(
    angles: EulerAngles, geometry: PlatformGeometry, timestamp: float = 0.0
) -> RobotState:
    """Base-frame positions of the three ball joints for a plate orientation.

    Evaluates the expanded forward-kinematic formulas directly:

        Xp = (cz*cy)*x + (-sz*cx + cz*sy*sx)*y + (sz*sx + cz*sy*cx)*z
        Yp = (sz*cy)*x + ( cz*cx + sz*sy*sx)*y + (-cz*sx + sz*sy*cx)*z
        Zp = (-sy)*x   + (cy*sx)*y            + (cy*cx)*z            + base_height

    which agree with mapping each plate-frame joint through
    ``rotation_transform(angles, base_height)``.
    """
    cz, sz = math.cos(angles.yaw), math.sin(angles.yaw)
    cy, sy = math.cos(angles.pitch), math.sin(angles.pitch)
    cx, sx = math.cos(angles.roll), math.sin(angles.roll)
    h = geometry.base_height
    joints = []
    for j in geometry.joint_top:
        xp = (cz * cy) * j.x + (-sz * cx + cz * sy * sx) * j.y + (sz * sx + cz * sy * cx) * j.z
        yp = (sz * cy) * j.x + (cz * cx + sz * sy * sx) * j.y + (-cz * sx + sz * sy * cx) * j.z
        zp = (-sy) * j.x + (cy * sx) * j.y + (cy * cx) * j.z + h
        joints.append(Vec3(xp, yp, zp))
    return RobotState(joints=tuple(joints), timestamp=timestamp)
