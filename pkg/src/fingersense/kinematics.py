"""Planar finger kinematics and pose estimation from calibrated sensors.

The chain is a fixed base link along +x followed by three revolute joints
(MCP, PIP, DIP), each followed by one link. Angles are degrees at every
public boundary; positive angles flex the finger towards +y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, ZeroSensitivityError
from .signal import JointCalibration


@dataclass(frozen=True)
class ChainConfig:
    link_lengths: tuple[float, ...] = (28.0, 28.0, 28.0, 28.0)

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.link_lengths)
        if len(lengths) < 2:
            raise DimensionError("chain needs a base link and at least one jointed link")
        if any(not x > 0 for x in lengths):
            raise DimensionError("link lengths must be > 0")
        object.__setattr__(self, "link_lengths", lengths)

    @property
    def n_joints(self) -> int:
        return len(self.link_lengths) - 1

    @property
    def reach(self) -> float:
        return sum(self.link_lengths)


@dataclass(frozen=True)
class Pose:
    joint_angles_deg: tuple[float, ...]
    fingertip: tuple[float, float]


def fingertip_positions(chain: ChainConfig, joint_angles_deg) -> np.ndarray:
    """Vectorised forward kinematics: (..., n_joints) degrees -> (..., 2) mm."""
    q = np.asarray(joint_angles_deg, dtype=float)
    if q.shape[-1:] != (chain.n_joints,):
        raise DimensionError(f"expected {chain.n_joints} joint angles, got shape {q.shape}")
    lengths = np.asarray(chain.link_lengths)
    phi = np.concatenate([np.zeros(q.shape[:-1] + (1,)), np.cumsum(np.radians(q), axis=-1)], axis=-1)
    x = (lengths * np.cos(phi)).sum(axis=-1)
    y = (lengths * np.sin(phi)).sum(axis=-1)
    return np.stack([x, y], axis=-1)


def forward_kinematics(chain: ChainConfig, joint_angles_deg: Sequence[float]) -> tuple[float, float]:
    x, y = fingertip_positions(chain, joint_angles_deg)
    return float(x), float(y)


def angle_from_loss(loss, cal: JointCalibration, clamp: bool = False, theta_max: float = 90.0):
    """Invert a calibration line. Unclamped estimates may be negative."""
    if cal.beta1 == 0:
        raise ZeroSensitivityError(f"calibration {cal.sensor_id or ''} has zero slope".strip())
    theta = (np.asarray(loss, dtype=float) - cal.beta0) / cal.beta1
    if clamp:
        theta = np.clip(theta, 0.0, theta_max)
    return float(theta) if theta.ndim == 0 else theta


def _pose(chain, angles):
    angles = tuple(float(a) for a in angles)
    return Pose(joint_angles_deg=angles, fingertip=forward_kinematics(chain, angles))


def estimate_pose_multi(losses: Sequence[float], cals: Sequence[JointCalibration], chain: ChainConfig = ChainConfig(),
                        clamp: bool = False) -> Pose:
    """One sensor per joint: invert each calibration, then run forward kinematics."""
    if len(losses) != len(cals) or len(cals) != chain.n_joints:
        raise DimensionError("need one loss and one calibration per joint")
    return _pose(chain, [angle_from_loss(y, c, clamp) for y, c in zip(losses, cals)])


def estimate_pose_single(loss: float, cals: Sequence[JointCalibration], chain: ChainConfig = ChainConfig(),
                         clamp: bool = False) -> Pose:
    """One sensor drives every joint estimate through per-joint calibrations."""
    if len(cals) != chain.n_joints:
        raise DimensionError("need one calibration per joint")
    return _pose(chain, [angle_from_loss(loss, c, clamp) for c in cals])


def estimate_angles(losses, cals: Sequence[JointCalibration], clamp: bool = False) -> np.ndarray:
    """Batch inversion. ``losses`` is (N, 3) for a multi-sensor finger or (N,) for a single sensor."""
    losses = np.asarray(losses, dtype=float)
    if losses.ndim == 1:
        return np.column_stack([angle_from_loss(losses, c, clamp) for c in cals])
    if losses.shape[1] != len(cals):
        raise DimensionError("need one calibration per loss column")
    return np.column_stack([angle_from_loss(losses[:, j], c, clamp) for j, c in enumerate(cals)])


def fingertip_error(est: Pose, truth: Pose) -> float:
    return float(np.hypot(est.fingertip[0] - truth.fingertip[0], est.fingertip[1] - truth.fingertip[1]))


def fingertip_errors(chain: ChainConfig, est_angles, true_angles) -> np.ndarray:
    """Per-sample Euclidean fingertip error (mm) between two angle trajectories."""
    d = fingertip_positions(chain, est_angles) - fingertip_positions(chain, true_angles)
    return np.hypot(d[..., 0], d[..., 1])
