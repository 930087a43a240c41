"""Target quadratic interactions and the feedback schedules that realise them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .exceptions import ContractViolation
from .gaussian import direct_sum, rotation_frame_matrix
from .protocol import GainSchedule, ProtocolConfig, build_G0, canonical_gains


@dataclass(frozen=True)
class QuadraticTarget:
    """``H = gamma (Z x1 p2 +/- p1 x2 / Z)``.

    With the ``+`` sign (``passive=False``) this is ``gamma (mu H_A + nu H_P)``
    with ``mu = (Z + 1/Z)/2``, ``nu = (Z - 1/Z)/2``; the ``-`` sign swaps the
    roles of ``mu`` and ``nu`` so the energy-conserving part dominates.

    ``pre_angles``/``post_angles`` are local rotation angles ``(theta_I, theta_II)``
    applied before/after the canonical evolution.
    """

    gamma: float
    Z: float = 1.0
    passive: bool = False
    pre_angles: tuple = (0.0, 0.0)
    post_angles: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.Z > 0:
            raise ContractViolation(f"Z must be real and positive, got {self.Z}")

    @classmethod
    def from_config(cls, cfg: ProtocolConfig, **kw) -> "QuadraticTarget":
        return cls(gamma=cfg.kappa * cfg.g / (2 * cfg.total_time), Z=cfg.Z, **kw)

    @property
    def mu(self) -> float:
        return 0.5 * (self.Z + 1.0 / self.Z)

    @property
    def nu(self) -> float:
        return 0.5 * (self.Z - 1.0 / self.Z)

    @property
    def active_weight(self) -> float:
        return self.nu if self.passive else self.mu

    @property
    def passive_weight(self) -> float:
        return self.mu if self.passive else self.nu

    def generator(self) -> np.ndarray:
        """Canonical-form generator (before the local rotations)."""
        s = -1.0 if self.passive else 1.0
        Z = self.Z
        return self.gamma * np.array([
            [0.0, 0.0, s / Z, 0.0],
            [0.0, 0.0, 0.0, -Z],
            [Z, 0.0, 0.0, 0.0],
            [0.0, -s / Z, 0.0, 0.0],
        ])

    def ideal_map(self, duration: float) -> np.ndarray:
        S = expm(self.generator() * duration)
        return conjugate_by_local_rotations(S, (*self.post_angles, *self.pre_angles))


def _check_consistent(target: QuadraticTarget, cfg: ProtocolConfig):
    gamma_cfg = cfg.kappa * cfg.g / (2 * cfg.total_time)
    if not np.isclose(target.gamma, gamma_cfg, rtol=1e-12, atol=1e-15):
        raise ContractViolation(
            f"target gamma {target.gamma} inconsistent with kappa g / 2T = {gamma_cfg}"
        )
    if not np.isclose(target.Z, cfg.Z, rtol=1e-12):
        raise ContractViolation(f"target Z {target.Z} differs from config Z {cfg.Z}")


def gain_schedule_for_target(target: QuadraticTarget, cfg: ProtocolConfig) -> GainSchedule:
    """Cross-feedback schedule whose coarse-grained generator is ``target.generator()``.

    Ensemble I is fed back at ``omega2`` with ``g_a = -g/Z`` (``+g/Z`` for the
    passive form) and ensemble II at ``omega1`` with ``g_b = -g Z``.
    """
    if cfg.omega1 == cfg.omega2:
        raise ContractViolation("interaction gains need omega1 != omega2")
    _check_consistent(target, cfg)
    g_a = (1.0 if target.passive else -1.0) * cfg.g / cfg.Z
    return canonical_gains(cfg, g_a=g_a, g_b=-cfg.g * cfg.Z)


def target_generator(target: QuadraticTarget, cfg: ProtocolConfig) -> np.ndarray:
    _check_consistent(target, cfg)
    return build_G0(cfg, passive=target.passive)


def local_rotation(theta_I: float, theta_II: float) -> np.ndarray:
    return direct_sum(rotation_frame_matrix(1.0, theta_I), rotation_frame_matrix(1.0, theta_II))


def conjugate_by_local_rotations(M: np.ndarray, angles) -> np.ndarray:
    """Return ``(R_I + R_II) M (R_I' + R_II')^T`` for ``angles = (t_I, t_II, t_I', t_II')``."""
    angles = tuple(float(a) for a in angles)
    if len(angles) != 4:
        raise ContractViolation("need four rotation angles")
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ContractViolation(f"expected a 4x4 matrix, got {M.shape}")
    return local_rotation(*angles[:2]) @ M @ local_rotation(*angles[2:]).T
