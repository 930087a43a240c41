"""Continuous teleportation of a time evolution from ensemble II (Charlie) to ensemble I (Bob).

Both ensembles precess at the same frequency and only ensemble I receives feedback.
A transverse field ``H = alpha_x(t) x_II + alpha_p(t) p_II`` on Charlie's side is
transmitted to Bob through the measured light.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .exceptions import ContractViolation
from .noise import NoiseDecomposition, ProductLightCovariance, integrated_noise, noise_covariance
from .protocol import (GainSchedule, LinearMapResult, ProtocolConfig, averaging_identity,
                       displacement_trajectory, run_protocol)

#: minimum number of drive-table samples per Larmor period
MIN_SAMPLES_PER_PERIOD = 20


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


class FieldDrive:
    """Transverse field on Charlie's ensemble.

    ``alpha_x`` and ``alpha_p`` are vectorised callables of time. ``frame`` says
    whether they are given in the lab frame or already in the frame rotating at
    ``omega`` (where a constant value is a resonant lab-frame field).
    """

    def __init__(self, alpha_x=None, alpha_p=None, frame: str = "rotating", sample_spacing=None):
        if frame not in ("lab", "rotating"):
            raise ContractViolation(f"frame must be 'lab' or 'rotating', got {frame!r}")
        self.alpha_x = _zero if alpha_x is None else alpha_x
        self.alpha_p = _zero if alpha_p is None else alpha_p
        self.frame = frame
        self.sample_spacing = sample_spacing

    @classmethod
    def from_table(cls, t, values, quadrature: str = "p", frame: str = "rotating") -> "FieldDrive":
        """Linearly interpolated drive acting on one quadrature's field component."""
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != values.shape or len(t) < 2:
            raise ContractViolation("drive table needs matching 1-D time and value columns")
        if np.any(np.diff(t) <= 0):
            raise ContractViolation("drive table times must be strictly increasing")

        def interp(s):
            return np.interp(s, t, values)

        spacing = float(np.max(np.diff(t)))
        if quadrature == "p":
            return cls(alpha_p=interp, frame=frame, sample_spacing=spacing)
        if quadrature == "x":
            return cls(alpha_x=interp, frame=frame, sample_spacing=spacing)
        raise ContractViolation(f"quadrature must be 'x' or 'p', got {quadrature!r}")

    def rotating(self, t, omega: float):
        """``(alpha~_x, alpha~_p)`` in the frame rotating at ``omega``."""
        ax, ap = np.asarray(self.alpha_x(t), float), np.asarray(self.alpha_p(t), float)
        if self.frame == "rotating":
            return ax, ap
        c, s = np.cos(omega * np.asarray(t)), np.sin(omega * np.asarray(t))
        return c * ax - s * ap, s * ax + c * ap

    def __add__(self, other: "FieldDrive") -> "FieldDrive":
        if self.frame != other.frame:
            raise ContractViolation("cannot add drives given in different frames")
        spacing = [s for s in (self.sample_spacing, other.sample_spacing) if s is not None]
        return FieldDrive(lambda t: self.alpha_x(t) + other.alpha_x(t),
                          lambda t: self.alpha_p(t) + other.alpha_p(t),
                          self.frame, min(spacing) if spacing else None)


def load_drive_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``(t, value)`` table; comma or whitespace separated, header lines skipped."""
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = next(csv.reader([line])) if "," in line else line.split()
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ContractViolation(f"malformed drive table line: {line!r}")
                continue  # header
    if len(rows) < 2:
        raise ContractViolation(f"drive table {path} has fewer than two rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def write_drive_table(path, t, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for a, b in zip(t, values):
            w.writerow([repr(float(a)), repr(float(b))])


@dataclass(frozen=True)
class TeleportGains:
    """Feedback on ensemble I only: ``g_x = gx_bar sin(omega t)``, ``g_p = gp_bar cos(omega t)``."""

    gx_bar: float
    gp_bar: float
    omega: float

    def schedule(self) -> GainSchedule:
        om = self.omega
        return GainSchedule((self.gx_bar, self.gp_bar, 0.0, 0.0), (om, om, om, om))

    def averaged_coupling(self) -> np.ndarray:
        """Coarse-grained self-coupling ``diag(-gx_bar/2, gp_bar/2)``."""
        return np.diag([-self.gx_bar / 2, self.gp_bar / 2])


def coupling_matrix_M(g1, g2, omega1, omega2, t) -> np.ndarray:
    """``[[-g1 s1 s2, g1 s1 c2], [-g2 c1 s2, g2 c1 c2]]``; vectorised over ``t`` (trailing 2x2)."""
    t = np.asarray(t, dtype=float)
    s1, c1 = np.sin(omega1 * t), np.cos(omega1 * t)
    s2, c2 = np.sin(omega2 * t), np.cos(omega2 * t)
    return np.stack([np.stack([-g1 * s1 * s2, g1 * s1 * c2], -1),
                     np.stack([-g2 * c1 * s2, g2 * c1 * c2], -1)], -2)


def average_coupling_matrix(g1, g2, omega1, omega2, dt, t0=0.0) -> np.ndarray:
    """Exact window average of :func:`coupling_matrix_M` over ``[t0, t0 + dt]``."""
    def avg(a, b):
        return averaging_identity((a, b), omega1, omega2, t0, dt)
    return np.array([[-g1 * avg("sin", "sin"), g1 * avg("sin", "cos")],
                     [-g2 * avg("cos", "sin"), g2 * avg("cos", "cos")]])


def _schedule(gains) -> GainSchedule:
    if isinstance(gains, TeleportGains):
        return gains.schedule()
    if isinstance(gains, GainSchedule):
        if any(gains.amplitudes[2:]):
            raise ContractViolation("teleportation mode forbids feedback on ensemble II")
        return gains
    raise ContractViolation(f"unsupported gains object {type(gains).__name__}")


def _check_teleport_config(cfg: ProtocolConfig):
    if cfg.omega1 != cfg.omega2:
        raise ContractViolation("teleportation needs equal Larmor frequencies")


@dataclass(frozen=True)
class TeleportResult:
    times: np.ndarray
    bob: np.ndarray
    charlie: np.ndarray
    config: ProtocolConfig
    linear_map: LinearMapResult | None = None

    def coarse_grained(self, period: float | None = None):
        """Bob's trajectory averaged over one Larmor period (default ``2 pi / omega``)."""
        period = 2 * np.pi / self.config.omega1 if period is None else period
        return coarse_grain(self.times, self.bob, period)


def drive_increments(cfg: ProtocolConfig, drive: FieldDrive) -> np.ndarray:
    """Per-slice displacement of ``(x~_II, p~_II)``: ``tau (alpha~_p, -alpha~_x)`` at slice midpoints."""
    n_w = cfg.window_steps
    tm = (np.arange(1, n_w + 1) - 0.5) * cfg.tau
    ax, ap = drive.rotating(tm, cfg.omega2)
    inc = np.zeros((n_w, 4))
    inc[:, 2] = cfg.tau * np.broadcast_to(ap, tm.shape)
    inc[:, 3] = -cfg.tau * np.broadcast_to(ax, tm.shape)
    return inc


def run_teleportation(cfg: ProtocolConfig, gains, drive: FieldDrive | None = None, d0=None,
                      with_map: bool = True) -> TeleportResult:
    """Full discretised simulation of Bob's and Charlie's mean quadratures under a drive.

    With ``d0 = 0`` (default) the returned displacements are purely drive-induced.
    """
    _check_teleport_config(cfg)
    sched = _schedule(gains)
    drive = FieldDrive() if drive is None else drive
    if drive.sample_spacing is not None and cfg.omega1 > 0:
        per_period = 2 * np.pi / cfg.omega1 / drive.sample_spacing
        if per_period < MIN_SAMPLES_PER_PERIOD:
            raise ContractViolation(
                f"drive sampled {per_period:.1f} times per Larmor period, need >= {MIN_SAMPLES_PER_PERIOD}"
            )
    traj = displacement_trajectory(cfg, sched, d0, drive_increments(cfg, drive))
    times = np.arange(cfg.window_steps + 1) * cfg.tau
    lin = run_protocol(cfg, sched) if with_map else None
    return TeleportResult(times, traj[:, :2], traj[:, 2:], cfg, lin)


def coarse_grain(t: np.ndarray, y: np.ndarray, period: float):
    """Moving average over ``period`` (whole samples); returns window-centre times and values."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    w = int(round(period / (t[1] - t[0])))
    if w < 1 or w > len(t):
        raise ContractViolation("coarse-graining period incompatible with the time grid")
    c = np.cumsum(np.concatenate([np.zeros((1,) + y.shape[1:]), y]), axis=0)
    avg = (c[w:] - c[:-w]) / w
    tc = (c_t := np.cumsum(np.r_[0.0, t]))[w:] - c_t[:-w]
    return tc / w, avg


def _charlie_drift(t, drive: FieldDrive, omega: float):
    ax, ap = drive.rotating(t, omega)
    ax = np.broadcast_to(ax, t.shape)
    ap = np.broadcast_to(ap, t.shape)
    return cumulative_trapezoid(ap, t, initial=0.0), -cumulative_trapezoid(ax, t, initial=0.0)


def teleported_field_oracle(t, drive: FieldDrive, cfg: ProtocolConfig, gains: TeleportGains):
    """Leading-order drive response of Bob: ``-(kappa/2T) (gx_bar, gp_bar) * double integral of (a~_p, a~_x)``.

    Evaluated by trapezoidal quadrature on the grid ``t`` (should start at 0).
    """
    t = np.asarray(t, dtype=float)
    cx, cp = _charlie_drift(t, drive, cfg.omega1)
    k = -cfg.kappa / (2 * cfg.total_time)
    x = k * gains.gx_bar * cumulative_trapezoid(cx, t, initial=0.0)
    p = k * gains.gp_bar * cumulative_trapezoid(-cp, t, initial=0.0)
    return np.stack([x, p], axis=1)


def coarse_grained_response(t, drive: FieldDrive, cfg: ProtocolConfig, gains: TeleportGains):
    """Drive response of the averaged dynamics ``dy/dt = (kappa/T) M_avg (y + charlie(t))``.

    Unlike :func:`teleported_field_oracle` this keeps Bob's feedback on himself,
    so it stays accurate when ``kappa * g`` is not small.
    """
    t = np.asarray(t, dtype=float)
    cx, cp = _charlie_drift(t, drive, cfg.omega1)
    M = (cfg.kappa / cfg.total_time) * gains.averaged_coupling()

    def rhs(s, y):
        c = np.array([np.interp(s, t, cx), np.interp(s, t, cp)])
        return M @ (y + c)

    sol = solve_ivp(rhs, (t[0], t[-1]), np.zeros(2), t_eval=t, rtol=1e-10, atol=1e-14,
                    max_step=(t[-1] - t[0]) / 2000)
    return sol.y.T


def added_noise_teleport(cfg: ProtocolConfig, gains) -> NoiseDecomposition:
    """Integrated light noise of the teleportation map (all four atomic quadratures)."""
    _check_teleport_config(cfg)
    return integrated_noise(run_protocol(cfg, _schedule(gains)))


def bob_added_noise(decomp: NoiseDecomposition, light_cov=None) -> np.ndarray:
    """Bob's 2x2 added-noise covariance; vacuum light unless ``light_cov`` is given."""
    T4 = decomp.T4
    light_cov = ProductLightCovariance.vacuum(T4.shape[1] // 2) if light_cov is None else light_cov
    return noise_covariance(T4, light_cov)[:2, :2]


def bob_noise_terms(decomp: NoiseDecomposition) -> tuple[np.ndarray, np.ndarray]:
    """Bob's vacuum noise split into the feedback (``x_L``) and back-action (``p_L``) parts.

    Squeezing the light's x quadrature by ``r`` scales the first by ``e^-r`` and
    the second by ``e^r``.
    """
    T = decomp.T4[:2]
    n = T.shape[1] // 2
    return T[:, :n] @ T[:, :n].T, T[:, n:] @ T[:, n:].T


def write_trajectory(path, columns: dict):
    """CSV with one column per key; values formatted with 17 significant digits."""
    keys = list(columns)
    n = len(next(iter(columns.values())))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for i in range(n):
            w.writerow([f"{float(columns[k][i]):.16e}" for k in keys])
