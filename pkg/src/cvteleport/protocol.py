"""Discretised measurement-feedback loop acting on two rotating-frame oscillators.

The atomic vector is ``X = (x_I, p_I, x_II, p_II)`` in the frames co-rotating at
``omega1`` and ``omega2``. The input light is ``Y = (x_L1..x_LN, p_L1..p_LN)``.
After the protocol ``X_out = S X_in + T_noise Y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .exceptions import ContractViolation, InvariantViolation

#: maximum ``omega * tau`` allowed for a slice
SLICE_PHASE_CAP = 1e-3
#: hard ceiling on the number of slices chosen automatically
MAX_STEPS = 2_000_000

MODES = ("interaction", "teleport")


@dataclass(frozen=True)
class ProtocolConfig:
    """Physical and discretisation parameters of one protocol run.

    ``window`` is the coarse-graining interval over which the map is evaluated;
    it defaults to ``total_time``. Couplings are normalised to ``total_time`` and
    ``steps`` (so ``tau = total_time / steps``), which lets a window shorter than
    the whole interaction be studied.
    """

    kappa: float = 1.0
    g: float = 1.0
    Z: float = 1.0
    omega1: float = 1.0
    omega2: float = 2.0
    total_time: float = 100.0
    steps: int = 200_000
    window: float | None = None
    jam_R: float = 3.0
    light_r: float = 0.0
    mode: str = "interaction"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractViolation(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.Z > 0:
            raise ContractViolation(f"Z must be positive, got {self.Z}")
        if self.total_time <= 0:
            raise ContractViolation("total_time must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ContractViolation(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))
        if self.omega1 < 0 or self.omega2 < 0:
            raise ContractViolation("Larmor frequencies must be non-negative")
        if self.light_r < 0:
            raise ContractViolation("light squeezing r must be non-negative")
        if self.window is not None and not 0 < self.window <= self.total_time * (1 + 1e-12):
            raise ContractViolation("window must lie in (0, total_time]")
        if self.mode == "interaction" and self.omega1 == self.omega2:
            raise InvariantViolation("interaction mode requires omega1 != omega2")
        if self.omega_max * self.tau > SLICE_PHASE_CAP * (1 + 1e-9):
            raise InvariantViolation(
                f"omega_max * tau = {self.omega_max * self.tau:.3g} exceeds {SLICE_PHASE_CAP}"
            )
        n_w = self.window_time / self.tau
        if abs(n_w - round(n_w)) > 1e-6:
            raise ContractViolation("window must be an integer number of slices")

    @classmethod
    def from_omega_dt(cls, omega1_dt: float, *, omega1: float = 1.0, omega2_ratio: float = 2.0,
                      phase_cap: float = SLICE_PHASE_CAP, **kw) -> "ProtocolConfig":
        """Build a config with ``total_time = omega1_dt / omega1`` and ``steps`` set by the slice cap."""
        total_time = omega1_dt / omega1
        omega2 = kw.pop("omega2", omega2_ratio * omega1)
        om_max = max(omega1, omega2)
        steps = kw.pop("steps", None)
        if steps is None:
            steps = max(1, math.ceil(om_max * total_time / phase_cap - 1e-9))
            if steps > MAX_STEPS:
                raise InvariantViolation(f"{steps} slices exceed the ceiling {MAX_STEPS}")
        return cls(omega1=omega1, omega2=omega2, total_time=total_time, steps=steps, **kw)

    def replace(self, **changes) -> "ProtocolConfig":
        return replace(self, **changes)

    @property
    def tau(self) -> float:
        return self.total_time / self.steps

    @property
    def omega_max(self) -> float:
        return max(self.omega1, self.omega2)

    @property
    def window_time(self) -> float:
        return self.total_time if self.window is None else self.window

    @property
    def window_steps(self) -> int:
        return int(round(self.window_time / self.tau))

    @property
    def epsilon(self) -> float:
        """Largest of the inverse phase accumulations over the window."""
        dt = self.window_time
        terms = [self.omega1 * dt, self.omega2 * dt]
        if self.mode == "interaction":
            terms.append(abs(self.omega1 - self.omega2) * dt)
        return max(math.inf if x == 0 else 1.0 / x for x in terms)

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa, "g": self.g, "Z": self.Z, "omega1": self.omega1,
            "omega2": self.omega2, "total_time": self.total_time, "steps": self.steps,
            "window": self.window_time, "jam_R": self.jam_R, "light_r": self.light_r,
            "mode": self.mode,
        }


GAIN_LABELS = ("x_I", "p_I", "x_II", "p_II")


@dataclass(frozen=True)
class GainSchedule:
    """Time-modulated feedback gains, ordered ``(x_I, p_I, x_II, p_II)``.

    ``g_q,e(t) = amplitude * trig(frequency * t + phase)`` with ``sin`` for the
    x-gains and ``cos`` for the p-gains.
    """

    amplitudes: tuple = (0.0, 0.0, 0.0, 0.0)
    frequencies: tuple = (0.0, 0.0, 0.0, 0.0)
    phases: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("amplitudes", "frequencies", "phases"):
            vals = tuple(float(x) for x in getattr(self, name))
            if len(vals) != 4:
                raise ContractViolation(f"{name} needs 4 entries, got {len(vals)}")
            object.__setattr__(self, name, vals)

    @classmethod
    def zero(cls) -> "GainSchedule":
        return cls()

    def arrays(self):
        return (np.array(self.amplitudes), np.array(self.frequencies), np.array(self.phases))

    def __call__(self, t):
        """Evaluate the four gains; ``t`` may be an array (result shape ``t.shape + (4,)``)."""
        amp, freq, phase = self.arrays()
        arg = np.multiply.outer(np.asarray(t, dtype=float), freq) + phase
        trig = np.where(np.arange(4) % 2 == 0, np.sin(arg), np.cos(arg))
        return amp * trig

    def scaled(self, factor: float) -> "GainSchedule":
        return replace(self, amplitudes=tuple(factor * a for a in self.amplitudes))


def canonical_gains(cfg: ProtocolConfig, g_a: float | None = None, g_b: float | None = None) -> GainSchedule:
    """Cross-feedback schedule: ensemble I gains oscillate at ``omega2`` and vice versa.

    Defaults to ``g_a = -g/Z``, ``g_b = -g Z``.
    """
    g_a = -cfg.g / cfg.Z if g_a is None else g_a
    g_b = -cfg.g * cfg.Z if g_b is None else g_b
    om_a, om_b = cfg.omega2, cfg.omega1
    return GainSchedule((g_a, g_b, g_b, g_a), (om_a, om_a, om_b, om_b))


def readout_vector(t, cfg: ProtocolConfig) -> np.ndarray:
    """Rotating-frame direction of the lab-frame ``p_I + p_II`` picked up by the light."""
    a1, a2 = cfg.omega1 * t, cfg.omega2 * t
    return np.array([-np.sin(a1), np.cos(a1), -np.sin(a2), np.cos(a2)])


def kick_vector(t, cfg: ProtocolConfig) -> np.ndarray:
    """Rotating-frame direction of the lab-frame x-kick by ``p_L``."""
    a1, a2 = cfg.omega1 * t, cfg.omega2 * t
    return np.array([np.cos(a1), np.sin(a1), np.cos(a2), np.sin(a2)])


@dataclass(frozen=True)
class LinearMapResult:
    """Realised atomic map ``S`` and light-to-atom transfer matrix ``T_noise``.

    ``T_noise`` has ``2 n`` columns for the ``n`` slices inside the window,
    ordered ``(x_L1..x_Ln, p_L1..p_Ln)``.
    """

    S: np.ndarray
    T_noise: np.ndarray
    config: ProtocolConfig
    gains: GainSchedule = field(default_factory=GainSchedule)

    @property
    def slices(self) -> int:
        return self.T_noise.shape[1] // 2

    def apply(self, x_in, y) -> np.ndarray:
        return self.S @ np.asarray(x_in) + self.T_noise @ np.asarray(y)


def _slice_index(n: int, cfg: ProtocolConfig):
    if not 1 <= n <= cfg.steps:
        raise ContractViolation(f"slice index {n} outside 1..{cfg.steps}")


def light_readout(n: int, coeffs: np.ndarray, cfg: ProtocolConfig) -> np.ndarray:
    """Coefficient row of ``x_L,n^out`` given the atomic coefficients entering slice ``n``.

    ``coeffs`` is ``4 x (4 + 2N)`` over ``(X_in, x_L1..x_LN, p_L1..p_LN)``.
    """
    _slice_index(n, cfg)
    N = cfg.steps
    row = (cfg.kappa / math.sqrt(N)) * (readout_vector(n * cfg.tau, cfg) @ coeffs)
    row[4 + n - 1] += 1.0
    return row


def simulate_step(n: int, coeffs: np.ndarray, cfg: ProtocolConfig, gains: GainSchedule) -> np.ndarray:
    """Advance the symbolic atomic coefficients through slice ``n``.

    Within the slice: the light picks up the atoms (using the atoms entering the
    slice), the atoms are kicked by ``p_L,n^in`` and finally displaced by the
    fed-back ``x_L,n^out``. Nothing is sampled; the map stays linear in the inputs.
    """
    N = cfg.steps
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (4, 4 + 2 * N):
        raise ContractViolation(f"coefficients must be 4 x {4 + 2 * N}, got {coeffs.shape}")
    t = n * cfg.tau
    x_out = light_readout(n, coeffs, cfg)
    new = coeffs.copy()
    new[:, 4 + N + n - 1] += (cfg.kappa / math.sqrt(N)) * kick_vector(t, cfg)
    new += np.outer(gains(t) / math.sqrt(N), x_out)
    return new


def propagate_stepwise(cfg: ProtocolConfig, gains: GainSchedule) -> LinearMapResult:
    """Reference path: chain :func:`simulate_step` over the window (O(N^2) memory-light loop).

    Meant for small ``steps``; :func:`run_protocol` is the production path.
    """
    N = cfg.steps
    coeffs = np.zeros((4, 4 + 2 * N))
    coeffs[:, :4] = np.eye(4)
    for n in range(1, cfg.window_steps + 1):
        coeffs = simulate_step(n, coeffs, cfg, gains)
    n_w = cfg.window_steps
    cols = np.r_[4:4 + n_w, 4 + N:4 + N + n_w]
    return LinearMapResult(coeffs[:, :4], coeffs[:, cols], cfg, gains)


def run_protocol(cfg: ProtocolConfig, gains: GainSchedule) -> LinearMapResult:
    """Compose all slices in the window and return the realised linear map."""
    amp, freq, phase = gains.arrays()
    S, tn = _kernels.backward_map(cfg.steps, cfg.window_steps, cfg.tau, float(cfg.kappa),
                                  float(cfg.omega1), float(cfg.omega2), amp, freq, phase)
    return LinearMapResult(S, tn, cfg, gains)


def displacement_trajectory(cfg: ProtocolConfig, gains: GainSchedule, d0=None, drive=None) -> np.ndarray:
    """Mean atomic vector after each slice; ``drive`` is an ``(n_window, 4)`` array of increments."""
    n_w = cfg.window_steps
    d0 = np.zeros(4) if d0 is None else np.asarray(d0, dtype=float)
    drive = np.zeros((n_w, 4)) if drive is None else np.ascontiguousarray(drive, dtype=float)
    if drive.shape != (n_w, 4):
        raise ContractViolation(f"drive increments must have shape {(n_w, 4)}, got {drive.shape}")
    amp, freq, phase = gains.arrays()
    return _kernels.displacement_trajectory(cfg.steps, n_w, cfg.tau, float(cfg.kappa),
                                            float(cfg.omega1), float(cfg.omega2),
                                            amp, freq, phase, d0, drive)


def build_G(t: float, cfg: ProtocolConfig, gains: GainSchedule) -> np.ndarray:
    """Instantaneous generator ``(kappa / T) g(t) v(t)^T`` of the noiseless dynamics."""
    return (cfg.kappa / cfg.total_time) * np.outer(gains(t), readout_vector(t, cfg))


def first_order_product(cfg: ProtocolConfig, gains: GainSchedule) -> np.ndarray:
    """Cross-check path: ``prod_n (1 + G(n tau) tau)`` over the window."""
    S = np.eye(4)
    for n in range(1, cfg.window_steps + 1):
        S = (np.eye(4) + cfg.tau * build_G(n * cfg.tau, cfg, gains)) @ S
    return S


def build_G0(cfg: ProtocolConfig, passive: bool = False) -> np.ndarray:
    """Target generator of the coarse-grained dynamics.

    ``passive=False`` gives ``H = gamma (Z x1 p2 + p1 x2 / Z)``;
    ``passive=True`` flips the sign of the ``1/Z`` coupling.
    """
    Z = cfg.Z
    if not Z > 0:
        raise ContractViolation(f"Z must be positive, got {Z}")
    s = -1.0 if passive else 1.0
    gamma = cfg.g * cfg.kappa / (2 * cfg.total_time)
    return gamma * np.array([
        [0.0, 0.0, s / Z, 0.0],
        [0.0, 0.0, 0.0, -Z],
        [Z, 0.0, 0.0, 0.0],
        [0.0, -s / Z, 0.0, 0.0],
    ])


def averaged_generator(cfg: ProtocolConfig, gains: GainSchedule, samples_per_slice: int = 1) -> np.ndarray:
    """Window average of ``G(t)`` by the midpoint rule on the slice grid."""
    n = cfg.window_steps * samples_per_slice
    h = cfg.window_time / n
    t = (np.arange(n) + 0.5) * h
    f = gains(t)
    a1, a2 = cfg.omega1 * t, cfg.omega2 * t
    v = np.stack([-np.sin(a1), np.cos(a1), -np.sin(a2), np.cos(a2)], axis=1)
    return (cfg.kappa / cfg.total_time) * (f.T @ v) / n


_TRIG = {"sin": np.sin, "cos": np.cos}


def averaging_identity(pair, omega_i: float, omega_j: float, t0: float, dt: float) -> float:
    """Closed-form window average ``(1/dt) int_t0^{t0+dt} f(omega_i t) h(omega_j t) dt``.

    ``pair`` is a tuple such as ``("sin", "cos")``.
    """
    if dt <= 0:
        raise ContractViolation("averaging window must be positive")
    a, b = pair
    if a not in _TRIG or b not in _TRIG:
        raise ContractViolation(f"unknown trig pair {pair!r}")
    # product-to-sum: f(u) h(w) = 1/2 [c_minus trig(u - w) + c_plus trig(u + w)]
    if (a, b) == ("sin", "sin"):
        terms = [(0.5, "cos", omega_i - omega_j), (-0.5, "cos", omega_i + omega_j)]
    elif (a, b) == ("cos", "cos"):
        terms = [(0.5, "cos", omega_i - omega_j), (0.5, "cos", omega_i + omega_j)]
    elif (a, b) == ("sin", "cos"):
        terms = [(0.5, "sin", omega_i + omega_j), (0.5, "sin", omega_i - omega_j)]
    else:
        terms = [(0.5, "sin", omega_i + omega_j), (-0.5, "sin", omega_i - omega_j)]
    t1 = t0 + dt
    total = 0.0
    for coef, kind, w in terms:
        if w == 0:
            total += coef * (dt if kind == "cos" else 0.0)
        elif kind == "cos":
            total += coef * (np.sin(w * t1) - np.sin(w * t0)) / w
        else:
            total += coef * (np.cos(w * t0) - np.cos(w * t1)) / w
    return float(total / dt)
