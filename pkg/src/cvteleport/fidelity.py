"""Channel comparison through Jamiolkowski covariance matrices."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractViolation, SingularConfiguration, UnphysicalState
from .gaussian import TOL, is_symmetric, symplectic_eigenvalues, uncertainty_min_eigenvalue
from .noise import NoiseDecomposition, integrated_noise
from .protocol import LinearMapResult, ProtocolConfig, run_protocol
from .targets import QuadraticTarget, gain_schedule_for_target

INV_PHI = (math.sqrt(5) - 1) / 2


class NegativeErrorWarning(UserWarning):
    """The realised covariance is smaller than the ideal one in some direction."""


def tmss_blocks(R: float):
    """``A(R) = cosh R 1_4`` and ``C(R) = sinh R diag(1, -1, 1, -1)``."""
    return np.cosh(R) * np.eye(4), np.sinh(R) * np.diag([1.0, -1.0, 1.0, -1.0])


@dataclass(frozen=True)
class GaussianChannelState:
    gamma_J: np.ndarray
    R: float
    source: str
    min_eigenvalue: float

    @property
    def physical(self) -> bool:
        return self.min_eigenvalue >= TOL.psd

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.gamma_J, "interleaved")


def jamiolkowski_state(S: np.ndarray, gamma_noise: np.ndarray | None, R: float,
                       source: str = "realized", strict: bool = True) -> GaussianChannelState:
    """Covariance of two two-mode-squeezed copies with the channel ``(S, gamma_noise)`` on one half.

    Ordering is the four atomic quadratures followed by the four reference
    quadratures, both interleaved. Raises :class:`UnphysicalState` when the
    result violates the uncertainty relation and ``strict`` is set.
    """
    S = np.asarray(S, dtype=float)
    gamma_noise = np.zeros((4, 4)) if gamma_noise is None else np.asarray(gamma_noise, dtype=float)
    if S.shape != (4, 4) or gamma_noise.shape != (4, 4):
        raise ContractViolation("S and gamma_noise must be 4x4")
    if not is_symmetric(gamma_noise):
        raise ContractViolation("noise covariance is not symmetric")
    if np.linalg.eigvalsh(gamma_noise).min() < TOL.psd * max(1.0, np.abs(gamma_noise).max()):
        raise ContractViolation("noise covariance is not positive semidefinite")
    A, C = tmss_blocks(R)
    top = S @ A @ S.T + gamma_noise
    top = 0.5 * (top + top.T)
    SC = S @ C
    gamma_J = np.block([[top, SC], [SC.T, A]])
    lam = uncertainty_min_eigenvalue(gamma_J, "interleaved")
    state = GaussianChannelState(gamma_J, float(R), source, lam)
    if strict and not state.physical:
        raise UnphysicalState(f"Jamiolkowski covariance violates uncertainty (min eig {lam:.3g})")
    return state


def ideal_state(S: np.ndarray, R: float) -> GaussianChannelState:
    return jamiolkowski_state(S, None, R, source="ideal")


def _eig_realized(M: np.ndarray):
    """Eigen-decomposition of the realised covariance with clamping of tiny negatives."""
    w, V = np.linalg.eigh(M)
    if w.min() < -1e-9 * max(1.0, abs(w).max()):
        raise ContractViolation(f"realized covariance has a negative eigenvalue {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    if w.min() <= 1e-12:
        raise SingularConfiguration("realized covariance is singular")
    return w, V


def error_metric(gamma_realized: np.ndarray, gamma_ideal: np.ndarray) -> float:
    """``E = 1 - min eig(G_r^{-1/2} G_i G_r^{-1/2})``.

    A negative ``E`` (ideal exceeds realized in some direction) is returned
    unchanged with a :class:`NegativeErrorWarning`.
    """
    Gr = np.asarray(gamma_realized, dtype=float)
    Gi = np.asarray(gamma_ideal, dtype=float)
    if Gr.shape != Gi.shape or Gr.ndim != 2 or Gr.shape[0] != Gr.shape[1]:
        raise ContractViolation("covariances must be square and of equal shape")
    if not (is_symmetric(Gr, TOL.sym * max(1.0, abs(Gr).max()))
            and is_symmetric(Gi, TOL.sym * max(1.0, abs(Gi).max()))):
        raise ContractViolation("covariances must be symmetric")
    # G_r^{-1/2} G_i G_r^{-1/2} expressed in the eigenbasis of G_r (a similarity transform)
    w, V = _eig_realized(Gr)
    M = (V.T @ Gi @ V) / np.sqrt(np.outer(w, w))
    m = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
    E = float(1.0 - m)
    if E < 0:
        warnings.warn(f"negative error {E:.3g}: ideal exceeds realized noise", NegativeErrorWarning,
                      stacklevel=2)
    return E


def golden_section_max(f, a: float, b: float, tol: float = 1e-3):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))`` with bracket width <= ``tol``."""
    a, b = min(a, b), max(a, b)
    h = b - a
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass(frozen=True)
class FidelityReport:
    E: float
    r_used: float
    R: float
    r_optimal: bool
    config: ProtocolConfig | None = None
    negative_error: bool = False

    @property
    def F(self) -> float:
        return 1.0 - self.E


@dataclass(frozen=True)
class RSearch:
    """Coarse grid over ``[r_min, r_max]`` followed by golden-section refinement."""

    r_min: float = 0.0
    r_max: float = 10.0
    step: float = 0.25
    tol: float = 1e-3

    def grid(self) -> np.ndarray:
        n = int(round((self.r_max - self.r_min) / self.step))
        return self.r_min + self.step * np.arange(n + 1)


@dataclass
class ChannelEvaluator:
    """Fidelity of one realised map against an ideal map, as a function of ``(r, R)``.

    The protocol is run once; every ``(r, R)`` evaluation costs an 8x8 eigenproblem.
    """

    S: np.ndarray
    noise: NoiseDecomposition
    S_ideal: np.ndarray
    config: ProtocolConfig | None = None
    _ideal_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_result(cls, result: LinearMapResult, S_ideal: np.ndarray) -> "ChannelEvaluator":
        return cls(result.S, integrated_noise(result), np.asarray(S_ideal), result.config)

    def _ideal(self, R):
        if R not in self._ideal_cache:
            self._ideal_cache[R] = ideal_state(self.S_ideal, R).gamma_J
        return self._ideal_cache[R]

    def error(self, r: float, R: float) -> float:
        realized = jamiolkowski_state(self.S, self.noise.covariance(r), R)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NegativeErrorWarning)
            return error_metric(realized.gamma_J, self._ideal(R))

    def fidelity(self, r: float, R: float) -> float:
        return 1.0 - self.error(r, R)

    def report(self, r: float, R: float) -> FidelityReport:
        E = self.error(r, R)
        return FidelityReport(E, float(r), float(R), False, self.config, E < 0)

    def optimize(self, R: float, search: RSearch = RSearch()) -> FidelityReport:
        rs = search.grid()
        Fs = np.array([self.fidelity(r, R) for r in rs])
        i = int(np.argmax(Fs))
        best_r, best_F = float(rs[i]), float(Fs[i])
        lo = max(search.r_min, best_r - search.step)
        hi = min(search.r_max, best_r + search.step)
        if hi > lo:
            r_ref, F_ref = golden_section_max(lambda r: self.fidelity(r, R), lo, hi, search.tol)
            if F_ref > best_F:
                best_r, best_F = float(r_ref), float(F_ref)
        E = 1.0 - best_F
        return FidelityReport(E, best_r, float(R), True, self.config, E < 0)


def fidelity_at_optimal_r(cfg: ProtocolConfig, target: QuadraticTarget | None = None,
                          search: RSearch = RSearch()) -> FidelityReport:
    """Run the protocol for ``target`` and maximise ``F = 1 - E`` over the light squeezing."""
    target = QuadraticTarget.from_config(cfg) if target is None else target
    result = run_protocol(cfg, gain_schedule_for_target(target, cfg))
    ev = ChannelEvaluator.from_result(result, target.ideal_map(cfg.window_time))
    return ev.optimize(cfg.jam_R, search)
