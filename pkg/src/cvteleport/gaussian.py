"""Covariance-matrix description of Gaussian states and the linear maps acting on them.

Conventions
-----------
* Vacuum covariance is the identity, ``Gamma_ij = <{X_i, X_j}_+>``.
* ``"interleaved"`` ordering is ``(x1, p1, x2, p2, ...)`` and is used for the atoms.
* ``"block"`` ordering is ``(x1, ..., xm, p1, ..., pm)`` and is used for the light.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ContractViolation


@dataclass(frozen=True)
class Tolerances:
    sym: float = 1e-10
    psd: float = -1e-9


TOL = Tolerances()

ORDERINGS = ("interleaved", "block")


def _check_ordering(ordering):
    if ordering not in ORDERINGS:
        raise ContractViolation(f"unknown quadrature ordering {ordering!r}")


def symplectic_form(m: int, ordering: str = "block") -> np.ndarray:
    """Return the ``2m x 2m`` symplectic form for ``m`` modes.

    ``"block"`` gives ``[[0, 1_m], [-1_m, 0]]``; ``"interleaved"`` gives the
    direct sum of ``m`` copies of ``[[0, 1], [-1, 0]]``.
    """
    _check_ordering(ordering)
    if ordering == "block":
        eye = np.eye(m)
        zero = np.zeros((m, m))
        return np.block([[zero, eye], [-eye, zero]])
    return np.kron(np.eye(m), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def block_permutation(m: int) -> np.ndarray:
    """Index array ``perm`` with ``v_block = v_interleaved[perm]``."""
    return np.concatenate([np.arange(0, 2 * m, 2), np.arange(1, 2 * m, 2)])


def to_block(obj: np.ndarray) -> np.ndarray:
    """Reorder a vector or square matrix from interleaved to block ordering."""
    obj = np.asarray(obj)
    perm = block_permutation(obj.shape[0] // 2)
    if obj.ndim == 1:
        return obj[perm]
    return obj[np.ix_(perm, perm)]


def to_interleaved(obj: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_block`."""
    obj = np.asarray(obj)
    inv = np.argsort(block_permutation(obj.shape[0] // 2))
    if obj.ndim == 1:
        return obj[inv]
    return obj[np.ix_(inv, inv)]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def is_symmetric(a: np.ndarray, tol: float = TOL.sym) -> bool:
    return bool(np.max(np.abs(a - a.T), initial=0.0) <= tol)


@dataclass(frozen=True)
class CovarianceState:
    """First and second moments of a Gaussian state.

    Arrays are copied and made read-only on construction.
    """

    displacement: np.ndarray
    covariance: np.ndarray
    ordering: str = "interleaved"

    def __post_init__(self):
        _check_ordering(self.ordering)
        d = _frozen(self.displacement)
        cov = _frozen(self.covariance)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ContractViolation(f"covariance must be 2m x 2m, got {cov.shape}")
        if d.shape != (cov.shape[0],):
            raise ContractViolation(
                f"displacement length {d.shape} does not match covariance {cov.shape}"
            )
        if not is_symmetric(cov):
            raise ContractViolation("covariance matrix is not symmetric")
        object.__setattr__(self, "displacement", d)
        object.__setattr__(self, "covariance", cov)

    @property
    def modes(self) -> int:
        return self.covariance.shape[0] // 2

    @classmethod
    def vacuum(cls, m: int, ordering: str = "interleaved") -> "CovarianceState":
        return cls(np.zeros(2 * m), np.eye(2 * m), ordering)

    def reordered(self, ordering: str) -> "CovarianceState":
        _check_ordering(ordering)
        if ordering == self.ordering:
            return self
        conv = to_block if ordering == "block" else to_interleaved
        return CovarianceState(conv(self.displacement), conv(self.covariance), ordering)


def apply_affine_map(state: CovarianceState, S, d=None, gamma_add=None) -> CovarianceState:
    """Return the state after ``X -> S X + d + noise``.

    The covariance becomes ``S Gamma S^T + gamma_add`` and the displacement ``S D + d``.
    ``S`` may be rectangular, in which case the output has ``S.shape[0]`` entries.
    """
    S = np.asarray(S, dtype=float)
    n_in = state.covariance.shape[0]
    if S.ndim != 2 or S.shape[1] != n_in:
        raise ContractViolation(f"map of shape {S.shape} cannot act on dimension {n_in}")
    n_out = S.shape[0]
    d = np.zeros(n_out) if d is None else np.asarray(d, dtype=float)
    if d.shape != (n_out,):
        raise ContractViolation(f"offset of shape {d.shape}, expected ({n_out},)")
    if gamma_add is None:
        gamma_add = np.zeros((n_out, n_out))
    gamma_add = np.asarray(gamma_add, dtype=float)
    if gamma_add.shape != (n_out, n_out):
        raise ContractViolation(f"added noise of shape {gamma_add.shape}, expected {(n_out, n_out)}")
    if not is_symmetric(gamma_add):
        raise ContractViolation("added noise matrix is not symmetric")
    if n_out and np.linalg.eigvalsh(gamma_add).min() < TOL.psd:
        raise ContractViolation("added noise matrix is not positive semidefinite")
    cov = S @ state.covariance @ S.T + gamma_add
    # congruence may leave ~ulp asymmetry
    cov = 0.5 * (cov + cov.T)
    return CovarianceState(S @ state.displacement + d, cov, state.ordering)


class PhysicalityReport(NamedTuple):
    physical: bool
    min_eigenvalue: float


def uncertainty_min_eigenvalue(cov: np.ndarray, ordering: str = "interleaved") -> float:
    """Smallest eigenvalue of ``cov + i sigma``."""
    cov = np.asarray(cov, dtype=float)
    if not is_symmetric(cov):
        raise ContractViolation("covariance matrix is not symmetric")
    sigma = symplectic_form(cov.shape[0] // 2, ordering)
    return float(np.linalg.eigvalsh(cov + 1j * sigma).min())


def check_physicality(state: CovarianceState) -> PhysicalityReport:
    """Test ``Gamma + i sigma >= 0`` at the package tolerance."""
    lam = uncertainty_min_eigenvalue(state.covariance, state.ordering)
    return PhysicalityReport(lam >= TOL.psd, lam)


def symplectic_eigenvalues(cov: np.ndarray, ordering: str = "interleaved") -> np.ndarray:
    """Williamson eigenvalues of ``cov`` (sorted ascending, one per mode)."""
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(m, ordering) @ cov))
    return np.sort(ev)[::2]


def is_symplectic(S: np.ndarray, ordering: str = "interleaved", tol: float = 1e-10) -> bool:
    sigma = symplectic_form(S.shape[0] // 2, ordering)
    return bool(np.max(np.abs(S @ sigma @ S.T - sigma)) <= tol)


def rotation_frame_matrix(omega: float, t: float) -> np.ndarray:
    """Single-mode rotation ``[[cos wt, -sin wt], [sin wt, cos wt]]``."""
    c, s = np.cos(omega * t), np.sin(omega * t)
    return np.array([[c, -s], [s, c]])


def single_mode_squeezer(r: float) -> np.ndarray:
    """``diag(e^-r, e^r)``: squeezes x, anti-squeezes p."""
    return np.diag([np.exp(-r), np.exp(r)])


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out
